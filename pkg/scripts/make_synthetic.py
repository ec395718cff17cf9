"""合成データの生成スクリプト

翌日のボラティリティと連動する文書と株価を書き出す（動作確認・デモ用）。

使用方法:
    python -m scripts.make_synthetic --seed 1 --out data/synthetic
    python -m scripts.make_synthetic --seed 1 --days 250 --docs-per-day 12 --source tweet
"""
import argparse
import sys
from datetime import date
from pathlib import Path

from src.config import BASE_DIR, VOLATILITY_WINDOW
from src.corpus import Source
from src.synthetic import generate, write_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description="合成コーパス（文書 JSONL + 株価 CSV）を生成")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--days", type=int, default=160, help="取引日数")
    parser.add_argument("--docs-per-day", type=int, default=8)
    parser.add_argument("--start", type=date.fromisoformat, default=date(2019, 1, 2), help="開始日 YYYY-MM-DD")
    parser.add_argument("--window", type=int, default=VOLATILITY_WINDOW, help="信号に使うボラティリティの窓")
    parser.add_argument("--source", choices=[s.value for s in Source], default=Source.HEADLINE.value)
    parser.add_argument("--name", help="出力ファイル名の stem（省略時 synthetic_<seed>）")
    parser.add_argument("--out", type=Path, default=BASE_DIR / "data" / "synthetic")
    args = parser.parse_args()

    print(f"処理中: seed={args.seed} 取引日={args.days} 文書/日={args.docs_per_day}")
    corpus = generate(
        args.seed,
        n_days=args.days,
        docs_per_day=args.docs_per_day,
        start=args.start,
        window=args.window,
        source=Source(args.source),
    )
    docs_path, prices_path = write_corpus(args.out, corpus, args.name)
    print("-" * 50)
    print(f"  文書: {len(corpus.documents)} 件 → {docs_path}")
    print(f"  株価: {len(corpus.bars)} 日 → {prices_path}")
    print(f"処理完了: python -m src.main pipeline --documents {docs_path} --prices {prices_path} --volatility-window {args.window}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
