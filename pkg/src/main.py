"""メインスクリプト

金融テキストの感情と株価ボラティリティの関係を分析するパイプライン

処理フロー:
1. 文書を読み込んで感情スコアを付ける（score）
2. 取引日ごとに集計する（aggregate）
3. 株価から対数リターン・ボラティリティ・方向ラベルを作る（market）
4. 相関とグレンジャー因果性を検定する（correlate / granger）
5. LDA でトピックを学習し、日次の特徴ベクトルを作る（topics-train / topics-infer）
6. 翌日のボラティリティの方向をロジスティック回帰で予測・評価する（classify-train / classify-eval）

使用方法:
    python -m src.main pipeline --config fixtures/example.conf
    python -m src.main score --documents data/tweets.jsonl --source tweet
    python -m src.main correlate --documents a.jsonl --documents b.jsonl --prices prices.csv

終了コード: 0 成功 / 1 実行時・データエラー / 2 使い方・設定エラー
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from .config import TOOL_NAME, TOOL_VERSION, RunConfig, load_run_config
from .errors import SenvolError
from .pipeline import COMMANDS, STAGES, cmd_pipeline

# 複数回指定できるフラグ
_REPEATABLE = {"documents", "dataset_names"}


def _is_bool(annotation: Any) -> bool:
    return annotation is bool


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """RunConfig の全キーを同名のフラグとして追加（volatility_window → --volatility-window）"""
    group = parser.add_argument_group("設定（設定ファイルの値を上書き）")
    group.add_argument("--config", type=Path, help="KEY=VALUE 形式の設定ファイル")
    for name, info in RunConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        if _is_bool(info.annotation):
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        elif name in _REPEATABLE:
            flags = [flag, flag.rstrip("s")] if name == "dataset_names" else [flag]
            group.add_argument(*flags, dest=name, action="append", metavar="VALUE")
        else:
            group.add_argument(flag, dest=name, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="金融テキストの感情 × ボラティリティ分析パイプライン",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="ライブラリのログ（INFO）を表示")
    common.add_argument("-q", "--quiet", action="store_true", help="進捗表示を抑制")
    add_config_flags(common)

    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__)
    sub.add_parser("pipeline", parents=[common], help="全ステージを実行して manifest.json を出力")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    return {name: getattr(args, name, None) for name in RunConfig.model_fields}


def run(argv: Optional[list[str]] = None) -> int:
    """CLI 本体（終了コードを返す）"""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    echo = (lambda _: None) if args.quiet else print

    try:
        cfg = load_run_config(args.config, overrides_from_args(args))
        echo(f"処理中: {args.command}")
        echo(f"データセット: {', '.join(name for name, _ in cfg.datasets()) or '-'}")
        echo(f"出力先: {cfg.output_dir}")
        echo(f"seed: {cfg.seed}")
        echo("-" * 50)

        if args.command == "pipeline":
            manifest = cmd_pipeline(cfg, echo)
            n_files = sum(len(s["files"]) for s in manifest["stages"].values())
            summary = f"ステージ {len(manifest['stages'])}, 成果物 {n_files}"
        else:
            result = COMMANDS[args.command](cfg, echo)
            summary = f"成果物 {len(result.files)}"
    except SenvolError as e:
        print(f"エラー: {e}", file=sys.stderr)
        return e.exit_code

    echo("-" * 50)
    echo(f"処理完了: {summary}")
    return 0


def main():
    """メイン関数"""
    sys.exit(run())


if __name__ == "__main__":
    main()
