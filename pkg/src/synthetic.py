"""合成データの生成

相関・分類の検証用に、信号を埋め込んだ文書と株価を作る。

- 株価: 平穏期 / 危機期を切り替えるボラティリティで幾何ブラウン運動（小数4桁に丸める）
- 感情: day t のポジティブ文書の割合を翌取引日のボラティリティの単調減少関数にする
- トピック: 翌日ボラティリティが上がる日は「危機テーマ」の語を、下がる日は「平穏テーマ」の語を
  8:2 の割合で混ぜる
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ANNUALIZATION, VOLATILITY_WINDOW
from .corpus import Document, PriceBar, Source
from .market import Direction, build_market_series
from .utils import format_float, write_csv

logger = logging.getLogger(__name__)

POSITIVE_WORDS = ("good", "great", "strong", "gain", "profit", "growth", "success", "improve", "optimistic", "boost")
NEGATIVE_WORDS = ("bad", "weak", "loss", "crash", "fear", "collapse", "threat", "risk", "panic", "worry")
# 感情辞書に無い名詞
CALM_THEME = ("harbor", "meadow", "orchard", "library", "garden", "village", "bakery", "cottage", "lantern", "lighthouse")
CRISIS_THEME = ("refinery", "tanker", "pipeline", "reactor", "warehouse", "turbine", "barrel", "drilling", "offshore", "quarry")

THEME_MIX = 0.8  # 方向ラベルに対応するテーマの割合
THEME_WORDS_PER_DOC = 4
SENTIMENT_WORDS_PER_DOC = 2
SHARE_FLOOR = 0.1  # ポジティブ割合の下限（上限は 1 - SHARE_FLOOR）

# (年率ボラティリティ, 翌日も同じ状態にとどまる確率)
REGIMES = ((0.12, 0.95), (0.45, 0.90))


@dataclass(frozen=True)
class SyntheticCorpus:
    """生成した文書と株価"""
    documents: list[Document]
    bars: list[PriceBar]
    seed: int


def trading_days(start: date, n_days: int) -> list[date]:
    """start 以降の平日 n_days 日"""
    days: list[date] = []
    d = start
    while len(days) < n_days:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def simulate_prices(days: Sequence[date], rng: np.random.Generator, start_price: float = 100.0) -> list[PriceBar]:
    """状態切替ボラティリティの幾何ブラウン運動"""
    state = 0
    price = start_price
    bars = [PriceBar(date=days[0], close=round(price, 4))]
    for d in days[1:]:
        vol, stay = REGIMES[state]
        if rng.random() > stay:
            state = 1 - state
        sigma = vol / math.sqrt(ANNUALIZATION)
        price *= math.exp(-0.5 * sigma * sigma + sigma * rng.standard_normal())
        bars.append(PriceBar(date=d, close=round(price, 4)))
    return bars


def positive_shares(volatility: dict[date, float], days: Sequence[date]) -> dict[date, float]:
    """day t のポジティブ割合 q_t = 0.1 + 0.8·(vmax - v_{t+1})/(vmax - vmin)"""
    values = list(volatility.values())
    vmin, vmax = min(values), max(values)
    span = vmax - vmin if vmax > vmin else 1.0
    shares: dict[date, float] = {}
    for today, tomorrow in zip(days, days[1:]):
        if tomorrow in volatility:
            shares[today] = SHARE_FLOOR + (1 - 2 * SHARE_FLOOR) * (vmax - volatility[tomorrow]) / span
    return shares


def _document_text(rng: np.random.Generator, positive: bool, crisis_theme: bool) -> str:
    theme = CRISIS_THEME if crisis_theme else CALM_THEME
    words = list(rng.choice(theme, size=THEME_WORDS_PER_DOC, replace=False))
    mood = POSITIVE_WORDS if positive else NEGATIVE_WORDS
    words += list(rng.choice(mood, size=SENTIMENT_WORDS_PER_DOC, replace=False))
    rng.shuffle(words)
    return "Market news: " + " ".join(str(w) for w in words)


def generate(
    seed: int,
    n_days: int = 160,
    docs_per_day: int = 8,
    start: date = date(2019, 1, 2),
    window: int = VOLATILITY_WINDOW,
    source: Source = Source.HEADLINE,
) -> SyntheticCorpus:
    """信号を埋め込んだ合成コーパスを生成

    文書は取引日にのみ置く。ボラティリティが定義されない先頭の日は
    ポジティブ割合 0.5、テーマは半々にする。
    """
    rng = np.random.default_rng(seed)
    days = trading_days(start, n_days)
    bars = simulate_prices(days, rng)
    market = build_market_series(bars, window)
    shares = positive_shares(market.target("volatility"), days)
    labels = {lab.date: lab.direction for lab in market.labels}

    documents: list[Document] = []
    for day in days:
        q = shares.get(day, 0.5)
        label = labels.get(day)
        n_pos = int(round(q * docs_per_day))
        for j in range(docs_per_day):
            if label is None:
                crisis = bool(rng.random() < 0.5)
            else:
                main = label is Direction.UP
                crisis = main if rng.random() < THEME_MIX else not main
            ts = datetime(day.year, day.month, day.day, 13, 0, tzinfo=timezone.utc) + timedelta(minutes=7 * j)
            documents.append(
                Document(
                    id=f"syn{seed}-{day.isoformat()}-{j:02d}",
                    ts=ts,
                    text=_document_text(rng, positive=j < n_pos, crisis_theme=crisis),
                    source=source,
                )
            )
    logger.info("合成データ: 取引日=%d 文書=%d seed=%d", len(days), len(documents), seed)
    return SyntheticCorpus(documents=documents, bars=bars, seed=seed)


def write_documents(path: Path, documents: Sequence[Document]) -> Path:
    """文書を1行1レコードの JSON で書き出す"""
    lines = [
        json.dumps(
            {
                "id": doc.id,
                "ts": doc.ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "text": doc.text,
                "source": doc.source.value,
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        for doc in documents
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_prices(path: Path, bars: Sequence[PriceBar]) -> Path:
    """株価を "date,close" CSV で書き出す"""
    return write_csv(path, ("date", "close"), ([b.date.isoformat(), format_float(b.close)] for b in bars))


def write_corpus(out_dir: Path, corpus: SyntheticCorpus, name: Optional[str] = None) -> tuple[Path, Path]:
    """文書と株価をディレクトリに書き出す"""
    stem = name or f"synthetic_{corpus.seed}"
    docs_path = write_documents(out_dir / f"{stem}.jsonl", corpus.documents)
    prices_path = write_prices(out_dir / f"{stem}_prices.csv", corpus.bars)
    return docs_path, prices_path
