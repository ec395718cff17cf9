"""日次の感情集計

1取引日の文書スコアを平均し、極性ラベルの件数から
ラプラス補正付きの日次感情 Sentd = (Npos - Nneg) / (Npos + Nneut + Nneg + 3) を求める。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .corpus import DayBucket
from .sentiment import DEFAULT_RULES, Lexicon, Polarity, RuleConfig, SentimentScores, classify_polarity, score_document
from .utils import format_float, write_csv

logger = logging.getLogger(__name__)

LAPLACE_PSEUDO_COUNT = 3  # 3クラス分類の補正

DAILY_HEADER = ("date", "neg", "pos", "neu", "compound", "sentd", "n_pos", "n_neg", "n_neut", "n_docs")


@dataclass(frozen=True)
class DailySentiment:
    """1取引日の感情集計"""
    trading_day: date
    mean_neg: float = 0.0
    mean_neu: float = 0.0
    mean_pos: float = 0.0
    mean_compound: float = 0.0
    n_pos: int = 0
    n_neg: int = 0
    n_neut: int = 0
    sentd: float = 0.0
    n_docs: int = 0

    def value(self, dim: str) -> float:
        """相関分析で使う次元の値（neg / neu / pos / compound / sentd）"""
        return {
            "neg": self.mean_neg,
            "neu": self.mean_neu,
            "pos": self.mean_pos,
            "compound": self.mean_compound,
            "sentd": self.sentd,
        }[dim]

    def to_row(self) -> list[str]:
        return [
            self.trading_day.isoformat(),
            format_float(self.mean_neg),
            format_float(self.mean_pos),
            format_float(self.mean_neu),
            format_float(self.mean_compound),
            format_float(self.sentd),
            str(self.n_pos),
            str(self.n_neg),
            str(self.n_neut),
            str(self.n_docs),
        ]


def sentd_fraction(n_pos: int, n_neg: int, n_neut: int) -> Fraction:
    """Sentd の有理数値"""
    return Fraction(n_pos - n_neg, n_pos + n_neut + n_neg + LAPLACE_PSEUDO_COUNT)


def sentd(n_pos: int, n_neg: int, n_neut: int) -> float:
    """ラプラス補正付き日次感情（最も近い浮動小数点値）"""
    return float(sentd_fraction(n_pos, n_neg, n_neut))


def _mean(values: list[float]) -> float:
    # 件数で割る単純平均（文書の順序に依存しない）
    return sum(sorted(values)) / len(values)


def summarize_scores(trading_day: date, scores: Sequence[SentimentScores], cfg: RuleConfig = DEFAULT_RULES) -> DailySentiment:
    """スコア済みの文書から日次集計を作る

    Args:
        trading_day: 取引日
        scores: その日の文書スコア
        cfg: 極性判定の閾値

    Returns:
        DailySentiment: 文書が無ければ全て 0
    """
    if not scores:
        return DailySentiment(trading_day=trading_day)

    counts = {Polarity.POSITIVE: 0, Polarity.NEGATIVE: 0, Polarity.NEUTRAL: 0}
    for s in scores:
        counts[classify_polarity(s, cfg)] += 1
    n_pos = counts[Polarity.POSITIVE]
    n_neg = counts[Polarity.NEGATIVE]
    n_neut = counts[Polarity.NEUTRAL]

    return DailySentiment(
        trading_day=trading_day,
        mean_neg=_mean([s.neg for s in scores]),
        mean_neu=_mean([s.neu for s in scores]),
        mean_pos=_mean([s.pos for s in scores]),
        mean_compound=_mean([s.compound for s in scores]),
        n_pos=n_pos,
        n_neg=n_neg,
        n_neut=n_neut,
        sentd=sentd(n_pos, n_neg, n_neut),
        n_docs=len(scores),
    )


def aggregate_day(bucket: DayBucket, lex: Lexicon, cfg: RuleConfig = DEFAULT_RULES) -> DailySentiment:
    """1取引日のバケットを集計"""
    scores = [score_document(doc, lex, cfg) for doc in bucket.documents]
    return summarize_scores(bucket.trading_day, scores, cfg)


def build_daily_series(
    buckets: Sequence[DayBucket],
    lex: Lexicon,
    cfg: RuleConfig = DEFAULT_RULES,
) -> list[DailySentiment]:
    """全取引日の日次集計（取引日順、文書の無い日も出力）"""
    ordered = sorted(buckets, key=lambda b: b.trading_day)
    series = [aggregate_day(b, lex, cfg) for b in ordered]
    empty_days = sum(1 for d in series if d.n_docs == 0)
    if empty_days:
        logger.info("文書の無い取引日: %d / %d", empty_days, len(series))
    return series


def write_daily_csv(path: Path, series: Sequence[DailySentiment], meta: Optional[str] = None) -> Path:
    """日次感情 CSV を書き出す"""
    return write_csv(path, DAILY_HEADER, (d.to_row() for d in series), meta=meta)
