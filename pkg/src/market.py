"""市場データの計算

- 対数リターン r_t = ln(CLOSE_t / CLOSE_{t-1})
- 直近 N 日のリターンによる年率換算ボラティリティ（母分散 1/N、フラグで標本分散）
- 翌日のボラティリティ（またはリターン）が上がるかどうかの方向ラベル
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import ANNUALIZATION, VOLATILITY_WINDOW
from .corpus import PriceBar
from .errors import ConfigError, DataError
from .utils import format_float, write_csv

logger = logging.getLogger(__name__)

MARKET_HEADER = ("date", "close", "return", "volatility", "direction", "return_direction")


class Direction(str, Enum):
    UP = "UP"
    DOWN = "DOWN"


@dataclass(frozen=True)
class DirectionLabel:
    """day t のラベル（t と t+1 の比較）"""
    date: date
    direction: Direction


def log_returns(closes: Sequence[float]) -> np.ndarray:
    """対数リターン

    Raises:
        DataError: 2点未満、または正でない終値
    """
    c = np.asarray(closes, dtype=np.float64)
    if c.ndim != 1 or c.size < 2:
        raise DataError(f"リターンの計算には2点以上の終値が必要です: {c.size} 点")
    if not np.all(c > 0):
        bad = int(np.argmin(c > 0))
        raise DataError(f"終値が正ではありません: index={bad} close={c[bad]}")
    return np.log(c[1:] / c[:-1])


def rolling_volatility(
    returns: Sequence[float],
    window: int = VOLATILITY_WINDOW,
    sample: bool = False,
    annualization: int = ANNUALIZATION,
) -> np.ndarray:
    """直近 window 本のリターンによる年率換算ボラティリティ

    Vol = sqrt( (1/N) Σ (r - r̄)² ) · sqrt(252)
    sample=True なら 1/(N-1)。出力の i 番目は returns[i : i+window] に対応する。

    Raises:
        ConfigError: window < 2
        DataError: window がリターンの本数より大きい
    """
    if window < 2:
        raise ConfigError(f"ボラティリティの窓は2以上にしてください: {window}")
    r = np.asarray(returns, dtype=np.float64)
    if r.size < window:
        raise DataError(f"ボラティリティの窓 ({window}) がリターンの本数 ({r.size}) より大きいです")

    windows = sliding_window_view(r, window)
    # 2パス計算（逐次更新による誤差を避ける）
    mean = windows.mean(axis=1, keepdims=True)
    dev = windows - mean
    divisor = window - 1 if sample else window
    var = (dev * dev).sum(axis=1) / divisor
    var[np.ptp(windows, axis=1) == 0] = 0.0
    return np.sqrt(var) * math.sqrt(annualization)


def direction_labels(dates: Sequence[date], values: Sequence[float]) -> list[DirectionLabel]:
    """方向ラベル（values[t+1] > values[t] なら UP、同値は DOWN）

    最後の日にはラベルを付けない。
    """
    if len(dates) != len(values):
        raise DataError(f"日付と値の長さが一致しません: {len(dates)} != {len(values)}")
    v = np.asarray(values, dtype=np.float64)
    labels = [
        DirectionLabel(date=dates[t], direction=Direction.UP if v[t + 1] > v[t] else Direction.DOWN)
        for t in range(len(v) - 1)
    ]
    ties = count_ties(v)
    if ties:
        logger.info("方向ラベルの同値（DOWN 扱い）: %d / %d", ties, len(labels))
    return labels


def count_ties(values: Sequence[float]) -> int:
    """隣り合う値が等しい箇所の数"""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0
    return int(np.count_nonzero(v[1:] == v[:-1]))


@dataclass
class MarketSeries:
    """終値・リターン・ボラティリティ・方向ラベル"""
    dates: list[date]
    closes: np.ndarray
    returns: np.ndarray  # dates[1:] に対応
    volatility: np.ndarray  # dates[window:] に対応
    window: int
    annualization: int = ANNUALIZATION
    sample: bool = False
    labels: list[DirectionLabel] = field(default_factory=list)  # ボラティリティの方向
    return_labels: list[DirectionLabel] = field(default_factory=list)  # リターンの方向
    volatility_ties: int = 0
    return_ties: int = 0

    @property
    def return_dates(self) -> list[date]:
        return self.dates[1:]

    @property
    def volatility_dates(self) -> list[date]:
        return self.dates[self.window:]

    def target(self, name: str) -> dict[date, float]:
        """日付 → 値（"returns" または "volatility"）"""
        if name == "returns":
            return dict(zip(self.return_dates, self.returns.tolist()))
        if name == "volatility":
            return dict(zip(self.volatility_dates, self.volatility.tolist()))
        raise ConfigError(f"未知の市場系列です: {name}")

    def to_rows(self) -> list[list[str]]:
        ret = self.target("returns")
        vol = self.target("volatility")
        vol_dir = {lab.date: lab.direction.value for lab in self.labels}
        ret_dir = {lab.date: lab.direction.value for lab in self.return_labels}
        return [
            [
                d.isoformat(),
                format_float(float(close)),
                format_float(ret.get(d)),
                format_float(vol.get(d)),
                vol_dir.get(d, ""),
                ret_dir.get(d, ""),
            ]
            for d, close in zip(self.dates, self.closes)
        ]


def build_market_series(
    bars: Sequence[PriceBar],
    window: int = VOLATILITY_WINDOW,
    sample: bool = False,
) -> MarketSeries:
    """株価から市場系列を作る

    Args:
        bars: 日付昇順の終値
        window: ボラティリティの窓 N
        sample: True なら標本分散 1/(N-1)

    Returns:
        MarketSeries
    """
    dates = [b.date for b in bars]
    closes = np.asarray([b.close for b in bars], dtype=np.float64)
    returns = log_returns(closes)
    volatility = rolling_volatility(returns, window, sample=sample)
    vol_dates = dates[window:]

    series = MarketSeries(
        dates=dates,
        closes=closes,
        returns=returns,
        volatility=volatility,
        window=window,
        sample=sample,
        labels=direction_labels(vol_dates, volatility) if len(vol_dates) >= 2 else [],
        return_labels=direction_labels(dates[1:], returns) if len(returns) >= 2 else [],
        volatility_ties=count_ties(volatility),
        return_ties=count_ties(returns),
    )
    if series.labels:
        n_up = sum(1 for lab in series.labels if lab.direction is Direction.UP)
        logger.info(
            "ボラティリティ方向: UP=%d DOWN=%d（同値 %d）",
            n_up, len(series.labels) - n_up, series.volatility_ties,
        )
    return series


def write_market_csv(path: Path, series: MarketSeries, meta: Optional[str] = None) -> Path:
    """市場 CSV を書き出す"""
    return write_csv(path, MARKET_HEADER, series.to_rows(), meta=meta)
