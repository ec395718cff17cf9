"""相関とグレンジャー因果性

- Pearson の相関係数と両側 p 値（t 分布、自由度 n-2）
- 同日 / 1日ずらしの相関（感情 t 対 市場 t+lag）
- 2変数のグレンジャー因果性（入れ子の OLS と F 検定）
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .aggregate import DailySentiment
from .config import CORRELATION_LAGS, GRANGER_LAGS, MARKET_TARGETS, SENTIMENT_DIMS, SIGNIFICANCE_LEVEL
from .errors import DataError, NumericalError, SenvolError
from .market import MarketSeries
from .special_functions import f_sf, reg_incomplete_beta

logger = logging.getLogger(__name__)

# 正規方程式（Cholesky）を使う条件数の上限。超えたら QR 分解で解く
CHOLESKY_MAX_CONDITION = 1e10


@dataclass(frozen=True)
class CorrelationResult:
    """相関係数と p 値"""
    r: float
    p_value: float
    n: int
    lag: int = 0

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL


@dataclass(frozen=True)
class OlsFit:
    """最小二乗推定の結果"""
    coefficients: np.ndarray  # [α, β_1..β_k, (λ_1..λ_k)]
    rss: float
    n_obs: int  # T_eff
    lag: int
    method: str  # "cholesky" / "qr"


class CausalDirection(str, Enum):
    X_TO_Y = "X->Y"
    Y_TO_X = "Y->X"


@dataclass(frozen=True)
class GrangerResult:
    """グレンジャー因果性検定の結果"""
    lag: int
    f_stat: float
    p_value: float
    direction: CausalDirection
    df1: int
    df2: int
    restricted: OlsFit
    unrestricted: OlsFit

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL


@dataclass(frozen=True)
class CorrelationCell:
    """相関グリッドの1セル（計算できなかったセルは result=None）"""
    dataset: str
    sentiment_dim: str
    target: str
    lag: int
    result: Optional[CorrelationResult] = None
    note: str = ""


@dataclass(frozen=True)
class GrangerCell:
    """グレンジャー検定グリッドの1セル"""
    dataset: str
    cause: str
    effect: str
    lag: int
    result: Optional[GrangerResult] = None
    note: str = ""

    @property
    def direction_label(self) -> str:
        return f"{self.dataset}:{self.cause}->{self.effect}"


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson の相関係数

    p 値は t = r·sqrt((n-2)/(1-r²)) の両側確率で、I_{1-r²}((n-2)/2, 1/2) と等しい。

    Raises:
        DataError: 長さ不一致、3点未満
        NumericalError: 分散が 0（相関が定義できない）
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise DataError(f"系列の長さが一致しません: {xa.shape} != {ya.shape}")
    n = xa.size
    if n < 3:
        raise DataError(f"相関の計算には3点以上が必要です: n={n}")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise NumericalError("系列に有限でない値が含まれています")

    xm = xa - xa.mean()
    ym = ya - ya.mean()
    sxx = float(np.dot(xm, xm))
    syy = float(np.dot(ym, ym))
    if sxx == 0.0 or syy == 0.0:
        raise NumericalError("相関が定義できません（分散が 0 の系列）")
    r = float(np.dot(xm, ym)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))

    if abs(r) == 1.0:
        p = 0.0
    else:
        p = reg_incomplete_beta((n - 2) / 2.0, 0.5, 1.0 - r * r)
    return CorrelationResult(r=r, p_value=p, n=n, lag=0)


def align_lagged(
    sentiment: Mapping[date, float],
    target: Mapping[date, float],
    trading_days: Sequence[date],
    lag: int,
) -> tuple[list[float], list[float]]:
    """(感情_t, 市場_{t+lag}) の組を作る（t+lag は取引日で数える）"""
    xs: list[float] = []
    ys: list[float] = []
    for i in range(len(trading_days) - lag):
        d = trading_days[i]
        d_lag = trading_days[i + lag]
        if d in sentiment and d_lag in target:
            xs.append(sentiment[d])
            ys.append(target[d_lag])
    return xs, ys


def lagged_correlation(
    sent: Sequence[DailySentiment],
    mkt: MarketSeries,
    field_name: str,
    target: str,
    lag: int,
) -> CorrelationResult:
    """感情の1次元と市場系列の時間差相関

    Args:
        sent: 日次感情
        mkt: 市場系列
        field_name: neg / neu / pos / compound / sentd
        target: returns / volatility
        lag: 0（同日）または 1（翌取引日）
    """
    if lag < 0:
        raise DataError(f"ラグは 0 以上にしてください: {lag}")
    sentiment = {d.trading_day: d.value(field_name) for d in sent}
    xs, ys = align_lagged(sentiment, mkt.target(target), mkt.dates, lag)
    if len(xs) < 3:
        raise DataError(f"重なる日数が不足しています: {field_name} × {target} lag={lag} n={len(xs)}")
    res = pearson(xs, ys)
    return CorrelationResult(r=res.r, p_value=res.p_value, n=res.n, lag=lag)


def correlation_grid(
    datasets: Sequence[tuple[str, Sequence[DailySentiment]]],
    mkt: MarketSeries,
    dims: Sequence[str] = SENTIMENT_DIMS,
    targets: Sequence[str] = MARKET_TARGETS,
    lags: Sequence[int] = CORRELATION_LAGS,
) -> list[CorrelationCell]:
    """データセット × 感情次元 × 市場系列 × ラグ の相関グリッド

    計算できないセルも result=None で出力する。
    """
    cells: list[CorrelationCell] = []
    for name, series in datasets:
        for dim in dims:
            for target in targets:
                for lag in lags:
                    try:
                        res = lagged_correlation(series, mkt, dim, target, lag)
                        cells.append(CorrelationCell(name, dim, target, lag, res))
                    except SenvolError as e:
                        logger.warning("相関を計算できません: %s %s×%s lag=%d: %s", name, dim, target, lag, e)
                        cells.append(CorrelationCell(name, dim, target, lag, None, str(e)))
    return cells


def lag_matrix(series: np.ndarray, k: int) -> np.ndarray:
    """列 j（0始まり）が series_{t-(j+1)} の行列（t = k..T-1）"""
    t_total = series.size
    return np.column_stack([series[k - j - 1 : t_total - j - 1] for j in range(k)])


def ols_fit(design: np.ndarray, response: np.ndarray, lag: int) -> OlsFit:
    """最小二乗推定

    条件数が小さければ正規方程式を Cholesky 分解で、大きければ QR 分解で解く。

    Raises:
        NumericalError: 計画行列の列が一次従属（"collinear lags"）
    """
    n_obs, n_cols = design.shape
    if np.linalg.matrix_rank(design) < n_cols:
        raise NumericalError(f"ラグ項が一次従属です（collinear lags）: 列数={n_cols}")

    gram = design.T @ design
    rhs = design.T @ response
    if np.linalg.cond(gram) < CHOLESKY_MAX_CONDITION:
        chol = np.linalg.cholesky(gram)
        coef = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        method = "cholesky"
    else:
        q, r = np.linalg.qr(design)
        coef = np.linalg.solve(r, q.T @ response)
        method = "qr"

    resid = response - design @ coef
    rss = float(resid @ resid)
    return OlsFit(coefficients=coef, rss=rss, n_obs=n_obs, lag=lag, method=method)


def granger_test(
    x: Sequence[float],
    y: Sequence[float],
    k: int,
    direction: CausalDirection = CausalDirection.X_TO_Y,
) -> GrangerResult:
    """x が y をグレンジャー因果するかの F 検定

    制約モデル:   y_t = α + Σ β_j y_{t-j}
    非制約モデル: y_t = α + Σ β_j y_{t-j} + Σ λ_j x_{t-j}
    F = ((RSS_r - RSS_u)/k) / (RSS_u/(T_eff - 2k - 1))

    direction=Y_TO_X なら x と y を入れ替えて検定する。

    Raises:
        DataError: 長さ不一致、k < 1、系列が短すぎる
        NumericalError: 計画行列が特異
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise DataError(f"系列の長さが一致しません: {xa.shape} != {ya.shape}")
    if k < 1:
        raise DataError(f"ラグ次数は1以上にしてください: {k}")
    if direction is CausalDirection.Y_TO_X:
        xa, ya = ya, xa

    t_total = xa.size
    n_obs = t_total - k
    df2 = n_obs - 2 * k - 1
    if df2 < 1:
        raise DataError(f"系列が短すぎます: T={t_total}, k={k}（残差の自由度 {df2}）")

    response = ya[k:]
    const = np.ones((n_obs, 1))
    own = lag_matrix(ya, k)
    cross = lag_matrix(xa, k)
    restricted = ols_fit(np.hstack([const, own]), response, k)
    unrestricted = ols_fit(np.hstack([const, own, cross]), response, k)

    if unrestricted.rss > restricted.rss + 1e-9:
        logger.warning("非制約モデルの RSS が制約モデルより大きくなりました: %r > %r", unrestricted.rss, restricted.rss)
    if unrestricted.rss == 0.0:
        f_stat = math.inf
        p = 0.0
    else:
        f_stat = max(0.0, ((restricted.rss - unrestricted.rss) / k) / (unrestricted.rss / df2))
        p = f_sf(f_stat, k, df2)

    return GrangerResult(
        lag=k,
        f_stat=f_stat,
        p_value=p,
        direction=direction,
        df1=k,
        df2=df2,
        restricted=restricted,
        unrestricted=unrestricted,
    )


def align_same_day(a: Mapping[date, float], b: Mapping[date, float]) -> tuple[list[float], list[float]]:
    """両方に値がある日付で内部結合（補間はしない）"""
    common = sorted(set(a) & set(b))
    return [a[d] for d in common], [b[d] for d in common]


def granger_grid(
    datasets: Sequence[tuple[str, Sequence[DailySentiment]]],
    mkt: MarketSeries,
    dims: Sequence[str] = SENTIMENT_DIMS,
    targets: Sequence[str] = MARKET_TARGETS,
    lags: Sequence[int] = GRANGER_LAGS,
) -> list[GrangerCell]:
    """感情 → 市場 と 市場 → 感情 の両方向を全ラグで検定"""
    cells: list[GrangerCell] = []
    for name, series in datasets:
        for dim in dims:
            sentiment = {d.trading_day: d.value(dim) for d in series}
            for target in targets:
                xs, ys = align_same_day(sentiment, mkt.target(target))
                for lag in lags:
                    for direction, cause, effect in (
                        (CausalDirection.X_TO_Y, dim, target),
                        (CausalDirection.Y_TO_X, target, dim),
                    ):
                        try:
                            res = granger_test(xs, ys, lag, direction)
                            cells.append(GrangerCell(name, cause, effect, lag, res))
                        except SenvolError as e:
                            logger.warning("グレンジャー検定を実行できません: %s %s->%s k=%d: %s",
                                           name, cause, effect, lag, e)
                            cells.append(GrangerCell(name, cause, effect, lag, None, str(e)))
    return cells
