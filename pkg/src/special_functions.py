"""特殊関数（p値の計算用）

正則化不完全ベータ関数を連分数（修正 Lentz 法）で評価し、
Student の t 分布・F 分布の累積分布関数をそこから求める。
"""
from __future__ import annotations

import math

from .errors import NumericalError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 10_000


def ln_gamma(x: float) -> float:
    """ln Γ(x)（x > 0）"""
    if not (x > 0) or math.isinf(x):
        raise NumericalError(f"ln_gamma の引数が定義域外です: {x}")
    return math.lgamma(x)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericalError(f"不完全ベータ関数の連分数が収束しません: a={a}, b={b}, x={x}")


def reg_incomplete_beta(a: float, b: float, x: float) -> float:
    """正則化不完全ベータ関数 I_x(a, b)

    Args:
        a, b: 正のパラメータ
        x: [0, 1] の値

    Raises:
        NumericalError: 定義域外の引数
    """
    if not (a > 0 and b > 0) or math.isinf(a) or math.isinf(b):
        raise NumericalError(f"不完全ベータ関数のパラメータが定義域外です: a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise NumericalError(f"不完全ベータ関数の x が [0, 1] の外です: {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0

    ln_front = (
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # 収束の速い側で評価する
    if x < (a + 1.0) / (a + b + 2.0):
        value = front * _beta_continued_fraction(a, b, x) / a
    else:
        value = 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, value))


def _check_df(**dfs: float) -> None:
    for name, value in dfs.items():
        if not value > 0:
            raise NumericalError(f"自由度 {name} は正にしてください: {value}")


def t_cdf(t: float, df: float) -> float:
    """Student の t 分布の累積分布関数 P(T ≤ t)"""
    _check_df(df=df)
    if math.isnan(t):
        raise NumericalError("t が NaN です")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t >= 0 else tail


def t_two_sided_p(t: float, df: float) -> float:
    """両側 p 値 P(|T| ≥ |t|)"""
    _check_df(df=df)
    if math.isnan(t):
        raise NumericalError("t が NaN です")
    if math.isinf(t):
        return 0.0
    return reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def f_cdf(f: float, d1: float, d2: float) -> float:
    """F 分布の累積分布関数 P(F ≤ f)"""
    _check_df(d1=d1, d2=d2)
    if math.isnan(f):
        raise NumericalError("F が NaN です")
    if f <= 0:
        return 0.0
    if math.isinf(f):
        return 1.0
    return reg_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2))


def f_sf(f: float, d1: float, d2: float) -> float:
    """F 分布の上側確率 P(F > f)（p 値）"""
    _check_df(d1=d1, d2=d2)
    if math.isnan(f):
        raise NumericalError("F が NaN です")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return reg_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
