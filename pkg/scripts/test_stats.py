"""相関・グレンジャー因果性・特殊関数のテスト（pytest不要）

実行:
    python -m scripts.test_stats

確認内容:
  1. 不完全ベータ関数を mpmath と照合
  2. Pearson の r と p を scipy と照合（固定シード 20 組）
  3. グレンジャー検定の F と p を最小二乗の独立計算と照合
  4. 検出力と有意水準（シミュレーション）
"""
from __future__ import annotations

import math
import sys
from datetime import date, timedelta

import numpy as np

from scripts._testkit import close, require_module, run_tests

from src.aggregate import DailySentiment
from src.corpus import PriceBar
from src.errors import DataError, NumericalError
from src.market import build_market_series
from src.special_functions import f_cdf, f_sf, reg_incomplete_beta, t_cdf, t_two_sided_p
from src.stats import (
    CausalDirection,
    align_lagged,
    correlation_grid,
    granger_grid,
    granger_test,
    lag_matrix,
    lagged_correlation,
    pearson,
)


def _expect(exc: type, fn, *args, **kwargs) -> str:
    try:
        fn(*args, **kwargs)
    except exc as e:
        return str(e)
    raise AssertionError(f"{exc.__name__} が送出されませんでした")


def _pinned_pairs(n_pairs: int = 20):
    """固定シードの (x, y)（相関の強さと長さを変える）"""
    for seed in range(n_pairs):
        rng = np.random.default_rng(seed)
        n = 10 + 7 * seed
        x = rng.normal(size=n)
        y = (seed % 5) * 0.2 * x + rng.normal(size=n)
        yield seed, x, y


# ----------------------------------------------------------------------
# 特殊関数
# ----------------------------------------------------------------------

def test_incomplete_beta_against_mpmath():
    mp = require_module("mpmath")
    mp.mp.dps = 40
    for a in (0.5, 1.0, 2.5, 7.0, 30.0, 120.0):
        for b in (0.5, 1.0, 3.0, 15.0, 80.0):
            for x in (1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 0.999999):
                ref = float(mp.betainc(a, b, 0, x, regularized=True))
                assert close(reg_incomplete_beta(a, b, x), ref, 1e-10), (a, b, x)


def test_incomplete_beta_edges():
    assert reg_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert reg_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    # I_x(1, 1) = x
    assert close(reg_incomplete_beta(1.0, 1.0, 0.3), 0.3, 1e-14)
    _expect(NumericalError, reg_incomplete_beta, 0.0, 1.0, 0.5)
    _expect(NumericalError, reg_incomplete_beta, 1.0, 1.0, 1.5)


def test_t_and_f_distribution_identities():
    # 自由度 1 の t 分布はコーシー分布
    for t in (-3.0, -0.5, 0.0, 1.2, 10.0):
        assert close(t_cdf(t, 1.0), 0.5 + math.atan(t) / math.pi, 1e-12)
    # F(1, d) と t(d) の関係
    for t in (0.3, 1.7, 4.0):
        assert close(f_sf(t * t, 1.0, 12.0), t_two_sided_p(t, 12.0), 1e-12)
    assert close(f_cdf(2.0, 3.0, 9.0) + f_sf(2.0, 3.0, 9.0), 1.0, 1e-12)
    assert f_sf(0.0, 2.0, 5.0) == 1.0
    assert f_sf(math.inf, 2.0, 5.0) == 0.0
    _expect(NumericalError, f_sf, 1.0, 0.0, 5.0)


# ----------------------------------------------------------------------
# 相関
# ----------------------------------------------------------------------

def test_pearson_against_scipy():
    scipy_stats = require_module("scipy.stats")
    for seed, x, y in _pinned_pairs():
        ours = pearson(x, y)
        ref = scipy_stats.pearsonr(x, y)
        ref_r, ref_p = float(ref[0]), float(ref[1])
        assert close(ours.r, ref_r, 1e-9), seed
        assert close(ours.p_value, ref_p, 1e-9), seed
        assert ours.n == len(x)


def test_pearson_t_statistic_form():
    for seed, x, y in _pinned_pairs(5):
        res = pearson(x, y)
        n = len(x)
        t = res.r * math.sqrt((n - 2) / (1 - res.r ** 2))
        assert close(res.p_value, t_two_sided_p(t, n - 2), 1e-12), seed


def test_pearson_perfect_and_invalid():
    perfect = pearson([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0])
    assert perfect.r == 1.0 and perfect.p_value == 0.0
    anti = pearson([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    assert anti.r == -1.0
    _expect(NumericalError, pearson, [1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    _expect(DataError, pearson, [1.0, 2.0], [1.0, 2.0])
    _expect(DataError, pearson, [1.0, 2.0, 3.0], [1.0, 2.0])


def test_pearson_symmetric():
    for _, x, y in _pinned_pairs(5):
        a, b = pearson(x, y), pearson(y, x)
        assert close(a.r, b.r, 1e-15)


def test_align_lagged_uses_trading_days():
    days = [date(2019, 7, 1), date(2019, 7, 2), date(2019, 7, 3), date(2019, 7, 5)]
    sent = {d: float(i) for i, d in enumerate(days)}
    target = {d: 10.0 * i for i, d in enumerate(days)}
    xs, ys = align_lagged(sent, target, days, 1)
    # 7/3 の翌取引日は 7/5
    assert list(zip(xs, ys)) == [(0.0, 10.0), (1.0, 20.0), (2.0, 30.0)]


def _market(n: int = 40, window: int = 5, seed: int = 1):
    rng = np.random.default_rng(seed)
    start = date(2019, 1, 1)
    closes = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.01, size=n)))
    bars = [PriceBar(date=start + timedelta(days=i), close=float(c)) for i, c in enumerate(closes)]
    return build_market_series(bars, window=window)


def _daily_from(mkt, values) -> list[DailySentiment]:
    return [
        DailySentiment(trading_day=d, mean_pos=float(v), mean_neg=float(-v), mean_neu=float(v * v), sentd=float(v))
        for d, v in zip(mkt.dates, values)
    ]


def test_lagged_correlation_detects_leading_signal():
    mkt = _market()
    vol = mkt.target("volatility")
    # pos_t = vol_{t+1}
    values = [vol.get(mkt.dates[i + 1], 0.0) if i + 1 < len(mkt.dates) else 0.0 for i in range(len(mkt.dates))]
    daily = _daily_from(mkt, values)
    res = lagged_correlation(daily, mkt, "pos", "volatility", 1)
    assert res.lag == 1
    assert res.r > 0.99


def test_correlation_grid_emits_every_cell():
    mkt = _market()
    rng = np.random.default_rng(3)
    daily = _daily_from(mkt, rng.normal(size=len(mkt.dates)))
    # neu 以外を定数にした日次系列は相関が定義できない
    flat = [DailySentiment(trading_day=d) for d in mkt.dates]
    cells = correlation_grid([("a", daily), ("b", flat)], mkt)
    assert len(cells) == 32
    assert all(c.result is not None for c in cells if c.dataset == "a")
    assert all(c.result is None and c.note for c in cells if c.dataset == "b")


# ----------------------------------------------------------------------
# グレンジャー因果性
# ----------------------------------------------------------------------

def _oracle_granger(x: np.ndarray, y: np.ndarray, k: int) -> tuple[float, int, int]:
    n_obs = len(y) - k
    resp = y[k:]
    const = np.ones((n_obs, 1))
    own = np.column_stack([y[k - j: len(y) - j] for j in range(1, k + 1)])
    cross = np.column_stack([x[k - j: len(x) - j] for j in range(1, k + 1)])

    def rss(design):
        coef, *_ = np.linalg.lstsq(design, resp, rcond=None)
        resid = resp - design @ coef
        return float(resid @ resid)

    rss_r = rss(np.hstack([const, own]))
    rss_u = rss(np.hstack([const, own, cross]))
    df2 = n_obs - 2 * k - 1
    return ((rss_r - rss_u) / k) / (rss_u / df2), k, df2


def test_granger_against_lstsq_oracle():
    scipy_stats = require_module("scipy.stats")
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        t_total = 30 + 5 * seed
        x = rng.normal(size=t_total)
        y = np.zeros(t_total)
        for t in range(1, t_total):
            y[t] = 0.3 * y[t - 1] + (seed % 4) * 0.15 * x[t - 1] + rng.normal()
        for k in (1, 2, 3):
            f_ref, df1, df2 = _oracle_granger(x, y, k)
            p_ref = float(scipy_stats.f.sf(f_ref, df1, df2))
            res = granger_test(x, y, k)
            assert (res.df1, res.df2) == (df1, df2)
            assert close(res.f_stat, f_ref, 1e-6 * max(1.0, f_ref)), (seed, k)
            assert close(res.p_value, p_ref, 1e-6), (seed, k)


def test_granger_reverse_direction_swaps_roles():
    rng = np.random.default_rng(8)
    x = rng.normal(size=60)
    y = rng.normal(size=60)
    forward = granger_test(y, x, 2)
    reverse = granger_test(x, y, 2, CausalDirection.Y_TO_X)
    assert close(forward.f_stat, reverse.f_stat, 1e-12)
    assert reverse.direction is CausalDirection.Y_TO_X


def test_granger_unrestricted_fits_better():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=80), rng.normal(size=80)
    res = granger_test(x, y, 3)
    assert res.unrestricted.rss <= res.restricted.rss + 1e-9
    assert res.f_stat >= 0.0
    assert 0.0 <= res.p_value <= 1.0


def test_granger_power():
    rejections = 0
    for trial in range(100):
        rng = np.random.default_rng(1000 + trial)
        x = rng.normal(size=200)
        y = np.zeros(200)
        for t in range(1, 200):
            y[t] = 0.8 * x[t - 1] + rng.normal()
        if granger_test(x, y, 1).p_value < 0.01:
            rejections += 1
    assert rejections >= 95, rejections


def test_granger_size():
    rejections = 0
    for trial in range(1000):
        rng = np.random.default_rng(5000 + trial)
        x = rng.normal(size=200)
        y = rng.normal(size=200)
        if granger_test(x, y, 1).p_value < 0.05:
            rejections += 1
    rate = rejections / 1000
    assert 0.03 <= rate <= 0.07, rate


def test_granger_collinear_lags():
    rng = np.random.default_rng(2)
    y = rng.normal(size=40)
    msg = _expect(NumericalError, granger_test, y.copy(), y, 2)
    assert "collinear" in msg
    _expect(NumericalError, granger_test, np.full(40, 3.0), y, 1)


def test_granger_too_short_or_bad_lag():
    _expect(DataError, granger_test, [1.0, 2.0, 3.0, 5.0], [2.0, 1.0, 4.0, 3.0], 1)
    _expect(DataError, granger_test, [1.0] * 10, [2.0] * 10, 0)
    _expect(DataError, granger_test, [1.0] * 10, [2.0] * 9, 1)


def test_lag_matrix_columns():
    m = lag_matrix(np.arange(6, dtype=float), 2)
    assert m.tolist() == [[1.0, 0.0], [2.0, 1.0], [3.0, 2.0], [4.0, 3.0]]


def test_granger_grid_both_directions():
    mkt = _market(n=60)
    rng = np.random.default_rng(6)
    daily = _daily_from(mkt, rng.normal(size=len(mkt.dates)))
    cells = granger_grid([("a", daily)], mkt, dims=("pos",), targets=("volatility",), lags=(1, 2))
    labels = [(c.cause, c.effect, c.lag) for c in cells]
    assert labels == [
        ("pos", "volatility", 1), ("volatility", "pos", 1),
        ("pos", "volatility", 2), ("volatility", "pos", 2),
    ]
    assert all(c.result is not None for c in cells)
    assert cells[0].direction_label == "a:pos->volatility"


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "stats"))
