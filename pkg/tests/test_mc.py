import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numba import njit
from scipy import stats

from resetsearch import mc
from resetsearch.eigen1d import Params1D, mean_time_to_locate_1d, solve_lambda0
from resetsearch.eigen_radial import ParamsRadial
from resetsearch.errors import DomainError, InsufficientSamplesError
from resetsearch.mc import (
    SimConfig,
    SurvivalEstimate,
    bm_no_reset_survival_cdf,
    conditioned_u_statistics,
    fit_log_slope,
    mean_time_to_locate_mc,
    merge_counts,
    sample_hitting_times_1d,
    set_threads,
    simulate_2d_no_reset_survival,
    simulate_survival_1d,
    simulate_survival_radial,
    survival_from_times,
)


@njit
def _draw(seed, stream, n, mirror, normal):
    st = np.empty(4, dtype=np.uint64)
    mc._seed_stream(seed, stream, st)
    out = np.empty(n)
    for i in range(n):
        out[i] = mc._normal(st, mirror) if normal else mc._uniform(st, mirror)
    return out


def renewal_survival(F0, r, t):
    """P(tau > t) by Talbot inversion of the renewal Laplace transform."""
    with mp.workdps(30):
        def Q(s):
            q0 = (1 - F0(r + s)) / (r + s)
            return q0 / (1 - r * q0)

        return float(mp.invertlaplace(Q, t, method="talbot"))


def f0_1d(D, a):
    return lambda s: mp.exp(-a * mp.sqrt(2 * s / D))


def f0_radial(D, d, eps, A):
    nu = mp.mpf(d - 2) / 2

    def F0(s):
        k = mp.sqrt(2 * s / D)
        return (mp.mpf(A) / eps) ** (-nu) * mp.besselk(nu, k * A) / mp.besselk(nu, k * eps)

    return F0


# ---------------------------------------------------------------- generator


def test_uniform_moments_and_range():
    u = _draw(np.uint64(7), np.uint64(0), 400_000, False, False)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / u.size)


def test_normal_distribution():
    z = _draw(np.uint64(11), np.uint64(3), 1_000_000, False, True)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    # the tail beyond the ziggurat base is sampled too
    tail = np.mean(np.abs(z) > 3.442619855899)
    assert tail == pytest.approx(2 * stats.norm.sf(3.442619855899), rel=0.15)
    assert abs(stats.kurtosis(z)) < 0.02


def test_streams_are_distinct_and_mirrored():
    a = _draw(np.uint64(5), np.uint64(0), 1000, False, True)
    b = _draw(np.uint64(5), np.uint64(1), 1000, False, True)
    assert not np.allclose(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
    m = _draw(np.uint64(5), np.uint64(0), 1000, True, True)
    assert np.array_equal(m, -a)
    u = _draw(np.uint64(5), np.uint64(0), 1000, False, False)
    um = _draw(np.uint64(5), np.uint64(0), 1000, True, False)
    assert np.array_equal(um, 1.0 - u)


def test_thread_count_does_not_change_results():
    p = Params1D(1, 1, 2)
    cfg = SimConfig(20_000, 10.0, seed=99)
    before = set_threads()
    try:
        set_threads(1)
        one = sample_hitting_times_1d(p, cfg)
        set_threads(max(2, before))
        many = sample_hitting_times_1d(p, cfg)
    finally:
        set_threads(before)
    assert np.array_equal(one, many)
    rp = ParamsRadial(1, 1, 2, 0.5, 1.0)
    rc = SimConfig(2000, 2.0, dt=1e-3, seed=3)
    assert simulate_survival_radial(rp, rc, [1.0, 2.0]) == simulate_survival_radial(rp, rc, [1.0, 2.0])


def test_set_threads_env(monkeypatch):
    before = set_threads()
    monkeypatch.setenv(mc.THREADS_ENV, "1")
    try:
        assert set_threads() == 1
    finally:
        set_threads(before)


# ---------------------------------------------------------------- 1-d


def test_no_reset_limit_matches_erf():
    D, a = 1.0, 1.0
    cfg = SimConfig(200_000, 5.0, seed=1)
    ts = [0.5, 1.0, 2.0, 5.0]
    est = simulate_survival_1d(Params1D(D, 1e-12, a), cfg, ts)
    for e in est:
        assert abs(e.p_hat - bm_no_reset_survival_cdf(D, a, e.t)) < 4 * e.std_error + 1e-12


@pytest.mark.parametrize("t", [0.5, 2.0, 6.0])
def test_1d_survival_against_renewal_inversion(t):
    D, r, a = 1.0, 1.0, 1.0
    exact = renewal_survival(f0_1d(D, a), r, t)
    e = simulate_survival_1d(Params1D(D, r, a), SimConfig(400_000, t, seed=8), [t])[0]
    assert abs(e.p_hat - exact) < 4 * e.std_error


def test_1d_asymptote_against_renewal_inversion():
    # the analytic asymptote itself, at a time where the gap to lambda_1 has closed
    D, r, a, t = 1.0, 1.0, 2.0, 25.0
    sol = solve_lambda0(Params1D(D, r, a))
    exact = renewal_survival(f0_1d(D, a), r, t)
    assert exact * math.exp(sol.lambda0 * t) * sol.prefactor_M == pytest.approx(1.0, abs=1e-9)


def test_mean_time_to_locate():
    p = Params1D(1, 1, 1)
    m, se = mean_time_to_locate_mc(p, SimConfig(200_000, 1.0, seed=4))
    assert abs(m - mean_time_to_locate_1d(p)) < 4 * se


def test_martingale_identity_small():
    p = Params1D(1, 1, 2)
    sol = solve_lambda0(p)
    for e in conditioned_u_statistics(p, sol, SimConfig(200_000, 5.0, seed=12), [1.0, 5.0]):
        assert abs(e.joint_mean - math.exp(-sol.lambda0 * e.t)) < 4 * e.joint_se
        assert e.conditional_mean == pytest.approx(e.joint_mean / e.p_hat)


def test_conditioned_needs_survivors():
    p = Params1D(1, 1, 0.05)
    sol = solve_lambda0(p)
    with pytest.raises(InsufficientSamplesError):
        conditioned_u_statistics(p, sol, SimConfig(1000, 200.0, seed=1), [200.0])


def test_antithetic_pairs_are_mirrored():
    p = Params1D(1, 1, 1)
    plain = sample_hitting_times_1d(p, SimConfig(10_000, 10.0, seed=2))
    anti = sample_hitting_times_1d(p, SimConfig(10_000, 10.0, seed=2, antithetic=True))
    assert np.array_equal(anti[0::2], plain[:5000])
    assert not np.array_equal(anti[1::2], anti[0::2])
    e = simulate_survival_1d(p, SimConfig(200_000, 3.0, seed=2, antithetic=True), [3.0])[0]
    exact = renewal_survival(f0_1d(1.0, 1.0), 1.0, 3.0)
    assert abs(e.p_hat - exact) < 4 * e.std_error


def test_checkpoints_reuse_trajectories():
    p = Params1D(1, 1, 1)
    cfg = SimConfig(50_000, 8.0, seed=21)
    grid = simulate_survival_1d(p, cfg, [1.0, 2.0, 4.0, 8.0])
    single = simulate_survival_1d(p, cfg, [4.0])[0]
    assert grid[2].p_hat == single.p_hat
    assert [g.p_hat for g in grid] == sorted((g.p_hat for g in grid), reverse=True)


# ---------------------------------------------------------------- radial


@pytest.mark.parametrize("scheme,n,tol", [("exact", 50_000, 0.004), ("euler", 200_000, 0.01)])
def test_radial_against_renewal_inversion(scheme, n, tol):
    D, r, d, eps, A = 1.0, 1.0, 3, 0.5, 1.5
    ts = [1.0, 4.0]
    est = simulate_survival_radial(ParamsRadial(D, r, d, eps, A), SimConfig(n, 4.0, dt=1e-3, seed=5), ts, scheme)
    for e in est:
        exact = renewal_survival(f0_radial(D, d, eps, A), r, e.t)
        assert abs(e.p_hat - exact) < 4 * e.std_error + tol


def test_radial_preconditions():
    p = ParamsRadial(1, 1, 2, 0.5, 3)
    with pytest.raises(DomainError):
        simulate_survival_radial(Params1D(1, 1, 1), SimConfig(10, 1.0), [1.0])
    with pytest.raises(DomainError):
        simulate_survival_radial(p, SimConfig(10, 1.0, dt=0.02), [1.0])
    with pytest.raises(DomainError):
        simulate_survival_radial(p, SimConfig(10, 10.0, dt=0.05), [1.0], scheme="euler")
    with pytest.raises(DomainError):
        simulate_survival_radial(p, SimConfig(10, 10.0, dt=0.001), [1.0], scheme="milstein")
    with pytest.raises(DomainError):
        simulate_2d_no_reset_survival(1, 1, 2, 1.0, SimConfig(10, 1.0))


def test_2d_no_reset_ordering():
    cfg = SimConfig(20_000, 1.0, dt=1.0, seed=6)
    near = simulate_2d_no_reset_survival(1, 1, math.e, 100.0, cfg)
    far = simulate_2d_no_reset_survival(1, 1, math.e ** 2, 100.0, cfg)
    later = simulate_2d_no_reset_survival(1, 1, math.e, 1000.0, cfg)
    assert near.p_hat < far.p_hat
    assert later.p_hat < near.p_hat


# ---------------------------------------------------------------- bookkeeping


def test_config_validation():
    for bad in (dict(n_trajectories=0, t_max=1), dict(n_trajectories=10, t_max=-1),
                dict(n_trajectories=10, t_max=1, dt=0), dict(n_trajectories=10, t_max=1, seed=-1)):
        with pytest.raises(DomainError):
            SimConfig(**bad)
    with pytest.raises(DomainError):
        simulate_survival_1d(Params1D(1, 1, 1), SimConfig(10, 1.0), [2.0])
    with pytest.raises(DomainError):
        simulate_survival_1d(Params1D(1, 1, 1), SimConfig(10, 1.0), [0.5, 0.2])


def test_survival_from_times_counts():
    taus = np.array([0.5, 1.5, np.inf, 3.0])
    est = survival_from_times(taus, [1.0, 2.0, 3.0], seed=0)
    assert [e.p_hat for e in est] == [0.75, 0.5, 0.25]
    assert est[0].half_width_95 == pytest.approx(1.96 * math.sqrt(0.75 * 0.25 / 4))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.lists(st.integers(0, 1000), min_size=3, max_size=3), st.integers(1000, 5000)),
                min_size=3, max_size=6))
def test_merge_is_associative(parts):
    parts = [(np.array(c), n) for c, n in parts]
    whole = merge_counts(*parts)
    left = merge_counts(merge_counts(*parts[:2]), *parts[2:])
    right = merge_counts(parts[0], merge_counts(*parts[1:]))
    for other in (left, right):
        assert np.array_equal(whole[0], other[0]) and whole[1] == other[1]


def test_fit_log_slope_recovers_exact_rate():
    ts = np.linspace(5, 20, 8)
    est = [SurvivalEstimate.from_counts(t, int(round(1e6 * math.exp(-0.1 * t))), 1_000_000, 0) for t in ts]
    slope, se = fit_log_slope(est)
    assert slope == pytest.approx(-0.1, rel=1e-3)
    assert se > 0
    with pytest.raises(InsufficientSamplesError):
        fit_log_slope([SurvivalEstimate.from_counts(1.0, 0, 10, 0)] * 3)


def test_bm_cdf_domain():
    assert bm_no_reset_survival_cdf(1.0, 1.0, 1.0) == pytest.approx(math.erf(1 / math.sqrt(2)))
    with pytest.raises(DomainError):
        bm_no_reset_survival_cdf(-1.0, 1.0, 1.0)
