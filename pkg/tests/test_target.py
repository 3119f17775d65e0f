import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from resetsearch.eigen1d import Params1D, solve_lambda0
from resetsearch.eigen_radial import ParamsRadial, solve_lambda0_radial
from resetsearch.errors import DomainError, PreAsymptoticError
from resetsearch.target import (
    SearchModel,
    TargetDistribution,
    critical_points,
    failure_probability,
    gamma_t,
    laplace_bound_check,
    laplace_log_integral,
    laplace_minimize,
    log_failure_probability,
    scaling_functional,
    scaling_limit,
)

# ---------------------------------------------------------------- distributions


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_gaussian_normalisation(d):
    dist = TargetDistribution.gaussian(1.3, d)
    assert dist.log_normalisation == pytest.approx(0.5 * d * math.log(2 * math.pi * 1.3**2), rel=1e-10)


@pytest.mark.parametrize("B,l,d", [(1, 1, 1), (0.5, 2, 1), (1, 0.5, 1), (2, 1.5, 3), (0.3, 0.7, 2)])
def test_density_integrates_to_one(B, l, d):
    dist = TargetDistribution(B, l, d)
    val, _ = integrate.quad(lambda a: math.exp(float(dist.log_radial_density(a))), 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_exponential_is_normalised_laplace_density():
    dist = TargetDistribution.two_sided_exponential(2.0)
    assert float(dist.log_density(0.7)) == pytest.approx(math.log(1.0) - 1.4, rel=1e-12)


def test_custom_prefactor_and_limit_exponent():
    dist = TargetDistribution(1.0, 1.0, 1, log_prefactor=lambda a: 2.0 * math.log1p(a))
    val, _ = integrate.quad(lambda a: math.exp(float(dist.log_radial_density(a))), 0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-8)
    big = np.array([1e3, 1e4, 1e5])
    ratio = dist.log_density(big) / big
    assert np.all(np.abs(ratio - dist.limit_exponent) < 0.02)


def test_distribution_validation():
    with pytest.raises(DomainError):
        TargetDistribution(0, 1)
    with pytest.raises(DomainError):
        TargetDistribution(1, -1)
    with pytest.raises(DomainError):
        TargetDistribution(1, 1, 0)
    with pytest.raises(DomainError):
        TargetDistribution.gaussian(0.0)


def test_scaling_limit_values():
    assert scaling_limit(TargetDistribution(0.5, 2), SearchModel(1, 1)) == pytest.approx(-0.25)
    assert scaling_limit(TargetDistribution(1, 1), SearchModel(1, 1)) == pytest.approx(-1 / math.sqrt(2))


# ---------------------------------------------------------------- failure probability


def test_1d_against_direct_quadrature():
    dist = TargetDistribution.gaussian(1.0)
    model = SearchModel(1.0, 1.0)
    t = 1e4

    def f(a):
        sol = solve_lambda0(Params1D(1.0, 1.0, a))
        return 2 * math.exp(-sol.lambda0 * t - a * a / 2) / math.sqrt(2 * math.pi) / sol.prefactor_M

    ref, _ = integrate.quad(f, 1e-12, 20, epsabs=0, epsrel=1e-12, limit=400, points=[6.0, 8.0])
    assert failure_probability(dist, model, t) == pytest.approx(ref, rel=1e-8)


def test_radial_against_two_dimensional_tensor_quadrature():
    # radius-with-surface-factor integral versus a plain Cartesian one over the plane
    D, r, eps0, t = 1.0, 1.0, 0.5, 20.0
    dist = TargetDistribution.gaussian(1.0, 2)
    lf = log_failure_probability(dist, SearchModel(D, r, 2, eps0), t, quad_tol=1e-8)

    radii = eps0 + np.geomspace(1e-4, 9.5, 160)
    log_s = []
    for A in radii:
        sol = solve_lambda0_radial(ParamsRadial(D, r, 2, eps0, A))
        log_s.append(-sol.lambda0 * t - math.log(sol.prefactor_M))
    spline = CubicSpline(np.log(radii - eps0), log_s)

    x, w = roots_legendre(300)
    L = 9.0
    pieces = [(-L, -eps0), (-eps0, eps0), (eps0, L)]
    nodes = np.concatenate([(b - a) / 2 * x + (a + b) / 2 for a, b in pieces])
    weights = np.concatenate([(b - a) / 2 * w for a, b in pieces])
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    R = np.hypot(X, Y)
    inside = R <= eps0
    surv = np.where(inside, 0.0, np.exp(spline(np.log(np.maximum(R - eps0, 1e-300)))))
    dens = np.exp(-R**2 / 2) / (2 * math.pi)
    total = np.einsum("i,j,ij->", weights, weights, surv * dens)
    assert lf == pytest.approx(math.log(total), abs=1e-5)


def test_small_t_gives_failure_near_one():
    # bulk of targets so far away that lambda0 t << 1 everywhere
    dist = TargetDistribution.gaussian(1e4)
    assert failure_probability(dist, SearchModel(1, 1), 1.0) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("d,eps0", [(1, None), (3, 0.5)])
def test_failure_monotone_in_t(d, eps0):
    dist = TargetDistribution.gaussian(1.0, d)
    model = SearchModel(1, 1, d, eps0)
    vals = [log_failure_probability(dist, model, t, 1e-6) for t in (1e2, 1e3, 1e4)]
    assert all(v <= 0 for v in vals)
    assert vals[0] > vals[1] > vals[2]


def test_exponential_target_bracket():
    # failure lies in (t^{-(1+delta) B c}, t^{-(1-delta) B c}) with c = sqrt(D/2r)
    B, delta = 1.0, 0.05
    dist = TargetDistribution.two_sided_exponential(B)
    for t in (1e5, 1e9):
        val = log_failure_probability(dist, SearchModel(1, 1), t) / math.log(t)
        assert -(1 + delta) * B / math.sqrt(2) < val < -(1 - delta) * B / math.sqrt(2)


def test_gaussian_target_bracket():
    delta = 0.25
    dist = TargetDistribution.gaussian(1.0)
    for t in (1e5, 1e9):
        val = scaling_functional(dist, SearchModel(1, 1), t)
        assert -(1 + delta) * 0.25 < val < -(1 - delta) * 0.25


def test_scaling_functional_trend_exponential():
    dist = TargetDistribution(1.0, 1.0)
    vals = [scaling_functional(dist, SearchModel(1, 1), t) for t in (1e3, 1e5, 1e7)]
    target = -1 / math.sqrt(2)
    gaps = [abs(v - target) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])


def test_failure_errors():
    with pytest.raises(DomainError):
        log_failure_probability(TargetDistribution.gaussian(1.0, 3), SearchModel(1, 1), 10.0)
    with pytest.raises(DomainError):
        scaling_functional(TargetDistribution.gaussian(1.0), SearchModel(1, 1), 2.0)
    with pytest.raises(DomainError):
        SearchModel(1, 1, 2)


# ---------------------------------------------------------------- Laplace machinery


@pytest.mark.parametrize("B,l", [(1, 1), (0.5, 2), (1, 0.5), (2, 3)])
def test_minimiser_equation_and_scan(B, l):
    kappa, R, t = 1.3, 0.7, 1e8
    lp = laplace_minimize(B, l, kappa, R, t)
    assert lp.residual <= 1e-10
    lhs = kappa * R * t * math.exp(-kappa * lp.a_star)
    assert lhs == pytest.approx(l * B * lp.a_star ** (l - 1), rel=1e-10)
    scan = np.linspace(1e-6, 5 * lp.a_star, 20001)
    assert lp.gamma_at_star <= gamma_t(B, l, kappa, R, t, scan).min() * (1 + 1e-12)
    assert lp.gamma_at_star == pytest.approx(gamma_t(B, l, kappa, R, t, lp.a_star), rel=1e-12)


def test_scaled_location_and_value_trend():
    # with B = kappa R and l = 1 the minimiser is exactly log t / kappa
    assert laplace_minimize(1, 1, 1.0, 1.0, 1e6).scaled_location == pytest.approx(1.0, rel=1e-15)
    for B, l in [(2, 1), (0.5, 2), (1, 0.5)]:
        loc = [abs(laplace_minimize(B, l, 1.0, 1.0, 10.0**k).scaled_location - 1) for k in (6, 20, 80)]
        val = [abs(laplace_minimize(B, l, 1.0, 1.0, 10.0**k).scaled_value - 1) for k in (6, 20, 80)]
        assert loc[0] > loc[1] > loc[2]
        assert val[0] > val[1] > val[2]


def test_small_l_classification_and_preasymptotic():
    B, l, kappa, R = 1.0, 0.5, 1.0, 1.0
    pts = critical_points(B, l, kappa, R, 1e6)
    assert [p.kind for p in pts] == ["max", "min"]
    assert pts[0].a < (1 - l) / kappa < pts[1].a
    with pytest.raises(PreAsymptoticError):
        laplace_minimize(B, l, kappa, R, 1.0)
    with pytest.raises(PreAsymptoticError):
        laplace_minimize(5.0, 1.0, 1.0, 1.0, 2.0)


def test_log_integral_against_mpmath():
    import mpmath as mp

    for B, l, t in [(1, 1, 1e6), (0.5, 2, 1e3), (1, 0.5, 1e9)]:
        with mp.workdps(30):
            ref = mp.quad(lambda a: mp.exp(-t * mp.exp(-a) - B * a**l), [0, math.log(t), 10 * math.log(t), mp.inf])
        assert laplace_log_integral(B, l, 1.0, 1.0, t) == pytest.approx(float(mp.log(ref)), rel=1e-10)


def test_bounds_bracket_l1():
    bc = laplace_bound_check(1, 1, 1, 1, 1e6, eps=0.1)
    assert bc.holds


@settings(max_examples=60, deadline=None)
@given(
    B=st.floats(min_value=0.2, max_value=3),
    l=st.floats(min_value=1.0, max_value=3.0),
    kappa=st.floats(min_value=0.3, max_value=3),
    R=st.floats(min_value=0.1, max_value=10),
    logt=st.floats(min_value=5, max_value=60),
)
def test_minimiser_properties(B, l, kappa, R, logt):
    lp = laplace_minimize(B, l, kappa, R, math.exp(logt))
    assert lp.residual <= 1e-10
    assert lp.gamma_second > 0
    for da in (-1e-3, 1e-3):
        assert gamma_t(B, l, kappa, R, lp.t, lp.a_star * (1 + da)) >= lp.gamma_at_star
