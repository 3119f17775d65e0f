import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resetsearch.errors import DomainError
from resetsearch.speed import (
    INDETERMINATE,
    LOGLOG,
    SUB_FRONT,
    SUPER_FRONT,
    FrontModel,
    FrontSchedule,
    classify_schedule,
    default_log_t_grid,
    log_lambda_t,
    mc_survival_at,
    trend,
)

M1 = FrontModel(1.0, 1.0)
M3 = FrontModel(1.0, 1.0, 3, 1.0)
C = M1.front_speed


def sched_d1(sign):
    return FrontSchedule.log_combination(C, sign * 1.0)


def test_front_constants():
    assert C == pytest.approx(math.sqrt(0.5))
    assert M3.gamma_c == pytest.approx(C)
    assert FrontModel(2.0, 0.5, 5, 0.1).gamma_c == pytest.approx(2 * math.sqrt(2.0))


def test_d1_branches():
    sub = classify_schedule(sched_d1(-1), M1)
    sup = classify_schedule(sched_d1(+1), M1)
    assert (sub.regime, sub.expected_limit) == (SUB_FRONT, 0.0)
    assert (sup.regime, sup.expected_limit) == (SUPER_FRONT, 1.0)
    assert np.all(np.diff(sub.log_lambda_t[len(sub.log_lambda_t) // 2:]) > 0)
    assert np.all(np.diff(sup.log_lambda_t[len(sup.log_lambda_t) // 2:]) < 0)


def test_d3_branches():
    loglog = classify_schedule(FrontSchedule.log_combination(C, -C), M3)
    assert loglog.regime == LOGLOG and loglog.expected_limit is None
    # lambda0 t stays bounded for the gap schedule
    assert np.ptp(loglog.log_lambda_t[-20:]) < 1.0
    assert classify_schedule(FrontSchedule.log_combination(C, -2 * C), M3).regime == SUB_FRONT
    assert classify_schedule(FrontSchedule.log_combination(C, 0.0), M3).regime == SUPER_FRONT


def test_sub_front_lambda_t_grows_by_t_1e6():
    # sub-front schedule on a grid stopping at t = 1e6: lambda0 t increasing and above 10
    grid = np.geomspace(math.log(10), math.log(1e6), 40)
    res = classify_schedule(FrontSchedule.log_combination(C, -1.0), M1, grid, threshold=1.0)
    assert np.all(np.diff(res.log_lambda_t) > 0)
    assert res.lambda_t[-1] > 10


def test_indeterminate_on_short_grid():
    grid = np.geomspace(math.log(10), math.log(1e6), 40)
    assert classify_schedule(sched_d1(-1), M1, grid).regime == INDETERMINATE


@pytest.mark.parametrize("shift", [-1.0, 1.0])
@pytest.mark.parametrize(
    "model,coef_loglog",
    [(M1, -1.0), (M1, 1.0), (M3, -C), (M3, -2 * C), (M3, 0.0)],
)
def test_bounded_perturbation_invariance(model, coef_loglog, shift):
    base = FrontSchedule.log_combination(C, coef_loglog)
    assert classify_schedule(base.perturbed(shift), model).regime == classify_schedule(base, model).regime


def test_trend_rule():
    x = np.linspace(0, 10, 20)
    assert trend(x) == 1 and trend(-x) == -1
    assert trend(np.sin(x)) == 0
    assert trend(np.linspace(0, 4, 20)) == 0


def test_log_lambda_matches_direct_solve():
    from resetsearch.eigen1d import Params1D, solve_lambda0

    assert log_lambda_t(M1, 3.0, 5.0) == pytest.approx(math.log(solve_lambda0(Params1D(1, 1, 3)).lambda0) + 5.0)
    assert log_lambda_t(M3, 0.5, 5.0) == math.inf


def test_validation():
    with pytest.raises(DomainError):
        FrontModel(1, 1, 3)
    with pytest.raises(DomainError):
        classify_schedule(sched_d1(1), M1, np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        mc_survival_at(sched_d1(1), M3, 10.0)


def test_time_function_wrapper():
    s = FrontSchedule.from_time_function(lambda t: C * math.log(t) + math.log(math.log(t)))
    ref = sched_d1(1)
    assert s.radius(10.0) == pytest.approx(ref.radius(10.0))


def test_default_grid():
    g = default_log_t_grid()
    assert g[0] == pytest.approx(math.log(10)) and g[-1] == pytest.approx(1e8) and g.size == 80


def test_mc_dichotomy_small():
    sub = mc_survival_at(sched_d1(-1), M1, 1e4, n=4000, seed=1)
    sup = mc_survival_at(sched_d1(+1), M1, 1e4, n=4000, seed=1)
    assert sub.p_hat < 0.1 < 0.9 < sup.p_hat


@settings(max_examples=25, deadline=None)
@given(k=st.floats(min_value=0.2, max_value=3.0), b=st.floats(min_value=-5.0, max_value=5.0))
def test_linear_offsets_d1(k, b):
    # a_t = k c log t + b: below the front for k < 1, above for k > 1
    if abs(k - 1) < 0.05:
        return
    res = classify_schedule(FrontSchedule.log_combination(k * C, 0.0, b), M1)
    assert res.regime == (SUB_FRONT if k < 1 else SUPER_FRONT)
