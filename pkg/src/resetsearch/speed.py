"""Moving targets: which radii a_t are found by time t, and which are not.

With resetting, P(tau_{a_t} > t) tends to 0 or 1 according to whether
t lambda0(a_t) tends to infinity or to 0. In terms of the front
c log t, c = sqrt(D/2r):

* d = 1: the drift Delta = |a_t| - c log t. Delta -> -inf gives survival 0
  (sub-front), Delta -> +inf gives survival 1 (super-front).
* d >= 2: with gamma_c = (d-1)/2 * c and Delta_c = Delta + gamma_c log log t,
  Delta_c -> +inf gives survival 1, while Delta_c + (gamma - gamma_c) log log t
  -> -inf for some gamma > gamma_c gives survival 0. Schedules on neither side,
  for example Delta -> -inf with Delta_c bounded, lie in the log-log gap and
  are labelled "log-log-corrected".

Schedules are functions of L = log t, so probe grids can reach t = e^(1e8)
where the log log t terms are large enough to classify; eigenvalues are used
through log lambda0 only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .eigen1d import Params1D, solve_lambda0
from .eigen_radial import ParamsRadial, solve_lambda0_radial
from .errors import DomainError
from .mc import SimConfig, SurvivalEstimate, simulate_survival_1d

__all__ = [
    "SUB_FRONT",
    "SUPER_FRONT",
    "LOGLOG",
    "INDETERMINATE",
    "FrontSchedule",
    "FrontModel",
    "Classification",
    "default_log_t_grid",
    "trend",
    "classify_schedule",
    "log_lambda_t",
    "mc_survival_at",
]

SUB_FRONT = "sub-front"
SUPER_FRONT = "super-front"
LOGLOG = "log-log-corrected"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class FrontModel:
    """Search parameters for the threshold analysis; eps0 is needed for d >= 2."""

    D: float
    r: float
    d: int = 1
    eps0: Optional[float] = None

    def __post_init__(self):
        if not (self.D > 0 and self.r > 0):
            raise DomainError("D and r must be > 0")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("dimension must be an integer >= 1")
        if self.d >= 2 and not (self.eps0 is not None and self.eps0 > 0):
            raise DomainError("eps0 > 0 is required for d >= 2")

    @property
    def front_speed(self) -> float:
        """c = sqrt(D/2r), the coefficient of log t in the front."""
        return math.sqrt(self.D / (2.0 * self.r))

    @property
    def gamma_c(self) -> float:
        """(d-1)/2 * sqrt(D/2r), the critical log log t coefficient."""
        return 0.5 * (self.d - 1) * self.front_speed


@dataclass(frozen=True)
class FrontSchedule:
    """A target radius a_t given as a function of L = log t.

    ``regime`` is filled in by :func:`classify_schedule`.
    """

    offset_fn: Callable[[float], float]
    name: str = ""
    regime: Optional[str] = None

    @classmethod
    def from_time_function(cls, fn: Callable[[float], float], name: str = "") -> "FrontSchedule":
        """Wrap a function of t itself; usable only while t fits in a double (log t < 709)."""
        return cls(lambda L: fn(math.exp(L)), name)

    @classmethod
    def log_combination(
        cls, coef_log: float, coef_loglog: float = 0.0, const: float = 0.0, name: str = ""
    ) -> "FrontSchedule":
        """a_t = coef_log * log t + coef_loglog * log log t + const."""
        return cls(lambda L: coef_log * L + coef_loglog * math.log(L) + const, name)

    def radius(self, log_t: float) -> float:
        return abs(float(self.offset_fn(log_t)))

    def perturbed(self, shift: float) -> "FrontSchedule":
        fn = self.offset_fn
        return FrontSchedule(lambda L: fn(L) + shift, f"{self.name}{shift:+g}")


@dataclass(frozen=True)
class Classification:
    regime: str
    expected_limit: Optional[float]  # limiting survival probability, if determined
    log_t: np.ndarray
    a_t: np.ndarray
    delta: np.ndarray  # |a_t| - c log t
    delta_c: np.ndarray  # delta + gamma_c log log t (equals delta in d = 1)
    log_lambda_t: np.ndarray  # log(lambda0(a_t) t)

    @property
    def lambda_t(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_lambda_t)


def default_log_t_grid(log_t_max: float = 1e8, n: int = 80) -> np.ndarray:
    """Geometric grid of log t from log 10 to log_t_max."""
    return np.geomspace(math.log(10.0), log_t_max, n)


def trend(values: np.ndarray, threshold: float = 5.0) -> int:
    """+1 / -1 if values run to +/-infinity on the grid, else 0.

    Running to infinity means strictly monotone over the last half of the grid
    and |value| > threshold at its end.
    """
    v = np.asarray(values, dtype=float)
    tail = v[len(v) // 2:]
    step = np.diff(tail)
    if np.all(step > 0) and tail[-1] > threshold:
        return 1
    if np.all(step < 0) and tail[-1] < -threshold:
        return -1
    return 0


def log_lambda_t(model: FrontModel, a: float, log_t: float) -> float:
    """log(lambda0(a) t) for the target at distance a."""
    if model.d == 1:
        lam = solve_lambda0(Params1D(model.D, model.r, a)).log_lambda0
    else:
        if not a > model.eps0:
            return math.inf
        lam = solve_lambda0_radial(ParamsRadial(model.D, model.r, model.d, model.eps0, a), with_prefactor=False).log_lambda0
    return lam + log_t


def _loglog_slope(log_t: np.ndarray, values: np.ndarray) -> float:
    half = len(log_t) // 2
    x = np.log(log_t[half:])
    y = values[half:]
    return float(np.polyfit(x, y, 1)[0])


def classify_schedule(
    sched: FrontSchedule,
    model: FrontModel,
    log_t_grid: Optional[np.ndarray] = None,
    threshold: float = 5.0,
    slope_tol: Optional[float] = None,
) -> Classification:
    """Label a schedule by the threshold conditions of the front analysis.

    Args:
        sched: the schedule a_t as a function of log t.
        model: D, r, d (and eps0 for d >= 2).
        log_t_grid: probe grid of log t, increasing; defaults to
            :func:`default_log_t_grid`.
        threshold: |value| a trend must exceed at the grid end.
        slope_tol: d >= 2 only. A decreasing Delta_c counts as sub-front only if
            its slope against log log t over the last half of the grid is
            below -slope_tol; this is the margin gamma - gamma_c of the
            sufficient condition. Defaults to gamma_c / 10.

    Returns:
        The regime label, the implied limit of P(tau > t) (None when the
        analysis does not decide it) and the diagnostics on the grid.
    """
    grid = default_log_t_grid() if log_t_grid is None else np.asarray(log_t_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 4 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise DomainError("log t grid must be positive, increasing and have at least 4 points")
    a = np.array([sched.radius(L) for L in grid])
    delta = a - model.front_speed * grid
    delta_c = delta + model.gamma_c * np.log(grid)
    llt = np.array([log_lambda_t(model, ai, L) for ai, L in zip(a, grid)])

    if model.d == 1:
        tr = trend(delta, threshold)
        regime, limit = {1: (SUPER_FRONT, 1.0), -1: (SUB_FRONT, 0.0), 0: (INDETERMINATE, None)}[tr]
    else:
        tol = model.gamma_c / 10.0 if slope_tol is None else slope_tol
        tr_c = trend(delta_c, threshold)
        if tr_c == 1:
            regime, limit = SUPER_FRONT, 1.0
        elif tr_c == -1 and _loglog_slope(grid, delta_c) < -tol:
            regime, limit = SUB_FRONT, 0.0
        elif trend(delta, threshold) == -1:
            regime, limit = LOGLOG, None
        else:
            regime, limit = INDETERMINATE, None
    return Classification(regime, limit, grid, a, delta, delta_c, llt)


def mc_survival_at(
    sched: FrontSchedule, model: FrontModel, t: float, n: int = 10000, seed: int = 0
) -> SurvivalEstimate:
    """Exact 1-d Monte Carlo estimate of P(tau_{a_t} > t) for the schedule at time t."""
    if model.d != 1:
        raise DomainError("Monte Carlo diagnostics are implemented for d = 1 (exact sampler)")
    a = sched.radius(math.log(t))
    cfg = SimConfig(n_trajectories=n, t_max=t, seed=seed)
    return simulate_survival_1d(Params1D(model.D, model.r, a), cfg, [t])[0]
