"""Failure probability for a random target with a stretched-exponential law.

A target at a in R^d with density mu(a) = c(|a|) exp(-B |a|^l) / Z is located
by the resetting searcher; the probability of failure by time t is

    F(t) = int P_0(tau_a > t) mu(da)
         ~ int_{eps0}^inf (1/M(A)) exp(-lambda0(A) t) |S^{d-1}| A^{d-1} mu(A) dA

and (log t)^(-l) log F(t) -> -B (D/2r)^(l/2). The Laplace machinery behind the
limit works with gamma_t(a) = R t exp(-kappa a) + B a^l and is exposed here
with free (R, kappa).

Everything is carried in log space: at t = 1e9 and l = 2 the failure
probability is near exp(-100) and the survival factor of a single target can
be far below the smallest double.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.special import gammaln

from .eigen1d import Params1D, solve_lambda0
from .eigen_radial import ParamsRadial, prefactor_M_radial, solve_lambda0_radial
from .errors import ConvergenceError, DomainError, PreAsymptoticError

__all__ = [
    "TargetDistribution",
    "SearchModel",
    "LaplacePoint",
    "CriticalPoint",
    "BoundCheck",
    "log_failure_probability",
    "failure_probability",
    "scaling_functional",
    "scaling_limit",
    "gamma_t",
    "critical_points",
    "laplace_minimize",
    "laplace_log_integral",
    "laplace_bound_check",
]

_WINDOW_NATS = 40.0



def _log_sphere_area(d: int) -> float:
    """log |S^{d-1}|, the surface measure of the unit sphere (2 for d = 1)."""
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)


@dataclass(frozen=True)
class TargetDistribution:
    """Isotropic density proportional to c(|a|) exp(-B |a|^l) on R^d.

    Args:
        B: tail coefficient, > 0.
        l: stretch exponent, > 0.
        d: dimension, >= 1.
        log_prefactor: log c as a function of the radius; must satisfy
            log c(a)/a^l -> 0. Defaults to a constant, i.e. the pure stretched
            exponential. The normalising constant is computed numerically.
    """

    B: float
    l: float
    d: int = 1
    log_prefactor: Optional[Callable[[float], float]] = None
    _log_norm: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.B > 0 and self.l > 0 and math.isfinite(self.B) and math.isfinite(self.l)):
            raise DomainError("B and l must be finite and > 0")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be an integer >= 1, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def gaussian(cls, sigma: float, d: int = 1) -> "TargetDistribution":
        """Centred Gaussian with per-coordinate variance sigma^2 (l = 2, B = 1/(2 sigma^2))."""
        if not sigma > 0:
            raise DomainError("sigma must be > 0")
        return cls(B=1.0 / (2.0 * sigma * sigma), l=2.0, d=d)

    @classmethod
    def two_sided_exponential(cls, B: float) -> "TargetDistribution":
        """Symmetric exponential on the line, normalised: (B/2) exp(-B |x|)."""
        return cls(B=B, l=1.0, d=1)

    def _log_c(self, a):
        if self.log_prefactor is None:
            return np.zeros_like(np.asarray(a, dtype=float))
        return np.vectorize(self.log_prefactor, otypes=[float])(a)

    def _log_unnormalised_radial(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore"):
            return _log_sphere_area(self.d) + (self.d - 1) * np.log(a) + self._log_c(a) - self.B * a ** self.l

    @property
    def log_normalisation(self) -> float:
        """log Z, computed by quadrature once and cached."""
        if not self._log_norm:
            # substitute s = B a^l so the bulk sits at s = O(1) for any (B, l)
            scale = self.B ** (-1.0 / self.l)
            peak = max(self._log_unnormalised_radial(scale * np.geomspace(1e-6, 50.0, 400)))

            def f(s):
                a = scale * s
                return math.exp(float(self._log_unnormalised_radial(a)) - peak) * scale

            hi = 1.0
            while float(self._log_unnormalised_radial(scale * hi)) - peak > -_WINDOW_NATS - 10 or hi < 2.0:
                hi *= 2.0
            val, _ = integrate.quad(f, 0.0, hi, epsabs=0.0, epsrel=1e-12, limit=400, points=[1.0])
            self._log_norm.append(math.log(val) + peak)
        return self._log_norm[0]

    def log_radial_density(self, a):
        """log of |S^{d-1}| a^{d-1} mu(a): the density of the target's distance from the origin."""
        return self._log_unnormalised_radial(a) - self.log_normalisation

    def log_density(self, x):
        """log mu at points x of shape (..., d) (or scalars when d = 1)."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.d == 1 else np.linalg.norm(x, axis=-1)
        return self._log_c(r) - self.B * r ** self.l - self.log_normalisation

    @property
    def limit_exponent(self) -> float:
        """-B, the limit of log mu(a)/|a|^l."""
        return -self.B


@dataclass(frozen=True)
class SearchModel:
    """Diffusion D and reset rate r in dimension d; eps0 is the target radius for d >= 2."""

    D: float
    r: float
    d: int = 1
    eps0: Optional[float] = None

    def __post_init__(self):
        if not (self.D > 0 and self.r > 0):
            raise DomainError("D and r must be > 0")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("dimension must be an integer >= 1")
        object.__setattr__(self, "d", int(self.d))
        if self.d >= 2 and not (self.eps0 is not None and self.eps0 > 0):
            raise DomainError("a target radius eps0 > 0 is required for d >= 2")

    @property
    def kappa(self) -> float:
        return math.sqrt(2.0 * self.r / self.D)

    @property
    def a_min(self) -> float:
        """Smallest target distance with a nontrivial search problem."""
        return 0.0 if self.d == 1 else float(self.eps0)


def scaling_limit(dist: TargetDistribution, model: SearchModel) -> float:
    """-B (D/2r)^(l/2), the t -> infinity limit of the scaling functional."""
    return -dist.B * (model.D / (2.0 * model.r)) ** (dist.l / 2.0)


# --------------------------------------------------------------------------- survival layer


class _RadialSurvivalTable:
    """Memoised log lambda0(A) and log M(A) on nodes, with cubic interpolation.

    The two quantities keep separate caches: a lambda0 node is a root-find,
    an M node a quadrature about a hundred times dearer.
    """

    def __init__(self, model: SearchModel):
        self.model = model
        self._lam: dict[float, float] = {}
        self._m: dict[float, float] = {}
        self._lock = threading.Lock()

    def _params(self, A):
        m = self.model
        return ParamsRadial(m.D, m.r, m.d, m.eps0, A)

    def log_lambda0(self, A: float) -> float:
        key = float(A)
        with self._lock:
            hit = self._lam.get(key)
        if hit is None:
            hit = solve_lambda0_radial(self._params(key), with_prefactor=False).log_lambda0
            with self._lock:
                self._lam[key] = hit
        return hit

    def log_prefactor(self, A: float) -> float:
        key = float(A)
        with self._lock:
            hit = self._m.get(key)
        if hit is None:
            p = self._params(key)
            sol = solve_lambda0_radial(p, with_prefactor=False)
            hit = math.log(prefactor_M_radial(p, sol))
            with self._lock:
                self._m[key] = hit
        return hit

    def interpolant(self, which: str, u_nodes: np.ndarray, shift: float):
        """Interpolant in u = log(A - shift).

        log lambda0 is monotone in A, so PCHIP; M dips below 1 and recovers,
        and PCHIP would flatten that minimum, so log M uses a not-a-knot spline.
        """
        a = shift + np.exp(u_nodes)
        if which == "lambda":
            return PchipInterpolator(u_nodes, np.array([self.log_lambda0(x) for x in a]))
        return CubicSpline(u_nodes, np.array([self.log_prefactor(x) for x in a]))


_TABLES: dict[SearchModel, _RadialSurvivalTable] = {}
_TABLES_LOCK = threading.Lock()


def _table(model: SearchModel) -> _RadialSurvivalTable:
    with _TABLES_LOCK:
        tab = _TABLES.get(model)
        if tab is None:
            tab = _TABLES[model] = _RadialSurvivalTable(model)
        return tab


def _log_integrand_1d(dist, model, log_t, a):
    sol = solve_lambda0(Params1D(model.D, model.r, a))
    return float(dist.log_radial_density(a)) - math.exp(sol.log_lambda0 + log_t) - math.log(sol.prefactor_M)


def _window(logf, lo: float, hi_guess: float, n_scan: int = 400):
    """Scan a geometric grid for the maximum of logf and the 40-nat window around it."""
    hi = hi_guess
    for _ in range(60):
        grid = lo + np.geomspace(1e-9 * max(1.0, hi), hi - lo, n_scan)
        vals = np.array([logf(a) for a in grid])
        k = int(np.nanargmax(vals))
        if k < n_scan - 5 and vals[-1] < vals[k] - _WINDOW_NATS:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise ConvergenceError("could not bracket the integrand of the failure probability")
    top = vals[k]
    inside = np.nonzero(vals > top - _WINDOW_NATS)[0]
    w_lo = lo if inside[0] == 0 else grid[inside[0] - 1]
    w_hi = grid[min(inside[-1] + 1, n_scan - 1)]
    return w_lo, w_hi, grid[k], top


def _integrate_log(logf, w_lo, w_hi, peak, top, rtol, accept):
    """log int exp(logf) over the window; ``accept`` is the relative error tolerated."""

    def f(a):
        return math.exp(logf(a) - top)

    # pieces keep quad's roundoff bail-outs local, so their error estimates stay honest
    edges = np.linspace(w_lo, w_hi, 17)
    if w_lo < peak < w_hi:
        edges = np.unique(np.append(edges, peak))
    val = err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
            val += v
            err += e
    if not val > 0:
        raise ConvergenceError("failure-probability quadrature returned a non-positive value")
    if err > accept * val:
        raise ConvergenceError(f"failure-probability quadrature error {err / val:.1e} exceeds {accept:.1e}")
    return math.log(val) + top


def log_failure_probability(dist: TargetDistribution, model: SearchModel, t: float, quad_tol: float = 1e-8) -> float:
    """log of int (1/M(a)) exp(-lambda0(a) t) mu(da), the asymptotic failure probability.

    In 1-d every integrand evaluation solves for lambda0 directly (a root-find
    of a few tens of microseconds) and M is closed form. For d >= 2, log
    lambda0 and log M are memoised on geometric node sets over the 40-nat
    window and interpolated by cubics; each node set doubles until doing so
    moves the result by less than quad_tol.

    The survival factor is the large-t asymptote, so the result is meaningful
    once lambda0 t >= 3 over the bulk of the window; below that it can exceed
    the true failure probability.

    Raises:
        DomainError: dimension mismatch or t <= 0.
        ConvergenceError: quadrature or refinement failure.
    """
    if dist.d != model.d:
        raise DomainError(f"target dimension {dist.d} does not match model dimension {model.d}")
    if not (t > 0 and quad_tol > 0):
        raise DomainError("t and quad_tol must be > 0")
    log_t = math.log(t)
    hi_guess = model.a_min + 2.0 * (log_t / model.kappa + dist.B ** (-1.0 / dist.l)) + 1.0
    if model.d == 1:
        logf = lambda a: _log_integrand_1d(dist, model, log_t, a)  # noqa: E731
        w_lo, w_hi, peak, top = _window(logf, 0.0, hi_guess)
        return _integrate_log(logf, w_lo, w_hi, peak, top, min(quad_tol, 1e-10), quad_tol)

    tab = _table(model)
    lo = model.a_min

    def coarse(a):
        return float(dist.log_radial_density(a)) - math.exp(tab.log_lambda0(a) + log_t)

    w_lo, w_hi, peak, _ = _window(coarse, lo, hi_guess, n_scan=200)
    w_lo = max(w_lo, lo * (1.0 + 1e-9))

    # interpolate in u = log(A - shift): log M ~ -log(A - eps0) near the target
    # surface, and the shift keeps nodes off the negligible sliver next to it
    shift = lo - 0.1 * (peak - lo)
    u_lo, u_hi, u_peak = (math.log(x - shift) for x in (w_lo, w_hi, peak))

    def nodes(n):
        return np.unique(np.concatenate([np.linspace(u_lo, u_hi, n), [u_peak]]))

    def integral(n_lam, n_m):
        lam_i = tab.interpolant("lambda", nodes(n_lam), shift)
        m_i = tab.interpolant("M", nodes(n_m), shift)

        def logf(a):
            u = math.log(a - shift)
            return float(dist.log_radial_density(a)) - math.exp(float(lam_i(u)) + log_t) - float(m_i(u))

        grid = np.linspace(w_lo, w_hi, 400)
        vals = np.array([logf(a) for a in grid])
        k = int(np.argmax(vals))
        return _integrate_log(logf, w_lo, w_hi, grid[k], vals[k], min(quad_tol, 1e-10), quad_tol)

    # refine each node set until doubling it moves the result by less than quad_tol
    n_lam, n_m = 17, 9
    cur = integral(n_lam, n_m)
    for _ in range(12):
        d_lam = abs(integral(2 * n_lam - 1, n_m) - cur)
        d_m = abs(integral(n_lam, 2 * n_m - 1) - cur)
        if d_lam < quad_tol and d_m < quad_tol:
            return integral(2 * n_lam - 1, 2 * n_m - 1)
        if d_lam >= quad_tol:
            n_lam = 2 * n_lam - 1
        if d_m >= quad_tol:
            n_m = 2 * n_m - 1
        if max(n_lam, n_m) > 20000:
            break
        cur = integral(n_lam, n_m)
    raise ConvergenceError("failure probability did not settle under node refinement")


def failure_probability(dist: TargetDistribution, model: SearchModel, t: float, quad_tol: float = 1e-8) -> float:
    """exp of :func:`log_failure_probability`; underflows to 0 when the log is below about -745."""
    return math.exp(log_failure_probability(dist, model, t, quad_tol))


def scaling_functional(dist: TargetDistribution, model: SearchModel, t: float, quad_tol: float = 1e-8) -> float:
    """(log t)^(-l) log F(t); tends to -B (D/2r)^(l/2) as t -> infinity."""
    if not t > math.e:
        raise DomainError("scaling functional needs t > e")
    return log_failure_probability(dist, model, t, quad_tol) / math.log(t) ** dist.l


# --------------------------------------------------------------------------- Laplace machinery


@dataclass(frozen=True)
class CriticalPoint:
    a: float
    kind: str  # "min" or "max"
    gamma: float
    gamma_second: float


@dataclass(frozen=True)
class LaplacePoint:
    t: float
    a_star: float
    gamma_at_star: float
    kappa: float
    R: float
    B: float
    l: float
    residual: float  # |kappa R t e^{-kappa a*} / (l B a*^{l-1}) - 1|
    gamma_second: float

    @property
    def scaled_location(self) -> float:
        """a* kappa / log t, which tends to 1."""
        return self.a_star * self.kappa / math.log(self.t)

    @property
    def scaled_value(self) -> float:
        """gamma_t(a*) / (B (log t / kappa)^l), which tends to 1."""
        return self.gamma_at_star / (self.B * (math.log(self.t) / self.kappa) ** self.l)


def _check_laplace_args(B, l, kappa, R, t):
    for name, v in (("B", B), ("l", l), ("kappa", kappa), ("R", R), ("t", t)):
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be finite and > 0, got {v!r}")


def gamma_t(B, l, kappa, R, t, a):
    """gamma_t(a) = R t exp(-kappa a) + B a^l."""
    a = np.asarray(a, dtype=float)
    val = R * t * np.exp(-kappa * a) + B * a ** l
    return float(val) if np.ndim(val) == 0 else val


def _phi(B, l, kappa, R, t):
    """log(kappa R t e^{-kappa a}) - log(l B a^{l-1}); its zeros are the critical points."""
    c = math.log(kappa * R) + math.log(t) - math.log(l * B)
    return lambda a: c - kappa * a - (l - 1.0) * math.log(a)


def _critical(B, l, kappa, R, t, a) -> CriticalPoint:
    g = B * a ** (l - 1.0) * (l / kappa + a)
    g2 = B * l * a ** (l - 2.0) * (kappa * a + l - 1.0)
    return CriticalPoint(a=a, kind="min" if g2 > 0 else "max", gamma=g, gamma_second=g2)


def _root(phi, lo, hi):
    return optimize.brentq(phi, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)


def critical_points(B: float, l: float, kappa: float, R: float, t: float) -> list[CriticalPoint]:
    """All zeros of gamma_t' on (0, inf), ascending, each classified by the sign of gamma_t''.

    At a zero, gamma_t'' = B l a^{l-2} (kappa a + l - 1), so for l < 1 a zero
    below (1 - l)/kappa is a relative maximum and one above it a relative minimum.
    """
    _check_laplace_args(B, l, kappa, R, t)
    phi = _phi(B, l, kappa, R, t)
    roots = []
    if l >= 1.0:
        # phi strictly decreasing; phi(0+) = +inf for l > 1, log(kappa R t/B) for l = 1
        lo = 1e-300 if l > 1.0 else 0.0
        hi = 1.0
        if l == 1.0 and not phi(1e-300) > 0:
            return []
        while phi(hi) > 0:
            hi *= 2.0
        roots.append(_root(phi, max(lo, 1e-300), hi))
    else:
        a_c = (1.0 - l) / kappa
        if phi(a_c) <= 0:
            return []
        lo = a_c
        while phi(lo) > 0:
            lo *= 0.5
        roots.append(_root(phi, lo, a_c))
        hi = 2.0 * a_c
        while phi(hi) > 0:
            hi *= 2.0
        roots.append(_root(phi, a_c, hi))
    return [_critical(B, l, kappa, R, t, a) for a in roots]


def laplace_minimize(B: float, l: float, kappa: float, R: float, t: float) -> LaplacePoint:
    """Global minimiser a* of gamma_t on (0, inf).

    For l >= 1 it is the unique zero of gamma_t'; for l < 1 the larger of the
    two zeros, provided it beats the boundary value gamma_t(0) = R t.

    Raises:
        PreAsymptoticError: when no interior global minimiser exists yet (l < 1
            with fewer than two critical points, or l = 1 with kappa R t <= B).
    """
    pts = [c for c in critical_points(B, l, kappa, R, t) if c.kind == "min"]
    if not pts:
        raise PreAsymptoticError(f"gamma_t has no interior minimum at t={t:g}; pre-asymptotic regime")
    best = pts[-1]
    if best.gamma >= R * t:
        raise PreAsymptoticError(f"boundary a=0 beats the interior critical point at t={t:g}")
    phi = _phi(B, l, kappa, R, t)
    return LaplacePoint(
        t=float(t), a_star=best.a, gamma_at_star=best.gamma, kappa=float(kappa), R=float(R),
        B=float(B), l=float(l), residual=abs(math.expm1(phi(best.a))), gamma_second=best.gamma_second,
    )


def laplace_log_integral(B: float, l: float, kappa: float, R: float, t: float, rtol: float = 1e-12) -> float:
    """log of int_0^inf exp(-R t e^{-kappa a} - B a^l) da by adaptive quadrature."""
    _check_laplace_args(B, l, kappa, R, t)
    cands = [0.0] + [c.a for c in critical_points(B, l, kappa, R, t) if c.kind == "min"]
    vals = [gamma_t(B, l, kappa, R, t, a) for a in cands]
    k = int(np.argmin(vals))
    a_min, g_min = cands[k], vals[k]

    def excess(a):
        return gamma_t(B, l, kappa, R, t, a) - g_min - 2.0 * _WINDOW_NATS

    lo = 0.0
    if a_min > 0 and excess(0.0) > 0:
        lo = optimize.brentq(excess, 0.0, a_min, xtol=1e-14)
    hi = max(a_min, 1.0)
    while excess(hi) <= 0:
        hi *= 2.0
    hi = optimize.brentq(excess, max(a_min, 0.0), hi, xtol=1e-14)

    def f(a):
        return math.exp(-(gamma_t(B, l, kappa, R, t, a) - g_min))

    pts = [a_min] if lo < a_min < hi else None
    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol, limit=500, points=pts)
    return math.log(val) - g_min


@dataclass(frozen=True)
class BoundCheck:
    t: float
    lower_log: float
    integral_log: float
    upper_log: float

    @property
    def holds(self) -> bool:
        return self.lower_log <= self.integral_log <= self.upper_log


def laplace_bound_check(
    B: float, l: float, kappa: float, R: float, t: float, eps: float = 0.1, alpha: float = 1.0
) -> BoundCheck:
    """Compare the explicit lower and upper bounds with the integral, all as logs.

    lower = alpha (log t)^{-max(0, l-1)} exp(-(1+eps) B (log t/kappa)^l - 1)
    upper = [(1+eps) (log t/kappa) + (log t/kappa)^{1-l}/(l B)] exp(-(1-eps) B (log t/kappa)^l)

    Both bounds are asserted only for t beyond an unspecified threshold that
    depends on eps, and alpha is an unspecified constant.
    """
    _check_laplace_args(B, l, kappa, R, t)
    if not (0 < eps < 1 and alpha > 0):
        raise DomainError("need 0 < eps < 1 and alpha > 0")
    L = math.log(t)
    x = L / kappa
    lower = math.log(alpha) - max(0.0, l - 1.0) * math.log(L) - (1.0 + eps) * B * x ** l - 1.0
    upper = -(1.0 - eps) * B * x ** l + math.log((1.0 + eps) * x + x ** (1.0 - l) / (l * B))
    return BoundCheck(float(t), lower, laplace_log_integral(B, l, kappa, R, t), upper)
