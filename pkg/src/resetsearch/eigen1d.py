"""Principal eigenpair of Brownian search with resetting to the origin in 1-d.

The searcher starts at 0, diffuses with coefficient D and is reset to 0 at
rate r; it is killed on reaching the target a > 0. The principal eigenvalue
lambda0 of the killed generator is the unique root in (0, r) of

    lambda = r exp(-a sqrt(2 (r - lambda) / D)).

Writing q = sqrt(2 (r - lambda)/D), the same equation reads
r (1 - exp(-a q)) = D q^2 / 2, and dividing out the trivial root q = 0 gives a
strictly decreasing function of q on (0, sqrt(2r/D)). Solving in q avoids the
cancellation in r - lambda when lambda is close to r and keeps lambda0 exact
to relative precision even when it is far below 1e-300 * r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError

__all__ = [
    "Params1D",
    "EigenSolution1D",
    "solve_lambda0",
    "eigenfunction_u",
    "adjoint_eigenfunction_v",
    "prefactor_M",
    "prefactor_M_quadrature",
    "integral_v",
    "integral_uv",
    "survival_asymptote_1d",
    "mean_time_to_locate_1d",
    "eigenvalue_bounds_1d",
    "residual_1d",
]


@dataclass(frozen=True)
class Params1D:
    """Diffusion coefficient D, resetting rate r and target position a.

    A negative target is folded to |a|; every result is symmetric in the sign
    of a, and eigenfunction coordinates refer to the folded problem.
    """

    D: float
    r: float
    a: float

    def __post_init__(self):
        for name in ("D", "r"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be finite and > 0, got {val!r}")
        if not np.isfinite(self.a) or self.a == 0:
            raise DomainError(f"target position must be finite and nonzero, got {self.a!r}")
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "a", abs(float(self.a)))

    @property
    def kappa(self) -> float:
        """Free decay rate sqrt(2r/D), the q of the r -> lambda0 -> 0 limit."""
        return math.sqrt(2.0 * self.r / self.D)


@dataclass(frozen=True)
class EigenSolution1D:
    lambda0: float
    q: float
    residual: float
    prefactor_M: float
    log_lambda0: float  # exact even where lambda0 underflows


def residual_1d(p: Params1D, lam: float) -> float:
    """psi(lam) = r exp(-a sqrt(2(r - lam)/D)) - lam."""
    return p.r * math.exp(-p.a * math.sqrt(2.0 * (p.r - lam) / p.D)) - lam


def _q_equation(p: Params1D):
    r, a, D = p.r, p.a, p.D

    def h(q):
        return r * (-math.expm1(-a * q)) / q - 0.5 * D * q

    return h


def _solve_q_fixed_point(p: Params1D) -> float:
    # q = kappa sqrt(1 - exp(-a q)); contraction factor ~ kappa a exp(-kappa a)/2
    q = p.kappa
    for _ in range(100):
        q_new = p.kappa * math.sqrt(-math.expm1(-p.a * q))
        if abs(q_new - q) <= 2.0 * np.finfo(float).eps * q:
            return q_new
        q = q_new
    raise ConvergenceError("fixed-point iteration for q did not converge")


def _solve_q(p: Params1D) -> float:
    q_max = p.kappa
    if q_max * p.a > 10.0:
        # the bracket end h(kappa) = -r exp(-kappa a)/kappa drowns in rounding here
        return _solve_q_fixed_point(p)
    h = _q_equation(p)
    lo = q_max * 1e-12
    if not h(lo) > 0:
        raise ConvergenceError("no sign change at the lower end of the q-bracket")
    try:
        q, info = optimize.brentq(
            h, lo, q_max, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500, full_output=True
        )
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"eigenvalue root-finding failed: {exc}") from exc
    if not info.converged:
        raise ConvergenceError(f"Brent iteration did not converge: {info.flag}")
    return q


def _prefactor_from_q(p: Params1D, q: float) -> float:
    qa = q * p.a
    # numerator and denominator of the closed form, both divided by e^{qa}
    num = 2.0 * (-math.expm1(-qa)) - qa * math.exp(-qa)
    gap = 0.5 * p.D * q * q / p.r  # 1 - lambda0/r
    return num / (2.0 * gap * gap)


def solve_lambda0(p: Params1D, tol: float = 1e-14) -> EigenSolution1D:
    """Principal eigenvalue with its decay rate q, residual and prefactor M.

    Args:
        p: problem parameters.
        tol: bound required on |r exp(-a sqrt(2(r - lambda0)/D)) - lambda0|.

    Raises:
        ConvergenceError: if the bracketed root cannot be located to ``tol``,
            which means tol is below what double precision can resolve.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol!r}")
    q = _solve_q(p)
    lam = p.r * math.exp(-p.a * q)
    res = abs(residual_1d(p, lam))
    if res > tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds tol={tol:.3e}")
    return EigenSolution1D(
        lambda0=lam, q=q, residual=res, prefactor_M=_prefactor_from_q(p, q), log_lambda0=math.log(p.r) - p.a * q
    )


def eigenfunction_u(p: Params1D, sol: EigenSolution1D, x):
    """Principal eigenfunction (r/(r - lambda0)) (1 - exp(-q (a - x))), x <= a.

    Normalised so that u(0) = 1.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr > p.a):
        raise DomainError("eigenfunction u is defined for x <= a only")
    scale = 2.0 * p.r / (p.D * sol.q * sol.q)  # r / (r - lambda0)
    val = scale * -np.expm1(-sol.q * (p.a - x_arr))
    return float(val) if np.ndim(x) == 0 else val


def adjoint_eigenfunction_v(p: Params1D, sol: EigenSolution1D, y):
    """Principal eigenfunction of the adjoint generator, y <= a.

    exp(q y) on y < 0 and sinh(q (a - y)) / sinh(q a) on [0, a]; continuous at
    0 with v(0) = 1 and v(a) = 0.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr > p.a):
        raise DomainError("adjoint eigenfunction v is defined for y <= a only")
    q, a = sol.q, p.a
    left = np.exp(q * np.minimum(y_arr, 0.0))
    yr = np.clip(y_arr, 0.0, a)
    right = np.exp(-q * yr) * np.expm1(-2.0 * q * (a - yr)) / np.expm1(-2.0 * q * a)
    val = np.where(y_arr < 0, left, right)
    return float(val) if np.ndim(y) == 0 else val


def integral_v(p: Params1D, sol: EigenSolution1D) -> float:
    """Closed form of the integral of v over (-inf, a]: q D e^{qa} / (r (e^{qa} - e^{-qa}))."""
    q = sol.q
    return -q * p.D / (p.r * math.expm1(-2.0 * q * p.a))


def integral_uv(p: Params1D, sol: EigenSolution1D) -> float:
    """Closed form of the integral of u v over (-inf, a]."""
    q, a = sol.q, p.a
    scale = 2.0 * p.r / (p.D * q * q)
    e1 = math.exp(-q * a)
    first = scale * (1.0 / q - 0.5 * e1 / q)
    # (2e^{qa} + 2e^{-qa} - e^{-2qa} - 3 - 2qa) / (e^{qa} - e^{-qa}), scaled by e^{-qa}
    bracket = (2.0 + 2.0 * e1 * e1 - e1 ** 3 - 3.0 * e1 - 2.0 * q * a * e1) / (-math.expm1(-2.0 * q * a))
    return first + scale / (2.0 * q) * bracket


def prefactor_M(p: Params1D, sol: EigenSolution1D) -> float:
    """Large-t limit of E_0[u(X(t)) | tau_a > t]:

        M = (2 e^{qa} - 2 - qa) / (2 e^{qa} (1 - lambda0/r)^2).
    """
    return _prefactor_from_q(p, sol.q)


def prefactor_M_quadrature(p: Params1D, sol: EigenSolution1D, rtol: float = 1e-10) -> float:
    """M as the ratio of integrals (int u v) / (int v), by quadrature.

    The left tail is truncated at -L with exp(-q L) < 1e-16; L doubles until two
    successive ratios agree to ``rtol``.
    """
    q, a = sol.q, p.a

    def ratio(L):
        kw = dict(epsabs=0.0, epsrel=1e-13, limit=500)
        v_left = integrate.quad(lambda y: adjoint_eigenfunction_v(p, sol, y), -L, 0.0, **kw)[0]
        v_right = integrate.quad(lambda y: adjoint_eigenfunction_v(p, sol, y), 0.0, a, **kw)[0]
        uv = lambda y: eigenfunction_u(p, sol, y) * adjoint_eigenfunction_v(p, sol, y)  # noqa: E731
        uv_left = integrate.quad(uv, -L, 0.0, **kw)[0]
        uv_right = integrate.quad(uv, 0.0, a, **kw)[0]
        return (uv_left + uv_right) / (v_left + v_right)

    L = 37.0 / q
    prev = ratio(L)
    for _ in range(30):
        L *= 2.0
        cur = ratio(L)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise ConvergenceError("quadrature for M did not stabilise under tail doubling")


def survival_asymptote_1d(p: Params1D, sol: EigenSolution1D, t):
    """Large-t approximation (1/M) exp(-lambda0 t) to P_0(tau_a > t).

    Only meaningful once the conditioned process has equilibrated (lambda0 t of
    order one or larger). At small t it can exceed the true survival
    probability; at t = 0 it equals 1/M, which exceeds 1 whenever M < 1.
    """
    t_arr = np.asarray(t, dtype=float)
    val = np.exp(-sol.lambda0 * t_arr) / sol.prefactor_M
    return float(val) if np.ndim(t) == 0 else val


def mean_time_to_locate_1d(p: Params1D) -> float:
    """Expected hitting time (exp(sqrt(2r/D) |a|) - 1) / r.

    Raises:
        OverflowError: when sqrt(2r/D) |a| exceeds the exponential range.
    """
    return math.expm1(p.kappa * p.a) / p.r


def eigenvalue_bounds_1d(p: Params1D) -> tuple[float, float]:
    """(r exp(-sqrt(2r/D) a), r): the explicit lower bound and the trivial upper one."""
    return p.r * math.exp(-p.kappa * p.a), p.r
