"""Principal eigenpair of the radial (Bessel) search problem in dimension d >= 2.

For a target ball of radius eps0 at distance A from the reset point, the
distance Y(t) to the target centre is a Bessel process of order d reset to A
at rate r and killed on reaching eps0. With nu = (d - 2)/2 and
q = sqrt(2 (r - lambda)/D) the eigenvalue equation is

    lambda = r (A/eps0)^(-nu) K_nu(q A) / K_nu(q eps0).

As in 1-d the root is located in q, so lambda0 = r * rho(q) never suffers
cancellation, and every Bessel ratio is formed in log space from the scaled
kernels of :mod:`resetsearch.special`.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError
from .special import log_bessel_i, log_bessel_k, order_for_dimension

__all__ = [
    "ParamsRadial",
    "EigenSolutionRadial",
    "solve_lambda0_radial",
    "residual_radial",
    "eigenfunction_U",
    "adjoint_eigenfunction_V",
    "log_adjoint_scale",
    "integral_V",
    "prefactor_M_radial",
    "survival_asymptote_radial",
    "asymptotic_constant_radial",
    "eigenvalue_asymptote_radial",
]

_M_RTOL = 1e-5  # accepted relative quadrature error in int V and int U V


@dataclass(frozen=True)
class ParamsRadial:
    """Radial problem: diffusion D, reset rate r, dimension d, target radius eps0, start/reset radius A."""

    D: float
    r: float
    d: int
    eps0: float
    A: float

    def __post_init__(self):
        for name in ("D", "r", "eps0", "A"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be finite and > 0, got {val!r}")
            object.__setattr__(self, name, float(val))
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"radial problem needs an integer dimension d >= 2, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if not self.A > self.eps0:
            raise DomainError(f"reset radius A={self.A} must exceed target radius eps0={self.eps0}")

    @property
    def nu(self) -> float:
        return order_for_dimension(self.d)

    @property
    def kappa(self) -> float:
        return math.sqrt(2.0 * self.r / self.D)


@dataclass(frozen=True)
class EigenSolutionRadial:
    lambda0: float
    q: float
    residual: float
    prefactor_M: float
    log_lambda0: float  # exact even where lambda0 underflows


def _log_rho(p: ParamsRadial, q: float) -> float:
    """log of (A/eps0)^(-nu) K_nu(qA)/K_nu(q eps0)."""
    nu = p.nu
    return (
        -nu * math.log(p.A / p.eps0)
        + log_bessel_k(nu, q * p.A)
        - log_bessel_k(nu, q * p.eps0)
    )


def residual_radial(p: ParamsRadial, lam: float) -> float:
    """r (A/eps0)^(-nu) K_nu(qA)/K_nu(q eps0) - lam with q = sqrt(2(r - lam)/D)."""
    q = math.sqrt(2.0 * (p.r - lam) / p.D)
    return p.r * math.exp(_log_rho(p, q)) - lam


def _solve_q(p: ParamsRadial) -> float:
    r, D = p.r, p.D

    def g(q):
        return r * -math.expm1(_log_rho(p, q)) - 0.5 * D * q * q

    q_max = p.kappa
    if _log_rho(p, q_max) < -20.0:
        # g(kappa) = -r rho(kappa) drowns in rounding; iterate q = kappa sqrt(1 - rho(q)),
        # which contracts by ~ kappa (A - eps0) rho / 2
        q = q_max
        for _ in range(100):
            q_new = q_max * math.sqrt(-math.expm1(_log_rho(p, q)))
            if abs(q_new - q) <= 2.0 * np.finfo(float).eps * q:
                return q_new
            q = q_new
        raise ConvergenceError("fixed-point iteration for q did not converge")
    lo = q_max * 1e-12
    if not g(lo) > 0:
        raise ConvergenceError("no sign change at the lower end of the q-bracket")
    try:
        q, info = optimize.brentq(
            g, lo, q_max, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500, full_output=True
        )
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"radial eigenvalue root-finding failed: {exc}") from exc
    if not info.converged:
        raise ConvergenceError(f"Brent iteration did not converge: {info.flag}")
    return q


def solve_lambda0_radial(p: ParamsRadial, tol: float = 1e-14, with_prefactor: bool = True) -> EigenSolutionRadial:
    """Principal eigenvalue of the radial problem.

    Args:
        p: problem parameters.
        tol: bound required on the implicit-equation residual.
        with_prefactor: compute M by quadrature (the expensive part). When
            False the returned prefactor_M is nan.

    Raises:
        ConvergenceError: root or quadrature failure.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol!r}")
    q = _solve_q(p)
    log_lam = math.log(p.r) + _log_rho(p, q)
    lam = math.exp(log_lam)
    res = abs(residual_radial(p, lam))
    if res > tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds tol={tol:.3e}")
    sol = EigenSolutionRadial(lambda0=lam, q=q, residual=res, prefactor_M=math.nan, log_lambda0=log_lam)
    if with_prefactor:
        sol = dataclasses.replace(sol, prefactor_M=prefactor_M_radial(p, sol))
    return sol


def _check_domain(p: ParamsRadial, x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < p.eps0):
        raise DomainError(f"radial eigenfunctions are defined for x >= eps0={p.eps0}")
    return arr


def eigenfunction_U(p: ParamsRadial, sol: EigenSolutionRadial, x):
    """(r/(r - lambda0)) (1 - (x/eps0)^(-nu) K_nu(qx)/K_nu(q eps0)); U(eps0) = 0, U(A) = 1."""
    arr = _check_domain(p, x)
    nu, q = p.nu, sol.q
    scale = 2.0 * p.r / (p.D * q * q)
    log_ratio = -nu * np.log(arr / p.eps0) + log_bessel_k(nu, q * arr) - log_bessel_k(nu, q * p.eps0)
    val = scale * -np.expm1(log_ratio)
    return float(val) if np.ndim(x) == 0 else val


def log_adjoint_scale(p: ParamsRadial, sol: EigenSolutionRadial) -> float:
    """log V(A) = log(A^(d/2) K_nu(qA)) for the printed normalisation of V."""
    return 0.5 * p.d * math.log(p.A) + log_bessel_k(p.nu, sol.q * p.A)


def _log_expm1(y):
    """log(exp(y) - 1) for y >= 0, without overflow."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log(np.expm1(np.minimum(y, 30.0)))
        large = y + np.log1p(-np.exp(-np.maximum(y, 30.0)))
    return np.where(y < 30.0, small, large)


def _v_unit(p: ParamsRadial, sol: EigenSolutionRadial, x):
    """V(x)/V(A): bounded, free of under/overflow for any A."""
    nu, q, A, eps = p.nu, sol.q, p.A, p.eps0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    lk_a = log_bessel_k(nu, q * A)
    right = x >= A
    if np.any(right):
        xr = x[right]
        out[right] = np.exp(0.5 * p.d * np.log(xr / A) + log_bessel_k(nu, q * xr) - lk_a)
    left = ~right
    if np.any(left):
        xl = x[left]
        lk_e = log_bessel_k(nu, q * eps)
        li_e = log_bessel_i(nu, q * eps)
        # I(q eps) K(qx) - I(qx) K(q eps) = -I(q eps) K(qx) expm1(log R(x))
        log_r_x = log_bessel_i(nu, q * xl) - li_e + lk_e - log_bessel_k(nu, q * xl)
        log_r_a = log_bessel_i(nu, q * A) - li_e + lk_e - lk_a
        log_cross = _log_expm1(log_r_x) - _log_expm1(np.asarray(log_r_a))
        out[left] = np.exp(0.5 * p.d * np.log(xl / A) + log_bessel_k(nu, q * xl) - lk_a + log_cross)
    return out


def adjoint_eigenfunction_V(p: ParamsRadial, sol: EigenSolutionRadial, y, normalized: bool = False):
    """Principal eigenfunction of the adjoint radial generator.

    On [eps0, A] it is the I/K cross combination vanishing at eps0, scaled to
    meet x^(d/2) K_nu(qx) at A; beyond A it is x^(d/2) K_nu(qx).

    Args:
        normalized: divide by V(A), so that V(A) = 1. The printed scale
            A^(d/2) K_nu(qA) underflows once qA exceeds about 700; M and every
            ratio are unaffected by the choice.
    """
    arr = _check_domain(p, y)
    val = _v_unit(p, sol, arr)
    if not normalized:
        val = val * math.exp(log_adjoint_scale(p, sol))
    return float(val[0]) if np.ndim(y) == 0 else val.reshape(np.shape(arr))


def _tail_end(p: ParamsRadial, sol: EigenSolutionRadial, log_floor: float) -> float:
    """Radius beyond A where V/V(A) has dropped below exp(log_floor) for good."""
    q = sol.q
    x = p.A + 1.0 / q
    for _ in range(200):
        # V is eventually decreasing: x^(d/2) K(qx) ~ x^((d-1)/2) e^{-qx}
        slope = (p.d - 1) / (2.0 * x) - q
        if slope < 0 and math.log(_v_unit(p, sol, x)[0]) < log_floor:
            return x
        x = p.A + 2.0 * (x - p.A)
    raise ConvergenceError("could not locate the tail truncation point of V")


def _integrals(p: ParamsRadial, sol: EigenSolutionRadial, epsrel: float = 1e-11):
    """(int V, int U V) over [eps0, inf) with V(A) = 1."""
    q = sol.q
    x_end = _tail_end(p, sol, math.log(1e-18))
    kw = dict(epsabs=0.0, epsrel=epsrel, limit=400)
    v = lambda x: _v_unit(p, sol, x)[0]  # noqa: E731
    uv = lambda x: eigenfunction_U(p, sol, x) * _v_unit(p, sol, x)[0]  # noqa: E731
    # break into pieces a few decay lengths wide so each quad call sees a smooth bump
    width = 4.0 / q
    n_left = max(1, int(math.ceil((p.A - p.eps0) / width)))
    n_right = max(1, int(math.ceil((x_end - p.A) / width)))
    edges = np.concatenate(
        [np.linspace(p.eps0, p.A, n_left + 1), np.linspace(p.A, x_end, n_right + 1)[1:]]
    )
    int_v = int_uv = err_v = err_uv = 0.0
    with warnings.catch_warnings():
        # roundoff warnings are expected when A - eps0 is tiny; the error budget is checked below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            iv, ev = integrate.quad(v, lo, hi, **kw)
            iuv, euv = integrate.quad(uv, lo, hi, **kw)
            int_v += iv
            int_uv += iuv
            err_v += ev
            err_uv += euv
    if not (int_v > 0 and err_v <= _M_RTOL * int_v and err_uv <= _M_RTOL * abs(int_uv)):
        raise ConvergenceError(
            f"prefactor quadrature missed its error budget (int V={int_v:.3e} +/- {err_v:.1e}, "
            f"int UV={int_uv:.3e} +/- {err_uv:.1e})"
        )
    return int_v, int_uv


def integral_V(p: ParamsRadial, sol: EigenSolutionRadial, normalized: bool = False) -> float:
    """Integral of V over [eps0, inf) by quadrature."""
    int_v, _ = _integrals(p, sol)
    return int_v if normalized else int_v * math.exp(log_adjoint_scale(p, sol))


def prefactor_M_radial(p: ParamsRadial, sol: EigenSolutionRadial) -> float:
    """M = (int U V)/(int V) over [eps0, inf), by adaptive quadrature.

    The tail is cut where V falls below 1e-18 of its value at A, past the
    point where it is monotone, which bounds the truncation error far below
    the 1e-8 target.
    """
    int_v, int_uv = _integrals(p, sol)
    if not (int_v > 0 and np.isfinite(int_uv)):
        raise ConvergenceError("quadrature for the radial prefactor failed")
    return int_uv / int_v


def survival_asymptote_radial(p: ParamsRadial, sol: EigenSolutionRadial, t):
    """(1/M) exp(-lambda0 t); approximates P(tau > t) for large t only."""
    t_arr = np.asarray(t, dtype=float)
    val = np.exp(-sol.lambda0 * t_arr) / sol.prefactor_M
    return float(val) if np.ndim(t) == 0 else val


def asymptotic_constant_radial(D: float, r: float, d: int, eps0: float, convention: str = "exact") -> float:
    """Limit of lambda0 A^((d-1)/2) exp(sqrt(2r/D) A) as A -> infinity.

    The exact value is r^(3/4) eps0^nu (pi^2 D/8)^(1/4) / K_nu(sqrt(2r/D) eps0).
    ``convention="printed"`` returns the same expression with pi^2 D/4 inside
    the fourth root, which is larger by 2^(1/4).
    """
    nu = order_for_dimension(d)
    kappa = math.sqrt(2.0 * r / D)
    if convention == "exact":
        inner = math.pi ** 2 * D / 8.0
    elif convention == "printed":
        inner = math.pi ** 2 * D / 4.0
    else:
        raise DomainError(f"unknown convention {convention!r}")
    log_c = 0.75 * math.log(r) + nu * math.log(eps0) + 0.25 * math.log(inner) - log_bessel_k(nu, kappa * eps0)
    return math.exp(log_c)


def eigenvalue_asymptote_radial(p: ParamsRadial) -> float:
    """Large-A approximation C A^((1-d)/2) exp(-sqrt(2r/D) A) to lambda0."""
    c = asymptotic_constant_radial(p.D, p.r, p.d, p.eps0)
    return c * math.exp(0.5 * (1 - p.d) * math.log(p.A) - p.kappa * p.A)
