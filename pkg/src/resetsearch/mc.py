"""Monte Carlo oracle for Brownian search with Poissonian resetting.

Every trajectory owns a private xoshiro256** stream seeded from
splitmix64(seed, trajectory index), so estimates are bit-identical for a
given seed whatever the number of worker threads. Counts are merged by plain
integer sums.

Three samplers:

* 1-d hitting times, exact. Within an inter-reset gap of length E ~ Exp(r)
  the first passage time of 0 -> a is Levy distributed, T = a^2/(D Z^2) with
  Z standard normal, which is the reflection-principle CDF inverted in closed
  form. The target is found in that gap iff T < E.
* 1-d positions at checkpoints, exact. The path is advanced between
  consecutive reset/checkpoint epochs by Gaussian increments, and killed with
  the exact Brownian-bridge crossing probability exp(-2(a-x)(a-y)/(D h)).
* Radial (d >= 2) paths. Either Euler-Maruyama on
  dY = D(d-1)/(2Y) dt + sqrt(D) dW with fixed step dt, or the exact transition
  of |y e_1 + sqrt(D h) Z|, Z ~ N(0, I_d), with an adaptive step. Both use the
  flat-boundary bridge correction exp(-2(y-eps0)(y'-eps0)/(D h)).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange
from scipy import special as sps

from .eigen1d import EigenSolution1D, Params1D
from .eigen_radial import ParamsRadial
from .errors import DomainError, InsufficientSamplesError

# Prefer OpenMP; an outdated TBB otherwise triggers a warning on first launch.
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__all__ = [
    "SimConfig",
    "SurvivalEstimate",
    "ConditionedEstimate",
    "bm_no_reset_survival_cdf",
    "sample_hitting_times_1d",
    "simulate_survival_1d",
    "mean_time_to_locate_mc",
    "conditioned_u_statistics",
    "conditioned_u_expectation",
    "simulate_survival_radial",
    "simulate_2d_no_reset_survival",
    "survival_from_times",
    "merge_counts",
    "fit_log_slope",
    "set_threads",
]

THREADS_ENV = "RESETSEARCH_THREADS"

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_SM1 = _U64(0xBF58476D1CE4E5B9)
_SM2 = _U64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0
_BRIDGE_CUTOFF = 40.0


# --------------------------------------------------------------------------- RNG


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << _U64(k)) | (x >> _U64(64 - k))


@njit(cache=True)
def _splitmix(z):
    z = z + _GOLDEN
    x = z
    x = (x ^ (x >> _U64(30))) * _SM1
    x = (x ^ (x >> _U64(27))) * _SM2
    return z, x ^ (x >> _U64(31))


@njit(cache=True)
def _seed_stream(seed, stream, st):
    """Fill st[0:4] with the xoshiro256** state for (seed, stream)."""
    z = _U64(seed) ^ (_U64(stream) * _GOLDEN)
    z, st[0] = _splitmix(z)
    z, st[1] = _splitmix(z)
    z, st[2] = _splitmix(z)
    z, st[3] = _splitmix(z)


@njit(cache=True, inline="always")
def _next_u64(st):
    result = _rotl(st[1] * _U64(5), 7) * _U64(9)
    t = st[1] << _U64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@njit(cache=True, inline="always")
def _uniform(st, mirror):
    """Uniform on the open interval (0, 1); mirrored draws return 1 - u."""
    u = (float(_next_u64(st) >> _U64(11)) + 0.5) * _TWO_M53
    return 1.0 - u if mirror else u


def _ziggurat_tables(n_layers=128, r=3.442619855899, v=9.91256303526217e-3):
    x = np.empty(n_layers + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    x[n_layers] = 0.0
    for i in range(2, n_layers):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio


_ZIG_X, _ZIG_R = _ziggurat_tables()
_ZIG_TAIL = 3.442619855899


@njit(cache=True, inline="always")
def _normal(st, mirror):
    """Standard normal by the 128-layer ziggurat (exact)."""
    while True:
        bits = _next_u64(st)
        i = int(bits & _U64(127))
        u = 2.0 * ((float(bits >> _U64(11)) + 0.5) * _TWO_M53) - 1.0
        if abs(u) < _ZIG_R[i]:
            z = u * _ZIG_X[i]
            break
        if i == 0:
            # tail beyond the base strip
            while True:
                xt = math.log(_uniform(st, False)) / _ZIG_TAIL
                yt = math.log(_uniform(st, False))
                if -2.0 * yt >= xt * xt:
                    break
            z = xt - _ZIG_TAIL if u < 0 else _ZIG_TAIL - xt
            break
        x = u * _ZIG_X[i]
        f0 = math.exp(-0.5 * (_ZIG_X[i] * _ZIG_X[i] - x * x))
        f1 = math.exp(-0.5 * (_ZIG_X[i + 1] * _ZIG_X[i + 1] - x * x))
        if f1 + _uniform(st, False) * (f0 - f1) < 1.0:
            z = x
            break
    return -z if mirror else z


@njit(cache=True, inline="always")
def _stream_of(i, antithetic):
    if antithetic:
        return i // 2, (i % 2) == 1
    return i, False


def set_threads(n: int | None = None) -> int:
    """Set the worker count from ``n`` or the RESETSEARCH_THREADS variable; returns it."""
    if n is None:
        env = os.environ.get(THREADS_ENV)
        if not env:
            return numba.get_num_threads()
        n = int(env)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


# --------------------------------------------------------------------------- types


@dataclass(frozen=True)
class SimConfig:
    n_trajectories: int
    t_max: float
    dt: float = 1e-3
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 1:
            raise DomainError(f"n_trajectories must be a positive integer, got {self.n_trajectories!r}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise DomainError(f"t_max must be finite and > 0, got {self.t_max!r}")
        if not (self.dt > 0):
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "n_trajectories", int(self.n_trajectories))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class SurvivalEstimate:
    t: float
    p_hat: float
    half_width_95: float
    n: int
    seed: int

    @classmethod
    def from_counts(cls, t: float, survivors: int, n: int, seed: int) -> "SurvivalEstimate":
        p = survivors / n
        return cls(float(t), p, 1.96 * math.sqrt(p * (1.0 - p) / n), int(n), int(seed))

    @property
    def std_error(self) -> float:
        return self.half_width_95 / 1.96


@dataclass(frozen=True)
class ConditionedEstimate:
    """Statistics of u(X(t)) on the event {tau > t}.

    joint_mean estimates E[u(X(t)); tau > t] and joint_se is its standard error;
    conditional_mean = joint_mean / p_hat.
    """

    t: float
    p_hat: float
    conditional_mean: float
    joint_mean: float
    joint_se: float
    n_alive: int
    n: int
    seed: int


def _check_times(ts, t_max: float) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(ts, dtype=float))
    if arr.size == 0:
        raise DomainError("empty time grid")
    if np.any(~(arr > 0)) or np.any(np.diff(arr) < 0):
        raise DomainError("times must be positive and sorted")
    if arr[-1] > t_max * (1 + 1e-12):
        raise DomainError(f"largest time {arr[-1]} exceeds t_max={t_max}")
    return arr


# --------------------------------------------------------------------------- oracles


def bm_no_reset_survival_cdf(D: float, a: float, u):
    """P(tau_a > u) = erf(|a| / sqrt(2 D u)) for Brownian motion without resetting."""
    if not D > 0:
        raise DomainError("D must be > 0")
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr > 0)) or a == 0:
        raise DomainError("u must be > 0 and a nonzero")
    val = sps.erf(abs(a) / np.sqrt(2.0 * D * u_arr))
    return float(val) if np.ndim(u) == 0 else val


# --------------------------------------------------------------------------- 1-d, hitting times


@njit(cache=True, parallel=True)
def _levy_tau_kernel(D, r, a, n, seed, antithetic, t_cap, out):
    for i in prange(n):
        st = np.empty(4, dtype=np.uint64)
        stream, mirror = _stream_of(i, antithetic)
        _seed_stream(seed, stream, st)
        elapsed = 0.0
        tau = np.inf
        while elapsed <= t_cap:
            gap = -math.log(_uniform(st, mirror)) / r
            z = _normal(st, mirror)
            hit = a * a / (D * z * z)
            if hit < gap:
                tau = elapsed + hit
                break
            elapsed += gap
        out[i] = tau


def sample_hitting_times_1d(p: Params1D, cfg: SimConfig, t_cap: float | None = None) -> np.ndarray:
    """Exact samples of tau_a; trajectories still searching past ``t_cap`` are reported as inf.

    ``t_cap`` defaults to cfg.t_max; pass math.inf for uncensored samples.
    """
    cap = cfg.t_max if t_cap is None else float(t_cap)
    out = np.empty(cfg.n_trajectories)
    _levy_tau_kernel(p.D, p.r, p.a, cfg.n_trajectories, _U64(cfg.seed), cfg.antithetic, cap, out)
    return out


def survival_from_times(taus: np.ndarray, ts, seed: int) -> list[SurvivalEstimate]:
    """Estimates of P(tau > t) on the grid ts from one set of sampled times."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    srt = np.sort(taus)
    n = srt.size
    alive = n - np.searchsorted(srt, ts, side="right")
    return [SurvivalEstimate.from_counts(t, int(k), n, seed) for t, k in zip(ts, alive)]


def merge_counts(*parts: tuple[np.ndarray, int]) -> tuple[np.ndarray, int]:
    """Associative merge of (survivor counts per t, n) pairs from separate batches."""
    counts = np.zeros_like(np.asarray(parts[0][0], dtype=np.int64))
    total = 0
    for c, n in parts:
        counts = counts + np.asarray(c, dtype=np.int64)
        total += int(n)
    return counts, total


def simulate_survival_1d(p: Params1D, cfg: SimConfig, ts) -> list[SurvivalEstimate]:
    """Exact event-driven estimates of P_0(tau_a > t) at each t in ts."""
    ts = _check_times(ts, cfg.t_max)
    taus = sample_hitting_times_1d(p, cfg, t_cap=float(ts[-1]))
    return survival_from_times(taus, ts, cfg.seed)


def mean_time_to_locate_mc(p: Params1D, cfg: SimConfig) -> tuple[float, float]:
    """Sample mean of tau_a and its standard error (uncensored)."""
    taus = sample_hitting_times_1d(p, cfg, t_cap=math.inf)
    return float(taus.mean()), float(taus.std(ddof=1) / math.sqrt(taus.size))


# --------------------------------------------------------------------------- 1-d, positions


@njit(cache=True, parallel=True)
def _positions_1d_kernel(D, r, a, ts, n, seed, antithetic, out):
    """out[i, k] = X(ts[k]) if trajectory i has not hit a by ts[k], else nan."""
    nt = ts.size
    for i in prange(n):
        st = np.empty(4, dtype=np.uint64)
        stream, mirror = _stream_of(i, antithetic)
        _seed_stream(seed, stream, st)
        t = 0.0
        x = 0.0
        next_reset = -math.log(_uniform(st, mirror)) / r
        alive = True
        for k in range(nt):
            tk = ts[k]
            while alive and t < tk:
                t_next = min(next_reset, tk)
                h = t_next - t
                y = x + math.sqrt(D * h) * _normal(st, mirror)
                if y >= a:
                    alive = False
                elif _uniform(st, mirror) < math.exp(-2.0 * (a - x) * (a - y) / (D * h)):
                    alive = False
                x = y
                t = t_next
                if t == next_reset:
                    x = 0.0
                    next_reset = t + (-math.log(_uniform(st, mirror)) / r)
            out[i, k] = x if alive else np.nan


def conditioned_u_statistics(p: Params1D, sol: EigenSolution1D, cfg: SimConfig, ts) -> list[ConditionedEstimate]:
    """MC estimates of E[u(X(t)); tau_a > t] and E[u(X(t)) | tau_a > t] on a time grid.

    The path is sampled exactly at the reset and checkpoint epochs, so the
    identity exp(lambda0 t) E[u(X(t)); tau_a > t] = 1 can be tested at any t.

    Raises:
        InsufficientSamplesError: when fewer than 100 trajectories survive to some t.
    """
    from .eigen1d import eigenfunction_u

    ts = _check_times(ts, cfg.t_max)
    pos = np.empty((cfg.n_trajectories, ts.size))
    _positions_1d_kernel(p.D, p.r, p.a, ts, cfg.n_trajectories, _U64(cfg.seed), cfg.antithetic, pos)
    n = cfg.n_trajectories
    out = []
    for k, t in enumerate(ts):
        col = pos[:, k]
        live = col[~np.isnan(col)]
        if live.size < 100:
            raise InsufficientSamplesError(f"only {live.size} of {n} trajectories survive to t={t}")
        u = np.zeros(n)
        u[: live.size] = eigenfunction_u(p, sol, live)
        joint = float(u.mean())
        se = float(u.std(ddof=1) / math.sqrt(n))
        p_hat = live.size / n
        out.append(ConditionedEstimate(float(t), p_hat, joint / p_hat, joint, se, int(live.size), n, cfg.seed))
    return out


def conditioned_u_expectation(p: Params1D, sol: EigenSolution1D, cfg: SimConfig, t: float) -> float:
    """MC estimate of E_0[u(X(t)) | tau_a > t]."""
    return conditioned_u_statistics(p, sol, cfg, [t])[0].conditional_mean


# --------------------------------------------------------------------------- radial


@njit(cache=True, parallel=True)
def _radial_kernel(D, r, d, eps, A, t_end, n, seed, antithetic, dt, exact, c_adapt, h_min, out):
    """out[i] = absorption time of trajectory i, or inf if alive at t_end.

    r = 0 disables resetting. With exact=False, fixed-step Euler-Maruyama; with
    exact=True, exact transitions and step min(dt, max(c_adapt (y-eps)^2/D, h_min)).
    """
    drift_c = 0.5 * D * (d - 1)
    for i in prange(n):
        st = np.empty(4, dtype=np.uint64)
        stream, mirror = _stream_of(i, antithetic)
        _seed_stream(seed, stream, st)
        t = 0.0
        y = A
        if r > 0.0:
            next_reset = -math.log(_uniform(st, mirror)) / r
        else:
            next_reset = np.inf
        tau = np.inf
        while t < t_end:
            if exact:
                gap = y - eps
                h = max(c_adapt * gap * gap / D, h_min)
                h = min(h, dt)
            else:
                h = dt
            t_next = min(t + h, next_reset, t_end)
            h = t_next - t
            s = math.sqrt(D * h)
            if exact:
                z1 = y + s * _normal(st, mirror)
                acc = z1 * z1
                for _ in range(d - 1):
                    zj = s * _normal(st, mirror)
                    acc += zj * zj
                y_new = math.sqrt(acc)
            else:
                y_new = y + drift_c / y * h + s * _normal(st, mirror)
            if y_new <= eps:
                tau = t_next
                break
            expo = 2.0 * (y - eps) * (y_new - eps) / (D * h)
            if expo < _BRIDGE_CUTOFF and _uniform(st, mirror) < math.exp(-expo):
                tau = t_next
                break
            y = y_new
            t = t_next
            if t == next_reset:
                y = A
                next_reset = t + (-math.log(_uniform(st, mirror)) / r)
        out[i] = tau


def _radial_times(D, r, d, eps, A, t_end, cfg: SimConfig, exact, c_adapt=0.01, h_min=None):
    if h_min is None:
        h_min = 1e-4 * eps * eps / D
    out = np.empty(cfg.n_trajectories)
    _radial_kernel(
        float(D), float(r), int(d), float(eps), float(A), float(t_end), cfg.n_trajectories,
        _U64(cfg.seed), cfg.antithetic, float(cfg.dt), bool(exact), float(c_adapt), float(h_min), out,
    )
    return out


def simulate_survival_radial(p: ParamsRadial, cfg: SimConfig, ts, scheme: str = "euler") -> list[SurvivalEstimate]:
    """Estimates of P(tau > t) for the reset Bessel process started at A.

    Args:
        scheme: "euler" for fixed-step Euler-Maruyama with step cfg.dt, or
            "exact" for exact transitions with an adaptive step capped at cfg.dt.

    Raises:
        DomainError: for d < 2, dt > t_max/100, or sqrt(D dt) > eps0/4 with the
            Euler scheme.
    """
    if not isinstance(p, ParamsRadial):
        raise DomainError("radial simulation needs ParamsRadial (d >= 2); use simulate_survival_1d for d = 1")
    ts = _check_times(ts, cfg.t_max)
    if cfg.dt > cfg.t_max / 100:
        raise DomainError(f"dt={cfg.dt} must not exceed t_max/100={cfg.t_max / 100}")
    if scheme == "euler":
        if math.sqrt(p.D * cfg.dt) > p.eps0 / 4:
            raise DomainError("step too coarse: sqrt(D dt) exceeds eps0/4")
        exact = False
    elif scheme == "exact":
        exact = True
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    taus = _radial_times(p.D, p.r, p.d, p.eps0, p.A, ts[-1], cfg, exact)
    return survival_from_times(taus, ts, cfg.seed)


def simulate_2d_no_reset_survival(D: float, eps0: float, a: float, t: float, cfg: SimConfig) -> SurvivalEstimate:
    """P(tau > t) for planar Brownian motion from distance a to an eps0-disc, no resetting.

    Exact radial transitions with an adaptive step; cfg.dt caps the step and
    cfg.t_max is ignored in favour of t.
    """
    if not (D > 0 and eps0 > 0 and a > eps0):
        raise DomainError("need D > 0 and a > eps0 > 0")
    if not t >= 2:
        raise DomainError("t must be >= 2")
    taus = _radial_times(D, 0.0, 2, eps0, a, t, cfg, exact=True)
    return survival_from_times(taus, [t], cfg.seed)[0]


# --------------------------------------------------------------------------- fitting


def fit_log_slope(estimates: list[SurvivalEstimate]) -> tuple[float, float]:
    """Weighted least-squares slope of log p_hat against t, with its standard error.

    Weights are the inverse delta-method variances (1 - p)/(n p).
    """
    t = np.array([e.t for e in estimates])
    p = np.array([e.p_hat for e in estimates])
    n = np.array([e.n for e in estimates], dtype=float)
    if np.any(p <= 0):
        raise InsufficientSamplesError("a survival estimate is zero; log-slope undefined")
    var = (1.0 - p) / (n * p)
    var = np.maximum(var, 1.0 / (n * n))
    w = 1.0 / var
    tw = np.sum(w * t) / np.sum(w)
    yw = np.sum(w * np.log(p)) / np.sum(w)
    sxx = np.sum(w * (t - tw) ** 2)
    slope = np.sum(w * (t - tw) * (np.log(p) - yw)) / sxx
    return float(slope), float(math.sqrt(1.0 / sxx))
