"""Ground truth for F(eps) = P(z < eps), z = sum x_i**2 / a_i**2.

Three estimators of the N-term truncation P(z_N < eps):

* plain Monte Carlo,
* Monte Carlo under the exponentially tilted law (x_i with variance
  a_i^2/(a_i^2 + 2 theta), theta solving mu_N(theta) = eps), reweighted by the
  exact likelihood ratio,
* Imhof's inversion of the characteristic function.

Since z >= z_N and the remainder R_N = z - z_N is independent of z_N,
``truncation_bracket`` turns any of them into an interval for P(z < eps).

Random numbers come from Philox, a counter-based generator: block b of
``BLOCK`` samples always uses key ``seed`` and counter word 2 equal to b, so
results do not depend on how blocks are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from . import _quad
from .errors import BadParameter, DegenerateTilt, UnderflowRegime, VacuousBracket
from .spectrum import EigenSpectrum, tail_bounds

BLOCK = 1000
CF_FLOOR = 1e-10
_Z_MARGIN = 3.0


@dataclass(frozen=True)
class OracleEstimate:
    epsilon: float
    estimate: float
    std_error: float
    bracket: tuple[float, float]
    method: str
    terms: int
    samples: int = 0
    seed: int | None = None
    log_estimate: float = math.nan
    rel_std_error: float = 0.0
    # same estimator at another threshold: x -> (estimate, absolute error margin)
    cdf: Callable[[float], tuple[float, float]] | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "method": self.method,
            "estimate": self.estimate,
            "log_estimate": self.log_estimate,
            "std_error": self.std_error,
            "bracket": list(self.bracket),
            "N": self.terms,
            "samples": self.samples,
            "seed": self.seed,
        }


def _check_N(N: int) -> int:
    if int(N) != N or N < 1:
        raise BadParameter(f"N must be a positive integer, got {N}")
    return int(N)


def _head(s: EigenSpectrum, N: int) -> np.ndarray:
    return np.asarray(s.a_sq(np.arange(1, N + 1)), dtype=float)


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def default_terms(s: EigenSpectrum, epsilon: float, rel: float = 1e-6, cap: int = 10**5) -> int:
    """Smallest power of two N with tail_sum <= rel * eps, capped at ``cap``."""
    N = 16
    while N < cap:
        if tail_bounds(s, N, "inv1", 0.0)[1] <= rel * epsilon:
            return N
        N *= 2
    return cap


# tilt


def mu_N(a_sq: np.ndarray, theta: float) -> float:
    return float(np.sum(1.0 / (a_sq + 2.0 * theta)))


def solve_tilt(a_sq: np.ndarray, epsilon: float) -> float:
    """theta >= 0 with mu_N(theta) = eps; 0 when eps >= mu_N(0)."""
    if epsilon <= 0.0:
        raise DegenerateTilt("tilt needs eps > 0")
    if epsilon >= mu_N(a_sq, 0.0):
        return 0.0
    hi = 1.0
    while mu_N(a_sq, hi) > epsilon:
        hi *= 2.0
        if not math.isfinite(hi):
            raise DegenerateTilt(f"cannot bracket the tilt for eps={epsilon}")
    try:
        return optimize.brentq(lambda t: mu_N(a_sq, t) - epsilon, 0.0, hi, xtol=1e-300, rtol=4 * float(np.finfo(float).eps), maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise DegenerateTilt(str(exc)) from exc


def log_mgf_N(a_sq: np.ndarray, theta: float) -> float:
    """log E exp(-theta z_N) = -1/2 sum log(1 + 2 theta/a_i^2)."""
    return -0.5 * float(np.sum(np.log1p(2.0 * theta / a_sq)))


# sampling


def _block_normals(seed: int, block: int, rows: int, N: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, block, 0]))
    return gen.standard_normal((rows, N), dtype=np.float32)


def sample_z(a_sq: np.ndarray, thetas: Sequence[float], samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Common-random-number draws of z_N under each tilt.

    Column k holds sum_i Z_i^2 / (a_i^2 + 2 theta_k) for the same standard
    normals Z, i.e. z_N sampled under the law tilted by theta_k.
    """
    if samples < 1:
        raise BadParameter("samples must be >= 1")
    if not 0 <= seed < 2**64:
        raise BadParameter("seed must be a 64-bit unsigned integer")
    W = 1.0 / (a_sq[:, None] + 2.0 * np.asarray(thetas, dtype=float)[None, :])
    out = np.empty((samples, W.shape[1]))
    n_blocks = -(-samples // BLOCK)

    def run(b: int):
        lo = b * BLOCK
        rows = min(BLOCK, samples - lo)
        Z = _block_normals(seed, b, rows, a_sq.size)
        np.square(Z, out=Z)
        out[lo : lo + rows] = Z.astype(np.float64) @ W

    if workers <= 1:
        for b in range(n_blocks):
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, range(n_blocks)))
    return out


def _plain_from(z: np.ndarray, x: float) -> tuple[float, float]:
    n = z.size
    p = float(np.count_nonzero(z < x)) / n if x > 0.0 else 0.0
    return p, math.sqrt(p * (1.0 - p) / n)


def _vectorize_cdf(scalar_cdf):
    """Lift x -> (estimate, margin) to accept arrays of thresholds."""

    def cdf(x):
        if np.ndim(x) == 0:
            return scalar_cdf(float(x))
        pairs = [scalar_cdf(float(v)) for v in np.ravel(x)]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    return cdf


def _tilted_from(z: np.ndarray, theta: float, log_M: float, x: float) -> tuple[float, float, float]:
    """(log estimate, relative std error, log std error) of P(z_N < x) from tilted draws."""
    n = z.size
    if x <= 0.0:
        return -math.inf, 0.0, -math.inf
    # weight M e^{theta z} 1{z < x}, factored as e^{log_M + theta x} * e^{theta (z - x)}
    e = theta * (z[z < x] - x)
    if e.size == 0:
        return -math.inf, math.inf, -math.inf
    m = float(e.max())
    w = np.exp(e - m)
    s1 = float(np.sum(w)) / n
    s2 = float(np.sum(w * w)) / n
    var = max(s2 - s1 * s1, 0.0) / n
    log_est = log_M + theta * x + m + math.log(s1)
    rel = math.sqrt(var) / s1
    log_se = log_M + theta * x + m + 0.5 * _safe_log(var)
    return log_est, rel, log_se


def _plain_estimate(s, epsilon, N, z, samples, seed, with_bracket=True) -> OracleEstimate:
    p, se = _plain_from(z, epsilon)

    @_vectorize_cdf
    def cdf(x):
        q, e = _plain_from(z, x)
        return q, _Z_MARGIN * e

    est = OracleEstimate(epsilon, p, se, (math.nan, math.nan), "mc-plain", N, samples, seed, _safe_log(p), se / p if p > 0 else math.inf, cdf)
    return _with_bracket(s, est) if with_bracket else est


def _tilted_estimate(s, epsilon, N, z, theta, log_M, samples, seed, with_bracket=True) -> OracleEstimate:
    log_est, rel, log_se = _tilted_from(z, theta, log_M, epsilon)

    @_vectorize_cdf
    def cdf(x):
        le, _, lse = _tilted_from(z, theta, log_M, x)
        return math.exp(le), _Z_MARGIN * math.exp(lse)

    est = OracleEstimate(
        epsilon, math.exp(log_est), math.exp(log_se), (math.nan, math.nan), "mc-tilted", N, samples, seed, log_est, rel, cdf
    )
    return _with_bracket(s, est) if with_bracket else est


def mc_plain_cdf(s: EigenSpectrum, epsilon: float, N: int, samples: int, seed: int, workers: int = 1) -> OracleEstimate:
    N = _check_N(N)
    z = sample_z(_head(s, N), [0.0], samples, seed, workers)[:, 0]
    return _plain_estimate(s, float(epsilon), N, z, samples, seed)


def mc_tilted_cdf(s: EigenSpectrum, epsilon: float, N: int, samples: int, seed: int, workers: int = 1) -> OracleEstimate:
    N = _check_N(N)
    a_sq = _head(s, N)
    theta = solve_tilt(a_sq, float(epsilon))
    z = sample_z(a_sq, [theta], samples, seed, workers)[:, 0]
    return _tilted_estimate(s, float(epsilon), N, z, theta, log_mgf_N(a_sq, theta), samples, seed)


@dataclass
class MonteCarloGrid:
    """One pass of normals shared by plain MC and tilted MC at several eps."""

    plain: dict[float, OracleEstimate]
    tilted: dict[float, OracleEstimate]
    thetas: dict[float, float]


def mc_grid(
    s: EigenSpectrum,
    plain_eps: Sequence[float],
    tilted_eps: Sequence[float],
    N: int,
    samples: int,
    seed: int,
    workers: int = 1,
    with_bracket: bool = True,
) -> MonteCarloGrid:
    N = _check_N(N)
    a_sq = _head(s, N)
    tilted_eps = [float(e) for e in tilted_eps]
    thetas = [solve_tilt(a_sq, e) for e in tilted_eps]
    Z = sample_z(a_sq, [0.0] + thetas, samples, seed, workers)
    plain = {float(e): _plain_estimate(s, float(e), N, Z[:, 0], samples, seed, with_bracket) for e in plain_eps}
    tilted = {}
    for k, (e, th) in enumerate(zip(tilted_eps, thetas)):
        tilted[e] = _tilted_estimate(s, e, N, Z[:, k + 1], th, log_mgf_N(a_sq, th), samples, seed, with_bracket)
    return MonteCarloGrid(plain, tilted, dict(zip(tilted_eps, thetas)))


# characteristic function inversion


def _imhof_tail_bound(lam: np.ndarray, U: float) -> float:
    """Bound on int_U^inf du / (u rho(u)), using rho(u) >= prod_{i<=m} (lam_i u)^(1/2)."""
    lam_sorted = np.sort(lam)[::-1]
    best = math.inf
    cum = 0.0
    logU = math.log(U)
    for m in range(1, min(lam.size, 200) + 1):
        cum += 0.5 * math.log(lam_sorted[m - 1])
        best = min(best, math.log(2.0 / m) - 0.5 * m * logU - cum)
    return math.exp(best)


def _imhof(lam: np.ndarray, xs, quad_tol: float) -> np.ndarray:
    """P(sum lam_i Z_i^2 < x) for each x > 0, by Imhof's formula

        1/2 - (1/pi) int_0^inf sin(phi(u) - x u/2) / (u rho(u)) du,

    phi(u) = 1/2 sum arctan(lam_i u), rho(u) = prod (1 + lam_i^2 u^2)^(1/4).
    phi and rho do not depend on x, so all thresholds share one quadrature.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    half_sum = 0.5 * float(np.sum(lam))
    omegas = 0.5 * xs

    def phi_amp(u):
        phi = 0.5 * float(np.sum(np.arctan(lam * u)))
        amp = math.exp(-0.25 * float(np.sum(np.log1p((lam * u) ** 2)))) / u
        return phi, amp

    def integrand(u):
        if u == 0.0:
            return half_sum - omegas
        phi, amp = phi_amp(u)
        return np.sin(phi - omegas * u) * amp

    budget = math.pi * quad_tol
    long_period = 2.0 * math.pi / float(omegas.min())
    short_period = 2.0 * math.pi / float(omegas.max())
    U = long_period
    U_cap = 64.0 * max(long_period, 1.0 / float(lam.max()))
    while U < U_cap and _imhof_tail_bound(lam, U) > 0.25 * budget:
        U *= 2.0
    tail_small = _imhof_tail_bound(lam, U) <= 0.25 * budget
    n_pieces = min(max(1, int(math.ceil(U / short_period))), 2000)
    edges = np.linspace(0.0, U, n_pieces + 1)
    total = _quad.quad_vec(integrand, 0.0, U, epsabs=0.5 * budget, points=edges[1:-1])
    if not tail_small:
        # sin(phi - w u) = sin(phi) cos(w u) - cos(phi) sin(w u); phi and amp vary slowly
        def f_cos(u):
            phi, amp = phi_amp(u)
            return math.sin(phi) * amp

        def f_sin(u):
            phi, amp = phi_amp(u)
            return -math.cos(phi) * amp

        tol = 0.25 * budget
        for k, w in enumerate(omegas):
            total[k] += _quad.quad(f_cos, U, math.inf, epsabs=tol, weight="cos", wvar=float(w), limlst=200)
            total[k] += _quad.quad(f_sin, U, math.inf, epsabs=tol, weight="sin", wvar=float(w), limlst=200)
    return 0.5 - total / math.pi


def cf_inversion_cdf(s: EigenSpectrum, epsilon: float, N: int, quad_tol: float = 1e-10) -> OracleEstimate:
    N = _check_N(N)
    epsilon = float(epsilon)
    if epsilon < 0.0:
        raise BadParameter("eps must be >= 0")
    a_sq = _head(s, N)
    lam = 1.0 / a_sq
    if epsilon == 0.0:
        return OracleEstimate(0.0, 0.0, 0.0, (0.0, 0.0), "cf-inversion", N, log_estimate=-math.inf)
    # Chernoff bound P(z_N < eps) <= exp(theta eps + log E e^{-theta z_N})
    theta = solve_tilt(a_sq, epsilon)
    chernoff = theta * epsilon + log_mgf_N(a_sq, theta)
    if chernoff < math.log(CF_FLOOR):
        raise UnderflowRegime(f"P(z_N < {epsilon}) <= exp({chernoff:.4g}) is below {CF_FLOOR}; use mc_tilted_cdf")

    def value(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0.0
        if np.any(pos):
            out[pos] = np.clip(_imhof(lam, x[pos], quad_tol), 0.0, 1.0)
        return out

    def cdf(x):
        v = value(x)
        return (float(v), quad_tol) if np.ndim(x) == 0 else (v, np.full(v.shape, quad_tol))

    p = float(value(epsilon))
    if p < CF_FLOOR:
        raise UnderflowRegime(f"estimate {p:.3g} is below {CF_FLOOR}; use mc_tilted_cdf")
    est = OracleEstimate(
        epsilon, p, 0.0, (math.nan, math.nan), "cf-inversion", N, log_estimate=math.log(p), cdf=cdf
    )
    return _with_bracket(s, est, quad_tol)


# truncation bracket


def _remainder_moments(s: EigenSpectrum, N: int) -> tuple[float, float]:
    """Upper bounds on E R_N = sum_{i>N} 1/a_i^2 and Var R_N = 2 sum_{i>N} 1/a_i^4."""
    if s.family == "explicit" and s.tail_model.kind == "none" and N >= s.head_length:
        return 0.0, 0.0
    mean = tail_bounds(s, N, "inv1", 0.0)[1]
    var = 2.0 * tail_bounds(s, N, "inv2", 0.0)[1]
    return mean, var


def _tail_prob_bound(mean: float, var: float, delta: float) -> float:
    """Bound on P(R_N >= delta): the smaller of Markov and Cantelli."""
    b = mean / delta
    if delta > mean:
        b = min(b, var / (var + (delta - mean) ** 2))
    return min(b, 1.0)


def truncation_bracket(s: EigenSpectrum, epsilon: float, N: int, inner: OracleEstimate, n_delta: int = 48) -> tuple[float, float]:
    """Interval containing P(z < eps) built from an estimator of P(z_N < .).

    upper = P(z_N < eps); lower = max over delta of
    P(z_N < eps - delta) * (1 - P(R_N >= delta)), using independence of z_N
    and R_N. Monte Carlo inners widen both ends by 3 standard errors.
    """
    if inner.cdf is None:
        raise BadParameter("inner estimate carries no cdf evaluator")
    epsilon = float(epsilon)
    mean, var = _remainder_moments(s, N)
    if mean >= epsilon:
        raise VacuousBracket(f"E R_N = {mean:.3g} >= eps = {epsilon:.3g}; increase N")
    est, margin = inner.cdf(epsilon)
    upper = min(est + margin, 1.0)
    if mean == 0.0:
        lower = est - margin
        if not lower > 0.0:
            raise VacuousBracket(f"lower bound {lower:.3g} is not positive")
        return lower, upper
    sd = math.sqrt(var)

    def best_on(deltas: np.ndarray) -> tuple[float, int]:
        bnd = np.array([_tail_prob_bound(mean, var, float(d)) for d in deltas])
        q, m = inner.cdf(epsilon - deltas)
        vals = np.where(bnd < 1.0, (np.asarray(q) - np.asarray(m)) * (1.0 - bnd), -np.inf)
        k = int(np.argmax(vals))
        return float(vals[k]), k

    # coarse geometric sweep (plus points just past the mean, where Cantelli
    # is sharp), then a finer sweep between the best coarse neighbours
    grid = np.unique(
        np.concatenate([np.geomspace(mean * 1.000001, epsilon, n_delta, endpoint=False), mean + sd * np.geomspace(1.0, 1e4, 16)])
    )
    grid = grid[grid < epsilon]
    lower, k = best_on(grid)
    lo_d, hi_d = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi_d > lo_d:
        lower = max(lower, best_on(np.geomspace(lo_d, hi_d, 33))[0])
    if not lower > 0.0:
        raise VacuousBracket(f"lower bound {lower:.3g} is not positive; increase N")
    return lower, upper


def _with_bracket(s: EigenSpectrum, est: OracleEstimate, tol: float = 0.0) -> OracleEstimate:
    from dataclasses import replace

    try:
        br = truncation_bracket(s, est.epsilon, est.terms, est)
    except VacuousBracket:
        margin = tol if est.method == "cf-inversion" else _Z_MARGIN * est.std_error
        br = (0.0, min(est.estimate + margin, 1.0))
    return replace(est, bracket=br)


def chi2_cdf(x: float, k: int) -> float:
    """Chi-square CDF, for cross-checks."""
    return float(special.gammainc(0.5 * k, 0.5 * x))
