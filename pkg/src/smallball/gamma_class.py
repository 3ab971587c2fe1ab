"""Numerical checks and constructions for the class Gamma_0.

F is in Gamma_0 with auxiliary function rho when F(s + x rho(s))/F(s) -> e^x
as s -> 0. Every F enters through its logarithm: members underflow long
before the asymptotic regime is reached.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import _quad
from .errors import (
    DomainError,
    LeavesDomain,
    NonPositivePhi,
    NonSummable,
    NotRegularlyVarying,
    QuadratureFailure,
    SmallBallError,
)
from .spectrum import EigenSpectrum, TailModel, explicit, tail_sum_bounds

LogF = Callable[[float], float]
Rho = Callable[[float], float]

DEFAULT_THRESHOLD = 0.05


@dataclass
class GammaCheckReport:
    kind: str
    s_grid: list[float]
    x_grid: list[float]
    ratios: list[list[float]]
    targets: list[float]
    max_rel_error: list[float]
    verdict: str
    threshold: float = DEFAULT_THRESHOLD

    def to_dict(self) -> dict:
        return asdict(self)


def _verdict(errors: Sequence[float], threshold: float) -> str:
    """pass: final <= threshold and strictly improving over the last three points."""
    e = list(errors)
    tail = e[-3:]
    improving = len(tail) >= 2 and all(b < a for a, b in zip(tail, tail[1:]))
    below = e[-1] <= threshold
    if below and improving:
        return "pass"
    if below or improving:
        return "inconclusive"
    return "fail"


def _sorted_grid(s_grid) -> list[float]:
    s = sorted((float(v) for v in s_grid), reverse=True)
    if not s or s[-1] <= 0.0:
        raise DomainError("s grid must be non-empty and positive")
    return s


def gamma_membership_check(
    log_F: LogF, rho: Rho, s_grid, x_grid, threshold: float = DEFAULT_THRESHOLD
) -> GammaCheckReport:
    """Compare F(s + x rho(s))/F(s) with e^x along a decreasing s grid."""
    s_vals = _sorted_grid(s_grid)
    xs = [float(x) for x in x_grid]
    ratios, errs = [], []
    for s in s_vals:
        r = rho(s)
        if not r > 0.0:
            raise DomainError(f"rho({s}) = {r} is not positive")
        lF = log_F(s)
        if not math.isfinite(lF):
            raise DomainError(f"log F({s}) is not finite")
        row, worst = [], 0.0
        for x in xs:
            if x == 0.0:
                row.append(1.0)
                continue
            t = s + x * r
            if t <= 0.0:
                # F is null on (-inf, 0]
                row.append(0.0)
                worst = max(worst, 1.0)
                continue
            d = log_F(t) - lF
            row.append(math.exp(d))
            worst = max(worst, abs(math.expm1(d - x)))
        ratios.append(row)
        errs.append(worst)
    return GammaCheckReport("membership", s_vals, xs, ratios, [math.exp(x) for x in xs], errs, _verdict(errs, threshold), threshold)


def self_neglect_check(rho: Rho, s_grid, x_grid, threshold: float = DEFAULT_THRESHOLD) -> GammaCheckReport:
    """Compare rho(s + x rho(s))/rho(s) with 1 along a decreasing s grid."""
    s_vals = _sorted_grid(s_grid)
    xs = [float(x) for x in x_grid]
    ratios, errs = [], []
    for s in s_vals:
        r = rho(s)
        if not r > 0.0:
            raise DomainError(f"rho({s}) = {r} is not positive")
        row, worst = [], 0.0
        for x in xs:
            if x == 0.0:
                row.append(1.0)
                continue
            t = s + x * r
            if t <= 0.0:
                raise DomainError(f"s + x rho(s) = {t} leaves (0, inf) at s={s}, x={x}")
            q = rho(t) / r
            row.append(q)
            worst = max(worst, abs(q - 1.0))
        ratios.append(row)
        errs.append(worst)
    return GammaCheckReport("self-neglect", s_vals, xs, ratios, [1.0] * len(xs), errs, _verdict(errs, threshold), threshold)


# auxiliary function estimate

_FIRST_PIECE = 2.0**-40


def estimate_aux(log_F: LogF, s: float, quad_tol: float = 1e-10) -> float:
    """int_0^s F(t) dt / F(s).

    F is non-decreasing, so the mass sits just below s. The integral is taken
    over pieces [s - 2w, s - w] with w doubling from 2^-40 s; once the
    monotone bound t F(t)/F(s) on what is left falls under the tolerance the
    sum stops.
    """
    s = float(s)
    if not s > 0.0:
        raise QuadratureFailure("s must be positive")
    try:
        lFs = log_F(s)
    except (SmallBallError, ValueError, ArithmeticError) as exc:
        raise QuadratureFailure(f"F cannot be evaluated at s={s}: {exc}") from exc
    if not math.isfinite(lFs):
        raise QuadratureFailure(f"log F({s}) = {lFs} is not finite")

    def g(t):
        if t <= 0.0:
            return 0.0
        return math.exp(min(log_F(t) - lFs, 0.0))

    total = 0.0
    right, w = s, _FIRST_PIECE * s
    try:
        while right > 0.0:
            left = max(s - w, 0.0)
            total += _quad.quad(g, left, right, epsabs=0.0, epsrel=0.1 * quad_tol)
            if left == 0.0:
                break
            if left * g(left) <= 0.1 * quad_tol * total:
                break
            right, w = left, 2.0 * w
    except (SmallBallError, ValueError, ArithmeticError) as exc:
        if isinstance(exc, QuadratureFailure):
            raise
        raise QuadratureFailure(f"F failed inside the quadrature: {exc}") from exc
    return total


# flatness


@dataclass
class FlatnessReport:
    s_grid: list[float]
    orders: list[int]
    log_ratios: list[list[float]]
    decreasing: list[bool]

    def ratio(self, p: int, k: int) -> float:
        return math.exp(self.log_ratios[self.orders.index(p)][k])

    def to_dict(self) -> dict:
        return asdict(self)


def flatness_probe(log_F: LogF, p_max: int, s_grid) -> FlatnessReport:
    """log(F(s)/s^p) for p = 0..p_max along a decreasing s grid."""
    s_vals = _sorted_grid(s_grid)
    lF = [log_F(s) for s in s_vals]
    orders = list(range(int(p_max) + 1))
    rows, dec = [], []
    for p in orders:
        row = [f - p * math.log(s) for f, s in zip(lF, s_vals)]
        rows.append(row)
        dec.append(all(b < a for a, b in zip(row, row[1:])))
    return FlatnessReport(s_vals, orders, rows, dec)


# converse construction


@dataclass
class RegularVariationProbe:
    s_points: list[float]
    slopes: list[float]
    stable: bool
    vanishing: bool


def probe_regular_variation(rho: Rho, s_top: float, decades: int = 2, tol: float = 1e-2) -> RegularVariationProbe:
    """Log-log slopes of rho over consecutive decades below s_top."""
    pts = [s_top * 10.0 ** (-k) for k in range(decades + 1)]
    logs = [math.log(rho(s)) for s in pts]
    slopes = [(a - b) / math.log(10.0) for a, b in zip(logs, logs[1:])]
    stable = max(slopes) - min(slopes) <= tol
    # rho(s)/s strictly decreasing as s decreases
    over_s = [lr - math.log(s) for lr, s in zip(logs, pts)]
    vanishing = all(b < a - tol * math.log(10.0) for a, b in zip(over_s, over_s[1:]))
    return RegularVariationProbe(pts, slopes, stable, vanishing)


def reconstruct_spectrum(rho: Rho, C: float, i_max: int, probe_top: float | None = None) -> EigenSpectrum:
    """Spectrum a_i^2 = C phi^{-1}(i) with phi(t) = t mu(t), mu = (1/rho)^{-1}.

    phi(t) = i means m = mu(t) satisfies rho(m) = 1/t = m/i, so each term is
    one root of rho(m)/m = 1/i followed by phi^{-1}(i) = i/m.
    """
    if not C > 0.0:
        raise DomainError("C must be positive")
    if i_max < 2:
        raise DomainError("i_max must be >= 2")
    s_max = getattr(rho, "s_max", math.inf)
    top = probe_top if probe_top is not None else min(1e-2, 0.5 * s_max)
    pr = probe_regular_variation(rho, top)
    if not (pr.stable and pr.vanishing):
        raise NotRegularlyVarying(f"rho fails the regular-variation probe (slopes {pr.slopes}, rho(s)/s -> 0: {pr.vanishing})")

    def log_ratio(log_m):
        m = math.exp(log_m)
        return math.log(rho(m)) - log_m

    hi_cap = math.log(s_max * (1.0 - 1e-12)) if math.isfinite(s_max) else 700.0
    vals = np.empty(i_max)
    hi = math.log(top)
    for i in range(1, i_max + 1):
        target = -math.log(i)
        # ratio is increasing in m: bracket then solve
        lo = hi
        while log_ratio(lo) > target:
            lo -= 1.0
        while log_ratio(hi) < target:
            if hi >= hi_cap:
                raise DomainError(f"rho(m)/m never reaches 1/{i} inside the domain of rho")
            hi = min(hi + 1.0, hi_cap)
        log_m = optimize.brentq(lambda u: log_ratio(u) - target, lo, hi, xtol=1e-15, rtol=4e-16 * 4)
        vals[i - 1] = C * i / math.exp(log_m)
        hi = log_m
    # power tail from the last decade
    idx = np.arange(max(1, i_max // 10), i_max + 1)
    p = float(np.polyfit(np.log(idx), np.log(vals[idx - 1]), 1)[0])
    if not p > 1.0:
        raise NonSummable(f"fitted tail exponent {p:.4g} <= 1: sum 1/a_i^2 diverges")
    spec = explicit(np.sqrt(vals), TailModel("power", exponent=p), description=f"reconstructed, C={C}")
    if not math.isfinite(tail_sum_bounds(spec, 1)[1]):
        raise NonSummable("reconstructed spectrum is not summable")
    return spec


# rho-self-neglecting representation


def step_sequence(rho: Rho, x0: float, n_max: int = 1000, floor: float = 1e-300) -> np.ndarray:
    """x_n = x_{n-1} - rho(x_{n-1}) from x0, stopping at n_max or below ``floor``."""
    xs = [float(x0)]
    if not xs[0] > 0.0:
        raise LeavesDomain("x0 must be positive")
    for n in range(1, n_max + 1):
        x = xs[-1]
        r = rho(x)
        if not r > 0.0:
            raise DomainError(f"rho({x}) = {r} is not positive")
        nxt = x - r
        if nxt <= 0.0:
            raise LeavesDomain(f"x_{n} = {nxt:.6g} <= 0: x0 = {x0} is too large")
        xs.append(nxt)
        if nxt < floor:
            break
    return np.array(xs)


def _bump_unnormalized(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    return math.exp(-1.0 / (t * (1.0 - t)))


_BUMP_MASS = _quad.quad(_bump_unnormalized, 0.0, 1.0, epsabs=0.0, epsrel=1e-14)


def bump_density(t: float) -> float:
    """C-infinity density on [0, 1] proportional to exp(-1/(t(1-t)))."""
    return _bump_unnormalized(t) / _BUMP_MASS


@dataclass
class SelfNeglectRepr:
    """phi(x) = c(x) exp(int_x^1 eps(u)/rho(u) du) built on the step sequence.

    Slopes ``slopes[0]`` belongs to [x_0, 1]; ``slopes[n+1]`` to [x_{n+1}, x_n].
    c(x_n) = 1 at every grid point, so ``c_value`` is 1.
    """

    grid_points: np.ndarray
    slopes: np.ndarray
    epsilon_values: list[float]
    c_value: float
    density: Callable[[float], float] = field(repr=False)
    rho: Rho = field(repr=False)
    log_phi_grid: np.ndarray = field(repr=False, default=None)
    rho_check: str = "unchecked"

    def _interval(self, u: float) -> tuple[float, float, float]:
        x = self.grid_points
        if u > x[0]:
            return 1.0, float(x[0]), float(self.slopes[0])
        # x is decreasing: find n with x[n+1] <= u <= x[n]
        n = int(np.searchsorted(-x, -u, side="right")) - 1
        n = min(max(n, 0), x.size - 2)
        return float(x[n]), float(x[n + 1]), float(self.slopes[n + 1])

    def epsilon(self, u: float) -> float:
        if not self.grid_points[-1] <= u <= 1.0:
            raise DomainError(f"u = {u} outside [x_n, 1]")
        top, bottom, slope = self._interval(u)
        return slope * self.density((top - u) / (top - bottom)) * self.rho(u)

    def log_integral(self, k: int) -> float:
        """int_{x_k}^1 eps/rho by quadrature, interval by interval."""
        x = self.grid_points
        edges = [1.0] + [float(v) for v in x[: k + 1]]
        total = 0.0
        for top, bottom in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (top + bottom)
            total += _quad.quad(lambda u: self.epsilon(min(max(u, bottom), top)) / self.rho(u), bottom, top, epsabs=1e-14, epsrel=1e-13, points=[mid])
        return total

    def identity_errors(self) -> np.ndarray:
        """|exp(int_{x_n}^1 eps/rho) / phi(x_n) - 1| at every grid point."""
        x = self.grid_points
        out = np.empty(x.size)
        acc = 0.0
        edges = [1.0] + [float(v) for v in x]
        for k, (top, bottom) in enumerate(zip(edges[:-1], edges[1:])):
            acc += _quad.quad(
                lambda u, t=top, b=bottom: self.epsilon(min(max(u, b), t)) / self.rho(u), bottom, top, epsabs=1e-15, epsrel=1e-14
            )
            out[k] = abs(math.expm1(acc - self.log_phi_grid[k]))
        return out


def build_self_neglect_repr(
    phi: Callable[[float], float],
    rho: Rho,
    x0: float,
    density: Callable[[float], float] = bump_density,
    n_max: int = 60,
    samples_per_interval: int = 401,
) -> SelfNeglectRepr:
    """Piecewise construction of eps so that the representation is exact on the grid."""
    if not 0.0 < x0 < 1.0:
        raise DomainError("x0 must lie in (0, 1)")
    xs = step_sequence(rho, x0, n_max)
    phis = np.array([phi(float(x)) for x in xs])
    if np.any(~(phis > 0.0)):
        bad = float(xs[np.argmax(~(phis > 0.0))])
        raise NonPositivePhi(f"phi({bad}) is not positive")
    log_phi = np.log(phis)
    slopes = np.empty(xs.size)
    slopes[0] = log_phi[0] / (1.0 - xs[0])
    slopes[1:] = (log_phi[1:] - log_phi[:-1]) / (xs[:-1] - xs[1:])
    try:
        chk = self_neglect_check(rho, xs[-3:], [-0.5, 0.5]).verdict
    except DomainError:
        chk = "fail"
    rep = SelfNeglectRepr(xs, slopes, [], 1.0, density, rho, log_phi, chk)
    t = np.linspace(0.0, 1.0, samples_per_interval)
    maxima = []
    for n in range(xs.size - 1):
        top, bottom = float(xs[n]), float(xs[n + 1])
        us = top - t * (top - bottom)
        maxima.append(max(abs(rep.epsilon(float(u))) for u in us))
    rep.epsilon_values = maxima
    return rep
