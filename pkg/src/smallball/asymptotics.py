"""Small-ball asymptotics: the saddlepoint estimate

    F(eps) ~ exp(-I(theta)) / (sqrt(2 pi) psi(theta)),   mu(theta) = eps,

the two closed-form example families, the exponential-integral
representation C exp(-int_s^1 dt/rho) / rho(s)**2 and the squared-norm to
norm transform of an auxiliary function.

All comparisons are done in log space since F underflows quickly
(about exp(-2467) at eps = 0.005 for a_i = i).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import _quad
from .errors import BadParameter, DomainError, PoorFit
from .inversion import AuxFunction, invert_mu
from .series import eval_I, eval_psi
from .spectrum import EigenSpectrum

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SmallBallEstimate:
    epsilon: float
    theta: float
    I_value: float
    psi_value: float
    value: float
    log_value: float

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "theta": self.theta,
            "I": self.I_value,
            "psi": self.psi_value,
            "value": self.value,
            "log_value": self.log_value,
        }


def dmz_estimate(s: EigenSpectrum, epsilon: float, tol: float | None = None) -> SmallBallEstimate:
    """Saddlepoint estimate of P(z < epsilon); raises OutOfRange unless 0 < eps < mu(0)."""
    sol = invert_mu(s, epsilon, tol)
    I = eval_I(s, sol.theta).value
    psi = eval_psi(s, sol.theta).value
    log_value = -I - math.log(psi) - _HALF_LOG_2PI
    return SmallBallEstimate(float(epsilon), sol.theta, I, psi, math.exp(log_value), log_value)


def dmz_log_function(s: EigenSpectrum) -> Callable[[float], float]:
    """x -> log F_hat(x), with log F_hat = -inf for x <= 0."""

    def log_F(x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return dmz_estimate(s, x).log_value

    return log_F


def csv_rows(estimates: Iterable[SmallBallEstimate]) -> str:
    """CSV text with columns epsilon, theta, I, psi, log_value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "theta", "I", "psi", "log_value"])
    for e in estimates:
        w.writerow([f"{v:.17e}" for v in (e.epsilon, e.theta, e.I_value, e.psi_value, e.log_value)])
    return buf.getvalue()


# closed-form example families


@dataclass(frozen=True)
class ClosedFormFamily:
    """``polynomial``: C1 s^(-1/(2beta-2)) exp(-C2 s^(-1/(beta-1))).
    ``exponential``: sqrt(alpha/(-pi log s)) exp(-(log s)^2/(4 alpha)).
    """

    kind: str
    beta: float | None = None
    alpha: float | None = None
    C1: float = 1.0
    C2: float = 1.0

    def __post_init__(self):
        if self.kind == "polynomial":
            if self.beta is None or not self.beta > 1.0:
                raise BadParameter("polynomial family needs beta > 1")
            if not (self.C1 > 0.0 and self.C2 > 0.0):
                raise BadParameter("C1 and C2 must be positive")
        elif self.kind == "exponential":
            if self.alpha is None or not self.alpha > 0.0:
                raise BadParameter("exponential family needs alpha > 0")
        else:
            raise BadParameter(f"unknown closed-form kind {self.kind!r}")


def closed_form_log(f: ClosedFormFamily, s: float) -> float:
    s = float(s)
    if not s > 0.0:
        raise DomainError("closed forms are defined for s > 0")
    if f.kind == "polynomial":
        b = f.beta
        return math.log(f.C1) - math.log(s) / (2.0 * b - 2.0) - f.C2 * s ** (-1.0 / (b - 1.0))
    if s >= 1.0:
        raise DomainError("exponential closed form needs s < 1")
    ls = math.log(s)
    return 0.5 * math.log(f.alpha / (-math.pi * ls)) - ls * ls / (4.0 * f.alpha)


def closed_form_eval(f: ClosedFormFamily, s: float) -> float:
    return math.exp(closed_form_log(f, s))


@dataclass(frozen=True)
class PolyCalibration:
    """Fit log F = log C1 + exponent log s - C2 s^(-1/(beta-1)).

    ``residual`` is the root-mean-square misfit in log space.
    """

    C1: float
    C2: float
    exponent: float
    residual: float

    def family(self, beta: float) -> ClosedFormFamily:
        return ClosedFormFamily("polynomial", beta=beta, C1=self.C1, C2=self.C2)


DEFAULT_CALIBRATION_GRID = tuple(np.geomspace(1e-3, 1e-4, 9))


def calibrate_poly_constants(
    s: EigenSpectrum, eps_grid=DEFAULT_CALIBRATION_GRID, max_residual: float = 1e-3
) -> PolyCalibration:
    """Least-squares fit of log dmz_estimate on {1, log s, -s^(-1/(beta-1))}."""
    if s.family != "polynomial":
        raise BadParameter("calibration needs a polynomial spectrum")
    eps = np.asarray(sorted(set(float(e) for e in eps_grid)), dtype=float)
    if eps.size < 3:
        raise PoorFit(f"need at least 3 grid points for 3 constants, got {eps.size}")
    y = np.array([dmz_estimate(s, e).log_value for e in eps])
    A = np.column_stack([np.ones_like(eps), np.log(eps), -(eps ** (-1.0 / (s.beta - 1.0)))])
    # scale columns so the huge exponential regressor does not swamp the rest
    scale = np.abs(A).max(axis=0)
    coef, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
    coef = coef / scale
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    logC1, q, C2 = (float(c) for c in coef)
    if not resid <= max_residual:
        raise PoorFit(f"rms residual {resid:.3g} above {max_residual:.3g}; grid not asymptotic")
    if not C2 > 0.0:
        raise PoorFit(f"fitted C2 = {C2:.6g} is not positive")
    return PolyCalibration(math.exp(logC1), C2, q, resid)


# representation integral


def log_integral_inv_rho(rho: Callable[[float], float], s: float, upper: float = 1.0, epsrel: float = 1e-10) -> float:
    """int_s^upper dt / rho(t), integrated in u = log t."""
    if s == upper:
        return 0.0

    def integrand(u):
        t = math.exp(u)
        r = rho(t)
        if not r > 0.0:
            raise DomainError(f"rho({t}) = {r} is not positive")
        return t / r

    a, b = math.log(s), math.log(upper)
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    return sign * _quad.quad(integrand, a, b, epsrel=epsrel)


def _check_rep_args(rho: AuxFunction | Callable, s: float, upper: float):
    s = float(s)
    if not 0.0 < s <= upper:
        raise DomainError(f"need 0 < s <= {upper}, got {s}")
    s_max = getattr(rho, "s_max", math.inf)
    if upper > s_max:
        raise DomainError(f"rho is only evaluable below {s_max:.12g}")
    return s


def representation_log(rho: AuxFunction | Callable, s: float, C: float = 1.0, upper: float = 1.0) -> float:
    """log of C exp(-int_s^upper dt/rho) / rho(s)**2."""
    s = _check_rep_args(rho, s, upper)
    if not C > 0.0:
        raise DomainError("C must be positive")
    r = rho(s)
    if not r > 0.0:
        raise DomainError(f"rho({s}) = {r} is not positive")
    return math.log(C) - log_integral_inv_rho(rho, s, upper) - 2.0 * math.log(r)


def representation_eval(rho: AuxFunction | Callable, s: float, C: float = 1.0, upper: float = 1.0) -> float:
    return math.exp(representation_log(rho, s, C, upper))


def calibrate_representation_constant(
    rho: AuxFunction | Callable, log_F: Callable[[float], float], s0: float, upper: float = 1.0
) -> float:
    """The C making the representation equal F at the anchor s0."""
    return math.exp(log_F(s0) - representation_log(rho, s0, 1.0, upper))


# squared norm to norm


def norm_transform(rho_F: AuxFunction) -> AuxFunction:
    """Auxiliary function of G(s) = F(s**2): rho_G(s) = rho_F(s**2) / (2 s)."""
    s_max_F = getattr(rho_F, "s_max", math.inf)

    def rho_G(s: float) -> float:
        if not s > 0.0:
            raise DomainError("rho_G is defined for s > 0")
        t = s * s
        if t > s_max_F:
            raise DomainError(f"s**2 = {t} lies outside the domain of rho_F")
        return rho_F(t) / (2.0 * s)

    provenance = getattr(rho_F, "provenance", "closed-form")
    label = getattr(rho_F, "label", "")
    return AuxFunction(rho_G, provenance, math.sqrt(s_max_F), f"norm({label})" if label else "norm")
