"""Saddlepoint theta(eps) = mu^{-1}(eps), the auxiliary function rho = 1/mu^{-1},
and phi(t) = t mu(t) with its generalized inverse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import NoConvergence, OutOfRange
from .series import eval_mu
from .spectrum import EigenSpectrum, TruncationPolicy

_MAX_DOUBLINGS = 2000
_S_MAX_SHRINK = 1e-9
_RTOL = 4 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class ThetaSolution:
    epsilon: float
    theta: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class AuxFunction:
    """A positive, non-decreasing auxiliary function on (0, s_max).

    ``provenance`` is one of ``inverted-mu``, ``closed-form`` or
    ``estimated-from-F``.
    """

    evaluator: Callable[[float], float]
    provenance: str
    s_max: float = math.inf
    label: str = ""

    def __call__(self, s: float) -> float:
        return self.evaluator(s)


def mu_at_zero(s: EigenSpectrum) -> float:
    return eval_mu(s, 0.0).value


def invert_mu(s: EigenSpectrum, epsilon: float, tol: float | None = None) -> ThetaSolution:
    """Solve mu(theta) = epsilon by bracketing then Brent's method.

    ``tol`` bounds the residual |mu(theta) - epsilon|; default 1e-10 * epsilon.
    """
    epsilon = float(epsilon)
    mu0 = mu_at_zero(s)
    if not 0.0 < epsilon < mu0:
        raise OutOfRange(f"epsilon must lie in (0, mu(0) = {mu0:.12g}), got {epsilon}")
    if tol is None:
        tol = 1e-10 * epsilon
    policy = TruncationPolicy(tail_tolerance=tol / 10.0, relative=False)

    def f(theta):
        return eval_mu(s, theta, policy).value - epsilon

    lo, hi = 0.0, 1.0
    for _ in range(_MAX_DOUBLINGS):
        if f(hi) < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoConvergence(f"could not bracket theta for epsilon={epsilon}")
    try:
        theta, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=_RTOL, maxiter=500, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise NoConvergence(str(exc)) from exc
    residual = abs(f(theta))
    if residual > tol:
        raise NoConvergence(f"residual {residual:.3g} exceeds tol {tol:.3g} at theta={theta:.17g}")
    return ThetaSolution(epsilon, theta, residual, info.iterations)


def s_max(s: EigenSpectrum) -> float:
    return mu_at_zero(s) * (1.0 - _S_MAX_SHRINK)


def eval_rho(s: EigenSpectrum, x: float) -> float:
    """rho(x) = 1/mu^{-1}(x)."""
    if x > s_max(s):
        raise OutOfRange(f"rho is only defined below s_max = {s_max(s):.12g}")
    return 1.0 / invert_mu(s, x).theta


def rho_function(s: EigenSpectrum) -> AuxFunction:
    return AuxFunction(lambda x: eval_rho(s, x), "inverted-mu", s_max(s), "1/mu^-1")


def eval_phi(s: EigenSpectrum, t: float) -> float:
    if t < 0.0:
        raise OutOfRange("phi is defined for t >= 0")
    return 0.0 if t == 0.0 else t * eval_mu(s, t).value


def invert_phi_fn(phi: Callable[[float], float], y: float, tol: float = 1e-12) -> float:
    """Generalized inverse inf{t >= 0 : phi(t) >= y} of a non-decreasing phi with phi(0) = 0."""
    if y < 0.0:
        raise OutOfRange("phi takes non-negative values")
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(_MAX_DOUBLINGS):
        if phi(hi) >= y:
            break
        lo, hi = hi, 2.0 * hi
        if math.isinf(hi):
            break
    else:
        hi = math.inf
    if math.isinf(hi):
        raise OutOfRange(f"{y} exceeds the supremum of phi")
    return optimize.brentq(lambda t: phi(t) - y, lo, hi, xtol=1e-300, rtol=max(tol, _RTOL), maxiter=500)


def invert_phi(s: EigenSpectrum, y: float, tol: float = 1e-12) -> float:
    return invert_phi_fn(lambda t: eval_phi(s, t), y, tol)
