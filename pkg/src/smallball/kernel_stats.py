"""Kernel-smoothed small-ball expectation

    E K(||X||/h) = F(h) K(1) - int_0^1 K'(s) F(h s) ds

and its limit K(1) - int_0^1 s^d K'(s) ds when F is regularly varying with
index d. F enters through log F; the integral is taken as a ratio to F(h).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate

from . import _quad
from .errors import BadParameter, QuadratureFailure

_UNDERFLOW_LOG = -745.0
_FIRST_PIECE = 2.0**-24


@dataclass(frozen=True)
class KernelSpec:
    name: str
    K: Callable[[float], float] = field(repr=False)
    K_prime: Callable[[float], float] = field(repr=False)
    K_at_1: float
    breakpoints: tuple[float, ...] = ()

    def sup(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return max(float(self.K(float(t))) for t in np.concatenate([grid, self.breakpoints]))

    def inf(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return min(float(self.K(float(t))) for t in np.concatenate([grid, self.breakpoints]))


def _validate(spec: KernelSpec) -> KernelSpec:
    pts = sorted(set((0.0, 1.0) + tuple(spec.breakpoints)))
    mass = sum(_quad.quad(spec.K, a, b, epsabs=1e-13, epsrel=1e-13) for a, b in zip(pts[:-1], pts[1:]))
    if abs(mass - 1.0) > 1e-8:
        raise BadParameter(f"kernel {spec.name} integrates to {mass:.12g}, not 1")
    if spec.inf() < 0.0:
        raise BadParameter(f"kernel {spec.name} takes negative values")
    if spec.K_at_1 == 0.0:
        warnings.warn(f"kernel {spec.name} has K(1) = 0: the leading term vanishes", stacklevel=3)
    return spec


def uniform() -> KernelSpec:
    return _validate(KernelSpec("uniform", lambda s: 1.0, lambda s: 0.0, 1.0))


def truncated_linear(a: float, b: float) -> KernelSpec:
    """K(s) = max(a + b s, 0) on [0, 1]."""
    a, b = float(a), float(b)
    bps: tuple[float, ...] = ()
    if b != 0.0 and 0.0 < -a / b < 1.0:
        bps = (-a / b,)

    def K(s):
        return max(a + b * s, 0.0)

    def K_prime(s):
        return b if a + b * s > 0.0 else 0.0

    return _validate(KernelSpec(f"truncated-linear({a:g},{b:g})", K, K_prime, K(1.0), bps))


def tabulated(s_values, k_values) -> KernelSpec:
    """Shape-preserving (PCHIP) interpolation of a kernel table on [0, 1]."""
    s_arr = np.asarray(s_values, dtype=float)
    k_arr = np.asarray(k_values, dtype=float)
    if s_arr.ndim != 1 or s_arr.size < 2 or s_arr.size != k_arr.size:
        raise BadParameter("kernel table needs matching 1-d arrays with at least 2 points")
    if s_arr[0] != 0.0 or s_arr[-1] != 1.0 or np.any(np.diff(s_arr) <= 0.0):
        raise BadParameter("kernel table grid must increase from 0 to 1")
    if np.any(k_arr < 0.0):
        raise BadParameter("kernel table has negative values")
    pchip = interpolate.PchipInterpolator(s_arr, k_arr)
    deriv = pchip.derivative()
    return _validate(
        KernelSpec("tabulated", lambda s: float(pchip(s)), lambda s: float(deriv(s)), float(k_arr[-1]), tuple(s_arr[1:-1]))
    )


def build_kernel(desc: dict) -> KernelSpec:
    fam = desc.get("family")
    if fam == "uniform":
        return uniform()
    if fam == "truncated-linear":
        return truncated_linear(desc["a"], desc["b"])
    if fam == "tabulated":
        return tabulated(desc["s"], desc["k"])
    raise BadParameter(f"unknown kernel family {fam!r}")


def _pieces_towards(lo: float, hi: float, breakpoints) -> list[tuple[float, float]]:
    """Partition [lo, hi] into pieces whose widths double away from hi."""
    edges = [hi]
    w = _FIRST_PIECE
    while edges[-1] > lo:
        edges.append(max(hi - w, lo))
        w *= 2.0
    edges = sorted(set(edges) | {b for b in breakpoints if lo < b < hi})
    return list(zip(edges[:-1], edges[1:]))


def kernel_ratio(log_F: Callable[[float], float], K: KernelSpec, h: float, quad_tol: float = 1e-10) -> float:
    """E K(||X||/h) / F(h) = K(1) - int_0^1 K'(s) F(h s)/F(h) ds."""
    h = float(h)
    if not h > 0.0:
        raise BadParameter("h must be positive")
    lFh = log_F(h)
    if not math.isfinite(lFh):
        raise QuadratureFailure(f"log F({h}) is not finite")

    def log_ratio(s):
        return log_F(h * s) - lFh if s > 0.0 else -math.inf

    # below s_cut the ratio F(hs)/F(h) underflows; F is monotone, so halve
    # from s = 1 until it does, then bisect
    s_cut = 0.0
    probe = 0.5
    while probe > 1e-300:
        if log_ratio(probe) < _UNDERFLOW_LOG:
            lo, hi = probe, 2.0 * probe
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if log_ratio(mid) < _UNDERFLOW_LOG:
                    lo = mid
                else:
                    hi = mid
            s_cut = lo
            break
        probe *= 0.5

    def integrand(s):
        d = log_ratio(s)
        return K.K_prime(s) * math.exp(d) if d > _UNDERFLOW_LOG else 0.0

    total = 0.0
    for a, b in _pieces_towards(s_cut, 1.0, K.breakpoints):
        total += _quad.quad(integrand, a, b, epsabs=1e-3 * quad_tol * max(abs(total), 1e-300), epsrel=quad_tol)
    return K.K_at_1 - total


def kernel_expectation(log_F: Callable[[float], float], K: KernelSpec, h: float, quad_tol: float = 1e-10) -> float:
    return math.exp(log_F(h)) * kernel_ratio(log_F, K, h, quad_tol)


def regular_variation_limit(K: KernelSpec, d: float, quad_tol: float = 1e-10) -> float:
    """K(1) - int_0^1 s^d K'(s) ds, the limit of E K(||X||/h)/F(h) when F(h) ~ C h^d."""
    if d < 0.0:
        raise BadParameter("d must be >= 0")
    pts = sorted({0.0, 1.0, *K.breakpoints})
    total = sum(
        _quad.quad(lambda s: s**d * K.K_prime(s), a, b, epsabs=1e-3 * quad_tol, epsrel=quad_tol) for a, b in zip(pts[:-1], pts[1:])
    )
    return K.K_at_1 - total
