"""Adaptive quadrature that raises instead of returning silently bad values."""

from __future__ import annotations

import math
import warnings

from scipy import integrate

from .errors import QuadratureFailure

# QUADPACK refuses relative tolerances below 50 machine epsilons
_EPSREL_FLOOR = 1.2e-14


def quad(f, a: float, b: float, epsabs: float = 0.0, epsrel: float = 1e-10, limit: int = 500, **kw) -> float:
    """scipy.integrate.quad, checked: the error estimate must meet the tolerance."""
    epsrel = max(epsrel, _EPSREL_FLOOR)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, **kw)
        except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError) as exc:
            raise QuadratureFailure(f"integrand failed on [{a}, {b}]: {exc}") from exc
    if not math.isfinite(val) or not math.isfinite(err):
        raise QuadratureFailure(f"non-finite quadrature on [{a}, {b}]")
    # allow a small slack over the request; QUADPACK's estimate is pessimistic
    if err > 10.0 * max(epsabs, epsrel * abs(val)):
        raise QuadratureFailure(f"error estimate {err:.3g} exceeds tolerance for value {val:.6g} on [{a}, {b}]")
    return val


def quad_vec(f, a: float, b: float, epsabs: float, points=None, limit: int = 20000):
    """scipy.integrate.quad_vec for an array-valued integrand, checked the same way."""
    import numpy as np

    try:
        val, err = integrate.quad_vec(f, a, b, epsabs=epsabs, epsrel=0.0, norm="max", limit=limit, points=points)
    except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError) as exc:
        raise QuadratureFailure(f"integrand failed on [{a}, {b}]: {exc}") from exc
    val = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(val)) or not math.isfinite(err):
        raise QuadratureFailure(f"non-finite quadrature on [{a}, {b}]")
    if err > 10.0 * epsabs:
        raise QuadratureFailure(f"error estimate {err:.3g} exceeds tolerance {epsabs:.3g} on [{a}, {b}]")
    return val
