"""Eigenvalue sequences (a_i) of the Gaussian element X = sum_i x_i e_i / a_i.

A spectrum is immutable. Every other module reads a_i**2 through
:meth:`EigenSpectrum.a_sq` and uses :meth:`EigenSpectrum.tail` to learn the
analytic shape of the sequence beyond its explicitly stored head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _tails
from .errors import BadParameter, NonSummable, NoTailModel, NotMonotone

_ROUND_SLACK = 1e-14


@dataclass(frozen=True)
class TailModel:
    """Continuation of an explicit list beyond its last value a_L.

    ``geometric(ratio)``: 1/a_{i+1}**2 = ratio / a_i**2, ratio in (0, 1).
    ``power(exponent)``: a_i**2 = a_L**2 (i/L)**exponent, exponent > 1.
    """

    kind: str = "none"
    ratio: float | None = None
    exponent: float | None = None

    def __post_init__(self):
        if self.kind == "none":
            return
        if self.kind == "geometric":
            if self.ratio is None or not 0.0 < self.ratio < 1.0:
                raise NonSummable(f"geometric tail ratio must lie in (0, 1), got {self.ratio}")
        elif self.kind == "power":
            if self.exponent is None or not math.isfinite(self.exponent):
                raise BadParameter("power tail needs a finite exponent")
            if self.exponent <= 1.0:
                raise NonSummable(f"power tail exponent must exceed 1, got {self.exponent}")
        else:
            raise BadParameter(f"unknown tail kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "geometric":
            d["ratio"] = self.ratio
        elif self.kind == "power":
            d["exponent"] = self.exponent
        return d


@dataclass(frozen=True)
class TruncationPolicy:
    """Budget for series evaluation.

    With ``relative=True`` the absolute error budget is
    ``tail_tolerance * max(1, |value|)``.
    """

    max_terms: int = 10**7
    tail_tolerance: float = 1e-12
    relative: bool = True

    def __post_init__(self):
        if self.max_terms < 1:
            raise BadParameter("max_terms must be >= 1")
        if not self.tail_tolerance > 0.0:
            raise BadParameter("tail_tolerance must be > 0")

    def budget(self, value: float) -> float:
        if self.relative:
            return self.tail_tolerance * max(1.0, abs(value))
        return self.tail_tolerance


@dataclass(frozen=True)
class PowerTail:
    """a_x**2 = A x**p for real x >= start."""

    start: int
    A: float
    p: float


@dataclass(frozen=True)
class GeometricTail:
    """a_i**2 = exp(log_B + i * log_q) for integers i >= start, log_q > 0."""

    start: int
    log_B: float
    log_q: float


@dataclass(frozen=True)
class EigenSpectrum:
    family: str
    beta: float | None = None
    alpha: float | None = None
    values: tuple[float, ...] = ()
    tail_model: TailModel = field(default_factory=TailModel)
    description: str = ""

    def a(self, i):
        return np.sqrt(self.a_sq(i))

    def a_sq(self, i):
        """a_i**2 for integer index (or array of indices) i >= 1."""
        idx = np.asarray(i)
        if np.any(idx < 1):
            raise BadParameter("indices start at 1")
        x = idx.astype(float)
        if self.family == "polynomial":
            out = x**self.beta
        elif self.family == "exponential":
            with np.errstate(over="ignore"):
                out = np.exp(2.0 * self.alpha * x)
        else:
            out = self._explicit_a_sq(idx)
        return out if np.ndim(i) else float(out)

    def _explicit_a_sq(self, idx):
        L = len(self.values)
        head = np.asarray(self.values, dtype=float) ** 2
        idx = np.atleast_1d(idx)
        out = np.empty(idx.shape, dtype=float)
        inside = idx <= L
        out[inside] = head[idx[inside] - 1]
        if np.any(~inside):
            tail = self.tail()
            beyond = idx[~inside].astype(float)
            if isinstance(tail, PowerTail):
                out[~inside] = tail.A * beyond**tail.p
            else:
                with np.errstate(over="ignore"):
                    out[~inside] = np.exp(tail.log_B + beyond * tail.log_q)
        return out

    @property
    def head_length(self) -> int:
        """Number of leading terms not covered by the analytic tail (>= 1)."""
        return len(self.values) if self.family == "explicit" else 1

    def tail(self) -> PowerTail | GeometricTail:
        if self.family == "polynomial":
            return PowerTail(1, 1.0, self.beta)
        if self.family == "exponential":
            return GeometricTail(1, 0.0, 2.0 * self.alpha)
        L = len(self.values)
        last_sq = self.values[-1] ** 2
        if self.tail_model.kind == "power":
            p = self.tail_model.exponent
            return PowerTail(L, last_sq / L**p, p)
        if self.tail_model.kind == "geometric":
            log_q = -math.log(self.tail_model.ratio)
            return GeometricTail(L, math.log(last_sq) - L * log_q, log_q)
        raise NoTailModel("explicit spectrum without a tail model has no infinite extension")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family}
        if self.family == "polynomial":
            d["beta"] = self.beta
        elif self.family == "exponential":
            d["alpha"] = self.alpha
        else:
            d["values"] = list(self.values)
            d["tail"] = self.tail_model.to_dict()
        if self.description:
            d["description"] = self.description
        return d


def _positive_finite(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise BadParameter(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise BadParameter(f"{name} must be finite")
    return v


def polynomial(beta: float, description: str = "") -> EigenSpectrum:
    """a_i = i**(beta/2)."""
    beta = _positive_finite("beta", beta)
    if beta <= 1.0:
        raise BadParameter(f"polynomial family needs beta > 1, got {beta}")
    return EigenSpectrum("polynomial", beta=beta, description=description)


def exponential(alpha: float, description: str = "") -> EigenSpectrum:
    """a_i = exp(alpha * i)."""
    alpha = _positive_finite("alpha", alpha)
    if alpha <= 0.0:
        raise BadParameter(f"exponential family needs alpha > 0, got {alpha}")
    return EigenSpectrum("exponential", alpha=alpha, description=description)


def explicit(values, tail: TailModel | None = None, description: str = "") -> EigenSpectrum:
    vals = tuple(_positive_finite("value", v) for v in values)
    if not vals:
        raise BadParameter("explicit spectrum needs at least one value")
    if any(v <= 0.0 for v in vals):
        raise BadParameter("explicit values must be positive")
    for i in range(1, len(vals)):
        if vals[i] < vals[i - 1]:
            raise NotMonotone(f"values decrease at index {i + 1}: {vals[i - 1]} > {vals[i]}")
    return EigenSpectrum("explicit", values=vals, tail_model=tail or TailModel(), description=description)


def build_spectrum(spec: dict[str, Any]) -> EigenSpectrum:
    """Build a spectrum from a JSON-style descriptor.

    >>> build_spectrum({"family": "polynomial", "beta": 2.0}).a(5)
    5.0
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise BadParameter("descriptor must be a mapping with a 'family' key")
    family = spec["family"]
    desc = spec.get("description", "")
    if family == "polynomial":
        return polynomial(spec.get("beta"), desc)
    if family == "exponential":
        return exponential(spec.get("alpha"), desc)
    if family == "explicit":
        t = spec.get("tail") or {"kind": "none"}
        tail = TailModel(t.get("kind", "none"), t.get("ratio"), t.get("exponent"))
        return explicit(spec.get("values", ()), tail, desc)
    raise BadParameter(f"unknown family {family!r}")


def tail_sum_bounds(s: EigenSpectrum, N: int) -> tuple[float, float]:
    """Interval containing sum_{i > N} 1/a_i**2.

    For an explicit list without tail model and N below its length the upper
    end is infinite (only the listed part is known).
    """
    return tail_bounds(s, N, "inv1", 0.0)


def tail_bounds(s: EigenSpectrum, N: int, kind: str, c: float) -> tuple[float, float]:
    """Interval containing sum_{i > N} g(a_i**2) for a series kernel g."""
    if N < 1:
        raise BadParameter("N must be >= 1")
    L = s.head_length
    partial = 0.0
    if N < L:
        partial = float(np.sum(_tails.kernel(kind, s.a_sq(np.arange(N + 1, L + 1)), c)))
        N = L
    if s.family == "explicit" and s.tail_model.kind == "none":
        if partial > 0.0:
            return partial, math.inf
        raise NoTailModel("no tail model to bound the remainder beyond the explicit list")
    tail = s.tail()
    if isinstance(tail, PowerTail):
        lo, hi = _tails.power_tail_bounds(kind, c, tail.A, tail.p, N)
    else:
        lo, hi = _tails.geometric_tail_bounds(kind, c, tail.log_B, tail.log_q, N)
    # round outward: the closed forms carry a few ulps of floating error
    lo, hi = partial + lo, partial + hi
    return lo * (1.0 - _ROUND_SLACK), hi * (1.0 + _ROUND_SLACK)
