"""The series mu, psi, I, their theta-derivatives, and the counting function.

    mu(theta)  = sum 1/(a_i^2 + 2 theta)
    psi(theta) = sqrt(sum 2 theta^2/(a_i^2 + 2 theta)^2)
    I(theta)   = 1/2 sum log(1 + 2 theta/a_i^2) - theta mu(theta)

Each evaluation sums the first N terms directly and bounds the remainder
with the spectrum's tail model, growing N until the bound fits the policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _tails
from .errors import DomainError, ToleranceUnreachable
from .spectrum import EigenSpectrum, PowerTail, TruncationPolicy, tail_bounds

DEFAULT_POLICY = TruncationPolicy()

_START_TERMS = 64
_GROWTH = 8
_CHUNK = 1 << 20


@dataclass(frozen=True)
class SeriesValue:
    value: float
    tail_error: float
    terms_used: int

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "tail_error", float(self.tail_error))

    def __float__(self):
        return self.value


def _head_sum(s: EigenSpectrum, kind: str, c: float, N: int) -> float:
    total = 0.0
    for lo in range(1, N + 1, _CHUNK):
        idx = np.arange(lo, min(N, lo + _CHUNK - 1) + 1)
        total += float(np.sum(_tails.kernel(kind, s.a_sq(idx), c)))
    return total


def _kernel_sums(s: EigenSpectrum, kinds, c: float, N: int):
    out = []
    for kind in kinds:
        head = _head_sum(s, kind, c, N)
        lo, hi = tail_bounds(s, N, kind, c)
        out.append((head + 0.5 * (lo + hi), 0.5 * (hi - lo)))
    return out


def _knee(s: EigenSpectrum, c: float) -> int | None:
    """Smallest N past which power-tail remainders are summed by the zeta series."""
    if s.family == "explicit" and s.tail_model.kind == "none":
        return None
    tail = s.tail()
    if not isinstance(tail, PowerTail):
        return None
    return max(int(math.ceil((c / (_tails.Z_MAX * tail.A)) ** (1.0 / tail.p))), s.head_length)


def _certified(s, kinds, c, combine: Callable, policy: TruncationPolicy) -> SeriesValue:
    """Grow N until the combined truncation error fits the policy budget."""
    N = min(max(_START_TERMS, s.head_length), policy.max_terms)
    N = max(N, s.head_length)
    knee = _knee(s, c)
    while True:
        value, err = combine(_kernel_sums(s, kinds, c, N))
        if err <= policy.budget(value):
            return SeriesValue(value, err, N)
        if N >= policy.max_terms:
            raise ToleranceUnreachable(
                f"tail error {err:.3g} above budget {policy.budget(value):.3g} with {N} terms"
            )
        nxt = N * _GROWTH
        if knee is not None and N < knee < nxt:
            nxt = knee
        N = min(nxt, policy.max_terms)


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta >= 0.0 or not math.isfinite(theta):
        raise DomainError(f"theta must be finite and >= 0, got {theta}")
    return theta


def eval_mu(s: EigenSpectrum, theta: float, p: TruncationPolicy = DEFAULT_POLICY) -> SeriesValue:
    theta = _check_theta(theta)
    return _certified(s, ("inv1",), 2.0 * theta, lambda r: r[0], p)


def eval_psi(s: EigenSpectrum, theta: float, p: TruncationPolicy = DEFAULT_POLICY) -> SeriesValue:
    theta = _check_theta(theta)
    if theta == 0.0:
        return SeriesValue(0.0, 0.0, 1)

    def combine(r):
        (s2, e2), = r
        root = math.sqrt(2.0 * s2)
        # |d sqrt| <= theta^2 e2 / psi, written so psi may underflow
        return theta * root, theta * e2 / root

    return _certified(s, ("inv2",), 2.0 * theta, combine, p)


def eval_I(s: EigenSpectrum, theta: float, p: TruncationPolicy = DEFAULT_POLICY) -> SeriesValue:
    theta = _check_theta(theta)
    if theta == 0.0:
        return SeriesValue(0.0, 0.0, 1)

    def combine(r):
        (lg, elg), (mu, emu) = r
        # I >= 0; clamping only removes cancellation noise at tiny theta
        return max(0.5 * lg - theta * mu, 0.0), 0.5 * elg + theta * emu

    return _certified(s, ("log", "inv1"), 2.0 * theta, combine, p)


def eval_mu_prime(s: EigenSpectrum, theta: float, p: TruncationPolicy = DEFAULT_POLICY) -> SeriesValue:
    """mu'(theta) = -sum 2/(a_i^2 + 2 theta)^2."""
    theta = _check_theta(theta)
    return _certified(s, ("inv2",), 2.0 * theta, lambda r: (-2.0 * r[0][0], 2.0 * r[0][1]), p)


def eval_log_psi_prime(s: EigenSpectrum, theta: float, p: TruncationPolicy = DEFAULT_POLICY) -> SeriesValue:
    """psi'/psi at theta > 0, as (1/theta) sum a^2/(a^2+2theta)^3 / sum 1/(a^2+2theta)^2."""
    theta = _check_theta(theta)
    if theta == 0.0:
        raise DomainError("psi'/psi is singular at theta = 0")
    c = 2.0 * theta

    def combine(r):
        (s2, e2), (s3, e3) = r
        # sum a^2/(a^2+c)^3 = S2 - c S3, both positive
        num = s2 - c * s3
        e_num = e2 + c * e3
        ratio = num / s2
        err = (e_num + abs(ratio) * e2) / max(s2 - e2, np.finfo(float).tiny)
        return ratio / theta, err / theta

    return _certified(s, ("inv2", "inv3"), c, combine, p)


def count_N(s: EigenSpectrum, theta: float) -> int:
    """N(theta) = sup{i : a_i^2 <= theta}, 0 when a_1^2 > theta."""
    theta = float(theta)
    if theta < 0.0:
        raise DomainError("theta must be >= 0")
    if s.a_sq(1) > theta:
        return 0
    lo, hi = 1, 2
    while s.a_sq(hi) <= theta:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if s.a_sq(mid) <= theta:
            lo = mid
        else:
            hi = mid
    return lo
