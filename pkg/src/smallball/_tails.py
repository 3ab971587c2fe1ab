"""Certified bounds on the remainders of the series over an eigenvalue tail.

Every series in the package has the form ``sum_i g(a_i**2)`` for one of four
term kernels, with ``c = 2*theta``:

    inv1: 1/(y + c)     inv2: 1/(y + c)**2     inv3: 1/(y + c)**3
    log : log(1 + c/y)

Two tail shapes are supported. A power tail ``a_x**2 = A x**p`` (p > 1) is
handled with the midpoint rule, whose error on each unit cell is at most
1/8 of the integral of ``|f''|``; since each kernel composed with ``A x**p``
has at most one inflection point, the total variation of ``f'`` is known in
closed form. The midpoint integral itself reduces to a regularized incomplete
beta function. Once every remaining term has c/y <= 1/16 the kernels expand as
alternating series in c/y whose coefficients are Hurwitz zeta tails; the
remainder is then bounded by the first omitted term. A geometric tail
``a_i**2 = B q**i`` (q > 1) is dominated by a geometric series.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

KERNELS = ("inv1", "inv2", "inv3", "log")
_ORDER = {"inv1": 1, "inv2": 2, "inv3": 3}


def kernel(kind: str, y, c: float):
    y = np.asarray(y, dtype=float)
    if kind == "log":
        return np.log1p(c / y)
    return (y + c) ** (-_ORDER[kind])


def _kernel_prime(kind: str, y: float, c: float) -> float:
    if kind == "log":
        return -c / (y * (y + c))
    k = _ORDER[kind]
    return -k * (y + c) ** (-k - 1)


def _inflection(kind: str, p: float, c: float) -> float:
    """Value of y below which x -> g(A x**p) is concave (0 if never)."""
    if kind == "log" or c == 0.0:
        return 0.0
    k = _ORDER[kind]
    return (p - 1.0) * c / (k * p + 1.0)


def power_tail_integral(kind: str, c: float, A: float, p: float, X: float) -> float:
    """Integral of g(A x**p) over [X, inf)."""
    s = 1.0 / p
    Y = A * X**p
    pre = A ** (-s) / p
    if kind == "log":
        if c == 0.0:
            return 0.0
        return -X * math.log1p(c / Y) + (c / s) * power_tail_integral("inv1", c, A, p, X)
    k = _ORDER[kind]
    if c == 0.0:
        return pre * Y ** (s - k) / (k - s)
    t = c / (Y + c)
    a, b = k - s, s
    return pre * c ** (s - k) * special.beta(a, b) * special.betainc(a, b, t)


def _abs_fprime(kind: str, c: float, A: float, p: float, x: float) -> float:
    y = A * x**p
    return abs(_kernel_prime(kind, y, c) * p * y / x)


Z_MAX = 1.0 / 16.0
_NEGLIGIBLE = 1e-20


def _zeta_series_bounds(kind: str, c: float, A: float, p: float, N: int) -> tuple[float, float]:
    a = N + 1.0
    z = c / (A * a**p)
    if kind == "log":
        if c == 0.0:
            return 0.0, 0.0
        k, j0 = 0, 1
    else:
        k, j0 = _ORDER[kind], 0
    n_terms = 2 if z == 0.0 else int(math.ceil(math.log(_NEGLIGIBLE) / math.log(z))) + 2
    j = np.arange(j0, j0 + n_terms, dtype=float)
    if kind == "log":
        log_coef = -np.log(j)
    else:
        log_coef = special.gammaln(k + j) - special.gammaln(k) - special.gammaln(j + 1.0)
    sign = np.where(j % 2 == (1 if kind == "log" else 0), 1.0, -1.0)
    with np.errstate(divide="ignore", over="ignore"):
        log_zeta = np.log(special.zeta(p * (k + j), a))
        j_log_c = np.zeros_like(j)
        if c > 0.0:
            j_log_c = j * math.log(c)
        else:
            j_log_c[j > 0] = -np.inf
        log_terms = log_coef + j_log_c - (k + j) * math.log(A) + log_zeta
        terms = sign * np.exp(log_terms)
    total = float(np.sum(terms[:-1]))
    err = abs(float(terms[-1]))
    return max(total - err, 0.0), total + err


def power_tail_bounds(kind: str, c: float, A: float, p: float, N: int) -> tuple[float, float]:
    """Interval containing sum_{i > N} g(A i**p); the model must hold on [N, inf)."""
    if c <= Z_MAX * A * (N + 1.0) ** p:
        return _zeta_series_bounds(kind, c, A, p, N)
    X = N + 0.5
    mid = power_tail_integral(kind, c, A, p, X)
    y_star = _inflection(kind, p, c)
    tv = _abs_fprime(kind, c, A, p, X)
    if A * X**p < y_star:
        x_star = (y_star / A) ** (1.0 / p)
        tv = 2.0 * _abs_fprime(kind, c, A, p, x_star) - tv
    err = tv / 8.0
    lo_mono = power_tail_integral(kind, c, A, p, N + 1.0)
    hi_mono = power_tail_integral(kind, c, A, p, float(N))
    lo = max(mid - err, lo_mono, 0.0)
    hi = min(mid + err, hi_mono)
    return lo, max(hi, lo)


def geometric_tail_bounds(kind: str, c: float, log_B: float, log_q: float, N: int) -> tuple[float, float]:
    """Interval containing sum_{i > N} g(exp(log_B + i log_q)) for log_q > 0."""
    log_y = log_B + (N + 1) * log_q
    if log_y > 700.0:
        return 0.0, 0.0
    y_next = math.exp(log_y)
    u = c / y_next
    if kind == "log":
        hi = c / y_next / -math.expm1(-log_q)
        return hi / (1.0 + u), hi
    k = _ORDER[kind]
    hi = y_next ** (-k) / -math.expm1(-k * log_q)
    return hi * (1.0 + u) ** (-k), hi
