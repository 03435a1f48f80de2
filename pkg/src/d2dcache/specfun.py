"""Special functions and deterministic adaptive quadrature.

Everything here is plain float64 numerics with fixed evaluation order, so
repeated calls with identical inputs produce identical bits.  The quadrature
accepts array-valued integrands: the model code integrates over all catalog
files (and nested threshold nodes) in one adaptive pass, with the error
control applied to the worst component.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureError", "QuadSpec", "integrate", "integrate_batch",
    "upper_gamma", "lower_gamma", "expint_ei", "expint_e1_scaled",
    "xi1", "xi2", "xi2_scaled",
]

_EULER_GAMMA = 0.5772156649015328606

# Gauss-Legendre node/weight pairs on (-1, 1); the 7/10 pair doubles as an
# embedded error estimate per panel.
_GL7 = np.polynomial.legendre.leggauss(7)
_GL10 = np.polynomial.legendre.leggauss(10)


class QuadratureError(ArithmeticError):
    """Raised when the subdivision cap is hit before tolerances are met."""


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances for :func:`integrate` / :func:`integrate_batch`."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200


def _panel(f, a: float, b: float):
    """(value, error) on [a, b] via embedded GL7/GL10 rules."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    f10 = f(mid + half * _GL10[0])
    v10 = half * np.tensordot(_GL10[1], f10, axes=(0, 0))
    f7 = f(mid + half * _GL7[0])
    v7 = half * np.tensordot(_GL7[1], f7, axes=(0, 0))
    return v10, np.abs(v10 - v7)


def integrate_batch(f, lo: float, hi: float, spec: QuadSpec = QuadSpec()):
    """Adaptive integral of an array-valued ``f`` over [lo, hi].

    ``f`` maps a node array of shape (k,) to values of shape (k, ...); the
    result has the trailing shape.  Panels are bisected worst-first until
    every component's summed error estimate is below
    ``max(abs_tol, rel_tol * |integral|)``.
    """
    if hi < lo:
        raise ValueError(f"integration bounds out of order: [{lo}, {hi}]")
    if hi == lo:
        return np.zeros_like(np.asarray(f(np.array([lo]))[0], dtype=float))

    value, err = _panel(f, lo, hi)
    value = np.asarray(value, dtype=float)
    err = np.asarray(err, dtype=float)
    heap = [(-float(err.max()), 0, lo, hi, value, err)]
    total_v = value.copy()
    total_e = err.copy()
    splits = 0
    while True:
        bound = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(total_v))
        if (total_e <= bound).all():
            break
        if splits >= spec.max_subdivisions:
            raise QuadratureError(
                f"no convergence within {spec.max_subdivisions} subdivisions "
                f"(residual {float(total_e.max()):.3e})")
        _, _, a, b, v, e = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _panel(f, a, m)
        v2, e2 = _panel(f, m, b)
        total_v += v1 + v2 - v
        total_e += e1 + e2 - e
        splits += 1
        heapq.heappush(heap, (-float(np.max(e1)), 2 * splits - 1, a, m, v1, e1))
        heapq.heappush(heap, (-float(np.max(e2)), 2 * splits, m, b, v2, e2))
    return total_v


def integrate(f, lo: float, hi: float, spec: QuadSpec = QuadSpec()) -> float:
    """Scalar convenience wrapper around :func:`integrate_batch`.

    ``f`` may be vectorized over numpy arrays or a plain scalar function.
    """

    def g(t: np.ndarray) -> np.ndarray:
        try:
            v = np.asarray(f(t), dtype=float)
        except (TypeError, ValueError):
            v = None
        if v is None or v.shape != t.shape:
            v = np.array([float(f(ti)) for ti in t])
        return v

    return float(integrate_batch(g, lo, hi, spec))


# ---------------------------------------------------------------------------
# Incomplete gamma


def _lower_gamma_series(s: float, x: float) -> float:
    # gamma(s,x) = x**s e**-x sum x**n / (s (s+1) .. (s+n)); for x < s+1.
    term = 1.0 / s
    total = term
    n = 0
    while True:
        n += 1
        term *= x / (s + n)
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
        if n > 10_000:  # pragma: no cover
            raise QuadratureError("incomplete gamma series stalled")
    log_front = s * math.log(x) - x
    return math.exp(log_front) * total if log_front > -745.0 else 0.0


def _upper_gamma_cf(s: float, x: float) -> float:
    # Modified Lentz continued fraction for Gamma(s,x); for x >= s+1.
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover
        raise QuadratureError("incomplete gamma continued fraction stalled")
    log_front = s * math.log(x) - x
    return math.exp(log_front) * h if log_front > -745.0 else 0.0


def _check_gamma_args(s: float, x: float) -> None:
    if s <= 0.0:
        raise ValueError(f"incomplete gamma needs s > 0, got {s}")
    if x < 0.0:
        raise ValueError(f"incomplete gamma needs x >= 0, got {x}")


def upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma integral(t**(s-1) e**-t, t=x..inf), s > 0, x >= 0.

    Series for the lower tail when x < s+1, Lentz continued fraction above;
    each regime avoids computing a small value as a difference of large ones.
    """
    _check_gamma_args(s, x)
    if x == 0.0:
        return math.gamma(s)
    if x < s + 1.0:
        return math.gamma(s) - _lower_gamma_series(s, x)
    return _upper_gamma_cf(s, x)


def lower_gamma(s: float, x: float) -> float:
    """Lower incomplete gamma, the complement of :func:`upper_gamma`."""
    _check_gamma_args(s, x)
    if x == 0.0:
        return 0.0
    if x < s + 1.0:
        return _lower_gamma_series(s, x)
    return math.gamma(s) - _upper_gamma_cf(s, x)


def upper_gamma_array(s: float, x: np.ndarray) -> np.ndarray:
    """Elementwise :func:`upper_gamma` for a fixed shape parameter."""
    flat = np.asarray(x, dtype=float).ravel()
    out = np.array([upper_gamma(s, xi) for xi in flat])
    return out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Exponential integral


def _e1_series(y: float) -> float:
    # E1(y) = -gamma - ln y + sum (-1)^(k+1) y^k / (k k!), reliable for y <= 1.
    total = -_EULER_GAMMA - math.log(y)
    term = 1.0
    for k in range(1, 64):
        term *= -y / k
        contrib = -term / k
        total += contrib
        if abs(contrib) < abs(total) * 1e-17:
            break
    return total


def _e1_cf(y: float) -> float:
    # Scaled continued fraction: returns exp(y) * E1(y), y > 1 (Lentz).
    tiny = 1e-300
    b = y + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 20_000):
        an = -i * i
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover
        raise QuadratureError("E1 continued fraction stalled")
    return h


def expint_e1_scaled(y: float) -> float:
    """exp(y) * E1(y) for y > 0; safe for arbitrarily large y."""
    if y <= 0.0:
        raise ValueError(f"expint_e1_scaled needs y > 0, got {y}")
    if y <= 1.0:
        return math.exp(y) * _e1_series(y)
    return _e1_cf(y)


def expint_ei(x: float) -> float:
    """Ei(x) for x < 0 (equals -E1(-x)); |x| >= 746 underflows to -0.0."""
    if x >= 0.0:
        raise ValueError(f"expint_ei is defined here for x < 0 only, got {x}")
    y = -x
    if y <= 1.0:
        return -_e1_series(y)
    scaled = _e1_cf(y)
    return -math.exp(-y) * scaled if y < 745.0 else -0.0


# ---------------------------------------------------------------------------
# Interference geometry factors


def xi1(alpha: float) -> float:
    """Full-plane factor (2*pi/alpha) / sin(2*pi/alpha); needs alpha > 2."""
    if alpha <= 2.0:
        raise ValueError(f"xi1 diverges for alpha <= 2, got {alpha}")
    u = 2.0 * math.pi / alpha
    return u / math.sin(u)


def xi2_scaled(alpha: float, x) -> np.ndarray:
    """x**(2/alpha) * xi2(alpha, x) as integral(x / (x + u**(alpha/2)), u=0..1).

    The rescaled form keeps the integration domain fixed, so a whole array of
    thresholds ``x`` is handled in one adaptive pass.  Values 0 and +inf map
    to 0 and 1.
    """
    if alpha <= 2.0:
        raise ValueError(f"xi2_scaled needs alpha > 2, got {alpha}")
    x = np.asarray(x, dtype=float)
    if (x < 0.0).any():
        raise ValueError("thresholds must be >= 0")
    out = np.zeros(x.shape)
    out[np.isinf(x)] = 1.0
    live = (x > 0.0) & np.isfinite(x)
    if live.any():
        xs = x[live]

        def f(u: np.ndarray) -> np.ndarray:
            return xs / (xs + u[:, None] ** (alpha / 2.0))

        out[live] = integrate_batch(f, 0.0, 1.0, QuadSpec(rel_tol=1e-10))
    return out


def xi2(alpha: float, x: float) -> float:
    """integral(1 / (1 + t**(alpha/2)), t=0..x**(-2/alpha)) for x > 0."""
    if not x > 0.0:
        raise ValueError(f"xi2 needs x > 0, got {x}")
    if math.isinf(x):
        return 0.0
    return float(xi2_scaled(alpha, np.array([x]))[0]) * x ** (-2.0 / alpha)
