"""Upper incomplete gamma (negative real parameter) and composite Simpson quadrature.

These are the only special-function primitives the mortality layer needs.
The incomplete gamma is extended to negative non-integer first arguments via
the downward recurrence

    Gamma(a, x) = (Gamma(a + 1, x) - x**a * exp(-x)) / a,

anchored at a shifted parameter in (0, 1] that is evaluated by a continued
fraction (x large) or power series (x small).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_MAX_ITER = 500
_CF_TOL = 1e-14


class ConvergenceError(RuntimeError):
    """Raised when an iterative evaluation exceeds its iteration cap."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Simpson configuration.

    ``panel_count`` is the number of sub-intervals (must be even and positive);
    ``absolute_tolerance`` is the target used by :func:`simpson_to_tolerance`
    when panel doubling is requested.
    """

    panel_count: int = 256
    absolute_tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.panel_count <= 0 or self.panel_count % 2 != 0:
            raise ValueError(f"panel_count must be a positive even integer, got {self.panel_count}")
        if not (self.absolute_tolerance > 0.0 and math.isfinite(self.absolute_tolerance)):
            raise ValueError(f"absolute_tolerance must be finite and > 0, got {self.absolute_tolerance}")


def _gamma_cf(a: float, x: float) -> float:
    """Gamma(a, x) by modified Lentz continued fraction; good for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
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
        if abs(delta - 1.0) < _CF_TOL:
            return math.exp(-x + a * math.log(x)) * h
    raise ConvergenceError(f"continued fraction for Gamma({a}, {x}) did not converge in {_MAX_ITER} iterations")


def _gamma_series(a: float, x: float) -> float:
    """Gamma(a, x) = Gamma(a)(1 - P(a, x)) with P by power series; good for x < a + 1."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _CF_TOL:
            lower = total * math.exp(-x + a * math.log(x))
            return math.gamma(a) - lower
    raise ConvergenceError(f"series for Gamma({a}, {x}) did not converge in {_MAX_ITER} iterations")


def _gamma_positive(a: float, x: float) -> float:
    if x < a + 1.0:
        return _gamma_series(a, x)
    return _gamma_cf(a, x)


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) = int_x^inf s**(a-1) exp(-s) ds.

    Supports any real ``a`` that is not a non-positive integer, including the
    negative values needed by the Gompertz-Makeham annuity factor.  Requires
    ``x > 0`` (the integral diverges at 0 for a <= 0).

    Parameters
    ----------
    a : float
        First argument; must not be 0, -1, -2, ...
    x : float
        Lower integration limit, strictly positive.

    Raises
    ------
    ValueError
        If ``x <= 0`` or ``a`` is a non-positive integer.
    ConvergenceError
        If the continued fraction or series fails to converge.
    """
    if not (x > 0.0):
        raise ValueError(f"x must be > 0, got {x}")
    if a <= 0.0 and a == math.floor(a):
        raise ValueError(f"a must not be a non-positive integer, got {a}")
    if a > 0.0:
        return _gamma_positive(a, x)
    # Shift to an anchor in (0, 1], then recur back down:
    #   Gamma(a, x) = (Gamma(a+1, x) - x**a exp(-x)) / a
    n_shift = int(math.ceil(-a))
    anchor = a + n_shift  # in (0, 1]
    value = _gamma_positive(anchor, x)
    log_x = math.log(x)
    for k in range(n_shift):
        a_k = anchor - 1.0 - k
        value = (value - math.exp((a_k) * log_x - x)) / a_k
    return value


def upper_incomplete_gamma_vec(a: float, x: np.ndarray) -> np.ndarray:
    """Vectorised Gamma(a, x) over an array of x values (shared ``a``).

    Used to tabulate annuity-factor boundary data on PDE time grids, where
    thousands of evaluations share one parameter.  Same domain rules as
    :func:`upper_incomplete_gamma`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("all x must be > 0")
    if a <= 0.0 and a == math.floor(a):
        raise ValueError(f"a must not be a non-positive integer, got {a}")

    n_shift = 0 if a > 0.0 else int(math.ceil(-a))
    anchor = a + n_shift

    out = np.empty_like(x)
    series_mask = x < anchor + 1.0

    # Power series branch (small x).
    if np.any(series_mask):
        xs = x[series_mask]
        ap = np.full_like(xs, anchor)
        term = np.full_like(xs, 1.0 / anchor)
        total = term.copy()
        for _ in range(_MAX_ITER):
            ap += 1.0
            term = term * xs / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * _CF_TOL):
                break
        else:
            raise ConvergenceError("vectorised series did not converge")
        out[series_mask] = math.gamma(anchor) - total * np.exp(-xs + anchor * np.log(xs))

    # Continued fraction branch (large x).
    cf_mask = ~series_mask
    if np.any(cf_mask):
        xc = x[cf_mask]
        tiny = 1e-300
        b = xc + 1.0 - anchor
        c = np.full_like(xc, 1.0 / tiny)
        d = 1.0 / np.where(b != 0.0, b, tiny)
        h = d.copy()
        active = np.ones(xc.shape, dtype=bool)
        for i in range(1, _MAX_ITER + 1):
            an = -i * (i - anchor)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < tiny, tiny, d)
            c = b + an / c
            c = np.where(np.abs(c) < tiny, tiny, c)
            d = 1.0 / d
            delta = d * c
            h = np.where(active, h * delta, h)
            active &= np.abs(delta - 1.0) >= _CF_TOL
            if not active.any():
                break
        else:
            raise ConvergenceError("vectorised continued fraction did not converge")
        out[cf_mask] = np.exp(-xc + anchor * np.log(xc)) * h

    # Downward recurrence, vectorised over x.
    if n_shift > 0:
        log_x = np.log(x)
        for k in range(n_shift):
            a_k = anchor - 1.0 - k
            out = (out - np.exp(a_k * log_x - x)) / a_k
    return out


def simpson_integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Composite Simpson estimate of int_a^b f(s) ds.

    ``f`` must accept a numpy array of abscissae.  Error is O(h**4) for
    smooth integrands; exact for cubics.
    """
    if not (b > a):
        raise ValueError(f"need b > a, got a={a}, b={b}")
    n = spec.panel_count
    s = np.linspace(a, b, n + 1)
    y = np.asarray(f(s), dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("integrand produced non-finite values")
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def simpson_to_tolerance(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                         spec: QuadratureSpec = QuadratureSpec(), max_doublings: int = 12) -> float:
    """Simpson estimate refined by panel doubling until successive estimates
    agree within ``spec.absolute_tolerance``."""
    n = spec.panel_count
    prev = simpson_integrate(f, a, b, QuadratureSpec(n, spec.absolute_tolerance))
    for _ in range(max_doublings):
        n *= 2
        cur = simpson_integrate(f, a, b, QuadratureSpec(n, spec.absolute_tolerance))
        if abs(cur - prev) <= spec.absolute_tolerance:
            return cur
        prev = cur
    raise ConvergenceError(f"Simpson refinement did not reach {spec.absolute_tolerance} within {max_doublings} doublings")
