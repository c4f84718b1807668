"""Gompertz-Makeham mortality law and annuity valuation factors.

Hazard at attained time t for an individual aged x at purchase:

    lambda_t = lam + (1/b) * exp((x + t - m) / b)

with modal age ``m``, dispersion ``b`` and a constant component ``lam``.
The deferred annuity factor

    F(xi) = int_xi^inf  tpx * exp(-rho t) dt

prices $1/yr of lifetime income starting xi years out, and is the Dirichlet
boundary payoff of every ruin-contingent PDE in this package.  Its closed
form uses the upper incomplete gamma with a negative first argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special_functions import (
    QuadratureSpec,
    simpson_integrate,
    upper_incomplete_gamma,
    upper_incomplete_gamma_vec,
)


@dataclass(frozen=True)
class MortalityParams:
    """Gompertz-Makeham parameters for one annuitant.

    Attributes
    ----------
    x : float
        Purchase age in years.
    lam : float
        Constant (age-independent) hazard component per year.
    m : float
        Modal age in years.
    b : float
        Dispersion in years.
    max_age : float
        Terminal age; the valuation horizon is ``max_age - x``.
    """

    x: float
    lam: float = 0.0
    m: float = 86.3
    b: float = 9.5
    max_age: float = 120.0

    def __post_init__(self) -> None:
        if self.x < 0:
            raise ValueError(f"purchase age must be >= 0, got {self.x}")
        if self.b <= 0:
            raise ValueError(f"dispersion b must be > 0, got {self.b}")
        if self.m <= 0:
            raise ValueError(f"modal age m must be > 0, got {self.m}")
        if self.lam < 0:
            raise ValueError(f"constant hazard must be >= 0, got {self.lam}")
        if self.max_age <= self.x:
            raise ValueError(f"max_age {self.max_age} must exceed purchase age {self.x}")

    @property
    def horizon(self) -> float:
        return self.max_age - self.x


@dataclass(frozen=True)
class AnnuityQuote:
    """Price of $1/yr lifetime income, deferred ``deferral`` years."""

    value: float
    deferral: float
    valuation_rate: float


def hazard_rate(t, p: MortalityParams):
    """Force of mortality at time t (years since purchase). Accepts arrays."""
    return p.lam + np.exp((p.x + np.asarray(t, dtype=float) - p.m) / p.b) / p.b


def survival_probability(t, p: MortalityParams):
    """P[T_x > t] under the Gompertz-Makeham law. Accepts arrays; 1 at t=0."""
    t = np.asarray(t, dtype=float)
    out = np.exp(math.exp((p.x - p.m) / p.b) * (1.0 - np.exp(t / p.b)) - p.lam * t)
    return float(out) if out.ndim == 0 else out


def _alda_closed_form(deferral: float, rho: float, p: MortalityParams) -> float:
    a = -(p.lam + rho) * p.b
    arg = math.exp((p.x - p.m + deferral) / p.b)
    if arg == 0.0:
        # modal age so remote that the age-dependent hazard underflows:
        # the constant-force expression is then exact to machine precision
        return math.exp(-(p.lam + rho) * deferral) / (p.lam + rho)
    num = p.b * upper_incomplete_gamma(a, arg)
    den = math.exp((p.m - p.x) * (p.lam + rho) - math.exp((p.x - p.m) / p.b))
    return num / den


def _alda_quadrature(deferral: float, rho: float, p: MortalityParams) -> float:
    def integrand(t):
        return survival_probability(t, p) * np.exp(-rho * t)

    # integrate until the integrand is numerically dead; for genuine
    # Gompertz parameters the horizon max_age - x already suffices
    hi = max(p.horizon, deferral + 1.0)
    while float(integrand(hi)) > 1e-18 and hi < deferral + 5000.0:
        hi += max(10.0, 0.5 * (hi - deferral))
    if deferral >= hi:
        return 0.0
    # 0.01-year panels resolve the integrand far below 1e-8
    n = min(2_000_000, max(64, int(math.ceil((hi - deferral) / 0.01))))
    n += n % 2
    return simpson_integrate(integrand, deferral, hi, QuadratureSpec(panel_count=n))


def alda_factor(deferral: float, rho: float, p: MortalityParams) -> AnnuityQuote:
    """Actuarial value of $1/yr for life starting ``deferral`` years out.

    Uses the closed form in terms of the incomplete gamma whenever
    ``lam + rho > 0`` and the gamma parameter is non-degenerate; falls back
    to Simpson quadrature of the survival integral otherwise (notably the
    ``rho = lam = 0`` life-expectancy case).
    """
    if deferral < 0:
        raise ValueError(f"deferral must be >= 0, got {deferral}")
    if rho < 0:
        raise ValueError(f"valuation rate must be >= 0, got {rho}")
    if float(survival_probability(deferral, p)) * math.exp(-rho * deferral) < 1e-300:
        return AnnuityQuote(value=0.0, deferral=deferral, valuation_rate=rho)
    a = -(p.lam + rho) * p.b
    if a >= 0.0 or abs(a - round(a)) < 1e-12:
        value = _alda_quadrature(deferral, rho, p)
    else:
        value = _alda_closed_form(deferral, rho, p)
    return AnnuityQuote(value=value, deferral=deferral, valuation_rate=rho)


def spia_factor(rho: float, p: MortalityParams) -> float:
    """Immediate-annuity value: deferral zero."""
    return alda_factor(0.0, rho, p).value


def deferred_factor_F(xi: float, rho: float, p: MortalityParams) -> float:
    """F(xi): the deferred annuity factor used as PDE boundary payoff.

    Beyond the terminal age this decays below 1e-8 on its own (no hard
    cutoff, so the constant-force limit m -> inf stays exact).
    """
    return alda_factor(xi, rho, p).value


def deferred_factor_Fprime(xi: float, rho: float, p: MortalityParams) -> float:
    """F'(xi) = -exp(-int_0^xi (lambda_q + rho) dq); equals -1 at xi=0."""
    return -float(survival_probability(xi, p)) * math.exp(-rho * xi)


def tabulate_deferred_factors(times: np.ndarray, rho: float,
                              p: MortalityParams) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate (F, F') on a time grid in one vectorised pass.

    The PDE solvers query the boundary at every step, so this avoids
    re-evaluating the continued fraction point by point.  Times at or beyond
    the horizon get F = 0.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    F = np.zeros_like(times)
    Fprime = -survival_probability(times, p) * np.exp(-rho * times)
    live = -Fprime > 1e-300
    a = -(p.lam + rho) * p.b
    if a >= 0.0 or abs(a - round(a)) < 1e-12:
        F[live] = np.array([_alda_quadrature(float(t), rho, p) for t in times[live]])
    elif np.any(live):
        arg = np.exp((p.x - p.m + times[live]) / p.b)
        flat = arg == 0.0  # remote modal age: constant-force expression exact
        vals = np.empty(arg.shape)
        if np.any(flat):
            vals[flat] = np.exp(-(p.lam + rho) * times[live][flat]) / (p.lam + rho)
        if np.any(~flat):
            den = math.exp((p.m - p.x) * (p.lam + rho) - math.exp((p.x - p.m) / p.b))
            vals[~flat] = p.b * upper_incomplete_gamma_vec(a, arg[~flat]) / den
        F[live] = vals
    return F, Fprime
