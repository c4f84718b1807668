"""Ratcheting RCLA variants and the GLWB composition.

When withdrawals step up with the running maximum of the reference index,
the pricing problem collapses to one spatial dimension in the moneyness
ratio y = W / Mbar, where Mbar is the running maximum floored at the
bonus-grown deposit W0 * exp(beta * tau).  The running maximum acts through
a reflection at y = 1: a Neumann condition h_y = 0 for the fast variant
(payout fixed at $1/yr) and a Robin condition h = h_y for the super variant
(payout proportional to the maximum at ruin).  The ruin boundary at y = 0
carries the deferred annuity factor, scaled by the withdrawal fraction for
the super variant.

A guaranteed-lifetime-withdrawal-benefit (GLWB) rider paying
gamma * deposit per year for life once the account is exhausted is the
super variant times the guaranteed dollars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mortality import MortalityParams, spia_factor, tabulate_deferred_factors
from .pde import BoundarySpec, CoefficientField, GridSpec, PriceSurface, sample_surface, solve_backward
from .rcla_pricing import DEFAULT_DT, MarketParams, RclaPrice

DEFAULT_DY = 0.002


@dataclass(frozen=True)
class MoneynessState:
    """Ratio state of the ratcheting index: y = W / Mbar in [0, 1]."""

    y: float
    mbar: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.y <= 1.0):
            raise ValueError(f"moneyness must lie in [0, 1], got {self.y}")
        if not (self.mbar > 0.0):
            raise ValueError(f"running maximum must be > 0, got {self.mbar}")


@dataclass(frozen=True)
class GlwbQuote:
    """Super-variant value per $1/yr of initially guaranteed income, plus the
    dollar composition for a given guaranteed base."""

    unit_value: float
    guaranteed_dollars: float
    dollar_value: float

    def __post_init__(self) -> None:
        if self.unit_value < 0:
            raise ValueError(f"unit_value must be >= 0, got {self.unit_value}")


def default_moneyness_grid(mort: MortalityParams, dy: float = DEFAULT_DY,
                           dt: float = DEFAULT_DT) -> GridSpec:
    t_max = mort.horizon
    return GridSpec(z_min=0.0, z_max=1.0, z_steps=int(round(1.0 / dy)),
                    t_max=t_max, t_steps=max(1, int(round(t_max / dt))))


def _ratchet_surface(mkt: MarketParams, mort: MortalityParams, grid: GridSpec,
                     variant: str, drift_upwinding: str) -> PriceSurface:
    tau, gamma = mkt.tau, mkt.gamma
    t_half = np.linspace(0.0, grid.t_max, 2 * grid.t_steps + 1)
    F, _ = tabulate_deferred_factors(t_half, mkt.rho, mort)

    def g_hat(t: float) -> float:
        return gamma if t > tau else 0.0

    coeffs = CoefficientField(
        drift=lambda t, y: mkt.mu * y - g_hat(t),
        diffusion_sq=lambda t, y: (mkt.sigma * y) ** 2,
    )
    if variant == "fast":
        lower = BoundarySpec.dirichlet(lambda t: float(np.interp(t, t_half, F)))
        upper = BoundarySpec.neumann(0.0)
    else:
        lower = BoundarySpec.dirichlet(
            lambda t: gamma * float(np.interp(t, t_half, F)) if t >= tau else 0.0)
        upper = BoundarySpec.robin(1.0, -1.0, 0.0)  # h(t,1) = h_y(t,1)

    meta = {"quantity": "h", "variant": variant, "mu": mkt.mu, "sigma": mkt.sigma,
            "rho": mkt.rho, "gamma": gamma, "I0": mkt.I0, "tau": tau, "beta": mkt.beta,
            "x": mort.x, "lam": mort.lam, "m": mort.m, "b": mort.b}
    restarts = [tau] if 0.0 < tau < grid.t_max else []
    return solve_backward(coeffs, grid, 0.0, lower, upper,
                          drift_upwinding=drift_upwinding,
                          restart_times=restarts, metadata=meta)


def price_frcla(mkt: MarketParams, mort: MortalityParams, grid: GridSpec | None = None,
                *, drift_upwinding: str = "peclet", keep_surface: bool = True) -> RclaPrice:
    """Fast variant: withdrawals ratchet with the running maximum, payout at
    ruin stays $1/yr for life.

    Returns the value read at the initial moneyness exp(-beta * tau).
    """
    if mkt.gamma == 0.0:
        return RclaPrice(value=0.0, surface=None, diagnostics={"case": "gamma=0"})
    if math.isinf(mkt.gamma):
        return RclaPrice(value=spia_factor(mkt.rho, mort), surface=None,
                         diagnostics={"case": "gamma=inf (immediate annuity)"})
    grid = grid or default_moneyness_grid(mort)
    surf = _ratchet_surface(mkt, mort, grid, "fast", drift_upwinding)
    y0 = math.exp(-mkt.beta * mkt.tau)
    value = float(sample_surface(surf, 0.0, y0))
    return RclaPrice(value=value, surface=surf if keep_surface else None,
                     diagnostics={"grid": grid, "read_y": y0})


def price_srcla(mkt: MarketParams, mort: MortalityParams, grid: GridSpec | None = None,
                *, drift_upwinding: str = "peclet", keep_surface: bool = False) -> GlwbQuote:
    """Super variant: payout at ruin is the stepped-up withdrawal itself,
    quoted per $1/yr of initially guaranteed income (gamma * I0 dollars).

    The solved h satisfies f(t, w, mbar) = mbar * h(t, w/mbar), so the time-0
    contract value is I0*exp(beta tau)*h(0, exp(-beta tau)) and the unit value
    divides by the initial guarantee gamma*I0.
    """
    if mkt.gamma == 0.0:
        return GlwbQuote(unit_value=0.0, guaranteed_dollars=0.0, dollar_value=0.0)
    if math.isinf(mkt.gamma):
        v = spia_factor(mkt.rho, mort)
        return GlwbQuote(unit_value=v, guaranteed_dollars=float("inf"), dollar_value=float("inf"))
    grid = grid or default_moneyness_grid(mort)
    surf = _ratchet_surface(mkt, mort, grid, "super", drift_upwinding)
    y0 = math.exp(-mkt.beta * mkt.tau)
    unit = math.exp(mkt.beta * mkt.tau) * float(sample_surface(surf, 0.0, y0)) / mkt.gamma
    guaranteed = mkt.gamma * mkt.I0
    return GlwbQuote(unit_value=unit, guaranteed_dollars=guaranteed,
                     dollar_value=unit * guaranteed)


def price_glwb(deposit: float, mkt: MarketParams, mort: MortalityParams,
               grid: GridSpec | None = None, *, drift_upwinding: str = "peclet") -> GlwbQuote:
    """GLWB rider on ``deposit``: guaranteed income gamma * deposit per year
    for life from account exhaustion, with continuous step-up and a deferral
    bonus; valued as guaranteed dollars times the super-variant unit value."""
    if not (deposit > 0):
        raise ValueError(f"deposit must be > 0, got {deposit}")
    quote = price_srcla(mkt, mort, grid, drift_upwinding=drift_upwinding)
    guaranteed = mkt.gamma * deposit if math.isfinite(mkt.gamma) else float("inf")
    return GlwbQuote(unit_value=quote.unit_value, guaranteed_dollars=guaranteed,
                     dollar_value=quote.unit_value * guaranteed)
