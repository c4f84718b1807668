"""Valuation and hedging engine for ruin-contingent life annuities and GLWB riders."""

from .glwb_pricing import GlwbQuote, MoneynessState, price_frcla, price_glwb, price_srcla
from .hedging import HedgeLedger, delta_per_contract, simulate_hedge
from .mc import McEstimate, PathSpec, estimate_price, simulate_ruin_time
from .mortality import (
    AnnuityQuote,
    MortalityParams,
    alda_factor,
    deferred_factor_F,
    deferred_factor_Fprime,
    hazard_rate,
    spia_factor,
    survival_probability,
)
from .pde import (
    BoundarySpec,
    CoefficientField,
    GridSpec,
    PriceSurface,
    SolverError,
    sample_surface,
    solve_backward,
)
from .rcla_pricing import (
    MarketParams,
    RclaPrice,
    price_rcla,
    price_rcla_constant_hazard,
    rcla_surface,
)
from .special_functions import QuadratureSpec, simpson_integrate, upper_incomplete_gamma

__version__ = "0.1.0"

__all__ = [
    "AnnuityQuote",
    "BoundarySpec",
    "CoefficientField",
    "GlwbQuote",
    "GridSpec",
    "HedgeLedger",
    "MarketParams",
    "McEstimate",
    "MoneynessState",
    "MortalityParams",
    "PathSpec",
    "PriceSurface",
    "QuadratureSpec",
    "RclaPrice",
    "SolverError",
    "alda_factor",
    "deferred_factor_F",
    "deferred_factor_Fprime",
    "delta_per_contract",
    "estimate_price",
    "hazard_rate",
    "price_frcla",
    "price_glwb",
    "price_rcla",
    "price_rcla_constant_hazard",
    "price_srcla",
    "rcla_surface",
    "sample_surface",
    "simpson_integrate",
    "simulate_hedge",
    "simulate_ruin_time",
    "solve_backward",
    "spia_factor",
    "survival_probability",
    "upper_incomplete_gamma",
]
