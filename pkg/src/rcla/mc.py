"""Monte Carlo pricer for cross-validating the PDE engines.

Simulates the reference portfolio index under constant withdrawals

    dW = (mu W - gamma I0) dt + sigma W dB

or max-linked (ratcheting) withdrawals gamma * Mbar after a deferral, detects
the ruin time R (first passage of W to zero), and averages the deferred
annuity factor F(R), scaled by the relative running maximum for the super
variant.

Paths are simulated in fixed-size chunks, each with its own counter-based
substream keyed by (seed, chunk index), and every step draws a full chunk of
normals whether or not individual paths are still alive.  Estimates are
therefore bit-identical however chunks are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .mortality import MortalityParams, tabulate_deferred_factors
from .rcla_pricing import MarketParams

_SCHEMES = ("euler", "log-euler-with-withdrawal")


@dataclass(frozen=True)
class PathSpec:
    """Simulation controls.

    ``horizon=None`` runs to the mortality horizon (max_age - x).  The
    terminal-step convention for ruin is the first grid time at which W <= 0;
    ``bridge_correction`` additionally draws uniforms to detect within-step
    crossings under a Brownian-bridge approximation.
    """

    dt: float = 1.0 / 500.0
    horizon: float | None = None
    paths: int = 100_000
    seed: int = 0
    scheme: str = "euler"
    antithetic: bool = False
    bridge_correction: bool = False
    max_correction: bool = True
    chunk_size: int = 16384

    def __post_init__(self) -> None:
        if not (0 < self.dt <= 0.01):
            raise ValueError(f"dt must be in (0, 0.01] years, got {self.dt}")
        if self.paths < 1:
            raise ValueError(f"paths must be >= 1, got {self.paths}")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        if self.chunk_size < 2 or self.chunk_size % 2 != 0:
            raise ValueError(f"chunk_size must be an even integer >= 2, got {self.chunk_size}")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo price with its sampling error and ruin diagnostics.

    ``mean_ruin_time`` is over ruined paths only (nan when no path ruins).
    """

    price: float
    std_error: float
    ruin_fraction: float
    mean_ruin_time: float


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, chunk_index]))


def _simulate_chunk(mkt: MarketParams, spec: PathSpec, variant: str, horizon: float,
                    chunk_index: int, n_paths: int):
    """Ruin step index (-1 if none) and Mbar at ruin for one chunk."""
    rng = _chunk_rng(spec.seed, chunk_index)
    n_steps = int(round(horizon / spec.dt))
    dt = spec.dt
    sqdt = math.sqrt(dt)
    mu, sigma, gamma, i0 = mkt.mu, mkt.sigma, mkt.gamma, mkt.I0
    ratchet = variant in ("fast", "super")
    tau = mkt.tau if ratchet else 0.0
    floor = i0 * math.exp(mkt.beta * tau) if ratchet else i0

    w = np.full(n_paths, i0)
    mbar = np.full(n_paths, floor)
    ruin_step = np.full(n_paths, -1, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)
    n_draw = n_paths // 2 if spec.antithetic else n_paths
    # discrete monitoring underestimates a continuously observed running
    # maximum; the standard continuity correction scales observations by
    # exp(beta1 * sigma * sqrt(dt)), beta1 = -zeta(1/2)/sqrt(2 pi)
    max_corr = math.exp(0.5826 * sigma * sqdt) if (ratchet and spec.max_correction) else 1.0

    log_scheme = spec.scheme == "log-euler-with-withdrawal"
    for k in range(n_steps):
        z = rng.standard_normal(n_draw)
        if spec.antithetic:
            z = np.concatenate([z, -z])
        u = rng.random(n_paths) if spec.bridge_correction else None
        if not alive.any():
            continue  # keep consuming draws so early exits cannot occur mid-chunk
        t_mid = (k + 0.5) * dt  # regime switches act on the step they cover
        if ratchet:
            wd = gamma * mbar if t_mid > tau else 0.0
        else:
            wd = gamma * i0
        if log_scheme:
            w_new = w * np.exp((mu - 0.5 * sigma * sigma) * dt + sigma * sqdt * z) - wd * dt
        else:
            w_new = w + (mu * w - wd) * dt + sigma * w * sqdt * z
        crossed = alive & (w_new <= 0.0)
        if spec.bridge_correction:
            pos = alive & (w_new > 0.0) & (w > 0.0)
            vol2 = (sigma * np.maximum(w, 1e-300)) ** 2 * dt
            p_cross = np.exp(-2.0 * np.clip(w * w_new, 0.0, None) / np.maximum(vol2, 1e-300))
            crossed |= pos & (u < p_cross)
        ruin_step[crossed] = k + 1
        alive &= ~crossed
        w = np.where(alive, w_new, 0.0)
        if ratchet:
            mbar = np.where(alive, np.maximum(mbar, w * max_corr), mbar)
    return ruin_step, mbar


def _run_chunks(mkt, spec, variant, horizon, n_workers: int = 1):
    sizes = []
    remaining = spec.paths
    while remaining > 0:
        take = min(spec.chunk_size, remaining)
        sizes.append(take)
        remaining -= take
    args = [(mkt, spec, variant, horizon, idx, size) for idx, size in enumerate(sizes)]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda a: _simulate_chunk(*a), args))
    else:
        results = [_simulate_chunk(*a) for a in args]
    ruin_step = np.concatenate([r[0] for r in results])
    mbar = np.concatenate([r[1] for r in results])
    return ruin_step, mbar


def simulate_ruin_time(mkt: MarketParams, spec: PathSpec, variant: str = "basic",
                       mort: MortalityParams | None = None,
                       n_workers: int = 1) -> np.ndarray:
    """Per-path ruin times in years; paths surviving the horizon return inf.

    ``variant="basic"`` uses constant withdrawals gamma*I0 from time zero;
    ``"ratchet"`` (or "fast"/"super") defers withdrawals by mkt.tau and then
    withdraws gamma times the bonus-floored running maximum.
    """
    if variant == "ratchet":
        variant = "fast"
    if variant not in ("basic", "fast", "super"):
        raise ValueError(f"unknown variant {variant!r}")
    horizon = spec.horizon if spec.horizon is not None else (
        mort.horizon if mort is not None else 120.0 - 65.0)
    if mort is not None and spec.horizon is not None and spec.horizon > mort.horizon + 1e-9:
        raise ValueError("horizon exceeds the mortality horizon max_age - x")
    if mkt.gamma == 0.0:
        return np.full(spec.paths, np.inf)
    ruin_step, _ = _run_chunks(mkt, spec, variant, horizon, n_workers)
    times = np.where(ruin_step >= 0, ruin_step * spec.dt, np.inf)
    return times


def estimate_price(mkt: MarketParams, mort: MortalityParams, spec: PathSpec,
                   variant: str = "basic", n_workers: int = 1) -> McEstimate:
    """Monte Carlo value of the ruin-contingent annuity.

    Payoff per path: F(R) for the basic and fast variants, and
    (Mbar_R / I0) * F(R) for the super variant (per $1/yr initially
    guaranteed); F(inf) = 0.
    """
    if variant not in ("basic", "fast", "super"):
        raise ValueError(f"unknown variant {variant!r}")
    horizon = spec.horizon if spec.horizon is not None else mort.horizon
    if horizon > mort.horizon + 1e-9:
        raise ValueError("horizon exceeds the mortality horizon max_age - x")

    if mkt.gamma == 0.0:
        return McEstimate(price=0.0, std_error=0.0, ruin_fraction=0.0, mean_ruin_time=float("nan"))

    n_steps = int(round(horizon / spec.dt))
    ruin_step, mbar = _run_chunks(mkt, spec, variant, horizon, n_workers)

    t_grid = np.arange(n_steps + 1) * spec.dt
    F, _ = tabulate_deferred_factors(np.minimum(t_grid, mort.horizon), mkt.rho, mort)
    ruined = ruin_step >= 0
    payoff = np.zeros(spec.paths)
    idx = np.clip(ruin_step[ruined], 0, n_steps)
    payoff[ruined] = F[idx]
    if variant == "super":
        payoff[ruined] *= mbar[ruined] / mkt.I0

    price = float(payoff.mean())
    std_error = float(payoff.std(ddof=1) / math.sqrt(spec.paths)) if spec.paths > 1 else float("nan")
    ruin_fraction = float(ruined.mean())
    mean_ruin_time = float((ruin_step[ruined] * spec.dt).mean()) if ruined.any() else float("nan")
    return McEstimate(price=price, std_error=std_error,
                      ruin_fraction=ruin_fraction, mean_ruin_time=mean_ruin_time)


def dump_paths_csv(path, mkt: MarketParams, spec: PathSpec, variant: str = "basic",
                   mort: MortalityParams | None = None, max_paths: int = 100,
                   stride: int = 50) -> None:
    """Debug dump of at most ``max_paths`` paths as CSV ``path_id,t,W,M``."""
    horizon = spec.horizon if spec.horizon is not None else (
        mort.horizon if mort is not None else 55.0)
    n_paths = min(spec.paths, max_paths)
    rng = _chunk_rng(spec.seed, 0)
    n_steps = int(round(horizon / spec.dt))
    ratchet = variant in ("fast", "super", "ratchet")
    tau = mkt.tau if ratchet else 0.0
    floor = mkt.I0 * math.exp(mkt.beta * tau) if ratchet else mkt.I0
    w = np.full(n_paths, mkt.I0)
    mbar = np.full(n_paths, floor)
    alive = np.ones(n_paths, dtype=bool)
    sqdt = math.sqrt(spec.dt)
    with open(path, "w") as fh:
        fh.write("path_id,t,W,M\n")
        for k in range(n_steps + 1):
            t = k * spec.dt
            if k % stride == 0 or k == n_steps:
                for p in range(n_paths):
                    fh.write(f"{p},{t:.6g},{w[p]:.10g},{mbar[p]:.10g}\n")
            if k == n_steps:
                break
            z = rng.standard_normal(n_paths)
            t_mid = (k + 0.5) * spec.dt
            wd = (mkt.gamma * mbar if t_mid > tau else 0.0) if ratchet else mkt.gamma * mkt.I0
            w_new = w + (mkt.mu * w - wd) * spec.dt + mkt.sigma * w * sqdt * z
            alive &= w_new > 0
            w = np.where(alive, w_new, 0.0)
            if ratchet:
                mbar = np.where(alive, np.maximum(mbar, w), mbar)
