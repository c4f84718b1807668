"""Delta hedge of a book of ruin-contingent annuities.

A book of N contracts is replicated with a stock-index position and a money
market account:

    V_t = Delta_t S_t + Psi_t,    Delta_t S_t / N = e^{rt} W_t f_w(t, W_t)

where f is the solved contract surface and the index S carries no
withdrawals (the reference portfolio W does, but both are driven by the same
Brownian increments).  After ruin the stock position is closed and the money
market funds the annuity outflows e^{delta t} * tpx * N per year.  The
inflation-enhanced contract (payments growing at rate delta) is hedged by
pricing at rho = r - delta and scaling outflows accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mc import PathSpec, _chunk_rng
from .mortality import MortalityParams, survival_probability
from .pde import PriceSurface, sample_surface, surface_z_derivative
from .rcla_pricing import MarketParams


@dataclass
class HedgeLedger:
    """Hedge portfolio time series on the rebalance grid.

    All value arrays have shape (n_rebalance_dates, n_paths);
    ``terminal_error`` is V at the horizon minus the remaining liability,
    per path.  The identity V = stock_value + money_market holds exactly at
    every row.
    """

    times: np.ndarray
    V: np.ndarray
    stock_value: np.ndarray
    money_market: np.ndarray
    outflows: np.ndarray
    terminal_error: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.V.shape[1]

    def to_csv(self, path, path_index: int = 0, comments=()) -> None:
        """One path's ledger as CSV ``t,V,stock_value,money_market,cum_outflow``."""
        with open(path, "w") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write("t,V,stock_value,money_market,cum_outflow\n")
            for i, t in enumerate(self.times):
                fh.write(f"{t:.17g},{self.V[i, path_index]:.17g},"
                         f"{self.stock_value[i, path_index]:.17g},"
                         f"{self.money_market[i, path_index]:.17g},"
                         f"{self.outflows[i, path_index]:.17g}\n")


def _surface_scale(surface: PriceSurface) -> float:
    z_scale = surface.metadata.get("z_scale")
    if z_scale is None:
        raise ValueError("surface metadata lacks z_scale; price with a finite gamma first")
    return float(z_scale)


def delta_per_contract(t: float, w, surface: PriceSurface,
                       slope_surface: PriceSurface | None = None):
    """Dollar stock position per contract: e^{rt} * w * f_w(t, w); 0 at ruin.

    ``surface`` must hold the contract value f priced under mu = r.  The
    space derivative comes from a fourth-order central stencil on the stored
    surface (``slope_surface`` can be passed to amortise that step).
    """
    r = float(surface.metadata["mu"])
    z_scale = _surface_scale(surface)
    if slope_surface is None:
        slope_surface = surface_z_derivative(surface)
    w_arr = np.asarray(w, dtype=float)
    # beyond the truncation edge the contract is worthless and flat
    z = np.clip(w_arr / z_scale, surface.z[0], surface.z[-1])
    slope = sample_surface(slope_surface, t, z) / z_scale
    out = np.exp(r * t) * w_arr * slope
    out = np.where((w_arr <= 0.0) | (w_arr / z_scale >= surface.z[-1]), 0.0, out)
    return float(out) if out.ndim == 0 else out


def simulate_hedge(mkt: MarketParams, mort: MortalityParams, surface: PriceSurface,
                   n_contracts: float, rebalance_dt: float, spec: PathSpec) -> HedgeLedger:
    """Discrete-rebalancing replication of a book of ``n_contracts`` RCLAs.

    The index and the reference portfolio are stepped at spec.dt with shared
    normals; the stock position is reset to the surface delta every
    ``rebalance_dt`` (snapped to whole simulation steps).  Outflows start at
    the simulated ruin time of each path and are integrated per step with
    mortality weighting.

    Requires mu = r consistency between ``mkt`` and the priced surface, and
    rho = r - delta.
    """
    meta = surface.metadata
    for key, val in (("sigma", mkt.sigma), ("gamma", mkt.gamma), ("I0", mkt.I0)):
        if key in meta and not math.isclose(float(meta[key]), val, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"surface was priced with {key}={meta[key]}, hedge asked for {val}")
    if not math.isclose(float(meta["mu"]), mkt.mu, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("hedging requires the surface priced under mu = r")
    if abs(mkt.mu - mkt.rho - mkt.delta) > 1e-9:
        raise ValueError("hedging requires rho = r - delta")

    r = mkt.mu
    n = int(spec.paths)
    horizon = spec.horizon if spec.horizon is not None else mort.horizon
    n_steps = int(round(horizon / spec.dt))
    dt = horizon / n_steps
    stride = max(1, int(round(rebalance_dt / dt)))
    sqdt = math.sqrt(dt)
    z_scale = _surface_scale(surface)
    slope_surface = surface_z_derivative(surface)

    # per-step outflow integral of e^{delta s} * sp_x * N over [t_j, t_j+1]
    t_grid = np.arange(n_steps + 1) * dt
    q = np.exp(mkt.delta * t_grid) * survival_probability(t_grid, mort) * n_contracts
    step_outflow = 0.5 * dt * (q[:-1] + q[1:])
    fv_half = math.exp(r * dt / 2.0)
    growth = math.exp(r * dt)

    rng = _chunk_rng(spec.seed, 0)
    W = np.full(n, mkt.I0)
    S = np.full(n, mkt.I0)
    ruined = np.zeros(n, dtype=bool)
    wd = mkt.gamma * mkt.I0

    f0 = float(sample_surface(surface, 0.0, mkt.I0 / z_scale))
    V = np.full(n, n_contracts * f0)
    stock_val = n_contracts * delta_per_contract(0.0, W, surface, slope_surface)
    shares = stock_val / S
    psi = V - stock_val
    cum_out = np.zeros(n)

    rec_steps = list(range(0, n_steps + 1, stride))
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    rec_times = t_grid[rec_steps]
    n_rec = len(rec_steps)
    recV = np.empty((n_rec, n)); recS = np.empty((n_rec, n))
    recM = np.empty((n_rec, n)); recO = np.empty((n_rec, n))
    recV[0], recS[0], recM[0], recO[0] = V, stock_val, psi, cum_out
    rec_i = 1

    for j in range(n_steps):
        z = rng.standard_normal(n)
        S_new = S * (1.0 + r * dt + mkt.sigma * sqdt * z)
        W_new = np.where(ruined, 0.0, W + (r * W - wd) * dt + mkt.sigma * W * sqdt * z)
        pay = ruined  # ruin from earlier steps accrues outflow this step
        psi = psi * growth - np.where(pay, step_outflow[j] * fv_half, 0.0)
        cum_out = cum_out + np.where(pay, step_outflow[j], 0.0)
        newly = ~ruined & (W_new <= 0.0)
        ruined |= newly
        W = np.where(ruined, 0.0, W_new)
        S = S_new
        k = j + 1
        if rec_i < n_rec and k == rec_steps[rec_i]:
            t = t_grid[k]
            V = shares * S + psi
            stock_val = np.where(ruined, 0.0,
                                 n_contracts * delta_per_contract(t, W, surface, slope_surface))
            shares = stock_val / S
            psi = V - stock_val
            recV[rec_i], recS[rec_i], recM[rec_i], recO[rec_i] = V, stock_val, psi, cum_out
            rec_i += 1

    z_end = np.clip(np.asarray(W) / z_scale, surface.z[0], surface.z[-1])
    liability = n_contracts * math.exp(r * horizon) * sample_surface(surface, horizon, z_end)
    terminal_error = recV[-1] - liability
    return HedgeLedger(times=rec_times, V=recV, stock_value=recS, money_market=recM,
                       outflows=recO, terminal_error=np.asarray(terminal_error),
                       diagnostics={"rebalance_dt": rebalance_dt, "stride": stride,
                                    "sim_dt": dt, "initial_value_per_contract": f0,
                                    "paths": n, "seed": spec.seed})
