"""Command-line front end.

Subcommands:

  price   single-contract quote (spia | alda | rcla | frcla | srcla | glwb),
          optional Monte Carlo cross-check
  table   regenerate a published table as CSV (+ PNG figure) with a
          deviation report; exit 4 when any cell breaches its tolerance
  mc      Monte Carlo estimate for rcla | frcla | srcla
  hedge   discrete-rebalancing hedge simulation; ledger CSV + summary

Rates are decimals (0.05, not 5); gamma accepts ``inf``.  Output lands in
--output-dir, defaulting to $RCLA_OUTPUT_DIR or the working directory.
Exit codes: 0 ok, 2 bad configuration, 3 solver failure, 4 tolerance breach.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .glwb_pricing import price_frcla, price_glwb, price_srcla
from .hedging import simulate_hedge
from .mc import PathSpec, estimate_price
from .mortality import MortalityParams, alda_factor, spia_factor
from .pde import SolverError
from .rcla_pricing import MarketParams, default_grid, price_rcla
from .report import (
    config_comments,
    render_hedge_figure,
    render_surface_figure,
    render_table_figure,
    write_csv,
    write_json,
)
from .tables import TABLE_IDS, generate_table

PRODUCTS = ("spia", "alda", "rcla", "frcla", "srcla", "glwb")


class ConfigError(ValueError):
    """Invalid run configuration; reported with the offending field."""


def _parse_gamma(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _parse_dt(text: str) -> float:
    """Accept plain decimals or fractions like 1/252."""
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _add_market_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--age", type=float, default=65.0, help="purchase age x")
    p.add_argument("--rho", type=float, default=0.05, help="valuation rate (decimal)")
    p.add_argument("--mu", type=float, default=None, help="index drift; defaults to rho (risk neutral)")
    p.add_argument("--sigma", type=float, default=0.17, help="index volatility")
    p.add_argument("--gamma", type=_parse_gamma, default=0.05, help="withdrawal fraction; 'inf' allowed")
    p.add_argument("--i0", type=float, default=100.0, help="initial index level")
    p.add_argument("--tau", type=float, default=0.0, help="deferral years (alda/frcla/srcla/glwb)")
    p.add_argument("--beta", type=float, default=0.0, help="deferral bonus rate")
    p.add_argument("--deposit", type=float, default=100.0, help="GLWB deposit")
    p.add_argument("--lam", type=float, default=0.0, help="constant hazard component")
    p.add_argument("--m", type=float, default=86.3, help="Gompertz modal age")
    p.add_argument("--b", type=float, default=9.5, help="Gompertz dispersion")
    p.add_argument("--max-age", type=float, default=120.0, help="terminal age")
    p.add_argument("--z-max", type=float, default=None, help="far-field truncation (normalised)")
    p.add_argument("--dz", type=float, default=0.02, help="space step (normalised)")
    p.add_argument("--dt-grid", type=float, default=0.02, help="PDE time step (years)")
    p.add_argument("--seed", type=int, default=0)


def _out_dir(args) -> Path:
    if args.output_dir is not None:
        return Path(args.output_dir)
    return Path(os.environ.get("RCLA_OUTPUT_DIR", "."))


def _build_params(args):
    try:
        mort = MortalityParams(x=args.age, lam=args.lam, m=args.m, b=args.b,
                               max_age=args.max_age)
    except ValueError as exc:
        raise ConfigError(f"mortality: {exc}") from exc
    mu = args.mu if args.mu is not None else args.rho
    try:
        mkt = MarketParams(mu=mu, sigma=args.sigma, rho=args.rho, gamma=args.gamma,
                           I0=args.i0, tau=args.tau, beta=args.beta)
    except ValueError as exc:
        raise ConfigError(f"market: {exc}") from exc
    return mkt, mort


def _grid_for(args, mkt, mort, product: str):
    if product in ("frcla", "srcla", "glwb"):
        from .glwb_pricing import default_moneyness_grid
        return default_moneyness_grid(mort, dt=args.dt_grid)
    return default_grid(mort, mkt.sigma, z_max=args.z_max, dz=args.dz, dt=args.dt_grid)


def _resolved_config(args, extra: dict | None = None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    if extra:
        cfg.update(extra)
    return cfg


def cmd_price(args) -> int:
    mkt, mort = _build_params(args)
    product = args.product
    record: dict = {"product": product}
    if product == "spia":
        record["value"] = spia_factor(args.rho, mort)
    elif product == "alda":
        record["value"] = alda_factor(args.tau, args.rho, mort).value
        record["deferral"] = args.tau
    elif product == "rcla":
        res = price_rcla(mkt, mort, _grid_for(args, mkt, mort, product),
                         keep_surface=args.dump_surface is not None)
        record["value"] = res.value
        record.update({k: str(v) for k, v in res.diagnostics.items()})
        if args.dump_surface and res.surface is not None:
            res.surface.to_csv(args.dump_surface, comments=config_comments(_resolved_config(args)))
            if not args.no_figure:
                render_surface_figure(Path(args.dump_surface).with_suffix(".png"), res.surface)
    elif product == "frcla":
        res = price_frcla(mkt, mort, _grid_for(args, mkt, mort, product),
                          keep_surface=args.dump_surface is not None)
        record["value"] = res.value
        if args.dump_surface and res.surface is not None:
            res.surface.to_csv(args.dump_surface, comments=config_comments(_resolved_config(args)))
            if not args.no_figure:
                render_surface_figure(Path(args.dump_surface).with_suffix(".png"), res.surface)
    elif product == "srcla":
        quote = price_srcla(mkt, mort, _grid_for(args, mkt, mort, product))
        record["value"] = quote.unit_value
        record["guaranteed_dollars"] = quote.guaranteed_dollars
    elif product == "glwb":
        quote = price_glwb(args.deposit, mkt, mort, _grid_for(args, mkt, mort, product))
        record["value"] = quote.dollar_value
        record["unit_value"] = quote.unit_value
        record["guaranteed_dollars"] = quote.guaranteed_dollars
    else:
        raise ConfigError(f"unknown product {product!r}")

    if args.mc_check and product in ("rcla", "frcla", "srcla"):
        variant = {"rcla": "basic", "frcla": "fast", "srcla": "super"}[product]
        spec = PathSpec(paths=args.paths, seed=args.seed, dt=args.mc_dt)
        est = estimate_price(mkt, mort, spec, variant=variant)
        record["mc_price"] = est.price
        record["mc_std_error"] = est.std_error
        record["mc_gap_se"] = abs(record["value"] - est.price) / est.std_error

    cfg = _resolved_config(args)
    for line in config_comments(cfg):
        print(f"# {line}")
    for key, val in record.items():
        print(f"{key}: {val}")
    if args.output:
        path = _out_dir(args) / args.output
        if args.format == "json":
            write_json(path, [record], cfg)
        else:
            write_csv(path, [record], list(record.keys()), cfg)
    return 0


def cmd_table(args) -> int:
    result = generate_table(args.id, grid_scale=args.grid_scale)
    cfg = _resolved_config(args, {"table": args.id, "cells": result.n_cells,
                                  "breaches": result.breaches,
                                  "elapsed_s": round(result.elapsed, 3)})
    out = _out_dir(args)
    stem = f"table_{args.id}"
    csv_path = out / f"{stem}.csv"
    write_csv(csv_path, result.rows, result.columns, cfg)
    if args.format == "json":
        write_json(out / f"{stem}.json", result.rows, cfg)
    if not args.no_figure:
        render_table_figure(out / f"{stem}.png", result.rows, args.id)
    print(f"table {args.id}: {len(result.rows)} rows, {result.breaches} cells beyond tolerance, "
          f"{result.elapsed:.1f}s -> {csv_path}")
    if result.breaches:
        worst = max((r for r in result.rows if not r.get("within_tolerance", 1)),
                    key=lambda r: r.get("rel_diff", 0.0), default=None)
        if worst is not None and "rel_diff" in worst:
            print(f"  worst cell: {worst}")
        return 4
    return 0


def cmd_mc(args) -> int:
    mkt, mort = _build_params(args)
    if args.paths < 10_000:
        raise ConfigError("paths: reported estimates need at least 10000 paths")
    variant = {"rcla": "basic", "frcla": "fast", "srcla": "super"}[args.product]
    spec = PathSpec(paths=args.paths, seed=args.seed, dt=args.mc_dt,
                    antithetic=args.antithetic)
    est = estimate_price(mkt, mort, spec, variant=variant, n_workers=args.workers)
    record = {"product": args.product, "price": est.price, "std_error": est.std_error,
              "ruin_fraction": est.ruin_fraction, "mean_ruin_time": est.mean_ruin_time}
    if args.dump_paths:
        from .mc import dump_paths_csv
        dump_paths_csv(_out_dir(args) / args.dump_paths, mkt, spec, variant=variant, mort=mort)
    cfg = _resolved_config(args)
    for line in config_comments(cfg):
        print(f"# {line}")
    for key, val in record.items():
        print(f"{key}: {val}")
    if args.output:
        path = _out_dir(args) / args.output
        if args.format == "json":
            write_json(path, [record], cfg)
        else:
            write_csv(path, [record], list(record.keys()), cfg)
    return 0


def cmd_hedge(args) -> int:
    mkt, mort = _build_params(args)
    if not math.isfinite(mkt.gamma) or mkt.gamma <= 0:
        raise ConfigError("gamma: hedging needs a finite positive withdrawal fraction")
    if args.mu is not None and abs(args.mu - args.rho) > 1e-12:
        raise ConfigError("mu: hedging prices under mu = r = rho (delta enters via outflows)")
    res = price_rcla(mkt, mort, _grid_for(args, mkt, mort, "rcla"),
                     drift_upwinding=args.scheme)
    spec = PathSpec(paths=args.paths, seed=args.seed, dt=args.mc_dt)
    ledger = simulate_hedge(mkt, mort, res.surface, args.contracts,
                            _parse_dt(args.rebalance), spec)
    err = ledger.terminal_error / args.contracts
    record = {
        "initial_value_per_contract": ledger.diagnostics["initial_value_per_contract"],
        "pde_price": res.value,
        "rebalance_dt": ledger.diagnostics["rebalance_dt"],
        "paths": args.paths,
        "rms_terminal_error_per_contract": float(np.sqrt(np.mean(err ** 2))),
        "mean_terminal_error_per_contract": float(np.mean(err)),
    }
    cfg = _resolved_config(args)
    out = _out_dir(args)
    ledger_path = out / args.ledger
    ledger_path.parent.mkdir(parents=True, exist_ok=True)
    ledger.to_csv(ledger_path, comments=config_comments(cfg))
    if not args.no_figure:
        render_hedge_figure(ledger_path.with_suffix(".png"), ledger)
    for line in config_comments(cfg):
        print(f"# {line}")
    for key, val in record.items():
        print(f"{key}: {val}")
    print(f"ledger -> {ledger_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcla",
        description="Price, validate and hedge ruin-contingent life annuities and GLWB riders.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_price = sub.add_parser("price", help="price a single contract")
    p_price.add_argument("--product", choices=PRODUCTS, required=True)
    _add_market_args(p_price)
    p_price.add_argument("--mc-check", action="store_true", help="cross-check with Monte Carlo")
    p_price.add_argument("--paths", type=int, default=20_000)
    p_price.add_argument("--mc-dt", type=_parse_dt, default=1 / 500)
    p_price.add_argument("--dump-surface", default=None, help="write the value surface CSV here")
    p_price.add_argument("--output", default=None, help="also write the quote record to this file")
    p_price.add_argument("--output-dir", default=None)
    p_price.add_argument("--format", choices=("csv", "json"), default="csv")
    p_price.add_argument("--no-figure", action="store_true")
    p_price.set_defaults(func=cmd_price)

    p_table = sub.add_parser("table", help="regenerate a published table with deviations")
    p_table.add_argument("--id", choices=TABLE_IDS, required=True)
    p_table.add_argument("--grid-scale", type=float, default=1.0,
                         help="multiply grid step counts (0.5 = coarser, 2 = finer)")
    p_table.add_argument("--output-dir", default=None)
    p_table.add_argument("--format", choices=("csv", "json"), default="csv")
    p_table.add_argument("--no-figure", action="store_true")
    p_table.add_argument("--seed", type=int, default=0)
    p_table.set_defaults(func=cmd_table)

    p_mc = sub.add_parser("mc", help="Monte Carlo estimate")
    p_mc.add_argument("--product", choices=("rcla", "frcla", "srcla"), required=True)
    _add_market_args(p_mc)
    p_mc.add_argument("--paths", type=int, default=100_000)
    p_mc.add_argument("--mc-dt", type=_parse_dt, default=1 / 500)
    p_mc.add_argument("--antithetic", action="store_true")
    p_mc.add_argument("--workers", type=int, default=1)
    p_mc.add_argument("--dump-paths", default=None,
                      help="debug CSV of <=100 simulated paths (path_id,t,W,M)")
    p_mc.add_argument("--output", default=None)
    p_mc.add_argument("--output-dir", default=None)
    p_mc.add_argument("--format", choices=("csv", "json"), default="csv")
    p_mc.set_defaults(func=cmd_mc)

    p_hedge = sub.add_parser("hedge", help="simulate a discrete-rebalancing hedge")
    _add_market_args(p_hedge)
    p_hedge.add_argument("--rebalance", default="1/52", help="rebalance interval, e.g. 1/252")
    p_hedge.add_argument("--contracts", type=float, default=1.0)
    p_hedge.add_argument("--paths", type=int, default=1)
    p_hedge.add_argument("--mc-dt", type=_parse_dt, default=1 / 504)
    p_hedge.add_argument("--scheme", choices=("peclet", "none"), default="peclet",
                         help="drift discretisation for the priced surface")
    p_hedge.add_argument("--ledger", default="hedge_ledger.csv")
    p_hedge.add_argument("--output-dir", default=None)
    p_hedge.add_argument("--no-figure", action="store_true")
    p_hedge.set_defaults(func=cmd_hedge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
