"""Delimited output, JSON mirrors, and figure rendering for the CLI.

Every CSV written here starts with ``#`` comment lines echoing the fully
resolved run configuration, library versions and seed, so any report can be
reproduced from its own header.  Values are written with 17 significant
digits and round-trip losslessly through :func:`read_csv`.  Alongside each
delimited report the CLI renders a matplotlib figure to a PNG with the same
stem (suppress with ``--no-figure``).
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _versions() -> dict:
    import matplotlib as mpl
    import numpy
    import scipy

    from . import __version__

    return {"rcla": __version__, "python": sys.version.split()[0],
            "numpy": numpy.__version__, "scipy": scipy.__version__,
            "matplotlib": mpl.__version__}


def config_comments(config: dict) -> list[str]:
    """Reproducibility header lines (without the leading '# ')."""
    return [f"config: {json.dumps(config, sort_keys=True, default=str)}",
            f"versions: {json.dumps(_versions(), sort_keys=True)}",
            f"seed: {config.get('seed')}"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, rows: list[dict], columns: list[str], config: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in config_comments(config):
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def write_json(path, rows: list[dict], config: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"config": config, "versions": _versions(), "records": rows}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def read_csv(path) -> tuple[list[dict], list[str]]:
    """Read back a CLI-written CSV: (records with floats parsed, comment lines)."""
    comments = []
    body = io.StringIO()
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.write(line)
    body.seek(0)
    rows = []
    for raw in csv.DictReader(body):
        row = {}
        for key, val in raw.items():
            if val is None or val == "":
                row[key] = val
                continue
            try:
                row[key] = int(val)
            except ValueError:
                try:
                    row[key] = float(val)
                except ValueError:
                    row[key] = val
        rows.append(row)
    return rows, comments


def render_table_figure(path, rows: list[dict], table_id: str) -> None:
    """Computed-vs-reference scatter plus per-cell deviation bars."""
    if "paper_value" in rows[0]:
        ref = np.array([r["paper_value"] for r in rows])
        got = np.array([r["computed"] for r in rows])
    else:  # table 4 layout
        ref = np.array([[r["paper_rcla"], r["paper_srcla"]] for r in rows]).ravel()
        got = np.array([[r["computed_rcla"], r["computed_srcla"]] for r in rows]).ravel()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    ax1.plot(ref, got, "o", ms=4, alpha=0.7)
    lim = [0, max(1e-9, ref.max(), got.max()) * 1.05]
    ax1.plot(lim, lim, "k--", lw=1)
    ax1.set_xlabel("reference value")
    ax1.set_ylabel("computed value")
    ax1.set_title(f"table {table_id}: computed vs reference")
    ax2.bar(np.arange(len(ref)), got - ref, width=0.9)
    ax2.set_xlabel("cell index")
    ax2.set_ylabel("computed - reference")
    ax2.set_title("per-cell deviation")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_surface_figure(path, surface) -> None:
    """Heat map of the solved value surface over (time, space)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t_dec = max(1, len(surface.times) // 400)
    z_dec = max(1, len(surface.z) // 400)
    vals = surface.values[::t_dec, ::z_dec]
    mesh = ax.pcolormesh(surface.z[::z_dec], surface.times[::t_dec], vals,
                         shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=surface.metadata.get("quantity", "value"))
    ax.set_xlabel("normalised index level")
    ax.set_ylabel("time (years)")
    ax.set_title("solved value surface")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_hedge_figure(path, ledger, path_index: int = 0) -> None:
    """Portfolio decomposition and cumulative outflows along one path."""
    t = ledger.times
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(t, ledger.V[:, path_index], label="portfolio V", lw=1.2)
    ax1.plot(t, ledger.stock_value[:, path_index], label="stock position", lw=0.9)
    ax1.plot(t, ledger.money_market[:, path_index], label="money market", lw=0.9)
    ax1.legend(loc="best", fontsize=8)
    ax1.set_ylabel("dollars")
    ax1.set_title("hedge portfolio")
    ax2.plot(t, ledger.outflows[:, path_index], color="tab:red", lw=1.2)
    ax2.set_ylabel("cumulative outflow")
    ax2.set_xlabel("time (years)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
