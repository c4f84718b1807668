"""Backward solver for 1-D linear parabolic terminal-value problems.

Solves

    V_t + drift(t,z) V_z + 0.5 diffusion_sq(t,z) V_zz - discount(t) V + source(t,z) = 0

on [z_min, z_max] x [0, t_max], marching backward from a terminal condition at
t_max, with pluggable Dirichlet / Neumann / Robin boundaries on either side.

Scheme: Crank-Nicolson in time with a fully-implicit startup (two half steps)
to damp terminal or boundary-data kinks; the same implicit restart is applied
whenever the march crosses a caller-declared kink time.  Space is discretised
with central differences; the drift term is upwinded wherever the local cell
Peclet number exceeds 2 (relevant near degenerate-diffusion edges), which
keeps the implicit system an M-matrix.  Callers solving smooth
advection-dominated problems can disable upwinding (``drift_upwinding="none"``)
to retain second-order transport accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded


class SolverError(RuntimeError):
    """Raised on singular boundary closures or non-finite solution values."""


@dataclass(frozen=True)
class GridSpec:
    """Discretisation of the space-time rectangle.

    ``z_steps`` / ``t_steps`` count sub-intervals.  ``stretch`` grades node
    spacing: node i sits at ``z_min + (z_max - z_min) * (i / z_steps)**stretch``,
    so values > 1 cluster nodes near ``z_min`` and values in (0, 1) cluster
    near ``z_max``; ``None`` means uniform.
    """

    z_min: float
    z_max: float
    z_steps: int
    t_max: float
    t_steps: int
    stretch: float | None = None

    def __post_init__(self) -> None:
        if not (self.z_max > self.z_min):
            raise ValueError(f"z_max ({self.z_max}) must exceed z_min ({self.z_min})")
        if self.z_steps < 2:
            raise ValueError(f"z_steps must be >= 2, got {self.z_steps}")
        if self.t_steps < 1:
            raise ValueError(f"t_steps must be >= 1, got {self.t_steps}")
        if not (self.t_max > 0):
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if self.stretch is not None and not (self.stretch > 0):
            raise ValueError(f"stretch must be > 0, got {self.stretch}")

    def z_nodes(self) -> np.ndarray:
        xi = np.linspace(0.0, 1.0, self.z_steps + 1)
        if self.stretch is not None and self.stretch != 1.0:
            xi = xi ** self.stretch
        return self.z_min + (self.z_max - self.z_min) * xi

    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps + 1)

    def refined(self, factor: float) -> "GridSpec":
        """Grid with step counts scaled by ``factor`` (>1 finer, <1 coarser)."""
        return GridSpec(
            z_min=self.z_min,
            z_max=self.z_max,
            z_steps=max(2, int(round(self.z_steps * factor))),
            t_max=self.t_max,
            t_steps=max(1, int(round(self.t_steps * factor))),
            stretch=self.stretch,
        )


@dataclass(frozen=True)
class CoefficientField:
    """PDE coefficients; each callable receives (t, z_array) or (t).

    ``space_only=True`` declares that drift, diffusion_sq and source do not
    depend on t (the scalar discount still may); the solver then assembles
    the spatial stencil once instead of every step.
    """

    drift: Callable[[float, np.ndarray], np.ndarray | float]
    diffusion_sq: Callable[[float, np.ndarray], np.ndarray | float]
    discount: Callable[[float], float] = lambda t: 0.0
    source: Callable[[float, np.ndarray], np.ndarray | float] | None = None
    space_only: bool = False


@dataclass(frozen=True)
class BoundarySpec:
    """One boundary condition.

    kind "dirichlet": V = g(t); "neumann": V_z = g(t);
    "robin": alpha*V + beta*V_z = g(t) with (alpha, beta) != (0, 0);
    "free": V_zz = 0 (linear extrapolation, for far fields whose tail decays
    too slowly for a hard zero at the truncation edge).
    ``side`` is optional and, when set, must match the side the spec is
    passed to in :func:`solve_backward`.
    """

    kind: str
    value: Callable[[float], float] | float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    side: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("dirichlet", "neumann", "robin", "free"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "robin" and self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("robin boundary needs (alpha, beta) != (0, 0)")
        if self.side not in (None, "lower", "upper"):
            raise ValueError(f"side must be 'lower' or 'upper', got {self.side!r}")

    @staticmethod
    def dirichlet(g: Callable[[float], float] | float, side: str | None = None) -> "BoundarySpec":
        return BoundarySpec(kind="dirichlet", value=g, side=side)

    @staticmethod
    def neumann(g: Callable[[float], float] | float = 0.0, side: str | None = None) -> "BoundarySpec":
        return BoundarySpec(kind="neumann", value=g, alpha=0.0, beta=1.0, side=side)

    @staticmethod
    def robin(alpha: float, beta: float, g: Callable[[float], float] | float = 0.0,
              side: str | None = None) -> "BoundarySpec":
        return BoundarySpec(kind="robin", value=g, alpha=alpha, beta=beta, side=side)

    @staticmethod
    def free(side: str | None = None) -> "BoundarySpec":
        return BoundarySpec(kind="free", side=side)

    def g(self, t: float) -> float:
        return self.value(t) if callable(self.value) else float(self.value)


@dataclass
class PriceSurface:
    """Solved values over (time, space), plus the realised node coordinates."""

    grid: GridSpec
    times: np.ndarray
    z: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.times), len(self.z)):
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"({len(self.times)}, {len(self.z)}) grid")

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        """Dump as CSV with header ``t,z,value``, row-major by time."""
        with open(path, "w") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write("t,z,value\n")
            for i, t in enumerate(self.times):
                for j, zj in enumerate(self.z):
                    fh.write(f"{t:.17g},{zj:.17g},{self.values[i, j]:.17g}\n")


def _deriv3_weights(x0, x1, x2, at: str):
    """Second-order one-sided first-derivative weights over 3 points.

    ``at="right"`` differentiates at x2, ``at="left"`` at x0.
    """
    if at == "right":
        w0 = (x2 - x1) / ((x0 - x1) * (x0 - x2))
        w1 = (x2 - x0) / ((x1 - x0) * (x1 - x2))
        w2 = (2 * x2 - x0 - x1) / ((x2 - x0) * (x2 - x1))
    else:
        w0 = (2 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
        w1 = (x0 - x2) / ((x1 - x0) * (x1 - x2))
        w2 = (x0 - x1) / ((x2 - x0) * (x2 - x1))
    return w0, w1, w2


class _Workspace:
    """Per-solve discretisation state (nodes, spacings, stencil templates)."""

    def __init__(self, grid: GridSpec, coeffs: CoefficientField, upwinding: str):
        self.grid = grid
        self.coeffs = coeffs
        self.upwinding = upwinding
        self.z = grid.z_nodes()
        self.times = grid.t_nodes()
        n = len(self.z)
        self.h_minus = self.z[1:-1] - self.z[:-2]   # spacing below interior node
        self.h_plus = self.z[2:] - self.z[1:-1]     # spacing above interior node
        if np.any(self.h_minus <= 0) or np.any(self.h_plus <= 0):
            raise ValueError("grid spacing must be strictly positive")
        hm, hp = self.h_minus, self.h_plus
        # central first-derivative weights
        self.c1_lo = -hp / (hm * (hm + hp))
        self.c1_di = (hp - hm) / (hm * hp)
        self.c1_up = hm / (hp * (hm + hp))
        # second-derivative weights
        self.c2_lo = 2.0 / (hm * (hm + hp))
        self.c2_di = -2.0 / (hm * hp)
        self.c2_up = 2.0 / (hp * (hm + hp))
        self.h_local = np.maximum(hm, hp)
        self.n = n
        self._memo_t: float | None = None
        self._memo_rows = None
        self._static_rows = None
        self._impl_cache: dict = {}

    def implicit_template(self, theta: float, dt: float):
        """For space-only coefficients: cached (sub, sup, main0) of the
        implicit matrix I - theta*dt*(L0 - k I), excluding the discount
        contribution theta*dt*k which is added per step."""
        key = (theta, round(dt, 15))
        tpl = self._impl_cache.get(key)
        if tpl is None:
            if self._static_rows is None:
                self._static_rows = self._build_rows(0.0, discount=0.0)
            lo0, di0, up0 = self._static_rows
            tpl = (-theta * dt * lo0, -theta * dt * up0, 1.0 - theta * dt * di0)
            self._impl_cache[key] = tpl
        return tpl

    def operator_rows(self, t: float):
        """Interior rows (lo, di, up) of the spatial operator L at time t.

        Memoised on t: consecutive theta steps evaluate the operator at the
        same time level twice (implicit side of one step, explicit side of
        the next).  With space-only coefficients the drift/diffusion stencil
        is assembled once and only the discount is refreshed.
        """
        if self._memo_t == t:
            return self._memo_rows
        if self.coeffs.space_only:
            if self._static_rows is None:
                self._static_rows = self._build_rows(0.0, discount=0.0)
            lo, di, up = self._static_rows
            rows = (lo, di - float(self.coeffs.discount(t)), up)
        else:
            rows = self._build_rows(t)
        self._memo_t, self._memo_rows = t, rows
        return rows

    def _build_rows(self, t: float, discount: float | None = None):
        zi = self.z[1:-1]
        a = np.broadcast_to(np.asarray(self.coeffs.drift(t, zi), dtype=float), zi.shape)
        d = np.broadcast_to(np.asarray(self.coeffs.diffusion_sq(t, zi), dtype=float), zi.shape)
        if np.any(d < 0):
            raise ValueError("diffusion_sq must be nonnegative")
        k = float(self.coeffs.discount(t)) if discount is None else discount

        lo = 0.5 * d * self.c2_lo
        di = 0.5 * d * self.c2_di - k
        up = 0.5 * d * self.c2_up

        if self.upwinding == "peclet":
            upw = np.abs(a) * self.h_local > d  # cell Peclet > 2
        elif self.upwinding == "none":
            upw = np.zeros(zi.shape, dtype=bool)
        else:
            raise ValueError(f"unknown drift_upwinding mode {self.upwinding!r}")

        central = ~upw
        lo = lo + np.where(central, a * self.c1_lo, 0.0)
        di = di + np.where(central, a * self.c1_di, 0.0)
        up = up + np.where(central, a * self.c1_up, 0.0)
        if upw.any():
            fwd = upw & (a > 0)   # forward difference (V_{i+1}-V_i)/h_plus
            bwd = upw & ~fwd      # backward difference (V_i-V_{i-1})/h_minus
            di = di - np.where(fwd, a / self.h_plus, 0.0)
            up = up + np.where(fwd, a / self.h_plus, 0.0)
            di = di + np.where(bwd, a / self.h_minus, 0.0)
            lo = lo - np.where(bwd, a / self.h_minus, 0.0)
        return lo, di, up

    def source_at(self, t: float):
        if self.coeffs.source is None:
            return 0.0
        return np.broadcast_to(np.asarray(self.coeffs.source(t, self.z[1:-1]), dtype=float),
                               self.z[1:-1].shape)


def _theta_step(ws: _Workspace, v: np.ndarray, t_from: float, t_to: float, theta: float,
                lower: BoundarySpec, upper: BoundarySpec) -> np.ndarray:
    """Advance the solution from t_from down to t_to with one theta step."""
    dt = t_from - t_to
    n = ws.n
    rhs = np.empty(n)
    main = np.empty(n)
    sub = np.zeros(n)   # sub[i] multiplies V_{i-1} in row i
    sup = np.zeros(n)   # sup[i] multiplies V_{i+1} in row i

    if ws.coeffs.space_only:
        lo0, di0, up0 = ws._static_rows if ws._static_rows is not None else ws._build_rows(0.0, discount=0.0)
        ws._static_rows = (lo0, di0, up0)
        k_from = float(ws.coeffs.discount(t_from))
        k_to = float(ws.coeffs.discount(t_to))
        c_e = (1.0 - theta) * dt
        rhs[1:-1] = (1.0 - c_e * k_from) * v[1:-1] + c_e * (lo0 * v[:-2] + di0 * v[1:-1] + up0 * v[2:])
        sub_c, sup_c, main0 = ws.implicit_template(theta, dt)
        main[1:-1] = main0 + theta * dt * k_to
        sub[1:-1] = sub_c
        sup[1:-1] = sup_c
    else:
        lo_e, di_e, up_e = ws.operator_rows(t_from)
        lo_i, di_i, up_i = ws.operator_rows(t_to)
        rhs[1:-1] = v[1:-1] + (1.0 - theta) * dt * (lo_e * v[:-2] + di_e * v[1:-1] + up_e * v[2:])
        main[1:-1] = 1.0 - theta * dt * di_i
        sub[1:-1] = -theta * dt * lo_i
        sup[1:-1] = -theta * dt * up_i

    src = theta * ws.source_at(t_to) + (1.0 - theta) * ws.source_at(t_from)
    if np.ndim(src) or src != 0.0:
        rhs[1:-1] += dt * src

    for spec, side in ((lower, "lower"), (upper, "upper")):
        g = spec.g(t_to)
        if spec.kind == "dirichlet":
            if side == "lower":
                main[0], sup[0], rhs[0] = 1.0, 0.0, g
            else:
                main[-1], sub[-1], rhs[-1] = 1.0, 0.0, g
            continue
        if spec.kind == "free":
            # second difference vanishes at the edge (nonuniform-aware weights)
            if side == "lower":
                h0, h1 = ws.z[1] - ws.z[0], ws.z[2] - ws.z[1]
                r0, r1, r2, g = 1.0 / h0, -(1.0 / h0 + 1.0 / h1), 1.0 / h1, 0.0
            else:
                h0, h1 = ws.z[-2] - ws.z[-3], ws.z[-1] - ws.z[-2]
                r2, r1, r0, g = 1.0 / h0, -(1.0 / h0 + 1.0 / h1), 1.0 / h1, 0.0
        else:
            alpha = spec.alpha if spec.kind == "robin" else 0.0
            beta = spec.beta if spec.kind == "robin" else 1.0
            if side == "lower":
                w0, w1, w2 = _deriv3_weights(ws.z[0], ws.z[1], ws.z[2], at="left")
                r0, r1, r2 = alpha + beta * w0, beta * w1, beta * w2
            else:
                w0, w1, w2 = _deriv3_weights(ws.z[-3], ws.z[-2], ws.z[-1], at="right")
                r2, r1, r0 = beta * w0, beta * w1, alpha + beta * w2
        if side == "lower":
            # eliminate the V_2 coupling with interior row 1
            if abs(sup[1]) < 1e-300:
                raise SolverError("singular lower boundary closure (zero superdiagonal)")
            f = r2 / sup[1]
            main[0] = r0 - f * sub[1]
            sup[0] = r1 - f * main[1]
            rhs[0] = g - f * rhs[1]
        else:
            if abs(sub[-2]) < 1e-300:
                raise SolverError("singular upper boundary closure (zero subdiagonal)")
            f = r2 / sub[-2]
            sub[-1] = r1 - f * main[-2]
            main[-1] = r0 - f * sup[-2]
            rhs[-1] = g - f * rhs[-2]

    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = main
    ab[2, :-1] = sub[1:]
    try:
        out = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own type
        raise SolverError(f"singular tridiagonal system at t={t_to:.6g}") from exc
    return out


def solve_backward(coeffs: CoefficientField, grid: GridSpec,
                   terminal: Callable[[np.ndarray], np.ndarray | float] | float,
                   lower: BoundarySpec, upper: BoundarySpec, *,
                   drift_upwinding: str = "peclet",
                   restart_times: Sequence[float] = (),
                   metadata: dict | None = None) -> PriceSurface:
    """Solve the terminal-value problem backward from t_max to 0.

    Parameters
    ----------
    coeffs : CoefficientField
        Drift, squared diffusion, discount rate and optional source.
    grid : GridSpec
        Space-time discretisation.
    terminal : callable or float
        Terminal data V(t_max, z).
    lower, upper : BoundarySpec
        Boundary conditions at z_min and z_max.
    drift_upwinding : {"peclet", "none"}
        "peclet" switches the drift stencil to first-order upwind where the
        cell Peclet number exceeds 2 (monotone near degenerate diffusion);
        "none" keeps central differences everywhere (second-order transport,
        appropriate for smooth advection-dominated problems).
    restart_times : sequence of float
        Interior times where boundary or coefficient data kink; the step
        crossing each of them is done as two fully-implicit half steps.

    Returns
    -------
    PriceSurface
        Values on the full (time, space) grid; values[0] is the t=0 row.
    """
    for spec, side in ((lower, "lower"), (upper, "upper")):
        if spec.side is not None and spec.side != side:
            raise ValueError(f"boundary spec with side={spec.side!r} passed as {side}")

    ws = _Workspace(grid, coeffs, drift_upwinding)
    times, z = ws.times, ws.z
    n_t = len(times) - 1

    if callable(terminal):
        v = np.broadcast_to(np.asarray(terminal(z), dtype=float), z.shape).copy()
    else:
        v = np.full(z.shape, float(terminal))
    if not np.all(np.isfinite(v)):
        raise ValueError("terminal data contains non-finite values")

    # steps needing the fully-implicit startup treatment
    restart = set()
    restart.add(n_t - 1)  # first marched step damps the terminal kink
    for r in restart_times:
        if 0.0 < r <= times[-1]:
            idx = int(np.searchsorted(times, r, side="left")) - 1
            if 0 <= idx <= n_t - 1:
                restart.add(idx)

    values = np.empty((n_t + 1, len(z)))
    values[n_t] = v
    for n in range(n_t - 1, -1, -1):
        t_hi, t_lo = times[n + 1], times[n]
        if n in restart:
            t_mid = 0.5 * (t_hi + t_lo)
            v = _theta_step(ws, v, t_hi, t_mid, 1.0, lower, upper)
            v = _theta_step(ws, v, t_mid, t_lo, 1.0, lower, upper)
        else:
            v = _theta_step(ws, v, t_hi, t_lo, 0.5, lower, upper)
        if not np.all(np.isfinite(v)):
            raise SolverError(f"non-finite solution values at t={t_lo:.6g} (step {n})")
        values[n] = v

    return PriceSurface(grid=grid, times=times, z=z, values=values, metadata=metadata or {})


def solve_stationary(coeffs: CoefficientField, grid: GridSpec,
                     lower_value: float, upper_value: float, *,
                     drift_upwinding: str = "peclet",
                     metadata: dict | None = None) -> PriceSurface:
    """Solve the time-independent problem L h = 0 with Dirichlet ends.

    Uses the same spatial operator as the backward march (evaluated at t=0),
    so it doubles as the long-time limit of the parabolic solve when the
    coefficients carry no time dependence.
    """
    ws = _Workspace(grid, coeffs, drift_upwinding)
    n = ws.n
    lo, di, up = ws.operator_rows(0.0)
    rhs = np.zeros(n)
    src = ws.source_at(0.0)
    if np.ndim(src) or src != 0.0:
        rhs[1:-1] = -src
    main = np.empty(n)
    sub = np.zeros(n)
    sup = np.zeros(n)
    main[1:-1], sub[1:-1], sup[1:-1] = di, lo, up
    main[0], sup[0], rhs[0] = 1.0, 0.0, lower_value
    main[-1], sub[-1], rhs[-1] = 1.0, 0.0, upper_value

    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = main
    ab[2, :-1] = sub[1:]
    out = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True, check_finite=False)
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite values in stationary solve")
    surf = PriceSurface(grid=grid, times=np.array([0.0]), z=ws.z,
                        values=out[None, :], metadata=metadata or {})
    return surf


def sample_surface(s: PriceSurface, t, z):
    """Interpolate the surface: piecewise-cubic in z, linear in t.

    Exact at grid nodes; raises if (t, z) falls outside the grid hull.
    Accepts scalars or broadcastable arrays.
    """
    t_arr = np.asarray(t, dtype=float)
    z_arr = np.asarray(z, dtype=float)
    t_b, z_b = np.broadcast_arrays(t_arr, z_arr)
    times, zs, vals = s.times, s.z, s.values

    t_pad = 1e-9 * max(1.0, abs(times[-1]))
    z_pad = 1e-9 * max(1.0, abs(zs[-1] - zs[0]))
    if np.any(t_b < times[0] - t_pad) or np.any(t_b > times[-1] + t_pad):
        raise ValueError(f"t outside grid hull [{times[0]}, {times[-1]}]")
    if np.any(z_b < zs[0] - z_pad) or np.any(z_b > zs[-1] + z_pad):
        raise ValueError(f"z outside grid hull [{zs[0]}, {zs[-1]}]")

    nz = len(zs)
    if nz >= 4:
        j = np.clip(np.searchsorted(zs, z_b, side="right") - 1, 0, nz - 2)
        j0 = np.clip(j - 1, 0, nz - 4)
        idx = j0[..., None] + np.arange(4)
        xk = zs[idx]
        w = np.ones(z_b.shape + (4,))
        for a in range(4):
            for bb in range(4):
                if a != bb:
                    w[..., a] *= (z_b - xk[..., bb]) / (xk[..., a] - xk[..., bb])
    else:
        j = np.clip(np.searchsorted(zs, z_b, side="right") - 1, 0, nz - 2)
        idx = j[..., None] + np.arange(2)
        xk = zs[idx]
        frac = (z_b - xk[..., 0]) / (xk[..., 1] - xk[..., 0])
        w = np.stack([1.0 - frac, frac], axis=-1)

    if len(times) == 1:
        if np.any(np.abs(t_b - times[0]) > t_pad):
            raise ValueError("single-time surface sampled away from its time level")
        gathered = np.take_along_axis(np.broadcast_to(vals[0], z_b.shape + (nz,)), idx, axis=-1)
        out = (gathered * w).sum(axis=-1)
    else:
        it = np.clip(np.searchsorted(times, t_b, side="right") - 1, 0, len(times) - 2)
        wt = np.clip((t_b - times[it]) / (times[it + 1] - times[it]), 0.0, 1.0)
        lo_vals = np.take_along_axis(vals[it], idx, axis=-1)
        hi_vals = np.take_along_axis(vals[it + 1], idx, axis=-1)
        out = (1.0 - wt) * (lo_vals * w).sum(axis=-1) + wt * (hi_vals * w).sum(axis=-1)

    if out.ndim == 0:
        return float(out)
    return out


def surface_z_derivative(s: PriceSurface) -> PriceSurface:
    """d(values)/dz on the same grid: fourth-order central stencil on uniform
    grids (second-order nonuniform otherwise), one-sided at the edges."""
    zs = s.z
    vals = s.values
    n = len(zs)
    out = np.empty_like(vals)
    h = np.diff(zs)
    uniform = np.allclose(h, h[0], rtol=1e-9, atol=0.0)
    if uniform and n >= 5:
        hh = h[0]
        out[:, 2:-2] = (-vals[:, 4:] + 8 * vals[:, 3:-1] - 8 * vals[:, 1:-3] + vals[:, :-4]) / (12 * hh)
        out[:, 1] = (vals[:, 2] - vals[:, 0]) / (2 * hh)
        out[:, -2] = (vals[:, -1] - vals[:, -3]) / (2 * hh)
    else:
        hm = zs[1:-1] - zs[:-2]
        hp = zs[2:] - zs[1:-1]
        out[:, 1:-1] = (-hp / (hm * (hm + hp)) * vals[:, :-2]
                        + (hp - hm) / (hm * hp) * vals[:, 1:-1]
                        + hm / (hp * (hm + hp)) * vals[:, 2:])
    w0, w1, w2 = _deriv3_weights(zs[0], zs[1], zs[2], at="left")
    out[:, 0] = w0 * vals[:, 0] + w1 * vals[:, 1] + w2 * vals[:, 2]
    w0, w1, w2 = _deriv3_weights(zs[-3], zs[-2], zs[-1], at="right")
    out[:, -1] = w0 * vals[:, -3] + w1 * vals[:, -2] + w2 * vals[:, -1]
    meta = dict(s.metadata)
    meta["quantity"] = f"{meta.get('quantity', 'v')}_dz"
    return PriceSurface(grid=s.grid, times=s.times, z=zs, values=out, metadata=meta)
