"""Time loop of the split scheme, diagnostics, and convergence studies."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from vsdg.grid import ConfigurationError
from vsdg.kinetic import (
    PhaseField,
    PhaseSpace,
    compute_moments,
    spatial_transport_substep,
    velocity_transport_substep,
)
from vsdg.linalg import SolverConfig
from vsdg.mms import ManufacturedCase, get_case
from vsdg.stokes import SpatialSpace, StokesOperator
from vsdg.tensor import apply_all_axes, apply_blockwise

logger = logging.getLogger(__name__)

MODES = ("mms", "conservation")
ERROR_COLUMNS = ["h", "errL2f", "errL2u", "errL2p", "order_f", "order_u", "order_p", "seconds"]
SERIES_COLUMNS = ["t", "mass", "momentum_x", "momentum_y", "energy", "l2_f", "solver_iters"]
STABILITY_RATE = 3.0


@dataclass
class RunConfig:
    case: str = "example1"
    nx: int = 4
    nv: int = 4
    kx: int = 1
    kv: int = 1
    L: float = 1.0
    penalty: float = 10.0
    T: float = 0.1
    dt: Optional[float] = None
    cfl: float = 0.3
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Optional[str] = None
    mode: str = "mms"
    cfl_limit: float = 1.0

    def __post_init__(self):
        if isinstance(self.solver, dict):
            self.solver = SolverConfig(**self.solver)
        get_case(self.case)
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        for key in ("nx", "nv"):
            if int(getattr(self, key)) < 1:
                raise ConfigurationError(f"{key} must be at least 1")
        for key in ("kx", "kv"):
            if int(getattr(self, key)) < 0:
                raise ConfigurationError(f"{key} must be non-negative")
        if not self.T > 0:
            raise ConfigurationError(f"final time must be positive, got {self.T}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.penalty > 0 or not self.L > 0:
            raise ConfigurationError("penalty and L must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class State:
    f: PhaseField
    u: np.ndarray
    p: np.ndarray
    t: float = 0.0
    step: int = 0
    solver_iters: int = 0
    constraint_residual: float = 0.0
    solver_residual: float = 0.0


class Simulation:
    """Owns the discretization, the sources, and the state of one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.case: ManufacturedCase = get_case(config.case)
        self.phase = PhaseSpace.build(config.nx, config.nv, config.kx, config.kv, config.L)
        grid = self.phase.grid
        self.spatial = SpatialSpace(grid.mesh_x1, grid.mesh_x2, self.phase.basis_x)
        self.stokes = StokesOperator(self.spatial, config.penalty, config.solver)
        if not grid.velocity_mesh_avoids_zero():
            logger.warning("velocity mesh has v = 0 inside a cell; use an even nv")
        self.conservation = config.mode == "conservation"
        if self.conservation:
            self.kinetic_source = None
            self.fluid_source = None
        else:
            self.kinetic_source = self.case.F
            self.fluid_source = self.case.G
        self.use_exact_inflow = (not self.conservation) and not self.case.periodic_in_x

    def initial_state(self) -> State:
        f0 = self.phase.interpolate(self.case.f, 0.0)
        u0 = self.spatial.interpolate(self.case.u, 0.0)
        p0 = self.spatial.interpolate(self.case.p, 0.0)
        p0 = p0 - self.spatial.mean(p0)
        return State(f0, u0, p0)

    def boundary_traces(self, t: float, dt: float = 0.0):
        """Exterior traces on the spatial domain boundary for the spatial sub-step from ``t``.

        With ``dt > 0`` the traces are the exact solution advanced by the
        non-spatial part of the equation, matching the split intermediate state.
        """
        sp = self.phase
        x1, x2, v1, v2 = (sp.nodes(i) for i in range(4))
        ms = sp.meshes

        def f(t, x, y, a, b):
            return self.case.f_split_trace(t, dt, x, y, a, b)
        out = []
        for axis in (0, 1):
            ends = []
            for pos in (ms[axis].a, ms[axis].b):
                if axis == 0:
                    vals = f(t, pos, x2[:, None, None], v1[None, :, None], v2[None, None, :])
                else:
                    vals = f(t, x1[:, None, None], pos, v1[None, :, None], v2[None, None, :])
                ends.append(np.broadcast_to(vals, (x2.size if axis == 0 else x1.size, v1.size, v2.size)))
            out.append(tuple(ends))
        return tuple(out)

    def step(self, state: State, dt: float) -> State:
        """Advance one step: moments, Stokes solve, velocity transport, spatial transport."""
        t_n, t_next = state.t, state.t + dt
        moments = compute_moments(state.f)

        rhs = self.spatial.at_quad_points(moments.momentum)
        if self.fluid_source is not None:
            xq1, xq2 = self.spatial.quad_points
            rhs = rhs + self.fluid_source(t_next, xq1[:, None], xq2[None, :])
        res = self.stokes.step(state.u, moments.rho, rhs, dt)

        f_tilde = velocity_transport_substep(
            state.f, res.u, self.kinetic_source, t_n, dt, cfl_limit=self.config.cfl_limit
        )
        traces = self.boundary_traces(t_n, dt) if self.use_exact_inflow else None
        f_next = spatial_transport_substep(f_tilde, dt, traces, cfl_limit=self.config.cfl_limit)
        return State(
            f_next, res.u, res.p, t_next, state.step + 1,
            res.info.iterations, res.constraint_residual, res.info.residual,
        )


# ---------------------------------------------------------------- time step rule


def cfl_time_step(cfl: float, h: float, k: int, max_speed: float) -> float:
    if not max_speed > 0:
        raise ConfigurationError(f"max_speed must be positive, got {max_speed}")
    return cfl * h / ((2 * k + 1) * max_speed)


def align_to_final_time(dt: float, T: float) -> tuple[float, int]:
    """Shrink ``dt`` so that an integer number of steps lands exactly on ``T``."""
    n_steps = max(1, math.ceil(T / dt * (1 - 1e-12)))
    return T / n_steps, n_steps


def choose_dt(config: RunConfig, phase: PhaseSpace, u_max: float) -> tuple[float, int]:
    """Step size and count from the explicit value or the CFL rule of both transport sub-steps."""
    if config.dt is not None:
        return align_to_final_time(config.dt, config.T)
    grid = phase.grid
    dt_x = cfl_time_step(config.cfl, grid.h_x, config.kx, grid.L)
    dt_v = cfl_time_step(config.cfl, grid.h_v, config.kv, u_max + grid.L)
    return align_to_final_time(min(dt_x, dt_v), config.T)


# ---------------------------------------------------------------- diagnostics


def l2_error_phase(f_h: PhaseField, exact: Optional[Callable], t: float) -> float:
    """``||f_h - exact(t)||`` over the phase domain with ``k + 3`` Gauss points per direction."""
    sp = f_h.space
    rules = [b.error_rule() for b in sp.bases]
    mats = [r[2] for r in rules]
    coords = [m.physical_points(r[0]) for m, r in zip(sp.meshes, rules)]
    wts = [np.tile(r[1] * 0.5 * m.h, m.n_cells) for m, r in zip(sp.meshes, rules)]
    p0 = sp.bases[0].n_nodes
    q0 = rules[0][0].size
    total = 0.0
    for cells, pts in sp._quadrature_chunks([q0], coords):
        block = f_h.values[cells.start * p0:cells.stop * p0]
        diff = apply_all_axes(block, mats)
        if exact is not None:
            diff = diff - exact(t, *pts)
        w0 = wts[0][cells.start * q0:cells.stop * q0]
        total += float(np.einsum("ijkl,ijkl,i,j,k,l->", diff, diff, w0, wts[1], wts[2], wts[3]))
    return math.sqrt(total)


def l2_error_spatial(space: SpatialSpace, values: np.ndarray, exact: Optional[Callable], t: float,
                     mean_shift: bool = False) -> float:
    """L2 error of a scalar ``(N1, N2)`` or vector ``(2, N1, N2)`` field against ``exact(t, x1, x2)``."""
    xq, wq, Ve = space.basis.error_rule()
    coords = [m.physical_points(xq).ravel() for m in space.meshes]
    w = [np.tile(wq * 0.5 * m.h, m.n_cells) for m in space.meshes]
    W = w[0][:, None] * w[1][None, :]
    values = np.asarray(values, dtype=float)
    comps = values if values.ndim == 3 else values[None]
    ex = None
    if exact is not None:
        ex = np.asarray(exact(t, coords[0][:, None], coords[1][None, :]), dtype=float)
        ex = np.broadcast_to(ex, comps.shape[:1] + W.shape) if ex.ndim == 3 else np.broadcast_to(ex, W.shape)[None]
    total = 0.0
    area = float(W.sum())
    for c in range(comps.shape[0]):
        vq = apply_all_axes(comps[c], (Ve, Ve))
        e = ex[c] if ex is not None else 0.0
        d = vq - e
        if mean_shift:
            d = d - np.sum(d * W) / area
        total += float(np.sum(d * d * W))
    return math.sqrt(total)


@dataclass
class Conservation:
    mass: float
    momentum: np.ndarray
    energy: float


def conservation_report(state: State, spatial: SpatialSpace) -> Conservation:
    """Total mass, total momentum (particles plus fluid), and energy of a state."""
    sp = state.f.space
    mom = compute_moments(state.f)
    mass = float(np.sum(mom.rho * spatial.weights))
    momentum = np.array([np.sum((mom.momentum[i] + state.u[i]) * spatial.weights) for i in range(2)])
    v1, v2 = sp.nodes(2), sp.nodes(3)
    vv = (v1 * v1)[:, None] + (v2 * v2)[None, :]
    w_v = sp.weights(2)[:, None] * sp.weights(3)[None, :]
    kinetic = np.einsum("ijkl,kl->ij", state.f.values, vv * w_v)
    energy = float(np.sum(kinetic * spatial.weights) + np.sum(state.u * state.u * spatial.weights))
    return Conservation(mass, momentum, energy)


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    config: RunConfig
    h: float
    dt: float
    n_steps: int
    err_f: float
    err_u: float
    err_p: float
    series: list[dict]
    seconds: float
    mass_drift: float
    momentum_drift: float
    energy_growth: float
    stable: bool
    max_constraint_residual: float
    max_solver_residual: float
    final_state: State = field(repr=False)

    @property
    def relative_mass_drift(self) -> float:
        m0 = abs(self.series[0]["mass"])
        return self.mass_drift / max(1.0, m0)

    def assertions(self) -> dict[str, bool]:
        """Run-time checks whose failure makes the CLI exit non-zero."""
        out = {
            "stability": self.stable,
            "solver": self.max_solver_residual <= self.config.solver.tol,
            "saddle_constraint": self.max_constraint_residual <= 1e-9,
        }
        if self.config.mode == "conservation":
            out["mass"] = self.relative_mass_drift <= 1e-11
        return out


def run(config: RunConfig, series_path: Optional[Path] = None) -> RunResult:
    sim = Simulation(config)
    start = time.perf_counter()
    state = sim.initial_state()
    u_max = float(np.max(np.abs(state.u))) if state.u.size else 0.0
    dt, n_steps = choose_dt(config, sim.phase, u_max)
    logger.info("run %s: nx=%d nv=%d kx=%d kv=%d dt=%.3e steps=%d", config.case, config.nx, config.nv,
                config.kx, config.kv, dt, n_steps)

    norm0 = state.f.l2_norm()
    stable = True
    series = [_series_row(state, sim)]
    max_constraint = 0.0
    max_residual = 0.0
    for _ in range(n_steps):
        state = sim.step(state, dt)
        if not state.f.is_finite():
            raise FloatingPointError(f"non-finite distribution at t={state.t:.4g}")
        row = _series_row(state, sim)
        series.append(row)
        if row["l2_f"] > math.exp(STABILITY_RATE * state.t) * norm0 * (1 + 1e-12):
            stable = False
        max_constraint = max(max_constraint, state.constraint_residual)
        max_residual = max(max_residual, state.solver_residual)
    seconds = time.perf_counter() - start

    if config.mode == "mms":
        err_f = l2_error_phase(state.f, sim.case.f, state.t)
        err_u = l2_error_spatial(sim.spatial, state.u, sim.case.u, state.t)
        err_p = l2_error_spatial(sim.spatial, state.p, sim.case.p, state.t, mean_shift=True)
    else:
        err_f = err_u = err_p = float("nan")

    first, last = series[0], series[-1]
    mom0 = np.array([first["momentum_x"], first["momentum_y"]])
    mom1 = np.array([last["momentum_x"], last["momentum_y"]])
    result = RunResult(
        config=config,
        h=sim.phase.grid.h_x,
        dt=dt,
        n_steps=n_steps,
        err_f=err_f,
        err_u=err_u,
        err_p=err_p,
        series=series,
        seconds=seconds,
        mass_drift=abs(last["mass"] - first["mass"]),
        momentum_drift=float(np.max(np.abs(mom1 - mom0))),
        energy_growth=(last["energy"] - first["energy"]) / abs(first["energy"]) if first["energy"] else 0.0,
        stable=stable,
        max_constraint_residual=max_constraint,
        max_solver_residual=max_residual,
        final_state=state,
    )
    if series_path is not None:
        write_csv(series_path, SERIES_COLUMNS, series)
    return result


def _series_row(state: State, sim: Simulation) -> dict:
    c = conservation_report(state, sim.spatial)
    return {
        "t": state.t,
        "mass": c.mass,
        "momentum_x": float(c.momentum[0]),
        "momentum_y": float(c.momentum[1]),
        "energy": c.energy,
        "l2_f": state.f.l2_norm(),
        "solver_iters": state.solver_iters,
    }


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(value):
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return value


# ---------------------------------------------------------------- convergence


def observed_orders(errors: Sequence[float], ratio: float = 2.0) -> list[float]:
    """``log_ratio(e_i / e_{i+1})`` for consecutive refinements; NaN for the first row."""
    out = [float("nan")]
    for e0, e1 in zip(errors[:-1], errors[1:]):
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(ratio))
        else:
            out.append(float("nan"))
    return out


@dataclass
class ErrorReport:
    rows: list[dict]
    results: list[RunResult] = field(repr=False, default_factory=list)
    failed: Optional[str] = None

    @property
    def orders(self) -> dict[str, list[float]]:
        return {key: [r[f"order_{key}"] for r in self.rows] for key in ("f", "u", "p")}

    def final_orders(self) -> dict[str, float]:
        return {key: vals[-1] for key, vals in self.orders.items()}


def convergence_study(template: RunConfig, meshes: Sequence[int], csv_path: Optional[Path] = None) -> ErrorReport:
    """Run each mesh (same cell count in all four directions) and tabulate errors and orders."""
    meshes = list(meshes)
    if len(meshes) < 2:
        raise ConfigurationError("a convergence study needs at least two meshes")
    for a, b in zip(meshes[:-1], meshes[1:]):
        if b != 2 * a:
            raise ConfigurationError(f"meshes must refine by a factor 2, got {meshes}")
    results, failed = [], None
    for n in meshes:
        try:
            results.append(run(template.replace(nx=n, nv=n)))
        except Exception as exc:  # partial report is still written
            failed = f"n={n}: {exc}"
            logger.error("convergence run failed: %s", failed)
            break
    rows = [
        {"h": r.h, "errL2f": r.err_f, "errL2u": r.err_u, "errL2p": r.err_p, "seconds": r.seconds}
        for r in results
    ]
    for key, col in (("f", "errL2f"), ("u", "errL2u"), ("p", "errL2p")):
        for row, order in zip(rows, observed_orders([row[col] for row in rows])):
            row[f"order_{key}"] = order
    report = ErrorReport(rows, results, failed)
    if csv_path is not None:
        write_csv(csv_path, ERROR_COLUMNS, rows)
    return report
