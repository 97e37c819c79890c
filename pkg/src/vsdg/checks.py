"""Quick self-checks of the discrete identities, run by ``vsdg check``."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from vsdg.kinetic import PhaseField, PhaseSpace, compute_moments, spatial_transport_substep, upwind_flux, velocity_transport_substep
from vsdg.mms import CASES, eval_sources
from vsdg.stokes import SpatialSpace, StokesOperator, assemble_divergence, assemble_pressure_stab, assemble_sip


class CheckResult(NamedTuple):
    name: str
    passed: bool
    value: float
    limit: float


def _sip_symmetry(rng):
    A = assemble_sip(SpatialSpace.build(4, 2), 10.0)
    return abs(A - A.T).max(), 1e-12


def _divergence_forms(rng):
    sp = SpatialSpace.build(3, 2)
    u, w = rng.standard_normal(2 * sp.n_scalar), rng.standard_normal(sp.n_scalar)
    a = w @ (assemble_divergence(sp, "primal") @ u)
    b = w @ (assemble_divergence(sp, "ibp") @ u)
    return abs(a - b) / max(1.0, abs(a)), 1e-12


def _stab_psd(rng):
    S = assemble_pressure_stab(SpatialSpace.build(3, 1)).toarray()
    asym = np.abs(S - S.T).max()
    return max(asym, -min(0.0, np.linalg.eigvalsh(S).min())), 1e-13


def _flux_identities(rng):
    a, fl, fr = rng.standard_normal((3, 1000))
    consistency = np.abs(upwind_flux(a, fl, fl) - a * fl).max()
    conservation = np.abs(upwind_flux(a, fl, fr) + upwind_flux(-a, fr, fl)).max()
    return max(consistency, conservation), 0.0


def _mass_conservation(rng):
    sp = PhaseSpace.build(nx=2, nv=2, kx=1, kv=1)
    f = PhaseField(rng.standard_normal(sp.shape), sp)
    u = rng.uniform(-1, 1, (2,) + sp.spatial_shape)
    g = spatial_transport_substep(velocity_transport_substep(f, u, None, 0.0, 0.01), 0.01)
    return abs(g.mass() - f.mass()) / max(1.0, abs(f.mass())), 1e-12


def _moment_linearity(rng):
    sp = PhaseSpace.build(nx=2, nv=2, kx=1, kv=1)
    f, g = rng.standard_normal((2,) + sp.shape)
    alpha, beta = rng.uniform(-3, 3, 2)
    lhs = compute_moments(PhaseField(alpha * f + beta * g, sp))
    mf, mg = compute_moments(PhaseField(f, sp)), compute_moments(PhaseField(g, sp))
    d1 = np.abs(lhs.rho - alpha * mf.rho - beta * mg.rho).max()
    d2 = np.abs(lhs.momentum - alpha * mf.momentum - beta * mg.momentum).max()
    return max(d1, d2), 1e-13


def _saddle_residual(rng):
    sp = SpatialSpace.build(4, 1)
    op = StokesOperator(sp)
    q = sp.quad_points[0].size
    res = op.step(rng.standard_normal((2,) + sp.shape), rng.uniform(0, 1, sp.shape), rng.standard_normal((2, q, q)), 0.01)
    return max(res.constraint_residual, abs(sp.mean(res.p)) * 1e3), 1e-9


def _sources_finite(rng):
    pts = rng.uniform(0, 1, (3, 50))
    v = rng.uniform(-1, 1, (2, 50))
    worst = 0.0
    for name in CASES:
        F, G = eval_sources(name, 0.1, pts[0], pts[1], v[0], v[1])
        worst = max(worst, 0.0 if np.all(np.isfinite(F)) and np.all(np.isfinite(G)) else np.inf)
    return worst, 0.0


CHECKS: dict[str, Callable] = {
    "sip_symmetry": _sip_symmetry,
    "divergence_forms_agree": _divergence_forms,
    "stabilization_spsd": _stab_psd,
    "flux_consistency_conservativity": _flux_identities,
    "mass_conservation": _mass_conservation,
    "moment_linearity": _moment_linearity,
    "saddle_constraint": _saddle_residual,
    "sources_finite": _sources_finite,
}


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS.items():
        value, limit = fn(rng)
        out.append(CheckResult(name, bool(value <= limit), float(value), float(limit)))
    return out
