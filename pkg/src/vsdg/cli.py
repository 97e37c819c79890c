"""Command line: ``vsdg run``, ``vsdg converge`` and ``vsdg check``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from vsdg.checks import run_checks
from vsdg.config import apply_overrides, load_config
from vsdg.driver import convergence_study, run
from vsdg.grid import ConfigurationError
from vsdg.linalg import SolverError


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", type=Path, help="YAML configuration file")
    p.add_argument("--case")
    p.add_argument("--nx", type=int)
    p.add_argument("--nv", type=int)
    p.add_argument("--kx", type=int)
    p.add_argument("--kv", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--penalty", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--mode", choices=["mms", "conservation"])
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--solver-method", dest="solver.method", choices=["gmres", "direct", "dense"])
    p.add_argument("--solver-tol", dest="solver.tol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsdg", description="dG solver for the Vlasov-Stokes system")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_overrides(sub.add_parser("run", help="run one simulation"))
    conv = sub.add_parser("converge", help="mesh-refinement study")
    _add_overrides(conv)
    conv.add_argument("--meshes", default="4,8,16", help="comma-separated cell counts, each twice the previous")
    chk = sub.add_parser("check", help="run the discrete-identity self-checks")
    chk.add_argument("--seed", type=int, default=0)
    return parser


def _config(args):
    keys = ("case", "nx", "nv", "kx", "kv", "L", "penalty", "T", "dt", "cfl", "mode", "output_dir",
            "solver.method", "solver.tol")
    return apply_overrides(load_config(args.config), {k: getattr(args, k) for k in keys})


def _output_dir(config) -> Optional[Path]:
    if config.output_dir is None:
        return None
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report(checks: dict[str, bool]) -> bool:
    for name, ok in checks.items():
        print(f"  {name}: {'ok' if ok else 'FAILED'}")
    return all(checks.values())


def cmd_run(args) -> int:
    config = _config(args)
    out = _output_dir(config)
    result = run(config, series_path=out / "series.csv" if out else None)
    print(f"case={config.case} nx={config.nx} nv={config.nv} kx={config.kx} kv={config.kv} "
          f"dt={result.dt:.4e} steps={result.n_steps} time={result.seconds:.1f}s")
    if config.mode == "mms":
        print(f"errL2f={result.err_f:.6e} errL2u={result.err_u:.6e} errL2p={result.err_p:.6e}")
    print(f"relative mass drift={result.relative_mass_drift:.3e} momentum drift={result.momentum_drift:.3e}")
    return 0 if _report(result.assertions()) else 1


def cmd_converge(args) -> int:
    config = _config(args)
    meshes = [int(m) for m in args.meshes.split(",") if m.strip()]
    out = _output_dir(config)
    report = convergence_study(config, meshes, csv_path=out / "errors.csv" if out else None)
    print(f"{'h':>10} {'errL2f':>12} {'errL2u':>12} {'errL2p':>12} {'ord_f':>6} {'ord_u':>6} {'ord_p':>6}")
    for row in report.rows:
        orders = " ".join(f"{row[f'order_{k}']:6.2f}" for k in "fup")
        print(f"{row['h']:10.4g} {row['errL2f']:12.4e} {row['errL2u']:12.4e} {row['errL2p']:12.4e} {orders}")
    checks = {}
    for n, r in zip(meshes, report.results):
        for name, ok in r.assertions().items():
            checks[f"n={n} {name}"] = ok
    if report.failed:
        print(f"run failed: {report.failed}")
        checks["all runs completed"] = False
    return 0 if _report(checks) else 1


def cmd_check(args) -> int:
    results = run_checks(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (limit {r.limit:.0e})")
    return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "converge": cmd_converge, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
