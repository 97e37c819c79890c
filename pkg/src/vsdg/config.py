"""Run configuration files (YAML) and command-line overrides."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from vsdg.driver import RunConfig
from vsdg.grid import ConfigurationError
from vsdg.linalg import SolverConfig

TOP_KEYS = ("case", "nx", "nv", "kx", "kv", "L", "penalty", "T", "dt", "cfl", "output_dir", "mode")
SOLVER_KEYS = ("method", "tol", "max_iter", "restart", "preconditioner")
_TYPES = {"nx": int, "nv": int, "kx": int, "kv": int, "L": float, "penalty": float, "T": float, "dt": float, "cfl": float}


def config_from_mapping(data: Optional[Mapping[str, Any]]) -> RunConfig:
    data = dict(data or {})
    unknown = set(data) - set(TOP_KEYS) - {"solver", "n"}
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
    if "dt" in data and "cfl" in data and data["dt"] is not None:
        raise ConfigurationError("give either dt or cfl, not both")
    kwargs: dict[str, Any] = {}
    if "n" in data:  # shorthand: same cell count in x and v
        kwargs["nx"] = kwargs["nv"] = int(data.pop("n"))
    for key in TOP_KEYS:
        if key in data and data[key] is not None:
            kwargs[key] = _TYPES.get(key, lambda x: x)(data[key])
    solver = data.get("solver") or {}
    if not isinstance(solver, Mapping):
        raise ConfigurationError("solver must be a mapping")
    bad = set(solver) - set(SOLVER_KEYS)
    if bad:
        raise ConfigurationError(f"unknown solver keys: {sorted(bad)}")
    kwargs["solver"] = SolverConfig(**solver)
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, Mapping):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return config_from_mapping(data)


def apply_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Replace keys whose override value is not None; ``solver.*`` keys are dotted."""
    changes: dict[str, Any] = {}
    solver_changes = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key.startswith("solver."):
            solver_changes[key.split(".", 1)[1]] = value
        elif key in TOP_KEYS:
            changes[key] = _TYPES.get(key, lambda x: x)(value)
        else:
            raise ConfigurationError(f"unknown override {key!r}")
    if "cfl" in changes and "dt" not in changes:
        changes["dt"] = None
    if solver_changes:
        s = config.solver
        changes["solver"] = SolverConfig(**{**{k: getattr(s, k) for k in SOLVER_KEYS}, **solver_changes})
    return config.replace(**changes) if changes else config
