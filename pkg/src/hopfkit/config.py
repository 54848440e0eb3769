"""YAML run configuration: where the problem comes from, solver tolerances, seed.

A config file looks like::

    problem: log-example            # a catalog name, or a mapping:
    # problem:
    #   catalog: log-example
    #   params: {radius: 1.0}
    # problem:
    #   hamiltonian: "-ln(1 + p^2)"
    #   initial: "x^2/2"
    #   lipschitz: 4
    #   horizon: 3
    #   dim: 1
    #   semiconvexity: 2
    #   semiconcavity: 1
    options: {grid_nodes: 2001, singleton_tol: 0.004}
    seed: 0
    workers: 1
    defaults: {window: [-3, 3], nodes: 201}

``defaults`` seeds command-line flags; flags given explicitly win.
Expression problems get a numerically computed conjugate.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigurationError
from .expressions import Expression
from .hopf import SolveOptions
from .problem import ProblemSpec, catalog_lookup

DEFAULT_SEED = 20240517
_TOP_KEYS = {"problem", "options", "seed", "workers", "defaults"}
_PROBLEM_KEYS = {"catalog", "params", "dim", "hamiltonian", "initial", "lipschitz", "horizon",
                 "semiconvexity", "semiconcavity", "name"}


@dataclass
class RunConfig:
    problem: Optional[object] = None  # catalog name or mapping, resolved by build_problem
    options: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    workers: Optional[int] = None
    defaults: dict = field(default_factory=dict)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {str(path)!r}: {exc}") from None
    return parse_config(raw)


def parse_config(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(problem=raw.get("problem"))
    cfg.options = dict(raw.get("options") or {})
    options_from(cfg.options)  # fail early on bad tolerances
    if "seed" in raw:
        if not isinstance(raw["seed"], int):
            raise ConfigurationError("seed must be an integer")
        cfg.seed = raw["seed"]
    if raw.get("workers") is not None:
        cfg.workers = int(raw["workers"])
    cfg.defaults = dict(raw.get("defaults") or {})
    return cfg


def options_from(overrides: dict, base: SolveOptions = SolveOptions()) -> SolveOptions:
    """Apply tolerance overrides; every tolerance must be strictly positive."""
    names = {f.name for f in dataclasses.fields(SolveOptions)}
    bad = set(overrides) - names
    if bad:
        raise ConfigurationError(f"unknown solver options: {sorted(bad)}")
    clean = {}
    for k, v in overrides.items():
        if v is None:
            continue
        if k in ("grid_nodes", "max_starts"):
            if int(v) != v or v < 3:
                raise ConfigurationError(f"{k} must be an integer >= 3")
            clean[k] = int(v)
        else:
            if not float(v) > 0:
                raise ConfigurationError(f"{k} must be strictly positive")
            clean[k] = float(v)
    return dataclasses.replace(base, **clean)


def build_problem(entry, dim: int = 1) -> ProblemSpec:
    """Resolve a catalog name or a problem mapping into a :class:`ProblemSpec`."""
    if entry is None:
        raise ConfigurationError("no problem given (use --problem or a config file)")
    if isinstance(entry, str):
        return catalog_lookup(entry, dim=dim)
    if not isinstance(entry, dict):
        raise ConfigurationError("problem must be a catalog name or a mapping")
    unknown = set(entry) - _PROBLEM_KEYS
    if unknown:
        raise ConfigurationError(f"unknown problem keys: {sorted(unknown)}")
    dim = int(entry.get("dim", dim))
    if "catalog" in entry:
        return catalog_lookup(entry["catalog"], dim=dim, **(entry.get("params") or {}))
    for key in ("hamiltonian", "initial", "lipschitz", "horizon"):
        if key not in entry:
            raise ConfigurationError(f"expression problem needs {key!r}")
    H = Expression(str(entry["hamiltonian"]), dim, letters=("p",))
    sigma = Expression(str(entry["initial"]), dim, letters=("x", "y"))
    return ProblemSpec(
        dim=dim,
        horizon=float(entry["horizon"]),
        hamiltonian=H,
        hamiltonian_grad=H.grad,
        initial=sigma,
        initial_grad=sigma.grad,
        lipschitz_bound=float(entry["lipschitz"]),
        semiconvexity=_opt_float(entry.get("semiconvexity")),
        semiconcavity=_opt_float(entry.get("semiconcavity")),
        name=str(entry.get("name", "custom")),
        description=f"H = {H.text}, sigma = {sigma.text}",
    )


def _opt_float(v):
    return None if v is None else float(v)
