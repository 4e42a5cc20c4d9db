"""
Experiment Config Module

Parses and validates experiment definition files. One experiment per file,
plain `key = value` lines, `#` starts a comment, and `schema_version = 1`
is required. Example:

    schema_version = 1
    name = sp_5x5_deg4
    problem = shortest_path
    grid = 5, 5
    n_train = 1000
    p = 5
    deg = 4
    noise_width = 0.5
    methods = 2s-lr, spo+, pfyl
    repetitions = 5

Validation collects every violation before failing.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

try:
    from .decision_losses import DownstreamLoss
    from .errors import ConfigValidationError
    from .import_utils import get_setting
    from .shortest_path_solver import GridSpec, grid_lp, grid_shortest_path_solve
except ImportError:
    from src.decision_losses import DownstreamLoss
    from src.errors import ConfigValidationError
    from src.import_utils import get_setting
    from src.shortest_path_solver import GridSpec, grid_lp, grid_shortest_path_solve

logger = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
PROBLEMS = ("shortest_path", "knapsack", "tsp")
TWO_STAGE_METHODS = ("2s-lr", "2s-knn", "2s-rf")
# methods that train on a downstream loss of their layer output
DOWNSTREAM_BASES = ("dbb", "dpo")
SGD_BASES = ("spo+", "dbb", "pfyl", "dpo", "2s-sgd")
VARIANTS = {
    "spo+": ("", "-rel", "-l1", "-l2"),
    "dbb": ("", "-rel", "-l1", "-l2"),
    "pfyl": ("", "-rel", "-l1", "-l2"),
    "dpo": ("",),
    "2s-sgd": ("",),
}
# roster of accepted method names
METHODS = TWO_STAGE_METHODS + tuple(b + v for b, vs in VARIANTS.items() for v in vs)


@dataclass(frozen=True)
class MethodSpec:
    """A roster entry split into its base method and variant."""
    name: str
    base: str
    relaxed: bool = False
    regularizer: Optional[str] = None

    @property
    def is_two_stage(self) -> bool:
        return self.base in TWO_STAGE_METHODS


def parse_method(name: str) -> MethodSpec:
    if name not in METHODS:
        raise ValueError(f"unknown method '{name}' (known: {', '.join(METHODS)})")
    if name in TWO_STAGE_METHODS:
        return MethodSpec(name=name, base=name)
    for base in VARIANTS:
        if name == base:
            return MethodSpec(name=name, base=base)
        if name.startswith(base + "-"):
            suffix = name[len(base) + 1:]
            if suffix == "rel":
                return MethodSpec(name=name, base=base, relaxed=True)
            return MethodSpec(name=name, base=base, regularizer=suffix)
    raise ValueError(f"unknown method '{name}'")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    methods: Tuple[str, ...]
    name: str = "experiment"
    schema_version: int = CONFIG_SCHEMA_VERSION
    grid: Optional[Tuple[int, int]] = None
    num_items: Optional[int] = None
    num_resources: Optional[int] = None
    capacity: float = 20.0
    num_nodes: Optional[int] = None
    tsp_formulation: str = "mtz"
    n_train: int = 1000
    n_test: int = 1000
    n_val: int = 0
    p: int = 5
    deg: int = 1
    noise_width: float = 0.0
    lambd: float = 15.0
    n_samples: int = 1
    sigma: float = 1.0
    downstream: Optional[str] = None
    phi1: float = 0.0
    phi2: float = 0.0
    phi_sweep: Tuple[float, ...] = ()
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 20
    repetitions: int = 1
    seed: int = 0
    workers: int = 1
    unambiguous: bool = False
    select_best: bool = False
    timing_epochs: int = 2

    @property
    def method_specs(self) -> List[MethodSpec]:
        return [parse_method(m) for m in self.methods]

    def fingerprint(self) -> str:
        """Hash of every field except the execution-only ones (workers, name)."""
        payload = {k: v for k, v in asdict(self).items() if k not in ("workers", "name")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]

    def to_text(self) -> str:
        """Echo in the file format; parsing it back gives an equal config."""
        lines = []
        for key, value in asdict(self).items():
            if value is None or value == ():
                continue
            if key == "lambd":
                key = "lambda"
            if isinstance(value, (tuple, list)):
                value = ", ".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _defaults() -> Dict[str, Any]:
    """Field defaults, taking the training defaults from settings."""
    return {
        "lambd": float(get_setting("DEFAULT_LAMBDA", 15.0)),
        "n_samples": int(get_setting("DEFAULT_N_SAMPLES", 1)),
        "sigma": float(get_setting("DEFAULT_SIGMA", 1.0)),
        "lr": float(get_setting("DEFAULT_LR", 0.01)),
        "momentum": float(get_setting("DEFAULT_MOMENTUM", 0.9)),
        "batch_size": int(get_setting("DEFAULT_BATCH_SIZE", 32)),
        "epochs": int(get_setting("DEFAULT_EPOCHS", 20)),
        "workers": int(get_setting("DEFAULT_WORKERS", 1)),
    }


def _to_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got '{text}'")


def _to_list(cast: Callable[[str], Any]) -> Callable[[str], Tuple[Any, ...]]:
    return lambda text: tuple(cast(part.strip()) for part in text.split(",") if part.strip())


def _to_downstream(text: str) -> str:
    known = [k.value for k in DownstreamLoss]
    value = text.strip().lower()
    if value not in known:
        raise ValueError(f"expected one of {', '.join(known)}, got '{text}'")
    return value


PARSERS: Dict[str, Callable[[str], Any]] = {
    "schema_version": int,
    "name": str,
    "problem": str,
    "grid": _to_list(int),
    "num_items": int,
    "num_resources": int,
    "capacity": float,
    "num_nodes": int,
    "tsp_formulation": str,
    "n_train": int,
    "n_test": int,
    "n_val": int,
    "p": int,
    "deg": int,
    "noise_width": float,
    "methods": _to_list(str),
    "lambda": float,
    "n_samples": int,
    "sigma": float,
    "downstream": _to_downstream,
    "phi1": float,
    "phi2": float,
    "phi_sweep": _to_list(float),
    "lr": float,
    "momentum": float,
    "batch_size": int,
    "epochs": int,
    "repetitions": int,
    "seed": int,
    "workers": int,
    "unambiguous": _to_bool,
    "select_best": _to_bool,
    "timing_epochs": int,
}


def read_key_values(text: str) -> Tuple[Dict[str, str], List[str]]:
    """Raw key/value pairs plus syntax errors (line-numbered)."""
    values: Dict[str, str] = {}
    errors: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            errors.append(f"line {lineno}: duplicate key '{key}'")
        values[key] = value
    return values, errors


def _grid_relaxation_note(grid: Tuple[int, int]) -> str:
    """Integrality evidence for the grid flow LP on one random cost vector."""
    spec = GridSpec(*grid)
    cost = np.random.default_rng(0).uniform(0.0, 1.0, spec.num_arcs)
    lp = grid_lp(spec, cost)
    dp = grid_shortest_path_solve(spec, cost)
    return f"LP objective {lp.objective:.6f} equals DP objective {dp.objective:.6f}"


def _check_ranges(cfg: Dict[str, Any], errors: List[str]) -> None:
    def need(cond: bool, message: str) -> None:
        if not cond:
            errors.append(message)

    need(cfg["n_train"] >= 1, "n_train must be at least 1")
    need(cfg["n_test"] >= 1, "n_test must be at least 1")
    need(cfg["n_val"] >= 0, "n_val must be nonnegative")
    need(cfg["p"] >= 1, "p must be at least 1")
    need(cfg["deg"] >= 1, "deg must be at least 1")
    need(0.0 <= cfg["noise_width"] < 1.0, "noise_width must lie in [0, 1)")
    need(cfg["lr"] > 0, "lr must be positive")
    need(0.0 <= cfg["momentum"] < 1.0, "momentum must lie in [0, 1)")
    need(cfg["batch_size"] >= 1, "batch_size must be at least 1")
    need(cfg["epochs"] >= 1, "epochs must be at least 1")
    need(cfg["repetitions"] >= 1, "repetitions must be at least 1")
    need(cfg["workers"] >= 1, "workers must be at least 1")
    need(cfg["timing_epochs"] >= 1, "timing_epochs must be at least 1")
    need(cfg["phi1"] >= 0 and cfg["phi2"] >= 0, "phi1 and phi2 must be nonnegative")
    need(all(v > 0 for v in cfg["phi_sweep"]), "phi_sweep values must be positive")


def _check_problem(cfg: Dict[str, Any], errors: List[str]) -> None:
    problem = cfg["problem"]
    if problem not in PROBLEMS:
        errors.append(f"problem must be one of {', '.join(PROBLEMS)}, got '{problem}'")
    elif problem == "shortest_path":
        grid = cfg.get("grid")
        if grid is None or len(grid) != 2 or min(grid) < 2:
            errors.append("shortest_path needs grid = h, w with h, w >= 2")
    elif problem == "knapsack":
        if not cfg.get("num_items") or cfg["num_items"] < 1:
            errors.append("knapsack needs num_items >= 1")
        if not cfg.get("num_resources") or cfg["num_resources"] < 1:
            errors.append("knapsack needs num_resources >= 1")
        if cfg["capacity"] <= 0:
            errors.append("capacity must be positive")
    else:
        nodes = cfg.get("num_nodes")
        limit = int(get_setting("TSP_EXACT_LIMIT", 18))
        if nodes is None or not 3 <= nodes <= limit:
            errors.append(f"tsp needs 3 <= num_nodes <= {limit}")
        if cfg["tsp_formulation"] not in ("mtz", "gg"):
            errors.append("tsp_formulation must be mtz or gg")


def _check_methods(cfg: Dict[str, Any], errors: List[str]) -> None:
    methods = cfg["methods"]
    if not methods:
        errors.append("methods must list at least one method")
    specs = []
    for name in methods:
        try:
            specs.append(parse_method(name))
        except ValueError as e:
            errors.append(str(e))
    problem = cfg["problem"]

    for spec in specs:
        if spec.relaxed:
            if problem == "shortest_path" and cfg.get("grid") and len(cfg["grid"]) == 2 and min(cfg["grid"]) >= 2:
                errors.append(
                    f"{spec.name}: shortest_path has no distinct relaxation, its flow LP is integral "
                    f"({_grid_relaxation_note(tuple(cfg['grid']))})"
                )
            elif problem == "shortest_path":
                errors.append(f"{spec.name}: shortest_path has no distinct relaxation")
            elif problem == "tsp" and (cfg.get("num_nodes") or 0) > int(get_setting("TSP_LP_LIMIT", 12)):
                errors.append(f"{spec.name}: TSP relaxation is limited to {get_setting('TSP_LP_LIMIT', 12)} nodes")
        if spec.regularizer == "l1" and not cfg["phi_sweep"] and cfg["phi1"] <= 0:
            errors.append(f"{spec.name}: phi1 must be positive")
        if spec.regularizer == "l2" and not cfg["phi_sweep"] and cfg["phi2"] <= 0:
            errors.append(f"{spec.name}: phi2 must be positive")

    bases = {s.base for s in specs}
    if "dbb" in bases and not cfg["lambd"] > 0:
        errors.append("lambda must be positive")
    if bases & {"dpo", "pfyl"}:
        if cfg["n_samples"] < 1:
            errors.append("n_samples must be at least 1")
        if not cfg["sigma"] > 0:
            errors.append("sigma must be positive")
    if cfg.get("downstream"):
        _check_downstream(cfg, specs, errors)
    if cfg["phi_sweep"] and not any(s.regularizer for s in specs):
        errors.append("phi_sweep needs at least one -l1 or -l2 method")
    if cfg["select_best"] and cfg["n_val"] < 1:
        errors.append("select_best needs n_val >= 1")


def _check_downstream(cfg: Dict[str, Any], specs: List[MethodSpec], errors: List[str]) -> None:
    trained = [s for s in specs if s.base in DOWNSTREAM_BASES]
    if not trained:
        errors.append("downstream applies only to dbb and dpo methods")
    if cfg["downstream"] != DownstreamLoss.HAMMING.value:
        return
    for spec in trained:
        # relaxed and averaged outputs can be fractional
        if spec.relaxed:
            errors.append(f"{spec.name}: hamming needs binary decisions, relaxed solutions can be fractional")
        elif spec.base == "dpo" and cfg["n_samples"] > 1:
            errors.append(f"{spec.name}: hamming needs binary decisions, dpo averages n_samples > 1 solutions")


def _check_unambiguous(cfg: Dict[str, Any], errors: List[str]) -> None:
    if not cfg["unambiguous"]:
        return
    problem = cfg["problem"]
    if problem == "shortest_path" and cfg.get("grid"):
        if max(cfg["grid"]) > int(get_setting("GRID_ENUMERATION_LIMIT", 8)):
            errors.append("unambiguous regret: grid is above the enumeration limit")
    elif problem == "knapsack" and cfg.get("num_items"):
        if cfg["num_items"] > int(get_setting("KNAPSACK_ENUMERATION_LIMIT", 20)):
            errors.append("unambiguous regret: knapsack has too many items to enumerate")
    elif problem == "tsp" and cfg.get("num_nodes"):
        if cfg["num_nodes"] > int(get_setting("TSP_ENUMERATION_LIMIT", 9)):
            errors.append("unambiguous regret: too many TSP nodes to enumerate")


def parse_config(text: str, name: Optional[str] = None) -> ExperimentConfig:
    """
    Parse and validate config text.

    Raises:
        ConfigValidationError: with every violation found
    """
    raw, errors = read_key_values(text)
    values: Dict[str, Any] = _defaults()
    if name:
        values["name"] = name

    for key, text_value in raw.items():
        parser = PARSERS.get(key)
        if parser is None:
            errors.append(f"unknown key '{key}'")
            continue
        try:
            values["lambd" if key == "lambda" else key] = parser(text_value)
        except ValueError as e:
            errors.append(f"{key}: {e}")

    if "schema_version" not in raw:
        errors.append("schema_version is required")
    elif values.get("schema_version") != CONFIG_SCHEMA_VERSION:
        errors.append(f"schema_version must be {CONFIG_SCHEMA_VERSION}")
    for required in ("problem", "methods"):
        if required not in values:
            errors.append(f"{required} is required")
    if errors:
        raise ConfigValidationError(errors)

    defaults = ExperimentConfig(problem=values["problem"], methods=tuple(values["methods"]))
    merged = {**asdict(defaults), **values}
    _check_ranges(merged, errors)
    _check_problem(merged, errors)
    _check_methods(merged, errors)
    _check_unambiguous(merged, errors)
    if errors:
        raise ConfigValidationError(errors)
    if merged.get("grid") is not None:
        merged["grid"] = tuple(merged["grid"])
    return ExperimentConfig(**merged)


def validate_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a config file.

    Raises:
        ConfigValidationError: unreadable file or any violation (all listed)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError([f"cannot read {path}: {e}"]) from e
    return parse_config(text, name=path.stem if path.stem else None)
