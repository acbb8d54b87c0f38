"""Experiment configuration: strict YAML ingestion.

The config file is a single YAML document with nested blocks.  Unknown
keys are rejected with their dotted path, scalar violations are reported
with the offending field name, and YAML syntax errors carry line/column.
Silent typos in step sizes or temperatures invalidate scientific runs,
hence the strictness.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .dynamics import (
    ConstantSchedule,
    LogarithmicSchedule,
    PolynomialSchedule,
    TemperatureSchedule,
)
from .errors import ConfigError
from .functionals import (
    CosineSeriesKernel,
    KernelMMDObjective,
    ObjectiveContract,
    TwoLayerNNObjective,
    cosine_potential,
    quadratic_potential,
)
from .grid_oracle import FixedPointConfig
from .measures import load_snapshot, torus


# ---------------------------------------------------------------------------
# schema helpers
# ---------------------------------------------------------------------------

def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return node

def _check_keys(node: dict, allowed: set[str], path: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key: {path}.{key}" if path else f"unknown key: {key}")

def _get(node: dict, key: str, path: str, required: bool = True, default=None):
    if key not in node:
        if required:
            raise ConfigError(f"missing key: {path}.{key}")
        return default
    return node[key]

def _number(node: dict, key: str, path: str, required=True, default=None,
            minimum=None, strict_min=None) -> Optional[float]:
    val = _get(node, key, path, required, default)
    if val is None:
        return None
    if isinstance(val, str):
        # YAML 1.1 resolves "1e-13" (no decimal point) as a string
        try:
            val = float(val)
        except ValueError:
            raise ConfigError(f"{path}.{key} must be a number") from None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    val = float(val)
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key} must be >= {minimum}")
    if strict_min is not None and val <= strict_min:
        raise ConfigError(f"{path}.{key} must be > {strict_min}")
    return val

def _integer(node: dict, key: str, path: str, required=True, default=None,
             minimum=None) -> Optional[int]:
    val = _get(node, key, path, required, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{key} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key} must be >= {minimum}")
    return val

def _string(node: dict, key: str, path: str, required=True, default=None,
            choices=None) -> Optional[str]:
    val = _get(node, key, path, required, default)
    if val is None:
        return None
    if not isinstance(val, str):
        raise ConfigError(f"{path}.{key} must be a string")
    if choices and val not in choices:
        raise ConfigError(f"{path}.{key} must be one of {sorted(choices)}")
    return val


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------

def parse_schedule(node, path: str) -> TemperatureSchedule:
    node = _require_mapping(node, path)
    kind = _string(node, "kind", path, choices={"constant", "logarithmic", "polynomial"})
    try:
        if kind == "constant":
            _check_keys(node, {"kind", "tau"}, path)
            return ConstantSchedule(_number(node, "tau", path, minimum=0.0))
        if kind == "logarithmic":
            _check_keys(node, {"kind", "alpha", "t0"}, path)
            return LogarithmicSchedule(
                _number(node, "alpha", path, strict_min=0.0),
                _number(node, "t0", path, strict_min=1.0),
            )
        _check_keys(node, {"kind", "c", "beta", "cutoff"}, path)
        return PolynomialSchedule(
            _number(node, "c", path, minimum=0.0),
            _number(node, "beta", path, minimum=0.0),
            _number(node, "cutoff", path, minimum=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class RunBlock:
    m: int
    eta: float
    steps: int
    checkpoint_every: int
    snapshot_every: int
    init: str
    schedule: TemperatureSchedule


def parse_run_block(node, path: str = "run") -> RunBlock:
    node = _require_mapping(node, path)
    _check_keys(node, {"m", "eta", "steps", "checkpoint_every", "snapshot_every",
                       "init", "schedule"}, path)
    init = _string(node, "init", path, required=False, default="uniform")
    if not (init in ("uniform",) or init.startswith(("gaussian:", "snapshot:"))):
        raise ConfigError(f"{path}.init must be uniform, gaussian:<sigma> or snapshot:<path>")
    return RunBlock(
        m=_integer(node, "m", path, minimum=1),
        eta=_number(node, "eta", path, strict_min=0.0),
        steps=_integer(node, "steps", path, minimum=0),
        checkpoint_every=_integer(node, "checkpoint_every", path, required=False,
                                  default=10, minimum=1),
        snapshot_every=_integer(node, "snapshot_every", path, required=False,
                                default=0, minimum=0),
        init=init,
        schedule=parse_schedule(_get(node, "schedule", path), f"{path}.schedule"),
    )


@dataclass(frozen=True)
class OracleBlock:
    n_grid: int
    dt: Optional[float]  # None = largest stable step
    t_end: float
    record_every: int
    schedule: TemperatureSchedule
    init: str
    fixed_point: FixedPointConfig
    snapshot_every: int


def parse_oracle_block(node, path: str = "oracle") -> OracleBlock:
    node = _require_mapping(node, path)
    _check_keys(node, {"n_grid", "dt", "t_end", "record_every", "tau", "schedule",
                       "init", "fixed_point", "snapshot_every"}, path)
    if ("tau" in node) == ("schedule" in node):
        raise ConfigError(f"{path}: give exactly one of tau or schedule")
    if "tau" in node:
        schedule = ConstantSchedule(_number(node, "tau", path, minimum=0.0))
    else:
        schedule = parse_schedule(node["schedule"], f"{path}.schedule")
    dt = node.get("dt", "auto")
    if dt == "auto":
        dt_val = None
    elif isinstance(dt, (int, float)) and not isinstance(dt, bool) and dt > 0:
        dt_val = float(dt)
    else:
        raise ConfigError(f"{path}.dt must be a positive number or 'auto'")
    init = _string(node, "init", path, required=False, default="uniform")
    if not (init == "uniform" or init.startswith("snapshot:")):
        raise ConfigError(f"{path}.init must be uniform or snapshot:<path>")
    fp_node = node.get("fixed_point", {})
    fp_path = f"{path}.fixed_point"
    fp_node = _require_mapping(fp_node, fp_path)
    _check_keys(fp_node, {"damping", "tol", "max_iter"}, fp_path)
    try:
        fixed_point = FixedPointConfig(
            damping=_number(fp_node, "damping", fp_path, required=False, default=0.5),
            tol=_number(fp_node, "tol", fp_path, required=False, default=1e-12),
            max_iter=_integer(fp_node, "max_iter", fp_path, required=False, default=2000),
        )
    except ValueError as exc:
        raise ConfigError(f"{fp_path}: {exc}") from None
    return OracleBlock(
        n_grid=_integer(node, "n_grid", path, minimum=2),
        dt=dt_val,
        t_end=_number(node, "t_end", path, minimum=0.0),
        record_every=_integer(node, "record_every", path, required=False,
                              default=1, minimum=1),
        schedule=schedule,
        init=init,
        fixed_point=fixed_point,
        snapshot_every=_integer(node, "snapshot_every", path, required=False,
                                default=0, minimum=0),
    )


def parse_objective(node, path: str = "objective") -> ObjectiveContract:
    node = _require_mapping(node, path)
    kind = _string(node, "kind", path, choices={"kmmd", "linear", "two_layer_nn"})
    if kind == "kmmd":
        _check_keys(node, {"kind", "n_freq", "target"}, path)
        n_freq = _integer(node, "n_freq", path, required=False, default=5, minimum=1)
        target_path = _string(node, "target", path)
        try:
            target = load_snapshot(target_path)
        except OSError as exc:
            raise ConfigError(f"{path}.target: cannot read {target_path}: {exc}") from None
        try:
            return KernelMMDObjective(CosineSeriesKernel(n_freq), target)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if kind == "linear":
        potential = _string(node, "potential", path, choices={"quadratic", "cosine"})
        if potential == "quadratic":
            _check_keys(node, {"kind", "potential", "lam", "dim"}, path)
            return quadratic_potential(
                _number(node, "lam", path, strict_min=0.0),
                _integer(node, "dim", path, minimum=1),
            )
        _check_keys(node, {"kind", "potential", "amplitude", "dim"}, path)
        return cosine_potential(
            _number(node, "amplitude", path),
            torus(_integer(node, "dim", path, minimum=1)),
        )
    _check_keys(node, {"kind", "dataset", "loss", "weight_decay", "feature_bound"}, path)
    dataset_path = _string(node, "dataset", path)
    try:
        zs, ys = load_dataset(dataset_path)
    except OSError as exc:
        raise ConfigError(f"{path}.dataset: cannot read {dataset_path}: {exc}") from None
    try:
        return TwoLayerNNObjective(
            zs, ys,
            loss=_string(node, "loss", path, choices={"square", "logistic"}),
            weight_decay=_number(node, "weight_decay", path, strict_min=0.0),
            feature_bound=_number(node, "feature_bound", path, required=False,
                                  default=1.0, strict_min=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# dataset file: header "N n", then rows of n inputs and one label
# ---------------------------------------------------------------------------

def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        lines = fh.read().strip().splitlines()
    n_rows, n_inputs = (int(v) for v in lines[0].split())
    rows = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + n_rows]])
    if rows.shape != (n_rows, n_inputs + 1):
        raise ConfigError(f"dataset {path}: expected {n_rows} rows of {n_inputs + 1} values")
    return rows[:, :n_inputs], rows[:, n_inputs]


def save_dataset(path, zs: np.ndarray, ys: np.ndarray) -> None:
    zs = np.atleast_2d(zs)
    lines = [f"{zs.shape[0]} {zs.shape[1]}"]
    for z, y in zip(zs, ys):
        lines.append(" ".join(repr(float(v)) for v in z) + f" {float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# whole experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    objective: ObjectiveContract
    run: Optional[RunBlock]
    oracle: Optional[OracleBlock]
    seeds: list[int]
    output_dir: Optional[str]


def parse_config(doc: dict) -> ExperimentConfig:
    doc = _require_mapping(doc, "<root>")
    _check_keys(doc, {"objective", "run", "oracle", "seeds", "output_dir"}, "")
    objective = parse_objective(_get(doc, "objective", ""))
    run_block = parse_run_block(doc["run"]) if "run" in doc else None
    oracle_block = parse_oracle_block(doc["oracle"]) if "oracle" in doc else None
    if run_block is None and oracle_block is None:
        raise ConfigError("config needs at least one of: run, oracle")
    seeds = _get(doc, "seeds", "")
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)):
        raise ConfigError("seeds must be a nonempty list of integers")
    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir must be a string path")
    return ExperimentConfig(
        objective=objective,
        run=run_block,
        oracle=oracle_block,
        seeds=list(seeds),
        output_dir=output_dir,
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "?"
        raise ConfigError(f"config parse error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return parse_config(doc)
