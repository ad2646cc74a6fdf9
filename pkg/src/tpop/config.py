"""Experiment configuration: YAML parsing with defaults matching the
reference experiments (0.02 grid, 5000 model trees and 50 simulation runs
per cell, ~50 neighbours per agent)."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .core import DuplicatePolicy, InvalidInput, TPoPParams
from .model import StatePriors
from .world import ConfigError, WorldConfig

DEFAULT_THETA = TPoPParams(threshold=1, depth=1, witnesses_per_level=(6,))


@dataclass
class ExperimentConfig:
    theta: TPoPParams = DEFAULT_THETA
    grid_step: float = 0.02
    model_trees_per_cell: int = 5000
    sim_runs_per_cell: int = 50
    world: WorldConfig = field(default_factory=WorldConfig)
    master_seed: int = 0
    output_dir: Path = Path("out")

    def __post_init__(self) -> None:
        if not (0 < self.grid_step <= 0.5):
            raise ConfigError("grid_step must be in (0, 0.5]")
        if self.model_trees_per_cell < 1 or self.sim_runs_per_cell < 1:
            raise ConfigError("per-cell sample counts must be >= 1")


def _theta_from_mapping(data: dict) -> TPoPParams:
    policy = data.get("duplicate_policy", "discount")
    try:
        policy = DuplicatePolicy(policy)
    except ValueError:
        raise ConfigError(
            f"theta.duplicate_policy: unknown policy {policy!r} "
            f"(expected 'discount' or 'fail_proof')"
        )
    try:
        return TPoPParams(
            threshold=data.get("threshold", 1),
            depth=int(data.get("depth", 1)),
            witnesses_per_level=tuple(int(w) for w in data["witnesses"]),
            duplicate_policy=policy,
        )
    except KeyError as exc:
        raise ConfigError(f"theta: missing required key {exc}")
    except InvalidInput as exc:
        raise ConfigError(f"theta: {exc}")


def _world_from_mapping(data: dict) -> WorldConfig:
    known = {
        "n_agents",
        "width",
        "height",
        "target_avg_neighbors",
        "range_of_sight",
        "speed",
        "p_h",
        "p_c",
        "seed",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"world: unknown keys {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k not in ("p_h", "p_c")}
    if "p_h" in data or "p_c" in data:
        kwargs["priors"] = StatePriors(
            float(data.get("p_h", 0.5)), float(data.get("p_c", 0.5))
        )
    return WorldConfig(**kwargs)


def load_config(path: Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        # yaml errors already carry line/column marks
        raise ConfigError(f"{path}: {exc}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    known = {
        "theta",
        "grid_step",
        "model_trees_per_cell",
        "sim_runs_per_cell",
        "world",
        "master_seed",
        "output_dir",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs: dict = {}
    if "theta" in raw:
        kwargs["theta"] = _theta_from_mapping(raw["theta"])
    if "world" in raw:
        kwargs["world"] = _world_from_mapping(raw["world"])
    for key in ("grid_step", "master_seed", "model_trees_per_cell", "sim_runs_per_cell"):
        if key in raw:
            kwargs[key] = raw[key]
    if "output_dir" in raw:
        kwargs["output_dir"] = Path(raw["output_dir"])
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")
