"""Experiment configuration: data generation, controller classes, and study settings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["ConfigError", "ControllerClassSpec", "ExperimentConfig"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ControllerClassSpec:
    label: str
    kind: str = "full"  # full | reduced | decentralized | custom
    drop_edges: tuple = ()  # node labels, for 'reduced'
    edges: tuple = ()  # node labels, for 'custom'

    def __post_init__(self):
        if self.kind not in ("full", "reduced", "decentralized", "custom"):
            raise ConfigError(f"unknown controller class kind {self.kind!r}")


DEFAULT_CLASSES = (
    ControllerClassSpec("full", "full"),
    ControllerClassSpec("reduced", "reduced"),
    ControllerClassSpec("decentralized", "decentralized"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    spec_path: str = ""
    n_samples: int = 100
    sigma_u: float = 1.0
    sigma_v: float | tuple = 0.1  # scalar or one value per node
    seed: int = 1
    replicates: int = 1
    classes: tuple = DEFAULT_CLASSES
    grid_points: int = 512
    trim: int | None = None
    cancel_tol: float = 1e-9
    eval_horizon: int = 100
    n_jobs: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.n_samples < 10:
            raise ConfigError(f"data length {self.n_samples} < 10")
        if self.replicates < 1:
            raise ConfigError("replicate count must be at least 1")
        if not self.sigma_u > 0:
            raise ConfigError("input standard deviation must be positive")
        if isinstance(self.sigma_v, (list, tuple)):
            object.__setattr__(self, "sigma_v", tuple(float(v) for v in self.sigma_v))
            if any(v < 0 for v in self.sigma_v):
                raise ConfigError("noise standard deviations must be non-negative")
        elif self.sigma_v < 0:
            raise ConfigError("noise standard deviation must be non-negative")
        if self.grid_points < 2:
            raise ConfigError("frequency grid needs at least 2 points")
        if self.eval_horizon < 1:
            raise ConfigError("evaluation horizon must be positive")
        if not self.classes:
            raise ConfigError("at least one controller class is required")

    @staticmethod
    def from_dict(data: dict, base_dir=None) -> "ExperimentConfig":
        data = dict(data)
        classes = []
        for entry in data.pop("classes", None) or []:
            if isinstance(entry, str):
                classes.append(ControllerClassSpec(entry, entry))
            else:
                classes.append(
                    ControllerClassSpec(
                        label=entry.get("label", entry.get("kind", "full")),
                        kind=entry.get("kind", entry.get("label", "full")),
                        drop_edges=tuple(tuple(e) for e in entry.get("drop_edges", [])),
                        edges=tuple(tuple(e) for e in entry.get("edges", [])),
                    )
                )
        spec_path = data.pop("spec", data.pop("spec_path", ""))
        if base_dir is not None and spec_path and not Path(spec_path).is_absolute():
            candidate = Path(base_dir) / spec_path
            if candidate.exists():
                spec_path = str(candidate)
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        kwargs = {"spec_path": str(spec_path), **data}
        if classes:
            kwargs["classes"] = tuple(classes)
        try:
            return ExperimentConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def from_json_file(path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return ExperimentConfig.from_dict(data, base_dir=path.parent)
