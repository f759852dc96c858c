"""Experiment configuration: one flat JSON object with validated ranges."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import DataError


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; unset paths simply disable their stage.

    Provider endpoints default to offline built-ins (hash embeddings and
    the stub generator) so a run is reproducible with no network at all.
    """

    embed_url: str | None = None
    llm_url: str | None = None
    k_nodes: int = 3
    k_edges: int = 3
    edge_cost: float = 0.5
    lambda_reg: float | None = None
    c_max: int = 8
    demos_m: int = 2
    layers: int = 3
    d_in: int = 64
    d_hidden: int = 64
    d_llm: int = 128
    projector_activation: str = "tanh"
    seed: int = 0
    budget_chars: int = 8000
    timeout_secs: float = 60.0
    max_tokens: int = 64
    concurrency: int = 1
    pool_path: str | None = None
    dataset_path: str | None = None
    checkpoint_path: str | None = None
    cluster_path: str | None = None

    def __post_init__(self):
        checks = [
            (self.k_nodes >= 1, "k_nodes must be >= 1"),
            (self.k_edges >= 0, "k_edges must be >= 0"),
            (self.edge_cost > 0.0, "edge_cost must be positive"),
            (self.lambda_reg is None or self.lambda_reg >= 0.0,
             "lambda_reg must be non-negative"),
            (self.c_max >= 1, "c_max must be >= 1"),
            (self.demos_m >= 0, "demos_m must be >= 0"),
            (self.layers >= 1, "layers must be >= 1"),
            (min(self.d_in, self.d_hidden, self.d_llm) >= 1,
             "dims must be positive"),
            (self.projector_activation in ("tanh", "identity"),
             "projector_activation must be 'tanh' or 'identity'"),
            (self.budget_chars >= 1, "budget_chars must be >= 1"),
            (self.timeout_secs > 0.0, "timeout_secs must be positive"),
            (self.max_tokens >= 1, "max_tokens must be >= 1"),
            (self.concurrency >= 1, "concurrency must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise DataError(f"config: {message}")

    def replace(self, **overrides) -> "PipelineConfig":
        merged = asdict(self)
        merged.update(overrides)
        return PipelineConfig(**merged)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a config JSON file; unknown keys are rejected to catch typos."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise DataError(f"config {path} must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise DataError(f"config {path} has unknown keys: {', '.join(unknown)}")
    try:
        return PipelineConfig(**obj)
    except TypeError as exc:
        raise DataError(f"config {path}: {exc}")


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
