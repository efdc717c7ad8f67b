"""Engine configuration: one JSON file per data directory.

Dot-suppression thresholds carry two named defaults: the production-scale
row (kept verbatim for reference, its annotation-score scale does not match
this corpus) and the recalibrated desk-scale serving defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import InputError
from .features import ExtractorSpec
from .pipeline import (
    DEFAULT_JOIN_BLOCK_SIZE,
    DEFAULT_JOIN_SHARDS,
    DEFAULT_MAX_CHUNK_MEMBERS,
    DEFAULT_TARGET_SHARD_SIZE,
    FeatureSpec,
)
from .retrieval import (
    DEFAULT_THRESHOLDS,
    DEFAULT_VISUAL_GAIN,
    SuppressionThresholds,
)

PORT_ENV_VAR = "VISEARCH_PORT"
DEFAULT_PORT = 8080
DEFAULT_DIM = 64
DEFAULT_SEED = 1234


@dataclass
class EngineConfig:
    dim: int = DEFAULT_DIM
    extractor: ExtractorSpec = field(
        default_factory=lambda: ExtractorSpec("seeded-hash", DEFAULT_DIM, DEFAULT_SEED)
    )
    features: list[FeatureSpec] = field(default_factory=list)
    # pipeline sizing
    target_shard_size: int = DEFAULT_TARGET_SHARD_SIZE
    max_chunk_members: int = DEFAULT_MAX_CHUNK_MEMBERS
    join_shards: int = DEFAULT_JOIN_SHARDS
    join_block_size: int = DEFAULT_JOIN_BLOCK_SIZE
    # index
    index_shards: int = 3
    block_count: int | None = None  # None = derive from dim
    exhaustive_fallback: bool = True
    object_nms_iou: float = 0.5
    # ingest
    category_tau: float = 0.1
    detection_min_confidence: float = 0.7
    # search
    default_k: int = 25
    rerank_gamma: float = DEFAULT_VISUAL_GAIN
    annotation_top_n: int = 10
    annotation_top_m: int = 10
    partial_ok: bool = True
    thresholds: SuppressionThresholds = field(default_factory=lambda: DEFAULT_THRESHOLDS)
    # blending
    blend_priorities: list[str] = field(
        default_factory=lambda: ["visual", "objectSearch", "textual"]
    )
    blend_ratios: dict[str, list[int]] = field(
        default_factory=lambda: {"objectSearch": [3, 1], "textual": [3, 1]}
    )
    min_annotation_confidence: float = 0.2
    annotation_confidence_scale: float = 5.0
    # ranking model files, name -> path (null/missing path = built-in default)
    models: dict[str, str | None] = field(default_factory=lambda: {"default": None})

    def __post_init__(self) -> None:
        if not self.features:
            self.features = [
                FeatureSpec(
                    name="embedding",
                    version=1,
                    extractor=self.extractor,
                )
            ]
        if self.extractor.dim != self.dim:
            raise InputError(
                f"extractor dim {self.extractor.dim} disagrees with engine dim {self.dim}"
            )

    def to_json(self) -> dict:
        data = asdict(self)
        data["extractor"] = _extractor_to_json(self.extractor)
        data["features"] = [
            {
                "name": f.name,
                "version": f.version,
                "extractor": _extractor_to_json(f.extractor),
            }
            for f in self.features
        ]
        data["thresholds"] = {
            "min_similarity": self.thresholds.min_similarity,
            "min_annotation_score": self.thresholds.min_annotation_score,
            "min_conformity": self.thresholds.min_conformity,
        }
        return data

    @classmethod
    def from_json(cls, data: dict) -> EngineConfig:
        kwargs = dict(data)
        if "extractor" in kwargs:
            kwargs["extractor"] = _extractor_from_json(kwargs["extractor"])
        if "features" in kwargs:
            kwargs["features"] = [
                FeatureSpec(
                    name=f["name"],
                    version=int(f["version"]),
                    extractor=_extractor_from_json(f["extractor"]),
                )
                for f in kwargs["features"]
            ]
        if "thresholds" in kwargs:
            kwargs["thresholds"] = SuppressionThresholds(**kwargs["thresholds"])
        known = set(cls.__dataclass_fields__)
        unknown = set(kwargs) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)

    @staticmethod
    def path_for(data_dir: Path) -> Path:
        return Path(data_dir) / "config.json"

    @classmethod
    def load(cls, data_dir: Path) -> EngineConfig:
        path = cls.path_for(data_dir)
        if not path.exists():
            return cls()
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")))

    def save(self, data_dir: Path) -> None:
        path = self.path_for(data_dir)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")


def _extractor_to_json(spec: ExtractorSpec) -> dict:
    return {"kind": spec.kind, "dim": spec.dim, "seed": spec.seed, "path": spec.path}


def _extractor_from_json(data: dict) -> ExtractorSpec:
    return ExtractorSpec(
        kind=data["kind"],
        dim=int(data["dim"]),
        seed=int(data.get("seed") or 0),
        path=data.get("path"),
    )


def serving_port() -> int:
    raw = os.environ.get(PORT_ENV_VAR)
    if raw is None:
        return DEFAULT_PORT
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"invalid {PORT_ENV_VAR}={raw!r}") from exc
