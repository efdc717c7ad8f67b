"""Catalog of ingested images: raw bytes plus human metadata.

The catalog is the system of record that the fingerprint pipeline and the
index builders read from. Image bytes stay in the catalog (desk scale) so
crop queries can derive deterministic crop fingerprints at serving time.
"""

from __future__ import annotations

import base64
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InputError, NotFoundError
from .model import (
    Annotation,
    Box,
    CategoryVector,
    DetectedObject,
    Embedding,
    ImageDocument,
    Signature,
    compute_signature,
    format_timestamp,
    parse_timestamp,
    threshold_category,
)

DEFAULT_DETECTION_MIN_CONFIDENCE = 0.7  # ingest filter for supplied detections


@dataclass(frozen=True)
class CatalogRecord:
    """One ingested image: content bytes plus supplied metadata."""

    signature: Signature
    content: bytes
    upload_time: datetime
    width: int
    height: int
    annotations: tuple[Annotation, ...] = ()
    category: CategoryVector = field(default_factory=CategoryVector.empty)
    class_label: str | None = None
    detections: tuple[DetectedObject, ...] = ()

    def to_document(self, embedding: Embedding) -> ImageDocument:
        return ImageDocument.build(
            signature=self.signature,
            upload_time=self.upload_time,
            width=self.width,
            height=self.height,
            embedding=embedding,
            annotations=self.annotations,
            category=self.category,
            class_label=self.class_label,
            detections=self.detections,
        )

    def to_json(self) -> dict:
        return {
            "signature": self.signature.hex,
            "content": base64.b64encode(self.content).decode("ascii"),
            "upload_time": format_timestamp(self.upload_time),
            "width": self.width,
            "height": self.height,
            "annotations": [{"term": a.term, "weight": a.weight} for a in self.annotations],
            "category": {str(i): w for i, w in self.category.items()},
            "class_label": self.class_label,
            "detections": [
                {"box": list(d.box.as_tuple()), "category": d.category,
                 "confidence": d.confidence}
                for d in self.detections
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> CatalogRecord:
        return cls(
            signature=Signature.from_hex(data["signature"]),
            content=base64.b64decode(data["content"]),
            upload_time=parse_timestamp(data["upload_time"]),
            width=int(data["width"]),
            height=int(data["height"]),
            annotations=tuple(
                Annotation(a["term"], float(a["weight"]))
                for a in data.get("annotations", [])
            ),
            category=CategoryVector(
                {int(k): float(v) for k, v in data.get("category", {}).items()}
            ),
            class_label=data.get("class_label"),
            detections=tuple(_parse_detection(d) for d in data.get("detections", [])),
        )


def _parse_detection(data: Mapping) -> DetectedObject:
    return DetectedObject(
        box=Box(*data["box"]), category=data["category"],
        confidence=float(data["confidence"]),
    )


class Catalog:
    """Signature-keyed store of catalog records, persisted as JSON lines."""

    def __init__(self, records: dict[Signature, CatalogRecord] | None = None) -> None:
        self.records: dict[Signature, CatalogRecord] = records or {}

    @staticmethod
    def path_for(data_dir: Path) -> Path:
        return Path(data_dir) / "catalog" / "images.jsonl"

    @classmethod
    def load(cls, data_dir: Path) -> Catalog:
        path = cls.path_for(data_dir)
        records: dict[Signature, CatalogRecord] = {}
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = CatalogRecord.from_json(json.loads(line))
                    records[rec.signature] = rec
        return cls(records)

    def save(self, data_dir: Path) -> None:
        path = self.path_for(data_dir)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for sig in sorted(self.records):
                fh.write(json.dumps(self.records[sig].to_json(), sort_keys=True) + "\n")
        tmp.replace(path)

    def get_bytes(self, sig: Signature) -> bytes:
        rec = self.records.get(sig)
        if rec is None:
            raise NotFoundError(f"signature {sig.hex} not in catalog")
        return rec.content

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, sig: Signature) -> bool:
        return sig in self.records


def _ingest_record(
    data: Mapping,
    category_tau: float,
    min_confidence: float,
) -> CatalogRecord:
    content = base64.b64decode(data["content"])
    sig = compute_signature(content)
    if "category_raw" in data:
        category = threshold_category([float(v) for v in data["category_raw"]], category_tau)
    else:
        category = CategoryVector(
            {int(k): float(v) for k, v in data.get("category", {}).items()}
        )
    width = int(data["width"])
    height = int(data["height"])
    detections = []
    for d in data.get("detections", []):
        det = _parse_detection(d)
        if det.confidence < min_confidence:
            continue
        if not det.box.within(width, height):
            raise InputError(
                f"detection box {det.box.as_tuple()} outside {width}x{height} image {sig.hex}"
            )
        detections.append(det)
    return CatalogRecord(
        signature=sig,
        content=content,
        upload_time=parse_timestamp(data["upload_time"]),
        width=width,
        height=height,
        annotations=tuple(
            Annotation(a["term"], float(a["weight"])) for a in data.get("annotations", [])
        ),
        category=category,
        class_label=data.get("class_label"),
        detections=tuple(detections),
    )


def ingest_images(
    data_dir: Path,
    images_path: Path,
    detections_path: Path | None = None,
    category_tau: float = 0.1,
    min_confidence: float = DEFAULT_DETECTION_MIN_CONFIDENCE,
) -> dict:
    """Add image records (and optional detection records) to the catalog.

    Re-ingesting bytes already present is a no-op for that image. Returns
    counts of added and skipped images.
    """
    catalog = Catalog.load(data_dir)
    added = skipped = 0
    with open(images_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = _ingest_record(json.loads(line), category_tau, min_confidence)
            if rec.signature in catalog.records:
                skipped += 1
                continue
            catalog.records[rec.signature] = rec
            added += 1
    detections_merged = 0
    if detections_path is not None:
        with open(detections_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                data = json.loads(line)
                sig = Signature.from_hex(data["signature"])
                rec = catalog.records.get(sig)
                if rec is None:
                    raise NotFoundError(f"detections refer to unknown signature {sig.hex}")
                kept = []
                for d in data.get("detections", []):
                    det = _parse_detection(d)
                    if det.confidence < min_confidence:
                        continue
                    if not det.box.within(rec.width, rec.height):
                        raise InputError(
                            f"detection box {det.box.as_tuple()} outside image {sig.hex}"
                        )
                    kept.append(det)
                catalog.records[sig] = CatalogRecord(
                    signature=rec.signature,
                    content=rec.content,
                    upload_time=rec.upload_time,
                    width=rec.width,
                    height=rec.height,
                    annotations=rec.annotations,
                    category=rec.category,
                    class_label=rec.class_label,
                    detections=tuple(kept),
                )
                detections_merged += 1
    catalog.save(data_dir)
    return {"added": added, "skipped": skipped, "detections_merged": detections_merged}


# --- synthetic corpus ------------------------------------------------------

_VOCAB = [
    "lamp", "desk", "shelf", "chair", "sofa", "rug", "vase", "clock",
    "boots", "jacket", "scarf", "bag", "dress", "watch", "ring", "hat",
    "cake", "salad", "pasta", "bread", "soup", "tea", "plant", "garden",
]

_DET_CATEGORIES = ["chair", "lamp", "bag", "shoe", "table", "plant"]


def make_synthetic_corpus(
    count: int,
    days: int = 3,
    seed: int = 7,
    detection_rate: float = 0.5,
) -> list[dict]:
    """Ingestable image records with clustered annotations and detections."""
    rng = random.Random(seed)
    start = datetime(2015, 9, 14, tzinfo=timezone.utc)
    records = []
    for i in range(count):
        theme = rng.randrange(8)
        content = f"image:{seed}:{i}:{rng.getrandbits(64):016x}".encode("ascii")
        terms = rng.sample(_VOCAB[theme * 3 : theme * 3 + 3], 2)
        upload = start + timedelta(days=rng.randrange(days), hours=rng.randrange(24))
        width, height = 640, 480
        detections = []
        if rng.random() < detection_rate:
            for _ in range(rng.randrange(1, 3)):
                w = rng.uniform(80, 400)
                h = rng.uniform(80, 300)
                x = rng.uniform(0, width - w)
                y = rng.uniform(0, height - h)
                detections.append(
                    {
                        "box": [round(x, 1), round(y, 1), round(w, 1), round(h, 1)],
                        "category": rng.choice(_DET_CATEGORIES),
                        "confidence": round(rng.uniform(0.7, 0.99), 3),
                    }
                )
        records.append(
            {
                "content": base64.b64encode(content).decode("ascii"),
                "upload_time": format_timestamp(upload),
                "width": width,
                "height": height,
                "annotations": [
                    {"term": t, "weight": round(rng.uniform(0.3, 1.0), 3)} for t in terms
                ],
                "category": {str(theme * 4): round(rng.uniform(0.5, 1.0), 3)},
                "class_label": f"theme_{theme}",
                "detections": detections,
            }
        )
    return records


def write_jsonl(records: Iterable[Mapping], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
