"""Embedding production, sign binarization, and distance metrics.

The seeded-hash extractor stands in for a neural feature extractor: it maps
image bytes to a deterministic vector in [-1, 1] through a keyed hash stream,
so every downstream code path (binarization, indexing, ranking) can be
exercised without any model weights. The file-ingest extractor reads
precomputed embeddings keyed by signature.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass
from typing import Literal

from .errors import DimensionError, InputError, NotFoundError
from .model import BinaryFingerprint, Box, Embedding, compute_signature

ExtractorKind = Literal["seeded-hash", "file-ingest"]

_CROP_MARK = b"\x00crop\x00"


@dataclass(frozen=True)
class ExtractorSpec:
    """How query and corpus embeddings are produced."""

    kind: ExtractorKind
    dim: int
    seed: int = 0
    path: str | None = None  # file-ingest only

    def __post_init__(self) -> None:
        if self.kind not in ("seeded-hash", "file-ingest"):
            raise InputError(f"unknown extractor kind {self.kind!r}")
        if self.dim < 1:
            raise DimensionError("extractor dim must be positive")
        if self.kind == "file-ingest" and not self.path:
            raise InputError("file-ingest extractor requires a path")


def _hash_stream_values(image_bytes: bytes, seed: int, dim: int) -> list[float]:
    # One keyed digest of the image, then counter-mode expansion: 8 values
    # per 64-byte block, each mapped from a uint64 into [-1, 1).
    key = (seed & (2**64 - 1)).to_bytes(8, "little")
    base = hashlib.blake2b(image_bytes, digest_size=32, key=key).digest()
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        block = hashlib.blake2b(base + counter.to_bytes(4, "little"), digest_size=64).digest()
        for off in range(0, 64, 8):
            values.append(int.from_bytes(block[off : off + 8], "little") / 2**63 - 1.0)
        counter += 1
    return values[:dim]


class _IngestTable:
    """Lazy-loaded signature -> embedding table for file-ingest extractors."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._table: dict[str, Embedding] | None = None

    def load(self) -> dict[str, Embedding]:
        if self._table is None:
            table: dict[str, Embedding] = {}
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    raw = base64.b64decode(rec["embedding"])
                    if len(raw) % 4:
                        raise InputError(f"bad embedding record in {self.path}")
                    n = len(raw) // 4
                    table[rec["signature"]] = Embedding(struct.unpack(f"<{n}f", raw))
            self._table = table
        return self._table


_ingest_cache: dict[tuple[str, int, int], _IngestTable] = {}


def _ingest_table(path: str) -> _IngestTable:
    st = os.stat(path)
    key = (os.path.abspath(path), st.st_size, st.st_mtime_ns)
    if key not in _ingest_cache:
        _ingest_cache.clear()  # at most one file hot at a time
        _ingest_cache[key] = _IngestTable(path)
    return _ingest_cache[key]


def extract(spec: ExtractorSpec, image_bytes: bytes) -> Embedding:
    """Deterministic embedding of ``image_bytes`` under ``spec``."""
    if spec.kind == "seeded-hash":
        return Embedding(_hash_stream_values(image_bytes, spec.seed, spec.dim))
    table = _ingest_table(spec.path or "").load()
    sig = compute_signature(image_bytes)
    emb = table.get(sig.hex)
    if emb is None:
        raise NotFoundError(f"no ingested embedding for signature {sig.hex}")
    if emb.dim != spec.dim:
        raise DimensionError(f"ingested embedding dim {emb.dim} != spec dim {spec.dim}")
    return emb


def binarize(e: Embedding) -> BinaryFingerprint:
    """Sign rule: bit i is 1 iff values[i] > 0; zero maps to 0."""
    return BinaryFingerprint.from_values(e.values)


def hamming(a: BinaryFingerprint, b: BinaryFingerprint) -> int:
    if a.dim != b.dim:
        raise DimensionError(f"fingerprint dims differ: {a.dim} vs {b.dim}")
    return (int.from_bytes(a.packed, "big") ^ int.from_bytes(b.packed, "big")).bit_count()


def l1(a: Embedding, b: Embedding) -> float:
    if a.dim != b.dim:
        raise DimensionError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return sum(abs(x - y) for x, y in zip(a.values, b.values))


def l2(a: Embedding, b: Embedding) -> float:
    if a.dim != b.dim:
        raise DimensionError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return math.dist(a.values, b.values)


def visual_similarity(a: BinaryFingerprint, b: BinaryFingerprint) -> float:
    """1 minus normalized Hamming distance; 1.0 for identical codes."""
    return 1.0 - hamming(a, b) / a.dim


def crop_bytes(image_bytes: bytes, box: Box, width: float, height: float) -> bytes:
    """Deterministic byte identity of a crop.

    A crop covering the whole image is the image itself, so a full-image crop
    query produces the document's own fingerprint.
    """
    if not box.within(width, height):
        raise InputError(f"crop box {box.as_tuple()} outside image bounds")
    if box.as_tuple() == (0.0, 0.0, float(width), float(height)):
        return image_bytes
    return image_bytes + _CROP_MARK + box.key().encode("ascii")


def crop_embedding(
    spec: ExtractorSpec, image_bytes: bytes, box: Box, width: float, height: float
) -> Embedding:
    return extract(spec, crop_bytes(image_bytes, box, width, height))
