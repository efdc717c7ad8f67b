"""Core domain types for the visual discovery engine.

An image is identified by the MD5 signature of its raw bytes. Everything else
here is an immutable value object shared by the pipeline, index, and serving
layers, plus the JSON wire encoding for documents (hex signatures, base64
little-endian float32 embeddings, base64 packed bit vectors with the most
significant bit first within each byte).
"""

from __future__ import annotations

import base64
import hashlib
import math
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

from .errors import DimensionError, InputError

CATEGORY_COUNT = 32


@dataclass(frozen=True, order=True)
class Signature:
    """16-byte content digest; sorts lexicographically, same as its hex form."""

    digest: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.digest, bytes) or len(self.digest) != 16:
            raise InputError("signature must be exactly 16 bytes")

    @classmethod
    def from_hex(cls, text: str) -> Signature:
        if len(text) != 32:
            raise InputError(f"signature hex must be 32 chars, got {len(text)}")
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise InputError(f"invalid signature hex {text!r}") from exc

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return self.hex


def compute_signature(image_bytes: bytes) -> Signature:
    """MD5 digest of the input bytes; stable across runs and platforms."""
    return Signature(hashlib.md5(image_bytes).digest())


@dataclass(frozen=True)
class Embedding:
    """Fixed-length real-valued feature vector."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise DimensionError("embedding must have at least one value")
        if not all(math.isfinite(v) for v in self.values):
            raise InputError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BinaryFingerprint:
    """Fixed-width bit vector, packed MSB-first within each byte.

    Bit i of the vector lives in byte i // 8 at bit position 7 - (i % 8).
    Bits past ``dim`` in the final byte must be zero.
    """

    packed: bytes
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionError("fingerprint dim must be positive")
        expected = (self.dim + 7) // 8
        if len(self.packed) != expected:
            raise DimensionError(
                f"packed length {len(self.packed)} does not match dim {self.dim}"
            )
        pad = expected * 8 - self.dim
        if pad and (self.packed[-1] & ((1 << pad) - 1)):
            raise InputError("padding bits past dim must be zero")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BinaryFingerprint:
        bits = list(bits)
        code = 0
        for b in bits:
            if b not in (0, 1):
                raise InputError("bits must be 0 or 1")
            code = (code << 1) | b
        return cls.from_code(code, len(bits))

    @classmethod
    def from_code(cls, code: int, dim: int) -> BinaryFingerprint:
        """Build from an integer whose most significant of ``dim`` bits is bit 0."""
        if dim < 1:
            raise DimensionError("fingerprint dim must be positive")
        if code < 0 or code >> dim:
            raise InputError("code does not fit in dim bits")
        nbytes = (dim + 7) // 8
        return cls((code << (nbytes * 8 - dim)).to_bytes(nbytes, "big"), dim)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> BinaryFingerprint:
        """Sign-binarize: bit i is 1 iff values[i] > 0 (zero maps to 0)."""
        code = 0
        for v in values:
            code = (code << 1) | (1 if v > 0 else 0)
        return cls.from_code(code, len(values))

    def as_code(self) -> int:
        """The bit vector as an integer, bit 0 most significant."""
        nbytes = len(self.packed)
        return int.from_bytes(self.packed, "big") >> (nbytes * 8 - self.dim)

    def bit(self, i: int) -> int:
        if not 0 <= i < self.dim:
            raise IndexError(i)
        return (self.packed[i // 8] >> (7 - i % 8)) & 1

    def bits(self) -> list[int]:
        code = self.as_code()
        return [(code >> (self.dim - 1 - i)) & 1 for i in range(self.dim)]


@dataclass(frozen=True)
class CategoryVector:
    """Sparse site-wide category weights: index in 0..31, weight in (0, 1]."""

    entries: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned: dict[int, float] = {}
        for idx, weight in self.entries.items():
            idx = int(idx)
            weight = float(weight)
            if not 0 <= idx < CATEGORY_COUNT:
                raise InputError(f"category index {idx} out of range 0..31")
            if not (math.isfinite(weight) and 0 < weight <= 1):
                raise InputError(f"category weight {weight} must be in (0, 1]")
            cleaned[idx] = weight
        object.__setattr__(self, "entries", cleaned)

    @classmethod
    def empty(cls) -> CategoryVector:
        return cls({})

    def items(self) -> list[tuple[int, float]]:
        return sorted(self.entries.items())

    def argmax(self) -> int | None:
        """Index of the heaviest category (smallest index on ties), or None."""
        if not self.entries:
            return None
        return min(self.entries, key=lambda i: (-self.entries[i], i))

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)


def threshold_category(raw: Sequence[float], tau: float) -> CategoryVector:
    """Keep only the categories whose raw weight strictly exceeds ``tau``."""
    if len(raw) != CATEGORY_COUNT:
        raise DimensionError(
            f"raw category vector must have {CATEGORY_COUNT} entries, got {len(raw)}"
        )
    if tau < 0:
        raise InputError("tau must be non-negative")
    return CategoryVector({i: v for i, v in enumerate(raw) if v > tau})


@dataclass(frozen=True)
class Annotation:
    """A text term with a non-negative relevance weight."""

    term: str
    weight: float

    def __post_init__(self) -> None:
        if not self.term:
            raise InputError("annotation term must be non-empty")
        if not math.isfinite(self.weight) or self.weight < 0:
            raise InputError("annotation weight must be finite and non-negative")


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel coordinates; width and height positive."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InputError("box coordinates must be finite")
            object.__setattr__(self, name, v)
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"degenerate box {self.as_tuple()}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def within(self, width: float, height: float) -> bool:
        return self.x >= 0 and self.y >= 0 and self.right <= width and self.bottom <= height

    def key(self) -> str:
        """Canonical text form, used for derived object ids."""
        return f"{self.x!r},{self.y!r},{self.w!r},{self.h!r}"


@dataclass(frozen=True)
class DetectedObject:
    """An externally supplied detection attached to an image."""

    box: Box
    category: str
    confidence: float

    def __post_init__(self) -> None:
        if not self.category:
            raise InputError("detection category must be non-empty")
        if not 0 <= self.confidence <= 1:
            raise InputError(f"confidence {self.confidence} must be in [0, 1]")


@dataclass(frozen=True)
class ImageDocument:
    """One indexed image with all features and metadata.

    The fingerprint is always the sign-binarization of the embedding, and
    every detection box lies inside the image bounds.
    """

    signature: Signature
    upload_time: datetime
    width: int
    height: int
    embedding: Embedding
    fingerprint: BinaryFingerprint
    annotations: tuple[Annotation, ...] = ()
    category: CategoryVector = field(default_factory=CategoryVector.empty)
    class_label: str | None = None
    detections: tuple[DetectedObject, ...] = ()

    def __post_init__(self) -> None:
        if self.upload_time.tzinfo is None:
            raise InputError("upload_time must be timezone-aware")
        object.__setattr__(self, "upload_time", self.upload_time.astimezone(timezone.utc))
        if self.width <= 0 or self.height <= 0:
            raise InputError("image dimensions must be positive")
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.fingerprint != BinaryFingerprint.from_values(self.embedding.values):
            raise InputError("fingerprint must be the binarized embedding")
        for det in self.detections:
            if not det.box.within(self.width, self.height):
                raise InputError(f"detection box {det.box.as_tuple()} outside image bounds")

    @classmethod
    def build(
        cls,
        signature: Signature,
        upload_time: datetime,
        width: int,
        height: int,
        embedding: Embedding,
        annotations: Iterable[Annotation] = (),
        category: CategoryVector | None = None,
        class_label: str | None = None,
        detections: Iterable[DetectedObject] = (),
    ) -> ImageDocument:
        """Construct with the fingerprint derived from the embedding."""
        return cls(
            signature=signature,
            upload_time=upload_time,
            width=width,
            height=height,
            embedding=embedding,
            fingerprint=BinaryFingerprint.from_values(embedding.values),
            annotations=tuple(annotations),
            category=category if category is not None else CategoryVector.empty(),
            class_label=class_label,
            detections=tuple(detections),
        )


# --- JSON wire encoding -----------------------------------------------------

def embedding_to_b64(e: Embedding) -> str:
    return base64.b64encode(struct.pack(f"<{e.dim}f", *e.values)).decode("ascii")


def embedding_from_b64(text: str) -> Embedding:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise InputError("invalid base64 embedding") from exc
    if len(raw) % 4:
        raise InputError("embedding byte length must be a multiple of 4")
    n = len(raw) // 4
    return Embedding(struct.unpack(f"<{n}f", raw))


def fingerprint_to_b64(fp: BinaryFingerprint) -> str:
    return base64.b64encode(fp.packed).decode("ascii")


def fingerprint_from_b64(text: str, dim: int) -> BinaryFingerprint:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise InputError("invalid base64 fingerprint") from exc
    return BinaryFingerprint(raw, dim)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise InputError(f"invalid timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def document_to_json(doc: ImageDocument) -> dict:
    return {
        "signature": doc.signature.hex,
        "upload_time": format_timestamp(doc.upload_time),
        "width": doc.width,
        "height": doc.height,
        "embedding": embedding_to_b64(doc.embedding),
        "fingerprint": fingerprint_to_b64(doc.fingerprint),
        "annotations": [{"term": a.term, "weight": a.weight} for a in doc.annotations],
        "category": {str(i): w for i, w in doc.category.items()},
        "class_label": doc.class_label,
        "detections": [
            {
                "box": list(d.box.as_tuple()),
                "category": d.category,
                "confidence": d.confidence,
            }
            for d in doc.detections
        ],
    }


def document_from_json(data: Mapping) -> ImageDocument:
    embedding = embedding_from_b64(data["embedding"])
    fingerprint = fingerprint_from_b64(data["fingerprint"], embedding.dim)
    return ImageDocument(
        signature=Signature.from_hex(data["signature"]),
        upload_time=parse_timestamp(data["upload_time"]),
        width=int(data["width"]),
        height=int(data["height"]),
        embedding=embedding,
        fingerprint=fingerprint,
        annotations=tuple(
            Annotation(a["term"], float(a["weight"])) for a in data.get("annotations", [])
        ),
        category=CategoryVector(
            {int(k): float(v) for k, v in data.get("category", {}).items()}
        ),
        class_label=data.get("class_label"),
        detections=tuple(
            DetectedObject(
                box=Box(*d["box"]),
                category=d["category"],
                confidence=float(d["confidence"]),
            )
            for d in data.get("detections", [])
        ),
    )
