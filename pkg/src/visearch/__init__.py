"""Desk-scale visual discovery engine.

Binarized-embedding nearest-neighbor search over sharded token indices, an
incremental feature-fingerprinting pipeline, detection-gated linear
re-ranking, annotation and conformity post-processing, object search, and
multi-source result blending, exposed as a library, JSON service, and CLI.
"""

from .errors import (
    DimensionError,
    InputError,
    IntegrityError,
    NotFoundError,
    PreconditionError,
    RunLockError,
    VisearchError,
)
from .features import ExtractorSpec, binarize, extract, hamming, l1, l2, visual_similarity
from .model import (
    Annotation,
    BinaryFingerprint,
    Box,
    CategoryVector,
    DetectedObject,
    Embedding,
    ImageDocument,
    Signature,
    compute_signature,
    threshold_category,
)

__all__ = [
    "Annotation",
    "BinaryFingerprint",
    "Box",
    "CategoryVector",
    "DetectedObject",
    "DimensionError",
    "Embedding",
    "ExtractorSpec",
    "ImageDocument",
    "InputError",
    "IntegrityError",
    "NotFoundError",
    "PreconditionError",
    "RunLockError",
    "Signature",
    "VisearchError",
    "binarize",
    "compute_signature",
    "extract",
    "hamming",
    "l1",
    "l2",
    "threshold_category",
    "visual_similarity",
]

__version__ = "0.1.0"
