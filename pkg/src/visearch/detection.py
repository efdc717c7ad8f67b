"""Post-processing over externally supplied detections.

Detections enter the system as data; this module only filters and reshapes
them: IoU, greedy per-category NMS, the dominant-object rule that gates
visual re-ranking, and the object corpus used by object search.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionError, InputError
from .features import ExtractorSpec, binarize, crop_embedding
from .index import LeafIndex
from .model import (
    BinaryFingerprint,
    Box,
    DetectedObject,
    ImageDocument,
    Signature,
    compute_signature,
)

DOMINANT_AREA_FRACTION = 0.25
DOMINANT_CONFIDENCE = 0.9


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.right, b.right) - max(a.x, b.x)
    iy = min(a.bottom, b.bottom) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(dets: list[DetectedObject], iou_thresh: float) -> list[DetectedObject]:
    """Greedy per-category suppression, highest confidence first.

    A detection is suppressed when its IoU with an already-kept detection of
    the same category strictly exceeds the threshold, so threshold 1.0 keeps
    everything and threshold 0.0 keeps one box per overlapping cluster.
    Output is ordered by confidence descending, ties by box coordinates.
    """
    if not 0 <= iou_thresh <= 1:
        raise InputError(f"iou threshold {iou_thresh} must be in [0, 1]")
    ranked = sorted(dets, key=lambda d: (-d.confidence, d.box.as_tuple()))
    kept: list[DetectedObject] = []
    for det in ranked:
        if all(
            iou(det.box, other.box) <= iou_thresh
            for other in kept
            if other.category == det.category
        ):
            kept.append(det)
    return kept


def dominant_object(
    dets: list[DetectedObject], image_w: float, image_h: float
) -> DetectedObject | None:
    """The largest detection, if it covers >= 25% of the image or its
    confidence is >= 0.9; the rule never promotes a smaller box."""
    if not dets:
        return None
    largest = max(dets, key=lambda d: (d.box.area, d.confidence, _neg_box_key(d.box)))
    fraction = largest.box.area / (image_w * image_h)
    if fraction >= DOMINANT_AREA_FRACTION or largest.confidence >= DOMINANT_CONFIDENCE:
        return largest
    return None


def _neg_box_key(box: Box) -> tuple[float, ...]:
    # max() picks the greatest key; negate so equal-area, equal-confidence
    # ties resolve to the lexicographically smallest box.
    return tuple(-v for v in box.as_tuple())


@dataclass(frozen=True)
class ObjectEntry:
    """One indexed object: a detection crop tied back to its scene."""

    object_id: Signature
    scene_signature: Signature
    box: Box
    category: str
    confidence: float
    fingerprint: BinaryFingerprint


def object_id_for(scene: Signature, box: Box) -> Signature:
    return compute_signature(f"{scene.hex}:{box.key()}".encode("ascii"))


def extract_objects(
    doc: ImageDocument,
    image_bytes: bytes,
    extractor: ExtractorSpec,
    nms_iou: float = 0.5,
) -> list[ObjectEntry]:
    """One entry per post-NMS detection, with a deterministic crop fingerprint."""
    entries = []
    for det in nms(list(doc.detections), nms_iou):
        if not det.box.within(doc.width, doc.height):
            raise InputError(f"detection box {det.box.as_tuple()} outside image bounds")
        emb = crop_embedding(extractor, image_bytes, det.box, doc.width, doc.height)
        entries.append(
            ObjectEntry(
                object_id=object_id_for(doc.signature, det.box),
                scene_signature=doc.signature,
                box=det.box,
                category=det.category,
                confidence=det.confidence,
                fingerprint=binarize(emb),
            )
        )
    return entries


@dataclass(frozen=True)
class SceneHit:
    """A scene reached through one of its objects, at the object's distance."""

    scene_signature: Signature
    distance: int


def object_search(
    object_index: LeafIndex,
    entries_by_id: dict[Signature, ObjectEntry],
    q: BinaryFingerprint,
    k: int,
) -> list[SceneHit]:
    """KNN over objects mapped back to whole scenes.

    Each scene keeps its best (minimum) object distance; scenes rank by
    (distance, scene signature). Fetches widen until the k-th scene cannot be
    displaced by any unfetched object.
    """
    if k < 1:
        raise InputError("k must be positive")
    total = len(object_index)
    if total == 0:
        return []
    if len(object_index) and q.dim != object_index.dim:
        raise DimensionError(f"query dim {q.dim} != object index dim {object_index.dim}")
    fetch = k
    while True:
        hits = object_index.knn(q, fetch)
        best: dict[Signature, int] = {}
        for hit in hits:
            scene = entries_by_id[hit.signature].scene_signature
            if scene not in best:  # hits arrive distance-ascending
                best[scene] = hit.distance
        scenes = sorted(best.items(), key=lambda it: (it[1], it[0]))[:k]
        exhausted = len(hits) >= total
        settled = (
            len(scenes) >= k
            and len(hits) == fetch
            and hits[-1].distance > scenes[k - 1][1]
        )
        if exhausted or settled or len(hits) < fetch:
            return [SceneHit(sig, d) for sig, d in scenes]
        fetch = min(total, fetch * 2)
