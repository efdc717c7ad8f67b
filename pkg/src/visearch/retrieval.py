"""Root ranker fan-out plus the linear re-ranking and result-quality signals.

The root ranker merges per-leaf KNN results into a global top-k. Re-ranking
is a linear model over a small feature row per candidate; when the query has
a dominant detected object, the weights of the visual features are boosted by
a configurable gain (default 5). Annotation aggregation, category conformity,
and dot suppression are the post-retrieval confidence signals.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal, Mapping, Sequence

from .errors import InputError, VisearchError
from .index import LeafIndex
from .model import Annotation, BinaryFingerprint, CategoryVector, Signature

logger = logging.getLogger(__name__)

Source = Literal["visual", "textual", "objectSearch"]

DEFAULT_VISUAL_GAIN = 5.0  # weight boost for visual features under a dominant object


@dataclass(frozen=True)
class ScoredResult:
    """One candidate image with distance, similarity, and ranking provenance."""

    signature: Signature
    hamming_distance: int
    similarity: float
    rerank_score: float = 0.0
    leaf_id: int = 0
    source: Source = "visual"


@dataclass(frozen=True)
class RankingModel:
    """Linear weights; ``visual_features`` names the subset subject to gating."""

    weights: Mapping[str, float]
    visual_features: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", dict(self.weights))
        object.__setattr__(self, "visual_features", frozenset(self.visual_features))
        missing = self.visual_features - set(self.weights)
        if missing:
            raise InputError(f"visual features absent from weights: {sorted(missing)}")

    @classmethod
    def from_json(cls, data: Mapping) -> RankingModel:
        return cls(
            weights={k: float(v) for k, v in data["weights"].items()},
            visual_features=frozenset(data.get("visual_features", [])),
        )


DEFAULT_MODEL = RankingModel(
    weights={"vis_sim": 1.0, "vis_sim_indicator": 0.0},
    visual_features=frozenset({"vis_sim", "vis_sim_indicator"}),
)


@dataclass(frozen=True)
class SuppressionSignals:
    """Retrieval-confidence signals for one response."""

    top_similarity: float
    top_annotation_score: float
    category_conformity: float

    def __post_init__(self) -> None:
        for v in (self.top_similarity, self.top_annotation_score, self.category_conformity):
            if not math.isfinite(v):
                raise InputError("suppression signals must be finite")


@dataclass(frozen=True)
class SuppressionThresholds:
    """Minimum required value per signal before a dot is shown."""

    min_similarity: float
    min_annotation_score: float
    min_conformity: float


# Threshold row tuned for the production-scale deployment this design mirrors.
# The annotation-score scale there is far larger than anything this corpus
# produces, so serving uses the recalibrated defaults below instead.
PRODUCTION_SCALE_THRESHOLDS = SuppressionThresholds(
    min_similarity=1.0, min_annotation_score=1000.0, min_conformity=0.8
)
DEFAULT_THRESHOLDS = SuppressionThresholds(
    min_similarity=0.6, min_annotation_score=1.5, min_conformity=0.4
)


class PartialFanoutError(VisearchError):
    """Raised when a leaf fails and partial results are not acceptable."""

    def __init__(self, failed_leaves: list[int]):
        super().__init__(f"leaf queries failed: {failed_leaves}")
        self.failed_leaves = failed_leaves


@dataclass
class RootResult:
    results: list[ScoredResult]
    failed_leaves: list[int] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failed_leaves)


def root_knn(
    leaves: Sequence[LeafIndex],
    q: BinaryFingerprint,
    k: int,
    partial_ok: bool = False,
    deadline: float | None = None,
) -> RootResult:
    """Fan out to every leaf, merge by (distance, signature), truncate to k."""
    if k < 1:
        raise InputError("k must be positive")
    merged: list[tuple[int, str, int, ScoredResult]] = []
    failed: list[int] = []

    def query_leaf(leaf_id: int) -> list[ScoredResult]:
        leaf = leaves[leaf_id]
        return [
            ScoredResult(
                signature=hit.signature,
                hamming_distance=hit.distance,
                similarity=1.0 - hit.distance / leaf.dim if leaf.dim else 1.0,
                leaf_id=leaf_id,
            )
            for hit in leaf.knn(q, k)
        ]

    if len(leaves) <= 1 and deadline is None:
        for leaf_id in range(len(leaves)):
            try:
                for r in query_leaf(leaf_id):
                    merged.append((r.hamming_distance, r.signature.hex, leaf_id, r))
            except Exception:
                logger.exception("leaf %d query failed", leaf_id)
                failed.append(leaf_id)
    elif leaves:
        with ThreadPoolExecutor(max_workers=len(leaves)) as pool:
            future_map = {pool.submit(query_leaf, i): i for i in range(len(leaves))}
            done, not_done = wait(future_map, timeout=deadline)
            failed.extend(future_map[f] for f in not_done)  # missed the deadline
            for fut in done:
                leaf_id = future_map[fut]
                try:
                    for r in fut.result():
                        merged.append((r.hamming_distance, r.signature.hex, leaf_id, r))
                except Exception:
                    logger.exception("leaf %d query failed", leaf_id)
                    failed.append(leaf_id)

    failed.sort()
    if failed and not partial_ok:
        raise PartialFanoutError(failed)
    merged.sort(key=lambda t: t[:3])
    out: list[ScoredResult] = []
    seen: set[Signature] = set()
    for _, _, _, r in merged:
        if r.signature in seen:
            continue
        seen.add(r.signature)
        out.append(r)
        if len(out) == k:
            break
    return RootResult(results=out, failed_leaves=failed)


def cross_features(query_category: CategoryVector, similarity: float) -> dict[str, float]:
    """Sparse category-by-similarity features, one per present query category."""
    if not 0 <= similarity <= 1:
        raise InputError(f"similarity {similarity} must be in [0, 1]")
    return {f"cat_cross_{i}": w * similarity for i, w in query_category.items()}


def score(
    model: RankingModel,
    row: Mapping[str, float],
    gated: bool,
    gamma: float = DEFAULT_VISUAL_GAIN,
) -> float:
    """Weighted sum of the feature row; visual weights gain ``gamma`` when gated."""
    if gamma <= 0:
        raise InputError("gamma must be positive")
    total = 0.0
    for name, value in row.items():
        weight = model.weights.get(name)
        if weight is None:
            logger.debug("feature %r missing from ranking model, ignored", name)
            continue
        if gated and name in model.visual_features:
            weight = weight * gamma
        total += weight * value
    return total


def build_feature_row(
    result: ScoredResult,
    query_category: CategoryVector,
    extra: Mapping[str, float] | None = None,
) -> dict[str, float]:
    row = {"vis_sim": result.similarity, "vis_sim_indicator": 1.0}
    row.update(cross_features(query_category, result.similarity))
    if extra:
        row.update(extra)
    return row


def rerank(
    results: Sequence[ScoredResult],
    model: RankingModel,
    query_category: CategoryVector,
    dominant_present: bool,
    gamma: float = DEFAULT_VISUAL_GAIN,
    feature_provider: Callable[[Signature], Mapping[str, float]] | None = None,
) -> list[ScoredResult]:
    """Score every candidate and sort by score descending, ties by signature."""
    scored = []
    for r in results:
        extra = feature_provider(r.signature) if feature_provider else None
        row = build_feature_row(r, query_category, extra)
        scored.append(replace(r, rerank_score=score(model, row, dominant_present, gamma)))
    scored.sort(key=lambda r: (-r.rerank_score, r.signature))
    return scored


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies used for idf-weighted annotation aggregation."""

    total_documents: int
    document_frequency: Mapping[str, int]

    def idf(self, term: str) -> float:
        df = self.document_frequency.get(term, 0)
        return math.log((1 + self.total_documents) / (1 + df)) + 1.0

    @classmethod
    def from_term_sets(cls, term_sets: Iterable[Iterable[str]]) -> CorpusStats:
        df: dict[str, int] = {}
        total = 0
        for terms in term_sets:
            total += 1
            for term in set(terms):
                df[term] = df.get(term, 0) + 1
        return cls(total_documents=total, document_frequency=df)


def aggregate_annotations(
    results: Sequence[ScoredResult],
    terms_of: Callable[[Signature], Iterable[str]],
    stats: CorpusStats,
    top_n: int,
) -> list[Annotation]:
    """Sum each term's idf over the top-N results that carry it."""
    if top_n < 1:
        raise InputError("top_n must be positive")
    weights: dict[str, float] = {}
    for r in results[:top_n]:
        for term in set(terms_of(r.signature)):
            weights[term] = weights.get(term, 0.0) + stats.idf(term)
    ranked = sorted(weights.items(), key=lambda it: (-it[1], it[0]))
    return [Annotation(term, weight) for term, weight in ranked]


def category_conformity(
    results: Sequence[ScoredResult],
    category_of: Callable[[Signature], str | None],
) -> float:
    """Largest fraction of results sharing one label; unlabeled results only
    widen the denominator."""
    if not results:
        raise InputError("conformity is undefined for empty results")
    counts: dict[str, int] = {}
    for r in results:
        label = category_of(r.signature)
        if label is not None:
            counts[label] = counts.get(label, 0) + 1
    if not counts:
        return 0.0
    return max(counts.values()) / len(results)


def suppress_dot(signals: SuppressionSignals, thresholds: SuppressionThresholds) -> bool:
    """True when the dot should be shown: every signal meets its minimum."""
    return (
        signals.top_similarity >= thresholds.min_similarity
        and signals.top_annotation_score >= thresholds.min_annotation_score
        and signals.category_conformity >= thresholds.min_conformity
    )
