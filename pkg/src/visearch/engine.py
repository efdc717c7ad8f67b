"""Serving engine: documents, indices, models, and the query pipelines.

One process hosts every leaf shard plus the root ranker; leaves are logical
shards with the same merge semantics a multi-machine layout would have.
Indices are immutable once built and replaced by a single reference swap, so
in-flight queries keep the index they started with.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .blend import BlendConfig, QueryUnderstanding, SourceResult, blend, gate_sources
from .config import EngineConfig
from .corpus import Catalog
from .detection import (
    ObjectEntry,
    SceneHit,
    dominant_object,
    extract_objects,
    nms,
    object_search,
)
from .errors import InputError, NotFoundError, PreconditionError
from .features import binarize, crop_embedding, hamming
from .index import LeafIndex, build_leaf, default_block_count, load_leaf, save_leaf
from .model import (
    Annotation,
    BinaryFingerprint,
    Box,
    CategoryVector,
    DetectedObject,
    Embedding,
    ImageDocument,
    Signature,
)
from .pipeline import FingerprintPipeline, VisualJoin
from .retrieval import (
    DEFAULT_MODEL,
    CorpusStats,
    RankingModel,
    RootResult,
    ScoredResult,
    SuppressionSignals,
    aggregate_annotations,
    category_conformity,
    rerank,
    root_knn,
    suppress_dot,
)

CURRENT_POINTER = "CURRENT"


@dataclass(frozen=True)
class SearchQuery:
    """Exactly one query form: signature, signature + crop, or raw embedding."""

    signature: Signature | None = None
    crop_box: Box | None = None
    raw_embedding: Embedding | None = None
    k: int = 25
    enable_rerank: bool = False
    model_id: str | None = None
    refine_terms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InputError("k must be positive")
        if self.raw_embedding is not None and self.signature is not None:
            raise InputError("give either a signature or a raw embedding, not both")
        if self.raw_embedding is None and self.signature is None:
            raise InputError("a signature or a raw embedding is required")
        if self.crop_box is not None and self.signature is None:
            raise InputError("crop queries require a signature")


@dataclass
class Dot:
    box: Box
    category: str
    show: bool


@dataclass
class SearchOutcome:
    results: list[ScoredResult]
    annotations: list[Annotation]
    conformity: float
    dots: list[Dot]
    partial: bool
    signals: SuppressionSignals


@dataclass
class LensOutcome:
    results: list[ScoredResult]
    understanding: QueryUnderstanding
    gated_sources: list[str]
    partial: bool


@dataclass
class IndexSet:
    leaves: list[LeafIndex]
    object_index: LeafIndex
    object_entries: dict[Signature, ObjectEntry]
    build_id: str


def _leaf_assignment(sig: Signature, shards: int) -> int:
    return int(sig.hex[:8], 16) % shards


def build_index_files(data_dir: Path, config: EngineConfig, shards: int | None = None,
                      block_count: int | None = None) -> str:
    """Build leaf and object index files from the join; returns the build id."""
    data_dir = Path(data_dir)
    shards = shards or config.index_shards
    if shards < 1:
        raise InputError("shard count must be positive")
    catalog = Catalog.load(data_dir)
    pipeline = FingerprintPipeline(
        data_dir, config.features, config.target_shard_size, config.max_chunk_members
    )
    join = pipeline.open_join()
    docs = _documents_from_join(catalog, join)
    m = block_count or config.block_count or default_block_count(config.dim)

    by_leaf: list[list[ImageDocument]] = [[] for _ in range(shards)]
    for sig in sorted(docs):
        by_leaf[_leaf_assignment(sig, shards)].append(docs[sig])
    entries: list[ObjectEntry] = []
    for sig in sorted(docs):
        entries.extend(
            extract_objects(docs[sig], catalog.get_bytes(sig), config.extractor,
                            config.object_nms_iou)
        )

    build_id = f"build-{join.manifest['epochs'][-1] if join.manifest['epochs'] else 'empty'}-{len(docs)}"
    build_dir = data_dir / "index" / build_id
    build_dir.mkdir(parents=True, exist_ok=True)
    for leaf_id, leaf_docs in enumerate(by_leaf):
        leaf = build_leaf(leaf_docs, m, config.exhaustive_fallback)
        save_leaf(leaf, build_dir / f"leaf-{leaf_id:03d}")
    with open(build_dir / "objects.jsonl.tmp", "w", encoding="utf-8") as fh:
        for e in sorted(entries, key=lambda e: e.object_id):
            fh.write(json.dumps({
                "object_id": e.object_id.hex,
                "scene": e.scene_signature.hex,
                "box": list(e.box.as_tuple()),
                "category": e.category,
                "confidence": e.confidence,
                "fingerprint": _b64(e.fingerprint),
                "dim": e.fingerprint.dim,
            }, sort_keys=True) + "\n")
    (build_dir / "objects.jsonl.tmp").replace(build_dir / "objects.jsonl")
    meta = {"shards": shards, "block_count": m, "dim": config.dim,
            "documents": len(docs), "objects": len(entries)}
    (build_dir / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2),
                                         encoding="utf-8")
    return build_id


def swap_current(data_dir: Path, build_id: str) -> None:
    """Point the CURRENT marker at a build, atomically."""
    data_dir = Path(data_dir)
    build_dir = data_dir / "index" / build_id
    if not (build_dir / "meta.json").exists():
        raise NotFoundError(f"no index build {build_id!r} under {data_dir / 'index'}")
    pointer = data_dir / "index" / CURRENT_POINTER
    tmp = pointer.with_name(pointer.name + ".tmp")
    tmp.write_text(build_id, encoding="utf-8")
    tmp.replace(pointer)


def latest_build(data_dir: Path) -> str | None:
    index_dir = Path(data_dir) / "index"
    if not index_dir.exists():
        return None
    builds = sorted(
        (p.name for p in index_dir.iterdir() if (p / "meta.json").exists()),
    )
    return builds[-1] if builds else None


def current_build(data_dir: Path) -> str | None:
    pointer = Path(data_dir) / "index" / CURRENT_POINTER
    if pointer.exists():
        return pointer.read_text(encoding="utf-8").strip()
    return None


def _b64(fp: BinaryFingerprint) -> str:
    return base64.b64encode(fp.packed).decode("ascii")


def _documents_from_join(catalog: Catalog, join: VisualJoin) -> dict[Signature, ImageDocument]:
    docs: dict[Signature, ImageDocument] = {}
    for fp in join.iter_fingerprints():
        rec = catalog.records.get(fp.signature)
        if rec is None:
            continue  # joined image no longer cataloged
        docs[fp.signature] = rec.to_document(fp.embedding())
    return docs


class Engine:
    """All serving state plus the search, object-search, and lens pipelines."""

    def __init__(
        self,
        documents: dict[Signature, ImageDocument],
        image_bytes_of: Catalog,
        indexes: IndexSet,
        config: EngineConfig,
        models: Mapping[str, RankingModel] | None = None,
    ) -> None:
        self.documents = documents
        self.catalog = image_bytes_of
        self.config = config
        self.models = dict(models or {})
        self.models.setdefault("default", DEFAULT_MODEL)
        self.stats = CorpusStats.from_term_sets(
            [a.term for a in doc.annotations] for _, doc in sorted(documents.items())
        )
        self._indexes = indexes
        self._swap_mutex = threading.Lock()

    # --- lifecycle ---------------------------------------------------------

    @classmethod
    def load(cls, data_dir: Path, config: EngineConfig | None = None) -> Engine:
        data_dir = Path(data_dir)
        config = config or EngineConfig.load(data_dir)
        catalog = Catalog.load(data_dir)
        pipeline = FingerprintPipeline(
            data_dir, config.features, config.target_shard_size, config.max_chunk_members
        )
        join = pipeline.open_join()
        documents = _documents_from_join(catalog, join)
        build_id = current_build(data_dir) or latest_build(data_dir)
        if build_id is None:
            raise PreconditionError("no index build found; run `index build` first")
        indexes = cls._load_index_set(data_dir, build_id, config)
        models: dict[str, RankingModel] = {}
        for name, path in (config.models or {}).items():
            if path is None:
                models[name] = DEFAULT_MODEL
            else:
                models[name] = RankingModel.from_json(
                    json.loads(Path(path).read_text(encoding="utf-8"))
                )
        return cls(documents, catalog, indexes, config, models)

    @staticmethod
    def _load_index_set(data_dir: Path, build_id: str, config: EngineConfig) -> IndexSet:
        build_dir = Path(data_dir) / "index" / build_id
        meta = json.loads((build_dir / "meta.json").read_text(encoding="utf-8"))
        leaves = [
            load_leaf(build_dir / f"leaf-{i:03d}", config.exhaustive_fallback)
            for i in range(meta["shards"])
        ]
        entries: dict[Signature, ObjectEntry] = {}
        pairs = []
        with open(build_dir / "objects.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                entry = ObjectEntry(
                    object_id=Signature.from_hex(rec["object_id"]),
                    scene_signature=Signature.from_hex(rec["scene"]),
                    box=Box(*rec["box"]),
                    category=rec["category"],
                    confidence=rec["confidence"],
                    fingerprint=BinaryFingerprint(
                        base64.b64decode(rec["fingerprint"]), rec["dim"]
                    ),
                )
                entries[entry.object_id] = entry
                pairs.append((entry.object_id, entry.fingerprint))
        object_index = LeafIndex.from_fingerprints(
            pairs, meta["block_count"], exhaustive_fallback=True
        )
        return IndexSet(leaves=leaves, object_index=object_index,
                        object_entries=entries, build_id=build_id)

    @property
    def indexes(self) -> IndexSet:
        return self._indexes

    def swap_indexes(self, new: IndexSet) -> None:
        with self._swap_mutex:
            self._indexes = new  # single reference write; readers keep the old set

    def reload_indexes(self, data_dir: Path, build_id: str) -> None:
        self.swap_indexes(self._load_index_set(Path(data_dir), build_id, self.config))

    # --- query helpers -------------------------------------------------------

    def document(self, sig: Signature) -> ImageDocument:
        doc = self.documents.get(sig)
        if doc is None:
            raise NotFoundError(f"signature {sig.hex} not indexed")
        return doc

    def _query_fingerprint(self, query: SearchQuery) -> BinaryFingerprint:
        if query.raw_embedding is not None:
            if query.raw_embedding.dim != self.config.dim:
                raise InputError(
                    f"embedding dim {query.raw_embedding.dim} != engine dim {self.config.dim}"
                )
            return binarize(query.raw_embedding)
        doc = self.document(query.signature)
        if query.crop_box is None:
            return doc.fingerprint
        if not query.crop_box.within(doc.width, doc.height):
            raise InputError(
                f"crop box {query.crop_box.as_tuple()} outside "
                f"{doc.width}x{doc.height} image"
            )
        emb = crop_embedding(
            self.config.extractor, self.catalog.get_bytes(doc.signature),
            query.crop_box, doc.width, doc.height,
        )
        return binarize(emb)

    def _dominant_for(self, doc: ImageDocument) -> DetectedObject | None:
        kept = nms(list(doc.detections), self.config.object_nms_iou)
        return dominant_object(kept, doc.width, doc.height)

    def _category_label(self, sig: Signature) -> str | None:
        doc = self.documents.get(sig)
        if doc is None or doc.category.argmax() is None:
            return None
        return f"cat_{doc.category.argmax()}"

    def _terms_of(self, sig: Signature) -> list[str]:
        doc = self.documents.get(sig)
        return [a.term for a in doc.annotations] if doc else []

    def _visual_results(self, fp: BinaryFingerprint, k: int,
                        exclude: Signature | None) -> RootResult:
        fetch = k + 1 if exclude is not None else k
        root = root_knn(self._indexes.leaves, fp, fetch, partial_ok=self.config.partial_ok)
        results = [r for r in root.results if r.signature != exclude][:k]
        return RootResult(results=results, failed_leaves=root.failed_leaves)

    # --- search ---------------------------------------------------------------

    def search(self, query: SearchQuery) -> SearchOutcome:
        fp = self._query_fingerprint(query)
        exclude = query.signature
        root = self._visual_results(fp, query.k, exclude)
        results = root.results
        if query.refine_terms:
            wanted = set(query.refine_terms)
            results = [r for r in results if wanted <= set(self._terms_of(r.signature))]
        query_doc = self.documents.get(query.signature) if query.signature else None
        if query.enable_rerank and results:
            model_id = query.model_id or "default"
            model = self.models.get(model_id)
            if model is None:
                raise InputError(f"unknown ranking model {model_id!r}")
            dominant = self._dominant_for(query_doc) if query_doc else None
            results = rerank(
                results,
                model,
                query_doc.category if query_doc else CategoryVector.empty(),
                dominant_present=dominant is not None,
                gamma=self.config.rerank_gamma,
            )
        annotations = aggregate_annotations(
            results, self._terms_of, self.stats, self.config.annotation_top_n
        )[: self.config.annotation_top_m]
        conformity = (
            category_conformity(results, self._category_label) if results else 0.0
        )
        signals = SuppressionSignals(
            top_similarity=results[0].similarity if results else 0.0,
            top_annotation_score=annotations[0].weight if annotations else 0.0,
            category_conformity=conformity,
        )
        show = suppress_dot(signals, self.config.thresholds)
        dots = []
        if query_doc is not None:
            for det in nms(list(query_doc.detections), self.config.object_nms_iou):
                dots.append(Dot(box=det.box, category=det.category, show=show))
        return SearchOutcome(
            results=results,
            annotations=annotations,
            conformity=conformity,
            dots=dots,
            partial=root.partial,
            signals=signals,
        )

    # --- object search ----------------------------------------------------------

    def object_query(
        self,
        signature: Signature | None = None,
        object_id: Signature | None = None,
        box: Box | None = None,
        k: int = 25,
    ) -> list[SceneHit]:
        if k < 1:
            raise InputError("k must be positive")
        idx = self._indexes
        if object_id is not None:
            entry = idx.object_entries.get(object_id)
            if entry is None:
                raise NotFoundError(f"unknown object {object_id.hex}")
            fp = entry.fingerprint
        elif signature is not None and box is not None:
            doc = self.document(signature)
            if not box.within(doc.width, doc.height):
                raise InputError(f"box {box.as_tuple()} outside image bounds")
            emb = crop_embedding(
                self.config.extractor, self.catalog.get_bytes(signature),
                box, doc.width, doc.height,
            )
            fp = binarize(emb)
        else:
            raise InputError("object search needs an object id, or a signature and box")
        return object_search(idx.object_index, idx.object_entries, fp, k)

    # --- lens ----------------------------------------------------------------------

    def lens(self, query: SearchQuery) -> LensOutcome:
        fp = self._query_fingerprint(query)
        exclude = query.signature
        root = self._visual_results(fp, query.k, exclude)
        visual = root.results

        annotations = aggregate_annotations(
            visual, self._terms_of, self.stats, self.config.annotation_top_n
        )[: self.config.annotation_top_m]
        top_weight = annotations[0].weight if annotations else 0.0
        confidence = min(1.0, top_weight / self.config.annotation_confidence_scale)
        query_doc = self.documents.get(query.signature) if query.signature else None
        dominant = self._dominant_for(query_doc) if query_doc else None
        qu = QueryUnderstanding(
            annotations=tuple(annotations),
            dominant=dominant,
            annotation_confidence=confidence,
        )

        blend_config = BlendConfig(
            priorities=tuple(self.config.blend_priorities),  # type: ignore[arg-type]
            ratios={k: tuple(v) for k, v in self.config.blend_ratios.items()},  # type: ignore[misc]
            min_annotation_confidence=self.config.min_annotation_confidence,
        )
        sources = [SourceResult("visual", tuple(visual))]
        sources.append(
            SourceResult("textual", tuple(self._textual_results(qu, fp, query.k, exclude)))
        )
        if dominant is not None and query_doc is not None:
            scenes = self.object_query(
                signature=query_doc.signature, box=dominant.box, k=query.k
            )
            object_results = tuple(
                ScoredResult(
                    signature=s.scene_signature,
                    hamming_distance=s.distance,
                    similarity=1.0 - s.distance / self.config.dim,
                    leaf_id=0,
                    source="objectSearch",
                )
                for s in scenes
                if s.scene_signature != exclude
            )
            sources.append(SourceResult("objectSearch", object_results))
        blended = blend(sources, qu, blend_config)
        gated = sorted(gate_sources(qu, blend_config))
        return LensOutcome(
            results=blended,
            understanding=qu,
            gated_sources=gated,
            partial=root.partial,
        )

    def _textual_results(
        self,
        qu: QueryUnderstanding,
        query_fp: BinaryFingerprint,
        k: int,
        exclude: Signature | None,
    ) -> list[ScoredResult]:
        """Annotation-overlap search: idf-weighted term match against the corpus."""
        if not qu.annotations:
            return []
        weights = {a.term: a.weight for a in qu.annotations}
        scored: list[tuple[float, Signature]] = []
        for sig in self.documents:
            if sig == exclude:
                continue
            doc = self.documents[sig]
            overlap = {a.term for a in doc.annotations} & set(weights)
            if not overlap:
                continue
            score = sum(weights[t] * self.stats.idf(t) for t in overlap)
            scored.append((score, sig))
        scored.sort(key=lambda t: (-t[0], t[1]))
        out = []
        for score, sig in scored[:k]:
            doc = self.documents[sig]
            out.append(
                ScoredResult(
                    signature=sig,
                    hamming_distance=hamming(doc.fingerprint, query_fp),
                    similarity=0.0,
                    rerank_score=score,
                    leaf_id=0,
                    source="textual",
                )
            )
        return out
