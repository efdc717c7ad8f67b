"""Offline retrieval evaluation: Precision@K under same-class-label relevance.

A labeled corpus is split into query images and an index (queries never enter
the index). Each query ranks the index under one variant, a (representation,
metric) pair, and a result counts as relevant when it shares the query's
class label. Scores here measure this corpus and extractor only; they are not
comparable across systems or to any published benchmark, and the report says
so explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Literal, Sequence

import numpy as np

from .errors import DimensionError, InputError
from .features import l1, l2
from .index import LeafIndex, build_leaf
from .model import Annotation, CategoryVector, Embedding, ImageDocument, Signature, compute_signature

Metric = Literal["l1", "l2", "hamming"]
Representation = Literal["raw", "binary"]

REPORT_CAVEAT = (
    "Precision values depend entirely on the supplied corpus and embedding "
    "extractor; they are protocol output, not a benchmark, and are not "
    "comparable to results from any other system or dataset."
)


@dataclass(frozen=True)
class EvalVariant:
    representation: Representation
    metric: Metric

    def __post_init__(self) -> None:
        if self.representation == "binary" and self.metric != "hamming":
            raise InputError("binary representation pairs with the hamming metric")
        if self.representation == "raw" and self.metric == "hamming":
            raise InputError("raw representation pairs with l1 or l2")


@dataclass
class EvalDataset:
    """Labeled corpus plus the query subset (excluded from the index)."""

    corpus: list[ImageDocument]
    queries: list[Signature]

    def __post_init__(self) -> None:
        by_sig = {d.signature for d in self.corpus}
        for d in self.corpus:
            if d.class_label is None:
                raise InputError(f"document {d.signature.hex} is unlabeled")
        for q in self.queries:
            if q not in by_sig:
                raise InputError(f"query {q.hex} not present in corpus")


def precision_at_k(result_labels: Sequence[str], query_label: str, k: int) -> float:
    """Matching fraction of the first min(k, len) results, over a divisor of k."""
    if k < 1:
        raise InputError("k must be positive")
    hits = sum(1 for label in result_labels[:k] if label == query_label)
    return hits / k


@dataclass
class EvalReport:
    variant: EvalVariant
    ks: list[int]
    mean_precision: dict[int, float]
    query_count: int
    index_count: int
    caveat: str = REPORT_CAVEAT

    def to_json(self) -> dict:
        # Row shape mirrors a model-comparison table; the model and layer
        # columns are placeholders since embeddings here are synthetic inputs.
        return {
            "caveat": self.caveat,
            "rows": [
                {
                    "model": "input-embeddings",
                    "layer": "n/a",
                    "type": self.variant.representation,
                    "dist": self.variant.metric,
                    **{f"p_at_{k}": self.mean_precision[k] for k in self.ks},
                }
            ],
            "query_count": self.query_count,
            "index_count": self.index_count,
        }


def _rank_raw(
    query: ImageDocument, index_docs: list[ImageDocument], metric: Metric
) -> list[Signature]:
    dist = l1 if metric == "l1" else l2
    scored = sorted(
        ((dist(query.embedding, d.embedding), d.signature) for d in index_docs),
        key=lambda t: (t[0], t[1]),
    )
    return [sig for _, sig in scored]


def run_eval(
    ds: EvalDataset,
    variant: EvalVariant,
    ks: Sequence[int] = (1, 5, 10),
) -> EvalReport:
    """Mean P@K over queries, ranking the index by the variant's distance."""
    if not ds.queries:
        raise InputError("dataset has no queries")
    dims = {d.embedding.dim for d in ds.corpus}
    if len(dims) > 1:
        raise DimensionError(f"mixed embedding dims in corpus: {sorted(dims)}")
    query_set = set(ds.queries)
    index_docs = [d for d in ds.corpus if d.signature not in query_set]
    docs_by_sig = {d.signature: d for d in ds.corpus}
    label_of = {d.signature: d.class_label for d in ds.corpus}

    leaf: LeafIndex | None = None
    if variant.representation == "binary":
        leaf = build_leaf(index_docs, exhaustive_fallback=True)

    ks = sorted(set(int(k) for k in ks))
    sums = {k: 0.0 for k in ks}
    for qsig in ds.queries:
        qdoc = docs_by_sig[qsig]
        if leaf is not None:
            ranking = [h.signature for h in leaf.knn(qdoc.fingerprint, max(ks))]
        else:
            ranking = _rank_raw(qdoc, index_docs, variant.metric)
        labels = [label_of[s] for s in ranking]
        for k in ks:
            sums[k] += precision_at_k(labels, qdoc.class_label, k)
    n = len(ds.queries)
    return EvalReport(
        variant=variant,
        ks=list(ks),
        mean_precision={k: sums[k] / n for k in ks},
        query_count=n,
        index_count=len(index_docs),
    )


@dataclass(frozen=True)
class SynthParams:
    num_classes: int
    per_class: int
    dim: int
    cluster_tightness: float
    noise_docs: int
    seed: int

    def __post_init__(self) -> None:
        if self.num_classes < 0 or self.per_class < 0 or self.noise_docs < 0:
            raise InputError("counts must be non-negative")
        if self.dim < 1:
            raise DimensionError("dim must be positive")
        if self.cluster_tightness < 0:
            raise InputError("cluster tightness must be non-negative")


NOISE_LABEL = "__noise"


def synth_dataset(params: SynthParams) -> EvalDataset:
    """Clustered labeled corpus plus heavy-tailed noise documents.

    Class members are a random center plus a bounded perturbation scaled by
    ``cluster_tightness``; noise comes from a standard Cauchy. The first
    member of each class becomes that class's query.
    """
    rng = np.random.default_rng(params.seed)
    upload = datetime(2015, 9, 14, tzinfo=timezone.utc)
    corpus: list[ImageDocument] = []
    queries: list[Signature] = []

    def make_doc(tag: str, vector: np.ndarray, label: str) -> ImageDocument:
        content = f"synth:{params.seed}:{tag}".encode("ascii")
        quantized = vector.astype(np.float32)  # wire format stores float32
        return ImageDocument.build(
            signature=compute_signature(content),
            upload_time=upload,
            width=100,
            height=100,
            embedding=Embedding(tuple(float(v) for v in quantized)),
            annotations=(Annotation(label.strip("_") or "noise", 1.0),),
            category=CategoryVector.empty(),
            class_label=label,
        )

    for c in range(params.num_classes):
        center = rng.uniform(-1.0, 1.0, params.dim)
        for i in range(params.per_class):
            offset = params.cluster_tightness * rng.uniform(-1.0, 1.0, params.dim)
            doc = make_doc(f"class{c}:{i}", center + offset, f"class_{c}")
            corpus.append(doc)
            if i == 0:
                queries.append(doc.signature)
    for i in range(params.noise_docs):
        doc = make_doc(f"noise:{i}", rng.standard_cauchy(params.dim), NOISE_LABEL)
        corpus.append(doc)
    return EvalDataset(corpus=corpus, queries=queries)


def dataset_to_jsonl(ds: EvalDataset, path) -> None:
    from .model import document_to_json

    with open(path, "w", encoding="utf-8") as fh:
        header = {"queries": [q.hex for q in ds.queries]}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc in ds.corpus:
            fh.write(json.dumps(document_to_json(doc), sort_keys=True) + "\n")


def dataset_from_jsonl(path) -> EvalDataset:
    from .model import document_from_json

    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        corpus = [document_from_json(json.loads(line)) for line in fh if line.strip()]
    return EvalDataset(
        corpus=corpus, queries=[Signature.from_hex(h) for h in header["queries"]]
    )
