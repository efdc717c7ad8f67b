from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import UPLOAD
from oracles import brute_force_knn
from visearch.errors import InputError
from visearch.evaluation import (
    EvalDataset,
    EvalVariant,
    SynthParams,
    dataset_from_jsonl,
    dataset_to_jsonl,
    precision_at_k,
    run_eval,
    synth_dataset,
)
from visearch.index import build_leaf
from visearch.model import Embedding, ImageDocument, compute_signature


def _doc(tag: str, values: tuple[float, ...], label: str) -> ImageDocument:
    return ImageDocument.build(
        signature=compute_signature(tag.encode()),
        upload_time=UPLOAD,
        width=10,
        height=10,
        embedding=Embedding(values),
        class_label=label,
    )


class TestPrecisionAtK:
    def test_fixture(self):
        assert precision_at_k(["A", "B", "A"], "A", 1) == 1.0
        assert precision_at_k(["A", "B", "A"], "A", 3) == pytest.approx(2 / 3)

    def test_empty_results(self):
        for k in (1, 5, 10):
            assert precision_at_k([], "A", k) == 0.0

    def test_all_matching(self):
        assert precision_at_k(["A"] * 10, "A", 5) == 1.0

    def test_short_list_divides_by_k(self):
        assert precision_at_k(["A", "A"], "A", 4) == 0.5

    @given(st.lists(st.sampled_from("AB"), max_size=30), st.integers(1, 15))
    def test_range_and_prefix_consistency(self, labels, k):
        p = precision_at_k(labels, "A", k)
        assert 0.0 <= p <= 1.0
        assert p == precision_at_k(labels[:k], "A", k)


# Hand fixture: query d0 with label A; four A docs at ascending small
# distances, five B docs (sign-flipped) strictly farther under every metric.
HAND_DOCS = [
    ("d0", (1.0, 1.0, -1.0, -1.0), "A"),
    ("d1", (1.5, 1.0, -1.0, -1.0), "A"),
    ("d2", (1.0, 2.0, -1.0, -1.0), "A"),
    ("d3", (1.0, 1.0, -2.5, -1.0), "A"),
    ("d4", (1.0, 1.0, -1.0, -3.0), "A"),
    ("d5", (-1.0, -1.0, 1.0, 1.0), "B"),
    ("d6", (-1.5, -1.0, 1.0, 1.0), "B"),
    ("d7", (-1.0, -2.0, 1.0, 1.0), "B"),
    ("d8", (-1.0, -1.0, 2.5, 1.0), "B"),
    ("d9", (-1.0, -1.0, 1.0, 3.0), "B"),
]


def hand_dataset() -> EvalDataset:
    corpus = [_doc(tag, values, label) for tag, values, label in HAND_DOCS]
    return EvalDataset(corpus=corpus, queries=[corpus[0].signature])


class TestRunEval:
    # Hand-computed: index ranking is d1..d4 (A) then d5..d9 (B) under every
    # variant, so P@1 = 1, P@5 = 4/5, P@10 = 4/10 (nine indexed docs).
    EXPECTED = {1: 1.0, 5: 0.8, 10: 0.4}

    @pytest.mark.parametrize(
        "variant",
        [
            EvalVariant("raw", "l1"),
            EvalVariant("raw", "l2"),
            EvalVariant("binary", "hamming"),
        ],
    )
    def test_hand_fixture_exact_table(self, variant):
        report = run_eval(hand_dataset(), variant, ks=[1, 5, 10])
        assert report.mean_precision == self.EXPECTED
        assert report.index_count == 9
        assert report.query_count == 1

    def test_two_cluster_separation_gives_perfect_precision(self):
        docs = []
        for i in range(6):
            docs.append(_doc(f"a{i}", (1.0, 1.0 + i * 0.01), "A"))
            docs.append(_doc(f"b{i}", (-1.0, -1.0 - i * 0.01), "B"))
        ds = EvalDataset(corpus=docs, queries=[docs[0].signature, docs[1].signature])
        for variant in (EvalVariant("raw", "l1"), EvalVariant("raw", "l2"),
                        EvalVariant("binary", "hamming")):
            report = run_eval(ds, variant, ks=[1, 5])
            assert report.mean_precision == {1: 1.0, 5: 1.0}

    def test_binary_ranking_matches_oracle(self, rng):
        docs = [
            _doc(f"r{i}", tuple(rng.uniform(-1, 1) for _ in range(16)), "X")
            for i in range(40)
        ]
        ds = EvalDataset(corpus=docs, queries=[d.signature for d in docs[:5]])
        index_docs = [d for d in docs if d.signature not in set(ds.queries[:5])]
        leaf = build_leaf([d for d in docs[5:]], exhaustive_fallback=True)
        for q in docs[:5]:
            got = [(h.signature.hex, h.distance) for h in leaf.knn(q.fingerprint, 35)]
            expected = brute_force_knn(
                [(d.signature.hex, d.fingerprint) for d in docs[5:]], q.fingerprint, 35
            )
            assert got == expected

    def test_unlabeled_doc_rejected(self):
        good = _doc("ok", (1.0,), "A")
        bad = ImageDocument.build(
            signature=compute_signature(b"unlabeled"),
            upload_time=UPLOAD,
            width=10,
            height=10,
            embedding=Embedding((1.0,)),
        )
        with pytest.raises(InputError):
            EvalDataset(corpus=[good, bad], queries=[good.signature])

    def test_query_must_be_in_corpus(self):
        good = _doc("present", (1.0,), "A")
        with pytest.raises(InputError):
            EvalDataset(corpus=[good], queries=[compute_signature(b"ghost")])


class TestSynthDataset:
    def test_deterministic(self):
        p = SynthParams(3, 5, 16, 0.05, 4, seed=9)
        a, b = synth_dataset(p), synth_dataset(p)
        assert [d.signature for d in a.corpus] == [d.signature for d in b.corpus]
        assert [d.embedding for d in a.corpus] == [d.embedding for d in b.corpus]
        assert a.queries == b.queries

    def test_only_noise_when_per_class_zero(self):
        ds = synth_dataset(SynthParams(3, 0, 8, 0.1, 7, seed=1))
        assert len(ds.corpus) == 7
        assert all(d.class_label == "__noise" for d in ds.corpus)
        assert ds.queries == []

    def test_zero_tightness_perfect_precision_all_variants(self):
        ds = synth_dataset(SynthParams(4, 12, 64, 0.0, 8, seed=5))
        for variant in (EvalVariant("raw", "l1"), EvalVariant("raw", "l2"),
                        EvalVariant("binary", "hamming")):
            report = run_eval(ds, variant, ks=[1, 5, 10])
            assert report.mean_precision == {1: 1.0, 5: 1.0, 10: 1.0}, variant

    def test_jsonl_roundtrip(self, tmp_path):
        ds = synth_dataset(SynthParams(2, 4, 8, 0.1, 3, seed=2))
        path = tmp_path / "ds.jsonl"
        dataset_to_jsonl(ds, path)
        loaded = dataset_from_jsonl(path)
        assert loaded.queries == ds.queries
        assert loaded.corpus == ds.corpus

    def test_report_json_shape(self):
        report = run_eval(hand_dataset(), EvalVariant("binary", "hamming"), ks=[1, 5])
        payload = json.loads(json.dumps(report.to_json()))
        row = payload["rows"][0]
        assert row["type"] == "binary" and row["dist"] == "hamming"
        assert row["p_at_1"] == 1.0 and row["p_at_5"] == 0.8
        assert "caveat" in payload and payload["caveat"]
