from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from conftest import build_data_dir
from visearch.corpus import make_synthetic_corpus
from visearch.engine import (
    Engine,
    SearchQuery,
    current_build,
    latest_build,
    swap_current,
)
from visearch.errors import InputError, NotFoundError
from visearch.model import Box, Signature, embedding_to_b64
from visearch.service import create_app

DIM = 32


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("engine-data")
    records = make_synthetic_corpus(40, days=3, seed=21, detection_rate=0.6)
    build_data_dir(path, records, dim=DIM, seed=5)
    return path


@pytest.fixture(scope="module")
def engine(data_dir):
    return Engine.load(data_dir)


@pytest.fixture(scope="module")
def client(engine):
    return TestClient(create_app(engine))


def some_signature(engine: Engine, with_detections: bool = False) -> Signature:
    for sig in sorted(engine.documents):
        if not with_detections or engine.documents[sig].detections:
            return sig
    raise AssertionError("no suitable document")


class TestEngineSearch:
    def test_self_excluded_and_sorted(self, engine):
        sig = some_signature(engine)
        out = engine.search(SearchQuery(signature=sig, k=10))
        sigs = [r.signature for r in out.results]
        assert sig not in sigs
        dists = [r.hamming_distance for r in out.results]
        assert dists == sorted(dists)
        for r in out.results:
            assert r.similarity == 1.0 - r.hamming_distance / DIM

    def test_full_image_crop_equals_whole(self, engine):
        sig = some_signature(engine)
        doc = engine.documents[sig]
        whole = engine.search(SearchQuery(signature=sig, k=8))
        crop = engine.search(
            SearchQuery(signature=sig, crop_box=Box(0, 0, doc.width, doc.height), k=8)
        )
        assert [r.signature for r in whole.results] == [r.signature for r in crop.results]

    def test_subcrop_changes_query(self, engine):
        sig = some_signature(engine)
        out = engine.search(SearchQuery(signature=sig, crop_box=Box(1, 1, 10, 10), k=8))
        assert out.results  # valid ranked results for a crop fingerprint

    def test_unknown_signature(self, engine):
        with pytest.raises(NotFoundError):
            engine.search(SearchQuery(signature=Signature(b"\x01" * 16)))

    def test_invalid_crop_rejected(self, engine):
        sig = some_signature(engine)
        with pytest.raises(InputError):
            engine.search(SearchQuery(signature=sig, crop_box=Box(0, 0, 10_000, 10)))

    def test_rerank_with_default_model_keeps_similarity_order(self, engine):
        sig = some_signature(engine)
        plain = engine.search(SearchQuery(signature=sig, k=10))
        ranked = engine.search(SearchQuery(signature=sig, k=10, enable_rerank=True))
        assert sorted(r.similarity for r in ranked.results) == sorted(
            r.similarity for r in plain.results
        )
        scores = [r.rerank_score for r in ranked.results]
        assert scores == sorted(scores, reverse=True)

    def test_unknown_model_rejected(self, engine):
        sig = some_signature(engine)
        with pytest.raises(InputError):
            engine.search(SearchQuery(signature=sig, enable_rerank=True, model_id="nope"))

    def test_refine_filpositions_terms(self, engine):
        sig = some_signature(engine)
        base = engine.search(SearchQuery(signature=sig, k=25))
        if not base.annotations:
            pytest.skip("corpus produced no annotations")
        term = base.annotations[0].term
        refined = engine.search(SearchQuery(signature=sig, k=25, refine_terms=(term,)))
        for r in refined.results:
            doc = engine.documents[r.signature]
            assert term in {a.term for a in doc.annotations}

    def test_dots_satisfy_suppression_predicate(self, engine):
        for sig in sorted(engine.documents):
            out = engine.search(SearchQuery(signature=sig, k=10))
            expected = (
                out.signals.top_similarity >= engine.config.thresholds.min_similarity
                and out.signals.top_annotation_score
                >= engine.config.thresholds.min_annotation_score
                and out.signals.category_conformity
                >= engine.config.thresholds.min_conformity
            )
            for dot in out.dots:
                assert dot.show == expected


class TestEngineObjectAndLens:
    def test_object_search_by_box(self, engine):
        sig = some_signature(engine, with_detections=True)
        det = engine.documents[sig].detections[0]
        hits = engine.object_query(signature=sig, box=det.box, k=5)
        assert hits
        assert hits[0].scene_signature == sig  # its own scene at distance 0
        assert hits[0].distance == 0
        scenes = [h.scene_signature for h in hits]
        assert len(scenes) == len(set(scenes))

    def test_object_search_by_object_id(self, engine):
        entry = next(iter(engine.indexes.object_entries.values()))
        hits = engine.object_query(object_id=entry.object_id, k=3)
        assert hits[0].scene_signature == entry.scene_signature

    def test_unknown_object(self, engine):
        with pytest.raises(NotFoundError):
            engine.object_query(object_id=Signature(b"\x02" * 16))

    def test_lens_blends_and_echoes_understanding(self, engine):
        sig = some_signature(engine, with_detections=True)
        out = engine.lens(SearchQuery(signature=sig, k=10))
        assert "visual" in out.gated_sources
        sigs = [r.signature for r in out.results]
        assert len(sigs) == len(set(sigs))
        assert sig not in sigs
        assert 0.0 <= out.understanding.annotation_confidence <= 1.0


class TestIndexSwap:
    def test_pointer_swap(self, data_dir):
        build = latest_build(data_dir)
        swap_current(data_dir, build)
        assert current_build(data_dir) == build

    def test_swap_unknown_build_rejected(self, data_dir):
        with pytest.raises(NotFoundError):
            swap_current(data_dir, "no-such-build")

    def test_concurrent_queries_during_swap(self, data_dir):
        engine = Engine.load(data_dir)
        sig = some_signature(engine)
        stop = threading.Event()
        errors: list[Exception] = []

        def hammer():
            while not stop.is_set():
                try:
                    engine.search(SearchQuery(signature=sig, k=5))
                except Exception as exc:  # pragma: no cover
                    errors.append(exc)

        threads = [threading.Thread(target=hammer) for _ in range(4)]
        for t in threads:
            t.start()
        try:
            for _ in range(20):
                engine.reload_indexes(data_dir, engine.indexes.build_id)
        finally:
            stop.set()
            for t in threads:
                t.join()
        assert errors == []


class TestService:
    def test_search_by_signature(self, client, engine):
        sig = some_signature(engine)
        resp = client.post("/v1/search", json={"signature": sig.hex, "k": 5})
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"results", "annotations", "conformity", "dots", "partial"}
        assert body["partial"] is False
        assert all(r["signature"] != sig.hex for r in body["results"])
        assert len(body["results"]) <= 5
        for r in body["results"]:
            assert r["similarity"] == 1.0 - r["hammingDistance"] / DIM
            assert r["source"] == "visual"

    def test_search_crop_full_equals_whole(self, client, engine):
        sig = some_signature(engine)
        doc = engine.documents[sig]
        whole = client.post("/v1/search", json={"signature": sig.hex, "k": 6}).json()
        crop = client.post(
            "/v1/search",
            json={"signature": sig.hex, "cropBox": [0, 0, doc.width, doc.height], "k": 6},
        ).json()
        assert whole["results"] == crop["results"]

    def test_search_raw_embedding(self, client, engine):
        sig = some_signature(engine)
        emb = engine.documents[sig].embedding
        resp = client.post("/v1/search", json={"rawEmbedding": embedding_to_b64(emb), "k": 4})
        assert resp.status_code == 200
        top = resp.json()["results"][0]
        assert top["hammingDistance"] == 0  # the doc itself, not excluded for raw queries
        assert resp.json()["dots"] == []

    def test_validation_errors(self, client, engine):
        sig = some_signature(engine)
        assert client.post("/v1/search", json={"signature": sig.hex, "k": 0}).status_code == 400
        assert client.post("/v1/search", json={"k": 5}).status_code == 400
        assert (
            client.post("/v1/search", json={"signature": "ab", "k": 5}).status_code == 400
        )
        assert (
            client.post(
                "/v1/search", json={"signature": sig.hex, "cropBox": [0, 0, 1e9, 1]}
            ).status_code
            == 400
        )

    def test_unknown_signature_404(self, client):
        resp = client.post("/v1/search", json={"signature": "9" * 32})
        assert resp.status_code == 404

    def test_dots_match_suppression(self, client, engine):
        sig = some_signature(engine, with_detections=True)
        body = client.post("/v1/search", json={"signature": sig.hex, "k": 10}).json()
        t = engine.config.thresholds
        top_sim = body["results"][0]["similarity"] if body["results"] else 0.0
        top_ann = body["annotations"][0]["weight"] if body["annotations"] else 0.0
        expected = (
            top_sim >= t.min_similarity
            and top_ann >= t.min_annotation_score
            and body["conformity"] >= t.min_conformity
        )
        assert body["dots"], "expected detection dots on this document"
        for dot in body["dots"]:
            assert dot["show"] == expected

    def test_object_search_endpoint(self, client, engine):
        sig = some_signature(engine, with_detections=True)
        det = engine.documents[sig].detections[0]
        resp = client.post(
            "/v1/object-search",
            json={"signature": sig.hex, "box": list(det.box.as_tuple()), "k": 5},
        )
        assert resp.status_code == 200
        scenes = resp.json()["scenes"]
        assert scenes[0]["signature"] == sig.hex
        assert scenes[0]["distance"] == 0
        names = [s["signature"] for s in scenes]
        assert len(names) == len(set(names))

    def test_object_search_unknown_object(self, client):
        resp = client.post("/v1/object-search", json={"objectId": "a" * 32, "k": 3})
        assert resp.status_code == 404

    def test_lens_endpoint(self, client, engine):
        sig = some_signature(engine, with_detections=True)
        resp = client.post("/v1/lens", json={"signature": sig.hex, "k": 8})
        assert resp.status_code == 200
        body = resp.json()
        qu = body["queryUnderstanding"]
        assert "visual" in qu["sources"]
        assert isinstance(qu["annotations"], list)
        sigs = [r["signature"] for r in body["results"]]
        assert len(sigs) == len(set(sigs))

    def test_documents_endpoints(self, client, engine):
        listing = client.get("/v1/documents", params={"limit": 5}).json()
        assert listing["total"] == len(engine.documents)
        assert len(listing["documents"]) == 5
        first = listing["documents"][0]
        got = client.get(f"/v1/documents/{first['signature']}")
        assert got.status_code == 200
        assert got.json() == first
        assert client.get("/v1/documents/" + "0" * 32).status_code == 404

    def test_status(self, client, engine):
        body = client.get("/v1/status").json()
        assert body["documents"] == len(engine.documents)
        assert len(body["leaves"]) == engine.config.index_shards

    def test_latency_header_only(self, client, engine):
        sig = some_signature(engine)
        resp = client.post("/v1/search", json={"signature": sig.hex, "k": 3})
        assert "X-Elapsed-Ms" in resp.headers


class TestModelFiles:
    def test_engine_loads_ranking_model_from_json(self, tmp_path):
        model_path = tmp_path / "model.json"
        model_path.write_text(json.dumps({
            "weights": {"vis_sim": 2.0, "vis_sim_indicator": 0.5},
            "visual_features": ["vis_sim"],
        }))
        records = make_synthetic_corpus(10, days=1, seed=41, detection_rate=0.0)
        build_data_dir(tmp_path / "d", records, dim=16, seed=9,
                       models={"default": None, "boosted": str(model_path)})
        engine = Engine.load(tmp_path / "d")
        assert engine.models["boosted"].weights == {"vis_sim": 2.0, "vis_sim_indicator": 0.5}
        sig = some_signature(engine)
        out = engine.search(SearchQuery(signature=sig, k=5, enable_rerank=True,
                                        model_id="boosted"))
        scores = [r.rerank_score for r in out.results]
        assert scores == sorted(scores, reverse=True)


class TestDeterministicResponses:
    def test_two_identical_builds_identical_bytes(self, tmp_path):
        records = make_synthetic_corpus(25, days=2, seed=31, detection_rate=0.5)
        bodies = []
        for run in ("a", "b"):
            d = tmp_path / run
            build_data_dir(d, records, dim=16, seed=3)
            engine = Engine.load(d)
            client = TestClient(create_app(engine))
            sig = some_signature(engine, with_detections=True)
            req = {"signature": sig.hex, "k": 10, "enableRerank": True}
            bodies.append(
                (
                    client.post("/v1/search", json=req).content,
                    client.post("/v1/lens", json={"signature": sig.hex, "k": 10}).content,
                    client.get("/v1/status").content,
                )
            )
        assert bodies[0] == bodies[1]
