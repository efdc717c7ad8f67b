from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from visearch.errors import DimensionError, InputError
from visearch.model import (
    Annotation,
    BinaryFingerprint,
    Box,
    CategoryVector,
    DetectedObject,
    Embedding,
    ImageDocument,
    Signature,
    compute_signature,
    document_from_json,
    document_to_json,
    embedding_from_b64,
    embedding_to_b64,
    fingerprint_from_b64,
    fingerprint_to_b64,
    threshold_category,
)

# Standard test vectors for the md5 digest function.
KNOWN_DIGESTS = {
    b"": "d41d8cd98f00b204e9800998ecf8427e",
    b"abc": "900150983cd24fb0d6963f7d28e17f72",
}


class TestSignature:
    def test_known_digests(self):
        for data, expected in KNOWN_DIGESTS.items():
            assert compute_signature(data).hex == expected

    def test_deterministic(self):
        assert compute_signature(b"same bytes") == compute_signature(b"same bytes")

    def test_distinct_inputs_distinct_digests(self):
        digests = {compute_signature(k).hex for k in KNOWN_DIGESTS}
        digests.add(compute_signature(b"third").hex)
        assert len(digests) == 3

    def test_ordering_matches_hex(self):
        sigs = [compute_signature(bytes([i])) for i in range(50)]
        assert sorted(sigs) == sorted(sigs, key=lambda s: s.hex)

    def test_hex_roundtrip(self):
        sig = compute_signature(b"roundtrip")
        assert Signature.from_hex(sig.hex) == sig

    def test_rejects_bad_lengths(self):
        with pytest.raises(InputError):
            Signature(b"short")
        with pytest.raises(InputError):
            Signature.from_hex("abcd")


class TestThresholdCategory:
    def test_all_zero_gives_empty(self):
        assert len(threshold_category([0.0] * 32, 0.1)) == 0

    def test_single_survivor(self):
        raw = [0.01] * 32
        raw[3] = 0.9
        cv = threshold_category(raw, 0.1)
        assert cv.items() == [(3, 0.9)]

    def test_exact_tau_excluded(self):
        raw = [0.0] * 32
        raw[5] = 0.25
        assert len(threshold_category(raw, 0.25)) == 0
        assert threshold_category(raw, 0.2499).items() == [(5, 0.25)]

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionError):
            threshold_category([0.5] * 31, 0.1)

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=32, max_size=32),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_every_kept_weight_exceeds_tau(self, raw, tau):
        cv = threshold_category(raw, tau)
        assert len(cv) <= 32
        for i, w in cv.items():
            assert w > tau
            assert raw[i] == w


class TestCategoryVector:
    def test_rejects_out_of_range(self):
        with pytest.raises(InputError):
            CategoryVector({32: 0.5})
        with pytest.raises(InputError):
            CategoryVector({0: 0.0})
        with pytest.raises(InputError):
            CategoryVector({0: 1.5})

    def test_argmax_prefers_weight_then_low_index(self):
        assert CategoryVector({4: 0.3, 2: 0.9}).argmax() == 2
        assert CategoryVector({4: 0.5, 2: 0.5}).argmax() == 2
        assert CategoryVector.empty().argmax() is None


class TestBinaryFingerprint:
    def test_bits_roundtrip(self):
        bits = [1, 0, 1, 1, 0, 0, 0, 1, 1, 0]
        fp = BinaryFingerprint.from_bits(bits)
        assert fp.dim == 10
        assert fp.bits() == bits
        assert [fp.bit(i) for i in range(10)] == bits

    def test_padding_must_be_zero(self):
        with pytest.raises(InputError):
            BinaryFingerprint(b"\xff", 4)  # low nibble is padding
        assert BinaryFingerprint(b"\xf0", 4).bits() == [1, 1, 1, 1]

    def test_packing_is_msb_first(self):
        fp = BinaryFingerprint.from_bits([1, 0, 1, 1, 0, 0, 0, 1])
        assert fp.packed == bytes([0b10110001])


class TestEmbedding:
    def test_rejects_nan(self):
        with pytest.raises(InputError):
            Embedding((0.0, float("nan")))

    def test_dim(self):
        assert Embedding((1.0, 2.0, 3.0)).dim == 3


class TestWireEncoding:
    def test_embedding_b64_golden(self):
        # struct.pack('<2f', 1.0, -0.5) == 0000803f000000bf
        assert embedding_to_b64(Embedding((1.0, -0.5))) == "AACAPwAAAL8="
        assert embedding_from_b64("AACAPwAAAL8=").values == (1.0, -0.5)

    def test_fingerprint_b64_golden(self):
        fp = BinaryFingerprint.from_bits([1, 0, 1, 1, 0, 0, 0, 1])
        assert fingerprint_to_b64(fp) == "sQ=="
        assert fingerprint_from_b64("sQ==", 8) == fp

    def test_document_roundtrip(self):
        doc = ImageDocument.build(
            signature=compute_signature(b"wire"),
            upload_time=datetime(2015, 9, 14, 13, tzinfo=timezone.utc),
            width=640,
            height=480,
            embedding=Embedding((0.5, -1.0, 2.0, 0.0)),
            annotations=(Annotation("lamp", 0.8),),
            category=CategoryVector({3: 0.9}),
            class_label="decor",
            detections=(DetectedObject(Box(10, 10, 50, 40), "lamp", 0.95),),
        )
        data = json.loads(json.dumps(document_to_json(doc)))
        assert document_from_json(data) == doc

    def test_timestamp_is_utc_z(self):
        doc_json = document_to_json(
            ImageDocument.build(
                signature=compute_signature(b"tz"),
                upload_time=datetime(2015, 9, 14, 13, tzinfo=timezone.utc),
                width=10,
                height=10,
                embedding=Embedding((1.0,)),
            )
        )
        assert doc_json["upload_time"] == "2015-09-14T13:00:00Z"


class TestImageDocument:
    def test_fingerprint_must_match_embedding(self):
        emb = Embedding((1.0, -1.0))
        with pytest.raises(InputError):
            ImageDocument(
                signature=compute_signature(b"bad"),
                upload_time=datetime(2015, 1, 1, tzinfo=timezone.utc),
                width=10,
                height=10,
                embedding=emb,
                fingerprint=BinaryFingerprint.from_bits([0, 0]),
            )

    def test_detection_out_of_bounds_rejected(self):
        with pytest.raises(InputError):
            ImageDocument.build(
                signature=compute_signature(b"oob"),
                upload_time=datetime(2015, 1, 1, tzinfo=timezone.utc),
                width=20,
                height=20,
                embedding=Embedding((1.0,)),
                detections=(DetectedObject(Box(10, 10, 20, 5), "x", 0.8),),
            )
