from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from visearch.blend import (
    BlendConfig,
    QueryUnderstanding,
    SourceResult,
    blend,
    gate_sources,
    interleave,
)
from visearch.errors import InputError
from visearch.model import Box, DetectedObject, compute_signature
from visearch.retrieval import ScoredResult


def _r(tag: str, source: str = "visual") -> ScoredResult:
    return ScoredResult(
        signature=compute_signature(tag.encode()),
        hamming_distance=0,
        similarity=1.0,
        source=source,  # type: ignore[arg-type]
    )


DOMINANT = DetectedObject(Box(0, 0, 50, 50), "bag", 0.95)


class TestGateSources:
    def test_low_confidence_no_dominant(self):
        qu = QueryUnderstanding(annotation_confidence=0.0)
        assert gate_sources(qu, BlendConfig()) == {"visual"}

    def test_everything_on(self):
        qu = QueryUnderstanding(annotation_confidence=1.0, dominant=DOMINANT)
        assert gate_sources(qu, BlendConfig()) == {"visual", "textual", "objectSearch"}

    def test_threshold_inclusive(self):
        config = BlendConfig(min_annotation_confidence=0.2)
        qu = QueryUnderstanding(annotation_confidence=0.2)
        assert "textual" in gate_sources(qu, config)
        qu_low = QueryUnderstanding(annotation_confidence=0.19999)
        assert "textual" not in gate_sources(qu_low, config)


class TestInterleave:
    def test_three_to_one_fixture(self):
        p = [_r(f"r{i}") for i in range(1, 7)]
        s = [_r(f"v{i}") for i in range(1, 3)]
        merged = interleave(p, s)
        expected = [p[0], p[1], p[2], s[0], p[3], p[4], p[5], s[1]]
        assert merged == expected

    def test_empty_secondary(self):
        p = [_r(f"p{i}") for i in range(4)]
        assert interleave(p, []) == p

    def test_empty_primary(self):
        s = [_r(f"s{i}") for i in range(4)]
        assert interleave([], s) == s

    def test_secondary_positions(self):
        p = [_r(f"p{i}") for i in range(30)]
        s = [_r(f"s{i}") for i in range(6)]
        merged = interleave(p, s)
        s_sigs = {r.signature for r in s}
        positions = [i + 1 for i, r in enumerate(merged) if r.signature in s_sigs]
        assert positions == [4, 8, 12, 16, 20, 24]

    def test_duplicate_dropped_keeps_first(self):
        shared = _r("shared")
        p = [_r("p1"), shared, _r("p2")]
        s = [shared, _r("s1")]
        merged = interleave(p, s)
        assert [r.signature for r in merged].count(shared.signature) == 1
        assert merged.index(shared) == 1

    def test_rejects_bad_runs(self):
        with pytest.raises(InputError):
            interleave([], [], 0, 0)

    @given(st.integers(0, 12), st.integers(0, 12))
    def test_no_duplicates_and_stability(self, np_, ns):
        p = [_r(f"hp{i}") for i in range(np_)]
        s = [_r(f"hs{i}") for i in range(ns)]
        merged = interleave(p, s)
        sigs = [r.signature for r in merged]
        assert len(sigs) == len(set(sigs)) == np_ + ns
        p_order = [r.signature for r in merged if r in p]
        s_order = [r.signature for r in merged if r in s]
        assert p_order == [r.signature for r in p]
        assert s_order == [r.signature for r in s]


class TestBlend:
    def test_only_visual_gated(self):
        visual = [_r(f"v{i}") for i in range(4)]
        textual = [_r(f"t{i}", "textual") for i in range(4)]
        qu = QueryUnderstanding(annotation_confidence=0.0)
        out = blend(
            [SourceResult("visual", tuple(visual)), SourceResult("textual", tuple(textual))],
            qu,
        )
        assert out == visual

    def test_visual_plus_textual_matches_interleave(self):
        visual = [_r(f"v{i}") for i in range(6)]
        textual = [_r(f"t{i}", "textual") for i in range(2)]
        qu = QueryUnderstanding(annotation_confidence=1.0)
        out = blend(
            [SourceResult("visual", tuple(visual)), SourceResult("textual", tuple(textual))],
            qu,
        )
        assert out == interleave(visual, textual)

    def test_duplicate_across_sources_kept_at_earlier_position(self):
        shared_sig = "shared"
        visual = [_r("v0"), _r(shared_sig)]
        textual = [_r(shared_sig, "textual"), _r("t1", "textual")]
        qu = QueryUnderstanding(annotation_confidence=1.0)
        out = blend(
            [SourceResult("visual", tuple(visual)), SourceResult("textual", tuple(textual))],
            qu,
        )
        sigs = [r.signature for r in out]
        assert sigs.count(compute_signature(shared_sig.encode())) == 1
        assert out[1].source == "visual"

    def test_duplicate_source_names_rejected(self):
        qu = QueryUnderstanding()
        with pytest.raises(InputError):
            blend(
                [SourceResult("visual", ()), SourceResult("visual", ())],
                qu,
            )

    def test_three_sources_full_priority_order(self):
        visual = [_r(f"v{i}") for i in range(6)]
        objectr = [_r(f"o{i}", "objectSearch") for i in range(2)]
        textual = [_r(f"t{i}", "textual") for i in range(2)]
        qu = QueryUnderstanding(annotation_confidence=1.0, dominant=DOMINANT)
        out = blend(
            [
                SourceResult("visual", tuple(visual)),
                SourceResult("objectSearch", tuple(objectr)),
                SourceResult("textual", tuple(textual)),
            ],
            qu,
        )
        sigs = [r.signature for r in out]
        assert len(sigs) == len(set(sigs)) == 10
        # every item comes from a gated source, source-internal order preserved
        for src_list in (visual, objectr, textual):
            order = [r.signature for r in out if r in src_list]
            assert order == [r.signature for r in src_list]
