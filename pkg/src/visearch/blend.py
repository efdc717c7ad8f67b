"""Multi-source result blending with query-understanding gates.

Visual results are always eligible. The textual source needs confident query
annotations; object search needs a dominant detected object. Gated sources
fold together pairwise with a fixed run-length interleave (default three
items of the accumulated list, then one of the incoming source).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import InputError
from .model import Annotation, DetectedObject, Signature
from .retrieval import ScoredResult, Source

DEFAULT_PRIORITIES: tuple[Source, ...] = ("visual", "objectSearch", "textual")
DEFAULT_RATIO = (3, 1)  # (primary run, secondary run) per cycle


@dataclass(frozen=True)
class SourceResult:
    """One source's internally ranked result list."""

    source_name: Source
    results: tuple[ScoredResult, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "results", tuple(self.results))


@dataclass(frozen=True)
class QueryUnderstanding:
    """Signals derived from the query before any source is consulted."""

    annotations: tuple[Annotation, ...] = ()
    dominant: DetectedObject | None = None
    annotation_confidence: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if not 0 <= self.annotation_confidence <= 1:
            raise InputError("annotation confidence must be in [0, 1]")


@dataclass(frozen=True)
class BlendConfig:
    priorities: tuple[Source, ...] = DEFAULT_PRIORITIES
    ratios: dict[Source, tuple[int, int]] = field(
        default_factory=lambda: {"objectSearch": DEFAULT_RATIO, "textual": DEFAULT_RATIO}
    )
    # Placeholder cutoff: "low confidence" has no published numeric definition.
    min_annotation_confidence: float = 0.2


def gate_sources(qu: QueryUnderstanding, config: BlendConfig) -> set[Source]:
    """Which sources may contribute: visual always, textual on confident
    annotations, object search only when a dominant object exists."""
    gated: set[Source] = {"visual"}
    if qu.annotation_confidence >= config.min_annotation_confidence:
        gated.add("textual")
    if qu.dominant is not None:
        gated.add("objectSearch")
    return gated


def interleave(
    primary: Sequence[ScoredResult],
    secondary: Sequence[ScoredResult],
    primary_run: int = 3,
    secondary_run: int = 1,
) -> list[ScoredResult]:
    """Repeat ``primary_run`` primary items then ``secondary_run`` secondary
    items; when either side runs out, the rest of the other follows.
    Duplicate signatures keep their first occurrence only."""
    if primary_run < 0 or secondary_run < 0 or primary_run + secondary_run == 0:
        raise InputError("interleave runs must be non-negative and not both zero")
    out: list[ScoredResult] = []
    seen: set[Signature] = set()
    p, s = list(primary), list(secondary)
    pi = si = 0

    def take(items: list[ScoredResult], i: int) -> int:
        while i < len(items):
            item = items[i]
            i += 1
            if item.signature not in seen:
                seen.add(item.signature)
                out.append(item)
                return i
        return i

    while pi < len(p) and si < len(s):
        for _ in range(primary_run):
            pi = take(p, pi)
        for _ in range(secondary_run):
            si = take(s, si)
    while pi < len(p):
        pi = take(p, pi)
    while si < len(s):
        si = take(s, si)
    return out


def blend(
    sources: Sequence[SourceResult],
    qu: QueryUnderstanding,
    config: BlendConfig | None = None,
) -> list[ScoredResult]:
    """Gate, order by priority, fold pairwise interleaves, dedupe by signature."""
    config = config or BlendConfig()
    names = [s.source_name for s in sources]
    if len(set(names)) != len(names):
        raise InputError(f"duplicate source names: {names}")
    gated = gate_sources(qu, config)
    by_name = {s.source_name: list(s.results) for s in sources}
    ordered = [name for name in config.priorities if name in gated and name in by_name]
    if not ordered:
        return []
    acc = by_name[ordered[0]]
    for name in ordered[1:]:
        primary_run, secondary_run = config.ratios.get(name, DEFAULT_RATIO)
        acc = interleave(acc, by_name[name], primary_run, secondary_run)
    # interleave dedupes pairwise already; one final pass keeps first positions
    seen: set[Signature] = set()
    final = []
    for r in acc:
        if r.signature not in seen:
            seen.add(r.signature)
            final.append(r)
    return final
