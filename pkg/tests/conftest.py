from __future__ import annotations

import random
import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from visearch.model import (
    Annotation,
    BinaryFingerprint,
    CategoryVector,
    Embedding,
    ImageDocument,
    compute_signature,
)

UPLOAD = datetime(2015, 9, 14, 13, 0, tzinfo=timezone.utc)


def random_fingerprint(rng: random.Random, dim: int) -> BinaryFingerprint:
    return BinaryFingerprint.from_code(rng.getrandbits(dim), dim)


def embedding_for_bits(bits: list[int]) -> Embedding:
    return Embedding(tuple(1.0 if b else -1.0 for b in bits))


def doc_from_bits(
    tag: str,
    bits: list[int],
    label: str | None = None,
    annotations: tuple[Annotation, ...] = (),
    category: CategoryVector | None = None,
) -> ImageDocument:
    """A document whose fingerprint is exactly the given bit pattern."""
    return ImageDocument.build(
        signature=compute_signature(tag.encode("utf-8")),
        upload_time=UPLOAD,
        width=100,
        height=100,
        embedding=embedding_for_bits(bits),
        annotations=annotations,
        category=category,
        class_label=label,
    )


def random_doc(rng: random.Random, dim: int, tag: str, **kwargs) -> ImageDocument:
    bits = [rng.randint(0, 1) for _ in range(dim)]
    return doc_from_bits(tag, bits, **kwargs)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


def build_data_dir(
    data_dir: Path,
    records: list[dict],
    dim: int = 32,
    seed: int = 99,
    index_shards: int = 3,
    extractor=None,
    **config_overrides,
):
    """Ingest records and drive the full pipeline through an index build."""
    from visearch.config import EngineConfig
    from visearch.corpus import ingest_images, write_jsonl
    from visearch.engine import build_index_files, swap_current
    from visearch.features import ExtractorSpec
    from visearch.pipeline import FingerprintPipeline

    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    extractor = extractor or ExtractorSpec("seeded-hash", dim, seed=seed)
    config = EngineConfig(
        dim=dim,
        extractor=extractor,
        index_shards=index_shards,
        target_shard_size=16,
        max_chunk_members=8,
        join_shards=2,
        join_block_size=4,
        **config_overrides,
    )
    config.save(data_dir)
    images = data_dir / "images-in.jsonl"
    write_jsonl(records, images)
    ingest_images(data_dir, images,
                  category_tau=config.category_tau,
                  min_confidence=config.detection_min_confidence)
    pipeline = FingerprintPipeline(
        data_dir, config.features, config.target_shard_size, config.max_chunk_members
    )
    pipeline.run()
    pipeline.merge()
    pipeline.materialize_join(config.join_shards, config.join_block_size)
    build_id = build_index_files(data_dir, config)
    swap_current(data_dir, build_id)
    return config
