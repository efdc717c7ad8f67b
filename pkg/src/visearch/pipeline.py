"""Incremental fingerprinting: epochs, work chunks, merges, and the join.

Images group into daily epochs by upload date. Each registered (feature,
version) pair owns a feature store under ``store/<feature>/v<N>/<epoch>/``;
an epoch is complete only when its manifest lists every shard with a passing
checksum and the recorded membership digest still matches the catalog. Each
run plans exactly the missing (feature, version, epoch) triples, executes
their work chunks (resumable, atomic, deterministic), then recombines chunk
outputs into shard files.

Merging folds all feature shards of an epoch into one fingerprint record per
image, and materialization rewrites every merged epoch into the sorted,
sharded, random-access join under ``join/``:

    catalog -> store/<feature>/v<N>/<epoch>/shard-*.jsonl
            -> fingerprints/<epoch>/shard-*.jsonl
            -> join/shard-*.jsonl (+ block index sidecars)
"""

from __future__ import annotations

import base64
import bisect
import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Mapping, Protocol, Sequence

from .corpus import Catalog
from .errors import (
    InputError,
    IntegrityError,
    NotFoundError,
    PreconditionError,
    RunLockError,
)
from .features import ExtractorSpec, extract
from .model import Embedding, Signature

DEFAULT_TARGET_SHARD_SIZE = 200_000
DEFAULT_MAX_CHUNK_MEMBERS = 1_000
DEFAULT_JOIN_SHARDS = 4
DEFAULT_JOIN_BLOCK_SIZE = 64


def assign_epoch(upload_time: datetime) -> date:
    """The UTC calendar date of the upload."""
    if upload_time.tzinfo is None:
        raise InputError("upload_time must be timezone-aware")
    return upload_time.astimezone(timezone.utc).date()


def epoch_key(epoch: date) -> str:
    return epoch.isoformat()


def parse_epoch(text: str) -> date:
    return date.fromisoformat(text)


def _shard_assignment(sig: Signature, shard_count: int) -> int:
    digest = hashlib.blake2b(sig.digest, digest_size=8, key=b"epoch-shard").digest()
    return int.from_bytes(digest, "big") % shard_count


def shard_epoch(
    members: Sequence[Signature], target_shard_size: int
) -> list[list[Signature]]:
    """Hash members into ceil(n / target) shards, each sorted by signature."""
    if target_shard_size < 1:
        raise InputError("target shard size must be positive")
    if len(set(members)) != len(members):
        raise InputError("duplicate signatures in epoch members")
    n = len(members)
    if n == 0:
        return []
    count = -(-n // target_shard_size)
    shards: list[list[Signature]] = [[] for _ in range(count)]
    for sig in members:
        shards[_shard_assignment(sig, count)].append(sig)
    for shard in shards:
        shard.sort()
    return shards


@dataclass(frozen=True)
class FeatureSpec:
    """A registered feature: its extractor and schema version."""

    name: str
    version: int
    extractor: ExtractorSpec

    def __post_init__(self) -> None:
        if not self.name:
            raise InputError("feature name must be non-empty")
        if self.version < 1:
            raise InputError("feature version must be positive")


@dataclass
class FeatureStore:
    """Completed epochs of one (feature, version) store."""

    feature_name: str
    version: int
    epochs: set[date] = field(default_factory=set)


@dataclass(frozen=True)
class EpochJob:
    feature_name: str
    version: int
    epoch: date


def plan_missing(
    stores: Sequence[FeatureStore], known_epochs: set[date]
) -> list[EpochJob]:
    """Every (feature, version, epoch) not yet complete, deterministically ordered."""
    jobs = [
        EpochJob(store.feature_name, store.version, epoch)
        for store in stores
        for epoch in known_epochs
        if epoch not in store.epochs
    ]
    jobs.sort(key=lambda j: (j.feature_name, j.version, j.epoch))
    return jobs


@dataclass(frozen=True)
class WorkChunk:
    """A contiguous slice of one shard's member list."""

    feature_name: str
    version: int
    epoch: date
    shard_index: int
    start: int
    end: int
    members: tuple[Signature, ...]

    @property
    def chunk_id(self) -> str:
        # The member slice is part of the identity, so a membership change in
        # a replanned epoch can never reuse a stale chunk output.
        h = hashlib.md5(
            f"{self.feature_name}:{self.version}:{epoch_key(self.epoch)}"
            f":{self.shard_index}:{self.start}:{self.end}".encode("ascii")
        )
        for sig in self.members:
            h.update(sig.digest)
        return h.hexdigest()


def chunk_shard(
    feature_name: str,
    version: int,
    epoch: date,
    shard_index: int,
    shard_members: Sequence[Signature],
    max_chunk_members: int,
) -> list[WorkChunk]:
    """Partition the shard member list in order into bounded chunks."""
    if max_chunk_members < 1:
        raise InputError("max chunk members must be positive")
    chunks = []
    for start in range(0, len(shard_members), max_chunk_members):
        end = min(start + max_chunk_members, len(shard_members))
        chunks.append(
            WorkChunk(
                feature_name=feature_name,
                version=version,
                epoch=epoch,
                shard_index=shard_index,
                start=start,
                end=end,
                members=tuple(shard_members[start:end]),
            )
        )
    return chunks


class ImageSource(Protocol):
    def get_bytes(self, sig: Signature) -> bytes: ...


def embedding_bytes(emb: Embedding) -> bytes:
    return struct.pack(f"<{emb.dim}f", *emb.values)


def decode_embedding(data: bytes) -> Embedding:
    if len(data) % 4:
        raise IntegrityError("feature bytes are not float32-aligned")
    n = len(data) // 4
    return Embedding(struct.unpack(f"<{n}f", data))


def run_chunk(
    chunk: WorkChunk,
    extractor: ExtractorSpec,
    image_source: ImageSource,
    out_path: Path,
    crash_hook: Callable[[WorkChunk], None] | None = None,
) -> Path:
    """Compute the chunk's feature records and publish them atomically.

    Any failure (including a missing member image) leaves no visible output;
    the temp file is removed and the chunk stays planned.
    """
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + f".tmp-{os.getpid()}")
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            for sig in chunk.members:
                data = image_source.get_bytes(sig)
                emb = extract(extractor, data)
                rec = {
                    "signature": sig.hex,
                    "features": {
                        chunk.feature_name: {
                            "version": chunk.version,
                            "data": base64.b64encode(embedding_bytes(emb)).decode("ascii"),
                        }
                    },
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        if crash_hook is not None:
            crash_hook(chunk)
        tmp.replace(out_path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return out_path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _member_digest(members: Sequence[Signature]) -> str:
    h = hashlib.md5()
    for sig in sorted(members):
        h.update(sig.digest)
    return h.hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


# --- fingerprints ---------------------------------------------------------

@dataclass(frozen=True)
class FeatureData:
    version: int
    data: bytes


@dataclass(frozen=True)
class Fingerprint:
    """The merged bundle of every computed feature version for one image."""

    signature: Signature
    features: Mapping[str, FeatureData]

    def embedding(self, feature_name: str = "embedding") -> Embedding:
        feat = self.features.get(feature_name)
        if feat is None:
            raise NotFoundError(f"fingerprint has no feature {feature_name!r}")
        return decode_embedding(feat.data)

    def to_json(self) -> dict:
        return {
            "signature": self.signature.hex,
            "features": {
                name: {
                    "version": fd.version,
                    "data": base64.b64encode(fd.data).decode("ascii"),
                }
                for name, fd in sorted(self.features.items())
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> Fingerprint:
        return cls(
            signature=Signature.from_hex(data["signature"]),
            features={
                name: FeatureData(int(fd["version"]), base64.b64decode(fd["data"]))
                for name, fd in data["features"].items()
            },
        )


@dataclass
class RunReport:
    planned_jobs: list[EpochJob] = field(default_factory=list)
    executed_chunks: int = 0
    skipped_chunks: int = 0
    completed_epochs: int = 0
    merged_epochs: int = 0


class VisualJoin:
    """Sorted, sharded, random-access fingerprint files with block sidecars.

    A signature's shard is its first 8 hex chars modulo the shard count. Each
    sidecar lists (first key, byte offset) per block; lookups binary-search
    the sidecar, then scan one block.
    """

    def __init__(self, join_dir: Path, manifest: dict) -> None:
        self.join_dir = Path(join_dir)
        self.manifest = manifest
        self.shard_count = manifest["shard_count"]
        self._sidecars: list[dict] = []
        for shard in manifest["shards"]:
            with open(self.join_dir / shard["index_file"], encoding="utf-8") as fh:
                self._sidecars.append(json.load(fh))

    @classmethod
    def open(cls, join_dir: Path, verify_checksums: bool = True) -> VisualJoin:
        join_dir = Path(join_dir)
        manifest_path = join_dir / "manifest.json"
        if not manifest_path.exists():
            raise NotFoundError(f"no join manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if verify_checksums:
            for shard in manifest["shards"]:
                actual = _sha256(join_dir / shard["file"])
                if actual != shard["checksum"]:
                    raise IntegrityError(
                        f"join shard {shard['file']} checksum mismatch"
                    )
        return cls(join_dir, manifest)

    def shard_for(self, sig: Signature) -> int:
        return int(sig.hex[:8], 16) % self.shard_count

    def lookup(self, sig: Signature) -> Fingerprint | None:
        shard_idx = self.shard_for(sig)
        sidecar = self._sidecars[shard_idx]
        blocks = sidecar["blocks"]
        if not blocks:
            return None
        keys = [b[0] for b in blocks]
        pos = bisect.bisect_right(keys, sig.hex) - 1
        if pos < 0:
            return None
        start = blocks[pos][1]
        end = blocks[pos + 1][1] if pos + 1 < len(blocks) else None
        path = self.join_dir / self.manifest["shards"][shard_idx]["file"]
        with open(path, "rb") as fh:
            fh.seek(start)
            raw = fh.read(None if end is None else end - start)
        for line in raw.splitlines():
            rec = json.loads(line)
            if rec["signature"] == sig.hex:
                return Fingerprint.from_json(rec)
            if rec["signature"] > sig.hex:
                break
        return None

    def iter_fingerprints(self) -> Iterator[Fingerprint]:
        for shard in self.manifest["shards"]:
            with open(self.join_dir / shard["file"], encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        yield Fingerprint.from_json(json.loads(line))

    def verify_sorted(self) -> int:
        """Full scan: keys strictly increasing within every shard."""
        total = 0
        for shard_idx, shard in enumerate(self.manifest["shards"]):
            prev = None
            with open(self.join_dir / shard["file"], encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    key = json.loads(line)["signature"]
                    if prev is not None and key <= prev:
                        raise IntegrityError(
                            f"shard {shard['file']} not strictly sorted at {key}"
                        )
                    if int(key[:8], 16) % self.shard_count != shard_idx:
                        raise IntegrityError(
                            f"signature {key} misplaced in shard {shard['file']}"
                        )
                    prev = key
                    total += 1
        return total


@contextmanager
def run_lock(data_dir: Path):
    path = Path(data_dir) / "run.lock"
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLockError(f"pipeline already running (lock file {path})") from None
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield
    finally:
        path.unlink(missing_ok=True)


class FingerprintPipeline:
    """Drives the plan / run / merge / materialize cycle for one data dir."""

    def __init__(
        self,
        data_dir: Path,
        features: Sequence[FeatureSpec],
        target_shard_size: int = DEFAULT_TARGET_SHARD_SIZE,
        max_chunk_members: int = DEFAULT_MAX_CHUNK_MEMBERS,
    ) -> None:
        if not features:
            raise InputError("at least one feature must be registered")
        names = [(f.name, f.version) for f in features]
        if len(set(f.name for f in features)) != len(features):
            raise InputError(f"duplicate feature names registered: {names}")
        self.data_dir = Path(data_dir)
        self.features = list(features)
        self.target_shard_size = target_shard_size
        self.max_chunk_members = max_chunk_members

    # --- catalog views ----------------------------------------------------

    def load_catalog(self) -> Catalog:
        return Catalog.load(self.data_dir)

    def epoch_members(self, catalog: Catalog | None = None) -> dict[date, list[Signature]]:
        catalog = catalog or self.load_catalog()
        members: dict[date, list[Signature]] = {}
        for sig, rec in catalog.records.items():
            members.setdefault(assign_epoch(rec.upload_time), []).append(sig)
        for sigs in members.values():
            sigs.sort()
        return members

    # --- store layout -------------------------------------------------------

    def store_dir(self, feature: FeatureSpec, epoch: date) -> Path:
        return (
            self.data_dir / "store" / feature.name / f"v{feature.version}"
            / epoch_key(epoch)
        )

    def scan_store(
        self, feature: FeatureSpec, members: dict[date, list[Signature]]
    ) -> FeatureStore:
        """Epochs whose manifest, shard checksums, and membership all verify."""
        store = FeatureStore(feature.name, feature.version)
        base = self.data_dir / "store" / feature.name / f"v{feature.version}"
        if not base.exists():
            return store
        for entry in sorted(base.iterdir()):
            if not entry.is_dir():
                continue
            try:
                epoch = parse_epoch(entry.name)
            except ValueError:
                continue
            manifest_path = entry / "manifest.json"
            if not manifest_path.exists():
                continue
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            current = members.get(epoch, [])
            if manifest.get("member_digest") != _member_digest(current):
                continue
            ok = True
            for shard in manifest.get("shards", []):
                path = entry / shard["file"]
                if not path.exists() or _sha256(path) != shard["checksum"]:
                    ok = False
                    break
            if ok:
                store.epochs.add(epoch)
        return store

    def plan(self) -> list[EpochJob]:
        members = self.epoch_members()
        stores = [self.scan_store(f, members) for f in self.features]
        return plan_missing(stores, set(members))

    # --- run ----------------------------------------------------------------

    def run(
        self,
        workers: int = 1,
        crash_hook: Callable[[WorkChunk], None] | None = None,
    ) -> RunReport:
        """Execute every planned job; resumable and idempotent."""
        report = RunReport()
        with run_lock(self.data_dir):
            catalog = self.load_catalog()
            members = self.epoch_members(catalog)
            stores = [self.scan_store(f, members) for f in self.features]
            jobs = plan_missing(stores, set(members))
            report.planned_jobs = jobs
            by_name = {f.name: f for f in self.features}
            for job in jobs:
                feature = by_name[job.feature_name]
                self._run_job(job, feature, members[job.epoch], catalog,
                              workers, crash_hook, report)
                report.completed_epochs += 1
        return report

    def _run_job(
        self,
        job: EpochJob,
        feature: FeatureSpec,
        epoch_members: list[Signature],
        image_source: ImageSource,
        workers: int,
        crash_hook: Callable[[WorkChunk], None] | None,
        report: RunReport,
    ) -> None:
        out_dir = self.store_dir(feature, job.epoch)
        chunks_dir = out_dir / "chunks"
        shards = shard_epoch(epoch_members, self.target_shard_size)
        all_chunks: list[WorkChunk] = []
        for shard_index, shard in enumerate(shards):
            all_chunks.extend(
                chunk_shard(feature.name, feature.version, job.epoch, shard_index,
                            shard, self.max_chunk_members)
            )
        pending = []
        for chunk in all_chunks:
            path = chunks_dir / f"{chunk.chunk_id}.jsonl"
            if path.exists():
                report.skipped_chunks += 1
            else:
                pending.append((chunk, path))

        def execute(item: tuple[WorkChunk, Path]) -> None:
            chunk, path = item
            run_chunk(chunk, feature.extractor, image_source, path, crash_hook)

        if workers > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(execute, pending))
        else:
            for item in pending:
                execute(item)
        report.executed_chunks += len(pending)

        # Recombine chunk outputs into shard files, then publish the manifest.
        shard_entries = []
        for shard_index, shard in enumerate(shards):
            shard_path = out_dir / f"shard-{shard_index:04d}.jsonl"
            chunks = [c for c in all_chunks if c.shard_index == shard_index]
            lines: list[str] = []
            for chunk in sorted(chunks, key=lambda c: c.start):
                chunk_path = chunks_dir / f"{chunk.chunk_id}.jsonl"
                text = chunk_path.read_text(encoding="utf-8")
                lines.extend(line for line in text.splitlines() if line)
            if len(lines) != len(shard):
                raise IntegrityError(
                    f"shard {shard_path} rebuilt with {len(lines)} of {len(shard)} records"
                )
            _write_atomic(shard_path, "".join(line + "\n" for line in lines))
            shard_entries.append(
                {
                    "file": shard_path.name,
                    "checksum": _sha256(shard_path),
                    "count": len(shard),
                }
            )
        manifest = {
            "epoch": epoch_key(job.epoch),
            "feature": feature.name,
            "version": feature.version,
            "member_digest": _member_digest(epoch_members),
            "shards": shard_entries,
        }
        _write_atomic(out_dir / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2))

    # --- merge ----------------------------------------------------------------

    def fingerprints_dir(self, epoch: date) -> Path:
        return self.data_dir / "fingerprints" / epoch_key(epoch)

    def _registry_signature(self) -> dict[str, int]:
        return {f.name: f.version for f in self.features}

    def merge_epoch(
        self, epoch: date, members: dict[date, list[Signature]], force: bool = False
    ) -> bool:
        """Merge all feature shards of one epoch into fingerprint shards.

        Returns True when work was done, False when the existing merge is
        current. Raises when any registered feature is incomplete.
        """
        epoch_sigs = members.get(epoch, [])
        missing = []
        for feature in self.features:
            store = self.scan_store(feature, members)
            if epoch not in store.epochs:
                missing.append((feature.name, epoch_key(epoch)))
        if missing:
            raise PreconditionError(f"features incomplete for merge: {missing}")

        out_dir = self.fingerprints_dir(epoch)
        manifest_path = out_dir / "manifest.json"
        digest = _member_digest(epoch_sigs)
        registry = self._registry_signature()
        if not force and manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            if (
                manifest.get("member_digest") == digest
                and manifest.get("features") == registry
                and all(
                    (out_dir / s["file"]).exists()
                    and _sha256(out_dir / s["file"]) == s["checksum"]
                    for s in manifest.get("shards", [])
                )
            ):
                return False

        shards = shard_epoch(epoch_sigs, self.target_shard_size)
        shard_entries = []
        for shard_index, shard in enumerate(shards):
            merged: dict[str, dict] = {
                sig.hex: {"signature": sig.hex, "features": {}} for sig in shard
            }
            for feature in self.features:
                shard_path = (
                    self.store_dir(feature, epoch) / f"shard-{shard_index:04d}.jsonl"
                )
                with open(shard_path, encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        rec = json.loads(line)
                        merged[rec["signature"]]["features"].update(rec["features"])
            lines = []
            for sig in shard:  # already signature-sorted
                rec = merged[sig.hex]
                rec["features"] = dict(sorted(rec["features"].items()))
                if set(rec["features"]) != set(registry):
                    raise IntegrityError(
                        f"fingerprint {sig.hex} missing features: "
                        f"{sorted(set(registry) - set(rec['features']))}"
                    )
                lines.append(json.dumps(rec, sort_keys=True))
            out_path = out_dir / f"shard-{shard_index:04d}.jsonl"
            _write_atomic(out_path, "".join(line + "\n" for line in lines))
            shard_entries.append(
                {"file": out_path.name, "checksum": _sha256(out_path), "count": len(shard)}
            )
        manifest = {
            "epoch": epoch_key(epoch),
            "member_digest": digest,
            "features": registry,
            "shards": shard_entries,
        }
        _write_atomic(manifest_path, json.dumps(manifest, sort_keys=True, indent=2))
        return True

    def merge(self, force: bool = False) -> RunReport:
        report = RunReport()
        with run_lock(self.data_dir):
            members = self.epoch_members()
            for epoch in sorted(members):
                if self.merge_epoch(epoch, members, force=force):
                    report.merged_epochs += 1
        return report

    # --- materialize ------------------------------------------------------------

    def join_dir(self) -> Path:
        return self.data_dir / "join"

    def materialize_join(
        self,
        shard_count: int = DEFAULT_JOIN_SHARDS,
        block_size: int = DEFAULT_JOIN_BLOCK_SIZE,
    ) -> VisualJoin:
        """Rewrite the join from every merged epoch's fingerprint shards."""
        if shard_count < 1 or block_size < 1:
            raise InputError("shard count and block size must be positive")
        with run_lock(self.data_dir):
            return self._materialize_locked(shard_count, block_size)

    def _materialize_locked(self, shard_count: int, block_size: int) -> VisualJoin:
        members = self.epoch_members()
        registry = self._registry_signature()
        records: list[tuple[str, str]] = []  # (signature hex, json line)
        for epoch in sorted(members):
            out_dir = self.fingerprints_dir(epoch)
            manifest_path = out_dir / "manifest.json"
            if not manifest_path.exists():
                raise PreconditionError(f"epoch {epoch_key(epoch)} not merged")
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            if (
                manifest.get("member_digest") != _member_digest(members[epoch])
                or manifest.get("features") != registry
            ):
                raise PreconditionError(f"epoch {epoch_key(epoch)} merge is stale")
            for shard in manifest["shards"]:
                with open(out_dir / shard["file"], encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            records.append((json.loads(line)["signature"], line))

        join_dir = self.join_dir()
        join_dir.mkdir(parents=True, exist_ok=True)
        by_shard: list[list[tuple[str, str]]] = [[] for _ in range(shard_count)]
        for key, line in records:
            by_shard[int(key[:8], 16) % shard_count].append((key, line))
        shard_entries = []
        for shard_index, shard_records in enumerate(by_shard):
            shard_records.sort(key=lambda t: t[0])
            file_name = f"shard-{shard_index:04d}.jsonl"
            index_name = f"shard-{shard_index:04d}.index.json"
            path = join_dir / file_name
            blocks: list[tuple[str, int]] = []
            tmp = path.with_name(path.name + ".tmp")
            with open(tmp, "wb") as fh:
                offset = 0
                for i, (key, line) in enumerate(shard_records):
                    if i % block_size == 0:
                        blocks.append((key, offset))
                    data = (line + "\n").encode("utf-8")
                    fh.write(data)
                    offset += len(data)
            tmp.replace(path)
            checksum = _sha256(path)
            _write_atomic(
                join_dir / index_name,
                json.dumps(
                    {"blocks": [[k, o] for k, o in blocks], "count": len(shard_records)},
                    sort_keys=True,
                ),
            )
            shard_entries.append(
                {
                    "file": file_name,
                    "index_file": index_name,
                    "checksum": checksum,
                    "count": len(shard_records),
                }
            )
        manifest = {
            "shard_count": shard_count,
            "block_size": block_size,
            "features": registry,
            "epochs": [epoch_key(e) for e in sorted(members)],
            "shards": shard_entries,
        }
        _write_atomic(join_dir / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2))
        return VisualJoin.open(join_dir)

    def open_join(self) -> VisualJoin:
        return VisualJoin.open(self.join_dir())


def join_lookup(vj: VisualJoin, sig: Signature) -> Fingerprint | None:
    return vj.lookup(sig)
