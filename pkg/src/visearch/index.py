"""Per-shard token index over binary fingerprints plus exact Hamming ranking.

The fingerprint is cut into ``block_count`` equal bit blocks; each block value
is a token, and every document appears in exactly one posting list per block.
A query's candidate set is the union of the posting lists for its own tokens.
A document missing from that union differs from the query in every block, so
its distance is at least ``block_count``; everything closer is guaranteed to
be a candidate.

Candidates are re-ranked by exact Hamming distance (ties on signature hex).
When the candidate ranking cannot certify the global top-k (fewer than k
candidates, or the k-th candidate is no closer than ``block_count``) and the
exhaustive fallback is enabled, the whole shard is scanned instead, which
makes results identical to a brute-force scan at desk scale.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, InputError, IntegrityError
from .model import BinaryFingerprint, ImageDocument, Signature

_POSTINGS_MAGIC = b"VSIXPST1"
_DOCS_MAGIC = "VSIXDOC"
_FORMAT_VERSION = 1

# Popcount of every byte value, for vectorized Hamming over packed codes.
_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


class Token(NamedTuple):
    """One vector-quantized fingerprint block."""

    block_index: int
    value: int


def default_block_count(dim: int) -> int:
    """64-bit blocks for wide codes, 4-bit blocks for short test codes,
    a single block when neither divides."""
    if dim >= 64 and dim % 64 == 0:
        return dim // 64
    if dim % 4 == 0:
        return dim // 4
    return 1


def tokenize(fp: BinaryFingerprint, block_count: int) -> list[Token]:
    """Split the code into ``block_count`` equal blocks, order preserved."""
    if block_count < 1 or fp.dim % block_count:
        raise DimensionError(f"dim {fp.dim} not divisible by block count {block_count}")
    width = fp.dim // block_count
    code = fp.as_code()
    mask = (1 << width) - 1
    return [
        Token(j, (code >> (fp.dim - (j + 1) * width)) & mask) for j in range(block_count)
    ]


@dataclass(frozen=True)
class LeafHit:
    """A leaf-local result: document plus its exact Hamming distance."""

    signature: Signature
    distance: int


class LeafIndex:
    """Immutable posting-list index over one shard of fingerprints."""

    def __init__(
        self,
        dim: int,
        block_count: int,
        signatures: list[Signature],
        codes: np.ndarray,
        postings: dict[Token, np.ndarray],
        exhaustive_fallback: bool = True,
    ) -> None:
        self.dim = dim
        self.block_count = block_count
        self._signatures = signatures
        self._hexes = [s.hex for s in signatures]
        self._codes = codes  # packed uint8, shape (n, dim/8), ordinal = signature order
        self._postings = postings
        self.exhaustive_fallback = exhaustive_fallback

    # --- construction ---------------------------------------------------

    @classmethod
    def from_fingerprints(
        cls,
        entries: Iterable[tuple[Signature, BinaryFingerprint]],
        block_count: int | None = None,
        exhaustive_fallback: bool = True,
    ) -> LeafIndex:
        pairs = sorted(entries, key=lambda p: p[0])
        if not pairs:
            return cls(0, 1, [], np.zeros((0, 0), dtype=np.uint8), {}, exhaustive_fallback)
        dim = pairs[0][1].dim
        m = block_count if block_count is not None else default_block_count(dim)
        if dim % m:
            raise DimensionError(f"dim {dim} not divisible by block count {m}")
        sigs: list[Signature] = []
        rows = []
        posting_lists: dict[Token, list[int]] = {}
        prev = None
        for ordinal, (sig, fp) in enumerate(pairs):
            if fp.dim != dim:
                raise DimensionError(f"mixed fingerprint dims: {fp.dim} vs {dim}")
            if prev is not None and sig == prev:
                raise InputError(f"duplicate signature {sig.hex}")
            prev = sig
            sigs.append(sig)
            rows.append(np.frombuffer(fp.packed, dtype=np.uint8))
            for token in tokenize(fp, m):
                posting_lists.setdefault(token, []).append(ordinal)
        codes = np.vstack(rows)
        postings = {
            tok: np.array(ordinals, dtype=np.int64) for tok, ordinals in posting_lists.items()
        }
        return cls(dim, m, sigs, codes, postings, exhaustive_fallback)

    # --- introspection --------------------------------------------------

    def __len__(self) -> int:
        return len(self._signatures)

    def signature_at(self, ordinal: int) -> Signature:
        return self._signatures[ordinal]

    def fingerprint_at(self, ordinal: int) -> BinaryFingerprint:
        return BinaryFingerprint(self._codes[ordinal].tobytes(), self.dim)

    def posting_entry_count(self) -> int:
        return sum(len(v) for v in self._postings.values())

    def candidate_ordinals(self, q: BinaryFingerprint) -> np.ndarray:
        """Union of the posting lists for the query's tokens, sorted."""
        self._check_query(q)
        hits = [self._postings[t] for t in tokenize(q, self.block_count) if t in self._postings]
        if not hits:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(hits))

    # --- search ----------------------------------------------------------

    def knn(self, q: BinaryFingerprint, k: int) -> list[LeafHit]:
        """Top-k by (Hamming distance, signature hex), at most k results."""
        self._check_query(q)
        if k < 1:
            raise InputError("k must be positive")
        n = len(self._signatures)
        if n == 0:
            return []
        candidates = self.candidate_ordinals(q)
        distances = self._distances(q, candidates)
        order = np.argsort(distances, kind="stable")  # ordinal order is signature order
        if self.exhaustive_fallback and not self._certified(distances, order, k):
            return self._scan_all(q, k)
        top = order[:k]
        return [
            LeafHit(self._signatures[candidates[i]], int(distances[i])) for i in top
        ]

    def _certified(self, distances: np.ndarray, order: np.ndarray, k: int) -> bool:
        # The candidate top-k is globally exact when the candidates cover the
        # shard, or when the k-th candidate distance is below block_count:
        # any non-candidate sits at block_count or farther.
        if len(distances) == len(self._signatures):
            return True
        if len(distances) < k:
            return False
        return int(distances[order[k - 1]]) < self.block_count

    def _scan_all(self, q: BinaryFingerprint, k: int) -> list[LeafHit]:
        distances = self._distances(q, None)
        order = np.argsort(distances, kind="stable")[:k]
        return [LeafHit(self._signatures[i], int(distances[i])) for i in order]

    def _distances(self, q: BinaryFingerprint, ordinals: np.ndarray | None) -> np.ndarray:
        qrow = np.frombuffer(q.packed, dtype=np.uint8)
        rows = self._codes if ordinals is None else self._codes[ordinals]
        return _POPCOUNT[np.bitwise_xor(rows, qrow)].sum(axis=1).astype(np.int64)

    def _check_query(self, q: BinaryFingerprint) -> None:
        if len(self._signatures) and q.dim != self.dim:
            raise DimensionError(f"query dim {q.dim} != index dim {self.dim}")


def build_leaf(
    docs: Sequence[ImageDocument],
    block_count: int | None = None,
    exhaustive_fallback: bool = True,
) -> LeafIndex:
    """Index a shard of documents by their fingerprints."""
    return LeafIndex.from_fingerprints(
        ((d.signature, d.fingerprint) for d in docs),
        block_count=block_count,
        exhaustive_fallback=exhaustive_fallback,
    )


def leaf_knn(idx: LeafIndex, q: BinaryFingerprint, k: int) -> list[LeafHit]:
    return idx.knn(q, k)


# --- persistence --------------------------------------------------------
#
# Two files per shard:
#   <stem>.postings  binary: magic, version/block_count/dim/ndocs/ntokens
#                    header, then per token (block uint16, value uint64,
#                    count uint32) and delta-encoded ordinals (uint32).
#   <stem>.docs.jsonl  first line a magic header, then one record per
#                    ordinal: {"signature": hex, "fingerprint": base64}.


def save_leaf(idx: LeafIndex, stem: Path) -> None:
    if idx.dim and idx.dim // idx.block_count > 64:
        raise InputError("persistence supports block widths up to 64 bits")
    postings_path = Path(f"{stem}.postings")
    docs_path = Path(f"{stem}.docs.jsonl")
    tokens = sorted(idx._postings)
    with open(f"{postings_path}.tmp", "wb") as fh:
        fh.write(_POSTINGS_MAGIC)
        fh.write(struct.pack("<HHIII", _FORMAT_VERSION, idx.block_count, idx.dim,
                             len(idx), len(tokens)))
        for tok in tokens:
            ordinals = idx._postings[tok]
            fh.write(struct.pack("<HQI", tok.block_index, tok.value, len(ordinals)))
            deltas = np.diff(ordinals, prepend=0).astype(np.uint32)
            fh.write(deltas.tobytes())
    with open(f"{docs_path}.tmp", "w", encoding="utf-8") as fh:
        header = {"magic": _DOCS_MAGIC, "version": _FORMAT_VERSION, "dim": idx.dim,
                  "block_count": idx.block_count, "count": len(idx)}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ordinal in range(len(idx)):
            rec = {
                "signature": idx.signature_at(ordinal).hex,
                "fingerprint": base64.b64encode(idx._codes[ordinal].tobytes()).decode(),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    Path(f"{postings_path}.tmp").replace(postings_path)
    Path(f"{docs_path}.tmp").replace(docs_path)


def load_leaf(stem: Path, exhaustive_fallback: bool = True) -> LeafIndex:
    docs_path = Path(f"{stem}.docs.jsonl")
    with open(docs_path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("magic") != _DOCS_MAGIC or header.get("version") != _FORMAT_VERSION:
            raise IntegrityError(f"bad doc table header in {docs_path}")
        dim = header["dim"]
        count = header["count"]
        sigs: list[Signature] = []
        rows = []
        for line in fh:
            rec = json.loads(line)
            sigs.append(Signature.from_hex(rec["signature"]))
            rows.append(np.frombuffer(base64.b64decode(rec["fingerprint"]), dtype=np.uint8))
    if len(sigs) != count:
        raise IntegrityError(f"doc table {docs_path} truncated: {len(sigs)} != {count}")
    postings_path = Path(f"{stem}.postings")
    with open(postings_path, "rb") as fh:
        if fh.read(8) != _POSTINGS_MAGIC:
            raise IntegrityError(f"bad postings magic in {postings_path}")
        version, block_count, pdim, ndocs, ntokens = struct.unpack("<HHIII", fh.read(16))
        if version != _FORMAT_VERSION or pdim != dim or ndocs != count:
            raise IntegrityError(f"postings header mismatch in {postings_path}")
        postings: dict[Token, np.ndarray] = {}
        total = 0
        for _ in range(ntokens):
            block, value, n = struct.unpack("<HQI", fh.read(14))
            deltas = np.frombuffer(fh.read(4 * n), dtype=np.uint32)
            if len(deltas) != n:
                raise IntegrityError(f"truncated posting list in {postings_path}")
            postings[Token(block, int(value))] = np.cumsum(deltas, dtype=np.int64)
            total += n
    if count and total != block_count * count:
        raise IntegrityError(
            f"posting entries {total} != block_count*docs {block_count * count}"
        )
    codes = np.vstack(rows) if rows else np.zeros((0, 0), dtype=np.uint8)
    return LeafIndex(dim if count else 0, block_count if count else 1, sigs, codes,
                     postings, exhaustive_fallback)
