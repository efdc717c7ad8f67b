"""JSON-over-HTTP serving surface, versioned under /v1.

Responses are deterministic for identical engine state and request: no
timestamps or request ids in bodies (latency goes in a header only).
"""

from __future__ import annotations

import time
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .engine import Engine, SearchQuery
from .errors import InputError, NotFoundError
from .model import Annotation, Box, Signature, embedding_from_b64
from .retrieval import PartialFanoutError, ScoredResult


class SearchRequestModel(BaseModel):
    signature: str | None = None
    rawEmbedding: str | None = None
    cropBox: list[float] | None = None
    k: int = 25
    enableRerank: bool = False
    modelId: str | None = None
    refine: list[str] = Field(default_factory=list)


class ObjectSearchRequestModel(BaseModel):
    signature: str | None = None
    objectId: str | None = None
    box: list[float] | None = None
    k: int = 25


class LensRequestModel(BaseModel):
    signature: str | None = None
    rawEmbedding: str | None = None
    k: int = 25


def _parse_signature(text: str) -> Signature:
    try:
        return Signature.from_hex(text)
    except InputError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _parse_box(values: list[float]) -> Box:
    if len(values) != 4:
        raise HTTPException(status_code=400, detail="box must be [x, y, w, h]")
    try:
        return Box(*values)
    except InputError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _result_json(r: ScoredResult) -> dict[str, Any]:
    return {
        "signature": r.signature.hex,
        "hammingDistance": r.hamming_distance,
        "similarity": r.similarity,
        "rerankScore": r.rerank_score,
        "leafId": r.leaf_id,
        "source": r.source,
    }


def _annotation_json(a: Annotation) -> dict[str, Any]:
    return {"term": a.term, "weight": a.weight}


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="visearch", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.middleware("http")
    async def timing_header(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        response.headers["X-Elapsed-Ms"] = f"{(time.perf_counter() - start) * 1000:.2f}"
        return response

    @app.post("/v1/search")
    def search(req: SearchRequestModel) -> dict[str, Any]:
        try:
            query = SearchQuery(
                signature=_parse_signature(req.signature) if req.signature else None,
                crop_box=_parse_box(req.cropBox) if req.cropBox is not None else None,
                raw_embedding=(
                    embedding_from_b64(req.rawEmbedding) if req.rawEmbedding else None
                ),
                k=req.k,
                enable_rerank=req.enableRerank,
                model_id=req.modelId,
                refine_terms=tuple(req.refine),
            )
            outcome = engine.search(query)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except PartialFanoutError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "results": [_result_json(r) for r in outcome.results],
            "annotations": [_annotation_json(a) for a in outcome.annotations],
            "conformity": outcome.conformity,
            "dots": [
                {"box": list(d.box.as_tuple()), "category": d.category, "show": d.show}
                for d in outcome.dots
            ],
            "partial": outcome.partial,
        }

    @app.post("/v1/object-search")
    def object_search_endpoint(req: ObjectSearchRequestModel) -> dict[str, Any]:
        try:
            scenes = engine.object_query(
                signature=_parse_signature(req.signature) if req.signature else None,
                object_id=_parse_signature(req.objectId) if req.objectId else None,
                box=_parse_box(req.box) if req.box is not None else None,
                k=req.k,
            )
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "scenes": [
                {"signature": s.scene_signature.hex, "distance": s.distance}
                for s in scenes
            ]
        }

    @app.post("/v1/lens")
    def lens(req: LensRequestModel) -> dict[str, Any]:
        try:
            query = SearchQuery(
                signature=_parse_signature(req.signature) if req.signature else None,
                raw_embedding=(
                    embedding_from_b64(req.rawEmbedding) if req.rawEmbedding else None
                ),
                k=req.k,
            )
            outcome = engine.lens(query)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except PartialFanoutError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except InputError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        qu = outcome.understanding
        return {
            "results": [_result_json(r) for r in outcome.results],
            "queryUnderstanding": {
                "annotations": [_annotation_json(a) for a in qu.annotations],
                "dominant": (
                    {
                        "box": list(qu.dominant.box.as_tuple()),
                        "category": qu.dominant.category,
                        "confidence": qu.dominant.confidence,
                    }
                    if qu.dominant
                    else None
                ),
                "annotationConfidence": qu.annotation_confidence,
                "sources": outcome.gated_sources,
            },
            "partial": outcome.partial,
        }

    @app.get("/v1/documents")
    def list_documents(limit: int = 50, offset: int = 0) -> dict[str, Any]:
        sigs = sorted(engine.documents)
        page = sigs[offset : offset + limit]
        return {
            "total": len(sigs),
            "documents": [_document_summary(engine, s) for s in page],
        }

    @app.get("/v1/documents/{signature}")
    def get_document(signature: str) -> dict[str, Any]:
        sig = _parse_signature(signature)
        if sig not in engine.documents:
            raise HTTPException(status_code=404, detail=f"unknown signature {signature}")
        return _document_summary(engine, sig)

    @app.get("/v1/status")
    def status() -> dict[str, Any]:
        idx = engine.indexes
        return {
            "documents": len(engine.documents),
            "leaves": [len(leaf) for leaf in idx.leaves],
            "objects": len(idx.object_entries),
            "buildId": idx.build_id,
            "dim": engine.config.dim,
        }

    return app


def _document_summary(engine: Engine, sig: Signature) -> dict[str, Any]:
    doc = engine.documents[sig]
    return {
        "signature": sig.hex,
        "width": doc.width,
        "height": doc.height,
        "annotations": [_annotation_json(a) for a in doc.annotations],
        "category": {str(i): w for i, w in doc.category.items()},
        "detections": [
            {"box": list(d.box.as_tuple()), "category": d.category,
             "confidence": d.confidence}
            for d in doc.detections
        ],
    }
