"""
Flow Pattern FIS — FastAPI Application

Endpoints:
  GET  /health              — liveness probe
  POST /classify            — operating point → predicted pattern, Φ per class, trace
  GET  /kb                  — active knowledge base as a JSON document
  POST /kb/validate         — knowledge-base document → validation report
  POST /evaluate            — FIS (and BP) on a split → comparison report
  POST /sweep               — flow × water-cut map at a fixed angle (JSON, CSV or SVG)
  POST /bp/build            — train + evaluate + package a BP baseline to disk
  POST /bp/deploy           — build + write to DB (full deployment)
  GET  /bp/models           — list all BP models on disk
  GET  /bp/{name}           — latest version of a BP model from disk
  GET  /bp/{name}/versions  — list all versions of a BP model

HTTP status codes:
  200 — success
  400 — malformed request (unparseable KB, bad dataset CSV, bad sweep axes)
  422 — validation failure (KB rejected, hyperparameters out of range)
  404 — model not found
  500 — internal pipeline error
"""

import logging
import os
from contextlib import asynccontextmanager
from functools import lru_cache
from typing import Literal, Optional

from fastapi import FastAPI, Depends, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field, ValidationError
from sqlalchemy.orm import Session

from db.session import get_db, check_db
from db.repo import create_model, store_artifact, finalize_model

from tools.bp_baseline import TrainConfig, model_to_doc, train
from tools.dataset import DatasetError, SplitError, SplitSpec, embedded_dataset, parse_csv, split
from tools.evaluation import BP, FIS, bp_seed_study, evaluate
from tools.flow_map_sweep import Axis, AxisError, grid_to_csv, grid_to_svg, sweep
from tools.kb_document import KnowledgeBaseParseError, parse_kb, resolve_kb, save_kb
from tools.knowledge_base import FlowPattern, OperatingPoint, classify
from tools.model_delivery_packager import package_model_delivery
from tools.model_version_manager import (
    get_model_versions,
    get_next_version,
    list_all_models,
    make_slug,
)
from tools.validate_fuzzy_system import validation_report

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(_app: FastAPI):
    check_db()
    yield


app = FastAPI(
    title="Flow Pattern FIS",
    version="1.0.0",
    lifespan=lifespan,
)

_cors_origins = os.environ.get(
    "CORS_ORIGINS",
    "http://localhost:8080,http://localhost:5173",
).split(",")
app.add_middleware(
    CORSMiddleware,
    allow_origins=[o.strip() for o in _cors_origins],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@lru_cache(maxsize=1)
def active_kb():
    """Knowledge base for every request: $FLOWFIS_KB_PATH or the built-in one."""
    return resolve_kb()


# ─────────────────────────────────────────
# Request Models
# ─────────────────────────────────────────

class ClassifyRequest(BaseModel):
    angle: float
    flow: float
    watercut: float


class SplitRequest(BaseModel):
    """Dataset and split shared by evaluate / build / deploy."""
    csv: Optional[str] = Field(None, description="dataset CSV text; embedded dataset when omitted")
    split: Literal["paper", "random"] = "paper"
    test_fraction: float = 0.3
    split_seed: int = 0


class EvaluateRequest(SplitRequest):
    fis_only: bool = False
    seed: int = 42
    epochs: int = 300
    hidden: tuple[int, int] = (8, 6)
    seed_study: int = Field(0, ge=0, le=100)


class SweepRequest(BaseModel):
    angle: float
    flow_min: float = 100.0
    flow_max: float = 600.0
    flow_steps: int = 50
    wc_min: float = 0.0
    wc_max: float = 1.0
    wc_steps: int = 50
    format: Literal["json", "csv", "svg"] = "json"
    workers: int = Field(1, ge=1, le=32)


class BuildRequest(SplitRequest):
    name: str
    seed: int = 42
    epochs: int = 300
    hidden: tuple[int, int] = (8, 6)


# ─────────────────────────────────────────
# Endpoints
# ─────────────────────────────────────────

@app.get("/health")
def health():
    return {"ok": True}


@app.post("/classify")
def classify_point(request: ClassifyRequest):
    """
    Classify one operating point with the active knowledge base.
    Inputs outside a universe are clamped and reported under "warnings".
    """
    try:
        result = classify(active_kb(), OperatingPoint(request.angle, request.flow, request.watercut))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Classification failed: {str(e)}")
    return result.to_dict()


@app.get("/kb")
def get_kb():
    doc = save_kb(active_kb())
    return doc.model_dump(by_alias=True, exclude_none=True)


@app.post("/kb/validate")
def validate_kb(document: dict):
    """
    Validate a knowledge-base document without loading it.
    Returns 400 with a location when the document is malformed,
    422 with diagnostics when the system it describes is rejected.
    """
    try:
        system = parse_kb(document)
    except KnowledgeBaseParseError as e:
        raise HTTPException(status_code=400, detail={"message": str(e), "location": e.location})

    report = validation_report(system)
    if not report["valid"]:
        return JSONResponse(status_code=422, content=report)
    return report


@app.post("/evaluate")
def evaluate_models(request: EvaluateRequest):
    """
    Score the FIS (and a freshly trained BP baseline unless fis_only)
    on the requested split.
    """
    train_set, test_set = _split_records(request)
    config = _train_config(request)

    try:
        bp_model = None if request.fis_only else train(config, train_set)
        report = evaluate(active_kb(), test_set, bp_model=bp_model, split=request.split,
                          seed=None if request.fis_only else request.seed,
                          train_size=len(train_set))
        if request.seed_study:
            seeds = [request.seed + i for i in range(request.seed_study)]
            report.seed_study = bp_seed_study(train_set, test_set, seeds, config)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Evaluation failed: {str(e)}")

    return report.model_dump()


@app.post("/sweep")
def sweep_map(request: SweepRequest):
    """
    Flow-pattern map at a fixed angle. format=json returns cells and per-pattern
    counts; csv and svg return the rendered document.
    """
    try:
        grid = sweep(
            active_kb(), request.angle,
            Axis(request.flow_min, request.flow_max, request.flow_steps),
            Axis(request.wc_min, request.wc_max, request.wc_steps),
            workers=request.workers,
        )
    except AxisError as e:
        raise HTTPException(status_code=400, detail=str(e))

    if request.format == "csv":
        return Response(content=grid_to_csv(grid), media_type="text/csv")
    if request.format == "svg":
        return Response(content=grid_to_svg(grid), media_type="image/svg+xml")
    return {
        "angle": grid.angle,
        "flow_steps": request.flow_steps,
        "wc_steps": request.wc_steps,
        "counts": {p.label: grid.count(p) for p in FlowPattern},
        "cells": [
            {"flow": c.flow, "watercut": c.watercut, "pattern": c.pattern.label}
            for c in grid.cells
        ],
    }


@app.post("/bp/build")
def build_model(request: BuildRequest):
    """
    Full build pipeline: split → train → evaluate → package delivery → write to disk.
    """
    slug = make_slug(request.name)
    model, report = _train_and_evaluate(request)

    version = get_next_version(slug)
    try:
        pack = package_model_delivery(slug=slug, version=version, name=request.name,
                                      model=model, report=report)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Packaging failed: {str(e)}")

    return {
        "success": True,
        "model_name": request.name,
        "slug": slug,
        "version": version,
        "output_dir": pack["output_dir"],
        "files": pack["files"],
        "history": model.history.summary(),
        "accuracy": {FIS: pack["fis_accuracy"], BP: pack["bp_accuracy"]},
    }


@app.post("/bp/deploy")
def deploy_model(request: BuildRequest, db: Session = Depends(get_db)):
    """
    Full deployment pipeline: build + write to the database.
    This is the production deployment path.
    """
    slug = make_slug(request.name)
    model, report = _train_and_evaluate(request)

    fs_version = get_next_version(slug)
    try:
        pack = package_model_delivery(slug=slug, version=fs_version, name=request.name,
                                      model=model, report=report)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Packaging failed: {str(e)}")

    history = model.history
    try:
        row = create_model(db, name=request.name, slug=slug, seed=model.config.seed,
                           hidden_sizes=model.config.hidden)

        store_artifact(db, row.id, "model", content_json=model_to_doc(model).model_dump())
        store_artifact(db, row.id, "evaluation_report", content_json=report.model_dump())
        store_artifact(db, row.id, "knowledge_base",
                       content_json=save_kb(active_kb()).model_dump(by_alias=True, exclude_none=True))
        store_artifact(db, row.id, "delivery_pack", content_json=pack)

        finalize_model(
            db, row.id, status="deployed",
            epochs_run=history.epochs_run,
            final_mse=history.final_mse,
            converged=history.converged,
            fis_accuracy=pack["fis_accuracy"],
            bp_accuracy=pack["bp_accuracy"],
        )

        db.commit()
    except Exception as e:
        db.rollback()
        raise HTTPException(status_code=500, detail=f"DB deploy failed: {str(e)}")

    return {
        "success": True,
        "deployed": True,
        "model_name": request.name,
        "slug": slug,
        "db_version": row.version,
        "fs_version": fs_version,
        "output_dir": pack["output_dir"],
        "files": pack["files"],
        "history": history.summary(),
        "accuracy": {FIS: pack["fis_accuracy"], BP: pack["bp_accuracy"]},
    }


@app.get("/bp/models")
def list_models():
    models = list_all_models()
    return {
        "total": len(models),
        "models": models,
    }


@app.get("/bp/{name}")
def get_model(name: str):
    """
    Get the latest version of a BP model by slug.
    Reads from the output directory on disk.
    """
    slug = make_slug(name)
    info = get_model_versions(slug)

    if info["total_versions"] == 0:
        raise HTTPException(status_code=404, detail=f"Model '{name}' not found")

    latest = info["versions"][-1]

    return {
        "slug": slug,
        "version": latest["version"],
        "version_str": latest["version_str"],
        "path": latest["path"],
        "files": latest["files"],
        "model_name": latest.get("model_name"),
        "seed": latest.get("seed"),
        "final_mse": latest.get("final_mse"),
        "fis_accuracy": latest.get("fis_accuracy"),
        "bp_accuracy": latest.get("bp_accuracy"),
        "total_versions": info["total_versions"],
    }


@app.get("/bp/{name}/versions")
def get_model_versions_endpoint(name: str):
    slug = make_slug(name)
    info = get_model_versions(slug)

    if info["total_versions"] == 0:
        raise HTTPException(status_code=404, detail=f"Model '{name}' has no versions")

    return info


# ─────────────────────────────────────────
# Helpers
# ─────────────────────────────────────────

def _split_records(request: SplitRequest):
    """(train, test) for a request; 400 on a bad CSV or an impossible split."""
    try:
        records = parse_csv(request.csv) if request.csv is not None else embedded_dataset()
        if request.split == "paper":
            spec = SplitSpec.paper()
        else:
            spec = SplitSpec.seeded_random(request.test_fraction, request.split_seed)
        return split(records, spec)
    except DatasetError as e:
        raise HTTPException(status_code=400, detail={"message": str(e), "line": e.line})
    except SplitError as e:
        raise HTTPException(status_code=400, detail=str(e))


def _train_config(request) -> TrainConfig:
    try:
        return TrainConfig(seed=request.seed, epochs=request.epochs, hidden=request.hidden)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))


def _train_and_evaluate(request: BuildRequest):
    train_set, test_set = _split_records(request)
    config = _train_config(request)
    try:
        model = train(config, train_set)
        report = evaluate(active_kb(), test_set, bp_model=model, split=request.split,
                          seed=config.seed, train_size=len(train_set))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Build failed: {str(e)}")
    logger.info("built %s: final mse %.6g, BP %d/%d", request.name, model.history.final_mse,
                report.models[BP].correct, report.models[BP].total)
    return model, report
