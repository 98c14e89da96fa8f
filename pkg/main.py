from dotenv import load_dotenv
load_dotenv()  # Load .env file before other imports

from fastapi import FastAPI, HTTPException, Depends, Request
from fastapi.responses import PlainTextResponse
from fastapi.middleware.cors import CORSMiddleware
from sqlalchemy.orm import Session
from typing import List
import logging
import os

# Rate limiting
from slowapi import Limiter, _rate_limit_exceeded_handler
from slowapi.util import get_remote_address
from slowapi.errors import RateLimitExceeded

import config
from cli import (
    cmd_emulate, cmd_exact_correlator, cmd_gate_counts, cmd_overlap_scan, cmd_verify_decompositions,
    config_hash, render_csv,
)
from database import engine, get_db, Base
from errors import DecompositionError, DimensionCapError, EigensolveError, QsqedError, UnsupportedError, ValidationError
from models import ExperimentRun
from schemas import ExperimentConfig, GateCountRow, OverlapScanRequest, RunResponse, RunSummary

config.configure_logging()
logger = logging.getLogger(__name__)

# Rate limiting configuration - disabled in testing
TESTING = os.getenv("TESTING", "0") == "1"
limiter = Limiter(key_func=get_remote_address, enabled=not TESTING)

# CORS allowed origins - results are public
ALLOWED_ORIGINS = ["*"]

# Create tables
Base.metadata.create_all(bind=engine)

app = FastAPI(
    title="QSQED",
    description="Qudit simulations of truncated (1+1)d scalar QED: decompositions, overlaps and noisy correlators",
    version=config.SOFTWARE_VERSION
)

app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)

app.add_middleware(
    CORSMiddleware,
    allow_origins=ALLOWED_ORIGINS,
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)


# === ERROR MAPPING ===

def raise_http(exc: QsqedError):
    """Translate simulator errors into HTTP status codes"""
    if isinstance(exc, DimensionCapError):
        raise HTTPException(status_code=413, detail=str(exc))
    if isinstance(exc, ValidationError):
        raise HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, UnsupportedError):
        raise HTTPException(status_code=400, detail=str(exc))
    if isinstance(exc, (DecompositionError, EigensolveError)):
        logger.error("numerical failure: %s", exc)
        raise HTTPException(status_code=500, detail=str(exc))
    raise HTTPException(status_code=500, detail=str(exc))


def archive_run(db: Session, kind: str, cfg: ExperimentConfig, csv_text: str) -> ExperimentRun:
    run = ExperimentRun(
        kind=kind,
        config_hash=config_hash(cfg),
        config_json=cfg.model_dump(mode="json"),
        csv_text=csv_text,
        seed=str(cfg.seed),
        software_version=config.SOFTWARE_VERSION,
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info("archived %s run %d", kind, run.id)
    return run


# === INFO ===

@app.get("/")
def root():
    """Service info"""
    return {
        "name": "QSQED",
        "version": config.SOFTWARE_VERSION,
        "dim_cap": config.dim_cap(),
        "endpoints": [
            "/api/v1/gate-counts",
            "/api/v1/verify-decompositions",
            "/api/v1/overlap-scan",
            "/api/v1/exact-correlator",
            "/api/v1/emulate",
            "/api/v1/runs",
        ],
    }


# === EXPERIMENTS ===

@app.get("/api/v1/gate-counts", response_model=List[GateCountRow])
def gate_counts():
    """Gate costs of the three Trotter building blocks"""
    try:
        return cmd_gate_counts()
    except QsqedError as exc:
        raise_http(exc)


@app.post("/api/v1/verify-decompositions", response_model=RunResponse)
@limiter.limit("2/minute")
def verify_decompositions(request: Request, db: Session = Depends(get_db)):
    """Run every decomposition-equivalence check"""
    cfg = ExperimentConfig()
    try:
        rows = cmd_verify_decompositions(seed=cfg.seed)
    except QsqedError as exc:
        raise_http(exc)
    run = archive_run(db, "verify-decompositions", cfg, render_csv(rows, cfg))
    return RunResponse(
        success=all(r.passed for r in rows),
        run_id=run.id,
        rows=[r.model_dump() for r in rows],
    )


@app.post("/api/v1/overlap-scan", response_model=RunResponse)
@limiter.limit("5/minute")
def overlap_scan(request: Request, body: OverlapScanRequest, db: Session = Depends(get_db)):
    """Ground-state overlaps of |Gamma> and |1...1> over lattice sizes and couplings"""
    cfg = ExperimentConfig(params=body.params, scan_n_s=body.n_s, scan_couplings=body.couplings)
    try:
        rows = cmd_overlap_scan(cfg)
    except QsqedError as exc:
        raise_http(exc)
    run = archive_run(db, "overlap-scan", cfg, render_csv(rows, cfg))
    return RunResponse(run_id=run.id, rows=[r.model_dump() for r in rows])


@app.post("/api/v1/exact-correlator", response_model=RunResponse)
@limiter.limit("10/minute")
def exact_correlator(request: Request, cfg: ExperimentConfig, db: Session = Depends(get_db)):
    """Exact correlator series and, when requested, the spectral function"""
    try:
        rows, spectral = cmd_exact_correlator(cfg)
    except QsqedError as exc:
        raise_http(exc)
    run = archive_run(db, "exact-correlator", cfg, render_csv(rows, cfg))
    return RunResponse(
        run_id=run.id,
        rows=[r.model_dump() for r in rows],
        extra={"spectral": [s.model_dump() for s in spectral]},
    )


@app.post("/api/v1/emulate", response_model=RunResponse)
@limiter.limit("2/minute")
def emulate(request: Request, cfg: ExperimentConfig, db: Session = Depends(get_db)):
    """Exact, noiseless and noisy correlator series with the signal-loss report"""
    try:
        result = cmd_emulate(cfg)
    except QsqedError as exc:
        raise_http(exc)
    csv_text = render_csv(result.rows, cfg, result.signal_loss.lines())
    run = archive_run(db, "emulate", cfg, csv_text)
    return RunResponse(
        run_id=run.id,
        rows=[r.model_dump() for r in result.rows],
        extra={"signal_loss": [e.model_dump() for e in result.signal_loss.entries]},
    )


# === ARCHIVE ===

@app.get("/api/v1/runs", response_model=List[RunSummary])
def list_runs(limit: int = 50, kind: str = None, db: Session = Depends(get_db)):
    """List archived runs, newest first"""
    query = db.query(ExperimentRun)
    if kind:
        query = query.filter(ExperimentRun.kind == kind)
    return query.order_by(ExperimentRun.id.desc()).limit(min(limit, 500)).all()


def get_run_or_404(run_id: int, db: Session) -> ExperimentRun:
    run = db.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
    if not run:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return run


@app.get("/api/v1/runs/{run_id}")
def get_run(run_id: int, db: Session = Depends(get_db)):
    """One archived run with its config"""
    run = get_run_or_404(run_id, db)
    return {
        "id": run.id,
        "kind": run.kind,
        "config_hash": run.config_hash,
        "config": run.config_json,
        "seed": run.seed,
        "software_version": run.software_version,
        "created_at": run.created_at.isoformat() if run.created_at else None,
    }


@app.get("/api/v1/runs/{run_id}/csv", response_class=PlainTextResponse)
def get_run_csv(run_id: int, db: Session = Depends(get_db)):
    """The CSV output of an archived run"""
    run = get_run_or_404(run_id, db)
    return PlainTextResponse(run.csv_text, media_type="text/csv")


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
