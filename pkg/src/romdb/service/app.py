"""Read-only HTTP query service over a set of database snapshots.

Endpoints:

* ``GET /databases`` lists the loaded databases with summary metadata.
* ``GET /databases/{db_id}/meta`` returns full metadata for one database.
* ``POST /databases/{db_id}/query`` runs one online computation
  (:class:`~romdb.service.models.QueryRequest`).

Status codes: 400 for validation failures (the body names the offending
field), 404 unknown database, 422 out-of-domain target, 500 with the error
taxonomy name for numerical failures. There are no mutating endpoints;
building and aligning databases happens offline through the CLI.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import analyze, dbstore
from ..errors import OutOfDomainError, RomDbError
from ..manifold import interpolate_rom
from .models import (
    QueryRequest,
    database_meta,
    database_summary,
    encode_rom,
)


class _FieldError(Exception):
    """Semantic request error tied to one field; rendered as HTTP 400."""

    def __init__(self, field, detail):
        super().__init__(detail)
        self.field = field
        self.detail = detail


def _load_directory(db_dir):
    databases = {}
    for path in sorted(Path(db_dir).glob("*.romdb")):
        databases[path.stem] = dbstore.load(path)
    return databases


def _resolve_target(db, req):
    coords = req.target.coords
    if len(coords) != db.domain.n_params:
        raise _FieldError(
            "target.coords",
            f"expected {db.domain.n_params} coordinates, got {len(coords)}",
        )
    return np.asarray(coords, dtype=float)


def _interp(db, target, options):
    return interpolate_rom(
        db,
        target,
        allow_inconsistent=options.allow_inconsistent,
        allow_extrapolation=options.allow_extrapolation,
    )


def _run_frequency_response(db, target, req):
    params = req.frequency_response
    if params is None:
        raise _FieldError("frequency_response", "missing parameters for this operation")
    if not params.grid:
        raise _FieldError("frequency_response.grid", "grid must be non-empty")
    rom = _interp(db, target, req.options)
    u = np.asarray(params.input, dtype=float) if params.input is not None else None
    if u is not None and u.size != rom.n_inputs:
        raise _FieldError(
            "frequency_response.input", f"expected {rom.n_inputs} input entries, got {u.size}"
        )
    resp = analyze.frequency_response(rom, np.asarray(params.grid, dtype=float), u)
    dbs = analyze.db_transform(resp.outputs)
    curve = []
    for i, x in enumerate(resp.grid):
        values = [
            {"re": float(resp.outputs[i, j].real), "im": float(resp.outputs[i, j].imag), "db": float(dbs[i, j])}
            for j in range(resp.outputs.shape[1])
        ]
        curve.append({"x": float(x), "values": values, "valid": bool(resp.valid[i])})
    return {"curve": curve}


def _run_eigen(db, target, req):
    rom = _interp(db, target, req.options)
    res = analyze.eigen_analysis(rom)
    return {
        "eigenvalues": [{"re": float(v.real), "im": float(v.imag)} for v in res.eigenvalues],
        "damping_ratios": [float(z) for z in res.damping_ratios],
        "frequencies": [float(f) for f in res.frequencies],
    }


def _sweep_family(db, target, axis, options):
    def family(q):
        point = target.copy()
        point[axis] = q
        return _interp(db, point, options)

    return family


def _validate_axis(db, field, axis):
    if not 0 <= axis < db.domain.n_params:
        raise _FieldError(field, f"axis {axis} outside [0, {db.domain.n_params - 1}]")


def _run_critical_parameter(db, target, req):
    params = req.critical_parameter
    if params is None:
        raise _FieldError("critical_parameter", "missing parameters for this operation")
    _validate_axis(db, "critical_parameter.axis", params.axis)
    lo, hi = params.range or (
        float(db.domain.lower[params.axis]),
        float(db.domain.upper[params.axis]),
    )
    family = _sweep_family(db, target, params.axis, req.options)
    res = analyze.critical_parameter(family, (lo, hi), params.tol)
    return {
        "q_crit": res.q_crit,
        "mode_index": res.mode_index,
        "tracking_ambiguous": res.tracking_ambiguous,
        "max_real_at_crit": res.max_real_at_crit,
    }


def _run_stability_curve(db, target, req):
    params = req.stability_curve
    if params is None:
        raise _FieldError("stability_curve", "missing parameters for this operation")
    _validate_axis(db, "stability_curve.axis", params.axis)
    _validate_axis(db, "stability_curve.crit_axis", params.crit_axis)
    if params.axis == params.crit_axis:
        raise _FieldError("stability_curve.crit_axis", "sweep and crossing axes must differ")
    if params.samples < 2:
        raise _FieldError("stability_curve.samples", "need at least 2 samples")
    lo, hi = params.crit_range or (
        float(db.domain.lower[params.crit_axis]),
        float(db.domain.upper[params.crit_axis]),
    )
    xs = np.linspace(db.domain.lower[params.axis], db.domain.upper[params.axis], params.samples)
    points = []
    for x in xs:
        point = target.copy()
        point[params.axis] = float(x)
        family = _sweep_family(db, point, params.crit_axis, req.options)
        res = analyze.critical_parameter(family, (lo, hi), params.tol)
        points.append(
            {
                "x": float(x),
                "values": {
                    "q_crit": res.q_crit,
                    "mode_index": res.mode_index,
                    "tracking_ambiguous": res.tracking_ambiguous,
                },
            }
        )
    return {"points": points}


_OPERATIONS = {
    "frequency_response": _run_frequency_response,
    "eigen": _run_eigen,
    "critical_parameter": _run_critical_parameter,
    "stability_curve": _run_stability_curve,
}


def create_app(databases=None, db_dir=None):
    """Build the service over preloaded databases or a directory of ``.romdb`` files."""
    if databases is None:
        databases = _load_directory(db_dir) if db_dir else {}
    app = FastAPI(title="romdb query service", version="0.1.0")
    app.state.databases = dict(databases)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(part) for part in first.get("loc", ()) if part != "body")
        return JSONResponse(
            status_code=400,
            content={"error": "validation", "field": loc, "detail": first.get("msg", "invalid request")},
        )

    @app.exception_handler(_FieldError)
    async def _field_handler(request: Request, exc: _FieldError):
        return JSONResponse(
            status_code=400,
            content={"error": "validation", "field": exc.field, "detail": exc.detail},
        )

    @app.exception_handler(OutOfDomainError)
    async def _domain_handler(request: Request, exc: OutOfDomainError):
        return JSONResponse(status_code=422, content={"error": exc.taxonomy, "detail": str(exc)})

    @app.exception_handler(RomDbError)
    async def _numerical_handler(request: Request, exc: RomDbError):
        return JSONResponse(status_code=500, content={"error": exc.taxonomy, "detail": str(exc)})

    def _get_db(db_id):
        db = app.state.databases.get(db_id)
        if db is None:
            return None
        return db

    @app.get("/databases")
    def list_databases():
        return [database_summary(db_id, db) for db_id, db in sorted(app.state.databases.items())]

    @app.get("/databases/{db_id}/meta")
    def get_meta(db_id: str):
        db = _get_db(db_id)
        if db is None:
            return JSONResponse(status_code=404, content={"error": "unknown_database", "detail": db_id})
        return database_meta(db_id, db)

    @app.post("/databases/{db_id}/query")
    def query(db_id: str, req: QueryRequest):
        db = _get_db(db_id)
        if db is None:
            return JSONResponse(status_code=404, content={"error": "unknown_database", "detail": db_id})
        target = _resolve_target(db, req)
        if req.operation == "rom":
            result = encode_rom(_interp(db, target, req.options))
        else:
            result = _OPERATIONS[req.operation](db, target, req)
        return {
            "database": db_id,
            "operation": req.operation,
            "target": target.tolist(),
            "consistency": db.consistency.to_dict(),
            "result": result,
        }

    return app
