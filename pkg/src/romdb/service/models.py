"""Pydantic request models and JSON encoding helpers of the query service.

Wire conventions: matrices are nested row-major arrays, wrapped as
``{"re": ..., "im": ...}`` when complex; curves are arrays of
``{"x": ..., "values": ...}`` points. Every query response carries the
database's consistency provenance so clients can display alignment status.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field


class TargetModel(BaseModel):
    coords: list[float]


class FrequencyResponseParams(BaseModel):
    grid: list[float]
    input: Optional[list[float]] = None


class CriticalParameterParams(BaseModel):
    axis: int
    range: Optional[tuple[float, float]] = None
    tol: float = 1e-6


class StabilityCurveParams(BaseModel):
    axis: int
    samples: int
    crit_axis: int
    crit_range: Optional[tuple[float, float]] = None
    tol: float = 1e-6


class QueryOptions(BaseModel):
    allow_extrapolation: bool = False
    allow_inconsistent: bool = False


class QueryRequest(BaseModel):
    """One online query against a stored database."""

    target: TargetModel
    operation: Literal[
        "rom", "frequency_response", "eigen", "critical_parameter", "stability_curve"
    ]
    frequency_response: Optional[FrequencyResponseParams] = None
    critical_parameter: Optional[CriticalParameterParams] = None
    stability_curve: Optional[StabilityCurveParams] = None
    options: QueryOptions = Field(default_factory=QueryOptions)


def encode_matrix(m):
    m = np.asarray(m)
    if np.iscomplexobj(m):
        return {"re": m.real.tolist(), "im": m.imag.tolist()}
    return m.tolist()


def encode_rom(rom):
    return {
        "order": rom.order,
        "k": rom.k,
        "n_inputs": rom.n_inputs,
        "n_outputs": rom.n_outputs,
        "scalar_field": rom.scalar_field,
        "slots": {name: encode_matrix(mat) for name, mat in rom.slots()},
    }


def database_summary(db_id, db):
    return {
        "id": db_id,
        "kind": db.kind,
        "k": db.k,
        "n_inputs": db.n_inputs,
        "n_outputs": db.n_outputs,
        "n_records": db.n_records,
        "n_params": db.domain.n_params,
        "scalar_field": db.scalar_field,
        "consistency": db.consistency.to_dict(),
        "domain": {"lower": db.domain.lower.tolist(), "upper": db.domain.upper.tolist()},
    }


def database_meta(db_id, db):
    meta = database_summary(db_id, db)
    meta.update(
        {
            "points": [rec.point.tolist() for rec in db.records],
            "hdm_dof_counts": [rec.hdm_dof_count for rec in db.records],
            "subdomains": [
                {"lower": b.lower.tolist(), "upper": b.upper.tolist()}
                for b in db.domain.subdomains
            ],
            "partition": [list(sub) for sub in db.partition],
            "scheme": db.scheme.to_dict() if db.scheme else None,
            "plan": {k: v.to_dict() for k, v in db.plan.items()} if db.plan else None,
        }
    )
    return meta
