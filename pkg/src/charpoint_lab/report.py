"""JSON and CSV serialization of classification and integrability results."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import scipy

from . import __version__
from .charlocus import CharPointRecord, CriticalCurveRecord
from .quadrature import IntegrabilityReport

SCHEMA_VERSION = "charpoint-lab/1"

_NUM = {"type": ["number", "null"]}
_INT = {"type": ["integer", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "config", "char_points", "integrability"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "versions": {"type": "object"},
        "char_points": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x", "y", "z", "hessian", "det", "class", "N", "theta", "alpha", "order_k", "xi_leading"],
                "properties": {
                    "x": {"type": "number"},
                    "y": {"type": "number"},
                    "z": {"type": "number"},
                    "hessian": {"type": "array", "minItems": 2, "maxItems": 2,
                                "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}},
                    "det": {"type": "number"},
                    "class": {"enum": ["nondegenerate", "mildly_degenerate", "not_mildly_degenerate",
                                       "unresolved", "non_isolated"]},
                    "N": {"type": ["array", "null"], "items": {"type": "number"}},
                    "theta": _NUM,
                    "alpha": _NUM,
                    "order_k": _INT,
                    "xi_leading": _NUM,
                    "W0": _NUM,
                    "isolated": {"type": "boolean"},
                    "ill_conditioned": {"type": "boolean"},
                    "notes": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "integrability": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["center", "quantity", "measure", "strategy", "annuli", "verdict", "limit",
                             "tail_bound", "growth_exponent"],
                "properties": {
                    "center": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
                    "quantity": {"enum": ["inv_w", "abs_mean", "signed_mean"]},
                    "measure": {"enum": ["riemannian", "sub_riemannian"]},
                    "strategy": {"enum": ["cartesian", "rectified", "weighted_polar"]},
                    "annuli": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["eps", "value", "error"],
                            "properties": {"eps": {"type": "number"}, "value": {"type": "number"},
                                           "error": {"type": "number"}},
                        },
                    },
                    "verdict": {"enum": ["converged", "diverged", "inconclusive"]},
                    "limit": _NUM,
                    "tail_bound": _NUM,
                    "growth_exponent": _NUM,
                },
            },
        },
    },
}


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def record_to_json(rec: CharPointRecord) -> dict:
    H = np.asarray(rec.hessian, dtype=float)
    return {
        "x": float(rec.x),
        "y": float(rec.y),
        "z": float(rec.z),
        "hessian": [[float(H[0, 0]), float(H[0, 1])], [float(H[1, 0]), float(H[1, 1])]],
        "det": float(rec.det),
        "class": rec.classification,
        "N": None if rec.N is None else [float(rec.N[0]), float(rec.N[1])],
        "theta": _num(rec.theta),
        "alpha": _num(rec.alpha),
        "order_k": rec.order_k,
        "xi_leading": _num(rec.xi_leading),
        "W0": _num(rec.W0),
        "isolated": bool(rec.isolated),
        "ill_conditioned": bool(rec.ill_conditioned),
        "notes": list(rec.notes),
    }


def scan_to_json(rep: IntegrabilityReport) -> dict:
    return {
        "center": [float(rep.center[0]), float(rep.center[1])],
        "quantity": rep.quantity,
        "measure": rep.measure,
        "strategy": rep.strategy,
        "geometry": rep.geometry,
        "outer_radius": float(rep.outer_radius),
        "ratio": float(rep.ratio),
        "annuli": [{"eps": a.eps, "value": a.value, "error": a.error} for a in rep.annuli],
        "increments": [float(v) for v in rep.increments],
        "verdict": rep.verdict,
        "limit": _num(rep.limit),
        "tail_bound": _num(rep.tail_bound),
        "growth_exponent": _num(rep.growth_exponent),
        "max_subdivision": bool(rep.max_subdivision),
        "notes": list(rep.notes),
    }


def build_report(config: dict, records=(), scans=()) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "config": config,
        "versions": {"charpoint_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "char_points": [record_to_json(r) for r in records],
        "integrability": [scan_to_json(s) for s in scans],
    }


def dumps(report: dict) -> str:
    """Deterministic JSON; floats use the shortest repr that round-trips."""
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def validate(report: dict) -> None:
    """Check ``report`` against :data:`REPORT_SCHEMA` (needs the jsonschema package)."""
    import jsonschema

    jsonschema.validate(report, REPORT_SCHEMA)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def scans_csv(scans) -> str:
    rows = []
    for s in scans:
        for a in s.annuli:
            rows.append((s.center[0], s.center[1], s.quantity, s.measure, s.strategy, a.eps, a.value, a.error))
    return _csv(["center_x", "center_y", "quantity", "measure", "strategy", "eps", "value", "error"], rows)


def curve_csv(rows) -> str:
    return _csv(["x_param", "x", "y", "z", "xi"], rows)


def curve_rows(curve: CriticalCurveRecord, surf, nf_surf=None):
    """(x_param, x, y, z, xi) in the original coordinates of ``surf``."""
    shift = getattr(nf_surf, "shift", (0.0, 0.0))
    m = getattr(nf_surf, "matrix", np.eye(2))
    rows = []
    for s in sorted(curve.samples, key=lambda s: (s.side, abs(s.x_param))):
        x = shift[0] + m[0, 0] * s.x + m[0, 1] * s.y
        y = shift[1] + m[1, 0] * s.x + m[1, 1] * s.y
        z = float(surf.jet(x, y, 0, value=True).value)
        rows.append((s.x_param, float(x), float(y), z, s.xi))
    return rows
