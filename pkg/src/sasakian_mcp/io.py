"""JSON and CSV serialization shared by the command line tools.

Every JSON document carries ``schema_version`` and a ``kind`` tag:

    {"schema_version": 1, "kind": "<kind>", "config": {...}, "data": {...}}

CSV output has a header line and floats printed with 17 significant digits,
which round-trips IEEE doubles exactly.
"""

import csv
import json
import math

import numpy as np

from .errors import DomainError
from .riccati import CurvatureMatrix, CurvatureProfile

SCHEMA_VERSION = 1


def _plain(obj):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def envelope(kind, data, config=None):
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "config": _plain(config or {}),
            "data": _plain(data)}


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True)


def loads(text):
    doc = json.loads(text)
    check_schema(doc)
    return doc


def check_schema(doc):
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"unsupported document: schema_version must be {SCHEMA_VERSION}")
    return doc


def read_json(path):
    with open(path) as fh:
        return loads(fh.read())


def format_float(x):
    return "%.17g" % x


def write_csv(stream, columns, rows):
    """Header plus one line per row; floats with 17 significant digits."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v
                         for v in row])


def read_csv(stream):
    reader = csv.reader(stream)
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows).reshape(len(rows), len(header))


# --- curvature profile files ------------------------------------------------------
#
# {"schema_version": 1, "kind": "curvature_profile", "data": {
#     "half_dim": n,
#     "r_bb": .., "r_cb": [..], "r_cc": [[..]]          constant profile, or
#     "matrix": [[..]]                                   full (2n+1) matrix, or
#     "knots": [{"t": .., "r_bb": .., ...}, ...]         piecewise-linear in t }}

def profile_from_doc(doc):
    check_schema(doc)
    if doc.get("kind") != "curvature_profile":
        raise DomainError("expected a document of kind 'curvature_profile'")
    data = doc["data"]
    if "matrix" in data:
        curv = CurvatureMatrix.from_matrix(np.asarray(data["matrix"], float),
                                           data.get("half_dim"))
        return CurvatureProfile.constant_from(curv)
    n = int(data["half_dim"])
    if "knots" in data:
        knots = sorted(data["knots"], key=lambda k: k["t"])
        ts = np.array([k["t"] for k in knots], float)
        mats = np.array([CurvatureMatrix.from_dict({**k, "half_dim": n}).assemble()
                         for k in knots])

        def func(t):
            flat = np.array([np.interp(t, ts, mats[:, i, j])
                             for i in range(mats.shape[1]) for j in range(mats.shape[2])])
            return CurvatureMatrix.from_matrix(flat.reshape(mats.shape[1:]), n)

        prof = CurvatureProfile(func, n, constant=len(knots) == 1)
        prof.blocks(0.0)
        return prof
    return CurvatureProfile.constant_from(CurvatureMatrix.from_dict({**data, "half_dim": n}))


def profile_to_doc(curv):
    return envelope("curvature_profile", curv.to_dict())
