"""JSON container format for trajectory archives and reports.

Rationals are written as ``"p/q"`` strings.  Floats (numeric witnesses only)
are written with 17 significant digits; non-finite floats become the strings
``"inf"``, ``"-inf"`` and ``"nan"``.  Keys are sorted so identical content
gives byte-identical documents.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from fractions import Fraction
from pathlib import Path

import numpy as np

from kintraj.errors import ArchiveError
from kintraj.exact import PolyMatrix, as_rational, fraction_str
from kintraj.trajectory import AnsatzSpec, CoefficientRecord, TrajectoryPair, assemble_pair

ARCHIVE_FORMAT = "kintraj-trajectory-archive"
ARCHIVE_VERSION = 1

_FLOAT_TAG = "\u0000f:"
_FLOAT_RE = re.compile(r'"\\u0000f:([^"]*)"')


def _prepare(obj):
    if isinstance(obj, dict):
        return {str(k): _prepare(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v) for v in obj]
    if isinstance(obj, Fraction):
        return fraction_str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return _FLOAT_TAG + format(x, ".17g")
    if isinstance(obj, np.ndarray):
        return _prepare(obj.tolist())
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    text = json.dumps(_prepare(obj), sort_keys=True, indent=indent, separators=(",", ": ") if indent else (",", ":"))
    return _FLOAT_RE.sub(lambda m: m.group(1), text)


def content_hash(body: dict) -> str:
    return "sha256:" + hashlib.sha256(dumps(body, indent=None).encode()).hexdigest()


def pair_to_archive(pair: TrajectoryPair) -> dict:
    spec = pair.spec
    body = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_VERSION,
        "k": pair.k,
        "D": pair.denom,
        "kappa_list": [fraction_str(q) for q in spec.kappa_list],
        "basis_exponents": [fraction_str(q) for q in spec.basis_exponents],
        "time_exponent": spec.time_exponent,
        "A": pair.A.to_records(),
        "B": pair.B.to_records(),
        "alpha": [[rec.to_record() for rec in row] for row in pair.alpha],
        "beta": [[rec.to_record() for rec in row] for row in pair.beta],
    }
    return dict(body, content_hash=content_hash(body))


def pair_from_archive(doc: dict) -> TrajectoryPair:
    """Rebuild a pair and check it against its hash and its own coefficient tables."""
    if doc.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError(f"not a trajectory archive: format={doc.get('format')!r}")
    body = {key: value for key, value in doc.items() if key != "content_hash"}
    if doc.get("content_hash") != content_hash(body):
        raise ArchiveError("content hash mismatch")
    try:
        k = int(doc["k"])
        spec = AnsatzSpec(k)
        if [as_rational(q) for q in doc["kappa_list"]] != list(spec.kappa_list):
            raise ArchiveError("kappa list does not match the ansatz for this k")
        alpha = [[CoefficientRecord.from_record(rec) for rec in row] for row in doc["alpha"]]
        beta = [[CoefficientRecord.from_record(rec) for rec in row] for row in doc["beta"]]
        pair = assemble_pair(k, alpha, beta)
        stored_a = PolyMatrix.from_records(doc["A"], spec.denom)
        stored_b = PolyMatrix.from_records(doc["B"], spec.denom)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"malformed archive: {exc}") from exc
    if stored_a != pair.A or stored_b != pair.B:
        raise ArchiveError("stored matrices disagree with the coefficient tables")
    return pair


def save_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())
