"""CSV and JSON formats shared by the command line and the tests.

Scan CSV: one row per setting with columns ``setting, singles_1, singles_2,
coincidences, accidentals_est, n_gates`` (plus ``coincidences_corrected`` for
stage scans).  When both routings are written, each count column appears
twice with a ``dd_`` and a ``cd_`` prefix.  Floats use 12 significant digits,
so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .counting.model import Routing, ScanResult
from .interference import BeatCurve

BASE_COLUMNS = ("setting", "singles_1", "singles_2", "coincidences", "accidentals_est", "n_gates")
CORRECTED = "coincidences_corrected"


class RecordError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def scan_csv(results: Sequence[ScanResult]) -> str:
    cols = list(BASE_COLUMNS)
    if any(r.coincidences_corrected is not None for r in results):
        cols.append(CORRECTED)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in results:
        d = r.as_dict()
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def wide_scan_csv(by_routing: Mapping[Routing, Sequence[ScanResult]]) -> str:
    """Rows keyed by setting; one block of count columns per routing."""
    routings = list(by_routing)
    lists = [by_routing[r] for r in routings]
    n = len(lists[0])
    if any(len(x) != n for x in lists):
        raise RecordError("routings have different numbers of settings")
    cols = ["setting"] + [f"{r.value.lower()}_{c}" for r in routings for c in BASE_COLUMNS[1:]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i in range(n):
        row = [_fmt(lists[0][i].setting)]
        for res in lists:
            d = res[i].as_dict()
            row += [_fmt(d[c]) for c in BASE_COLUMNS[1:]]
        w.writerow(row)
    return buf.getvalue()


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise RecordError(f"cannot read {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise RecordError(f"{path} is empty") from None
    rows = [r for r in reader if r]
    cols: dict[str, list[float]] = {h: [] for h in header}
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise RecordError(f"{path}:{k}: expected {len(header)} fields, got {len(r)}")
        for h, v in zip(header, r):
            try:
                cols[h].append(float(v))
            except ValueError:
                raise RecordError(f"{path}:{k}: {h} is not a number: {v!r}") from None
    return {h: np.array(v) for h, v in cols.items()}


def beat_curve_from_csv(path: str | Path) -> BeatCurve:
    """Stage-scan CSV to a beat curve, preferring the dark-subtracted column."""
    cols = read_csv_columns(path)
    if "setting" not in cols:
        raise RecordError(f"{path}: no 'setting' column")
    for name in (CORRECTED, "coincidences"):
        if name in cols:
            return BeatCurve(cols["setting"], cols[name])
    raise RecordError(f"{path}: no coincidence column")


def write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise RecordError(f"cannot write {path}: {exc.strerror}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def plot_table(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Whitespace-separated table with a ``#`` header line."""
    lines = ["# " + " ".join(columns)]
    lines += [" ".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON schemas of the command outputs
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_COMPLEX = {"type": "object", "properties": {"re": _NUM, "im": _NUM}, "required": ["re", "im"]}

STATE_SCHEMA = {
    "type": "object",
    "required": ["phi", "p", "amplitudes", "probabilities", "fidelity"],
    "properties": {
        "phi": _NUM,
        "p": {"type": "number", "minimum": 0, "maximum": 1},
        "amplitudes": {
            "type": "object",
            "required": ["cc", "dd", "sc_id", "ic_sd"],
            "additionalProperties": _COMPLEX,
        },
        "probabilities": {"type": "object", "additionalProperties": _NUM},
        "fidelity": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

JONES_SCHEMA = {
    "type": "object",
    "required": ["classification", "transmission", "purity_p", "loop_phase", "unitary"],
    "properties": {
        "classification": {"enum": ["ReflectorMatch", "TransmitterMatch", "InputMatched", "Unmatched"]},
        "transmission": {"type": "number", "minimum": 0},
        "purity_p": {"type": "number", "minimum": 0, "maximum": 1},
        "loop_phase": _NUM_OR_NULL,
        "unitary": {"type": "boolean"},
        "input": {"type": "array", "items": _COMPLEX, "minItems": 2, "maxItems": 2},
    },
}

_PARAMS = {
    "type": "object",
    "required": ["amplitude", "visibility", "sigma", "origin_l0", "fixed_freq_diff"],
    "properties": {
        "amplitude": _NUM,
        "visibility": {"type": "number", "minimum": 0, "maximum": 1},
        "sigma": _NUM,
        "origin_l0": _NUM,
        "fixed_freq_diff": _NUM,
    },
}

FIT_SCHEMA = {
    "type": "object",
    "required": ["params", "visibility_std_err", "fitted_period", "residual_rms", "converged", "fidelity"],
    "properties": {
        "params": _PARAMS,
        "visibility_std_err": _NUM_OR_NULL,
        "fitted_period": _NUM,
        "residual_rms": _NUM,
        "converged": {"type": "boolean"},
        "fidelity": {"type": "number", "minimum": 0.5, "maximum": 1},
        "spectral_period": _NUM_OR_NULL,
        "beat_detected": {"type": "boolean"},
        "source": {"type": "string"},
    },
}

OVERLAY_SCHEMA = {
    "type": "object",
    "required": ["kind", "columns", "rows"],
    "properties": {
        "kind": {"enum": ["hwp", "power", "stage"]},
        "description": {"type": "string"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {"type": "array", "items": {"type": "array", "items": _NUM}},
        "parameters": {"type": "object"},
    },
}

SCAN_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["kind", "csv", "overlay", "rows", "backend"],
    "properties": {
        "kind": {"enum": ["hwp", "power", "stage"]},
        "csv": {"type": "string"},
        "overlay": {"type": "string"},
        "rows": {"type": "integer", "minimum": 0},
        "backend": {"enum": ["cython", "python"]},
        "fit": {"type": ["object", "null"]},
    },
}
