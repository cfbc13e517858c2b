"""File formats: the shared JSON field format, report JSON, PGM dumps, CSV.

All writers are deterministic: fixed key order, floats at 17 significant
digits (lossless for doubles), '\n' newlines.  The JSON reader reports the
byte offset of syntax errors so the CLI can surface it.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DimensionMismatch
from .grid import Grid, ScalarField, VecField

FIELD_KINDS = ("scalar", "vec2", "rotation", "skew_potential")

_TRAILING = {
    "scalar": lambda n: (),
    "vec2": lambda n: (2,),
    "rotation": lambda n: (n, n),
    "skew_potential": lambda n: (n, n, 2),
}


def fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite value in output")
    s = format(float(x), ".17g")
    return s


def dumps_json(obj) -> str:
    """Canonical JSON text: insertion-ordered dicts, 17-digit floats."""
    out = []
    _emit(obj, out)
    return "".join(out)


def _emit(obj, out):
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        if isinstance(obj, np.ndarray):
            obj = obj.tolist()
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, bool) or obj is None:
        out.append("true" if obj is True else "false" if obj is False else "null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def load_json(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        return json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: invalid JSON at byte {e.pos}: {e.msg}") from e


def write_field(path, kind: str, data: np.ndarray, n: int = 0) -> None:
    """Write a grid field in the shared format (flat row-major data)."""
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    arr = np.ascontiguousarray(data, dtype=np.float64)
    N = arr.shape[0]
    want = (N, N) + _TRAILING[kind](n)
    if arr.shape != want:
        raise DimensionMismatch(f"field kind {kind}: expected {want}, got {arr.shape}")
    doc = {"kind": kind, "n": int(n), "N": int(N), "data": arr.reshape(-1)}
    write_json(path, doc)


def read_field(path):
    """Read a field file; returns (kind, n, grid, data array in field shape)."""
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: field file must be a JSON object")
    for key in ("kind", "n", "N", "data"):
        if key not in doc:
            raise ValueError(f"{path}: missing key {key!r}")
    kind, n, N = doc["kind"], int(doc["n"]), int(doc["N"])
    if kind not in FIELD_KINDS:
        raise ValueError(f"{path}: unknown field kind {kind!r}")
    flat = np.asarray(doc["data"], dtype=np.float64)
    want = (N, N) + _TRAILING[kind](n)
    expect = int(np.prod(want))
    if flat.size != expect:
        raise ValueError(f"{path}: data length {flat.size}, expected {expect}")
    if not np.all(np.isfinite(flat)):
        raise ValueError(f"{path}: non-finite entries")
    grid = Grid(N)
    return kind, n, grid, flat.reshape(want)


def read_scalar(path) -> ScalarField:
    kind, _, grid, data = read_field(path)
    if kind != "scalar":
        raise ValueError(f"{path}: expected scalar field, got {kind}")
    return ScalarField(grid, data)


def read_vec2(path) -> VecField:
    kind, _, grid, data = read_field(path)
    if kind != "vec2":
        raise ValueError(f"{path}: expected vec2 field, got {kind}")
    return VecField(grid, data)


def write_pgm(path, data: np.ndarray) -> None:
    """16-bit binary PGM (P5) with linear min-max scaling.

    Row i of the image is grid row i (x index); the scaling interval is
    recorded in a '<path>.json' sidecar so values can be recovered.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch("PGM dump needs a 2-D array")
    lo, hi = float(arr.min()), float(arr.max())
    span = hi - lo
    if span <= 0.0:
        pix = np.zeros(arr.shape, dtype=np.uint16)
    else:
        pix = np.round((arr - lo) / span * 65535.0).astype(np.uint16)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii"))
        fh.write(struct.pack(f">{pix.size}H", *pix.reshape(-1)))
    write_json(str(path) + ".json", {"lo": lo, "hi": hi, "maxval": 65535})


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(fmt_float(float(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
