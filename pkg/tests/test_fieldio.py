"""Round trips and error reporting for the shared file formats."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugelab.fieldio import (dumps_json, fmt_float, read_field, write_csv,
                              write_field, write_json, write_pgm)

finite_doubles = st.floats(allow_nan=False, allow_infinity=False)


@given(finite_doubles)
def test_fmt_float_lossless(x):
    assert float(fmt_float(x)) == x


def test_fmt_float_rejects_nonfinite():
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ValueError):
            fmt_float(bad)


def test_dumps_json_deterministic_and_parseable():
    doc = {"b": [1.0, 0.1, True, None], "a": {"x": 2**53 + 1.0, "y": "s"}}
    text = dumps_json(doc)
    assert text == dumps_json(doc)
    parsed = json.loads(text)
    assert parsed["b"][1] == 0.1
    # insertion order preserved, not sorted
    assert text.index('"b"') < text.index('"a"')


@pytest.mark.parametrize("kind,shape_tail,n", [
    ("scalar", (), 0),
    ("vec2", (2,), 0),
    ("rotation", (3, 3), 3),
    ("skew_potential", (2, 2, 2), 2),
])
def test_field_round_trip(tmp_path, kind, shape_tail, n):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((6, 6) + shape_tail)
    path = tmp_path / f"{kind}.json"
    write_field(path, kind, data, n=n)
    kind2, n2, grid, back = read_field(path)
    assert (kind2, n2) == (kind, n)
    assert grid.n_cells == 6
    np.testing.assert_array_equal(back, data)


def test_read_field_reports_byte_offset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"kind": "scalar", "n": 0, "N": 2, "data": [1, 2,, 4]}')
    with pytest.raises(ValueError, match=r"byte 49"):
        read_field(path)


def test_read_field_validates_payload(tmp_path):
    path = tmp_path / "short.json"
    path.write_text('{"kind": "scalar", "n": 0, "N": 3, "data": [1, 2]}')
    with pytest.raises(ValueError, match="length"):
        read_field(path)
    path2 = tmp_path / "kind.json"
    path2.write_text('{"kind": "tensor", "n": 0, "N": 2, "data": [1, 2, 3, 4]}')
    with pytest.raises(ValueError, match="kind"):
        read_field(path2)
    path3 = tmp_path / "nan.json"
    path3.write_text('{"kind": "scalar", "n": 0, "N": 1, "data": [NaN]}')
    with pytest.raises(ValueError):
        read_field(path3)


def test_write_field_shape_guard(tmp_path):
    from gaugelab.errors import DimensionMismatch
    with pytest.raises(DimensionMismatch):
        write_field(tmp_path / "x.json", "vec2", np.zeros((4, 4)))


def test_pgm_format_and_sidecar(tmp_path):
    data = np.array([[0.0, 1.0], [2.0, 4.0]])
    path = tmp_path / "f.pgm"
    write_pgm(path, data)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    pix = struct.unpack(">4H", raw[len(b"P5\n2 2\n65535\n"):])
    assert pix == (0, round(65535 / 4), round(2 * 65535 / 4), 65535)
    side = json.loads((tmp_path / "f.pgm.json").read_text())
    assert side == {"lo": 0.0, "hi": 4.0, "maxval": 65535}
    # constant field maps to all zeros instead of dividing by zero
    write_pgm(tmp_path / "c.pgm", np.full((2, 2), 7.0))
    raw = (tmp_path / "c.pgm").read_bytes()
    assert raw.endswith(b"\x00" * 8)


def test_write_csv_17_digits(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [[1, 0.1], [2, 1.0 / 3.0]])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1].split(",")[1] == fmt_float(0.1)
    assert float(lines[2].split(",")[1]) == 1.0 / 3.0


def test_write_json_trailing_newline(tmp_path):
    write_json(tmp_path / "d.json", {"k": 1})
    assert (tmp_path / "d.json").read_bytes() == b'{"k": 1}\n'
