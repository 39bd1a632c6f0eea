"""JSON artifacts: toy-model weight files, encoding tables, and reports.

Matrices are ``{"rows": r, "cols": c, "data": [...]}`` with row-major data.
Instead of ``data`` a matrix may name a ``data_file``: raw little-endian
float64 values, resolved relative to the JSON file.

Floats are written with 17 significant digits so every file reads back to
the identical in-memory value.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .circuits import HeadWeights, ToyModel
from .vect import LinearMap


class FormatError(ValueError):
    """Malformed input file; the message names the offending field."""


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return f"{x:.16e}"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with full-precision floats; short numeric lists stay on one line."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def matrix_to_json(m: LinearMap) -> dict:
    return {"rows": m.rows, "cols": m.cols, "data": m.flat()}


def matrix_from_json(obj: Any, where: str, base_dir: Path | None = None) -> LinearMap:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a matrix object")
    for key in ("rows", "cols"):
        if not isinstance(obj.get(key), int) or isinstance(obj.get(key), bool) or obj[key] < 0:
            raise FormatError(f"{where}.{key}: expected a nonnegative integer")
    rows, cols = obj["rows"], obj["cols"]
    if "data" in obj:
        data = obj["data"]
        if not isinstance(data, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in data
        ):
            raise FormatError(f"{where}.data: expected a list of numbers")
        arr = np.array(data, dtype=np.float64)
    elif "data_file" in obj:
        path = Path(obj["data_file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            arr = np.fromfile(path, dtype="<f8")
        except OSError as exc:
            raise FormatError(f"{where}.data_file: {exc}") from exc
    else:
        raise FormatError(f"{where}: missing 'data' or 'data_file'")
    if arr.size != rows * cols:
        raise FormatError(f"{where}.data: {arr.size} entries, expected {rows}x{cols}")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}.data: entries must be finite")
    return LinearMap(arr, rows, cols)


def model_to_json(m: ToyModel) -> dict:
    return {
        "d_model": m.d_model,
        "d_vocab": m.d_vocab,
        "n": m.n,
        "W_E": matrix_to_json(m.W_E),
        "W_U": matrix_to_json(m.W_U),
        "layers": [
            [
                {
                    "W_Q": matrix_to_json(h.W_Q),
                    "W_K": matrix_to_json(h.W_K),
                    "W_V": matrix_to_json(h.W_V),
                    "W_O": matrix_to_json(h.W_O),
                    "mixer": matrix_to_json(mixer),
                }
                for h, mixer in layer
            ]
            for layer in m.layers
        ],
    }


def _expect_shape(m: LinearMap, shape: tuple[int, int], where: str) -> LinearMap:
    if m.shape != shape:
        raise FormatError(f"{where}: expected {shape[0]}x{shape[1]}, got {m.rows}x{m.cols}")
    return m


def model_from_json(obj: Any, base_dir: Path | None = None) -> ToyModel:
    if not isinstance(obj, dict):
        raise FormatError("top level: expected an object")
    dims = {}
    for key in ("d_model", "d_vocab", "n"):
        v = obj.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise FormatError(f"{key}: expected a positive integer")
        dims[key] = v
    d, V, n = dims["d_model"], dims["d_vocab"], dims["n"]
    for key in ("W_E", "W_U"):
        if key not in obj:
            raise FormatError(f"{key}: missing")
    W_E = _expect_shape(matrix_from_json(obj["W_E"], "W_E", base_dir), (d, V), "W_E")
    W_U = _expect_shape(matrix_from_json(obj["W_U"], "W_U", base_dir), (V, d), "W_U")
    layers_obj = obj.get("layers")
    if not isinstance(layers_obj, list):
        raise FormatError("layers: expected a list of layers")
    layers = []
    for li, layer in enumerate(layers_obj):
        if not isinstance(layer, list):
            raise FormatError(f"layers[{li}]: expected a list of heads")
        heads = []
        for hi, head in enumerate(layer):
            where = f"layers[{li}][{hi}]"
            if not isinstance(head, dict):
                raise FormatError(f"{where}: expected an object")
            mats = {}
            for key in ("W_Q", "W_K", "W_V", "W_O", "mixer"):
                if key not in head:
                    raise FormatError(f"{where}.{key}: missing")
                mats[key] = matrix_from_json(head[key], f"{where}.{key}", base_dir)
            d_head = mats["W_Q"].rows
            _expect_shape(mats["W_Q"], (d_head, d), f"{where}.W_Q")
            _expect_shape(mats["W_K"], (d_head, d), f"{where}.W_K")
            _expect_shape(mats["W_V"], (d_head, d), f"{where}.W_V")
            _expect_shape(mats["W_O"], (d, d_head), f"{where}.W_O")
            _expect_shape(mats["mixer"], (n, n), f"{where}.mixer")
            heads.append((HeadWeights(mats["W_Q"], mats["W_K"], mats["W_V"], mats["W_O"]), mats["mixer"]))
        layers.append(tuple(heads))
    return ToyModel(W_E, W_U, n, tuple(layers))


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_model(path: str | Path) -> ToyModel:
    p = Path(path)
    return model_from_json(read_json(p), p.parent)


def save_model(path: str | Path, m: ToyModel) -> None:
    write_json(path, model_to_json(m))


def table_to_json(rows: np.ndarray, kind: str, **meta) -> dict:
    rows = np.asarray(rows, dtype=np.float64)
    out = {"kind": kind, "dim": int(rows.shape[1]), "positions": int(rows.shape[0])}
    out.update(meta)
    out["rows"] = rows.tolist()
    return out


def table_from_json(obj: Any) -> np.ndarray:
    rows = obj.get("rows") if isinstance(obj, dict) else obj
    if not isinstance(rows, list) or not rows:
        raise FormatError("rows: expected a nonempty list of rows")
    width = None
    for i, r in enumerate(rows):
        if not isinstance(r, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in r
        ):
            raise FormatError(f"rows[{i}]: expected a list of numbers")
        if width is None:
            width = len(r)
        elif len(r) != width:
            raise FormatError(f"rows[{i}]: length {len(r)}, expected {width}")
    if not width:
        raise FormatError("rows: rows must be nonempty")
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError("rows: entries must be finite")
    return arr


def load_table(path: str | Path) -> np.ndarray:
    return table_from_json(read_json(path))
