"""Binary field container and CSV exports.

Container layout, repeated once per record::

    b"KML1" | uint32 LE header length | UTF-8 JSON header | float64 LE payload

The header holds the backend descriptor, the field kind and degree, the payload
shape and the encoding (``grid`` nodal values, which round-trip bit-exactly, or
``spectral`` coefficients). Plain arrays use kind ``array`` and no backend.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .backends import Geometry, make_backend
from .fields import EndoField, FormField, ScalarField, TangentValuedForm, VectorField

MAGIC = b"KML1"


def _describe(obj) -> tuple[dict, np.ndarray, Geometry | None]:
    if isinstance(obj, ScalarField):
        return {"kind": "scalar", "degree": 0}, obj.values, obj.geom
    if isinstance(obj, FormField):
        return {"kind": "form", "degree": obj.degree}, obj.comps, obj.geom
    if isinstance(obj, VectorField):
        return {"kind": "vector", "degree": 0}, obj.comps, obj.geom
    if isinstance(obj, EndoField):
        return {"kind": "endo", "degree": 0}, obj.comps, obj.geom
    if isinstance(obj, TangentValuedForm):
        return {"kind": "tangent_form", "degree": obj.degree}, obj.comps, obj.geom
    arr = np.asarray(obj, dtype=float)
    return {"kind": "array", "degree": 0}, arr, None


def encode(obj, name: str = "", encoding: str = "grid", meta: dict | None = None) -> bytes:
    head, arr, geom = _describe(obj)
    if encoding == "spectral" and geom is not None:
        arr = geom.coeff_vector(arr)
    elif encoding != "grid":
        raise ValueError(f"unknown encoding '{encoding}'")
    arr = np.ascontiguousarray(arr, dtype="<f8")
    head.update({"name": name, "encoding": encoding if geom is not None else "grid", "shape": list(arr.shape),
                 "backend": geom.descriptor() if geom is not None else None, "meta": meta or {}})
    blob = json.dumps(head, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(blob)) + blob + arr.tobytes()


def _backend(desc: dict, cache: dict) -> Geometry:
    key = json.dumps(desc, sort_keys=True)
    if key not in cache:
        kw = {k: v for k, v in desc.items() if k not in ("kind", "resolution")}
        cache[key] = make_backend(desc["kind"], desc["resolution"], **kw)
    return cache[key]


def decode_all(data: bytes, geom_cache: dict | None = None) -> list[tuple[str, object, dict]]:
    """All records as (name, object, header)."""
    cache = geom_cache if geom_cache is not None else {}
    out, pos = [], 0
    while pos < len(data):
        if data[pos:pos + 4] != MAGIC:
            raise ValueError(f"bad magic at byte {pos}")
        (hlen,) = struct.unpack("<I", data[pos + 4:pos + 8])
        head = json.loads(data[pos + 8:pos + 8 + hlen].decode("utf-8"))
        pos += 8 + hlen
        count = int(np.prod(head["shape"])) if head["shape"] else 1
        arr = np.frombuffer(data[pos:pos + 8 * count], dtype="<f8").reshape(head["shape"]).astype(float)
        pos += 8 * count
        out.append((head["name"], _rebuild(head, arr, cache), head))
    return out


def _rebuild(head: dict, arr: np.ndarray, cache: dict):
    if head["backend"] is None:
        return arr
    g = _backend(head["backend"], cache)
    if head["encoding"] == "spectral":
        arr = g.from_coeff_vector(arr)
    kind = head["kind"]
    if kind == "scalar":
        return ScalarField(g, arr)
    if kind == "form":
        return FormField(g, head["degree"], arr)
    if kind == "vector":
        return VectorField(g, arr)
    if kind == "endo":
        return EndoField(g, arr)
    if kind == "tangent_form":
        return TangentValuedForm(g, head["degree"], arr)
    raise ValueError(f"unknown record kind '{kind}'")


def save(path, records: dict, encoding: str = "grid") -> Path:
    """Write named fields or arrays to one container file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for name, obj in records.items():
            fh.write(encode(obj, name, encoding))
    return path


def load(path) -> dict:
    cache: dict = {}
    return {name: obj for name, obj, _ in decode_all(Path(path).read_bytes(), cache)}


# ---------------------------------------------------------------------------
# CSV


def grid_rows(obj) -> tuple[list[str], np.ndarray]:
    """Header and rows of a lossy grid export: coordinates then one column per component."""
    head, arr, geom = _describe(obj)
    if geom is None:
        raise TypeError("grid export needs a field")
    comps = arr.reshape((-1,) + geom.shape) if arr.ndim > len(geom.shape) else arr[None]
    if geom.normal() is not None:
        theta = np.arccos(np.clip(geom.cos_theta, -1, 1))[:, None] * np.ones(geom.shape)
        phi = np.ones(geom.shape) * geom.phi[None, :]
        coords, names = [theta, phi], ["theta", "phi"]
    else:
        coords = list(geom.coords)
        names = [f"x{i + 1}" for i in range(geom.D)]
    cols = names + (["value"] if comps.shape[0] == 1 else [f"c{i}" for i in range(comps.shape[0])])
    table = np.stack([c.ravel() for c in coords] + [c.ravel() for c in comps], axis=1)
    return cols, table


def export_csv(obj, path) -> Path:
    cols, table = grid_rows(obj)
    return write_table(path, cols, table)


def write_table(path, columns: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def trace_csv(trace, path) -> Path:
    cols = ["t", "F", "H", "theta_sup", "dt"]
    return write_table(path, cols, ([r[c] for c in cols] for r in trace.rows()))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def to_text(obj) -> str:
    """CSV text of a grid export (convenience for small fields)."""
    cols, table = grid_rows(obj)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(cols)
    w.writerows(table.tolist())
    return buf.getvalue()
