import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab import serialization as ser
from kahlerlab.backends import Sphere, Torus
from kahlerlab.fields import FormField, TangentValuedForm
from kahlerlab.potentials import FlowTrace
from kahlerlab.scenes import random_endo, random_form, random_scalar, random_vector

from conftest import rng

GEOMS = {"t2": Torus(1, 8), "t4": Torus(2, 4), "s2": Sphere(8)}


def sample_fields(geom, seed):
    r = rng(seed)
    out = {"scalar": random_scalar(geom, r, 2), "vector": random_vector(geom, r, 2),
           "endo": random_endo(geom, r, 2), "two_form": random_form(geom, 2, r, 2)}
    D = geom.D
    out["tangent_form"] = TangentValuedForm(geom, 1, r.normal(size=(D, D) + geom.shape))
    return out


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_grid_round_trip_is_bit_exact(tmp_path, name):
    fields = sample_fields(GEOMS[name], 1)
    fields["plain"] = np.arange(6.0).reshape(2, 3)
    back = ser.load(ser.save(tmp_path / "f.kml", fields))
    assert list(back) == list(fields)
    for key, obj in fields.items():
        assert type(back[key]) is type(obj)
        a = obj if isinstance(obj, np.ndarray) else obj.comps
        b = back[key] if isinstance(back[key], np.ndarray) else back[key].comps
        assert a.tobytes() == b.tobytes()
        if isinstance(obj, (FormField, TangentValuedForm)):
            assert back[key].degree == obj.degree


@pytest.mark.parametrize("name", sorted(GEOMS))
def test_spectral_round_trip(tmp_path, name):
    geom = GEOMS[name]
    f = random_scalar(geom, rng(2), 2)
    back = ser.load(ser.save(tmp_path / "s.kml", {"f": f}, encoding="spectral"))["f"]
    assert np.max(np.abs(back.values - f.values)) <= 1e-12


def test_records_share_one_backend(tmp_path):
    g = GEOMS["s2"]
    back = ser.load(ser.save(tmp_path / "a.kml", {"a": random_scalar(g, rng(0)), "b": random_vector(g, rng(1))}))
    assert back["a"].geom is back["b"].geom


def test_bad_magic_and_encoding(tmp_path):
    with pytest.raises(ValueError, match="magic"):
        ser.decode_all(b"NOPE" + b"\0" * 20)
    with pytest.raises(ValueError, match="encoding"):
        ser.encode(random_scalar(GEOMS["t2"], rng(0)), encoding="zip")


def test_field_csv_export(tmp_path):
    g = GEOMS["t2"]
    cols, rows = ser.read_table(ser.export_csv(random_vector(g, rng(3)), tmp_path / "v.csv"))
    assert cols == ["x1", "x2", "c0", "c1"]
    assert len(rows) == g.M ** 2
    cols, rows = ser.read_table(ser.export_csv(random_scalar(GEOMS["s2"], rng(3)), tmp_path / "s.csv"))
    assert cols == ["theta", "phi", "value"]


def test_trace_csv_columns(tmp_path):
    tr = FlowTrace("kr", times=[0.0, 0.01], F=[1.0, 0.9], H=[0.5, 0.4], theta_sup=[0.1, 0.05], dt=[0.01, 0.01])
    cols, rows = ser.read_table(ser.trace_csv(tr, tmp_path / "t.csv"))
    assert cols == ["t", "F", "H", "theta_sup", "dt"]
    assert [float(x) for x in rows[1]] == [0.01, 0.9, 0.4, 0.05, 0.01]


@given(st.sampled_from(sorted(GEOMS)), st.integers(0, 2**20), st.sampled_from(["scalar", "vector", "endo", "two_form"]))
def test_encode_decode_is_identity(name, seed, kind):
    obj = sample_fields(GEOMS[name], seed)[kind]
    [(_, back, head)] = ser.decode_all(ser.encode(obj, kind))
    assert head["kind"] in ("scalar", "vector", "endo", "form")
    assert np.array_equal(back.comps, obj.comps)
