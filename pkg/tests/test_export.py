import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxwell_metal.bands import ModelParams, bz_scan, maxwell_points
from maxwell_metal.dynamics import DecoherenceParams, RampConfig, chern_from_ramp
from maxwell_metal.errors import ExportError
from maxwell_metal.export import (
    _fmt,
    dumps_json,
    export,
    points_from_json,
    read_csv,
    sha256_file,
    surface_from_json,
    surface_json,
    sweep_from_json,
    sweep_json,
    trajectory_from_json,
    trajectory_json,
    write_atomic,
)
from maxwell_metal.topology import chern_sphere, chern_vs_lambda, plaquette_field


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_float_round_trip(x):
    assert float(_fmt(x)) == x or (x == 0 and float(_fmt(x)) == 0)


def test_fmt_details():
    assert _fmt(-0.0) == "0"
    assert _fmt(3) == "3"
    assert _fmt(0.1) == "0.10000000000000001"
    with pytest.raises(ValueError):
        _fmt(float("nan"))


def test_surface_csv_rows(tmp_path):
    s = bz_scan(ModelParams(), "ky0", 2)
    path = export(s, tmp_path / "s.csv")
    text = path.read_bytes().decode()
    assert "\r" not in text
    lines = text.splitlines()
    assert lines[0] == "kx,ky,kz,E_minus,E_zero,E_plus"
    assert len(lines) == 5
    header, data = read_csv(text)
    assert np.array_equal(data, s.rows())


def test_surface_json_round_trip(tmp_path):
    s = bz_scan(ModelParams(lam=0.3, omega_unit=12.5), "3d", 5)
    d = json.loads(export(s, tmp_path / "s.json", "json").read_text())
    assert d["schema_version"] == 1
    assert surface_from_json(d) == s


def test_sweep_round_trip_and_rows(tmp_path):
    lams = [round(0.1 * i, 12) for i in range(21) if i != 10]
    lams.insert(10, 1.0 + 1e-3)
    sw = chern_vs_lambda("lowest", lams, 16, 16)
    lines = export(sw, tmp_path / "w.csv").read_text().splitlines()
    assert len(lines) == 22
    col = [float(l.split(",")[0]) for l in lines[1:]]
    assert all(b > a for a, b in zip(col, col[1:]))
    d = json.loads(dumps_json(sweep_json(sw)))
    assert sweep_from_json(d) == sw


def test_points_round_trip(tmp_path):
    pts = maxwell_points(0.5)
    d = json.loads(export(pts, tmp_path / "p.json", "json", lam=0.5).read_text())
    assert points_from_json(d) == pts
    assert d["points"][0][2] == 1.0471975511965979


def test_curvature_export(tmp_path):
    fld = plaquette_field("lowest", 0.0, 8, 8)
    res = chern_sphere("lowest", 0.0, 8, 8)
    assert len(export(fld, tmp_path / "c.csv").read_text().splitlines()) == 1 + 7 * 8
    d = json.loads(export(fld, tmp_path / "c.json", "json", result=res).read_text())
    assert d["result"]["rounded"] == 2
    with pytest.raises(KeyError):
        export(fld, tmp_path / "c2.json", "json")


@pytest.mark.parametrize("n, stride", [(600, 1), (600, 7), (1000, 300)])
def test_trajectory_rows(tmp_path, n, stride):
    res = chern_from_ramp(RampConfig(n_steps=n, record_stride=stride, self_check=False))
    lines = export(res, tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,theta,Sx,Sy,Sz,M_phi,F"
    assert len(lines) - 1 == math.ceil(n / stride) + 1


@pytest.mark.parametrize("evolution", ["unitary", "lindblad"])
def test_trajectory_json_round_trip(evolution):
    cfg = RampConfig(n_steps=600, record_stride=20, self_check=False, evolution=evolution)
    res = chern_from_ramp(cfg)
    back = trajectory_from_json(json.loads(dumps_json(trajectory_json(res))))
    assert back.chern == res.chern
    assert back.trajectory == res.trajectory
    assert back.config == cfg.resolved()
    assert back.decoherence == res.decoherence
    if evolution == "lindblad":
        assert back.decoherence == DecoherenceParams()


def test_write_atomic_errors_carry_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError, match="file"):
        write_atomic(blocker / "out.csv", "data")


def test_write_atomic_leaves_no_temp(tmp_path):
    p = write_atomic(tmp_path / "a.txt", "hello\n")
    assert sorted(x.name for x in tmp_path.iterdir()) == ["a.txt"]
    assert len(sha256_file(p)) == 64


def test_export_rejects_unknown():
    with pytest.raises(TypeError):
        export(object(), "x.csv")
    with pytest.raises(ValueError):
        export(maxwell_points(0.0), "x.xml", "xml")
