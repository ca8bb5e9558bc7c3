"""CSV / JSON serialization with bit-stable formatting.

CSV floats use 17 significant digits; JSON floats use Python's shortest
round-trip repr, so ``loads(dumps(x))`` reproduces every value exactly.
Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .bands import BandSurface, ModelParams, Quasimomentum
from .dynamics import DecoherenceParams, RampChernResult, RampConfig, Trajectory
from .errors import ExportError
from .topology import ChernResult, LambdaSweep, PlaquetteField

SCHEMA_VERSION = 1

TRAJECTORY_COLUMNS = ("t", "theta", "Sx", "Sy", "Sz", "M_phi", "F")
SURFACE_COLUMNS = ("kx", "ky", "kz", "E_minus", "E_zero", "E_plus")
SWEEP_COLUMNS = ("lambda", "C_raw", "C_rounded")
CURVATURE_COLUMNS = ("theta", "phi", "F")
POINT_COLUMNS = ("kx", "ky", "kz")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot be exported")
    s = format(x, ".17g")
    return "0" if s == "-0" else s


def to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], np.ndarray]:
    lines = text.strip("\n").split("\n")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]]).reshape(-1, len(header))
    return header, data


def dumps_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# band surfaces


def surface_csv(s: BandSurface) -> str:
    return to_csv(SURFACE_COLUMNS, s.rows())


def surface_json(s: BandSurface) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "band_surface",
        "grid": s.grid,
        "params": {"lambda": s.params.lam, "omega01": s.params.omega01, "omega_unit": s.params.omega_unit},
        "columns": list(SURFACE_COLUMNS),
        "samples": s.rows().tolist(),
    }


def surface_from_json(d: dict) -> BandSurface:
    rows = np.array(d["samples"], dtype=float).reshape(-1, 6)
    p = d["params"]
    return BandSurface(
        d["grid"], *(rows[:, i].copy() for i in range(6)),
        params=ModelParams(p["lambda"], p["omega01"], p["omega_unit"]),
    )


# ---------------------------------------------------------------------------
# Chern results and sweeps


def chern_to_dict(r: ChernResult) -> dict:
    return {
        "raw": r.raw, "rounded": r.rounded, "method": r.method, "grid": r.grid,
        "band": r.band, "lambda": r.lam, "point": r.point,
    }


def chern_from_dict(d: dict) -> ChernResult:
    return ChernResult(d["raw"], d["rounded"], d["method"], d["grid"], d["band"], d["lambda"], d["point"])


def sweep_csv(sw: LambdaSweep) -> str:
    return to_csv(SWEEP_COLUMNS, ((lam, r.raw, r.rounded) for lam, r in zip(sw.lambdas, sw.results)))


def sweep_json(sw: LambdaSweep, extra: Optional[dict] = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "lambda_sweep",
        "lambdas": list(sw.lambdas),
        "results": [chern_to_dict(r) for r in sw.results],
    }
    if extra:
        out.update(extra)
    return out


def sweep_from_json(d: dict) -> LambdaSweep:
    return LambdaSweep(tuple(d["lambdas"]), tuple(chern_from_dict(r) for r in d["results"]))


def curvature_csv(fld: PlaquetteField) -> str:
    th, ph = np.meshgrid(fld.theta, fld.phi, indexing="ij")
    return to_csv(CURVATURE_COLUMNS, zip(th.ravel(), ph.ravel(), fld.f.ravel()))


def curvature_json(fld: PlaquetteField, result: ChernResult) -> dict:
    th, ph = np.meshgrid(fld.theta, fld.phi, indexing="ij")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "chern_lattice",
        "result": chern_to_dict(result),
        "caps": list(fld.caps),
        "columns": list(CURVATURE_COLUMNS),
        "samples": np.stack([th.ravel(), ph.ravel(), fld.f.ravel()], axis=1).tolist(),
    }


# ---------------------------------------------------------------------------
# Maxwell points


def points_csv(points: Sequence[Quasimomentum]) -> str:
    return to_csv(POINT_COLUMNS, ((p.kx, p.ky, p.kz) for p in points))


def points_json(points: Sequence[Quasimomentum], lam: float) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "maxwell_points",
        "lambda": lam,
        "points": [[p.kx, p.ky, p.kz] for p in points],
    }


def points_from_json(d: dict) -> list[Quasimomentum]:
    return [Quasimomentum(*p) for p in d["points"]]


# ---------------------------------------------------------------------------
# ramp trajectories


def _traj_rows(tr: Trajectory) -> np.ndarray:
    return np.column_stack([tr.t, tr.theta, tr.expect, tr.m_phi, tr.f])


def trajectory_csv(res: RampChernResult) -> str:
    return to_csv(TRAJECTORY_COLUMNS, _traj_rows(res.trajectory))


def _complex_list(a: np.ndarray) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def trajectory_json(res: RampChernResult) -> dict:
    tr = res.trajectory
    dec = res.decoherence
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "ramp_trajectory",
        "config": res.config.to_dict(),
        "decoherence": None if dec is None else dict(
            t1_12=dec.t1_12, t1_23=dec.t1_23, t2s_12=dec.t2s_12, t2s_23=dec.t2s_23
        ),
        "chern": res.chern,
        "state_kind": tr.kind,
        "columns": list(TRAJECTORY_COLUMNS),
        "samples": _traj_rows(tr).tolist(),
        "theta_dot": tr.theta_dot.tolist(),
        "states": _complex_list(tr.states),
    }


def trajectory_from_json(d: dict) -> RampChernResult:
    cfg = RampConfig(**d["config"])
    rows = np.array(d["samples"], dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
    st = np.array(d["states"], dtype=float)
    states = st[..., 0] + 1j * st[..., 1]
    tr = Trajectory(
        kind=d["state_kind"],
        t=rows[:, 0].copy(),
        theta=rows[:, 1].copy(),
        theta_dot=np.array(d["theta_dot"], dtype=float),
        states=states,
        expect=rows[:, 2:5].copy(),
        m_phi=rows[:, 5].copy(),
        f=rows[:, 6].copy(),
        phi0=cfg.phi0,
        steps=cfg.steps,
    )
    dec = None if d["decoherence"] is None else DecoherenceParams(**d["decoherence"])
    return RampChernResult(d["chern"], tr, cfg, dec)


def export(obj, path, fmt: str = "csv", **extra) -> Path:
    """Serialize a surface, sweep, ramp result, curvature field or point list and write it."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if isinstance(obj, BandSurface):
        text = surface_csv(obj) if fmt == "csv" else dumps_json(surface_json(obj))
    elif isinstance(obj, LambdaSweep):
        text = sweep_csv(obj) if fmt == "csv" else dumps_json(sweep_json(obj, extra.get("meta")))
    elif isinstance(obj, RampChernResult):
        text = trajectory_csv(obj) if fmt == "csv" else dumps_json(trajectory_json(obj))
    elif isinstance(obj, PlaquetteField):
        if fmt == "csv":
            text = curvature_csv(obj)
        else:
            text = dumps_json(curvature_json(obj, extra["result"]))
    elif isinstance(obj, (list, tuple)) and all(isinstance(p, Quasimomentum) for p in obj):
        text = points_csv(obj) if fmt == "csv" else dumps_json(points_json(obj, extra.get("lam", 0.0)))
    else:
        raise TypeError(f"don't know how to export {type(obj).__name__}")
    return write_atomic(path, text)
