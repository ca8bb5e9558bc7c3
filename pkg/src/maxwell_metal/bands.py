"""Lattice model H(k) = R(k) . S and its band structure.

R(k) = (sin kx, sin ky, lam + 2 - cos kx - cos ky - cos kz). The middle band
is flat at zero and the outer bands are -|R| and +|R|, all relative to the
qutrit reference frequency and in units of the energy scale.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .spin1 import BlochVector

__all__ = [
    "BandSurface",
    "BlochVector",
    "ModelParams",
    "PhaseLabel",
    "Quasimomentum",
    "band_energies",
    "bloch_vector",
    "bz_scan",
    "count_degeneracies",
    "effective_dispersion",
    "linearity_check",
    "maxwell_points",
    "phase_classify",
    "wrap_momentum",
]

CRITICAL_TOL = 1e-12


def wrap_momentum(k):
    """Map a momentum (scalar or array) into [-pi, pi)."""
    k = np.asarray(k, dtype=float)
    inside = (k >= -np.pi) & (k < np.pi)
    w = np.mod(k + np.pi, 2.0 * np.pi) - np.pi
    # mod can round -pi - tiny up to +pi
    w = np.where(w >= np.pi, w - 2.0 * np.pi, w)
    # in-range values pass through bit-exactly
    w = np.where(inside, k, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Quasimomentum:
    kx: float
    ky: float
    kz: float

    def __post_init__(self):
        for name in ("kx", "ky", "kz"):
            object.__setattr__(self, name, wrap_momentum(getattr(self, name)))

    def as_array(self) -> np.ndarray:
        return np.array([self.kx, self.ky, self.kz])


@dataclass(frozen=True)
class ModelParams:
    """Model control parameter plus the energy bookkeeping used for reporting.

    ``omega01`` and ``omega_unit`` are in MHz; defaults are the calibrated
    0-1 transition (7.17133 GHz) and the 10 MHz unit of the band images.
    """

    lam: float = 0.0
    omega01: float = 7171.33
    omega_unit: float = 10.0

    def __post_init__(self):
        if not self.omega_unit > 0:
            raise ValueError("omega_unit must be positive")
        if not all(math.isfinite(x) for x in (self.lam, self.omega01, self.omega_unit)):
            raise ValueError("model parameters must be finite")

    def to_mhz(self, energy):
        """Convert a relative energy (units of omega_unit) to absolute MHz."""
        return self.omega01 + np.asarray(energy) * self.omega_unit


class PhaseLabel(str, enum.Enum):
    MAXWELL_METAL = "MaxwellMetal"
    CRITICAL = "Critical"
    TRIVIAL_INSULATOR = "TrivialInsulator"


def _bloch_arrays(kx, ky, kz, lam):
    rx = np.sin(kx)
    ry = np.sin(ky)
    rz = lam + 2.0 - np.cos(kx) - np.cos(ky) - np.cos(kz)
    return rx, ry, rz


def bloch_vector(k: Quasimomentum, lam: float) -> BlochVector:
    rx, ry, rz = _bloch_arrays(k.kx, k.ky, k.kz, lam)
    return BlochVector(float(rx), float(ry), float(rz))


def band_energies(k: Quasimomentum, p: ModelParams) -> tuple[float, float, float]:
    """(E-, E0, E+) relative to omega01, in units of omega_unit."""
    e = bloch_vector(k, p.lam).norm()
    return (-e, 0.0, e)


def phase_classify(lam: float) -> PhaseLabel:
    a = abs(lam)
    if abs(a - 1.0) <= CRITICAL_TOL:
        return PhaseLabel.CRITICAL
    return PhaseLabel.MAXWELL_METAL if a < 1.0 else PhaseLabel.TRIVIAL_INSULATOR


def maxwell_points(lam: float) -> list[Quasimomentum]:
    """Threefold degeneracies on the kz axis: M+/- = (0, 0, +/-arccos lam).

    Only the axis points are returned. For lam <= -1 the lattice has further
    degeneracies on the zone boundary (kx or ky = pi, cos kz = lam + 2) that
    this function does not report.
    """
    label = phase_classify(lam)
    if label is PhaseLabel.TRIVIAL_INSULATOR:
        return []
    if label is PhaseLabel.CRITICAL:
        return [Quasimomentum(0.0, 0.0, 0.0 if lam > 0 else math.pi)]
    kz = math.acos(lam)
    return [Quasimomentum(0.0, 0.0, kz), Quasimomentum(0.0, 0.0, -kz)]


def _point_sign(point: str) -> int:
    if point in ("M+", "+", "plus"):
        return 1
    if point in ("M-", "-", "minus"):
        return -1
    raise ValueError(f"unknown Maxwell point {point!r}; expected 'M+' or 'M-'")


def effective_dispersion(q, lam: float, point: str = "M+") -> tuple[float, float, float]:
    """Bands of q_x S_x + q_y S_y +/- alpha q_z S_z, alpha = sqrt(1 - lam^2)."""
    if abs(lam) >= 1.0:
        raise ValueError(f"no Maxwell point for |lambda| = {abs(lam)} >= 1")
    _point_sign(point)  # validates; the sign does not enter |epsilon|
    qx, qy, qz = (float(c) for c in q)
    alpha = math.sqrt(1.0 - lam * lam)
    eps = math.sqrt(qx * qx + qy * qy + (alpha * qz) ** 2)
    return (-eps, 0.0, eps)


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt(1.0 - z * z)
    ang = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=-1)


def linearity_check(
    lam: float,
    point: str = "M+",
    radius: float = 0.01,
    samples: int = 200,
    directions: Optional[np.ndarray] = None,
) -> float:
    """Max |E+(lattice) - E+(effective)| / radius over the sphere |q| = radius.

    Sample directions are a deterministic Fibonacci lattice unless
    ``directions`` (unit vectors, shape (m, 3)) is given.
    """
    if abs(lam) >= 1.0:
        raise ValueError(f"no Maxwell point for |lambda| = {abs(lam)} >= 1")
    if not 0 < radius <= 0.1:
        raise ValueError("radius must lie in (0, 0.1]")
    sign = _point_sign(point)
    if directions is None:
        if samples < 1:
            raise ValueError("samples must be positive")
        directions = _fibonacci_sphere(samples)
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    q = radius * d
    k0 = sign * math.acos(lam)
    rx, ry, rz = _bloch_arrays(q[:, 0], q[:, 1], k0 + q[:, 2], lam)
    exact = np.sqrt(rx * rx + ry * ry + rz * rz)
    alpha = math.sqrt(1.0 - lam * lam)
    eff = np.sqrt(q[:, 0] ** 2 + q[:, 1] ** 2 + (alpha * q[:, 2]) ** 2)
    return float(np.max(np.abs(exact - eff)) / radius)


def _axis(n: int) -> np.ndarray:
    # includes -pi, excludes +pi
    return -np.pi + 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class BandSurface:
    """Band energies sampled on a Brillouin-zone grid.

    Samples are flat arrays in row-major order with kx varying fastest.
    """

    grid: dict
    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray
    e_minus: np.ndarray
    e_zero: np.ndarray
    e_plus: np.ndarray
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self):
        if not (np.all(self.e_minus <= self.e_zero) and np.all(self.e_zero <= self.e_plus)):
            raise ValueError("band ordering E- <= E0 <= E+ violated")
        if np.any(self.e_zero != 0.0):
            raise ValueError("flat band must be identically zero")

    def __len__(self) -> int:
        return int(self.kx.size)

    def gap(self) -> np.ndarray:
        return self.e_plus - self.e_minus

    def min_gap_sample(self) -> tuple[float, tuple[float, float, float]]:
        """Smallest E+ - E0 on the grid and where it occurs (first occurrence)."""
        i = int(np.argmin(self.e_plus))
        return float(self.e_plus[i]), (float(self.kx[i]), float(self.ky[i]), float(self.kz[i]))

    def rows(self) -> np.ndarray:
        return np.stack([self.kx, self.ky, self.kz, self.e_minus, self.e_zero, self.e_plus], axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BandSurface):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.params == other.params
            and np.array_equal(self.rows(), other.rows())
        )


def _resolution(plane: str, resolution) -> tuple[int, ...]:
    dims = 2 if plane == "ky0" else 3
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * dims
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != dims:
        raise ValueError(f"plane {plane!r} needs {dims} resolutions, got {len(res)}")
    if any(r < 2 for r in res):
        raise ValueError("resolution must be at least 2 per axis")
    return res


def bz_scan(
    p: ModelParams,
    plane: str = "ky0",
    resolution=101,
    workers: int = 1,
) -> BandSurface:
    """Band energies on the ky = 0 plane ("ky0") or the full zone ("3d").

    The work is split into kz slabs; each slab is an independent vectorized
    evaluation, so the output does not depend on ``workers``.
    """
    if plane not in ("ky0", "3d"):
        raise ValueError(f"plane must be 'ky0' or '3d', got {plane!r}")
    res = _resolution(plane, resolution)
    if plane == "ky0":
        nx, nz = res
        ny = 1
        ky_axis = np.zeros(1)
    else:
        nx, ny, nz = res
        ky_axis = _axis(ny)
    kx_axis = _axis(nx)
    kz_axis = _axis(nz)

    def slab(iz: int):
        kz = kz_axis[iz]
        ky, kx = np.meshgrid(ky_axis, kx_axis, indexing="ij")
        kx = kx.ravel()
        ky = ky.ravel()
        kzs = np.full_like(kx, kz)
        rx, ry, rz = _bloch_arrays(kx, ky, kzs, p.lam)
        e = np.sqrt(rx * rx + ry * ry + rz * rz)
        return kx, ky, kzs, e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(slab, range(nz)))
    else:
        parts = [slab(i) for i in range(nz)]
    kx, ky, kz, e = (np.concatenate([part[j] for part in parts]) for j in range(4))
    axes = ["kx", "kz"] if plane == "ky0" else ["kx", "ky", "kz"]
    grid = {"plane": plane, "axes": axes, "resolution": list(res), "lambda": p.lam}
    return BandSurface(grid, kx, ky, kz, -e, np.zeros_like(e), e, p)


def count_degeneracies(lam: float, n: int = 400, threshold: float = 1e-3) -> int:
    """Count grid-local minima of E+ - E- below ``threshold`` on the ky = 0 plane.

    Neighbours are the 8 surrounding cells with periodic wrap; a minimum must
    be strictly below every neighbour. ``n`` should put the expected
    degeneracies on grid points (e.g. a multiple of 4 for lam = 0).
    """
    surf = bz_scan(ModelParams(lam=lam), "ky0", (n, n))
    g = surf.gap().reshape(n, n)  # [iz, ix]
    is_min = np.ones_like(g, dtype=bool)
    for dz in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dz == 0 and dx == 0:
                continue
            is_min &= g < np.roll(np.roll(g, dz, axis=0), dx, axis=1)
    return int(np.count_nonzero(is_min & (g < threshold)))
