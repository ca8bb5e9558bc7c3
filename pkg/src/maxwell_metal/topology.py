"""Berry curvature and Chern numbers on the displaced unit sphere.

The manifold is R(theta, phi) = (sin t cos p, s sin t sin p, cos t + lam) with
s = +1 for M+ and s = -1 for M- (the same sphere traversed with reversed
orientation, which carries the opposite chirality). The gauge-invariant
plaquette construction is used: every loop phase is minus the argument of
the product of normalized link overlaps, so each plaquette reports the Berry
phase of its boundary with A = i<u|du>.

Orientation is theta then phi (outward normal). With this choice the lowest
band on a sphere enclosing the degeneracy carries C = +2.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegeneracyError
from .spin1 import BlochVector, bloch_matrix, eigh_batch

__all__ = [
    "Band",
    "ChernResult",
    "CurvatureSample",
    "LambdaSweep",
    "PlaquetteField",
    "SpherePoint",
    "analytic_chern",
    "analytic_curvature",
    "berry_curvature_lattice",
    "chern_sphere",
    "chern_vs_lambda",
    "plaquette_field",
    "plaquette_phases",
    "sphere_bloch",
    "sphere_bloch_array",
]

VERTEX_TOL = 1e-9
SWEEP_CRITICAL_TOL = 1e-6


class Band(str, enum.Enum):
    LOWEST = "lowest"
    MIDDLE = "middle"
    UPPER = "upper"

    @property
    def index(self) -> int:
        return ("lowest", "middle", "upper").index(self.value)

    @property
    def weight(self) -> int:
        """Spin projection along R-hat: -1, 0, +1."""
        return self.index - 1


def _band(band) -> Band:
    return band if isinstance(band, Band) else Band(str(band))


def _orientation(point: str) -> int:
    if point in ("M+", "+", "plus"):
        return 1
    if point in ("M-", "-", "minus"):
        return -1
    raise ValueError(f"unknown Maxwell point {point!r}; expected 'M+' or 'M-'")


@dataclass(frozen=True)
class SpherePoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2pi)")


@dataclass(frozen=True)
class CurvatureSample:
    point: SpherePoint
    f_theta_phi: float

    def __post_init__(self):
        if not math.isfinite(self.f_theta_phi):
            raise ValueError("curvature must be finite")


@dataclass(frozen=True)
class ChernResult:
    raw: float
    rounded: int
    method: str
    grid: dict = field(default_factory=dict)
    band: str = "lowest"
    lam: float = 0.0
    point: str = "M+"

    @property
    def deviation(self) -> float:
        return abs(self.raw - self.rounded)


@dataclass(frozen=True)
class LambdaSweep:
    lambdas: tuple
    results: tuple

    def __post_init__(self):
        lams = tuple(float(x) for x in self.lambdas)
        if len(lams) != len(self.results):
            raise ValueError("one result per lambda required")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda values must be strictly increasing")
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "results", tuple(self.results))

    def __len__(self) -> int:
        return len(self.lambdas)

    def raw(self) -> np.ndarray:
        return np.array([r.raw for r in self.results])

    def rounded(self) -> np.ndarray:
        return np.array([r.rounded for r in self.results])


def sphere_bloch_array(theta, phi, lam: float, orientation: int = 1) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack(
        np.broadcast_arrays(st * np.cos(phi), orientation * st * np.sin(phi), np.cos(theta) + lam),
        axis=-1,
    )


def sphere_bloch(pt: SpherePoint, lam: float, point: str = "M+") -> BlochVector:
    r = sphere_bloch_array(pt.theta, pt.phi, lam, _orientation(point))
    return BlochVector(*(float(c) for c in r))


def _check_manifold(lam: float) -> None:
    # the unit sphere shifted by lam passes through R = 0 iff |lam| = 1
    if abs(abs(lam) - 1.0) <= VERTEX_TOL:
        raise DegeneracyError(
            f"lambda={lam}: the degeneracy lies on the manifold; Chern number undefined"
        )


def _grid_axes(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    if n_theta < 8 or n_phi < 8:
        raise ValueError("grid must be at least 8x8")
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return theta, phi


def _band_vectors(band: Band, lam: float, n_theta: int, n_phi: int, orientation: int, workers: int):
    theta, phi = _grid_axes(n_theta, n_phi)
    r = sphere_bloch_array(theta[:, None], phi[None, :], lam, orientation)
    if np.linalg.norm(r, axis=-1).min() < VERTEX_TOL:
        raise DegeneracyError("a grid vertex lies within 1e-9 of a degeneracy")
    h = bloch_matrix(r)

    def rows(chunk):
        return eigh_batch(h[chunk])[1][..., band.index]

    if workers > 1:
        chunks = np.array_split(np.arange(n_theta), min(workers, n_theta))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            u = np.concatenate(list(pool.map(rows, chunks)), axis=0)
    else:
        u = rows(slice(None))
    return theta, phi, u


def plaquette_phases(u: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Loop phases for band eigenvectors ``u`` on the (theta, phi) vertex grid.

    Parameters
    ----------
    u : array (n_theta, n_phi, 3)
        One eigenvector per vertex; any per-vertex phase is allowed.

    Returns
    -------
    interior : (n_theta - 1, n_phi) Berry phases of the interior plaquettes
    north, south : Berry phases of the two polar-cap loops
    """
    def link(a, b):
        ov = np.einsum("...i,...i->...", a.conj(), b)
        mag = np.abs(ov)
        if np.any(mag < 1e-14):
            raise DegeneracyError("vanishing link overlap; refine the grid")
        return ov / mag

    u_t = link(u[:-1], u[1:])
    u_p = link(u, np.roll(u, -1, axis=1))
    loop = u_t * u_p[1:] * np.conj(np.roll(u_t, -1, axis=1)) * np.conj(u_p[:-1])
    interior = -np.angle(loop)
    north = -float(np.angle(np.prod(u_p[0])))
    south = float(np.angle(np.prod(u_p[-1])))
    return interior, north, south


@dataclass(frozen=True, eq=False)
class PlaquetteField:
    """Raw plaquette output: curvature on the interior plaquette centres."""

    theta: np.ndarray  # plaquette-centre theta, (n_theta - 1,)
    phi: np.ndarray  # plaquette-centre phi, (n_phi,)
    f: np.ndarray  # (n_theta - 1, n_phi)
    phases: np.ndarray
    caps: tuple
    grid: dict

    def total_phase(self) -> float:
        # fsum is exactly rounded, so the total does not depend on summation order
        return math.fsum(np.concatenate([self.phases.ravel(), np.asarray(self.caps)]))

    def samples(self) -> list[CurvatureSample]:
        return [
            CurvatureSample(SpherePoint(float(t), float(p)), float(self.f[i, j]))
            for i, t in enumerate(self.theta)
            for j, p in enumerate(self.phi)
        ]

    def row(self, theta: float) -> np.ndarray:
        """Curvature along the plaquette row closest to ``theta``."""
        return self.f[int(np.argmin(np.abs(self.theta - theta)))]


def plaquette_field(
    band="lowest",
    lam: float = 0.0,
    n_theta: int = 64,
    n_phi: int = 64,
    point: str = "M+",
    workers: int = 1,
) -> PlaquetteField:
    band = _band(band)
    _check_manifold(lam)
    orientation = _orientation(point)
    theta, phi, u = _band_vectors(band, lam, n_theta, n_phi, orientation, workers)
    interior, north, south = plaquette_phases(u)
    dth = np.pi / n_theta
    dph = 2.0 * np.pi / n_phi
    grid = {"n_theta": n_theta, "n_phi": n_phi, "pole_offset": "half-cell"}
    return PlaquetteField(
        theta=theta[:-1] + 0.5 * dth,
        phi=phi + 0.5 * dph,
        f=interior / (dth * dph),
        phases=interior,
        caps=(north, south),
        grid=grid,
    )


def berry_curvature_lattice(
    band="lowest",
    lam: float = 0.0,
    n_theta: int = 64,
    n_phi: int = 64,
    point: str = "M+",
    workers: int = 1,
) -> list[CurvatureSample]:
    """Plaquette Berry curvature F_theta_phi at the interior plaquette centres.

    The two polar caps enter the Chern sum but are not reported as samples.
    """
    return plaquette_field(band, lam, n_theta, n_phi, point, workers).samples()


def chern_sphere(
    band="lowest",
    lam: float = 0.0,
    n_theta: int = 64,
    n_phi: int = 64,
    point: str = "M+",
    workers: int = 1,
) -> ChernResult:
    band = _band(band)
    fld = plaquette_field(band, lam, n_theta, n_phi, point, workers)
    raw = fld.total_phase() / (2.0 * math.pi)
    return ChernResult(
        raw=raw,
        rounded=int(round(raw)),
        method="lattice_plaquette",
        grid=dict(fld.grid),
        band=band.value,
        lam=float(lam),
        point=point,
    )


def _sweep_one(args):
    band, lam, n_theta, n_phi, point = args
    return chern_sphere(band, lam, n_theta, n_phi, point)


def chern_vs_lambda(
    band="lowest",
    lambdas: Sequence[float] = (0.0,),
    n_theta: int = 64,
    n_phi: int = 64,
    point: str = "M+",
    workers: int = 1,
) -> LambdaSweep:
    band = _band(band)
    lams = [float(x) for x in lambdas]
    for lam in lams:
        if abs(abs(lam) - 1.0) < SWEEP_CRITICAL_TOL:
            raise DegeneracyError(f"lambda={lam} is within {SWEEP_CRITICAL_TOL} of the transition")
    jobs = [(band, lam, n_theta, n_phi, point) for lam in lams]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    return LambdaSweep(tuple(lams), tuple(results))


def analytic_curvature(theta, lam: float, band="lowest", point: str = "M+") -> np.ndarray:
    """Closed-form F_theta_phi: minus the spin weight times the solid-angle density of R-hat."""
    band = _band(band)
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)
    density = np.sin(theta) * (1.0 + lam * c) / (1.0 + lam * lam + 2.0 * lam * c) ** 1.5
    return -band.weight * _orientation(point) * density


def analytic_chern(band="lowest", lam: float = 0.0, point: str = "M+") -> ChernResult:
    band = _band(band)
    _check_manifold(lam)
    c = -2 * band.weight * _orientation(point) if abs(lam) < 1.0 else 0
    return ChernResult(float(c), c, "analytic_reference", {}, band.value, float(lam), point)
