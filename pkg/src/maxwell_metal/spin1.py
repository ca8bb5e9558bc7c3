"""Spin-1 operator algebra on the qutrit basis {|1>, |2>, |3>}.

The generators are the (rotated) adjoint representation: S = R-hat . S has
spectrum {-1, 0, +1}, the drive pattern matches the three microwave tones
(S_x couples 1-2, S_y couples 1-3, S_z couples 2-3) and
[S_a, S_b] = i eps_abc S_c holds exactly.

Everything here is a pure function of immutable values. The eigensolver is
batched over leading axes so band scans and plaquette grids stay vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import NumericalError

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-9
DISCRIMINANT_TOL = 1e-13

_SX = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], dtype=complex)
_SY = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex)
_SZ = np.array([[0, 0, 0], [0, 0, -1j], [0, 1j, 0]], dtype=complex)

#: stacked generators, shape (3, 3, 3); SPIN1[a] is S_a
SPIN1 = np.stack([_SX, _SY, _SZ])
SPIN1.setflags(write=False)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator3:
    """Immutable 3x3 Hermitian matrix.

    Construction checks Hermiticity to ``HERMITIAN_TOL`` and then stores the
    exactly Hermitian part, so diagonal imaginary parts are identically zero.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        resid = np.max(np.abs(m - m.conj().T))
        if resid > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (residual {resid:.3e})")
        m = 0.5 * (m + m.conj().T)
        m[np.diag_indices(3)] = m.diagonal().real
        object.__setattr__(self, "entries", _readonly(m))

    @property
    def matrix(self) -> np.ndarray:
        return self.entries

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.entries))

    def __add__(self, other: "HermitianOperator3") -> "HermitianOperator3":
        return HermitianOperator3(self.entries + other.entries)

    def __sub__(self, other: "HermitianOperator3") -> "HermitianOperator3":
        return HermitianOperator3(self.entries - other.entries)

    def __mul__(self, c: float) -> "HermitianOperator3":
        if np.iscomplexobj(c) and np.imag(c) != 0:
            raise TypeError("only real scalars preserve Hermiticity")
        return HermitianOperator3(float(np.real(c)) * self.entries)

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOperator3":
        return HermitianOperator3(-self.entries)

    def __matmul__(self, other):
        other = other.entries if isinstance(other, HermitianOperator3) else other
        return self.entries @ other

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = other.entries if isinstance(other, HermitianOperator3) else other
        return bool(np.allclose(self.entries, other, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"HermitianOperator3({np.array2string(self.entries, precision=6)})"


@dataclass(frozen=True)
class BlochVector:
    """Real 3-vector coupling to the spin-1 generators, in units of the energy scale."""

    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        if not all(np.isfinite((self.rx, self.ry, self.rz))):
            raise ValueError("Bloch vector components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz], dtype=float)

    def norm(self) -> float:
        return float(np.sqrt(self.rx * self.rx + self.ry * self.ry + self.rz * self.rz))


@dataclass(frozen=True, eq=False)
class QutritState:
    """Normalized pure state over {|1>, |2>, |3>}."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (3,):
            raise ValueError(f"expected 3 amplitudes, got shape {a.shape}")
        norm = float(np.vdot(a, a).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", _readonly(a))

    def to_density(self) -> "DensityMatrix3":
        a = self.amplitudes
        return DensityMatrix3(np.outer(a, a.conj()))

    def fidelity(self, other: "QutritState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True, eq=False)
class DensityMatrix3:
    """3x3 density matrix: Hermitian, unit trace, positive semidefinite."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", _readonly(m))

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix3":
        return cls(np.eye(3) / 3.0)

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


@dataclass(frozen=True, eq=False)
class EigenSystem3:
    """Ascending eigenvalues and matching orthonormal eigenvectors.

    ``vectors[:, i]`` is the eigenvector for ``values[i]`` (numpy column
    convention).
    """

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "vectors", _readonly(self.vectors))

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]


def spin1_matrices() -> tuple[HermitianOperator3, HermitianOperator3, HermitianOperator3]:
    """Return (S_x, S_y, S_z)."""
    return tuple(HermitianOperator3(s) for s in SPIN1)


def commutator(a, b) -> np.ndarray:
    a = a.entries if isinstance(a, HermitianOperator3) else np.asarray(a)
    b = b.entries if isinstance(b, HermitianOperator3) else np.asarray(b)
    return a @ b - b @ a


def bloch_matrix(r) -> np.ndarray:
    """R . S as a plain array; ``r`` may carry leading batch axes (..., 3)."""
    r = np.asarray(r, dtype=float)
    return np.einsum("...a,aij->...ij", r, SPIN1)


def hamiltonian_from_bloch(r: Union[BlochVector, Sequence[float]]) -> HermitianOperator3:
    """H = R_x S_x + R_y S_y + R_z S_z."""
    if isinstance(r, BlochVector):
        r = r.as_array()
    r = np.asarray(r, dtype=float)
    if r.shape != (3,) or not np.all(np.isfinite(r)):
        raise ValueError("Bloch vector must be three finite reals")
    return HermitianOperator3(bloch_matrix(r))


# ---------------------------------------------------------------------------
# eigensolver


def _jacobi_eigh(h: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi for one 3x3 Hermitian matrix."""
    a = np.array(h, dtype=complex)
    v = np.eye(3, dtype=complex)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = abs(a[0, 1]) + abs(a[0, 2]) + abs(a[1, 2])
        if off <= 1e-18 * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            mag = abs(apq)
            if mag <= 1e-300:
                continue
            phase = apq / mag
            tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
            # hypot avoids overflow of tau * tau for tiny off-diagonals
            t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            j = np.eye(3, dtype=complex)
            j[p, p] = c
            j[q, q] = c
            j[p, q] = s * phase
            j[q, p] = -s * np.conj(phase)
            a = j.conj().T @ a @ j
            v = v @ j
    w = a.diagonal().real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # bilinear (no conjugation) cross product over the last axis
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column real-positive.

    Ties (within 1e-12) go to the lowest index.
    """
    mags = np.abs(vecs)
    top = mags.max(axis=-2, keepdims=True)
    first = np.argmax(mags >= top - 1e-12, axis=-2)
    pivot = np.take_along_axis(vecs, first[..., None, :], axis=-2)
    pmag = np.abs(pivot)
    rot = np.where(pmag > 0, np.conj(pivot) / np.where(pmag > 0, pmag, 1.0), 1.0)
    out = vecs * rot
    # pin the pivot to an exact real number
    np.put_along_axis(out, first[..., None, :], pmag.astype(complex), axis=-2)
    return out


def eigh_batch(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a batch of 3x3 Hermitian matrices.

    Parameters
    ----------
    h : array, shape (..., 3, 3)

    Returns
    -------
    values : (..., 3) ascending
    vectors : (..., 3, 3), columns are eigenvectors with the fixed phase convention

    Eigenvalues come from the trigonometric solution of the characteristic
    cubic and eigenvectors from cross products of the rows of (H - lambda I).
    Matrices whose normalized discriminant is below ``DISCRIMINANT_TOL``, or
    whose closed-form result fails the residual/orthonormality check, are
    re-solved with complex Jacobi rotations.
    """
    h = np.asarray(h, dtype=complex)
    batch_shape = h.shape[:-2]
    hs = h.reshape(-1, 3, 3)
    n = hs.shape[0]

    mu = np.trace(hs, axis1=1, axis2=2).real / 3.0
    a = hs - mu[:, None, None] * np.eye(3)
    p = np.sqrt(np.maximum(np.einsum("kij,kji->k", a, a).real / 6.0, 0.0))
    safe_p = np.where(p > 0, p, 1.0)
    b = a / safe_p[:, None, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # subnormal inputs can trip LU warnings; such rows fail the checks below
        r = np.clip(np.nan_to_num(np.linalg.det(b).real) / 2.0, -1.0, 1.0)
    disc = 1.0 - r * r
    phi = np.arccos(r) / 3.0
    top = 2.0 * np.cos(phi)
    low = 2.0 * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = -top - low
    shifted = np.stack([low, mid, top], axis=-1) * p[:, None]
    values = shifted + mu[:, None]

    vecs = np.empty((n, 3, 3), dtype=complex)
    for i in range(3):
        m = a - shifted[:, i, None, None] * np.eye(3)
        rows = m
        cands = np.stack(
            [
                _cross(rows[:, 0], rows[:, 1]),
                _cross(rows[:, 0], rows[:, 2]),
                _cross(rows[:, 1], rows[:, 2]),
            ],
            axis=1,
        )
        norms = np.linalg.norm(cands, axis=-1)
        best = np.argmax(norms, axis=1)
        v = cands[np.arange(n), best]
        nv = norms[np.arange(n), best]
        vecs[:, :, i] = v / np.where(nv > 0, nv, 1.0)[:, None]

    hnorm = np.maximum(1.0, np.linalg.norm(hs, axis=(1, 2)))
    resid = np.linalg.norm(hs @ vecs - vecs * values[:, None, :], axis=1).max(axis=1)
    gram = np.abs(np.conj(np.swapaxes(vecs, 1, 2)) @ vecs - np.eye(3)).max(axis=(1, 2))
    bad = (p == 0) | (disc < DISCRIMINANT_TOL) | (resid > 1e-11 * hnorm) | (gram > 1e-11)
    bad |= ~np.isfinite(resid)
    for k in np.flatnonzero(bad):
        values[k], vecs[k] = _jacobi_eigh(hs[k])

    vecs = _fix_phases(vecs)
    return values.reshape(batch_shape + (3,)), vecs.reshape(batch_shape + (3, 3))


def eigensystem(h: HermitianOperator3) -> EigenSystem3:
    m = h.entries if isinstance(h, HermitianOperator3) else HermitianOperator3(h).entries
    w, v = eigh_batch(m[None])
    return EigenSystem3(w[0], v[0])


def expectation(obs, state: Union[QutritState, DensityMatrix3, np.ndarray]) -> float:
    """<obs> for a pure state or a density matrix.

    Raises NumericalError if the imaginary residual exceeds 1e-8, which only
    happens for a non-Hermitian observable or a corrupted state.
    """
    o = obs.entries if isinstance(obs, HermitianOperator3) else np.asarray(obs, dtype=complex)
    if isinstance(state, QutritState):
        a = state.amplitudes
        val = np.vdot(a, o @ a)
    elif isinstance(state, DensityMatrix3):
        val = np.trace(o @ state.entries)
    else:
        s = np.asarray(state, dtype=complex)
        val = np.vdot(s, o @ s) if s.ndim == 1 else np.trace(o @ s)
    if abs(val.imag) > 1e-8:
        raise NumericalError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def expectations_batch(states: np.ndarray, ops: Iterable[np.ndarray] = SPIN1) -> np.ndarray:
    """Real expectation values of ``ops`` for stacked states.

    ``states`` is (n, 3) for pure states or (n, 3, 3) for density matrices;
    returns (n, len(ops)).
    """
    ops = np.asarray(list(ops) if not isinstance(ops, np.ndarray) else ops)
    if states.ndim == 2:
        vals = np.einsum("ki,aij,kj->ka", states.conj(), ops, states)
    else:
        vals = np.einsum("aij,kji->ka", ops, states)
    if vals.size and np.abs(vals.imag).max() > 1e-8:
        raise NumericalError("expectation values acquired an imaginary part")
    return vals.real
