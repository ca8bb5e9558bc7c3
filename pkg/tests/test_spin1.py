import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maxwell_metal.errors import NumericalError
from maxwell_metal.spin1 import (
    SPIN1,
    BlochVector,
    DensityMatrix3,
    HermitianOperator3,
    QutritState,
    _jacobi_eigh,
    bloch_matrix,
    commutator,
    eigensystem,
    eigh_batch,
    expectation,
    expectations_batch,
    hamiltonian_from_bloch,
    spin1_matrices,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite)


def random_hermitian(rng, n):
    a = rng.normal(size=(n, 3, 3)) + 1j * rng.normal(size=(n, 3, 3))
    return 0.5 * (a + np.conj(np.swapaxes(a, 1, 2)))


def test_algebra():
    sx, sy, sz = (s.matrix for s in spin1_matrices())
    assert np.allclose(commutator(sx, sy), 1j * sz, atol=1e-15)
    assert np.allclose(commutator(sy, sz), 1j * sx, atol=1e-15)
    assert np.allclose(commutator(sz, sx), 1j * sy, atol=1e-15)
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(casimir, 2 * np.eye(3), atol=1e-15)


def test_spin_matrices_read_only():
    with pytest.raises(ValueError):
        SPIN1[0, 0, 0] = 1.0


def test_hermitian_rejects_non_hermitian():
    m = np.zeros((3, 3), dtype=complex)
    m[0, 1] = 1.0
    with pytest.raises(ValueError):
        HermitianOperator3(m)


def test_hermitian_operator_arithmetic():
    sx, sy, _ = spin1_matrices()
    h = sx * 2.0 + sy - sx
    assert h.allclose(sx + sy)
    assert (-h).allclose(sx * -1.0 - sy)


@given(vec3)
def test_r_dot_s_spectrum_is_minus_zero_plus(r):
    vals = eigensystem(hamiltonian_from_bloch(r)).values
    norm = math.sqrt(sum(c * c for c in r))
    assert np.allclose(vals, [-norm, 0.0, norm], atol=1e-12 * max(1.0, norm))


def test_closed_form_matches_lapack():
    rng = np.random.default_rng(7)
    h = random_hermitian(rng, 500)
    vals, vecs = eigh_batch(h)
    ref = np.linalg.eigvalsh(h)
    assert np.max(np.abs(vals - ref)) < 1e-12
    resid = h @ vecs - vecs * vals[:, None, :]
    assert np.max(np.abs(resid)) < 1e-11
    gram = np.conj(np.swapaxes(vecs, 1, 2)) @ vecs
    assert np.max(np.abs(gram - np.eye(3))) < 1e-11


def test_degenerate_inputs_fall_back():
    h = np.stack([np.zeros((3, 3)), np.eye(3), np.diag([1.0, 1.0, 2.0]), bloch_matrix(np.zeros(3))]).astype(complex)
    vals, vecs = eigh_batch(h)
    resid = h @ vecs - vecs * vals[:, None, :]
    assert np.max(np.abs(resid)) < 1e-12
    gram = np.conj(np.swapaxes(vecs, 1, 2)) @ vecs
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12


def test_jacobi_against_lapack():
    h = random_hermitian(np.random.default_rng(3), 1)[0]
    vals, vecs = _jacobi_eigh(h)
    assert np.allclose(np.sort(vals), np.linalg.eigvalsh(h), atol=1e-13)
    assert np.allclose(h @ vecs, vecs * vals, atol=1e-12)


@given(vec3)
def test_phase_convention_is_deterministic(r):
    _, vecs = eigh_batch(bloch_matrix(np.array(r)))
    for j in range(3):
        v = vecs[:, j]
        big = int(np.argmax(np.abs(v) - 1e-12 * np.arange(3)))
        assert abs(v[big].imag) < 1e-12 and v[big].real > 0


@given(arrays(np.float64, (3,), elements=finite), arrays(np.float64, (3,), elements=finite))
def test_expectation_real_and_bounded(re, im):
    amp = re + 1j * im
    if np.linalg.norm(amp) < 1e-3:
        return
    psi = QutritState(amp / np.linalg.norm(amp))
    ex = expectations_batch(psi.amplitudes[None])[0]
    assert np.all(np.abs(ex) <= 1.0 + 1e-12)
    assert ex @ ex <= 1.0 + 1e-12
    for a in range(3):
        assert expectation(SPIN1[a], psi) == pytest.approx(ex[a], abs=1e-14)
        assert expectation(SPIN1[a], psi.to_density()) == pytest.approx(ex[a], abs=1e-14)


def test_expectation_raises_on_non_hermitian():
    with pytest.raises(NumericalError):
        expectation(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex), QutritState(np.array([1, 1j, 0]) / math.sqrt(2)))


def test_states_validate():
    with pytest.raises(ValueError):
        QutritState(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        DensityMatrix3(np.diag([1.2, -0.2, 0.0]).astype(complex))
    with pytest.raises(ValueError):
        BlochVector(float("nan"), 0.0, 0.0)
    assert DensityMatrix3.maximally_mixed().purity() == pytest.approx(1 / 3)
