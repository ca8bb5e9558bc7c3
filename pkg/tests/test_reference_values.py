"""Worked reference values for each public operation."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxwell_metal.bands import (
    ModelParams,
    PhaseLabel,
    Quasimomentum,
    band_energies,
    bloch_vector,
    bz_scan,
    effective_dispersion,
    linearity_check,
    maxwell_points,
    phase_classify,
)
from maxwell_metal.dynamics import (
    RampConfig,
    TrajectoryPoint,
    berry_from_ramp,
    chern_from_ramp,
    evolve_unitary,
    generalized_force,
    initial_state,
    ramp_hamiltonian,
)
from maxwell_metal.spin1 import (
    DensityMatrix3,
    QutritState,
    commutator,
    eigensystem,
    expectation,
    hamiltonian_from_bloch,
    spin1_matrices,
)
from maxwell_metal.topology import (
    Band,
    SpherePoint,
    berry_curvature_lattice,
    chern_sphere,
    chern_vs_lambda,
    plaquette_field,
    sphere_bloch,
)

SX, SY, SZ = spin1_matrices()
PSI = np.array([0, 1, 1j]) / math.sqrt(2)


# spin-1 algebra


def test_spin_examples():
    assert np.allclose(eigensystem(SZ).values, [-1, 0, 1])
    assert np.allclose(commutator(SX.matrix, SY.matrix) - 1j * SZ.matrix, 0)
    assert np.allclose(SZ.matrix @ PSI, PSI)


def test_hamiltonian_examples():
    zero = hamiltonian_from_bloch((0, 0, 0))
    assert np.array_equal(zero.matrix, np.zeros((3, 3)))
    es = eigensystem(zero)
    assert np.array_equal(es.values, [0, 0, 0])
    assert np.allclose(es.vectors.conj().T @ es.vectors, np.eye(3))
    assert hamiltonian_from_bloch((0, 0, 1)).allclose(SZ)
    assert np.allclose(eigensystem(hamiltonian_from_bloch((1, 1, 1))).values, [-math.sqrt(3), 0, math.sqrt(3)])
    h = hamiltonian_from_bloch((1, 0, 0))
    es = eigensystem(h)
    assert np.allclose(es.values, [-1, 0, 1])
    assert np.allclose(h.matrix @ es.vector(1), 0, atol=1e-15)


def test_expectation_examples():
    assert expectation(SZ, QutritState(PSI)) == pytest.approx(1.0)
    assert expectation(SY, QutritState(np.array([1.0, 0, 0]))) == 0.0
    mixed = DensityMatrix3.maximally_mixed()
    obs = hamiltonian_from_bloch((0.3, -1.2, 2.0)) + SZ * 0.0
    assert expectation(obs, mixed) == pytest.approx(np.trace(obs.matrix).real / 3, abs=1e-15)


# band model


def test_bloch_examples():
    assert np.allclose(bloch_vector(Quasimomentum(0, 0, math.pi / 2), 0).as_array(), 0, atol=1e-15)
    assert np.allclose(bloch_vector(Quasimomentum(math.pi / 2, 0, 0), 0).as_array(), [1, 0, 0], atol=1e-15)
    assert np.allclose(bloch_vector(Quasimomentum(0, 0, 0), 2).as_array(), [0, 0, 1])


def test_band_energy_examples():
    assert np.allclose(band_energies(Quasimomentum(0, 0, math.pi / 2), ModelParams(lam=0)), 0, atol=1e-15)
    assert band_energies(Quasimomentum(0, 0, 0), ModelParams(lam=2)) == (-1.0, 0.0, 1.0)
    r3 = math.sqrt(3)
    assert band_energies(Quasimomentum(math.pi / 2, math.pi / 2, 0), ModelParams()) == pytest.approx((-r3, 0, r3))


def test_maxwell_point_examples():
    plus, minus = maxwell_points(0.0)
    assert (plus.kx, plus.ky, plus.kz) == (0.0, 0.0, math.pi / 2)
    assert (minus.kx, minus.ky, minus.kz) == (0.0, 0.0, -math.pi / 2)
    assert [(p.kx, p.ky, p.kz) for p in maxwell_points(1.0)] == [(0.0, 0.0, 0.0)]
    assert [(p.kx, p.ky, p.kz) for p in maxwell_points(-1.0)] == [(0.0, 0.0, -math.pi)]
    assert maxwell_points(2.0) == []


def test_effective_dispersion_examples():
    assert effective_dispersion((0, 0, 1), 0.0) == (-1.0, 0.0, 1.0)
    assert effective_dispersion((0, 0, 1), 0.6) == pytest.approx((-0.8, 0, 0.8))
    for lam in (0.0, 0.5, -0.9):
        assert effective_dispersion((0.3, 0.4, 0), lam, "M-") == pytest.approx((-0.5, 0, 0.5))


def test_phase_examples():
    assert phase_classify(0) is PhaseLabel.MAXWELL_METAL
    assert phase_classify(1) is PhaseLabel.CRITICAL
    assert phase_classify(2) is PhaseLabel.TRIVIAL_INSULATOR


def test_scan_minima_near_maxwell_points():
    # an odd grid has no kx = 0 column, so take the gap minimum in each kz half
    n = 101
    s = bz_scan(ModelParams(lam=0), "ky0", n)
    cell = 2 * math.pi / n
    gap = s.gap()
    for sign in (1, -1):
        half = np.flatnonzero(sign * s.kz > 0)
        i = half[np.argmin(gap[half])]
        assert abs(s.kx[i]) <= cell
        assert abs(s.kz[i] - sign * math.pi / 2) <= cell


@given(*(st.floats(-math.pi, math.pi) for _ in range(3)), st.floats(-3, 3))
def test_band_reflection_symmetry(kx, ky, kz, lam):
    p = ModelParams(lam=lam)
    a = band_energies(Quasimomentum(kx, ky, kz), p)
    b = band_energies(Quasimomentum(-kx, -ky, kz), p)
    assert a == pytest.approx(b, abs=1e-12)


def test_linearity_examples():
    assert linearity_check(0.0, radius=0.01) < 0.01
    devs = [linearity_check(0.0, radius=r) for r in (0.1, 0.05, 0.025)]
    assert devs[0] > devs[1] > devs[2]
    alpha = math.sqrt(0.75)
    assert linearity_check(0.5, radius=0.01, directions=np.array([[0, 0, 1.0]])) < 0.01 * alpha


# topology


def test_sphere_examples():
    for phi in (0.0, 1.0, 4.0):
        r = sphere_bloch(SpherePoint(0.0, phi), 0.0)
        assert (r.rx, r.ry, r.rz) == pytest.approx((0, 0, 1))
    r = sphere_bloch(SpherePoint(math.pi / 2, 0.0), 0.5)
    assert (r.rx, r.ry, r.rz) == pytest.approx((1, 0, 0.5))
    assert sphere_bloch(SpherePoint(math.pi, 0.0), 1.0).norm() < 1e-15


def test_lattice_curvature_examples():
    fld = plaquette_field("lowest", 0.0, 64, 64)
    assert np.allclose(fld.row(math.pi / 2), 1.0, rtol=0.02)
    middle = berry_curvature_lattice("middle", 0.0, 64, 64)
    assert max(abs(s.f_theta_phi) for s in middle) < 1e-6
    trivial = plaquette_field("lowest", 3.0, 64, 64)
    assert np.abs(trivial.f).max() < 0.1
    assert abs(chern_sphere("lowest", 3.0).raw) < 1e-9


def test_chern_examples():
    assert chern_sphere("lowest", 0.0).rounded == 2
    assert chern_sphere("lowest", 2.0).rounded == 0
    assert sum(chern_sphere(b, 0.0).rounded for b in Band) == 0
    assert list(chern_vs_lambda("lowest", [0, 0.5, 0.9]).rounded()) == [2, 2, 2]
    assert list(chern_vs_lambda("lowest", [1.1, 1.5, 2]).rounded()) == [0, 0, 0]
    assert list(chern_vs_lambda("lowest", [-0.9, -0.5]).rounded()) == [2, 2]


# dynamics


def test_initial_state_examples():
    psi = initial_state()
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1)
    assert expectation(SZ, psi) == pytest.approx(1)
    assert expectation(SX, psi) == 0.0
    assert expectation(SY, psi) == 0.0


def test_ramp_hamiltonian_examples():
    cfg = RampConfig()
    w = cfg.omega
    assert ramp_hamiltonian(0.0, cfg).allclose(SZ * w)
    assert ramp_hamiltonian(0.3, cfg).allclose(SX * w, atol=1e-12)
    assert ramp_hamiltonian(0.6, cfg).allclose(SZ * -w, atol=1e-12)


def _point(theta, sy, state=None):
    return TrajectoryPoint(0.0, theta, state, 0.0, sy, 0.0, 0.0, 0.0)


def test_generalized_force_examples():
    assert generalized_force(_point(0.0, 0.7)) == 0.0
    # M_phi = -<d_phi H-hat>; this sign is what makes the lowest band's ramp estimate +2
    assert generalized_force(_point(math.pi / 2, 0.1)) == pytest.approx(-0.1)
    assert generalized_force(_point(math.pi / 2, expectation(SY, initial_state()))) == 0.0


def test_sudden_limit_follows_short_time_expansion():
    # infidelity ~ Var(time-averaged H) t^2 = (2 omega t / pi)^2 / 2
    for t in (0.001, 0.0005):
        cfg = RampConfig(t_ramp=t)
        tr = evolve_unitary(cfg)
        fid = abs(np.vdot(tr.states[0], tr.states[-1])) ** 2
        assert 1 - fid == pytest.approx(0.5 * (2 * cfg.omega * t / math.pi) ** 2, rel=0.03)
    assert fid > 0.999


def test_slow_ramp_curvature_examples():
    cfg = RampConfig(t_ramp=10.0, profile="smooth")
    tr = evolve_unitary(cfg)
    samples = berry_from_ramp(tr, cfg)
    assert samples[0].point.theta == 0.0 and samples[0].f_theta_phi == 0.0
    i = int(np.argmin(np.abs(tr.theta - math.pi / 2)))
    assert tr.f[i] == pytest.approx(1.0, rel=0.05)
    cfg3 = RampConfig(t_ramp=10.0, profile="smooth", lam=3.0)
    assert np.abs(evolve_unitary(cfg3).f).max() < 0.1


def test_ramp_chern_examples():
    assert 1.8 <= chern_from_ramp(RampConfig()).chern <= 2.2
    assert -2.2 <= chern_from_ramp(RampConfig(point="M-")).chern <= -1.8
    assert abs(chern_from_ramp(RampConfig(lam=2.0)).chern) < 0.3
