import numpy as np
import pytest
import scipy.linalg

from conftest import random_mixed, random_single_excitation
from oses_chain.dynamics import (
    LindbladModel,
    build_hamiltonian,
    evolve,
    extract_xi,
    lindblad_rhs,
    liouvillian_expm_oracle,
    particle_on_site,
    single_particle_block,
)
from oses_chain.errors import CapabilityError, IntegrationDivergedError, SectorError
from oses_chain.hilbert import occupations, single_particle_indices


def dissipator_explicit(model, rho):
    """gamma * sum_i (2 n_i rho n_i - {n_i^2, rho}) with explicit matrix products."""
    out = np.zeros_like(rho)
    for diag in occupations(model.length).T:
        n = np.diag(diag.astype(float))
        out += 2 * n @ rho @ n - n @ n @ rho - rho @ n @ n
    return model.gamma * out


def sp_block(mat, length):
    idx = single_particle_indices(length)
    return mat[np.ix_(idx, idx)]


def test_two_site_hamiltonian_block():
    ham = build_hamiltonian(LindbladModel(2, hopping=1.0))
    np.testing.assert_array_equal(sp_block(ham, 2), [[0, -1], [-1, 0]])


def test_single_site_hamiltonian_is_zero():
    np.testing.assert_array_equal(build_hamiltonian(LindbladModel(1)), np.zeros((2, 2)))


def test_four_site_hamiltonian_block():
    block = sp_block(build_hamiltonian(LindbladModel(4, hopping=1.0)), 4)
    expected = -(np.eye(4, k=1) + np.eye(4, k=-1))
    np.testing.assert_array_equal(block, expected)


@pytest.mark.parametrize("length", [2, 3, 4, 5])
def test_hamiltonian_hermitian_and_number_conserving(length):
    ham = build_hamiltonian(LindbladModel(length, hopping=0.7))
    number = np.diag(occupations(length).sum(axis=1).astype(float))
    assert np.max(np.abs(ham - ham.conj().T)) == 0
    assert np.max(np.abs(ham @ number - number @ ham)) <= 1e-12


def test_two_particle_hopping_is_nearest_neighbour():
    # |110> -> |101> with amplitude -t, no Jordan-Wigner sign on an open chain bond.
    ham = build_hamiltonian(LindbladModel(3, hopping=1.0))
    assert ham[0b101, 0b110] == -1
    assert ham[0b011, 0b110] == 0


def test_model_validation():
    with pytest.raises(ValueError):
        LindbladModel(2, gamma=-0.1)
    with pytest.raises(ValueError):
        LindbladModel(0)


def test_rhs_identity_fixed_point():
    model = LindbladModel(3, gamma=0.0)
    np.testing.assert_array_equal(lindblad_rhs(model, np.eye(8) / 8), np.zeros((8, 8)))


def test_rhs_matches_explicit_dissipator(rng):
    model = LindbladModel(3, hopping=0.8, gamma=0.37)
    rho = random_mixed(3, rng)
    ham = build_hamiltonian(model)
    expected = -1j * (ham @ rho - rho @ ham) + dissipator_explicit(model, rho)
    np.testing.assert_allclose(lindblad_rhs(model, rho), expected, atol=1e-14)


def test_two_site_dissipator_on_coherence():
    # Oracle: explicit 2 n rho n - {n^2, rho} on the 4x4 matrix.
    gamma = 0.25
    model = LindbladModel(2, hopping=0.0, gamma=gamma)
    rho = np.zeros((4, 4), dtype=complex)
    rho[2, 2] = rho[1, 1] = 0.5
    rho[2, 1] = 0.3 + 0.1j
    rho[1, 2] = np.conj(rho[2, 1])
    expected = dissipator_explicit(model, rho)
    out = lindblad_rhs(model, rho)
    np.testing.assert_allclose(out, expected, atol=1e-15)
    # diagonal untouched; the coherence decays at 2 * gamma
    np.testing.assert_array_equal(np.diag(out), 0)
    assert out[2, 1] == pytest.approx(-2 * gamma * rho[2, 1])


def test_rhs_is_traceless(rng):
    for length in (1, 2, 3, 4):
        model = LindbladModel(length, hopping=1.3, gamma=0.4)
        rho = random_mixed(length, rng)
        assert abs(np.trace(lindblad_rhs(model, rho))) <= 1e-12


def test_rhs_shape_mismatch():
    with pytest.raises(ValueError):
        lindblad_rhs(LindbladModel(2), np.eye(8) / 8)


def test_rabi_oscillation():
    traj = evolve(LindbladModel(2, hopping=1.0), particle_on_site(2, 1), t_max=5.0, dt=1e-3, stride=100)
    np.testing.assert_allclose(traj.densities[:, 0], np.cos(traj.times) ** 2, atol=1e-10)
    np.testing.assert_allclose(traj.densities[:, 1], np.sin(traj.times) ** 2, atol=1e-10)


def test_dephasing_relaxes_to_equal_mixture():
    traj = evolve(LindbladModel(2, gamma=0.25), particle_on_site(2, 1), t_max=50.0, dt=1e-2, stride=500)
    np.testing.assert_allclose(traj.densities[-1], [0.5, 0.5], atol=1e-6)
    assert abs(extract_xi(traj.states[-1])[0, 1]) < 1e-3


def test_zero_duration_keeps_initial_state():
    rho0 = particle_on_site(3, 2)
    traj = evolve(LindbladModel(3, gamma=0.1), rho0, t_max=0.0, dt=1e-3)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.states[0], rho0)


def test_final_time_always_sampled():
    traj = evolve(LindbladModel(2), particle_on_site(2), t_max=0.25, dt=0.01, stride=10)
    np.testing.assert_allclose(traj.times, [0.0, 0.1, 0.2, 0.25])


def test_bad_step_arguments():
    rho0 = particle_on_site(2)
    with pytest.raises(ValueError):
        evolve(LindbladModel(2), rho0, t_max=1.0, dt=0.0)
    with pytest.raises(ValueError):
        evolve(LindbladModel(2), rho0, t_max=1.0, dt=0.3)
    with pytest.raises(ValueError):
        evolve(LindbladModel(2), rho0, t_max=-1.0, dt=0.1)


def test_divergence_names_time():
    # RK4 is unstable far outside its stability region
    with pytest.raises(IntegrationDivergedError) as info:
        evolve(LindbladModel(3, hopping=1.0, gamma=10.0), particle_on_site(3), t_max=20.0, dt=0.5, stride=1)
    assert info.value.time > 0


def test_invariants_along_run(rng):
    model = LindbladModel(3, hopping=1.0, gamma=0.3)
    traj = evolve(model, random_mixed(3, rng), t_max=50.0, dt=1e-2, stride=250)
    for rho in traj.states:
        assert abs(np.trace(rho) - 1) <= 1e-9
        assert np.max(np.abs(rho - rho.conj().T)) <= 1e-9


def test_particle_number_sectors_do_not_mix():
    model = LindbladModel(4, gamma=0.3)
    traj = evolve(model, particle_on_site(4, 2), t_max=10.0, dt=1e-2, stride=100)
    idx = single_particle_indices(4)
    for rho in traj.states:
        assert abs(1 - np.trace(rho[np.ix_(idx, idx)]).real) <= 1e-9
        outside = rho.copy()
        outside[np.ix_(idx, idx)] = 0
        assert np.max(np.abs(outside)) <= 1e-9


def test_xi_pure_state_unit_modulus(rng):
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    psi /= np.linalg.norm(psi)
    idx = single_particle_indices(3)
    rho = np.zeros((8, 8), dtype=complex)
    rho[np.ix_(idx, idx)] = np.outer(psi, psi.conj())
    np.testing.assert_allclose(np.abs(extract_xi(rho)), 1.0, atol=1e-12)


def test_xi_dephased_state_vanishes():
    rho = np.zeros((8, 8), dtype=complex)
    for i, p in zip(single_particle_indices(3), (0.2, 0.5, 0.3)):
        rho[i, i] = p
    np.testing.assert_array_equal(extract_xi(rho), np.eye(3))


def test_xi_zero_density_convention():
    xi = extract_xi(particle_on_site(3, 1))
    np.testing.assert_array_equal(xi, np.eye(3))


def test_xi_requires_single_excitation_sector():
    with pytest.raises(SectorError):
        extract_xi(np.eye(4) / 4)
    with pytest.raises(SectorError):
        single_particle_block(np.eye(8) / 8)


def test_xi_bounded_and_matches_oracle():
    model = LindbladModel(2, gamma=0.25)
    rho0 = particle_on_site(2, 1)
    traj = evolve(model, rho0, t_max=10.0, dt=1e-3, stride=1000)
    for t, xi in zip(traj.times, traj.xi):
        assert np.all(np.abs(xi) <= 1 + 1e-9)
        ref = extract_xi(liouvillian_expm_oracle(model, rho0, t))
        assert abs(xi[0, 1] - ref[0, 1]) <= 1e-8


def test_oracle_closed_system_matches_unitary(rng):
    model = LindbladModel(3, hopping=0.9)
    rho0 = random_mixed(3, rng)
    u = scipy.linalg.expm(-1j * build_hamiltonian(model) * 1.7)
    np.testing.assert_allclose(liouvillian_expm_oracle(model, rho0, 1.7), u @ rho0 @ u.conj().T, atol=1e-10)


def test_oracle_identity_at_zero(rng):
    rho0 = random_mixed(2, rng)
    np.testing.assert_allclose(liouvillian_expm_oracle(LindbladModel(2, gamma=0.3), rho0, 0.0), rho0, atol=1e-15)


def test_oracle_size_limit():
    with pytest.raises(CapabilityError):
        liouvillian_expm_oracle(LindbladModel(5), particle_on_site(5), 1.0)


@pytest.mark.parametrize("length,gamma", [(2, 0.25), (3, 0.1), (4, 0.3)])
def test_rk4_matches_oracle(rng, length, gamma):
    model = LindbladModel(length, hopping=1.0, gamma=gamma)
    rho0 = random_single_excitation(length, rng) if length == 4 else random_mixed(length, rng)
    traj = evolve(model, rho0, t_max=2.0, dt=1e-3, stride=500)
    for t, rho in zip(traj.times, traj.states):
        assert np.max(np.abs(rho - liouvillian_expm_oracle(model, rho0, t))) <= 1e-8
