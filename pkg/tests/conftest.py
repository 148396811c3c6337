import numpy as np
import pytest

from oses_chain.hilbert import single_particle_indices

ACCEPTANCE_LINES = []


def random_mixed(length, rng, rank=None):
    """Ginibre-style random density matrix on ``length`` sites."""
    dim = 2**length
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure(length, rng):
    dim = 2**length
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_single_excitation(length, rng, rank=None):
    """Random mixed state supported on the one-particle sector."""
    rank = rank or length
    g = rng.normal(size=(length, rank)) + 1j * rng.normal(size=(length, rank))
    block = g @ g.conj().T
    block /= np.trace(block).real
    idx = single_particle_indices(length)
    rho = np.zeros((2**length,) * 2, dtype=complex)
    rho[np.ix_(idx, idx)] = block
    return rho


def embed_block(block):
    length = block.shape[0]
    idx = single_particle_indices(length)
    rho = np.zeros((2**length,) * 2, dtype=complex)
    rho[np.ix_(idx, idx)] = block
    return rho


def local_decoherence_state(length, rng):
    """Single-excitation state with |xi_jl| = a_j a_l exactly (j != l)."""
    psi = rng.normal(size=length) + 1j * rng.normal(size=length)
    psi /= np.linalg.norm(psi)
    a = rng.uniform(0.2, 1.0, size=length)
    amp = a * psi
    block = np.outer(amp, amp.conj())
    np.fill_diagonal(block, np.abs(psi) ** 2)
    return embed_block(block), a, psi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
