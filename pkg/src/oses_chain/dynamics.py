"""Hopping chains under local dephasing: Hamiltonian, Lindblad flow, RK4 integration.

The master equation is

    d rho / dt = -i [H, rho] + gamma * sum_i (2 n_i rho n_i - {n_i^2, rho})

with H the nearest-neighbour hopping chain ``-t sum_i c_i^dagger c_{i+1} + h.c.``
and ``n_i`` the local number operators. Only nearest-neighbour hops occur on an
open chain, so no Jordan-Wigner strings appear and the hard-core boson form
of the hopping term is exact for fermions as well.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import CapabilityError, IntegrationDivergedError, SectorError
from .hilbert import (
    ChainGeometry,
    density_matrix_violation,
    occupations,
    product_state,
    single_particle_indices,
    validate_density_matrix,
)

SECTOR_TOL = 1e-9
XI_DENSITY_FLOOR = 1e-14
ORACLE_MAX_SITES = 4


@dataclass(frozen=True)
class LindbladModel:
    """Nearest-neighbour hopping chain with on-site dephasing of strength ``gamma``."""

    length: int
    hopping: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        ChainGeometry(self.length)
        if not np.isfinite(self.hopping) or np.iscomplexobj(self.hopping):
            raise ValueError(f"hopping must be a finite real number, got {self.hopping!r}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"dephasing rate must be finite and >= 0, got {self.gamma!r}")

    @property
    def geometry(self) -> ChainGeometry:
        return ChainGeometry(self.length)

    @property
    def dim(self) -> int:
        return 2**self.length

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return build_hamiltonian(self)

    @cached_property
    def number_operators(self) -> np.ndarray:
        """Diagonals of ``n_1 ... n_L``, shape ``(L, 2**L)``."""
        return occupations(self.length).T.astype(float)

    @cached_property
    def dephasing_mask(self) -> np.ndarray:
        # sum_i (2 n_i rho n_i - n_i rho - rho n_i) acts entrywise on rho_ab with
        # weight sum_i (2 n_i(a) n_i(b) - n_i(a) - n_i(b)) = -(Hamming distance of a, b).
        occ = occupations(self.length)
        return -np.sum((occ[:, None, :] - occ[None, :, :]) ** 2, axis=-1).astype(float)


def build_hamiltonian(model: LindbladModel) -> np.ndarray:
    """Dense ``2**L x 2**L`` hopping Hamiltonian with zero on-site potential."""
    length = model.length
    occ = occupations(length)
    ham = np.zeros((model.dim, model.dim), dtype=complex)
    for i in range(length - 1):
        # c_i^dagger c_{i+1}: move a particle from site i+1 to site i.
        movable = np.nonzero((occ[:, i] == 0) & (occ[:, i + 1] == 1))[0]
        flip = (1 << (length - 1 - i)) | (1 << (length - 2 - i))
        ham[movable ^ flip, movable] += -model.hopping
    return ham + ham.conj().T


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Time derivative of ``rho`` under the dephasing master equation."""
    rho = np.asarray(rho)
    if rho.shape != (model.dim, model.dim):
        raise ValueError(f"state shape {rho.shape} does not match a {model.length}-site chain")
    ham = model.hamiltonian
    out = -1j * (ham @ rho - rho @ ham)
    if model.gamma:
        out += model.gamma * model.dephasing_mask * rho
    return out


def densities(rho: np.ndarray) -> np.ndarray:
    """Site occupations ``n_i = Tr(n_i rho)``."""
    rho = np.asarray(rho)
    length = int(round(np.log2(rho.shape[0])))
    return occupations(length).T @ np.diag(rho).real


def sector_leakage(rho: np.ndarray) -> float:
    """Population outside the single-excitation sector."""
    rho = np.asarray(rho)
    length = int(round(np.log2(rho.shape[0])))
    idx = single_particle_indices(length)
    return float(abs(1.0 - np.sum(np.diag(rho)[idx].real)))


def single_particle_block(rho: np.ndarray, tol: float = SECTOR_TOL) -> np.ndarray:
    """The ``L x L`` block ``rho_{jl} = <j| rho |l>`` on the single-excitation sector.

    Raises SectorError if more than ``tol`` of the population lies elsewhere.
    """
    rho = np.asarray(rho)
    length = int(round(np.log2(rho.shape[0])))
    leak = sector_leakage(rho)
    if leak > tol:
        raise SectorError(f"state leaks {leak:.3e} of its population out of the 1-particle sector")
    idx = single_particle_indices(length)
    return rho[np.ix_(idx, idx)]


def xi_from_block(block: np.ndarray) -> np.ndarray:
    n = np.diag(block).real
    weight = np.sqrt(np.clip(np.outer(n, n), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(np.outer(n, n) < XI_DENSITY_FLOOR, 0.0, block / weight)
    np.fill_diagonal(xi, 1.0)
    return xi


def extract_xi(rho: np.ndarray) -> np.ndarray:
    """Decoherence factors ``xi_jl = rho_jl / sqrt(rho_jj rho_ll)`` of a single-excitation state.

    ``xi_jj = 1``; pairs whose density product is below 1e-14 get ``xi_jl = 0``.
    """
    return xi_from_block(single_particle_block(rho))


def particle_on_site(length: int, site: int = 1) -> np.ndarray:
    occ = [0] * length
    if not 1 <= site <= length:
        raise ValueError(f"initial site must be in 1..{length}, got {site!r}")
    occ[site - 1] = 1
    return product_state(occ)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled states of one integration run.

    ``xi`` is None when the initial state is not confined to the
    single-excitation sector.
    """

    times: np.ndarray
    states: np.ndarray
    densities: np.ndarray
    xi: Optional[np.ndarray]

    def __len__(self):
        return len(self.times)


def _step_count(t_max: float, dt: float) -> int:
    if not dt > 0 or not np.isfinite(dt):
        raise ValueError(f"time step must be positive and finite, got {dt!r}")
    if not t_max >= 0 or not np.isfinite(t_max):
        raise ValueError(f"t_max must be finite and >= 0, got {t_max!r}")
    steps = int(round(t_max / dt))
    if abs(steps * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError(f"t_max={t_max} is not an integer multiple of dt={dt}")
    return steps


def rk4_step(model: LindbladModel, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = lindblad_rhs(model, rho)
    k2 = lindblad_rhs(model, rho + 0.5 * dt * k1)
    k3 = lindblad_rhs(model, rho + 0.5 * dt * k2)
    k4 = lindblad_rhs(model, rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(
    model: LindbladModel,
    rho0: np.ndarray,
    t_max: float,
    dt: float,
    stride: int = 10,
    tol: float = 1e-9,
) -> TrajectoryRecord:
    """Integrate the master equation with fixed-step RK4.

    A sample is stored every ``stride`` steps (always including t=0 and
    ``t_max``). Each sample is checked for Hermiticity, unit trace and
    positivity at tolerance ``tol``; a violation raises
    IntegrationDivergedError carrying the offending time.
    """
    rho = validate_density_matrix(rho0)
    if rho.shape != (model.dim, model.dim):
        raise ValueError(f"initial state shape {rho.shape} does not match the model")
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    steps = _step_count(t_max, dt)
    track_xi = sector_leakage(rho) <= SECTOR_TOL

    sample_steps = list(range(0, steps + 1, stride))
    if sample_steps[-1] != steps:
        sample_steps.append(steps)
    times, states = [], []
    sample_iter = iter(sample_steps)
    next_sample = next(sample_iter)
    for k in range(steps + 1):
        if k == next_sample:
            t = k * dt
            reason = density_matrix_violation(rho, herm_tol=tol, trace_tol=tol, psd_tol=tol)
            if reason is None and track_xi and sector_leakage(rho) > tol:
                reason = "population leaked out of the single-excitation sector"
            if reason is not None:
                raise IntegrationDivergedError(t, reason)
            times.append(t)
            states.append(rho.copy())
            next_sample = next(sample_iter, None)
        if k < steps:
            rho = rk4_step(model, rho, dt)

    states = np.array(states)
    dens = np.array([densities(s) for s in states])
    xi = np.array([extract_xi(s) for s in states]) if track_xi else None
    return TrajectoryRecord(np.array(times), states, dens, xi)


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Dense Liouvillian acting on row-major vectorized ``rho`` (``vec(A rho B) = (A x B^T) vec(rho)``)."""
    ham = model.hamiltonian
    eye = np.eye(model.dim)
    sup = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    for diag in model.number_operators:
        n = np.diag(diag)
        n2 = n @ n
        sup += model.gamma * (2 * np.kron(n, n.T) - np.kron(n2, eye) - np.kron(eye, n2.T))
    return sup


def liouvillian_expm_oracle(model: LindbladModel, rho0: np.ndarray, t: float) -> np.ndarray:
    """Exact ``rho(t) = exp(t * Liouvillian) rho0`` by scaling-and-squaring. Test use only."""
    if model.length > ORACLE_MAX_SITES:
        raise CapabilityError(
            f"dense Liouvillian exponential limited to L <= {ORACLE_MAX_SITES}, got L={model.length}"
        )
    rho0 = np.asarray(rho0, dtype=complex)
    prop = scipy.linalg.expm(t * liouvillian(model))
    return (prop @ rho0.reshape(-1)).reshape(rho0.shape)
