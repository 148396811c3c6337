"""Operator-space entanglement spectrum of vectorized density matrices.

The spectrum at bond ``m`` is the set of eigenvalues of the reduced matrix
obtained by tracing sites m+1..L out of ``|rho><rho|``. With the Fano
coefficients reshaped into ``M`` (``4**m x 4**(L-m)``) this reduced matrix is
the Gram matrix ``C = M M^dagger``, so its eigenvalues are the squared singular
values of ``M``. The spectrum is kept unnormalized: it sums to ``Tr rho^2``.
"""

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .dynamics import single_particle_block
from .errors import NumericalError, SectorError
from .hilbert import (
    OPERATOR_DIM,
    FanoTensor,
    chain_length,
    check_cut,
    fano_decompose,
    single_particle_indices,
)

CLAMP = 1e-12
PSD_TOL = 1e-10
DEGENERACY_RTOL = 1e-8

StateLike = Union[np.ndarray, FanoTensor]


def clamp_spectrum(values: Iterable[float], floor: float = CLAMP) -> np.ndarray:
    """Sort descending and zero out entries below ``floor`` (including negative roundoff)."""
    values = np.sort(np.real(np.asarray(list(values), dtype=complex)))[::-1]
    return np.where(values < floor, 0.0, values)


def entropy(values: Iterable[float]) -> float:
    """``-sum x ln x`` with ``0 ln 0 = 0``."""
    x = np.asarray(list(values), dtype=float)
    x = x[x > 0]
    return float(-np.sum(x * np.log(x)))


@dataclass(frozen=True)
class OsesSpectrum:
    """Sorted (descending) unnormalized OSES values at one bond."""

    values: np.ndarray
    cut: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", clamp_spectrum(self.values))

    def __len__(self):
        return len(self.values)

    @property
    def purity(self) -> float:
        return float(np.sum(self.values))

    @property
    def osee(self) -> float:
        return osee(self)

    @property
    def schmidt_values(self) -> np.ndarray:
        return np.sqrt(self.values)

    @property
    def nonzero(self) -> np.ndarray:
        return self.values[self.values > 0]

    def padded(self, size: int) -> np.ndarray:
        """Values padded with zeros (or cut) to ``size`` entries."""
        out = np.zeros(size)
        n = min(size, len(self.values))
        out[:n] = self.values[:n]
        return out


@dataclass(frozen=True)
class CMatrix:
    cut: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        side = OPERATOR_DIM**self.cut
        if entries.shape != (side, side):
            raise ValueError(f"C matrix at cut {self.cut} must be {side}x{side}, got {entries.shape}")
        object.__setattr__(self, "entries", entries)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


def _as_fano(state: StateLike) -> FanoTensor:
    return state if isinstance(state, FanoTensor) else fano_decompose(state)


def build_c_matrix(state: StateLike, cut: int) -> CMatrix:
    """Gram matrix ``C_{I;A} = sum_J P_{I;J} P*_{A;J}`` across bond ``cut``."""
    fano = _as_fano(state)
    check_cut(fano.length, cut)
    mat = fano.matrix(cut)
    return CMatrix(cut, mat @ mat.conj().T)


def build_c_matrix_bruteforce(state: StateLike, cut: int) -> CMatrix:
    """Same as :func:`build_c_matrix` by explicit summation over multi-indices.

    Exponentially slow; meant as an independent check for short chains.
    """
    fano = _as_fano(state)
    length = fano.length
    check_cut(length, cut)
    coeffs = fano.coefficients
    left = list(itertools.product(range(OPERATOR_DIM), repeat=cut))
    right = list(itertools.product(range(OPERATOR_DIM), repeat=length - cut))
    side = len(left)
    entries = np.zeros((side, side), dtype=complex)
    for a, idx_i in enumerate(left):
        for b, idx_a in enumerate(left):
            acc = 0j
            for idx_j in right:
                acc += coeffs[idx_i + idx_j] * np.conj(coeffs[idx_a + idx_j])
            entries[a, b] = acc
    return CMatrix(cut, entries)


def oses_from_c(cmat: CMatrix) -> OsesSpectrum:
    """Diagonalize a C matrix."""
    try:
        eigs = np.linalg.eigvalsh(cmat.entries)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(cmat.entries)
        raise NumericalError(f"eigensolver failed on C matrix (condition number {cond:.3e})") from exc
    if eigs[0] < -PSD_TOL:
        raise NumericalError(f"C matrix is not positive semidefinite (min eigenvalue {eigs[0]:.3e})")
    return OsesSpectrum(eigs, cmat.cut)


def oses_spectrum(state: StateLike, cut: int) -> OsesSpectrum:
    """OSES at bond ``cut`` from the singular values of the reshaped Fano coefficients."""
    fano = _as_fano(state)
    mat = fano.matrix(cut)
    try:
        s = np.linalg.svd(mat, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular value decomposition did not converge") from exc
    return OsesSpectrum(s**2, cut)


def osee(spectrum: Union[OsesSpectrum, Sequence[float]]) -> float:
    """Operator-space entanglement entropy ``-sum L ln L`` over the unnormalized spectrum."""
    values = spectrum.values if isinstance(spectrum, OsesSpectrum) else spectrum
    values = np.asarray(values, dtype=float)
    if np.any(values < -PSD_TOL):
        raise ValueError("OSES values must be non-negative")
    return entropy(values)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho) ** 2))


def sector_purity(rho: np.ndarray, sites: Iterable[int]) -> float:
    """``sum_{j,l in sites} |rho_jl|^2`` over the single-excitation block (sites 1-based)."""
    sites = sorted(set(int(s) for s in sites))
    length = chain_length(np.asarray(rho).shape[0])
    if not sites:
        raise ValueError("site subset must be nonempty")
    if sites[0] < 1 or sites[-1] > length:
        raise ValueError(f"sites must lie in 1..{length}")
    block = single_particle_block(rho)
    sub = block[np.ix_([s - 1 for s in sites], [s - 1 for s in sites])]
    return float(np.sum(np.abs(sub) ** 2))


def degeneracy_structure(values: Sequence[float], rtol: float = DEGENERACY_RTOL) -> tuple:
    """Multiplicities of clusters of (descending) values, e.g. ``(1, 1, 2)``.

    Neighbouring values join a cluster when their gap is below ``rtol`` times the
    larger magnitude.
    """
    values = np.sort(np.asarray(values, dtype=float))[::-1]
    if len(values) == 0:
        return ()
    counts = [1]
    for prev, cur in zip(values[:-1], values[1:]):
        if prev - cur <= rtol * max(abs(prev), abs(cur)):
            counts[-1] += 1
        else:
            counts.append(1)
    return tuple(counts)


def _as_state_vector(psi: np.ndarray) -> tuple:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    length = chain_length(psi.shape[0])
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state vector must be normalized, |psi|^2 = {norm:.12g}")
    return psi, length


def pure_state_es(psi: np.ndarray, cut: int) -> np.ndarray:
    """ES ``(lambda_1, lambda_2)`` of a single-excitation pure state.

    ``lambda_1`` is the weight on sites right of the cut and ``lambda_2`` the
    weight on sites ``1..cut``.
    """
    psi, length = _as_state_vector(psi)
    check_cut(length, cut)
    idx = single_particle_indices(length)
    amps = psi[idx]
    leak = 1.0 - np.sum(np.abs(amps) ** 2)
    if leak > 1e-9:
        raise SectorError(f"state has weight {leak:.3e} outside the single-excitation sector")
    weights = np.abs(amps) ** 2
    return np.array([weights[cut:].sum(), weights[:cut].sum()])


def entanglement_spectrum(psi: np.ndarray, cut: int) -> np.ndarray:
    """Eigenvalues of the reduced state of sites ``1..cut`` (descending)."""
    psi, length = _as_state_vector(psi)
    check_cut(length, cut)
    s = np.linalg.svd(psi.reshape(2**cut, -1), compute_uv=False)
    return np.sort(s**2)[::-1]


@dataclass(frozen=True)
class TensorIdentityReport:
    passed: bool
    spectrum_deviation: float
    entropy_deviation: float
    osee: float
    entanglement_entropy: float


def check_tensor_identity(psi: np.ndarray, cut: int, tol: float = 1e-10) -> TensorIdentityReport:
    """Check ``OSES = ES x ES`` and ``OSEE = 2 S`` for ``rho = |psi><psi|``."""
    psi, _ = _as_state_vector(psi)
    es = entanglement_spectrum(psi, cut)
    spectrum = oses_spectrum(np.outer(psi, psi.conj()), cut)
    products = np.sort(np.outer(es, es).reshape(-1))[::-1]
    size = max(len(products), len(spectrum))
    expected = np.zeros(size)
    expected[: len(products)] = products
    spec_dev = float(np.max(np.abs(spectrum.padded(size) - expected)))
    ent = entropy(es)
    ent_dev = abs(spectrum.osee - 2.0 * ent)
    return TensorIdentityReport(
        passed=spec_dev <= tol and ent_dev <= tol,
        spectrum_deviation=spec_dev,
        entropy_deviation=ent_dev,
        osee=spectrum.osee,
        entanglement_entropy=ent,
    )
