"""Closed-form OSES of single-excitation mixed states.

For a state with exactly one particle, the only nonzero Fano coefficients are
the densities ``P_{j=f} = rho_jj`` and coherences ``P_{j=+,l=-} = rho_jl``.
At bond ``m`` the C matrix then splits into three blocks:

* a 1x1 block with the particle entirely in A2 (sites m+1..L),
* a rank-one block with the particle entirely in A1 (sites 1..m),
* two conjugate ``m x m`` blocks built from coherences across the cut.

The first two contribute one eigenvalue each, the third ``m`` doubly
degenerate eigenvalues. Writing ``rho_jl = xi_jl sqrt(n_j n_l)``, the first two
are sector purities ``sum |xi_jl|^2 n_j n_l`` of each side.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import single_particle_block, xi_from_block
from .errors import NonFactorizableError
from .hilbert import check_cut, single_particle_indices
from .oses import OsesSpectrum

FACTOR_TOL = 1e-8
XI_SUPPORT = 1e-8


@dataclass(frozen=True)
class SingleExcitationState:
    """Single-particle block ``rho_jl = <j| rho |l>`` of a one-excitation state."""

    block: np.ndarray

    def __post_init__(self):
        block = np.array(self.block, dtype=complex)
        if block.ndim != 2 or block.shape[0] != block.shape[1] or block.shape[0] < 1:
            raise ValueError(f"single-particle block must be square, got shape {block.shape}")
        if np.max(np.abs(block - block.conj().T)) > 1e-10:
            raise ValueError("single-particle block must be Hermitian")
        total = np.trace(block).real
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"densities must sum to 1, got {total:.12g}")
        block.setflags(write=False)
        object.__setattr__(self, "block", block)

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray) -> "SingleExcitationState":
        return cls(single_particle_block(rho))

    @classmethod
    def from_densities_and_xi(cls, densities: Sequence[float], xi: np.ndarray) -> "SingleExcitationState":
        n = np.asarray(densities, dtype=float)
        block = np.asarray(xi, dtype=complex) * np.sqrt(np.outer(n, n))
        np.fill_diagonal(block, n)
        return cls(block)

    @property
    def length(self) -> int:
        return self.block.shape[0]

    @property
    def densities(self) -> np.ndarray:
        return np.diag(self.block).real.copy()

    @property
    def xi(self) -> np.ndarray:
        return xi_from_block(self.block)

    @property
    def xi_magnitudes(self) -> np.ndarray:
        return np.abs(self.xi)

    @property
    def phases(self) -> np.ndarray:
        """``phi_jl = arg rho_jl`` (zero where the coherence vanishes)."""
        return np.angle(self.block)

    def coherence(self, j: int, l: int, sign: str = "+") -> complex:
        """``P_{j=sign, l=-sign}`` for 1-based sites ``j != l``."""
        if j == l:
            raise ValueError("coherence needs two distinct sites")
        if sign == "+":
            return complex(self.block[j - 1, l - 1])
        if sign == "-":
            return complex(self.block[l - 1, j - 1])
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")

    def reconstruct_coherence(self, j: int, l: int, sign: str = "+") -> complex:
        """``|xi_jl| sqrt(n_j n_l) exp(i s phi_jl)`` from magnitudes, densities and phase."""
        s = {"+": 1, "-": -1}[sign]
        n = self.densities
        mag = self.xi_magnitudes[j - 1, l - 1] * np.sqrt(n[j - 1] * n[l - 1])
        return complex(mag * np.exp(1j * s * self.phases[j - 1, l - 1]))

    def to_density_matrix(self) -> np.ndarray:
        idx = single_particle_indices(self.length)
        rho = np.zeros((2**self.length,) * 2, dtype=complex)
        rho[np.ix_(idx, idx)] = self.block
        return rho


def _sector_sum(state: SingleExcitationState, sites: np.ndarray) -> float:
    n = state.densities[sites]
    xi2 = state.xi_magnitudes[np.ix_(sites, sites)] ** 2
    return float(np.sum(xi2 * np.outer(n, n)))


def block1_lambda(state: SingleExcitationState, cut: int) -> float:
    """Eigenvalue of the block with the particle in A2: ``sum_{j,l>m} |xi_jl|^2 n_j n_l``."""
    check_cut(state.length, cut)
    return _sector_sum(state, np.arange(cut, state.length))


def block2_lambda(state: SingleExcitationState, cut: int) -> float:
    """Eigenvalue of the rank-one block with the particle in A1: ``sum_{j,l<=m} |xi_jl|^2 n_j n_l``."""
    check_cut(state.length, cut)
    return _sector_sum(state, np.arange(cut))


def coherence_block(state: SingleExcitationState, cut: int, sign: str = "+") -> np.ndarray:
    """One ``m x m`` cross-cut block, ``C_jk = sum_{l>m} P_{j=s;l=-s} P*_{k=s;l=-s}``."""
    check_cut(state.length, cut)
    cross = state.block[:cut, cut:]
    if sign == "+":
        vecs = cross
    elif sign == "-":
        vecs = cross.conj()
    else:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return vecs @ vecs.conj().T


def coherence_values(state: SingleExcitationState, cut: int) -> np.ndarray:
    """The ``m`` coherence-block eigenvalues (descending), each doubly degenerate in the OSES."""
    eigs = np.linalg.eigvalsh(coherence_block(state, cut, "+"))
    return np.clip(eigs[::-1], 0.0, None)


@dataclass(frozen=True)
class BlockSpectrum:
    """Block-resolved OSES of a single-excitation state.

    ``lambda1`` comes from the particle in the traced-out side A2, ``lambda2``
    from the particle in A1. Each entry of ``coherence`` appears twice in the
    full spectrum.
    """

    lambda1: float
    lambda2: float
    coherence: np.ndarray
    local_decoherence: bool = False
    pair_gap: float = 0.0

    @property
    def purity(self) -> float:
        return self.lambda1 + self.lambda2 + 2.0 * float(np.sum(self.coherence))

    def values(self) -> np.ndarray:
        vals = np.concatenate([[self.lambda1, self.lambda2], self.coherence, self.coherence])
        return np.sort(vals)[::-1]

    def padded(self, size: int) -> np.ndarray:
        vals = self.values()
        out = np.zeros(max(size, len(vals)))
        out[: len(vals)] = vals
        return out

    def spectrum(self, cut: int = 0) -> OsesSpectrum:
        return OsesSpectrum(self.values(), cut)


def block_spectrum(state: SingleExcitationState, cut: int, assume_local: bool = False) -> BlockSpectrum:
    """Assemble all three blocks at bond ``cut``.

    With ``assume_local`` the coherence block is replaced by its rank-one form
    under factorized decoherence (raises NonFactorizableError if that does not hold).
    """
    lam1 = block1_lambda(state, cut)
    lam2 = block2_lambda(state, cut)
    if assume_local:
        coh = np.zeros(cut)
        coh[0] = local_decoherence_lambda34(state, cut)
        return BlockSpectrum(lam1, lam2, coh, local_decoherence=True)
    plus = coherence_values(state, cut)
    minus = np.clip(np.linalg.eigvalsh(coherence_block(state, cut, "-"))[::-1], 0.0, None)
    return BlockSpectrum(lam1, lam2, plus, pair_gap=float(np.max(np.abs(plus - minus))))


@dataclass(frozen=True)
class LocalDecoherence:
    """Per-site decoherence magnitudes ``|xi_j|`` and site phases ``theta_j``.

    Within tolerance, ``rho_jl = |xi_j| |xi_l| sqrt(n_j n_l) exp(i (theta_j - theta_l))``
    for ``j != l``.
    """

    magnitudes: np.ndarray
    phases: np.ndarray
    residual: float

    def reconstruct(self, densities: Sequence[float]) -> np.ndarray:
        n = np.asarray(densities, dtype=float)
        amp = self.magnitudes * np.sqrt(n) * np.exp(1j * self.phases)
        block = np.outer(amp, amp.conj())
        np.fill_diagonal(block, n)
        return block


def fit_local_decoherence(state: SingleExcitationState, tol: float = FACTOR_TOL) -> LocalDecoherence:
    """Fit ``|xi_jl| = |xi_j| |xi_l|`` by least squares in log space.

    Pairs with ``|xi_jl| <= 1e-8`` are excluded from the fit but must be
    predicted as vanishing. Raises NonFactorizableError when the maximum
    deviation (in ``|xi|``) exceeds ``tol``.
    """
    length = state.length
    mags = state.xi_magnitudes
    pairs = [(j, l) for j in range(length) for l in range(j + 1, length)]
    support = [(j, l) for j, l in pairs if mags[j, l] > XI_SUPPORT]
    fitted = np.zeros(length)
    if support:
        design = np.zeros((len(support), length))
        for row, (j, l) in enumerate(support):
            design[row, [j, l]] = 1.0
        target = np.log([mags[j, l] for j, l in support])
        involved = np.unique(np.array(support).reshape(-1))
        sol, *_ = np.linalg.lstsq(design[:, involved], target, rcond=None)
        fitted[involved] = np.exp(sol)
    predicted = np.outer(fitted, fitted)
    residual = max((abs(predicted[j, l] - mags[j, l]) for j, l in pairs), default=0.0)
    if residual > tol:
        raise NonFactorizableError(
            f"|xi_jl| does not factorize into per-site factors (max deviation {residual:.3e})"
        )

    n = state.densities
    weight = fitted**2 * n
    ref = int(np.argmax(weight))
    phases = np.where(weight > 0, -np.angle(state.block[ref, :]), 0.0)
    phases[ref] = 0.0
    return LocalDecoherence(fitted, phases, float(residual))


def local_decoherence_lambda34(
    state: SingleExcitationState,
    cut: int,
    xi_local: Optional[Sequence[float]] = None,
    tol: float = FACTOR_TOL,
) -> float:
    """Doubly degenerate coherence eigenvalue under factorized decoherence.

    ``(sum_{l>m} |xi_l|^2 n_l) * (sum_{j<=m} |xi_j|^2 n_j)``. The per-site
    factors are fitted when ``xi_local`` is omitted. Both the magnitude
    factorization and the phase structure that makes the cross-cut coherence
    block rank one are checked; failure raises NonFactorizableError.
    """
    check_cut(state.length, cut)
    if xi_local is None:
        xi_abs = fit_local_decoherence(state, tol).magnitudes
    else:
        xi_abs = np.abs(np.asarray(xi_local, dtype=complex))
        if xi_abs.shape != (state.length,):
            raise ValueError(f"need one local factor per site, got shape {xi_abs.shape}")
        mags = state.xi_magnitudes
        off = ~np.eye(state.length, dtype=bool)
        dev = np.max(np.abs(np.outer(xi_abs, xi_abs) - mags)[off], initial=0.0)
        if dev > tol:
            raise NonFactorizableError(f"given local factors miss |xi_jl| by {dev:.3e}")

    cross = state.block[:cut, cut:]
    u, s, vh = np.linalg.svd(cross)
    rank_one = s[0] * np.outer(u[:, 0], vh[0])
    phase_dev = float(np.max(np.abs(cross - rank_one)))
    if phase_dev > tol:
        raise NonFactorizableError(
            f"cross-cut coherences are not rank one (deviation {phase_dev:.3e}); phases do not factorize"
        )

    n = state.densities
    right = float(np.sum(xi_abs[cut:] ** 2 * n[cut:]))
    left = float(np.sum(xi_abs[:cut] ** 2 * n[:cut]))
    return right * left


def charge_qubit_closed_form(n1: float, n2: float, xi12: complex) -> OsesSpectrum:
    """Two-site OSES ``{n1^2, n2^2, |xi12|^2 n1 n2, |xi12|^2 n1 n2}``."""
    if abs(n1 + n2 - 1.0) > 1e-10:
        raise ValueError(f"densities must sum to 1, got {n1 + n2:.12g}")
    coh = abs(xi12) ** 2 * n1 * n2
    return OsesSpectrum([n1**2, n2**2, coh, coh], cut=1)


@dataclass(frozen=True)
class FourSiteSpectrum:
    """Central-bond OSES of a four-site single-excitation state.

    ``left_purity = n1^2 + 2|xi12|^2 n1 n2 + n2^2`` and ``right_purity`` its
    mirror. ``coherence`` holds the two doubly degenerate cross-bond values
    (descending). ``local`` is the factorized-decoherence value, or None
    when the factors do not factorize.
    """

    left_purity: float
    right_purity: float
    coherence: np.ndarray
    local: Optional[float]

    def values(self) -> np.ndarray:
        vals = [self.left_purity, self.right_purity, *self.coherence, *self.coherence]
        return np.sort(vals)[::-1]


def four_site_closed_form(densities: Sequence[float], xi: np.ndarray) -> FourSiteSpectrum:
    """Central-bond spectrum from densities and the complex 4x4 decoherence matrix.

    Only ``|xi|`` enters the two purities; the cross-bond values also depend on
    the phases of ``xi``.
    """
    n = np.asarray(densities, dtype=float)
    if n.shape != (4,):
        raise ValueError(f"need four densities, got shape {n.shape}")
    if abs(n.sum() - 1.0) > 1e-10:
        raise ValueError(f"densities must sum to 1, got {n.sum():.12g}")
    xi = np.asarray(xi, dtype=complex)
    a12, a34 = abs(xi[0, 1]), abs(xi[2, 3])
    left = n[0] ** 2 + 2 * a12**2 * n[0] * n[1] + n[1] ** 2
    right = n[2] ** 2 + 2 * a34**2 * n[2] * n[3] + n[3] ** 2
    state = SingleExcitationState.from_densities_and_xi(n, xi)
    coh = coherence_values(state, 2)
    try:
        local = local_decoherence_lambda34(state, 2)
    except NonFactorizableError:
        local = None
    return FourSiteSpectrum(float(left), float(right), coh, local)
