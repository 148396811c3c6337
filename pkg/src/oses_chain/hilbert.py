"""Chain Hilbert-space bookkeeping and the local operator basis.

Sites are numbered 1..L from the left. A computational basis state
``|n_1 ... n_L>`` with ``n_i in {0, 1}`` (0 = empty, 1 = occupied) sits at
integer index ``sum_i n_i * 2**(L - i)``, i.e. site 1 is the most
significant bit.

The local operator basis is the set of 2x2 matrix units, in the order

    0: sigma_e = |0><0|   (empty site)
    1: sigma_f = |1><1|   (full site)
    2: sigma_+ = |1><0|   (single 1 in the lower-left entry)
    3: sigma_- = |0><1|   (single 1 in the upper-right entry)

which is orthonormal under the plain trace, so Fano coefficients are
extracted without a 1/d factor.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

LOCAL_DIM = 2
OPERATOR_DIM = LOCAL_DIM**2

BASIS_LABELS = ("e", "f", "+", "-")
E, F, PLUS, MINUS = range(4)

GAMMA_BASIS = np.array(
    [
        [[1, 0], [0, 0]],
        [[0, 0], [0, 1]],
        [[0, 0], [1, 0]],
        [[0, 1], [0, 0]],
    ],
    dtype=complex,
)
GAMMA_BASIS.setflags(write=False)

# Row k holds conj(Gamma_k) flattened, so that P_k = sum_rc conj(Gamma_k)[r,c] rho[r,c].
_PROJECT = GAMMA_BASIS.conj().reshape(OPERATOR_DIM, OPERATOR_DIM)
# Column k holds Gamma_k flattened, so that rho[r,c] = sum_k Gamma_k[r,c] P_k.
_EXPAND = GAMMA_BASIS.reshape(OPERATOR_DIM, OPERATOR_DIM).T


@dataclass(frozen=True)
class ChainGeometry:
    """Chain of ``length`` spin-1/2 sites with an optional bond cut.

    ``cut = m`` splits the chain into A1 = sites 1..m and A2 = sites m+1..L.
    """

    length: int
    cut: Optional[int] = None

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise ValueError(f"chain length must be a positive integer, got {self.length!r}")
        if self.cut is not None:
            check_cut(self.length, self.cut)

    @property
    def dim(self) -> int:
        return LOCAL_DIM**self.length

    @property
    def central_cut(self) -> int:
        if self.length < 2:
            raise ValueError("a single site has no bond to cut")
        return self.length // 2


def check_cut(length: int, cut: int) -> None:
    if int(cut) != cut or not 1 <= cut <= length - 1:
        raise ValueError(f"cut must satisfy 1 <= m <= L-1 = {length - 1}, got {cut!r}")


def chain_length(dim: int) -> int:
    """Number of sites for a Hilbert-space dimension ``dim = 2**L``."""
    length = int(round(np.log2(dim))) if dim > 0 else -1
    if length < 1 or 2**length != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return length


def gamma_inner(i: int, j: int) -> float:
    """Plain-trace inner product ``Tr(Gamma_i^dagger Gamma_j)`` of two basis matrices."""
    for k in (i, j):
        if int(k) != k or not 0 <= k < OPERATOR_DIM:
            raise ValueError(f"basis index must be in 0..3, got {k!r}")
    return float(np.trace(GAMMA_BASIS[i].conj().T @ GAMMA_BASIS[j]).real)


def occupations(length: int) -> np.ndarray:
    """Occupation table of shape ``(2**L, L)``; row ``a`` lists ``n_i`` of basis state ``a``."""
    states = np.arange(LOCAL_DIM**length)[:, None]
    shifts = np.arange(length - 1, -1, -1)[None, :]
    return (states >> shifts) & 1


def site_state_index(length: int, site: int) -> int:
    """Hilbert-space index of the state with one particle on ``site`` (1-based)."""
    if not 1 <= site <= length:
        raise ValueError(f"site must be in 1..{length}, got {site!r}")
    return 1 << (length - site)


def single_particle_indices(length: int) -> np.ndarray:
    """Hilbert-space indices of ``|1>, ..., |L>`` in site order."""
    return np.array([site_state_index(length, j) for j in range(1, length + 1)])


def product_state(occupation: Sequence[int]) -> np.ndarray:
    """Pure-state density matrix of a computational basis configuration."""
    length = len(occupation)
    index = sum(int(n) << (length - 1 - i) for i, n in enumerate(occupation))
    rho = np.zeros((LOCAL_DIM**length,) * 2, dtype=complex)
    rho[index, index] = 1.0
    return rho


def density_matrix_violation(
    rho: np.ndarray,
    herm_tol: float = 1e-12,
    trace_tol: float = 1e-10,
    psd_tol: float = 1e-9,
) -> Optional[str]:
    """Describe the first violated density-matrix invariant, or return None."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return f"not a square matrix: shape {rho.shape}"
    if not np.all(np.isfinite(rho)):
        return "non-finite entries"
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        return f"not Hermitian (max |rho - rho^dagger| = {herm:.3e})"
    trace_dev = abs(np.trace(rho) - 1.0)
    if trace_dev > trace_tol:
        return f"trace deviates from 1 by {trace_dev:.3e}"
    min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if min_eig < -psd_tol:
        return f"not positive semidefinite (min eigenvalue {min_eig:.3e})"
    return None


def validate_density_matrix(rho: np.ndarray, **tolerances) -> np.ndarray:
    """Return ``rho`` as a complex array, raising ValueError if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    reason = density_matrix_violation(rho, **tolerances)
    if reason is not None:
        raise ValueError(f"invalid density matrix: {reason}")
    chain_length(rho.shape[0])
    return rho


Labels = Union[str, Sequence[int]]


def parse_basis_string(labels: Labels) -> tuple:
    """Convert ``"e+f-"``-style labels (or an index sequence) to basis indices."""
    if isinstance(labels, str):
        try:
            return tuple(BASIS_LABELS.index(ch) for ch in labels)
        except ValueError:
            raise ValueError(f"unknown basis label in {labels!r}; allowed: e f + -") from None
    indices = tuple(int(k) for k in labels)
    if any(not 0 <= k < OPERATOR_DIM for k in indices):
        raise ValueError(f"basis indices must be in 0..3, got {indices}")
    return indices


def basis_string(indices: Sequence[int]) -> str:
    return "".join(BASIS_LABELS[k] for k in indices)


def single_excitation_index(
    length: int, j: int, l: Optional[int] = None, sign: Optional[str] = None
) -> tuple:
    """Operator-basis string of a single-excitation coefficient.

    With only ``j``: sigma_f on site ``j`` and sigma_e elsewhere (the density
    ``P_{j=f}``). With ``l`` and ``sign`` (``"+"`` or ``"-"``): sigma_sign on
    site ``j``, the opposite ladder matrix on ``l`` (the coherence
    ``P_{j=sign, l=-sign}``).
    """
    sites = [j] if l is None else [j, l]
    for site in sites:
        if int(site) != site or not 1 <= site <= length:
            raise ValueError(f"site must be in 1..{length}, got {site!r}")
    string = [E] * length
    if l is None:
        if sign is not None:
            raise ValueError("sign is only meaningful for the pair form")
        string[j - 1] = F
        return tuple(string)
    if j == l:
        raise ValueError("coherence coefficient needs two distinct sites")
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    string[j - 1], string[l - 1] = (PLUS, MINUS) if sign == "+" else (MINUS, PLUS)
    return tuple(string)


@dataclass(frozen=True)
class FanoTensor:
    """Coefficients ``P[i_1, ..., i_L]`` of a state in the product operator basis.

    ``coefficients`` has shape ``(4,) * L``. Flattened in C order, ``i_1`` is
    the most significant base-4 digit.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.ndim < 1 or any(n != OPERATOR_DIM for n in coeffs.shape):
            raise ValueError(f"Fano coefficients must have shape (4,)*L, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("Fano coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def length(self) -> int:
        return self.coefficients.ndim

    @property
    def geometry(self) -> ChainGeometry:
        return ChainGeometry(self.length)

    def __getitem__(self, labels: Labels) -> complex:
        indices = parse_basis_string(labels)
        if len(indices) != self.length:
            raise ValueError(f"expected {self.length} labels, got {len(indices)}")
        return complex(self.coefficients[indices])

    def norm_squared(self) -> float:
        """``sum |P|^2``, equal to the purity ``Tr rho^2`` of the represented state."""
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def matrix(self, cut: int) -> np.ndarray:
        """Coefficients reshaped to ``4**m x 4**(L - m)`` across bond ``m``."""
        check_cut(self.length, cut)
        return self.coefficients.reshape(OPERATOR_DIM**cut, -1)


def _apply_per_site(tensor: np.ndarray, local: np.ndarray) -> np.ndarray:
    # Contract axis n of the (4,)*L tensor with local[:, :] for every n.
    for axis in range(tensor.ndim):
        tensor = np.moveaxis(np.tensordot(local, tensor, axes=([1], [axis])), 0, axis)
    return tensor


def _interleaved(rho: np.ndarray, length: int) -> np.ndarray:
    # (r_1..r_L, c_1..c_L) -> (r_1 c_1, ..., r_L c_L) merged into 4-dim site axes.
    tensor = rho.reshape((LOCAL_DIM,) * (2 * length))
    order = [ax for site in range(length) for ax in (site, length + site)]
    return tensor.transpose(order).reshape((OPERATOR_DIM,) * length)


def fano_decompose(rho: np.ndarray, geometry: Optional[ChainGeometry] = None) -> FanoTensor:
    """Expand ``rho`` as ``P_{i_1...i_L} = Tr[(Gamma_{i_1} x ... x Gamma_{i_L})^dagger rho]``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    length = chain_length(rho.shape[0])
    if geometry is not None and geometry.length != length:
        raise ValueError(
            f"matrix of dimension {rho.shape[0]} does not match a {geometry.length}-site chain"
        )
    return FanoTensor(_apply_per_site(_interleaved(rho, length), _PROJECT))


def fano_reconstruct(fano: Union[FanoTensor, np.ndarray]) -> np.ndarray:
    """Inverse of :func:`fano_decompose`: ``rho = sum_i P_i Gamma_{i_1} x ... x Gamma_{i_L}``."""
    if not isinstance(fano, FanoTensor):
        fano = FanoTensor(fano)
    length = fano.length
    entries = _apply_per_site(np.array(fano.coefficients), _EXPAND)
    entries = entries.reshape((LOCAL_DIM,) * (2 * length))
    # Undo the interleaving: axes are (r_1, c_1, r_2, c_2, ...).
    order = list(range(0, 2 * length, 2)) + list(range(1, 2 * length, 2))
    dim = LOCAL_DIM**length
    return entries.transpose(order).reshape(dim, dim)
