"""Matrix product state of the vectorized density matrix, evolved by TEBD.

Each site tensor carries legs ``(left bond, operator index, right bond)``
where the operator index runs over the sigma_e, sigma_f, sigma_+, sigma_-
basis. The tensors always describe the unit-norm vector ``|rho> / N``; the
norm ``N = sqrt(<rho|rho>) = sqrt(Tr rho^2)`` is tracked separately, because
dephasing changes the purity and that change must survive renormalization.

OSES values come out as ``Lambda_i = s_i^2 * N^2`` where ``s_i`` are the
normalized Schmidt values at the bond.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np
import scipy.linalg

from .dynamics import LindbladModel, _step_count
from .errors import TruncationBudgetError
from .hilbert import (
    GAMMA_BASIS,
    OPERATOR_DIM,
    FanoTensor,
    check_cut,
    fano_decompose,
    fano_reconstruct,
    parse_basis_string,
)
from .oses import OsesSpectrum

DEFAULT_EPS = 1e-24

_TRACE_VECTOR = np.array([np.trace(g) for g in GAMMA_BASIS])
_NUMBER_VECTOR = np.array([np.trace(g @ np.diag([0.0, 1.0])) for g in GAMMA_BASIS])


def _truncate(s: np.ndarray, chi: int, eps: float) -> int:
    total = np.sum(s**2)
    if total == 0:
        return 1
    keep = int(np.count_nonzero(s**2 > eps * total))
    return max(1, min(chi, keep))


@dataclass
class VectorizedMps:
    """Mixed-canonical MPS of ``|rho>`` with orthogonality center at ``center``."""

    tensors: List[np.ndarray]
    norm: float
    chi: int
    eps: float = DEFAULT_EPS
    center: int = 0
    bond_spectra: List[np.ndarray] = field(default_factory=list)
    discarded_weight: float = 0.0
    budget: Optional[float] = None

    def __post_init__(self):
        if int(self.chi) != self.chi or self.chi < 1:
            raise ValueError(f"bond dimension cap must be >= 1, got {self.chi!r}")
        if not self.bond_spectra:
            self.bond_spectra = [np.ones(1) for _ in range(self.length - 1)]

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dimensions(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def purity(self) -> float:
        return self.norm**2

    def copy(self) -> "VectorizedMps":
        return VectorizedMps(
            [t.copy() for t in self.tensors],
            self.norm,
            self.chi,
            self.eps,
            self.center,
            [s.copy() for s in self.bond_spectra],
            self.discarded_weight,
            self.budget,
        )

    def move_center(self, site: int) -> None:
        """Shift the orthogonality center to ``site`` (0-based) by QR sweeps."""
        if not 0 <= site < self.length:
            raise ValueError(f"site must be in 0..{self.length - 1}, got {site}")
        while self.center < site:
            c = self.center
            a = self.tensors[c]
            q, r = np.linalg.qr(a.reshape(-1, a.shape[2]))
            self.tensors[c] = q.reshape(a.shape[0], OPERATOR_DIM, -1)
            self.tensors[c + 1] = np.tensordot(r, self.tensors[c + 1], axes=(1, 0))
            self.center += 1
        while self.center > site:
            c = self.center
            a = self.tensors[c]
            q, r = np.linalg.qr(a.reshape(a.shape[0], -1).T)
            self.tensors[c] = q.T.reshape(-1, OPERATOR_DIM, a.shape[2])
            self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], r.T, axes=(2, 0))
            self.center -= 1

    def canonical_deviation(self) -> float:
        """Largest deviation from isometry of the tensors left/right of the center."""
        dev = 0.0
        for i, a in enumerate(self.tensors):
            if i < self.center:
                mat = a.reshape(-1, a.shape[2])
                gram = mat.conj().T @ mat
            elif i > self.center:
                mat = a.reshape(a.shape[0], -1)
                gram = mat @ mat.conj().T
            else:
                continue
            dev = max(dev, float(np.max(np.abs(gram - np.eye(gram.shape[0])))))
        return dev

    def split_bond(self, bond: int, theta: np.ndarray) -> None:
        """SVD a two-site tensor back onto sites ``bond, bond+1``; center ends at ``bond+1``."""
        chi_l, _, _, chi_r = theta.shape
        u, s, vh = np.linalg.svd(theta.reshape(chi_l * OPERATOR_DIM, OPERATOR_DIM * chi_r), full_matrices=False)
        total = float(np.sum(s**2))
        k = _truncate(s, self.chi, self.eps)
        kept = float(np.sum(s[:k] ** 2))
        if total > 0:
            self.discarded_weight += (total - kept) / total
        if self.budget is not None and self.discarded_weight > self.budget:
            raise TruncationBudgetError(
                f"discarded weight {self.discarded_weight:.3e} exceeds budget {self.budget:.3e}"
            )
        scale = np.sqrt(kept) if kept > 0 else 1.0
        self.norm *= scale
        s_kept = s[:k] / scale
        self.tensors[bond] = u[:, :k].reshape(chi_l, OPERATOR_DIM, k)
        self.tensors[bond + 1] = (s_kept[:, None] * vh[:k]).reshape(k, OPERATOR_DIM, chi_r)
        self.bond_spectra[bond] = s_kept
        self.center = bond + 1

    def apply_gate(self, bond: int, gate: np.ndarray) -> None:
        """Apply a 16x16 superoperator gate to sites ``bond, bond+1`` (0-based)."""
        if self.center not in (bond, bond + 1):
            self.move_center(bond if self.center < bond else bond + 1)
        theta = np.tensordot(self.tensors[bond], self.tensors[bond + 1], axes=(2, 0))
        gate4 = gate.reshape((OPERATOR_DIM,) * 4)
        theta = np.einsum("jkab,xaby->xjky", gate4, theta)
        self.split_bond(bond, theta)

    def contract(self, local_vectors) -> complex:
        """``N * sum_i P_i prod_n w_n[i_n]`` for per-site weight vectors ``w_n``."""
        env = np.ones((1,), dtype=complex)
        for a, w in zip(self.tensors, local_vectors):
            env = env @ np.tensordot(a, w, axes=(1, 0))
        return complex(self.norm * env[0])

    def coefficient(self, labels) -> complex:
        indices = parse_basis_string(labels)
        if len(indices) != self.length:
            raise ValueError(f"expected {self.length} labels, got {len(indices)}")
        return self.contract(np.eye(OPERATOR_DIM)[list(indices)])

    def trace(self) -> complex:
        return self.contract([_TRACE_VECTOR] * self.length)

    def densities(self) -> np.ndarray:
        out = np.empty(self.length)
        for j in range(self.length):
            vecs = [_TRACE_VECTOR] * self.length
            vecs[j] = _NUMBER_VECTOR
            out[j] = self.contract(vecs).real
        return out

    def to_fano(self) -> FanoTensor:
        tensor = self.tensors[0]
        for a in self.tensors[1:]:
            tensor = np.tensordot(tensor, a, axes=(tensor.ndim - 1, 0))
        return FanoTensor(self.norm * tensor.reshape((OPERATOR_DIM,) * self.length))

    def to_density_matrix(self) -> np.ndarray:
        return fano_reconstruct(self.to_fano())


def from_density_matrix(
    rho: np.ndarray, chi: int, eps: float = DEFAULT_EPS, budget: Optional[float] = None
) -> VectorizedMps:
    """Build the MPS by successive Schmidt decompositions of the Fano tensor.

    Exact (up to the ``eps`` cutoff) when ``chi >= 4**min(m, L-m)`` at every bond.
    """
    if int(chi) != chi or chi < 1:
        raise ValueError(f"bond dimension cap must be >= 1, got {chi!r}")
    fano = fano_decompose(rho)
    length = fano.length
    coeffs = np.array(fano.coefficients)
    norm = float(np.linalg.norm(coeffs))
    mps = VectorizedMps(
        [np.ones((1, OPERATOR_DIM, 1), dtype=complex) for _ in range(length)],
        norm,
        int(chi),
        eps,
        center=0,
        budget=budget,
    )
    rest = (coeffs / norm).reshape(1, -1)
    for site in range(length - 1):
        chi_l = rest.shape[0]
        theta = rest.reshape(chi_l, OPERATOR_DIM, OPERATOR_DIM, -1)
        mps.split_bond(site, theta)
        rest = mps.tensors[site + 1].reshape(mps.tensors[site + 1].shape[0], -1)
    mps.tensors[-1] = mps.tensors[-1].reshape(-1, OPERATOR_DIM, 1)
    return mps


def _two_site_operator_basis() -> np.ndarray:
    return np.array([np.kron(a, b) for a in GAMMA_BASIS for b in GAMMA_BASIS])


@lru_cache(maxsize=64)
def bond_liouvillian(hopping: float, gamma: float, weight_left: float, weight_right: float) -> np.ndarray:
    """16x16 matrix of the bond generator in the two-site operator basis.

    The bond carries the hopping term and a fraction ``weight_*`` of the
    on-site dephasing of each of its two sites.
    """
    sp = GAMMA_BASIS[2]
    sm = GAMMA_BASIS[3]
    num = np.diag([0.0, 1.0])
    eye = np.eye(2)
    ham = -hopping * (np.kron(sp, sm) + np.kron(sm, sp))
    jumps = [(weight_left, np.kron(num, eye)), (weight_right, np.kron(eye, num))]

    def generator(x):
        out = -1j * (ham @ x - x @ ham)
        for w, n in jumps:
            out += gamma * w * (2 * n @ x @ n - n @ n @ x - x @ n @ n)
        return out

    basis = _two_site_operator_basis()
    images = np.array([generator(b) for b in basis])
    # S[j, k] = Tr(B_j^dagger L(B_k))
    return np.einsum("jab,kab->jk", basis.conj(), images)


def _site_weights(length: int) -> np.ndarray:
    bonds_per_site = np.full(length, 2.0)
    bonds_per_site[[0, -1]] = 1.0
    return 1.0 / bonds_per_site


def bond_gates(model: LindbladModel, tau: float) -> List[np.ndarray]:
    """``exp(L_b * tau)`` for every bond b = 0..L-2."""
    weights = _site_weights(model.length)
    gates = []
    for b in range(model.length - 1):
        gen = bond_liouvillian(float(model.hopping), float(model.gamma), weights[b], weights[b + 1])
        gates.append(scipy.linalg.expm(gen * tau))
    return gates


def tebd_step(
    mps: VectorizedMps, model: LindbladModel, dt: float, gates: Optional[tuple] = None
) -> VectorizedMps:
    """One second-order Trotter step: odd bonds for dt/2, even bonds for dt, odd bonds for dt/2.

    Returns a new MPS; the input is left untouched. ``gates`` may carry the
    precomputed ``(bond_gates(model, dt/2), bond_gates(model, dt))`` pair.
    """
    if model.length != mps.length:
        raise ValueError(f"model has {model.length} sites but the MPS has {mps.length}")
    if model.length < 2:
        raise ValueError("TEBD needs at least two sites")
    half, full = gates if gates is not None else (bond_gates(model, dt / 2), bond_gates(model, dt))
    out = mps.copy()
    odd = range(0, model.length - 1, 2)
    even = range(1, model.length - 1, 2)
    for b in odd:
        out.apply_gate(b, half[b])
    for b in even:
        out.apply_gate(b, full[b])
    for b in odd:
        out.apply_gate(b, half[b])
    return out


def oses_at_bond(mps: VectorizedMps, cut: int) -> OsesSpectrum:
    """OSES across bond ``cut`` (A1 = sites 1..cut), rescaled so that it sums to ``N^2``."""
    check_cut(mps.length, cut)
    work = mps.copy()
    work.move_center(cut - 1)
    center = work.tensors[cut - 1]
    s = np.linalg.svd(center.reshape(-1, center.shape[2]), compute_uv=False)
    weights = s**2 / np.sum(s**2)
    return OsesSpectrum(weights * mps.norm**2, cut)


@dataclass(frozen=True)
class MpsTrajectory:
    times: np.ndarray
    states: List[VectorizedMps]

    def __len__(self):
        return len(self.times)

    @property
    def discarded_weight(self) -> np.ndarray:
        return np.array([s.discarded_weight for s in self.states])


def evolve_tebd(
    mps: VectorizedMps, model: LindbladModel, t_max: float, dt: float, stride: int = 10
) -> MpsTrajectory:
    """Repeated :func:`tebd_step`, sampling every ``stride`` steps plus the final time."""
    if int(stride) != stride or stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride!r}")
    steps = _step_count(t_max, dt)
    gates = (bond_gates(model, dt / 2), bond_gates(model, dt))
    state = mps.copy()
    times, states = [0.0], [state.copy()]
    for k in range(1, steps + 1):
        state = tebd_step(state, model, dt, gates)
        if k % stride == 0 or k == steps:
            times.append(k * dt)
            states.append(state.copy())
    return MpsTrajectory(np.array(times), states)
