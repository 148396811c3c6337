"""Operator-space entanglement spectra of open spin-1/2 chains."""

from .analytic import (
    BlockSpectrum,
    SingleExcitationState,
    block_spectrum,
    charge_qubit_closed_form,
    four_site_closed_form,
)
from .dynamics import LindbladModel, evolve, extract_xi, particle_on_site
from .hilbert import ChainGeometry, FanoTensor, fano_decompose, fano_reconstruct
from .mps import VectorizedMps, from_density_matrix, oses_at_bond, tebd_step
from .oses import OsesSpectrum, build_c_matrix, oses_spectrum, osee, purity

__version__ = "0.1.0"
