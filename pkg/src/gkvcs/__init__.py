"""Nanoparticle boson-fermion Hamiltonians and their Gazeau-Klauder vector coherent states.

Modules: ``fock`` (truncated Fock space), ``model`` (parameters and closed-form
spectra), ``assembly`` (matrices and analytic eigenvectors), ``vcs``
(coherent-state families), ``verify`` (quadrature and property checks) and
``cli`` (campaigns and reports).
"""
__version__ = "0.1.0"

from .fock import ContractError, ParameterError, State, TruncationSpec  # noqa: E402
from .model import ModelParams, SectorId  # noqa: E402
from .vcs import GKParams, TailBoundError  # noqa: E402

__all__ = [
    "ContractError",
    "GKParams",
    "ModelParams",
    "ParameterError",
    "SectorId",
    "State",
    "TailBoundError",
    "TruncationSpec",
    "__version__",
]
