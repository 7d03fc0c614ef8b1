"""Fastest distributed consensus averaging weights on path networks."""

from .errors import ConsistencyError, FdcError, NumericalError, ValidationError
from .path_model import PathNetwork, TridiagonalMatrix, WeightAssignment, build_path, weight_matrix
from .tridiag_spectra import SpectralSummary, eigenvalues, slem
from .weight_optimizer import OptimizationResult, OptimizerParams, optimize_weights
from .dual_certificate import DualCertificate, build_certificate, verify_certificate
from .consensus_engine import SimulationTrace, estimate_rate, iterate

__all__ = [
    "ConsistencyError",
    "DualCertificate",
    "FdcError",
    "NumericalError",
    "OptimizationResult",
    "OptimizerParams",
    "PathNetwork",
    "SimulationTrace",
    "SpectralSummary",
    "TridiagonalMatrix",
    "ValidationError",
    "WeightAssignment",
    "build_certificate",
    "build_path",
    "eigenvalues",
    "estimate_rate",
    "iterate",
    "optimize_weights",
    "slem",
    "verify_certificate",
    "weight_matrix",
]
