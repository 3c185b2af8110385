"""One-sided cross-validation for local linear regression bandwidths."""

from .errors import (
    DegenerateKernelError,
    DomainError,
    IngestionError,
    KernelParameterError,
    NoMinimumError,
    NotFoundError,
    NumericError,
    OSCVError,
    SpecError,
)
from .kernels import DEFAULT_QUAD, Kernel, OneSidedKernel, QuadratureConfig, functionals, one_sided, parse_kernel
from .regression import Dataset
from .selection import BandwidthGrid, Method, MinimumChoice, SelectionRule, select_bandwidth

__version__ = "0.1.0"

__all__ = [
    "BandwidthGrid",
    "DEFAULT_QUAD",
    "Dataset",
    "DegenerateKernelError",
    "DomainError",
    "IngestionError",
    "Kernel",
    "KernelParameterError",
    "Method",
    "MinimumChoice",
    "NoMinimumError",
    "NotFoundError",
    "NumericError",
    "OSCVError",
    "OneSidedKernel",
    "QuadratureConfig",
    "SelectionRule",
    "SpecError",
    "functionals",
    "one_sided",
    "parse_kernel",
    "select_bandwidth",
    "__version__",
]
