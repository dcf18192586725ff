"""Complex spectral attention blocks."""

from shno.attention.activations import SMU_ALPHA, complex_smu, csoftmax, smu
from shno.attention.layers import (
    LaplacianDiagnostics,
    LaplacianState,
    complex_linear,
    grsa,
    grsa_parameter_count,
    init_grsa,
    init_smhsa,
    laplacian_diagnostics,
    parametric_laplacian,
    smhsa,
    smhsa_parameter_count,
)

__all__ = [
    "SMU_ALPHA",
    "LaplacianDiagnostics",
    "LaplacianState",
    "complex_linear",
    "complex_smu",
    "csoftmax",
    "grsa",
    "grsa_parameter_count",
    "init_grsa",
    "init_smhsa",
    "laplacian_diagnostics",
    "parametric_laplacian",
    "smhsa",
    "smhsa_parameter_count",
    "smu",
]
