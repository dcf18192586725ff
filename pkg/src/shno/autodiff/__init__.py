"""Reverse-mode automatic differentiation over dense float64 tensors."""

from shno.autodiff.complex import (
    ComplexTensor,
    complex_conjugate_transpose,
    complex_matmul,
    hadamard,
)
from shno.autodiff.gradcheck import grad_check, grad_check_params, relative_error
from shno.autodiff.parameters import ParameterScope, ParameterStore
from shno.autodiff.tensor import Function, Gradients, Tape, Tensor, backward, no_grad

__all__ = [
    "ComplexTensor",
    "Function",
    "Gradients",
    "ParameterScope",
    "ParameterStore",
    "Tape",
    "Tensor",
    "backward",
    "complex_conjugate_transpose",
    "complex_matmul",
    "grad_check",
    "grad_check_params",
    "hadamard",
    "no_grad",
    "relative_error",
]
