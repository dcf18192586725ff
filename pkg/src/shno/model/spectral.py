"""Differentiable spherical harmonic transforms.

Both directions are linear, so their backward rules are the adjoint maps built
from the same :class:`~shno.sht.transform.TransformPlan` tables.
"""

from __future__ import annotations

import numpy as np

from shno.autodiff import ops
from shno.autodiff.complex import ComplexTensor
from shno.autodiff.tensor import Context, Function, Tensor
from shno.errors import ShapeError
from shno.sht.transform import TransformPlan


class SHTForward(Function):
    """Grid (..., nlat, nlon) -> stacked (re, im) coefficients (2, ..., K)."""

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, plan: TransformPlan) -> np.ndarray:
        if x.shape[-2:] != plan.grid.shape:
            raise ShapeError(f"SHT input {x.shape} does not end in grid shape {plan.grid.shape}")
        ctx.save(plan=plan)
        coeffs = plan.analyze(x)
        return np.stack([coeffs.real, coeffs.imag])

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray]:
        plan: TransformPlan = ctx.data["plan"]
        g = grad[0] + 1j * grad[1]
        # imaginary parts of m = 0 coefficients are pinned to zero
        g[..., plan.groups[0]] = grad[0][..., plan.groups[0]]
        gm = plan.norm * plan.gather(g, plan.pw)
        gm[..., 1:] *= 0.5
        return (plan.to_grid(gm),)


class SHTInverse(Function):
    """(re, im) coefficients (..., K) -> grid (..., nlat, nlon)."""

    @staticmethod
    def forward(ctx: Context, re: np.ndarray, im: np.ndarray, plan: TransformPlan) -> np.ndarray:
        if re.shape[-1] != plan.trunc.size:
            raise ShapeError(f"coefficients {re.shape} do not have {plan.trunc.size} modes for {plan.trunc}")
        ctx.save(plan=plan)
        return plan.synthesize(re + 1j * im)

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        plan: TransformPlan = ctx.data["plan"]
        gc = plan.project(plan.fourier(grad), plan.p) / plan.norm * plan.trunc.multiplicity
        return gc.real.copy(), gc.imag.copy()


def sht(x: Tensor, plan: TransformPlan) -> ComplexTensor:
    """Taped forward transform of the last two axes."""
    stacked = SHTForward.apply(x, plan=plan)
    return ComplexTensor(ops.slice_(stacked, 0), ops.slice_(stacked, 1))


def isht(c: ComplexTensor, plan: TransformPlan) -> Tensor:
    """Taped inverse transform of packed coefficients on the last axis."""
    return SHTInverse.apply(c.re, c.im, plan=plan)
