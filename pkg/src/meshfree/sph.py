"""Smoothed particle hydrodynamics weights: anti-symmetric gradient and Morris Laplacian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, InvalidArgument
from .kernels import Kernel, kernel_eval
from .operators import OperatorWeights, as_batch
from .taylor import OperatorKind


@dataclass(frozen=True)
class SphConfig:
    """Kernel choice and scales.

    ``h = h_over_s * spacing``; the particle volume defaults to ``spacing**2``.
    """

    kernel: Kernel = Kernel.QUINTIC_SPLINE
    spacing: float = 1.0
    h_over_s: float = 1.5
    volume: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", Kernel.parse(self.kernel))
        if self.h_over_s <= 0 or self.spacing <= 0:
            raise InvalidArgument("h_over_s and spacing must be positive")
        if self.volume is not None and self.volume <= 0:
            raise InvalidArgument("particle volume must be positive")

    @property
    def h(self):
        return self.h_over_s * self.spacing

    @property
    def V(self):
        return self.spacing ** 2 if self.volume is None else self.volume

    @property
    def support_radius(self):
        return self.kernel.support * self.h


def _radial(batch, config):
    if batch.width == 0 or np.any(batch.counts == 0):
        raise DegenerateGeometry("SPH weights need at least one neighbour per stencil")
    off = batch.offsets
    r = np.hypot(off[..., 0], off[..., 1])
    if np.any((r == 0) & batch.mask):
        raise DegenerateGeometry("zero-length offset in stencil")
    r_safe = np.where(batch.mask, r, 1.0)
    _, dW = kernel_eval(config.kernel, r_safe / config.h, config.h)
    dW = np.where(batch.mask, dW, 0.0)
    return off, r_safe, dW


def sph_gradient_weights(stencil, config):
    """``w_ji = grad_i W(x_ji, h) V_j`` for the x and y components.

    ``grad_i`` differentiates with respect to the centre position, which for a
    radial kernel is ``-W'(r) x_ji / r``.
    """
    batch, single = as_batch(stencil)
    off, r, dW = _radial(batch, config)
    g = -dW / r * config.V
    wx, wy = g * off[..., 0], g * off[..., 1]
    if single:
        wx, wy = wx[0], wy[0]
    return (OperatorWeights(wx, OperatorKind.DX, "SPH"),
            OperatorWeights(wy, OperatorKind.DY, "SPH"))


def sph_laplacian_weights(stencil, config):
    """Morris Laplacian ``w_ji = -2 x_ji . grad W(x_ji) V_j / |x_ji|^2``.

    Here ``grad W(x_ji) = W'(r) x_ji / r`` is the kernel gradient in the
    offset argument, giving ``w_ji = -2 W'(r) V_j / r >= 0`` for kernels that
    decrease monotonically.
    """
    batch, single = as_batch(stencil)
    off, r, dW = _radial(batch, config)
    w = -2.0 * dW / r * config.V
    w = np.where(batch.mask, w, 0.0)
    return OperatorWeights(w[0] if single else w, OperatorKind.LAPLACIAN, "SPH")


def sph_weights(stencil, config, kind):
    kind = OperatorKind.parse(kind)
    if kind is OperatorKind.DX:
        return sph_gradient_weights(stencil, config)[0]
    if kind is OperatorKind.DY:
        return sph_gradient_weights(stencil, config)[1]
    if kind is OperatorKind.LAPLACIAN:
        return sph_laplacian_weights(stencil, config)
    raise InvalidArgument(f"SPH provides no {kind.label} operator")
