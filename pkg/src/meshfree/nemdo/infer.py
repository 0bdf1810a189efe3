"""Physical operator weights from trained networks.

A network predicts weights for the normalised offsets ``x_hat = x / d_n``;
dividing by ``d_n**m`` restores physical units. The y-derivative reuses an
x-derivative model: feeding the rotated offsets ``(y, -x)`` turns the x-slot
target into the y-slot target and leaves every higher target at zero.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..operators import OperatorWeights, as_batch
from ..taylor import OperatorKind
from .checkpoint import load_checkpoint
from .model import NemdoNet


class NemdoModel:
    """A parameter vector bound to its config."""

    def __init__(self, params, config):
        self.params = np.asarray(params, dtype=np.float64)
        self.config = config
        self.net = NemdoNet(config)
        if self.params.shape != (self.net.n_params(),):
            raise InvalidArgument("parameter vector does not match the model config")

    @classmethod
    def load(cls, path, expect=None):
        return cls(*load_checkpoint(path, expect))

    @property
    def kind(self):
        return self.config.kind

    def supports(self, kind):
        kind = OperatorKind.parse(kind)
        if kind is self.kind:
            return True
        return self.kind is OperatorKind.DX and kind is OperatorKind.DY

    def normalized_weights(self, offsets_hat, kind=None):
        kind = self.kind if kind is None else OperatorKind.parse(kind)
        if not self.supports(kind):
            raise InvalidArgument(f"a {self.kind.label} model cannot produce {kind.label} weights")
        x = np.asarray(offsets_hat, dtype=float)
        if kind is OperatorKind.DY and self.kind is OperatorKind.DX:
            x = np.stack([x[..., 1], -x[..., 0]], axis=-1)
        return self.net.forward(self.params, x)


def infer_weights(model, stencil, kind=None):
    """Weights ``w_hat * d_n**-m`` for a :class:`Stencil` or a full :class:`StencilBatch`."""
    kind = model.kind if kind is None else OperatorKind.parse(kind)
    batch, single = as_batch(stencil)
    n = model.config.stencil_n
    if batch.width != n or not np.all(batch.mask):
        raise InvalidArgument(f"stencils must have exactly {n} neighbours for this model")
    if np.any(batch.d_n <= 0):
        raise InvalidArgument("degenerate stencil with zero extent")
    w_hat = model.normalized_weights(batch.normalized_offsets(), kind)
    w = w_hat / batch.d_n[:, None] ** kind.m
    if single:
        return OperatorWeights(w[0], kind, "NeMDO")
    return OperatorWeights(w, kind, "NeMDO")
