"""Uniform access to SPH, LABFM and learned operators.

A provider owns its stencil policy (radius for SPH, k-nearest for LABFM and
NeMDO) and turns a cloud plus a derivative kind into difference-form
weights aligned with that stencil.
"""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..geometry import knn_stencils, radius_stencils
from ..kernels import Kernel
from ..labfm import LabfmConfig, labfm_weights
from ..nemdo.infer import NemdoModel, infer_weights
from ..operators import OperatorWeights
from ..sph import SphConfig, sph_weights
from ..taylor import OperatorKind, basis_size

# knn stencil sizes for LABFM by order; roughly 2.5x the basis size
LABFM_STENCIL_N = {1: 12, 2: 35, 3: 40, 4: 60, 5: 70, 6: 90}


class OperatorProvider:
    name = "provider"
    policy = ""

    def stencils(self, cloud, centers=None):
        raise NotImplementedError

    def weights(self, batch, kind, cloud):
        """Weights for every stencil of ``batch`` (rows may be flagged invalid)."""
        raise NotImplementedError

    def supports(self, kind):
        return True

    def moment_scale(self, batch, cloud):
        """Length scale used to report dimensionless moments for this provider."""
        return batch.d_n

    def __call__(self, cloud, node, kind):
        batch = self.stencils(cloud, [node])
        w = self.weights(batch, kind, cloud)
        return OperatorWeights(w.weights[0][batch.mask[0]], w.kind, w.provenance)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} ({self.policy})>"


class SphProvider(OperatorProvider):
    """Kernel gradient and Morris Laplacian with ``h = h_over_s * s``; all nodes within the support."""

    def __init__(self, kernel=Kernel.QUINTIC_SPLINE, h_over_s=1.5):
        self.kernel = Kernel.parse(kernel)
        self.h_over_s = h_over_s
        self.name = f"sph-{self.kernel.value}"
        self.policy = f"radius {self.kernel.support * h_over_s:g}s"

    def config(self, cloud):
        return SphConfig(self.kernel, cloud.spacing, self.h_over_s)

    def supports(self, kind):
        return OperatorKind.parse(kind) is not OperatorKind.HYPERVISCOUS

    def stencils(self, cloud, centers=None):
        return radius_stencils(cloud, self.config(cloud).support_radius, centers)

    def weights(self, batch, kind, cloud):
        return sph_weights(batch, self.config(cloud), kind)

    def moment_scale(self, batch, cloud):
        return np.full(len(batch), self.config(cloud).h)


class LabfmProvider(OperatorProvider):
    def __init__(self, order_p=2, stencil_n=None, h_ratio=0.5):
        self.config = LabfmConfig(order_p=order_p, h_ratio=h_ratio)
        self.stencil_n = stencil_n or LABFM_STENCIL_N.get(order_p, int(2.5 * basis_size(order_p)))
        self.name = f"labfm-p{order_p}"
        self.policy = f"knn {self.stencil_n}"

    def supports(self, kind):
        return OperatorKind.parse(kind).m <= self.config.order_p

    def stencils(self, cloud, centers=None):
        return knn_stencils(cloud, self.stencil_n, centers)

    def weights(self, batch, kind, cloud):
        return labfm_weights(batch, self.config, kind, on_failure="skip")


class NemdoProvider(OperatorProvider):
    """Learned weights; ``models`` maps operator kinds to trained :class:`NemdoModel` objects."""

    def __init__(self, models, name="nemdo"):
        if isinstance(models, NemdoModel):
            models = [models]
        self.models = {m.kind: m for m in models}
        sizes = {m.config.stencil_n for m in self.models.values()}
        if len(sizes) != 1:
            raise InvalidArgument("all NeMDO models of one provider must share the stencil size")
        self.stencil_n = sizes.pop()
        self.name = name
        self.policy = f"knn {self.stencil_n}"

    def _model(self, kind):
        kind = OperatorKind.parse(kind)
        for m in self.models.values():
            if m.supports(kind):
                return m
        raise InvalidArgument(f"no NeMDO model loaded for {kind.label}")

    def supports(self, kind):
        try:
            self._model(kind)
        except InvalidArgument:
            return False
        return True

    def stencils(self, cloud, centers=None):
        return knn_stencils(cloud, self.stencil_n, centers)

    def weights(self, batch, kind, cloud):
        return infer_weights(self._model(kind), batch, kind)


def make_provider(name, order_p=2, models=None):
    """Build a provider from a CLI-style tag: ``sph-quintic``, ``sph-wendland``, ``labfm`` or ``nemdo``."""
    key = name.strip().lower()
    if key.startswith("sph"):
        return SphProvider(Kernel.parse(key))
    if key.startswith("labfm"):
        p = int(key.split("-p")[1]) if "-p" in key else order_p
        return LabfmProvider(p)
    if key == "nemdo":
        if not models:
            raise InvalidArgument("the nemdo provider needs at least one checkpoint")
        return NemdoProvider(models)
    raise InvalidArgument(f"unknown provider {name!r}")
