"""Moment statistics and convergence studies over point-cloud ensembles."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, MeshfreeError
from ..geometry import centered_square_cloud
from ..operators import apply_operator
from ..taylor import OperatorKind, monomial_labels, moment_residual, test_function

log = logging.getLogger(__name__)


def relative_l2(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise InvalidArgument(f"shape mismatch {approx.shape} vs {exact.shape}")
    ref = np.linalg.norm(exact)
    if ref == 0:
        raise InvalidArgument("reference field has zero norm")
    return float(np.linalg.norm(approx - exact) / ref)


@dataclass
class MomentReport:
    provider: str
    kind: OperatorKind
    order_p: int
    labels: list
    mae: np.ndarray
    std: np.ndarray
    count: int
    skipped: int = 0

    def rows(self):
        return [(self.provider, self.kind.label, lab, float(m), float(s))
                for lab, m, s in zip(self.labels, self.mae, self.std)]

    def slot(self, label):
        return float(self.mae[self.labels.index(label)])

    def mean_mae(self, orders=(1, 2)):
        """Average MAE over the moment slots of the given total orders."""
        from ..taylor import monomial_exponents
        sel = [i for i, (a, b) in enumerate(monomial_exponents(self.order_p)) if a + b in orders]
        return float(np.mean(self.mae[sel]))


def moment_table(provider, kind, clouds, order_p=2, margin=None, min_stencils=100):
    """Per-monomial MAE and standard deviation of the moment residual.

    Residuals are dimensionless: offsets are divided by the provider's
    ``moment_scale`` and the weights multiplied by its ``m``-th power. On
    non-periodic clouds only nodes at least ``margin`` (default: five
    spacings) from the boundary are used.
    """
    kind = OperatorKind.parse(kind)
    res = []
    skipped = 0
    for cloud in clouds:
        if cloud.periodic:
            centers = None
        else:
            centers = np.flatnonzero(cloud.interior(5 * cloud.spacing if margin is None else margin))
        batch = provider.stencils(cloud, centers)
        w = provider.weights(batch, kind, cloud)
        ok = w.valid if w.valid is not None else np.ones(len(batch), bool)
        skipped += int(np.sum(~ok))
        r = moment_residual(np.where(batch.mask[..., None], batch.offsets, 0.0), w.weights, kind,
                            order_p, provider.moment_scale(batch, cloud))
        res.append(r[ok])
    res = np.concatenate(res)
    if len(res) < min_stencils:
        raise InvalidArgument(f"moment table needs at least {min_stencils} stencils, got {len(res)}")
    a = np.abs(res)
    return MomentReport(provider.name, kind, order_p, monomial_labels(order_p), a.mean(axis=0),
                        a.std(axis=0), len(res), skipped)


def _exact(kind, pts):
    _, dx, dy, lap = test_function(pts)
    if kind is OperatorKind.DX:
        return dx
    if kind is OperatorKind.DY:
        return dy
    if kind is OperatorKind.LAPLACIAN:
        return lap
    raise InvalidArgument(f"no analytic reference for {kind.label}")


def derivative_error(provider, kind, cloud, margin=None):
    """Relative L2 error of the provider's derivative of the test function at interior nodes.

    Returns ``(error, skipped)``; stencils whose weights failed are left out.
    """
    kind = OperatorKind.parse(kind)
    centers = np.flatnonzero(cloud.interior(5 * cloud.spacing if margin is None else margin))
    batch = provider.stencils(cloud, centers)
    w = provider.weights(batch, kind, cloud)
    phi = test_function(cloud.points)[0]
    approx = apply_operator(batch, w, phi)
    ok = w.valid if w.valid is not None else np.ones(len(batch), bool)
    exact = _exact(kind, cloud.points[batch.centers])
    return relative_l2(approx[ok], exact[ok]), int(np.sum(~ok))


def fit_slope(spacings, errors):
    """Least-squares slope of ``log(error)`` against ``log(s)``."""
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])


@dataclass
class ConvergenceReport:
    kind: OperatorKind
    epsilon: float
    spacings: list
    errors: dict  # provider -> list of errors (one per spacing)
    slopes: dict
    skipped: dict
    fit_window: tuple
    meta: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for name, errs in self.errors.items():
            for s, e, k in zip(self.spacings, errs, self.skipped[name]):
                out.append((name, self.kind.label, s, e, k))
        return out


def convergence_study(providers, kind, spacings, epsilon=0.5, trials=1, seed=0, fit_window=None,
                      margin_cells=5):
    """Error of each provider versus node spacing on ``[-0.5, 0.5]^2`` clouds.

    ``fit_window`` indexes ``spacings`` sorted coarse to fine; the default
    fits the three finest resolutions.
    """
    kind = OperatorKind.parse(kind)
    if len(spacings) < 3:
        raise InvalidArgument("a convergence study needs at least three resolutions")
    spacings = sorted((float(s) for s in spacings), reverse=True)
    lo, hi = fit_window if fit_window is not None else (len(spacings) - 3, len(spacings))
    if hi - lo < 2:
        raise InvalidArgument("slope fit window must cover at least two resolutions")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(2**62, size=(len(spacings), trials))
    errors = {p.name: [] for p in providers}
    skipped = {p.name: [] for p in providers}
    for i, s in enumerate(spacings):
        clouds = [centered_square_cloud(s, epsilon, int(sd)) for sd in seeds[i]]
        for p in providers:
            errs, skips = [], 0
            for c in clouds:
                try:
                    e, k = derivative_error(p, kind, c, margin_cells * s)
                except MeshfreeError as exc:
                    log.warning("%s failed at s=%g: %s", p.name, s, exc)
                    e, k = np.nan, len(c)
                errs.append(e)
                skips += k
            errors[p.name].append(float(np.nanmean(errs)) if np.any(np.isfinite(errs)) else np.nan)
            skipped[p.name].append(skips)
    slopes = {}
    for name, errs in errors.items():
        e = np.array(errs[lo:hi])
        ok = np.isfinite(e) & (e > 0)
        slopes[name] = fit_slope(np.array(spacings[lo:hi])[ok], e[ok]) if ok.sum() >= 2 else np.nan
    return ConvergenceReport(kind, float(epsilon), spacings, errors, slopes, skipped, (lo, hi),
                             {"trials": trials, "seed": seed, "margin_cells": margin_cells})
