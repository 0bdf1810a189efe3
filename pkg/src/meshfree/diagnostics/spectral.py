"""Global operator matrices, their eigenvalues, and single-mode (modal) responses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, NumericalFailure, SolveFailure
from ..operators import global_matrix
from ..taylor import OperatorKind


def assemble_global(provider, cloud, kind):
    """Dense ``G`` with ``(G phi)_i = sum_j (phi_j - phi_i) w_ji`` for every node."""
    if not cloud.periodic:
        raise InvalidArgument("global operators are assembled on periodic clouds only")
    batch = provider.stencils(cloud)
    w = provider.weights(batch, kind, cloud)
    if w.valid is not None and not np.all(w.valid):
        bad = int(batch.centers[np.flatnonzero(~w.valid)[0]])
        raise SolveFailure(f"{provider.name} failed to build weights at node {bad}")
    return global_matrix(batch, w, len(cloud)).toarray()


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray  # scaled by s**m
    n_nodes: int
    epsilon: float
    scale: float
    meta: dict = field(default_factory=dict)

    @property
    def max_real(self):
        return float(np.max(self.eigenvalues.real))

    @property
    def max_abs_real(self):
        return float(np.max(np.abs(self.eigenvalues.real)))

    @property
    def max_abs_imag(self):
        return float(np.max(np.abs(self.eigenvalues.imag)))

    def rows(self):
        return [(float(z.real), float(z.imag)) for z in self.eigenvalues]


def eigen_spectrum(matrix, spacing=1.0, m=0, epsilon=float("nan"), meta=None):
    """All eigenvalues of a dense square matrix, multiplied by ``spacing**m``.

    LAPACK's ``geev`` (Hessenberg reduction followed by shifted QR) does the
    work; its convergence failure surfaces as :class:`NumericalFailure`.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgument("matrix has non-finite entries")
    try:
        mu = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    scale = spacing ** m
    return SpectrumReport(mu * scale, len(A), epsilon, scale, dict(meta or {}))


@dataclass
class ModalResponseReport:
    kind: OperatorKind
    k_hat: np.ndarray
    ratio: float
    real: np.ndarray  # mean Re k_eff / k_Ny (gradient) or Re q2_eff / k_Ny^2 (Laplacian)
    imag: np.ndarray
    count: int
    provider: str = ""

    def exact(self):
        """The spectral-method reference on the same axes."""
        if self.kind is OperatorKind.LAPLACIAN:
            return self.k_hat ** 2 * (1.0 + self.ratio ** 2)
        return self.k_hat.copy()

    def rows(self):
        return [(self.provider, self.ratio, float(k), float(r), float(i))
                for k, r, i in zip(self.k_hat, self.real, self.imag)]


def modal_terms(offsets, weights, kx, ky):
    """Per-stencil ``(sum w sin(theta), sum w (1 - cos theta))`` for ``theta = kx x + ky y``.

    ``offsets`` ``(M, K, 2)``, ``weights`` ``(M, K)`` (zeros on padding),
    ``kx``/``ky`` arrays of wavenumbers ``(Q,)``. Returns two ``(M, Q)`` arrays.
    """
    theta = offsets[..., 0, None] * kx + offsets[..., 1, None] * ky
    w = weights[..., None]
    return np.sum(w * np.sin(theta), axis=1), np.sum(w * (1.0 - np.cos(theta)), axis=1)


def modal_response(provider, kind, cloud, k_hat, ratio=0.0, centers=None):
    """Stencil-averaged effective wavenumber for plane waves ``exp(i(kx x + ky y))``.

    ``k_hat = kx / k_Ny`` with ``k_Ny = pi / s`` and ``ky = ratio * kx``. For
    the x-gradient ``k_eff = sum w sin + i sum w (1 - cos)``; for the
    Laplacian ``q2_eff = sum w (1 - cos) - i sum w sin``. Outputs are scaled
    by ``k_Ny`` and ``k_Ny^2`` respectively.
    """
    kind = OperatorKind.parse(kind)
    if kind not in (OperatorKind.DX, OperatorKind.LAPLACIAN):
        raise InvalidArgument("modal response is defined for the x-gradient and the Laplacian")
    k_hat = np.atleast_1d(np.asarray(k_hat, dtype=float))
    if np.any((k_hat <= 0) | (k_hat > 1)):
        raise InvalidArgument("k_hat must lie in (0, 1]")
    if ratio not in (0, 1, 0.0, 1.0):
        raise InvalidArgument("direction ratio ky/kx must be 0 or 1")
    k_ny = np.pi / cloud.spacing
    kx = k_hat * k_ny
    ky = ratio * kx
    batch = provider.stencils(cloud, centers)
    w = provider.weights(batch, kind, cloud)
    ok = w.valid if w.valid is not None else np.ones(len(batch), bool)
    weights = np.where(batch.mask, w.weights, 0.0)[ok]
    s_sum, c_sum = modal_terms(batch.offsets[ok], weights, kx, ky)
    if kind is OperatorKind.DX:
        re, im = s_sum.mean(axis=0) / k_ny, c_sum.mean(axis=0) / k_ny
    else:
        re, im = c_sum.mean(axis=0) / k_ny ** 2, -s_sum.mean(axis=0) / k_ny ** 2
    return ModalResponseReport(kind, k_hat, float(ratio), re, im, int(ok.sum()), provider.name)
