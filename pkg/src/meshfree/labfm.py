"""Local anisotropic basis function method (LABFM) weights.

For each stencil the weights are a combination of anisotropic basis
functions (a radial kernel times products of Hermite polynomials), with the
coefficients fixed by a small dense solve so that the discrete moments equal
the target moments exactly up to order ``p``. All assembly happens in
coordinates normalised by the stencil's ``d_n``; physical weights are
recovered by dividing by ``d_n**m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedStencil, InvalidArgument, SolveFailure
from .kernels import hermite, wendland_shape
from .operators import OperatorWeights, as_batch
from .taylor import OperatorKind, basis_size, monomial_exponents, monomial_vector, target_moments

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LabfmConfig:
    order_p: int = 2
    h_ratio: float = 0.5
    condition_limit: float = 1e12
    psi_kernel: str = "wendland"

    def __post_init__(self):
        if self.order_p < 1:
            raise InvalidArgument("order_p must be >= 1")
        if self.condition_limit <= 1:
            raise InvalidArgument("condition_limit must exceed 1")
        if self.h_ratio <= 0:
            raise InvalidArgument("h_ratio must be positive")
        if self.psi_kernel != "wendland":
            raise InvalidArgument("only the Wendland C2 RBF is supported for the ABFs")


def abf_vector(offset, h, p):
    """Anisotropic basis functions for offsets ``(..., 2)`` with scale ``h``.

    Entry ``q`` is ``psi(|x|/h) / sqrt(2^(a+b)) * H_a(x/(h sqrt2)) * H_b(y/(h sqrt2))``
    with ``(a, b)`` in monomial-basis order and ``psi`` the Wendland C2 shape.
    """
    if h <= 0:
        raise InvalidArgument("ABF scale h must be positive")
    off = np.asarray(offset, dtype=float)
    x, y = off[..., 0], off[..., 1]
    psi = wendland_shape(np.hypot(x, y) / h)
    u = x / (h * np.sqrt(2.0))
    v = y / (h * np.sqrt(2.0))
    Hx = [hermite(a, u) for a in range(p + 1)]
    Hy = [hermite(b, v) for b in range(p + 1)]
    cols = [psi * Hx[a] * Hy[b] / np.sqrt(2.0 ** (a + b)) for a, b in monomial_exponents(p)]
    return np.stack(cols, axis=-1)


def labfm_weights(stencil, config, kind, on_failure="raise"):
    """Solve the local moment system and return physical weights.

    With ``on_failure="skip"`` (batches only), ill-conditioned or inaccurate
    stencils are zeroed and flagged in ``OperatorWeights.valid`` instead of
    raising.
    """
    kind = OperatorKind.parse(kind)
    p = config.order_p
    if p < kind.m:
        raise InvalidArgument(f"{kind.label} needs order_p >= {kind.m}")
    batch, single = as_batch(stencil)
    Q = basis_size(p)
    if np.any(batch.counts < Q):
        raise InvalidArgument(f"LABFM order {p} needs at least {Q} neighbours per stencil")

    xh = batch.normalized_offsets()
    mask = batch.mask[..., None]
    X = np.where(mask, monomial_vector(xh, p), 0.0)
    W = np.where(mask, abf_vector(xh, config.h_ratio, p), 0.0)
    A = np.einsum("mjp,mjq->mpq", X, W)
    M = target_moments(kind, p)

    cond = np.linalg.cond(A, 1)
    bad = ~np.isfinite(cond) | (cond > config.condition_limit)
    if np.any(bad) and (on_failure == "raise" or single):
        k = int(np.flatnonzero(bad)[0])
        raise IllConditionedStencil(
            f"stencil at node {batch.centers[k]} has condition estimate {cond[k]:.3e}",
            condition=float(cond[k]), center=int(batch.centers[k]))
    A_safe = np.where(bad[:, None, None], np.eye(Q), A)
    rhs = np.broadcast_to(M, (len(batch), Q))[..., None]
    coef = np.linalg.solve(A_safe, rhs)
    # one step of iterative refinement
    coef = coef + np.linalg.solve(A_safe, rhs - A_safe @ coef)
    w_hat = np.einsum("mjq,mq->mj", W, coef[..., 0])

    resid = np.abs(np.einsum("mjq,mj->mq", X, w_hat) - M).max(axis=1)
    fail = bad | ~(resid <= RESIDUAL_TOL)
    if np.any(fail & ~bad) and (on_failure == "raise" or single):
        k = int(np.flatnonzero(fail & ~bad)[0])
        raise SolveFailure(f"moment residual {resid[k]:.3e} at node {batch.centers[k]}")

    w = w_hat / batch.d_n[:, None] ** kind.m
    w = np.where(batch.mask & ~fail[:, None], w, 0.0)
    if single:
        return OperatorWeights(w[0], kind, "LABFM")
    return OperatorWeights(w, kind, "LABFM", valid=~fail)
