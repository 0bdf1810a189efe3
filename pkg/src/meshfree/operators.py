"""Stencil weight containers and the difference-form operator application.

All providers produce weights for ``L(phi)_i = sum_j (phi_j - phi_i) w_ji``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .geometry import Stencil, StencilBatch
from .taylor import OperatorKind


@dataclass
class OperatorWeights:
    """Weights aligned with a stencil (shape ``(n,)``) or a batch (``(M, K)``).

    ``valid`` marks batch rows whose construction succeeded; failed rows hold
    zeros and are skipped by downstream diagnostics.
    """

    weights: np.ndarray
    kind: OperatorKind
    provenance: str
    valid: np.ndarray | None = None

    def __len__(self):
        return len(self.weights)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.valid is None:
            self.valid = np.ones(self.weights.shape[:-1], dtype=bool) if self.weights.ndim > 1 else None

    def row(self, k, batch):
        return OperatorWeights(self.weights[k][batch.mask[k]], self.kind, self.provenance)


def as_batch(stencil):
    """Return ``(batch, single)`` so providers can share one vectorised path."""
    if isinstance(stencil, StencilBatch):
        return stencil, False
    if isinstance(stencil, Stencil):
        return StencilBatch.from_stencils([stencil]), True
    raise InvalidArgument(f"expected Stencil or StencilBatch, got {type(stencil).__name__}")


def apply_operator(batch, weights, phi):
    """Evaluate the difference-form operator at every batch centre."""
    w = weights.weights if isinstance(weights, OperatorWeights) else np.asarray(weights)
    phi = np.asarray(phi, dtype=float)
    nbr = np.where(batch.mask, batch.neighbors, batch.centers[:, None])
    diff = phi[nbr] - phi[batch.centers][:, None]
    return np.sum(np.where(batch.mask, diff * w, 0.0), axis=1)


def apply_stencil(stencil, weights, phi_center, phi_neighbors):
    w = weights.weights if isinstance(weights, OperatorWeights) else np.asarray(weights)
    return float(np.sum((np.asarray(phi_neighbors) - phi_center) * w))


def global_matrix(batch, weights, n_nodes):
    """Sparse matrix ``G`` with ``(G phi)_i = L(phi)_i`` for the batch centres.

    Row ``i`` carries ``w_ji`` at the neighbour columns and ``-sum_j w_ji`` on
    the diagonal, so every row sums to zero.
    """
    w = weights.weights if isinstance(weights, OperatorWeights) else np.asarray(weights)
    m = batch.mask
    rows = np.repeat(batch.centers, m.sum(axis=1))
    cols = batch.neighbors[m]
    vals = w[m]
    diag = -np.sum(np.where(m, w, 0.0), axis=1)
    r = np.concatenate([rows, batch.centers])
    c = np.concatenate([cols, batch.centers])
    v = np.concatenate([vals, diag])
    return sp.csr_matrix((v, (r, c)), shape=(n_nodes, n_nodes))


class DifferenceOperator:
    """Global operator applied as ``sum_j w_ji (phi_j - phi_i)``.

    Equivalent to :func:`global_matrix` but constant fields map to exact
    zeros, since every difference ``phi_j - phi_i`` vanishes before any
    rounding can happen. ``op @ phi`` accepts ``phi`` of shape ``(N,)`` or
    ``(N, k)``.
    """

    def __init__(self, batch, weights, n_nodes):
        w = weights.weights if isinstance(weights, OperatorWeights) else np.asarray(weights)
        self.centers = batch.centers
        self.neighbors = np.where(batch.mask, batch.neighbors, batch.centers[:, None])
        self.weights = np.where(batch.mask, w, 0.0)
        self.shape = (n_nodes, n_nodes)
        self._batch = batch

    def __matmul__(self, phi):
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 2:
            # column by column: gathers from contiguous rows are much faster
            return np.column_stack([self @ col for col in np.ascontiguousarray(phi.T)])
        diff = phi[self.neighbors] - phi[self.centers][:, None]
        out = np.zeros(self.shape[0])
        out[self.centers] = np.einsum("mk,mk->m", self.weights, diff)
        return out

    def tocsr(self):
        return global_matrix(self._batch, self.weights, self.shape[0])


def write_weight_dump(path, batch, weights):
    """CSV ``center,neighbor,dx,dy,weight`` with one row per stencil entry."""
    w = weights.weights if isinstance(weights, OperatorWeights) else np.asarray(weights)
    m = batch.mask
    rows = zip(np.repeat(batch.centers, m.sum(axis=1)), batch.neighbors[m],
               batch.offsets[m][:, 0], batch.offsets[m][:, 1], w[m])
    path = Path(path)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["center", "neighbor", "dx", "dy", "weight"])
        out.writerows((int(c), int(j), repr(float(x)), repr(float(y)), repr(float(v)))
                      for c, j, x, y, v in rows)
    return path
