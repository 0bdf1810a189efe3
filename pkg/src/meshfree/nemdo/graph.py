"""Star-shaped stencil graphs: the centre node linked both ways to every neighbour."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import InvalidArgument


@dataclass
class StencilGraph:
    node_features: np.ndarray  # (n + 1, 2); row 0 is the centre at the origin
    edges: np.ndarray  # (2n, 2) directed (source, target) pairs

    @property
    def n_nodes(self):
        return len(self.node_features)

    @property
    def adjacency(self):
        return star_adjacency(self.n_nodes - 1)


@lru_cache(maxsize=None)
def star_edges(n):
    nb = np.arange(1, n + 1)
    out = np.column_stack([np.zeros(n, dtype=np.int64), nb])
    e = np.concatenate([out, out[:, ::-1]])
    e.flags.writeable = False
    return e


@lru_cache(maxsize=None)
def star_adjacency(n):
    """``adj[j, k]`` is True when node ``k`` sends messages to node ``j``."""
    adj = np.zeros((n + 1, n + 1), dtype=bool)
    e = star_edges(n)
    adj[e[:, 1], e[:, 0]] = True
    adj.flags.writeable = False
    return adj


def build_graph(stencil, stencil_n=None):
    offsets = np.asarray(getattr(stencil, "offsets_hat", stencil), dtype=float)
    n = len(offsets)
    if stencil_n is not None and n != stencil_n:
        raise InvalidArgument(f"stencil has {n} neighbours, model expects {stencil_n}")
    feats = np.vstack([np.zeros((1, 2)), offsets])
    return StencilGraph(feats, star_edges(n).copy())


def batch_features(offsets_hat):
    """Stack normalised offsets ``(B, n, 2)`` into node features ``(B, n+1, 2)``."""
    offsets_hat = np.asarray(offsets_hat)
    if offsets_hat.dtype != np.float32:
        offsets_hat = offsets_hat.astype(np.float64, copy=False)
    B = offsets_hat.shape[0]
    return np.concatenate([np.zeros((B, 1, 2), offsets_hat.dtype), offsets_hat], axis=1)
