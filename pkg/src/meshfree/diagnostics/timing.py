"""Wall-clock cost of building weights, paired with each provider's accuracy."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from ..taylor import OperatorKind
from .accuracy import derivative_error


@dataclass
class TimingRow:
    provider: str
    median_s: float
    min_s: float
    max_s: float
    repeats: int
    n_nodes: int
    error: float
    weights_only: bool

    @property
    def per_node_s(self):
        return self.median_s / self.n_nodes


def timing_harness(providers, cloud, kind=OperatorKind.DX, repeats=5, weights_only=True):
    """Time every provider on ``cloud`` and pair it with its test-function error.

    With ``weights_only`` the neighbour search runs once up front and only
    the weight construction is timed; otherwise each repeat includes it.
    Run single-threaded (e.g. ``OMP_NUM_THREADS=1``) for comparable numbers.
    """
    kind = OperatorKind.parse(kind)
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    rows = []
    for p in providers:
        batch = p.stencils(cloud) if weights_only else None
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            b = batch if weights_only else p.stencils(cloud)
            p.weights(b, kind, cloud)
            samples.append(time.perf_counter() - t0)
        if cloud.periodic:
            err = np.nan
        else:
            err = derivative_error(p, kind, cloud)[0]
        rows.append(TimingRow(p.name, float(np.median(samples)), float(np.min(samples)),
                              float(np.max(samples)), repeats, len(cloud), float(err), weights_only))
    return rows
