"""Point clouds, neighbour search and stencil normalisation.

Every operator provider in the package consumes the stencils produced here.
A stencil around node ``i`` stores the neighbour indices ``j``, the relative
offsets ``x_ji = x_j - x_i`` (minimum image on periodic axes) and the
normalisation length ``d_n``, the largest offset norm in the stencil.

Batched queries return a :class:`StencilBatch`, a padded array layout
(``neighbors == -1`` marks padding) that the weight providers vectorise over.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometry, InvalidArgument

# extra candidates fetched by knn so that distance ties at d_n can be resolved
_KNN_SLACK = 16


@dataclass(frozen=True)
class Domain:
    lower: tuple[float, float]
    lengths: tuple[float, float]
    periodic: tuple[bool, bool] = (False, False)

    def __post_init__(self):
        if min(self.lengths) <= 0:
            raise InvalidArgument("domain lengths must be positive")

    @property
    def upper(self):
        return (self.lower[0] + self.lengths[0], self.lower[1] + self.lengths[1])

    def wrap(self, points):
        """Map points into the fundamental cell along periodic axes."""
        pts = np.array(points, dtype=float, copy=True)
        for ax in range(2):
            if self.periodic[ax]:
                lo, L = self.lower[ax], self.lengths[ax]
                pts[..., ax] = lo + np.mod(pts[..., ax] - lo, L)
        return pts

    def minimum_image(self, d):
        d = np.array(d, dtype=float, copy=True)
        for ax in range(2):
            if self.periodic[ax]:
                L = self.lengths[ax]
                d[..., ax] -= L * np.round(d[..., ax] / L)
        return d

    def contains(self, points):
        pts = np.asarray(points)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


class PointCloud:
    """Immutable set of 2D collocation points.

    Parameters
    ----------
    points : (N, 2) array
    spacing : float
        Mean inter-node spacing ``s``.
    domain : Domain
    epsilon : float
        Disorder level used to generate the cloud (informational).
    meta : dict, optional
        Generation metadata (``nx``, ``ny``, ``seed``), exported with the cloud.
    """

    def __init__(self, points, spacing, domain, epsilon=0.0, meta=None):
        if spacing <= 0:
            raise InvalidArgument(f"spacing must be positive, got {spacing}")
        if epsilon < 0:
            raise InvalidArgument(f"epsilon must be non-negative, got {epsilon}")
        pts = domain.wrap(np.asarray(points, dtype=float).reshape(-1, 2))
        if not np.all(domain.contains(pts)):
            raise InvalidArgument("points lie outside the domain")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise DegenerateGeometry("point cloud contains duplicate points")
        pts.flags.writeable = False
        self.points = pts
        self.spacing = float(spacing)
        self.domain = domain
        self.epsilon = float(epsilon)
        self.meta = dict(meta or {})
        self._tree = None

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return (f"PointCloud(N={len(self)}, spacing={self.spacing:g}, "
                f"epsilon={self.epsilon:g}, periodic={self.domain.periodic})")

    @property
    def periodic(self):
        return all(self.domain.periodic)

    @property
    def tree(self):
        if self._tree is None:
            shifted = self.points - np.asarray(self.domain.lower)
            if any(self.domain.periodic):
                # non-periodic axes get a box wide enough that wrapped images never win
                box = [L if p else 4.0 * L for L, p in zip(self.domain.lengths, self.domain.periodic)]
                shifted = np.mod(shifted, box)
                self._tree = cKDTree(shifted, boxsize=box)
            else:
                self._tree = cKDTree(shifted)
        return self._tree

    def _query_points(self, centers):
        shifted = self.points[centers] - np.asarray(self.domain.lower)
        if any(self.domain.periodic):
            box = [L if p else 4.0 * L for L, p in zip(self.domain.lengths, self.domain.periodic)]
            shifted = np.mod(shifted, box)
        return shifted

    def offsets(self, center, neighbors):
        """Minimum-image relative positions ``x_j - x_center``."""
        d = self.points[np.asarray(neighbors)] - self.points[center]
        return self.domain.minimum_image(d)

    def interior(self, margin):
        """Boolean mask of nodes at least ``margin`` away from non-periodic walls."""
        ok = np.ones(len(self), dtype=bool)
        for ax in range(2):
            if not self.domain.periodic[ax]:
                x = self.points[:, ax]
                ok &= (x - self.domain.lower[ax] >= margin) & (self.domain.upper[ax] - x >= margin)
        return ok


@dataclass
class Stencil:
    center: int
    neighbors: np.ndarray
    offsets: np.ndarray
    d_n: float

    def __len__(self):
        return len(self.neighbors)

    @classmethod
    def from_offsets(cls, offsets, center=0, neighbors=None):
        """Build a free-standing stencil from raw offsets (no cloud needed)."""
        offsets = np.asarray(offsets, dtype=float).reshape(-1, 2)
        if neighbors is None:
            neighbors = np.arange(1, len(offsets) + 1)
        d_n = float(np.max(np.hypot(offsets[:, 0], offsets[:, 1]))) if len(offsets) else 0.0
        return cls(center, np.asarray(neighbors), offsets, d_n)


@dataclass
class NormalizedStencil:
    offsets_hat: np.ndarray
    d_n: float

    def __len__(self):
        return len(self.offsets_hat)


@dataclass
class StencilBatch:
    """Padded batch of stencils; ``mask`` is False on padding slots."""

    centers: np.ndarray
    neighbors: np.ndarray
    offsets: np.ndarray
    mask: np.ndarray
    d_n: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.centers)

    @property
    def width(self):
        return self.neighbors.shape[1]

    @property
    def counts(self):
        return self.mask.sum(axis=1)

    def __getitem__(self, k):
        m = self.mask[k]
        return Stencil(int(self.centers[k]), self.neighbors[k][m].copy(),
                       self.offsets[k][m].copy(), float(self.d_n[k]))

    def normalized_offsets(self):
        d = np.where(self.d_n > 0, self.d_n, 1.0)
        return self.offsets / d[:, None, None]

    @classmethod
    def from_stencils(cls, stencils):
        stencils = list(stencils)
        width = max((len(s) for s in stencils), default=0)
        M = len(stencils)
        nbr = np.full((M, width), -1, dtype=np.int64)
        off = np.zeros((M, width, 2))
        mask = np.zeros((M, width), dtype=bool)
        for k, s in enumerate(stencils):
            c = len(s)
            nbr[k, :c] = s.neighbors
            off[k, :c] = s.offsets
            mask[k, :c] = True
        centers = np.array([s.center for s in stencils], dtype=np.int64)
        d_n = np.array([s.d_n for s in stencils], dtype=float)
        return cls(centers, nbr, off, mask, d_n)


def generate_perturbed_grid(nx, ny, spacing, epsilon, seed, origin=(0.0, 0.0),
                            periodic=(False, False)):
    """Cartesian grid with i.i.d. uniform jitter of half-width ``epsilon*spacing/2``.

    Nodes sit at cell centres ``origin + (i + 1/2) * spacing`` so the domain is
    ``[origin, origin + (nx, ny) * spacing]``. Points are ordered x-fastest.
    """
    if nx < 2 or ny < 2:
        raise InvalidArgument("nx and ny must be at least 2")
    if spacing <= 0:
        raise InvalidArgument(f"spacing must be positive, got {spacing}")
    if epsilon < 0:
        raise InvalidArgument(f"epsilon must be non-negative, got {epsilon}")
    periodic = tuple(bool(p) for p in (periodic if np.ndim(periodic) else (periodic, periodic)))
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    base = np.column_stack([origin[0] + (ix.ravel() + 0.5) * spacing,
                            origin[1] + (iy.ravel() + 0.5) * spacing])
    rng = np.random.default_rng(seed)
    half = 0.5 * epsilon * spacing
    noise = rng.uniform(-half, half, size=base.shape)
    domain = Domain((float(origin[0]), float(origin[1])), (nx * spacing, ny * spacing), periodic)
    meta = {"nx": int(nx), "ny": int(ny), "seed": seed}
    return PointCloud(base + noise, spacing, domain, epsilon, meta)


def unit_square_cloud(spacing, epsilon, seed, periodic=True):
    """Cloud on ``[0, 1]^2`` with ``round(1/spacing)`` nodes per side."""
    n = int(round(1.0 / spacing))
    return generate_perturbed_grid(n, n, 1.0 / n, epsilon, seed, (0.0, 0.0), (periodic, periodic))


def centered_square_cloud(spacing, epsilon, seed):
    """Non-periodic cloud on ``[-0.5, 0.5]^2`` used by the test-function studies."""
    n = int(round(1.0 / spacing))
    return generate_perturbed_grid(n, n, 1.0 / n, epsilon, seed, (-0.5, -0.5), (False, False))


def _sorted_candidates(cloud, center, candidates):
    candidates = np.asarray(candidates, dtype=np.int64)
    candidates = candidates[candidates != center]
    off = cloud.offsets(center, candidates)
    dist = np.hypot(off[:, 0], off[:, 1])
    order = np.lexsort((candidates, dist))
    return candidates[order], off[order], dist[order]


def knn_stencils(cloud, n, centers=None):
    """k-nearest-neighbour stencils for many centres at once.

    Neighbours are sorted by minimum-image distance, ties broken by node
    index; ``d_n`` is the distance to the ``n``-th neighbour.
    """
    N = len(cloud)
    if n < 1 or n >= N:
        raise InvalidArgument(f"stencil size n={n} must satisfy 1 <= n < {N}")
    centers = np.arange(N) if centers is None else np.atleast_1d(np.asarray(centers, dtype=np.int64))
    k = min(n + 1 + _KNN_SLACK, N)
    tree_d, tree_idx = cloud.tree.query(cloud._query_points(centers), k=k)
    tree_d = np.atleast_2d(tree_d)
    tree_idx = np.atleast_2d(tree_idx)

    M = len(centers)
    nbr = np.empty((M, n), dtype=np.int64)
    off = np.empty((M, n, 2))
    d_n = np.empty(M)
    for r, c in enumerate(centers):
        cand, o, dist = _sorted_candidates(cloud, c, tree_idx[r])
        if k < N and tree_d[r, -1] <= dist[n - 1] * (1 + 1e-9):
            # the tie shell at d_n may extend past the fetched candidates
            ball = cloud.tree.query_ball_point(cloud._query_points([c])[0], dist[n - 1] * (1 + 1e-9))
            cand, o, dist = _sorted_candidates(cloud, c, ball)
        nbr[r] = cand[:n]
        off[r] = o[:n]
        d_n[r] = dist[n - 1]
    return StencilBatch(centers, nbr, off, np.ones((M, n), dtype=bool), d_n,
                        {"policy": "knn", "n": int(n)})


def knn_stencil(cloud, center, n):
    return knn_stencils(cloud, n, [center])[0]


def radius_stencils(cloud, radius, centers=None):
    """All nodes with ``0 < |x_ji| <= radius``, sorted by distance then index."""
    if radius <= 0:
        raise InvalidArgument(f"radius must be positive, got {radius}")
    centers = np.arange(len(cloud)) if centers is None else np.atleast_1d(np.asarray(centers, dtype=np.int64))
    balls = cloud.tree.query_ball_point(cloud._query_points(centers), radius * (1 + 1e-12))
    stencils = []
    for c, ball in zip(centers, balls):
        cand, o, dist = _sorted_candidates(cloud, c, ball)
        keep = (dist <= radius) & (dist > 0)
        cand, o, dist = cand[keep], o[keep], dist[keep]
        stencils.append(Stencil(int(c), cand, o, float(dist[-1]) if len(dist) else 0.0))
    batch = StencilBatch.from_stencils(stencils)
    batch.meta = {"policy": "radius", "radius": float(radius)}
    return batch


def radius_stencil(cloud, center, radius):
    return radius_stencils(cloud, radius, [center])[0]


def normalize(stencil):
    if len(stencil) == 0 or not np.any(stencil.offsets):
        raise DegenerateGeometry("cannot normalise a stencil whose offsets are all zero")
    d_n = float(np.max(np.hypot(stencil.offsets[:, 0], stencil.offsets[:, 1])))
    return NormalizedStencil(stencil.offsets / d_n, d_n)


def save_cloud(cloud, path):
    """Write ``x,y`` CSV plus a JSON sidecar (same stem, ``.json``)."""
    path = Path(path)
    np.savetxt(path, cloud.points, delimiter=",", header="x,y", comments="", fmt="%.17g")
    side = {
        "spacing": cloud.spacing,
        "epsilon": cloud.epsilon,
        "nx": cloud.meta.get("nx"),
        "ny": cloud.meta.get("ny"),
        "seed": cloud.meta.get("seed"),
        "periodic": list(cloud.domain.periodic),
        "lower": list(cloud.domain.lower),
        "lengths": list(cloud.domain.lengths),
    }
    path.with_suffix(".json").write_text(json.dumps(side, indent=2))
    return path


def load_cloud(path):
    path = Path(path)
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = json.loads(path.with_suffix(".json").read_text())
    s = side["spacing"]
    lower = side.get("lower", [0.0, 0.0])
    lengths = side.get("lengths") or [side["nx"] * s, side["ny"] * s]
    domain = Domain(tuple(lower), tuple(lengths), tuple(bool(p) for p in side["periodic"]))
    meta = {k: side[k] for k in ("nx", "ny", "seed") if side.get(k) is not None}
    return PointCloud(pts, s, domain, side["epsilon"], meta)
