"""Training stencils sampled from jittered periodic grids, plus their binary file format.

File layout (little endian)::

    magic b"MFDS" | u32 version | u32 stencil_n | u32 order_p | f64 epsilon
    | f64 spacing | i64 seed | u64 count
    | count x u8 split tag (0 train, 1 val, 2 test)
    | count x f64 d_n
    | count x stencil_n x 2 f64 normalised offsets
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from ..geometry import generate_perturbed_grid, knn_stencils

MAGIC = b"MFDS"
VERSION = 1
SPLITS = ("train", "val", "test")
_HEADER = struct.Struct("<4sIIIddqQ")


@dataclass
class Dataset:
    offsets_hat: np.ndarray  # (count, n, 2)
    d_n: np.ndarray  # (count,)
    split: np.ndarray  # (count,) u8 tags
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.offsets_hat)

    @property
    def stencil_n(self):
        return self.offsets_hat.shape[1]

    def part(self, name):
        return self.offsets_hat[self.split == SPLITS.index(name)]

    def counts(self):
        return {name: int(np.sum(self.split == k)) for k, name in enumerate(SPLITS)}


def generate_dataset(count, stencil_n, epsilon, seed, spacing=1.0 / 32, val_frac=0.1,
                     test_frac=0.1, order_p=2, nx=None, ny=None):
    """Sample ``count`` normalised knn stencils from independent periodic clouds.

    Each cloud is an ``nx`` by ``ny`` jittered periodic grid (default: the
    unit square at ``spacing``) and every node contributes one stencil.
    Clouds are drawn until enough stencils exist, then the pool is shuffled
    and split.
    """
    if count < 1:
        raise InvalidArgument("count must be positive")
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1:
        raise InvalidArgument("invalid split fractions")
    if nx is None:
        nx = int(round(1.0 / spacing))
    ny = nx if ny is None else ny
    if nx * ny <= stencil_n:
        raise InvalidArgument(f"a {nx}x{ny} cloud is too small for {stencil_n}-neighbour stencils")
    rng = np.random.default_rng(seed)
    chunks, dn = [], []
    total = 0
    k = 0
    while total < count:
        cloud_seed = int(rng.integers(2**62))
        cloud = generate_perturbed_grid(nx, ny, spacing, epsilon, cloud_seed, periodic=True)
        batch = knn_stencils(cloud, stencil_n)
        chunks.append(batch.normalized_offsets())
        dn.append(batch.d_n)
        total += len(batch)
        k += 1
    offs = np.concatenate(chunks)
    d_n = np.concatenate(dn)
    pick = rng.permutation(len(offs))[:count]
    offs, d_n = offs[pick], d_n[pick]
    n_val = int(round(val_frac * count))
    n_test = int(round(test_frac * count))
    split = np.zeros(count, dtype=np.uint8)
    split[count - n_val - n_test:count - n_test] = 1
    split[count - n_test:] = 2
    meta = {"epsilon": float(epsilon), "spacing": float(spacing), "seed": int(seed),
            "order_p": int(order_p), "clouds": k, "nx": nx, "ny": ny}
    return Dataset(offs, d_n, split, meta)


def save_dataset(ds, path):
    path = Path(path)
    m = ds.meta
    head = _HEADER.pack(MAGIC, VERSION, ds.stencil_n, int(m.get("order_p", 2)),
                        float(m.get("epsilon", 0.0)), float(m.get("spacing", 0.0)),
                        int(m.get("seed", 0)), len(ds))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(ds.split.astype("<u1").tobytes())
        fh.write(ds.d_n.astype("<f8").tobytes())
        fh.write(ds.offsets_hat.astype("<f8").tobytes())
    return path


def load_dataset(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidArgument(f"{path}: truncated dataset header")
    magic, version, n, p, eps, spacing, seed, count = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise InvalidArgument(f"{path}: not a dataset file (magic={magic!r}, version={version})")
    expected = _HEADER.size + count * (1 + 8 + 16 * n)
    if len(raw) != expected:
        raise InvalidArgument(f"{path}: expected {expected} bytes, found {len(raw)}")
    pos = _HEADER.size
    split = np.frombuffer(raw, "<u1", count, pos).copy()
    pos += count
    d_n = np.frombuffer(raw, "<f8", count, pos).copy()
    pos += 8 * count
    offs = np.frombuffer(raw, "<f8", count * n * 2, pos).reshape(count, n, 2).copy()
    meta = {"epsilon": eps, "spacing": spacing, "seed": seed, "order_p": p}
    return Dataset(offs, d_n, split, meta)
