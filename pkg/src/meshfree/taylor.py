"""Taylor monomials, target moment vectors and the analytic test function.

Monomials are ordered by total degree, and within a degree by decreasing
power of ``x``::

    x, y, x^2/2, xy, y^2/2, x^3/6, x^2y/2, xy^2/2, y^3/6, ...

each scaled by ``1/(a! b!)``. A discrete operator with weights ``w_j`` on
offsets ``x_j`` has moment vector ``sum_j X(x_j) w_j``; matching that vector to
the target ``M`` for degrees ``<= p`` is polynomial consistency of order ``p``.
"""
from __future__ import annotations

import enum
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import InvalidArgument


class OperatorKind(enum.Enum):
    DX = ("dx", 1)
    DY = ("dy", 1)
    LAPLACIAN = ("laplacian", 2)
    HYPERVISCOUS = ("hyperviscous", 4)

    def __init__(self, label, order):
        self.label = label
        self.m = order

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"x": "dx", "y": "dy", "lap": "laplacian", "hyp": "hyperviscous",
                   "biharmonic": "hyperviscous"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.label == key:
                return kind
        raise InvalidArgument(f"unknown operator kind {value!r}")


def basis_size(p):
    return (p * p + 3 * p) // 2


@lru_cache(maxsize=None)
def monomial_exponents(p):
    """Exponent pairs ``(a, b)`` with ``1 <= a + b <= p`` in basis order."""
    if p < 1:
        raise InvalidArgument(f"order p must be >= 1, got {p}")
    return tuple((a, k - a) for k in range(1, p + 1) for a in range(k, -1, -1))


def monomial_labels(p):
    def one(a, b):
        def pw(v, e):
            return "" if e == 0 else (v if e == 1 else f"{v}^{e}")
        num = pw("x", a) + pw("y", b)
        den = factorial(a) * factorial(b)
        return num if den == 1 else f"{num}/{den}"
    return [one(a, b) for a, b in monomial_exponents(p)]


class MonomialBasis:
    def __init__(self, p):
        self.p = int(p)
        self.terms = monomial_exponents(self.p)
        self.coefficients = np.array([1.0 / (factorial(a) * factorial(b)) for a, b in self.terms])

    def __len__(self):
        return len(self.terms)

    def __call__(self, offsets):
        return monomial_vector(offsets, self.p)

    def index(self, a, b):
        return self.terms.index((a, b))


def monomial_vector(offset, p):
    """Factorial-scaled monomials of ``offset`` with shape ``(..., basis_size(p))``."""
    xy = np.asarray(offset, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    # powers up to p, built by repeated multiplication
    xp = [np.ones_like(x)]
    yp = [np.ones_like(y)]
    for _ in range(p):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
    cols = [xp[a] * yp[b] / (factorial(a) * factorial(b)) for a, b in monomial_exponents(p)]
    return np.stack(cols, axis=-1)


def target_moments(kind, p):
    kind = OperatorKind.parse(kind)
    if p < kind.m:
        raise InvalidArgument(f"{kind.label} needs order p >= {kind.m}, got {p}")
    terms = monomial_exponents(p)
    M = np.zeros(len(terms))
    if kind is OperatorKind.DX:
        M[terms.index((1, 0))] = 1.0
    elif kind is OperatorKind.DY:
        M[terms.index((0, 1))] = 1.0
    elif kind is OperatorKind.LAPLACIAN:
        M[terms.index((2, 0))] = 1.0
        M[terms.index((0, 2))] = 1.0
    else:
        # biharmonic: d4/dx4 + 2 d4/dx2dy2 + d4/dy4
        M[terms.index((4, 0))] = 1.0
        M[terms.index((2, 2))] = 2.0
        M[terms.index((0, 4))] = 1.0
    return M


def moment_residual(offsets, weights, kind, p, scale):
    """``sum_j X(x_j/scale) * w_j*scale^m - M`` for one stencil or a batch.

    ``offsets`` has shape ``(..., n, 2)`` and ``weights`` shape ``(..., n)``;
    ``scale`` is a scalar or broadcasts against the leading batch shape.
    """
    kind = OperatorKind.parse(kind)
    offsets = np.asarray(offsets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if offsets.shape[:-1] != weights.shape:
        raise InvalidArgument("offsets and weights do not align")
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0):
        raise InvalidArgument("scale must be positive")
    s = scale[..., None]
    X = monomial_vector(offsets / s[..., None], p)
    w_hat = weights * s ** kind.m
    return np.einsum("...jq,...j->...q", X, w_hat) - target_moments(kind, p)


X_SHIFT = 0.1453
Y_SHIFT = 0.16401


def test_function(point):
    """Smooth asymmetric polynomial and its exact derivatives.

    Returns ``(phi, dphi/dx, dphi/dy, laplacian)`` with
    ``phi = 1 + (xt*yt)^4 + sum_{n=1..6} (xt^n + yt^n)`` and
    ``xt = x - 0.1453``, ``yt = y - 0.16401``.
    """
    pts = np.asarray(point, dtype=float)
    xt = pts[..., 0] - X_SHIFT
    yt = pts[..., 1] - Y_SHIFT
    val = 1.0 + (xt * yt) ** 4
    dx = 4.0 * xt ** 3 * yt ** 4
    dy = 4.0 * xt ** 4 * yt ** 3
    lap = 12.0 * xt ** 2 * yt ** 4 + 12.0 * xt ** 4 * yt ** 2
    for n in range(1, 7):
        val = val + xt ** n + yt ** n
        dx = dx + n * xt ** (n - 1)
        dy = dy + n * yt ** (n - 1)
        if n >= 2:
            lap = lap + n * (n - 1) * (xt ** (n - 2) + yt ** (n - 2))
    return val, dx, dy, lap


test_function.__test__ = False  # keep pytest from collecting it when imported into tests
