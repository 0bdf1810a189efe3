"""Radial smoothing kernels and physicists' Hermite polynomials."""
from __future__ import annotations

import enum

import numpy as np

from .errors import InvalidArgument


class Kernel(enum.Enum):
    QUINTIC_SPLINE = "quintic"
    WENDLAND_C2 = "wendland"

    @property
    def support(self):
        """Support radius in units of the smoothing length ``h``."""
        return 3.0 if self is Kernel.QUINTIC_SPLINE else 2.0

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        for k, names in ((cls.QUINTIC_SPLINE, ("quintic", "quintic-spline", "qs", "sph-quintic")),
                         (cls.WENDLAND_C2, ("wendland", "wendland-c2", "wc2", "sph-wendland"))):
            if key in names:
                return k
        raise InvalidArgument(f"unknown kernel {value!r}")


def _quintic(q):
    a = np.clip(3.0 - q, 0.0, None)
    b = np.clip(2.0 - q, 0.0, None)
    c = np.clip(1.0 - q, 0.0, None)
    w = a ** 5 - 6.0 * b ** 5 + 15.0 * c ** 5
    dw = -5.0 * a ** 4 + 30.0 * b ** 4 - 75.0 * c ** 4
    return w, dw


def wendland_shape(q):
    """Unnormalised Wendland C2 ``(1 - q/2)^4 (1 + 2q)`` on ``q in [0, 2]``."""
    t = np.clip(1.0 - 0.5 * np.asarray(q, dtype=float), 0.0, None)
    return t ** 4 * (1.0 + 2.0 * q)


def _wendland(q):
    t = np.clip(1.0 - 0.5 * q, 0.0, None)
    return t ** 4 * (1.0 + 2.0 * q), -5.0 * q * t ** 3


def kernel_eval(kernel, r, h):
    """Kernel value and radial derivative.

    Parameters
    ----------
    kernel : Kernel or str
    r : array_like
        Dimensionless distance ``|x| / h``.
    h : float
        Smoothing length.

    Returns
    -------
    value, dW_dr : ndarray
        ``W`` and its derivative with respect to the physical distance
        ``|x|`` (so ``grad W(x) = dW_dr * x / |x|``).
    """
    kernel = Kernel.parse(kernel)
    q = np.asarray(r, dtype=float)
    if np.any(q < 0):
        raise InvalidArgument("kernel distance must be non-negative")
    if h <= 0:
        raise InvalidArgument("smoothing length must be positive")
    if kernel is Kernel.QUINTIC_SPLINE:
        sigma = 7.0 / (478.0 * np.pi * h * h)
        w, dw = _quintic(q)
    else:
        sigma = 7.0 / (4.0 * np.pi * h * h)
        w, dw = _wendland(q)
    return sigma * w, sigma * dw / h


def hermite(a, x):
    """Physicists' Hermite polynomial ``H_a(x)`` via the three-term recurrence."""
    if a < 0:
        raise InvalidArgument("Hermite order must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if a == 0:
        return h_prev
    h = 2.0 * x
    for k in range(1, a):
        h_prev, h = h, 2.0 * x * h - 2.0 * k * h_prev
    return h
