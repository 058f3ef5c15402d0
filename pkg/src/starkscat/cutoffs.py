"""
Smooth cutoff families, the convex regularizer and weighted norms.

Every cutoff is built from the normalized bump ``exp(-1/(1-s^2))`` on
``(-1, 1)``: a step of width ``hi - lo`` is ``1 - B(s)`` with ``B`` the
bump's CDF after mapping ``[lo, hi]`` onto ``[-1, 1]``.  ``B`` and its first
moment are tabulated once by Gauss-Legendre quadrature and interpolated with
cubic Hermite splines whose slopes are the exact integrands (error ~1e-14).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError

_TABLE_INTERVALS = 4096
_GL_ORDER = 12


def bump(s):
    """Unnormalized bump ``exp(-1/(1-s^2))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def bump_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    out[inside] = np.exp(-1.0 / w) * (-2.0 * si / (w * w))
    return out


@lru_cache(maxsize=1)
def _tables():
    edges = np.linspace(-1.0, 1.0, _TABLE_INTERVALS + 1)
    xg, wg = np.polynomial.legendre.leggauss(_GL_ORDER)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    vals = bump(nodes)
    mass = (vals * wg).sum(axis=1) * half
    moment = (vals * nodes * wg).sum(axis=1) * half
    norm = mass.sum()
    cdf = np.concatenate([[0.0], np.cumsum(mass)]) / norm
    mom = np.concatenate([[0.0], np.cumsum(moment)]) / norm
    dens = bump(edges) / norm
    cdf_spline = CubicHermiteSpline(edges, cdf, dens)
    mom_spline = CubicHermiteSpline(edges, mom, edges * dens)
    return norm, cdf_spline, mom_spline


def bump_norm():
    """``int_{-1}^{1} exp(-1/(1-s^2)) ds``."""
    return _tables()[0]


def bump_cdf(s):
    """Normalized CDF of the bump; 0 for ``s <= -1`` and 1 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)
    _, spl, _ = _tables()
    # clipping keeps interpolation noise from leaving [0, 1]
    inner = np.clip(spl(np.clip(s, -1.0, 1.0)), 0.0, 1.0)
    return np.where(s <= -1.0, 0.0, np.where(s >= 1.0, 1.0, inner))


def bump_moment(s):
    """``int_{-1}^{s} u * density(u) du``; vanishes at both ends."""
    s = np.asarray(s, dtype=float)
    _, _, spl = _tables()
    return np.where(np.abs(s) >= 1.0, 0.0, spl(np.clip(s, -1.0, 1.0)))


def bump_density(s):
    return bump(s) / bump_norm()


@dataclass(frozen=True)
class SmoothCutoff:
    """A concrete realization of ``chi(. < kappa)`` or ``chi(. > kappa)``.

    ``window`` is the transition interval ``(lo, hi)`` in the variable of the
    below-kind cutoff; the above-kind cutoff is ``chi_below(-kappa, -t)``.
    """

    kind: str
    threshold: float
    window: tuple

    def _below_args(self, t):
        t = np.asarray(t, dtype=float)
        return (-t, -1.0) if self.kind == "above" else (t, 1.0)

    def __call__(self, t):
        u, _ = self._below_args(t)
        lo, hi = self.window
        return 1.0 - bump_cdf(2.0 * (u - lo) / (hi - lo) - 1.0)

    def derivative(self, t, order=1):
        """First or second derivative in ``t``."""
        u, sgn = self._below_args(t)
        lo, hi = self.window
        scale = 2.0 / (hi - lo)
        s = scale * (u - lo) - 1.0
        if order == 1:
            return -sgn * scale * bump_density(s)
        if order == 2:
            return -(scale**2) * bump_prime(s) / bump_norm()
        raise ValueError("order must be 1 or 2")


def default_window(kappa):
    """Transition window of ``chi(. < kappa)``.

    Starts where the cutoff must equal one (``3kappa/4`` or ``4kappa/3``) and
    ends a quarter of the remaining gap before ``kappa``.
    """
    lo = 0.75 * kappa if kappa > 0 else 4.0 * kappa / 3.0
    hi = kappa - 0.25 * (kappa - lo)
    return lo, hi


def cutoff(kind, kappa, window=None):
    if kappa == 0:
        raise DomainError("cutoff threshold kappa must be nonzero")
    if kind not in ("below", "above"):
        raise ValueError(f"unknown cutoff kind {kind!r}")
    below_kappa = kappa if kind == "below" else -kappa
    win = default_window(below_kappa) if window is None else tuple(window)
    lo, hi = win
    if not lo < hi < below_kappa:
        raise DomainError(f"window {win} must satisfy lo < hi < {below_kappa}")
    return SmoothCutoff(kind, float(kappa), (float(lo), float(hi)))


def chi_below(kappa, t, window=None):
    """``chi(t < kappa)``: 1 far below the threshold, 0 from ``kappa`` on."""
    return cutoff("below", kappa, window)(t)


def chi_above(kappa, t, window=None):
    """``chi(t > kappa) = chi(-t < -kappa)``."""
    return cutoff("above", kappa, window)(t)


def chi_perp_below(kappa, t, window=None):
    return 1.0 - chi_below(kappa, t, window)


def chi_perp_above(kappa, t, window=None):
    return 1.0 - chi_above(kappa, t, window)


@dataclass(frozen=True)
class EvenCutoff:
    """``chi_eps``: equals 1 on ``|t| <= eps`` and vanishes for ``|t| >= 1.75 eps``."""

    eps: float

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return 1.0 - bump_cdf(2.0 * (t - self.eps) / (0.75 * self.eps) - 1.0)


def chi_eps(eps, t):
    if eps <= 0:
        raise DomainError("eps must be positive")
    return EvenCutoff(float(eps))(t)


@dataclass(frozen=True)
class ConvexRegularizer:
    """Smooth convex ``breve f``: ``max(1, t)`` mollified at half-width ``w``.

    Equal to 1 for ``t <= 1 - w`` and to ``t`` for ``t >= 1 + w``.
    """

    width: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.width <= 0.5:
            raise DomainError("mollification half-width must lie in (0, 1/2]")

    def __call__(self, t):
        u = np.asarray(t, dtype=float) - 1.0
        w = self.width
        return 1.0 + u * bump_cdf(u / w) - w * bump_moment(u / w)

    def derivative(self, t, order=1):
        u = (np.asarray(t, dtype=float) - 1.0) / self.width
        if order == 1:
            return bump_cdf(u)
        if order == 2:
            return bump_density(u) / self.width
        raise ValueError("order must be 1 or 2")


BREVE_F = ConvexRegularizer()


def breve_f(t):
    return BREVE_F(t)


def weighted_norm(y, m):
    """``<y>_m = (m^2 + |y|^2)^{1/2}`` over the last axis of ``y``."""
    if m < 1:
        raise DomainError(f"weighted norm needs m >= 1, got {m}")
    y = np.asarray(y, dtype=float)
    return np.sqrt(m * m + np.sum(y * y, axis=-1))
