"""Panel quadrature helpers: Gauss-Legendre panels and spectral tail integrals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C



@lru_cache(maxsize=16)
def gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def gl_panels(edges, n=16):
    """Nodes and weights of composite Gauss-Legendre on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    xg, wg = gauss_legendre(n)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=16)
def _cheb_lobatto(n):
    """Lobatto nodes on [-1, 1] (ascending) and the cumulative integration
    matrix ``M`` with ``(M f)_i = int_{-1}^{s_i} f``."""
    s = -np.cos(np.pi * np.arange(n) / (n - 1))
    V = C.chebvander(s, n - 1)
    Vinv = np.linalg.inv(V)
    anti = np.empty((n, n))
    for j in range(n):
        coef = np.zeros(n)
        coef[j] = 1.0
        ic = C.chebint(coef, lbnd=-1.0)
        anti[:, j] = C.chebval(s, ic)
    return s, anti @ Vinv


@dataclass(frozen=True)
class HalfLineGrid:
    """Geometric Chebyshev-Lobatto panels on ``[0, t_end]``.

    Panel ``j`` spans ``[edges[j], edges[j+1]]``; nodes are stored panel by
    panel (shared endpoints appear twice, which keeps every panel independent).
    """

    edges: np.ndarray
    order: int

    @classmethod
    def geometric(cls, first, t_end, ratio=1.5, order=20):
        edges = [0.0, first]
        while edges[-1] < t_end:
            edges.append(edges[-1] * ratio)
        return cls(np.asarray(edges), order)

    @property
    def npanels(self):
        return len(self.edges) - 1

    @property
    def nodes(self):
        s, _ = _cheb_lobatto(self.order)
        a, b = self.edges[:-1], self.edges[1:]
        return (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * s[None, :]).ravel()

    def tail_integral(self, values, extrapolate=True):
        """``int_{t_i}^{infinity} F`` at every node, for ``values`` of shape (..., N).

        Beyond ``t_end`` the integrand is continued as a power law whose exponent
        is read off the last two panel endpoints.  Returns ``(tail, bound)``
        where ``bound`` estimates the uncertainty of the extrapolated piece by
        the spread against the exponent read one panel earlier.
        """
        n = self.order
        _, M = _cheb_lobatto(n)
        F = np.asarray(values)
        shape = F.shape[:-1]
        P = F.reshape(shape + (self.npanels, n))
        half = 0.5 * np.diff(self.edges)
        cum = np.einsum("ij,...pj->...pi", M, P) * half[:, None]
        totals = cum[..., -1]
        after = np.flip(np.cumsum(np.flip(totals, -1), -1), -1)
        within = after[..., :, None] - cum
        if extrapolate:
            far, bound = self._power_law_tail(P)
        else:
            far, bound = np.zeros(shape), np.zeros(shape)
        tail = within + far[..., None, None]
        return tail.reshape(shape + (-1,)), bound

    def _power_law_tail(self, P):
        t = self.edges
        f2, f1, f0 = P[..., -3, -1], P[..., -2, -1], P[..., -1, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.real(f0 / f1)
            r0 = np.real(f1 / f2)
            p1 = -np.log(np.abs(r1)) / np.log(t[-1] / t[-2])
            p0 = -np.log(np.abs(r0)) / np.log(t[-2] / t[-3])
            ok = (r1 > 0) & (r0 > 0) & (p1 > 1.0) & (p0 > 1.0)
            scale = f0 * t[-1]
            far = np.where(ok, scale / np.where(ok, p1 - 1.0, 1.0), 0.0)
            spread = np.abs(scale) * np.abs(1.0 / np.where(ok, p1 - 1.0, 1.0)
                                            - 1.0 / np.where(ok, p0 - 1.0, 1.0))
            bound = np.where(ok, spread, np.abs(scale))
        zero = f0 == 0
        return np.where(zero, 0.0, far), np.where(zero, 0.0, bound)

    def total(self, values):
        tail, bound = self.tail_integral(values)
        return tail[..., 0], bound
