"""
WKB transport recursion along the free Stark flow.

With ``b_0 = 1`` and ``q_0 = q`` the layers are

    b_{k+1} = i int_0^{+-inf} q_k(Theta(t)) dt,   q_{k+1} = q b_{k+1} - Delta b_{k+1} / 2.

All layers are evaluated along a single orbit at once.  Writing
``B_k^beta(tau) = (d^beta b_k)(Theta(sign*tau) p)`` the group law gives

    B_{k+1}^beta(tau) = i sign int_tau^inf Q_k^beta,
    Q_k^beta = sum_{gamma <= beta} binom(beta, gamma) d^gamma q B_k^{beta-gamma}
               - 1/2 sum_j B_k^{beta + 2 e_j},

so spatial derivatives are exact (positions enter the free flow additively)
and only momentum derivatives need finite differences.  The cumulative
integrals use Chebyshev panels of geometrically growing width plus a power-law
tail beyond ``t_end``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, prod

import numpy as np

from . import cutoffs as co
from .classical import InvariantRegionSpec, PhasePoint, free_flow, in_region
from .errors import AccuracyError, ConstructionError, DomainError
from .potentials import PotentialModel
from .quadrature import HalfLineGrid


@lru_cache(maxsize=64)
def multi_indices(d, order):
    """All multi-indices of length ``d`` and total order ``<= order``, graded."""
    out = []
    for total in range(order + 1):
        for c in itertools.combinations_with_replacement(range(d), total):
            out.append(tuple(c.count(i) for i in range(d)))
    return tuple(out)


def _sub_indices(beta):
    return itertools.product(*(range(b + 1) for b in beta))


def _unit(d, j, k=1):
    return tuple(k if i == j else 0 for i in range(d))


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


@dataclass
class Layers:
    """Values at the base points: ``b[k][beta]`` for ``|beta| <= deriv_order``,
    ``q[k]`` and a relative uncertainty estimate of the tail extrapolation."""

    b: list
    q: list
    tail_error: np.ndarray

    def value(self, k):
        d = len(next(iter(self.b[k])))
        return self.b[k][(0,) * d]

    def gradient(self, k):
        d = len(next(iter(self.b[k])))
        return np.stack([self.b[k][_unit(d, j)] for j in range(d)], axis=-1)

    def laplacian(self, k):
        d = len(next(iter(self.b[k])))
        return sum(self.b[k][_unit(d, j, 2)] for j in range(d))


class TransportEngine:
    """Evaluates ``b_0..b_n`` and ``q_0..q_n`` with their spatial derivatives."""

    def __init__(self, q: PotentialModel, n=3, sign=1, deriv_order=2, t_end=1e7,
                 panel_order=20, max_ratio=2.0, resolution=1.0, chunk=32):
        if n < 0:
            raise DomainError("order must be >= 0")
        if sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        self.q = q
        self.n = int(n)
        self.sign = sign
        # deriv_order 0 skips the derivative layers (q_n is then unavailable)
        self.D = int(deriv_order)
        if self.D == 1:
            self.D = 2
        self.t_end = t_end
        self.panel_order = panel_order
        self.max_ratio = max_ratio
        self.resolution = resolution
        self.chunk = chunk

    def _edges(self, p: PhasePoint):
        """Panel edges fine enough that no orbit of the batch moves by more than
        ``resolution * r`` within one panel, and growing at most by ``max_ratio``."""
        edges = [0.0]
        t = 0.0
        core = max(self.q.r0, 0.05) if self.q.family != "gaussian" else 0.05 * self.q.width
        while t < self.t_end:
            pt = free_flow(p, self.sign * t)
            r = np.sqrt(pt.x**2 + np.sum(pt.y**2, axis=-1))
            v = np.sqrt(pt.eta**2 + np.sum(pt.zeta**2, axis=-1))
            # the velocity changes by the panel width over the panel
            ell = np.min((r + core) / (v + 1.0))
            h = self.resolution * ell
            if t > 0:
                h = min(h, (self.max_ratio - 1.0) * t)
            # never slower than one decade per few panels once the field dominates
            h = max(h, 0.25 * t)
            t += h
            edges.append(t)
        return np.asarray(edges)

    def layers(self, p: PhasePoint):
        if p.x.ndim == 0:
            res = self.layers(PhasePoint(p.x[None], p.y[None], p.eta[None], p.zeta[None]))
            return Layers([{k: v[0] for k, v in lay.items()} for lay in res.b],
                          [v[0] for v in res.q], res.tail_error[0])
        P = p.x.shape[0]
        parts = [self._layers_chunk(p[i:i + self.chunk]) for i in range(0, P, self.chunk)]
        b = [{beta: np.concatenate([pt.b[k][beta] for pt in parts]) for beta in parts[0].b[k]}
             for k in range(self.n + 1)]
        q = [np.concatenate([pt.q[k] for pt in parts]) for k in range(self.n + 1)]
        err = np.concatenate([pt.tail_error for pt in parts])
        return Layers(b, q, err)

    def _layers_chunk(self, p: PhasePoint):
        d = p.d
        n, D = self.n, self.D
        P = p.x.shape[0]
        zero = (0,) * d
        if self.q.is_zero or n == 0:
            b = [{beta: np.full(P, 1.0 + 0j if beta == zero else 0j) for beta in multi_indices(d, D)}]
            b += [{beta: np.zeros(P, complex) for beta in multi_indices(d, D)} for _ in range(n)]
            q0 = np.zeros(P, complex) if self.q.is_zero else self.q.value(p.position).astype(complex)
            qs = [q0] + [np.zeros(P, complex) for _ in range(n)]
            return Layers(b, qs, np.zeros(P))

        grid = HalfLineGrid(self._edges(p), self.panel_order)
        tau = grid.nodes
        base = PhasePoint(p.x[:, None], p.y[:, None, :], p.eta[:, None], p.zeta[:, None, :])
        orbit = free_flow(base, self.sign * tau[None, :])
        X = orbit.position  # (P, N, d)

        def top(k):
            return D + 2 * (n - k)

        qmax = max(top(1), 0)
        dq = self.q.derivative_table(multi_indices(d, qmax), X)

        # B[k][beta] along the orbit, complex (P, N)
        b_out, q_out = [], []
        err = np.zeros(P)
        for k in range(0, n + 1):
            if k == 0:
                Q = {beta: dq[beta] for beta in multi_indices(d, top(1))} if n >= 1 else {}
                b_out.append({beta: np.full(P, 1.0 + 0j if beta == zero else 0j)
                              for beta in multi_indices(d, D)})
                q_out.append(dq[zero][:, 0].astype(complex))
            else:
                B = {}
                for beta, Qb in Q_prev.items():
                    tail, bound = grid.tail_integral(Qb)
                    B[beta] = 1j * self.sign * tail
                    if beta == zero:
                        scale = np.abs(tail[:, 0])
                        err = np.maximum(err, np.where(scale > 0, bound / np.where(scale > 0, scale, 1), 0))
                b_out.append({beta: B[beta][:, 0] for beta in multi_indices(d, D)})
                Q = {}
                if k < n:
                    for beta in multi_indices(d, top(k + 1)):
                        Q[beta] = self._q_layer(beta, dq, B, d)
                if D >= 2 or k < n:
                    q_out.append(self._q_layer(zero, dq, B, d, first_only=True))
                else:
                    q_out.append(np.full(P, np.nan + 0j))
            Q_prev = Q
        return Layers(b_out, q_out, err)

    @staticmethod
    def _q_layer(beta, dq, B, d, first_only=False):
        sl = (slice(None), slice(0, 1)) if first_only else (slice(None), slice(None))
        acc = 0
        for gamma in _sub_indices(beta):
            rest = tuple(b - g for b, g in zip(beta, gamma))
            c = prod(comb(b, g) for b, g in zip(beta, gamma))
            acc = acc + c * dq[gamma][sl] * B[rest][sl]
        lap = sum(B[_add(beta, _unit(d, j, 2))][sl] for j in range(d))
        out = acc - 0.5 * lap
        return out[:, 0] if first_only else out


# ----------------------------------------------------------------------------------------


def _momentum_shift(p: PhasePoint, j, h):
    """Shift momentum component ``j`` (0 = eta, then zeta) by ``h`` (array or scalar)."""
    h = np.asarray(h, dtype=float)
    if j == 0:
        return PhasePoint(p.x, p.y, p.eta + h, p.zeta)
    e = np.zeros(p.d - 1)
    e[j - 1] = 1.0
    return PhasePoint(p.x, p.y, p.eta, p.zeta + h[..., None] * e)


@dataclass
class SymbolSequence:
    """Transport layers ``b_0..b_n``, ``q_0..q_n`` of one sign, with the Borel
    cutoffs once constructed (see :func:`borel_cutoffs`)."""

    potential: PotentialModel
    order: int = 3
    sign: int = 1
    m: int = 1
    eps: float = 0.5
    C: tuple = ()
    engine_options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.region = InvariantRegionSpec(self.m, self.eps, self.sign)
        self.engine = TransportEngine(self.potential, self.order, self.sign,
                                      **self.engine_options)

    def _check(self, p):
        if not np.all(in_region(p, self.region)):
            raise DomainError("point outside X^+-_eps")

    def layers(self, p: PhasePoint, check=True):
        if check:
            self._check(p)
        return self.engine.layers(p)

    def b(self, k, p, tol=1e-8):
        lay = self.layers(p)
        if np.any(lay.tail_error > tol):
            raise AccuracyError("tail extrapolation above tolerance", float(np.max(lay.tail_error)))
        return lay.value(k)

    def q_layer(self, k, p):
        return self.layers(p).q[k]

    def value_engine(self, level):
        """A cheaper engine returning only ``b_0..b_level`` (no derivatives)."""
        key = ("values", level)
        cache = self.__dict__.setdefault("_engines", {})
        if key not in cache:
            opts = dict(self.engine_options)
            opts["deriv_order"] = 0
            cache[key] = TransportEngine(self.potential, level, self.sign, **opts)
        return cache[key]

    def with_cutoffs(self, C):
        return SymbolSequence(self.potential, self.order, self.sign, self.m, self.eps,
                              tuple(float(c) for c in C), self.engine_options)


def _require_level(seq, k):
    if not 0 <= k <= seq.order:
        raise DomainError(f"level {k} outside 0..{seq.order}")


def b_next(seq: SymbolSequence, k, p: PhasePoint):
    """``b_{k+1}`` at ``p`` (the sequence must have order ``>= k + 1``)."""
    _require_level(seq, k + 1)
    return seq.b(k + 1, p)


def q_next(seq: SymbolSequence, k, p: PhasePoint):
    """``q_{k+1} = q b_{k+1} - Delta b_{k+1} / 2`` at ``p``."""
    _require_level(seq, k + 1)
    return seq.q_layer(k + 1, p)


def fd_laplacian_b(seq: SymbolSequence, k, p: PhasePoint, h):
    """5-point finite-difference Laplacian of ``b_k`` in ``(x, y)``."""
    d = p.d
    vals = seq.layers(p).value(k)
    acc = 0
    for j in range(d):
        f = []
        for s in (-2, -1, 1, 2):
            if j == 0:
                pp = PhasePoint(p.x + s * h, p.y, p.eta, p.zeta)
            else:
                e = np.zeros(d - 1)
                e[j - 1] = s * h
                pp = PhasePoint(p.x, p.y + e, p.eta, p.zeta)
            f.append(seq.layers(pp).value(k))
        acc = acc + (-f[0] + 16 * f[1] - 30 * vals + 16 * f[2] - f[3]) / (12 * h * h)
    return acc


def _stencil_point(p, dx, dy, deta, dzeta):
    return PhasePoint(p.x + dx, p.y + dy, p.eta + deta, p.zeta + dzeta)


def transport_residual(seq: SymbolSequence, k1, p: PhasePoint, h=None, rel_step=0.02):
    """``|i (d_eta + (eta, zeta).grad) b_{k1} - q b_{k1-1} + Delta b_{k1-1}/2|``.

    The transport derivative is a central difference along the generator
    ``V = (eta, zeta, 1, 0)`` and the Laplacian a 3-point stencil per axis, all
    with step ``h`` (default ``rel_step * sqrt(2x + 2<y>_m)``), so the residual
    is ``O(h^2)``.
    """
    _require_level(seq, k1)
    if k1 < 1:
        raise DomainError("residual is defined for levels >= 1")
    d = p.d
    if h is None:
        S = 2 * p.x + 2 * co.weighted_norm(p.y, seq.m)
        h = rel_step * np.sqrt(np.maximum(S, 1.0))
    h = np.asarray(h, dtype=float)
    hy = h[..., None]
    pts = [
        _stencil_point(p, h * p.eta, hy * p.zeta, h, 0 * p.zeta),
        _stencil_point(p, -h * p.eta, -hy * p.zeta, -h, 0 * p.zeta),
    ]
    for j in range(d):
        for s in (1, -1):
            if j == 0:
                pts.append(_stencil_point(p, s * h, 0 * p.y, 0 * h, 0 * p.zeta))
            else:
                e = np.zeros(d - 1)
                e[j - 1] = 1.0
                pts.append(_stencil_point(p, 0 * h, s * hy * e, 0 * h, 0 * p.zeta))
    for pt in pts:
        seq._check(pt)
    eng = seq.value_engine(k1)
    vals = [eng.layers(pt) for pt in pts]
    center = eng.layers(p)
    deriv = (vals[0].value(k1) - vals[1].value(k1)) / (2 * h)
    lap = 0
    for j in range(d):
        lap = lap + (vals[2 + 2 * j].value(k1 - 1) - 2 * center.value(k1 - 1)
                     + vals[3 + 2 * j].value(k1 - 1)) / (h * h)
    qv = seq.potential.value(p.position)
    return np.abs(1j * deriv - qv * center.value(k1 - 1) + 0.5 * lap)


def residual_convergence(seq: SymbolSequence, k1, p: PhasePoint, rel_steps=(0.08, 0.04, 0.02)):
    """Residual maxima for a sequence of steps and the fitted order in ``h``."""
    res = np.array([np.max(transport_residual(seq, k1, p, rel_step=s)) for s in rel_steps])
    order = np.polyfit(np.log(rel_steps), np.log(res), 1)[0]
    return res, float(order)


@dataclass(frozen=True)
class RayFit:
    exponent: float
    saturated: bool
    scales: np.ndarray
    values: np.ndarray


def ray_points(seq: SymbolSequence, scales, direction=(1.0, 0.3), a_value=0.8, zeta=None):
    """Points ``x = s*dx``, ``|y| = s*dy`` along a ray with fixed ``a_breve``."""
    s = np.asarray(scales, dtype=float)
    ndim = (len(zeta) if zeta is not None else 2)
    zeta = np.zeros(ndim) if zeta is None else np.asarray(zeta, dtype=float)
    y = np.zeros((s.size, ndim))
    y[:, 0] = direction[1] * s
    x = direction[0] * s
    yn = co.weighted_norm(y, seq.m)
    S = 2 * x + 2 * yn
    eta = seq.sign * a_value * np.sqrt(S) - (y / yn[:, None]) @ zeta
    return PhasePoint(x, y, eta, np.tile(zeta, (s.size, 1))), 1 + x + yn


def decay_fit(seq: SymbolSequence, k, scales=None, which="b", **ray):
    """Fitted decay exponent of ``|b_k|`` (or ``|q_k|``) in ``1 + x + <y>_m`` along a ray."""
    if k < 1 and which == "b":
        raise DomainError("decay fit needs k >= 1")
    scales = np.geomspace(50, 5000, 9) if scales is None else scales
    p, w = ray_points(seq, scales, **ray)
    lay = seq.layers(p)
    vals = np.abs(lay.value(k) if which == "b" else lay.q[k])
    mask = vals > 1e-250
    if mask.sum() < 3:
        return RayFit(np.inf, True, w, vals)
    slope = np.polyfit(np.log(w[mask]), np.log(vals[mask]), 1)[0]
    if -slope > 50:
        return RayFit(np.inf, True, w, vals)
    return RayFit(float(-slope), False, w, vals)


# ---------------------------------------------------------------- Borel construction


def f_m(x, y, m):
    return np.sqrt(co.breve_f(2 * x + 2 * co.weighted_norm(y, m)))


@dataclass(frozen=True)
class BorelLattice:
    """Test lattice parametrized by ``f`` (geometric), ``|y| / (f^2/2)`` fractions,
    values of ``a`` and a box of transverse momenta."""

    f_min: float = 2.0
    f_max: float = 2e4
    n_f: int = 40
    y_fractions: tuple = (0.0, 0.5)
    a_values: tuple = (-0.45, 0.0, 0.7, 2.0)
    zeta_values: tuple = (0.0, 1.0)

    def points(self, seq: SymbolSequence, d=3):
        pts = []
        for f in np.geomspace(self.f_min, self.f_max, self.n_f):
            for yf in self.y_fractions:
                for a in self.a_values:
                    for z in self.zeta_values:
                        pts.append((f, yf, a * seq.eps / 0.5 if a < 0 else a, z))
        arr = np.array(pts)
        f, yf, a, z = arr.T
        n = d - 1
        y = np.zeros((len(f), n))
        y[:, 0] = yf * f * f / 2
        zeta = np.zeros((len(f), n))
        zeta[:, -1] = z
        yn = co.weighted_norm(y, seq.m)
        x = f * f / 2 - yn
        eta = seq.sign * a * f - np.sum(y / yn[:, None] * zeta, axis=-1)
        return PhasePoint(x, y, eta, zeta)


def weighted_derivatives(seq: SymbolSequence, p: PhasePoint, max_order=2, eps_B=1.0,
                         rel_step=1e-2):
    """Per point and level ``k``: the max over derivative orders ``<= min(k, max_order)``
    of ``|d_(eta,zeta)^al d_x^be d_y^ga b_k| f^(2 k delta + |al| + 2|be| + 2|ga| - eps_B)``.

    Spatial derivatives come from the engine, momentum derivatives from
    central differences with step ``rel_step * f``.
    """
    d = p.d
    n = seq.order
    delta = seq.potential.delta
    f = f_m(p.x, p.y, seq.m)
    h = rel_step * f
    base = seq.layers(p, check=False)
    shifted = {}
    for j in range(d):
        for s in (1, -1):
            shifted[(j, s)] = seq.layers(_momentum_shift(p, j, s * h), check=False)
    cross = {}
    if max_order >= 2:
        for i, j in itertools.combinations(range(d), 2):
            for si in (1, -1):
                for sj in (1, -1):
                    cross[(i, j, si, sj)] = seq.layers(
                        _momentum_shift(_momentum_shift(p, i, si * h), j, sj * h), check=False)
    out = np.zeros((n + 1, p.x.shape[0]))
    zero = (0,) * d
    for k in range(n + 1):
        cap = min(k, max_order)
        w0 = f ** (2 * k * delta - eps_B)
        vals = [np.abs(base.b[k][zero]) * w0]
        for beta in multi_indices(d, cap):
            if sum(beta) == 0:
                continue
            weight = 2 * sum(beta)
            vals.append(np.abs(base.b[k][beta]) * w0 * f**weight)
        for j in range(d):
            if cap >= 1:
                d1 = (shifted[(j, 1)].b[k][zero] - shifted[(j, -1)].b[k][zero]) / (2 * h)
                vals.append(np.abs(d1) * w0 * f)
            if cap >= 2:
                d2 = (shifted[(j, 1)].b[k][zero] - 2 * base.b[k][zero]
                      + shifted[(j, -1)].b[k][zero]) / (h * h)
                vals.append(np.abs(d2) * w0 * f**2)
                for i in range(d):
                    e = _unit(d, i)
                    mixed = (shifted[(j, 1)].b[k][e] - shifted[(j, -1)].b[k][e]) / (2 * h)
                    vals.append(np.abs(mixed) * w0 * f**3)
        if cap >= 2:
            for i, j in itertools.combinations(range(d), 2):
                c = cross
                mix = (c[(i, j, 1, 1)].b[k][zero] - c[(i, j, 1, -1)].b[k][zero]
                       - c[(i, j, -1, 1)].b[k][zero] + c[(i, j, -1, -1)].b[k][zero]) / (4 * h * h)
                vals.append(np.abs(mix) * w0 * f**2)
        out[k] = np.max(np.stack(vals), axis=0)
    return out, f


def borel_cutoffs(seq: SymbolSequence, lattice: BorelLattice | None = None, C_max=1e4,
                  growth=1.05, max_order=2, eps_B=1.0, d=3):
    """Constructive ``C_0 = 2 < C_1 < ... < C_n`` with ``C_k > 1 + C_{k-1}``.

    ``C_k`` is the smallest candidate ``(1 + C_{k-1}) growth^j``, ``j >= 1``, such
    that the weighted derivative sup over lattice points with ``f > C_k`` is at
    most ``2^{-k}``.  Returns ``(C, report)``.
    """
    lattice = BorelLattice() if lattice is None else lattice
    if lattice.f_max < C_max:
        raise DomainError("lattice must extend beyond the C_max budget")
    p = lattice.points(seq, d)
    W, f = weighted_derivatives(seq, p, max_order, eps_B)
    C = [2.0]
    for k in range(1, seq.order + 1):
        c = (1.0 + C[-1]) * growth
        while True:
            sel = f > c
            worst = np.max(W[k][sel]) if np.any(sel) else 0.0
            if worst <= 2.0**-k:
                break
            c *= growth
            if c > C_max:
                i = int(np.argmax(np.where(sel, W[k], -np.inf)))
                raise ConstructionError(f"C_{k} exceeds budget {C_max:g}",
                                        {"f": float(f[i]), "weighted": float(W[k][i])})
        C.append(c)
    return tuple(C), {"weighted_sup": W, "f": f}


def verify_borel_bound(seq: SymbolSequence, p: PhasePoint, max_order=2, eps_B=1.0):
    """Worst ratio ``weighted / 2^{-k}`` over points with ``f > C_k`` (``<= 1`` passes)."""
    W, f = weighted_derivatives(seq, p, max_order, eps_B)
    worst = 0.0
    for k in range(1, seq.order + 1):
        sel = f > seq.C[k]
        if np.any(sel):
            worst = max(worst, float(np.max(W[k][sel])) * 2.0**k)
    return worst


# ---------------------------------------------------------------- cutoff derivatives


@dataclass
class _CutoffJet:
    value: np.ndarray
    grad: np.ndarray  # (P, d) in (x, y)
    lap: np.ndarray
    d_eta: np.ndarray


def _fm_jet(p: PhasePoint, m):
    n = p.d - 1
    yn = co.weighted_norm(p.y, m)
    yhat = p.y / yn[..., None]
    u = 2 * p.x + 2 * yn
    B1 = co.BREVE_F.derivative(u, 1)
    B2 = co.BREVE_F.derivative(u, 2)
    f = np.sqrt(co.breve_f(u))
    grad_u = np.concatenate([np.full(p.x.shape + (1,), 2.0), 2 * yhat], axis=-1)
    lap_u = 2 * ((n - 1) / yn + m * m / yn**3)
    gu2 = np.sum(grad_u**2, axis=-1)
    grad_f = (B1 / (2 * f))[..., None] * grad_u
    lap_f = B2 * gu2 / (2 * f) + B1 * lap_u / (2 * f) - B1**2 * gu2 / (4 * f**3)
    return f, grad_f, lap_f, yn, yhat


def chi_k_jet(p: PhasePoint, m, C):
    f, gf, lf, _, _ = _fm_jet(p, m)
    cut = co.cutoff("above", C)
    c0, c1, c2 = cut(f), cut.derivative(f, 1), cut.derivative(f, 2)
    return _CutoffJet(c0, c1[..., None] * gf, c2 * np.sum(gf**2, axis=-1) + c1 * lf,
                      np.zeros_like(f))


def chi_eps_jet(p: PhasePoint, m, eps, sign):
    """``chi(sign * a > -eps)`` with its ``(x, y)`` gradient, Laplacian and ``d_eta``."""
    n = p.d - 1
    f, gf, lf, yn, yhat = _fm_jet(p, m)
    N = p.eta + np.sum(yhat * p.zeta, axis=-1)
    yz = np.sum(p.y * p.zeta, axis=-1)
    gN = np.concatenate([np.zeros(p.x.shape + (1,)),
                         (p.zeta - yhat * np.sum(yhat * p.zeta, axis=-1)[..., None]) / yn[..., None]],
                        axis=-1)
    y2 = np.sum(p.y**2, axis=-1)
    lN = yz * (-(n + 2) / yn**3 + 3 * y2 / yn**5)
    a = N / f
    ga = gN / f[..., None] - (N / f**2)[..., None] * gf
    la = (lN / f - 2 * np.sum(gN * gf, axis=-1) / f**2 - N * lf / f**2
          + 2 * N * np.sum(gf**2, axis=-1) / f**3)
    cut = co.cutoff("above", -eps)
    c0 = cut(sign * a)
    c1 = sign * cut.derivative(sign * a, 1)
    c2 = cut.derivative(sign * a, 2)
    return _CutoffJet(c0, c1[..., None] * ga, c2 * np.sum(ga**2, axis=-1) + c1 * la, c1 / f)


def a_B(seq: SymbolSequence, p: PhasePoint, n=None):
    """Borel-regularized ``chi_eps^+- sum_{k<=n} chi_k b_k``."""
    n = seq.order if n is None else n
    if len(seq.C) < n + 1:
        raise DomainError("construct the cutoffs first (borel_cutoffs)")
    lay = seq.engine.layers(p)
    e = chi_eps_jet(p, seq.m, seq.eps, seq.sign).value
    total = 0
    for k in range(n + 1):
        total = total + chi_k_jet(p, seq.m, seq.C[k]).value * lay.value(k)
    return e * total


def r_k_remainder(seq: SymbolSequence, k, p: PhasePoint, terms=("eta", "transport", "gradient", "laplacian")):
    """The remainder ``r_k`` produced by the cutoffs in the transport equation:

    ``i b_k (chi_k d_eta chi_eps + (eta, zeta).grad(chi_k chi_eps))
    + grad b_k . grad(chi_k chi_eps) + b_k Delta(chi_k chi_eps) / 2``.

    ``terms`` selects the summands (useful to isolate the ``d_eta`` part).
    """
    if len(seq.C) < k + 1:
        raise DomainError("construct the cutoffs first (borel_cutoffs)")
    lay = seq.engine.layers(p)
    ck = chi_k_jet(p, seq.m, seq.C[k])
    ce = chi_eps_jet(p, seq.m, seq.eps, seq.sign)
    grad = ce.value[..., None] * ck.grad + ck.value[..., None] * ce.grad
    lap = ce.value * ck.lap + 2 * np.sum(ck.grad * ce.grad, axis=-1) + ck.value * ce.lap
    b = lay.value(k)
    out = 0
    if "eta" in terms:
        out = out + 1j * b * ck.value * ce.d_eta
    if "transport" in terms:
        out = out + 1j * b * np.sum(p.momentum * grad, axis=-1)
    if "gradient" in terms:
        out = out + np.sum(lay.gradient(k) * grad, axis=-1)
    if "laplacian" in terms:
        out = out + 0.5 * b * lap
    return out
