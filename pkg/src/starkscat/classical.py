"""
Free and perturbed classical Stark dynamics for ``h = (eta^2 + |zeta|^2)/2 - x + q``.

The free flow is explicit; the perturbed flow is integrated with an embedded
8(5,3) Runge-Kutta pair.  The symbol ``a_m`` and the invariant regions
``X^+-_eps = {x + <y>_m > 0, +-a_breve > -eps}`` are evaluated exactly,
together with the classical Mourre monotonicity of ``a_breve`` along the
free flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .cutoffs import breve_f, weighted_norm
from .errors import DivergenceError, DomainError, IntegrationError
from .potentials import PotentialModel


@dataclass(frozen=True)
class PhasePoint:
    """``(x, y, eta, zeta)``, optionally batched: ``x, eta`` of shape ``S`` and
    ``y, zeta`` of shape ``S + (d-1,)``."""

    x: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        for name in ("x", "eta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("y", "zeta"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                v = v[None]
            object.__setattr__(self, name, v)
        if self.y.shape != self.zeta.shape:
            raise DomainError("y and zeta must have the same shape")

    @property
    def d(self):
        return self.y.shape[-1] + 1

    @property
    def position(self):
        return np.concatenate([self.x[..., None], self.y], axis=-1)

    @property
    def momentum(self):
        return np.concatenate([self.eta[..., None], self.zeta], axis=-1)

    def to_array(self):
        return np.concatenate([self.position, self.momentum], axis=-1)

    @classmethod
    def from_array(cls, z):
        z = np.asarray(z, dtype=float)
        d = z.shape[-1] // 2
        return cls(z[..., 0], z[..., 1:d], z[..., d], z[..., d + 1:])

    def __getitem__(self, idx):
        return PhasePoint(self.x[idx], self.y[idx], self.eta[idx], self.zeta[idx])


def free_energy(p: PhasePoint):
    return 0.5 * (p.eta**2 + np.sum(p.zeta**2, axis=-1)) - p.x


def energy(p: PhasePoint, q: PotentialModel):
    return free_energy(p) + q.value(p.position)


def free_flow(p0: PhasePoint, t):
    """Explicit free Stark flow; ``t`` broadcasts against the batch shape."""
    t = np.asarray(t, dtype=float)
    x = 0.5 * t * t + t * p0.eta + p0.x
    y = t[..., None] * p0.zeta + p0.y
    return PhasePoint(x, y, t + p0.eta, np.broadcast_to(p0.zeta, y.shape))


def _rhs(q: PotentialModel, d: int):
    def rhs(_t, z):
        X, P = z[:d], z[d:]
        acc = -q.gradient(X)
        acc[0] += 1.0
        return np.concatenate([P, acc])
    return rhs


def perturbed_flow(p0: PhasePoint, t, q: PotentialModel, tol=1e-10, dense=False):
    """Integrate Hamilton's equations of ``h_0 + q`` from ``p0`` to time ``t``.

    ``p0`` must be a single point.  With ``dense=True`` the solver's dense
    output is returned alongside the end point.
    """
    if p0.x.ndim:
        raise DomainError("perturbed_flow integrates a single orbit")
    d = p0.d
    z0 = p0.to_array()
    if t == 0:
        return (p0, None) if dense else p0
    sol = solve_ivp(_rhs(q, d), (0.0, float(t)), z0, method="DOP853", rtol=tol,
                    atol=tol * 1e-2, dense_output=dense)
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}", float(sol.t[-1]))
    end = PhasePoint.from_array(sol.y[:, -1])
    return (end, sol.sol) if dense else end


def _tail_bound(q: PotentialModel, x, eta):
    """Rigorous bound on ``int_0^inf |grad q|`` along the remaining orbit.

    Needs ``x > 0``, ``eta >= 0`` and ``grad_bound(x) < 1``: then ``x(t)`` grows
    at least like ``x + eta t + a t^2 / 2`` with ``a = 1 - grad_bound(x)``,
    so ``r(t)`` does too and ``|grad q| <= grad_bound(r)``.
    """
    if x <= 0 or eta < 0:
        return np.inf
    a = 1.0 - float(q.gradient_bound(x))
    if a <= 0:
        return np.inf
    val, _ = quad(lambda s: float(q.gradient_bound(x + eta * s + 0.5 * a * s * s)),
                  0.0, np.inf, limit=200, epsabs=0.0, epsrel=1e-10)
    return val


@dataclass(frozen=True)
class AsymptoticMomentum:
    zeta: np.ndarray
    bound: float
    T: float


def asymptotic_transverse_momentum(p0: PhasePoint, q: PotentialModel, direction=+1,
                                   tol=1e-8, T0=10.0, T_max=1e6, ode_tol=1e-11):
    """``zeta^+- = lim zeta(t)`` as ``t -> +-inf`` with a certified tail bound.

    The orbit is integrated in blocks of doubling length until the tail
    bound of :func:`_tail_bound` drops below ``tol``.  The backward limit
    uses time reversal: ``zeta^-(p) = -zeta^+(x, y, -eta, -zeta)``.
    """
    if direction not in (1, -1):
        raise DomainError("direction must be +1 or -1")
    if direction == -1:
        rev = PhasePoint(p0.x, p0.y, -p0.eta, -p0.zeta)
        res = asymptotic_transverse_momentum(rev, q, +1, tol, T0, T_max, ode_tol)
        return AsymptoticMomentum(-res.zeta, res.bound, res.T)
    if q.is_zero:
        return AsymptoticMomentum(p0.zeta.copy(), 0.0, 0.0)
    p, T, step = p0, 0.0, T0
    while True:
        p = perturbed_flow(p, step, q, ode_tol)
        T += step
        bound = _tail_bound(q, float(p.x), float(p.eta))
        if bound < tol:
            return AsymptoticMomentum(p.zeta.copy(), bound, T)
        if T >= T_max:
            raise DivergenceError(f"orbit did not escape within T={T_max:g} (bound {bound:.3g})")
        step = T


@dataclass(frozen=True)
class InvariantRegionSpec:
    m: int = 1
    eps: float = 0.5
    sign: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise DomainError("m must be a positive integer")
        if not 0.0 < self.eps < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")


def _longitudinal(p: PhasePoint, m):
    yn = weighted_norm(p.y, m)
    yhat = p.y / yn[..., None]
    num = p.eta + np.sum(yhat * p.zeta, axis=-1)
    return num, 2 * p.x + 2 * yn, yn, yhat


def symbol_a(p: PhasePoint, m: int):
    """``a_m = (eta + yhat_m . zeta) / f_m`` with ``f_m = sqrt(breve_f(2x + 2<y>_m))``."""
    num, S, _, _ = _longitudinal(p, m)
    return num / np.sqrt(breve_f(S))


def a_breve(p: PhasePoint, m: int):
    """Unregularized ``(eta + yhat_m . zeta) / sqrt(2x + 2<y>_m)``; needs ``x + <y>_m > 0``."""
    num, S, _, _ = _longitudinal(p, m)
    if np.any(S <= 0):
        raise DomainError("a_breve needs x + <y>_m > 0")
    return num / np.sqrt(S)


def a_breve_rate(p: PhasePoint, m: int):
    """Closed-form ``d a_breve / dt`` along the free flow."""
    num, S, yn, yhat = _longitudinal(p, m)
    yz = np.sum(yhat * p.zeta, axis=-1)
    dnum = 1.0 + (np.sum(p.zeta**2, axis=-1) - yz**2) / yn
    return (dnum - num**2 / S) / np.sqrt(S)


def in_region(p: PhasePoint, spec: InvariantRegionSpec):
    num, S, _, _ = _longitudinal(p, spec.m)
    with np.errstate(invalid="ignore", divide="ignore"):
        ab = num / np.sqrt(np.where(S > 0, S, 1.0))
    return (S > 0) & (spec.sign * ab > -spec.eps)


def sample_region(rng, n, spec: InvariantRegionSpec, d=3, S_range=(0.5, 1e4),
                  y_scale=20.0, zeta_scale=2.0, a_max=3.0):
    """Random points of ``X^+-_eps`` parametrized by ``S = 2x + 2<y>_m``,
    ``+-a_breve`` uniform on ``(-eps, a_max)``, and Gaussian ``y, zeta``."""
    S = np.exp(rng.uniform(np.log(S_range[0]), np.log(S_range[1]), n))
    y = rng.normal(scale=y_scale, size=(n, d - 1))
    zeta = rng.normal(scale=zeta_scale, size=(n, d - 1))
    yn = weighted_norm(y, spec.m)
    x = 0.5 * S - yn
    ab = spec.sign * rng.uniform(-spec.eps, a_max, n)
    ab = np.where(spec.sign * ab <= -spec.eps, spec.sign * (-spec.eps + 1e-9), ab)
    eta = ab * np.sqrt(S) - np.sum(y / yn[:, None] * zeta, axis=-1)
    return PhasePoint(x, y, eta, zeta)


@dataclass
class InvarianceReport:
    passed: bool
    best_margin: float
    intermediate_margin: float
    a_margin: float
    mourre_slack: float
    n_points: int
    n_steps: int
    failures: list = field(default_factory=list)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if k != "failures"} | {
            "n_failures": len(self.failures)}


def _require_region(p0, spec):
    if not np.all(in_region(p0, spec)):
        raise DomainError("initial point outside X^+-_eps")


def region_invariance_check(p0: PhasePoint, spec: InvariantRegionSpec, T=100.0, steps=401):
    """Check the invariance of ``X^+-_eps`` along the free flow for ``+-t in [0, T]``.

    Margins are relative: ``(S(t) - (1-eps)(t^2 + S_0)) / (t^2 + S_0)`` for the
    final growth bound, the same for the intermediate bound, and
    ``+-a_breve(t) + eps`` for the region condition.
    """
    _require_region(p0, spec)
    t = spec.sign * np.linspace(0.0, T, steps)
    shape = p0.x.shape
    tt = t.reshape((steps,) + (1,) * len(shape))
    pt = free_flow(p0, tt)
    num0, S0, _, _ = _longitudinal(p0, spec.m)
    _, S, _, _ = _longitudinal(pt, spec.m)
    scale = tt**2 + S0
    best = (S - (1 - spec.eps) * scale) / scale
    inter = (S - (tt**2 - 2 * np.abs(tt) * spec.eps * np.sqrt(S0) + S0)) / scale
    amarg = spec.sign * a_breve(pt, spec.m) + spec.eps
    ok = (best.min(axis=0) >= -1e-12) & (inter.min(axis=0) >= -1e-12) & (amarg.min(axis=0) > 0)
    fails = list(np.flatnonzero(~np.atleast_1d(ok)))
    return InvarianceReport(bool(np.all(ok)), float(best.min()), float(inter.min()),
                            float(amarg.min()), np.nan, int(np.prod(shape)), steps, fails)


def mourre_monotonicity(p0: PhasePoint, spec: InvariantRegionSpec, T=100.0, steps=401,
                        rel_step=1e-3):
    """Minimum over the orbit of ``d a_breve/dt - (1 - a_breve^2)/sqrt(S)``.

    The time derivative is a 5-point central difference with step
    ``rel_step * sqrt(S) / (1 + |zeta| + |a_breve|)``, which tracks the local
    time scale of ``a_breve``.
    """
    _require_region(p0, spec)
    t = spec.sign * np.linspace(0.0, T, steps)
    tt = t.reshape((steps,) + (1,) * p0.x.ndim)
    pt = free_flow(p0, tt)
    _, S, _, _ = _longitudinal(pt, spec.m)
    ab = a_breve(pt, spec.m)
    h = rel_step * np.sqrt(S) / (1 + np.linalg.norm(p0.zeta, axis=-1) + np.abs(ab))
    vals = [a_breve(free_flow(p0, tt + k * h), spec.m) for k in (-2, -1, 1, 2)]
    deriv = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    slack = deriv - (1 - ab**2) / np.sqrt(S)
    return float(slack.min())


@dataclass(frozen=True)
class DecayFit:
    value_exponent: float
    gradient_exponent: float
    passed: bool
    saturated: bool


def _fit_exponent(r, v):
    mask = v > 1e-280
    if mask.sum() < 3:
        return np.inf
    slope = np.polyfit(np.log(r[mask]), np.log(v[mask]), 1)[0]
    return -slope


def verify_potential_decay(q: PotentialModel, delta, rays=16, rng=None, d=3,
                           r_range=(10.0, 1e4), samples=25):
    """Fit the decay exponents of ``|q|`` and ``|grad q|`` along random rays.

    Returns the smallest exponents over all rays; super-polynomial decay is
    reported as ``inf`` (``saturated``).
    """
    if q.is_zero:
        raise DomainError("decay fit needs a nonzero potential")
    rng = np.random.default_rng(0) if rng is None else rng
    dirs = rng.normal(size=(rays, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = np.geomspace(*r_range, samples)
    ev, eg = np.inf, np.inf
    for u in dirs:
        X = r[:, None] * u
        ev = min(ev, _fit_exponent(r, np.abs(q.value(X))))
        eg = min(eg, _fit_exponent(r, np.linalg.norm(q.gradient(X), axis=-1)))
    # a saturated fit has a slope far beyond any power the window can resolve
    saturated = ev > 50 or not np.isfinite(ev)
    if saturated:
        ev, eg = np.inf, np.inf
    passed = bool(ev >= 0.5 + delta - 0.05 and eg >= 1.5 + delta - 0.05)
    return DecayFit(float(ev), float(eg), passed, bool(saturated))
