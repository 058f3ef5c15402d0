"""
Radial short-range potentials ``q(X) = g(|X|^2 + c)`` with exact derivatives.

Any partial derivative of a radial function is a finite sum
``sum_j g^(j)(s) P_j(X)`` with polynomial ``P_j``; the polynomials follow from
``d_i [g^(j) P] = g^(j+1) 2 X_i P + g^(j) d_i P`` and are cached per
multi-index, so derivatives of every order the transport recursion needs are
exact up to rounding.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

FAMILIES = ("coulomb", "power-law", "gaussian", "zero")


def _poly_derivative(poly, i):
    out = {}
    for exps, c in poly.items():
        e = exps[i]
        if e == 0:
            continue
        new = exps[:i] + (e - 1,) + exps[i + 1:]
        out[new] = out.get(new, 0.0) + c * e
    return out


def _poly_times_2xi(poly, i):
    out = {}
    for exps, c in poly.items():
        new = exps[:i] + (exps[i] + 1,) + exps[i + 1:]
        out[new] = out.get(new, 0.0) + 2.0 * c
    return out


def _add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0.0}


@lru_cache(maxsize=4096)
def radial_terms(beta):
    """Terms ``{j: {exponents: coeff}}`` of ``d^beta g(|X|^2 + c)``."""
    d = len(beta)
    if sum(beta) == 0:
        return {0: {(0,) * d: 1.0}}
    i = next(k for k, b in enumerate(beta) if b > 0)
    prev = radial_terms(beta[:i] + (beta[i] - 1,) + beta[i + 1:])
    out = {}
    for j, poly in prev.items():
        out[j + 1] = _add(out.get(j + 1, {}), _poly_times_2xi(poly, i))
        dp = _poly_derivative(poly, i)
        if dp:
            out[j] = _add(out.get(j, {}), dp)
    return {j: p for j, p in out.items() if p}


@dataclass(frozen=True)
class PotentialModel:
    """Short-range perturbation ``q_1`` of the Stark Hamiltonian.

    ``power-law``/``coulomb``: ``kappa (r^2 + r0^2)^(-alpha/2)``;
    ``gaussian``: ``kappa exp(-r^2 / (2 width^2))``.  ``delta`` is the declared
    short-range exponent: ``|q| = O(r^(-1/2-delta))``.
    """

    family: str = "coulomb"
    kappa: float = 1.0
    alpha: float = 1.0
    delta: float = 0.5
    r0: float = 0.05
    width: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown potential family {self.family!r}")
        if not 0.0 < self.delta <= 0.5:
            raise DomainError("delta must lie in (0, 1/2]")
        if self.r0 < 0:
            raise DomainError("r0 must be >= 0")
        if self.family in ("coulomb", "power-law") and self.alpha < 0.5 + self.delta - 1e-12:
            raise DomainError(
                f"power-law tail r^-{self.alpha} is not short-range with delta={self.delta}")
        if self.family == "gaussian" and self.width <= 0:
            raise DomainError("gaussian width must be positive")

    @property
    def is_zero(self):
        return self.family == "zero" or self.kappa == 0.0

    @property
    def homogeneity(self):
        """Decay exponent of the tail (``inf`` for gaussian)."""
        if self.family in ("coulomb", "power-law"):
            return self.alpha
        return np.inf

    def to_dict(self):
        return asdict(self)

    def scaled(self, factor):
        return PotentialModel(self.family, self.kappa * factor, self.alpha, self.delta,
                              self.r0, self.width)

    # g^(j)(s) for the profile g
    def _profile_derivative(self, j, s):
        if self.is_zero:
            return np.zeros_like(s)
        if self.family == "gaussian":
            a = -0.5 / self.width**2
            return self.kappa * a**j * np.exp(a * s)
        p = -0.5 * self.alpha
        coeff = self.kappa
        for k in range(j):
            coeff *= p - k
        return coeff * s ** (p - j)

    def _offset(self):
        return self.r0**2 if self.family in ("coulomb", "power-law") else 0.0

    def derivative(self, beta, X):
        """``d^beta q`` at points ``X`` of shape ``(..., d)``."""
        X = np.asarray(X, dtype=float)
        beta = tuple(int(b) for b in beta)
        if len(beta) != X.shape[-1]:
            raise DomainError("multi-index length must match the dimension")
        out = np.zeros(X.shape[:-1])
        if self.is_zero:
            return out
        s = np.sum(X * X, axis=-1) + self._offset()
        if self.family != "gaussian" and self.r0 == 0 and np.any(s == 0):
            raise DomainError("unregularized potential evaluated at the origin")
        maxdeg = sum(beta)
        powers = [np.stack([np.ones_like(X[..., i])] + [X[..., i] ** k for k in range(1, maxdeg + 1)])
                  for i in range(X.shape[-1])]
        for j, poly in radial_terms(beta).items():
            P = np.zeros_like(out)
            for exps, c in poly.items():
                term = np.full_like(out, c)
                for i, e in enumerate(exps):
                    if e:
                        term = term * powers[i][e]
                P += term
            out += self._profile_derivative(j, s) * P
        return out

    def derivative_table(self, betas, X):
        """``{beta: d^beta q(X)}`` for many multi-indices, sharing one monomial table."""
        X = np.asarray(X, dtype=float)
        betas = [tuple(int(b) for b in beta) for beta in betas]
        shape = X.shape[:-1]
        if self.is_zero:
            return {beta: np.zeros(shape) for beta in betas}
        d = X.shape[-1]
        flat = X.reshape(-1, d)
        s = np.sum(flat * flat, axis=-1) + self._offset()
        if self.family != "gaussian" and self.r0 == 0 and np.any(s == 0):
            raise DomainError("unregularized potential evaluated at the origin")
        terms = {beta: radial_terms(beta) for beta in betas}
        monos = sorted({e for t in terms.values() for poly in t.values() for e in poly})
        jmax = max(j for t in terms.values() for j in t)
        maxdeg = max(sum(e) for e in monos)
        powers = [[np.ones(len(flat))] for _ in range(d)]
        for i in range(d):
            for _ in range(maxdeg):
                powers[i].append(powers[i][-1] * flat[:, i])
        M = np.empty((len(monos), len(flat)))
        for row, e in enumerate(monos):
            v = powers[0][e[0]]
            for i in range(1, d):
                if e[i]:
                    v = v * powers[i][e[i]]
            M[row] = v
        index = {e: row for row, e in enumerate(monos)}
        out = np.zeros((len(betas), len(flat)))
        for j in range(jmax + 1):
            Cj = np.zeros((len(betas), len(monos)))
            for bi, beta in enumerate(betas):
                for e, c in terms[beta].get(j, {}).items():
                    Cj[bi, index[e]] = c
            rows = np.flatnonzero(np.any(Cj, axis=1))
            if rows.size:
                cols = np.flatnonzero(np.any(Cj[rows], axis=0))
                out[rows] += (Cj[np.ix_(rows, cols)] @ M[cols]) * self._profile_derivative(j, s)
        return {beta: out[bi].reshape(shape) for bi, beta in enumerate(betas)}

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return self.derivative((0,) * X.shape[-1], X)

    def gradient(self, X):
        X = np.asarray(X, dtype=float)
        d = X.shape[-1]
        return np.stack([self.derivative(tuple(int(k == i) for k in range(d)), X)
                         for i in range(d)], axis=-1)

    def laplacian(self, X):
        X = np.asarray(X, dtype=float)
        d = X.shape[-1]
        return sum(self.derivative(tuple(2 * int(k == i) for k in range(d)), X) for i in range(d))

    def gradient_bound(self, r):
        """Upper bound for ``|grad q|`` on ``{|X| >= r}``."""
        r = np.asarray(r, dtype=float)
        if self.is_zero:
            return np.zeros_like(r)
        k = abs(self.kappa)
        if self.family == "gaussian":
            w = self.width
            peak = k / (w * np.sqrt(np.e))
            return np.where(r > w, k * r / w**2 * np.exp(-0.5 * r**2 / w**2), peak)
        a = self.alpha
        # |g'| 2r = a k r (r^2+r0^2)^(-a/2-1) <= a k (r^2+r0^2)^(-(a+1)/2), decreasing in r
        return a * k * (r**2 + self.r0**2) ** (-(a + 1) / 2)


def coulomb(kappa=1.0, r0=0.05):
    return PotentialModel("coulomb", kappa, 1.0, 0.5, r0)


def power_law(kappa, alpha, delta, r0=0.05):
    return PotentialModel("power-law", kappa, alpha, delta, r0)


def gaussian(kappa=1.0, width=1.0):
    return PotentialModel("gaussian", kappa, 0.0, 0.5, 0.0, width)


def zero():
    return PotentialModel("zero", 0.0, 0.0, 0.5, 0.0)


def from_spec(spec):
    """Build a model from a mapping (config file / CLI) or a short string.

    Strings look like ``coulomb``, ``coulomb:kappa=0.5,r0=0.1`` or
    ``power-law:kappa=1,alpha=0.6,delta=0.1``.
    """
    if isinstance(spec, PotentialModel):
        return spec
    if isinstance(spec, str):
        family, _, rest = spec.partition(":")
        kwargs = {}
        for item in filter(None, rest.split(",")):
            key, _, val = item.partition("=")
            kwargs[key.strip()] = float(val)
        spec = {"family": family.strip(), **kwargs}
    spec = dict(spec)
    family = spec.pop("family", "coulomb")
    defaults = {
        "coulomb": coulomb().to_dict(),
        "power-law": PotentialModel("power-law", 1.0, 1.0, 0.5, 0.05).to_dict(),
        "gaussian": gaussian().to_dict(),
        "zero": zero().to_dict(),
    }[family]
    defaults.update(spec)
    defaults["family"] = family
    return PotentialModel(**defaults)
