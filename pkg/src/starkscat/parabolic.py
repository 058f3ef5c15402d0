"""
Parabolic coordinates ``f = sqrt(breve_f(r + x))``, ``g = y / f`` and the phase
functions built from them.

Points are given as ``x`` of shape ``S`` and ``y`` of shape ``S + (d-1,)``, so
every function is vectorized over a batch of points.  The exact-branch
identities only hold where ``r + x > 2`` (there ``breve_f`` is the identity);
functions that rely on them raise :class:`DomainError` elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutoffs import breve_f
from .errors import DomainError

FD_REL_STEP = 1e-5
FD2_REL_STEP = 2e-3

# Constants frozen from a sweep over {x in [1.5, 1e4], 0.02 < |y/x| < 1/2,
# |lam| <= 3}; the observed suprema are 0.032, 0.032 and 4.5.
COMFS_THETA_BOUND = 1.0
COMFS_F_BOUND = 1.0
DIFEST_BOUND = 10.0


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        if self.d < 2:
            raise DomainError("dimension must be at least 2")

    @property
    def d(self):
        return self.y.shape[-1] + 1


@dataclass(frozen=True)
class ParabolicFrame:
    f: np.ndarray
    g: np.ndarray
    r: np.ndarray
    J: np.ndarray


def _xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y[None]
    return x, y


def radius(x, y):
    x, y = _xy(x, y)
    return np.sqrt(x * x + np.sum(y * y, axis=-1))


def f_coord(x, y):
    x, y = _xy(x, y)
    return np.sqrt(breve_f(radius(x, y) + x))


def to_parabolic(x, y):
    """Parabolic frame at ``(x, y)``; ``f`` is regularized everywhere."""
    x, y = _xy(x, y)
    d = y.shape[-1] + 1
    r = radius(x, y)
    f = np.sqrt(breve_f(r + x))
    g = y / f[..., None]
    J = f ** (2 - d) / (f * f + np.sum(g * g, axis=-1))
    return ParabolicFrame(f, g, r, J)


def ort_residuals(x, y):
    """Residuals of ``f^2+g^2 = 2r``, ``f^2-g^2 = 2x`` and ``f|g| = |y|``."""
    x, y = _xy(x, y)
    fr = to_parabolic(x, y)
    g2 = np.sum(fr.g**2, axis=-1)
    f2 = fr.f**2
    return (f2 + g2 - 2 * fr.r, f2 - g2 - 2 * x,
            fr.f * np.sqrt(g2) - np.sqrt(np.sum(y * y, axis=-1)))


def theta_lambda(f, lam):
    """``f^3/3 + lam f``."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise DomainError("theta_lambda needs f > 0")
    return f**3 / 3.0 + lam * f


def theta0(x, y):
    return f_coord(x, y) ** 3 / 3.0


def _require_exact(x, y):
    if np.any(radius(x, y) + x <= 2.0):
        raise DomainError("identity only valid where r + x > 2")


def theta0_derivatives(x, y):
    """Closed-form gradient, Hessian and Laplacian of ``theta^0 = f^3/3``.

    Returns arrays of shapes ``S+(d,)``, ``S+(d,d)`` and ``S``.
    """
    x, y = _xy(x, y)
    _require_exact(x, y)
    d = y.shape[-1] + 1
    r = radius(x, y)
    f = f_coord(x, y)
    grad = np.concatenate([(f**3)[..., None], f[..., None] * y], axis=-1) / (2 * r)[..., None]
    H = np.empty(x.shape + (d, d))
    H[..., 0, 0] = -0.5 * x * f**3 / r**3 + 0.75 * f**3 / r**2
    off = (-0.5 * f**3 / r**3 + 0.75 * f / r**2)[..., None] * y
    H[..., 0, 1:] = off
    H[..., 1:, 0] = off
    yy = y[..., :, None] * y[..., None, :]
    H[..., 1:, 1:] = ((-0.5 * f / r**3 + 0.25 / (r**2 * f))[..., None, None] * yy
                      + (0.5 * f / r)[..., None, None] * np.eye(d - 1))
    lap = 0.5 * d * f / r
    return grad, H, lap


def _scale(x, y):
    return np.maximum(1.0, np.maximum(np.abs(x), np.sqrt(np.sum(y * y, axis=-1))))


def fd_gradient(func, x, y, rel_step=FD_REL_STEP):
    """Central-difference gradient of a scalar ``func(x, y)``."""
    x, y = _xy(x, y)
    d = y.shape[-1] + 1
    h = rel_step * _scale(x, y)
    out = []
    for i in range(d):
        if i == 0:
            plus, minus = func(x + h, y), func(x - h, y)
        else:
            e = np.zeros(d - 1)
            e[i - 1] = 1.0
            step = h[..., None] * e
            plus, minus = func(x, y + step), func(x, y - step)
        out.append((plus - minus) / (2 * h))
    return np.stack(out, axis=-1)


def _shift(x, y, i, s):
    if i == 0:
        return x + s, y
    e = np.zeros(y.shape[-1])
    e[i - 1] = 1.0
    return x, y + np.asarray(s)[..., None] * e


def fd_hessian(func, x, y, rel_step=FD2_REL_STEP):
    """Hessian by 5-point (diagonal) and 4-point cross stencils."""
    x, y = _xy(x, y)
    d = y.shape[-1] + 1
    h = rel_step * _scale(x, y)
    H = np.empty(x.shape + (d, d))
    f0 = func(x, y)
    for i in range(d):
        vals = [func(*_shift(x, y, i, k * h)) for k in (-2, -1, 1, 2)]
        H[..., i, i] = (-vals[0] + 16 * vals[1] - 30 * f0 + 16 * vals[2] - vals[3]) / (12 * h * h)
        for j in range(i + 1, d):
            acc = 0.0
            for si, sj, w in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                xi, yi = _shift(x, y, i, si * h)
                xi, yi = _shift(xi, yi, j, sj * h)
                acc = acc + w * func(xi, yi)
            H[..., i, j] = H[..., j, i] = acc / (4 * h * h)
    return H


def fd_laplacian(func, x, y, rel_step=FD2_REL_STEP):
    return np.trace(fd_hessian(func, x, y, rel_step), axis1=-2, axis2=-1)


def _ex_parts(x, y):
    x, y = _xy(x, y)
    y2 = np.sum(y * y, axis=-1)
    if np.any(x <= 0) or np.any(y2 >= x * x):
        raise DomainError("theta_ex needs x > 0 and |y| < x")
    s = np.sqrt(x * x - y2)
    return x, y, s


def theta_ex(x, y):
    """Exact parabolic eikonal solution (``+`` root)."""
    x, _, s = _ex_parts(x, y)
    return 4.0 / 3.0 * np.sqrt(x + s) * (x - 0.5 * s)


def grad_theta_ex(x, y):
    """Closed form ``(eta_+, y / eta_+)`` with ``eta_+ = sqrt(x + sqrt(x^2-|y|^2))``."""
    x, y, s = _ex_parts(x, y)
    eta = np.sqrt(x + s)
    return np.concatenate([eta[..., None], y / eta[..., None]], axis=-1)


def f_ex(x, y):
    return np.cbrt(3.0 * theta_ex(x, y))


def eikonal_residual(x, y, rel_step=FD_REL_STEP):
    """``|grad theta_ex|^2 / 2 - x`` with a central-difference gradient."""
    x, y, _ = _ex_parts(x, y)
    g = fd_gradient(theta_ex, x, y, rel_step)
    return 0.5 * np.sum(g * g, axis=-1) - x


def jacobian(x, y):
    return to_parabolic(x, y).J


def flow_field(x, y):
    """``F = (2r / f^2) grad theta^0 = 2r grad f``."""
    x, y = _xy(x, y)
    grad, _, _ = theta0_derivatives(x, y)
    return (2 * radius(x, y) / f_coord(x, y) ** 2)[..., None] * grad


def flow_field_checks(x, y, rel_step=FD_REL_STEP):
    """Residuals of ``d_f ln J^{-1/2} = div F / 2`` and of the closed form of
    ``grad(2r / f^2)``, all derivatives by central differences."""
    x, y = _xy(x, y)
    _require_exact(x, y)
    d = y.shape[-1] + 1
    F = flow_field(x, y)
    grad_lnj = fd_gradient(lambda a, b: -0.5 * np.log(jacobian(a, b)), x, y, rel_step)
    lhs = np.sum(F * grad_lnj, axis=-1)
    div = 0.0
    for i in range(d):
        div = div + fd_gradient(lambda a, b, i=i: flow_field(a, b)[..., i], x, y, rel_step)[..., i]
    res1 = np.abs(lhs - 0.5 * div)

    r = radius(x, y)
    f = f_coord(x, y)
    ratio = lambda a, b: 2 * radius(a, b) / f_coord(a, b) ** 2  # noqa: E731
    fd = fd_gradient(ratio, x, y, rel_step)
    y2 = np.sum(y * y, axis=-1)
    exact = np.concatenate([(-y2)[..., None], x[..., None] * y], axis=-1) * (2 / (r * f**4))[..., None]
    res2 = np.linalg.norm(fd - exact, axis=-1)
    return res1, res2


def phase_comparison(x, y, lam=0.0):
    """Normalized deviations between the exact and the parabolic phases.

    Returns ``((theta_ex - theta^0)/(f^3 |y/x|^4), (f - f_ex)/(f |y/x|^4),
    (theta_ex(x+lam, y) - theta^lam)/(f^3|y/x|^4 + f|y/x|^2 + 1/f))``; the first
    two are reported as 0 on the axis ``y = 0`` where both numerators vanish.
    """
    x, y = _xy(x, y)
    ny = np.sqrt(np.sum(y * y, axis=-1))
    if np.any(x <= 1) or np.any(x <= 2 * ny):
        raise DomainError("comparison region is {x > 1, x > 2|y|}")
    if np.any(x + lam <= ny):
        raise DomainError("x + lam must exceed |y|")
    f = f_coord(x, y)
    t = ny / x
    w4 = t**4
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(ny > 0, (theta_ex(x, y) - theta0(x, y)) / (f**3 * w4), 0.0)
        r2 = np.where(ny > 0, (f - f_ex(x, y)) / (f * w4), 0.0)
    bound = f**3 * w4 + f * t**2 + 1.0 / f
    r3 = (theta_ex(x + lam, y) - theta_lambda(f, lam)) / bound
    return r1, r2, r3
