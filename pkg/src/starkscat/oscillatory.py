"""
Fourier-Airy double integrals

    phi[xi](x, y) = c int dzeta xi(zeta) int exp(i theta) a(x, y; eta, zeta) deta,
    theta = y.zeta - eta^3/6 + (x + lam - |zeta|^2/2) eta,   c = (2 pi)^(-(d+1)/2),

their stationary points and the leading stationary-phase asymptotics.

The eta-integral is only conditionally convergent.  It is evaluated with a
smooth window that is flat well beyond the stationary points and cut off
where the phase is already fast (non-stationary), so the truncation error is
super-polynomially small.  For ``a = 1`` the eta-integral is an Airy function,
which gives an independent evaluation path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import airy

from .cutoffs import bump, cutoff
from .errors import AccuracyError, DomainError
from .parabolic import theta_ex
from .quadrature import gauss_legendre, gl_panels

CBRT2 = 2.0 ** (1.0 / 3.0)


def prefactor(d):
    return (2 * np.pi) ** (-(d + 1) / 2)


def airy_eta_integral(u):
    """``int exp(i(-eta^3/6 + u eta)) deta = 2^(1/3) 2 pi Ai(-2^(1/3) u)``."""
    ai = airy(-CBRT2 * np.asarray(u, dtype=float))[0]
    return CBRT2 * 2 * np.pi * ai


def airy_eta_contour(u, nodes=64):
    """The same integral by direct quadrature on a hinge contour.

    The real segment ``[-L, L]`` with ``L = sqrt(2|u|) + 2`` is joined to the
    rays ``L + s e^{-i pi/6}`` and ``-L + s e^{7 i pi/6}``; on both rays the
    integrand decays monotonically because ``L^2 / 2 > |u|``.
    """
    u = float(u)
    L = np.sqrt(2 * abs(u)) + 2.0
    F = lambda z: np.exp(1j * (-(z**3) / 6 + u * z))  # noqa: E731
    freq = abs(u) + L * L / 2 + 1.0
    npan = int(np.ceil(2 * L * freq / (2 * np.pi) / 2)) + 4
    t, w = gl_panels(np.linspace(-L, L, npan + 1), 16)
    seg = np.sum(w * F(t))
    # the ray integrand falls below 1e-18 well before s = s_max
    s_max = 8.0
    s, ws = gl_panels(np.linspace(0.0, s_max, nodes // 16 * 4 + 1), 16)
    right = np.exp(-1j * np.pi / 6)
    left = np.exp(7j * np.pi / 6)
    ray_r = np.sum(ws * F(L + s * right)) * right
    ray_l = np.sum(ws * F(-L + s * left)) * left
    return seg + ray_r - ray_l


@dataclass(frozen=True)
class TransverseProfile:
    """Bump ``xi(zeta) = exp(-1/(1 - |zeta - zeta0|^2 / rho^2))`` on the ball of radius ``rho``."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.radius <= 0:
            raise DomainError("profile radius must be positive")

    @property
    def dim(self):
        return len(self.center)

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        if self.dim == 1 and (zeta.ndim == 0 or zeta.shape[-1] != 1):
            zeta = zeta[..., None]
        s2 = np.sum((zeta - np.asarray(self.center)) ** 2, axis=-1) / self.radius**2
        return bump(np.sqrt(s2))

    def grid(self, n):
        """Tensor Gauss-Legendre nodes ``(N, dim)`` and weights over the bounding box."""
        xg, wg = gauss_legendre(n)
        axes = [c + self.radius * xg for c in self.center]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        wts = np.ones(1)
        for _ in range(self.dim):
            wts = np.multiply.outer(wts, self.radius * wg).ravel()
        return nodes, wts

    def sup_norm_zeta(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def l1_norm(self, n=64):
        nodes, w = self.grid(n)
        return float(np.sum(w * self(nodes)))


def _check_profile(xi, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if xi.dim != y.size:
        raise DomainError("profile dimension must equal d - 1")
    return y, y.size + 1


def free_eigenfunction(x, y, lam, xi: TransverseProfile, n_zeta=96):
    """``c int xi(zeta) e^{i y.zeta} Airy(x + lam - |zeta|^2/2) dzeta`` (Airy path)."""
    y, d = _check_profile(xi, y)
    nodes, w = xi.grid(n_zeta)
    vals = xi(nodes)
    keep = vals > 0
    nodes, w, vals = nodes[keep], w[keep], vals[keep]
    u = x + lam - 0.5 * np.sum(nodes**2, axis=-1)
    return prefactor(d) * np.sum(w * vals * np.exp(1j * nodes @ y) * airy_eta_integral(u))


@dataclass(frozen=True)
class OscIntegralSpec:
    """Parameters of ``phi``: energy ``lam``, amplitude ``a(x, y, eta, zeta)``
    (``None`` means ``a = 1``), declared growth ``order`` of the amplitude in
    ``eta``, window margin, tolerance and the integration-by-parts depth used for
    the tail estimate."""

    lam: float = 0.0
    amplitude: Callable | None = None
    order: int = 0
    margin: float = 8.0
    tol: float = 1e-6
    depth: int = 4
    amp_sup: float = 1.0


@dataclass(frozen=True)
class PhiResult:
    value: complex
    tail_bound: float
    n_eta: int
    n_zeta: int


def eta_window(E, margin=8.0):
    """Plateau end and cutoff end of the eta window for ``x + lam = E``."""
    delta = max(margin, 0.25 * np.sqrt(2 * abs(E)))
    lo = np.sqrt(2 * max(E, 0.0)) + delta
    return lo, lo + delta


def eta_nodes(E, zmax2, hi, per_panel=2.0):
    """Symmetric Gauss-Legendre panels on ``[-hi, hi]`` holding about ``per_panel``
    local wavelengths of ``exp(i theta)`` each."""
    edges = [0.0]
    e = 0.0
    while e < hi:
        nu = abs(E - 0.5 * e * e) + 0.5 * zmax2 + 1.0
        e = min(e + min(1.0, per_panel * 2 * np.pi / nu), hi)
        edges.append(e)
    edges = np.asarray(edges)
    return gl_panels(np.concatenate([-edges[::-1], edges[1:]]), 16)


def _tail_estimate(E, zmax2, lo, depth, amp_sup, order):
    """``amp_sup int_{|eta|>lo} (1+eta^2)^order (1 + psi^2)^(-depth/2)`` with
    ``psi = eta^2/2 - E - |zeta|^2/2`` the phase derivative (each integration by
    parts trades one factor of it for one derivative of the window)."""
    def g(t):
        psi = max(0.5 * t * t - E - 0.5 * zmax2, 0.0)
        return (1 + t * t) ** order * (1 + psi * psi) ** (-depth / 2)
    val, _ = quad(g, lo, np.inf, limit=200)
    return 2 * amp_sup * val


def eval_phi(spec: OscIntegralSpec, xi: TransverseProfile, x, y, n_zeta=None, chunk=8192):
    """Evaluate ``phi_{lam, a}[xi](x, y)`` by windowed quadrature.

    Returns a :class:`PhiResult`; raises :class:`AccuracyError` if the tail
    estimate exceeds ``spec.tol``.
    """
    y, d = _check_profile(xi, y)
    E = x + spec.lam
    lo, hi = eta_window(E, spec.margin)
    zmax2 = xi.sup_norm_zeta() ** 2
    tail = _tail_estimate(E, zmax2, lo, spec.depth, spec.amp_sup, spec.order) * xi.l1_norm(32) \
        * prefactor(d)
    if tail > spec.tol:
        raise AccuracyError(f"eta tail estimate {tail:.3g} above tolerance", tail)
    if n_zeta is None:
        # resolve e^{-i zeta^2 eta/2} and e^{i y.zeta} over the support
        osc = (hi * xi.sup_norm_zeta() + np.linalg.norm(y)) * 2 * xi.radius
        n_zeta = int(min(512, max(64, 4 * osc / (2 * np.pi) + 48)))
    nodes, wz = xi.grid(n_zeta)
    xv = xi(nodes)
    keep = xv > 0
    nodes, wz, xv = nodes[keep], wz[keep], xv[keep]
    t, wt = eta_nodes(E, zmax2, hi)
    win = cutoff("below", hi * (1 + 1e-9), (lo, hi))(np.abs(t))
    base = wt * win * np.exp(1j * (-(t**3) / 6 + E * t))
    z2 = 0.5 * np.sum(nodes**2, axis=-1)
    total = 0j
    for i in range(0, len(t), chunk):
        tt = t[i:i + chunk]
        ph = np.exp(-1j * np.outer(z2, tt))
        if spec.amplitude is None:
            inner = ph @ base[i:i + chunk]
        else:
            amp = spec.amplitude(x, y, tt[None, :], nodes[:, None, :])
            inner = np.sum(ph * amp * base[i:i + chunk][None, :], axis=1)
        total += np.sum(wz * xv * np.exp(1j * nodes @ y) * inner)
    return PhiResult(complex(prefactor(d) * total), float(tail), len(t), len(wz))


@dataclass(frozen=True)
class StationaryData:
    eta_plus: float
    eta_minus: float
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    h: float
    residuals: tuple


def stationary_points(x, y, lam=0.0):
    """Critical points ``eta = +-sqrt(E + sqrt(E^2 - |y|^2))``, ``zeta = y / eta``
    (``E = x + lam``) with the residuals of the energy and velocity relations."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    E = x + lam
    ny = np.linalg.norm(y)
    if E <= ny:
        raise DomainError("stationary points need x + lam > |y|")
    if x <= 0:
        raise DomainError("h = (2x)^(-1/2) needs x > 0")
    ep = np.sqrt(E + np.sqrt(E * E - ny * ny))
    res = []
    for eta in (ep, -ep):
        zeta = y / eta
        res.append(abs(0.5 * eta**2 + 0.5 * zeta @ zeta - E))
        res.append(float(np.linalg.norm(eta * zeta - y)))
    return StationaryData(ep, -ep, y / ep, -y / ep, (2 * x) ** -0.5, tuple(res))


def leading_asymptotics(x, y, lam, xi: TransverseProfile, amplitude=None):
    """Both branches ``e^{-+i pi d/4} (2 pi)^{-1/2} h^{d/2} e^{+-i theta_ex(x+lam, y)}
    xi(+-h y) a(x, y; +-1/h, +-h y)``."""
    y, d = _check_profile(xi, y)
    st = stationary_points(x, y, lam)
    h = st.h
    th = float(theta_ex(x + lam, y))
    out = []
    for s in (1, -1):
        amp = 1.0 if amplitude is None else amplitude(x, y, s / h, s * h * y)
        val = (np.exp(-s * 1j * np.pi * d / 4) / np.sqrt(2 * np.pi) * h ** (d / 2)
               * np.exp(s * 1j * th) * xi(s * h * y) * amp)
        out.append(complex(np.squeeze(val)))
    return tuple(out)


def phase(x, y, lam, eta, zeta):
    zeta = np.asarray(zeta, dtype=float)
    return (np.asarray(y) @ zeta.T if zeta.ndim > 1 else np.dot(y, zeta)) - eta**3 / 6 \
        + (x + lam - 0.5 * np.sum(zeta**2, axis=-1)) * eta


def hessian_at_stationary(x, y, lam=0.0, branch=1, step=1e-2):
    """Central-difference Hessian of ``h theta`` in ``z = (eta, zeta)`` at the
    stationary point of ``branch``; returns ``(A, norm(A + I), signature)``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    st = stationary_points(x, y, lam)
    eta0 = st.eta_plus if branch == 1 else st.eta_minus
    z0 = np.concatenate([[eta0], y / eta0])
    d = z0.size
    f = lambda z: st.h * phase(x, y, lam, z[0], z[1:])  # noqa: E731
    A = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            ei = np.eye(d)[i] * step
            ej = np.eye(d)[j] * step
            A[i, j] = A[j, i] = (f(z0 + ei + ej) - f(z0 + ei - ej) - f(z0 - ei + ej)
                                 + f(z0 - ei - ej)) / (4 * step * step)
    ev = np.linalg.eigvalsh(A)
    sig = int(np.sum(ev > 0) - np.sum(ev < 0))
    return A, float(np.linalg.norm(A + branch * np.eye(d), 2)), sig


# Study defaults: the profile is centred on zeta_+ = omega and wide enough
# (rho^2 eta_+ >> 1) for the O(h) term -(i/2) xi''/xi h to dominate, while its
# support misses zeta_- = -omega so |lead| never cancels between branches.
STUDY_XS = (25.0, 100.0, 400.0, 1600.0)
STUDY_OMEGA = 1.2
STUDY_PROFILE = TransverseProfile((1.2,), 1.44)


def asymptotic_error_study(xs, omega, lam, xi: TransverseProfile, spec=None):
    """Relative error of the leading asymptotics at ``y = omega sqrt(2x)`` for each
    ``x`` and the fitted slope against ``h``; also the Hessian deviations."""
    spec = OscIntegralSpec(lam=lam) if spec is None else spec
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    h, err, hess = [], [], []
    for x in xs:
        y = omega * np.sqrt(2 * x)
        val = eval_phi(spec, xi, x, y).value
        lead = sum(leading_asymptotics(x, y, lam, xi, spec.amplitude))
        h.append((2 * x) ** -0.5)
        err.append(abs(val - lead) / abs(lead))
        hess.append(hessian_at_stationary(x, y, lam)[1])
    h, err, hess = map(np.asarray, (h, err, hess))
    slope = float(np.polyfit(np.log(h), np.log(err), 1)[0])
    hslope = float(np.polyfit(np.log(h), np.log(hess), 1)[0])
    return {"h": h, "rel_error": err, "slope": slope, "hessian_dev": hess, "hessian_slope": hslope}
