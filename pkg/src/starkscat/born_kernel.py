"""
Principal symbol of the scattering kernel and its diagonal singularity.

``t_psym(y) = -2i int_0^inf q(x, -y) / sqrt(2x) dx`` is computed by quadrature
in ``x = u^2``; its quantization ``T(s) = (2pi)^(1-d) int e^{i s.y} t(y) dy`` is
a cosine (``d = 2``) or order-zero Hankel (``d = 3``) transform of the
annulus-windowed radial symbol.  For a tail ``kappa r^-alpha`` the kernel
behaves like ``kappa c2 |s|^(1/2 + alpha - d)`` at the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .cutoffs import EvenCutoff, cutoff
from .errors import AccuracyError, DomainError
from .potentials import PotentialModel
from .quadrature import HalfLineGrid, gl_panels

Y_FLOOR = 0.5
FIT_WINDOW = (0.05, 0.5)
S_REF = 0.1

# radial grid of the u = sqrt(x) quadrature, in units of the natural scale
_U_GRID = HalfLineGrid.geometric(1e-3, 1e5, ratio=1.4, order=20)


def _radial(y):
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y[None]
    return y, np.sqrt(np.sum(y * y, axis=-1))


def _length_scale(q: PotentialModel):
    return q.width if q.family == "gaussian" else q.r0


def _check_floor(q, ny, y_floor):
    if q.family in ("coulomb", "power-law") and q.r0 == 0 and np.any(ny < y_floor):
        raise DomainError(f"|y| must be at least y_floor={y_floor} for an unregularized potential")


def t_psym(y, q: PotentialModel, tol=1e-9, y_floor=Y_FLOOR):
    """Principal symbol at transverse points ``y`` of shape ``(..., d-1)``.

    Uses ``t = -2 sqrt(2) i int_0^inf q(u^2, -y) du`` on geometric panels
    scaled to ``sqrt(|y|)``, with a power-law tail.  Raises
    :class:`AccuracyError` if the tail uncertainty exceeds ``tol`` relative.
    """
    y, ny = _radial(y)
    shape = ny.shape
    if q.is_zero:
        return np.zeros(shape, dtype=complex)[()] if shape else 0j
    _check_floor(q, ny, y_floor)
    yf = y.reshape(-1, y.shape[-1])
    scale = np.sqrt(np.hypot(ny.ravel(), max(_length_scale(q), 1e-3)))
    v = _U_GRID.nodes
    out = np.empty(len(yf))
    for lo in range(0, len(yf), 64):
        sl = slice(lo, lo + 64)
        u = scale[sl, None] * v[None, :]
        X = np.concatenate([(u * u)[..., None],
                            np.broadcast_to(-yf[sl, None, :], u.shape + (yf.shape[-1],))], axis=-1)
        total, bound = _U_GRID.total(q.value(X))
        total = total * scale[sl]
        bound = bound * scale[sl]
        bad = bound > tol * np.maximum(np.abs(total), 1e-300)
        if np.any(bad & (total != 0)):
            raise AccuracyError("t_psym tail extrapolation is not converged",
                                achieved=float(np.max(bound / np.abs(total))))
        out[sl] = total
    res = (-2j * np.sqrt(2.0) * out).reshape(shape)
    return res if shape else complex(res)


def c1(alpha):
    """``2^(-3/2) Gamma(1/4) Gamma(alpha/2 - 1/4) / Gamma(alpha/2)``."""
    if alpha <= 0.5:
        raise DomainError("c1 needs alpha > 1/2")
    return float(2**-1.5 * special.gamma(0.25) * special.gamma(alpha / 2 - 0.25)
                 / special.gamma(alpha / 2))


def c1_integral(alpha):
    """``2^(-3/2) int_0^inf (t+1)^(-alpha/2) t^(-3/4) dt`` by quadrature.

    With ``t = v^4`` this is ``2^(1/2) int_0^inf (v^4+1)^(-alpha/2) dv``; the
    range ``v > 1`` is mapped to ``w = 1/v`` and integrated with an algebraic
    weight.
    """
    if alpha <= 0.5:
        raise DomainError("c1 needs alpha > 1/2")
    a = alpha
    head, _ = integrate.quad(lambda v: (v**4 + 1) ** (-a / 2), 0, 1, epsabs=0, epsrel=1e-13)
    tail, _ = integrate.quad(lambda w: (1 + w**4) ** (-a / 2), 0, 1, weight="alg",
                             wvar=(2 * a - 2, 0), epsabs=0, epsrel=1e-13)
    return float(np.sqrt(2.0) * (head + tail))


def _check_c2(alpha, d):
    if d < 2:
        raise DomainError("dimension must be at least 2")
    if not 0.5 < alpha < d - 0.5:
        raise DomainError(f"c2 needs 1/2 < alpha < {d - 0.5}")


def c2(alpha, d):
    """``-i (2pi)^((1-d)/2) 2^((d-1)/2 - alpha) Gamma(1/4) Gamma(d/2-1/4-alpha/2) / Gamma(alpha/2)``."""
    _check_c2(alpha, d)
    n = d - 1
    return complex(-1j * (2 * np.pi) ** (-n / 2) * 2 ** (n / 2 - alpha) * special.gamma(0.25)
                   * special.gamma(d / 2 - 0.25 - alpha / 2) / special.gamma(alpha / 2))


def fourier_power_constant(beta, n):
    """``int_{R^n} e^{i e.y} |y|^-beta dy`` (distributional) by Gaussian subordination.

    ``|y|^-beta = Gamma(beta/2)^-1 int_0^inf u^(beta/2-1) e^{-u|y|^2} du`` turns
    the transform into ``pi^(n/2)/Gamma(beta/2) int_0^inf u^((beta-n)/2-1)
    e^{-1/(4u)} du``, evaluated here with ``v = 1/u`` by quadrature.
    """
    if not 0 < beta < n:
        raise DomainError("need 0 < beta < n")
    p = (n - beta) / 2 - 1
    head, _ = integrate.quad(lambda v: np.exp(-v / 4), 0, 1, weight="alg", wvar=(p, 0),
                             epsabs=0, epsrel=1e-13)
    tail, _ = integrate.quad(lambda v: v**p * np.exp(-v / 4), 1, np.inf, epsabs=0, epsrel=1e-13)
    return float(np.pi ** (n / 2) / special.gamma(beta / 2) * (head + tail))


def c2_integral(alpha, d):
    """``c2`` assembled from quadratures: ``(2pi)^(1-d) (-2i c1) F(alpha - 1/2, d - 1)``."""
    _check_c2(alpha, d)
    n = d - 1
    return complex((2 * np.pi) ** (-n) * (-2j) * c1_integral(alpha)
                   * fourier_power_constant(alpha - 0.5, n))


def t_psym_closed_form(y, q: PotentialModel):
    """``-2i kappa c1 (|y|^2 + r0^2)^((1/2-alpha)/2)`` for power-law families."""
    if q.family not in ("coulomb", "power-law"):
        raise DomainError("closed form only for power-law potentials")
    _, ny = _radial(y)
    res = np.asarray(-2j * q.kappa * c1(q.alpha) * (ny**2 + q.r0**2) ** ((0.5 - q.alpha) / 2))
    return res if res.ndim else complex(res)


def _check_elebnd(s1, s2):
    if not (s2 > -1 and s2 + 1 - 2 * s1 < 0):
        raise DomainError("need s2 > -1 and s2 + 1 - 2 s1 < 0")


def elebnd_constant(s1, s2):
    """``C`` in ``int_0^inf (t^2+f^2)^(-s1) t^s2 dt = C f^(s2+1-2 s1)``."""
    _check_elebnd(s1, s2)
    return float(0.5 * special.beta((s2 + 1) / 2, s1 - (s2 + 1) / 2))


def elebnd_integral(s1, s2, f):
    _check_elebnd(s1, s2)
    head, _ = integrate.quad(lambda t: (t * t + f * f) ** (-s1), 0, f, weight="alg",
                             wvar=(s2, 0), epsabs=0, epsrel=1e-13)
    # t = f / w on (f, inf)
    tail, _ = integrate.quad(lambda w: (1 + w * w) ** (-s1) * f ** (s2 + 1 - 2 * s1),
                             0, 1, weight="alg", wvar=(2 * s1 - s2 - 2, 0),
                             epsabs=0, epsrel=1e-13)
    return float(head + tail)


def scaling_check(s1, s2, f):
    """``|int_0^inf (t^2+f^2)^(-s1) t^s2 dt - C f^(s2+1-2s1)|``."""
    return abs(elebnd_integral(s1, s2, f) - elebnd_constant(s1, s2) * f ** (s2 + 1 - 2 * s1))


def scaling_exponent(s1, s2, f1=1.0, f2=2.0):
    """Exponent read off two quadratures: ``log(I(f2)/I(f1)) / log(f2/f1)``."""
    return float(np.log(elebnd_integral(s1, s2, f2) / elebnd_integral(s1, s2, f1)) / np.log(f2 / f1))


@dataclass
class SymbolGrid:
    """Radial samples of a symbol ``t(|y|)`` in dimension ``d``.

    Values are interpolated in ``log |y|`` after removing the declared power
    ``|y|^order``, which keeps the spline error tiny for symbols with power tails.
    """

    radii: np.ndarray
    values: np.ndarray
    d: int
    order: float = 0.0

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.d not in (2, 3):
            raise DomainError("quantization is implemented for d in {2, 3}")
        if self.radii.shape != self.values.shape or np.any(np.diff(self.radii) <= 0):
            raise DomainError("radii must be increasing and match the values")
        flat = self.values * self.radii ** (-self.order)
        self._spline = CubicSpline(np.log(self.radii), flat)

    @classmethod
    def sample(cls, func, d, y_min, y_max, order=0.0, n=400):
        radii = np.geomspace(y_min, y_max, n)
        y = np.zeros((n, d - 1))
        y[:, 0] = radii
        return cls(radii, func(y), d, order)

    @classmethod
    def from_potential(cls, q: PotentialModel, d, y_min, y_max, n=400):
        order = 0.5 - q.alpha if q.family in ("coulomb", "power-law") else 0.0
        return cls.sample(lambda y: t_psym(y, q, y_floor=0.0), d, y_min, y_max, order, n)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.radii[0], self.radii[-1]
        if np.any((rho < lo * (1 - 1e-12)) | (rho > hi * (1 + 1e-12))):
            raise DomainError("radius outside the sampled range")
        return self._spline(np.log(np.clip(rho, lo, hi))) * rho**self.order

    def decay_order(self, tail=0.25):
        """Log-log slope of ``|t|`` over the outer ``tail`` fraction of the log-range."""
        k = max(3, int(len(self.radii) * tail))
        a = np.abs(self.values[-k:])
        if np.all(a == 0):
            return -np.inf
        return float(np.polyfit(np.log(self.radii[-k:]), np.log(a), 1)[0])


@dataclass
class KernelSamples:
    s: np.ndarray
    T: np.ndarray
    sensitivity: float
    y_window: tuple
    T_doubled: np.ndarray | None = None


def _annulus(y_min, y_max):
    inner = cutoff("above", y_min)
    outer = cutoff("below", y_max, (0.5 * y_max, 0.95 * y_max))
    return lambda rho: inner(rho) * outer(rho)


def _radial_transform(values_fn, d, s, y_min, y_max):
    # panels: geometric near the inner edge, then at most 2 wide (quarter wavelength at s = 0.8)
    s = np.asarray(s, dtype=float)
    width = min(2.0, 0.5 * np.pi / max(s.max(), 1e-3))
    lo = y_min
    edges = list(np.geomspace(lo, max(lo * 1.01, width), 40)) if width > lo else [lo]
    edges += list(np.arange(edges[-1] + width, y_max, width)) + [y_max]
    rho, w = gl_panels(np.asarray(edges), 16)
    win = _annulus(y_min, y_max)(rho)
    keep = win > 0
    rho, w, win = rho[keep], w[keep], win[keep]
    vals = values_fn(rho) * win * w
    if d == 2:
        kern = 2 * np.cos(np.outer(s, rho))
    else:
        kern = 2 * np.pi * special.j0(np.outer(s, rho)) * rho
    return (2 * np.pi) ** (1 - d) * (kern @ vals)


def quantize_symbol(grid: SymbolGrid, s, y_min=None, y_max=None, tol=1e-2,
                    fit_window=FIT_WINDOW):
    """Kernel ``T(s)`` of the windowed radial symbol.

    The window is the smooth annulus ``chi(|y| > y_min) chi(|y| < y_max)``.
    The transform is repeated at ``2 y_max`` (so the grid must cover
    ``[y_min, 2 y_max]``; by default ``y_max`` is half the sampled range) and
    the relative change on ``fit_window`` is the window sensitivity.
    """
    y_min = grid.radii[0] if y_min is None else y_min
    y_max = 0.5 * grid.radii[-1] if y_max is None else y_max
    s = np.asarray(s, dtype=float)
    T = _radial_transform(grid, grid.d, s, y_min, y_max)
    T2 = _radial_transform(grid, grid.d, s, y_min, 2 * y_max)
    inside = (s >= fit_window[0]) & (s <= fit_window[1])
    scale = np.max(np.abs(T2[inside])) if np.any(inside) else 0.0
    sens = float(np.max(np.abs(T - T2)[inside]) / scale) if scale > 0 else 0.0
    if sens > tol:
        raise AccuracyError(f"kernel is window sensitive ({sens:.2e}) on the fit range",
                            achieved=sens)
    return KernelSamples(s, T, sens, (y_min, y_max), T2)


@dataclass
class KernelFit:
    """Power-law fit ``|T(s)| ~ |c| s^p`` on a separation window."""

    s: np.ndarray
    T: np.ndarray
    exponent: float
    coefficient: complex
    window: tuple
    residual: float
    singular: bool
    drift: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {"exponent": self.exponent, "coeff_re": self.coefficient.real,
                "coeff_im": self.coefficient.imag, "residual": self.residual,
                "window": list(self.window), "singular": self.singular, "drift": self.drift,
                **self.extras}


def fit_singularity(s, T, window=FIT_WINDOW, pin=None, s_ref=S_REF, atol=1e-14):
    """Log-log fit of ``|T|`` on ``window``; the coefficient is ``T(s_ref) s_ref^-p``
    with ``p = pin`` if given, else the fitted exponent.

    A kernel counts as singular if it is not negligible and its fitted
    exponent is at most -0.1 with a small log-log residual.
    """
    s = np.asarray(s, dtype=float)
    T = np.asarray(T, dtype=complex)
    lo, hi = window
    if not (s.min() < lo < hi < s.max()):
        raise DomainError("fit window must lie strictly inside the sampled range")
    inside = (s >= lo) & (s <= hi)
    a = np.abs(T[inside])
    if np.all(a <= atol):
        return KernelFit(s, T, float("nan"), 0j, window, float("nan"), False)
    ls, la = np.log(s[inside]), np.log(np.maximum(a, 1e-300))
    (p, c0), res, *_ = np.polyfit(ls, la, 1, full=True)
    resid = float(np.sqrt(res[0] / len(ls))) if len(res) else 0.0
    p_use = p if pin is None else pin
    Tref = complex(CubicSpline(np.log(s), T)(np.log(s_ref)))
    coef = Tref * s_ref ** (-p_use)
    return KernelFit(s, T, float(p), coef, window, resid, bool(p <= -0.1 and resid < 0.1))


def separation_grid(n=48, s_min=0.02, s_max=1.0):
    return np.geomspace(s_min, s_max, n)


def diagonal_singularity(q: PotentialModel, d=3, y_min=0.02, y_max=2000.0, s=None,
                         window=FIT_WINDOW, s_ref=S_REF):
    """Fit the diagonal singularity of the kernel of ``t_psym``.

    The coefficient is read with the exponent pinned to ``1/2 + alpha - d``
    for power-law tails.  The fit is repeated on the transform windowed at
    ``2 y_max`` and the exponent drift is reported.
    """
    s = separation_grid() if s is None else np.asarray(s, dtype=float)
    pin = 0.5 + q.alpha - d if q.family in ("coulomb", "power-law") and not q.is_zero else None

    grid = SymbolGrid.from_potential(q, d, y_min, 2 * y_max)
    ks = quantize_symbol(grid, s, y_max=y_max, fit_window=window)
    fit = fit_singularity(s, ks.T, window, pin, s_ref)
    fit.extras["sensitivity"] = ks.sensitivity
    if fit.singular:
        fit.drift = abs(fit_singularity(s, ks.T_doubled, window, pin, s_ref).exponent
                        - fit.exponent)
    if pin is not None:
        fit.extras["nominal_exponent"] = pin
        fit.extras["nominal_coefficient"] = [c2(q.alpha, d).real * q.kappa,
                                             c2(q.alpha, d).imag * q.kappa]
    return fit


@dataclass
class OrderFit:
    orders: dict
    declared: float
    ok: bool


def symbol_order_fit(func, order, d=3, radii=None, slack=0.1, rel_step=1e-3):
    """Fitted decay of ``|d^beta_y t|`` for ``|beta| <= 2`` along the first axis.

    Derivatives are central differences with a step relative to ``|y|``;
    ``ok`` checks ``fitted <= order - |beta| + slack``.  Identically vanishing
    derivatives count as order ``-inf``.
    """
    radii = np.geomspace(20, 2000, 9) if radii is None else np.asarray(radii, dtype=float)
    n = d - 1
    y = np.zeros((len(radii), n))
    y[:, 0] = radii
    h = rel_step * radii
    e = np.zeros(n)
    e[0] = 1.0
    f0 = np.asarray(func(y))
    fp = np.asarray(func(y + h[:, None] * e))
    fm = np.asarray(func(y - h[:, None] * e))
    derivs = {0: np.abs(f0), 1: np.abs((fp - fm) / (2 * h)), 2: np.abs((fp - 2 * f0 + fm) / h**2)}
    orders = {}
    for k, v in derivs.items():
        scale = np.max(np.abs(f0)) if np.any(f0) else 1.0
        if np.all(v <= 1e-9 * scale * radii ** (-k)):
            orders[k] = -np.inf
        else:
            orders[k] = float(np.polyfit(np.log(radii), np.log(np.maximum(v, 1e-300)), 1)[0])
    ok = all(orders[k] <= order - k + slack for k in orders)
    return OrderFit(orders, order, ok)


def born_window(x, K=6.0):
    """Half-width ``eps(x) = min(0.35 sqrt(2x), K (2x)^(-1/4))`` of the eta localization."""
    x = np.asarray(x, dtype=float)
    return np.minimum(0.35 * np.sqrt(2 * x), K * (2 * x) ** -0.25)


def _localized_eta(x, zeta, lam, sign, K, nodes=12):
    """``int e^{i phi(x, eta, zeta)} chi_eps(sign eta - sqrt(2x)) d eta`` per ``x``."""
    eps = born_window(x, K)
    c = sign * np.sqrt(2 * x)
    t, w = gl_panels(np.linspace(-1.75, 1.75, nodes + 1), 16)
    eta = c[:, None] + eps[:, None] * t[None, :]
    win = EvenCutoff(1.0)(t)
    ph = -eta**3 / 6 + (x[:, None] + lam - 0.5 * zeta @ zeta) * eta
    return np.sum(np.exp(1j * ph) * (win * w)[None, :], axis=1) * eps


@dataclass
class BornResult:
    value: complex
    tail_bound: float
    R: float


def born_symbol_refinement(zeta, zeta_p, y, q: PotentialModel, R=1.5, lam=0.0, K=6.0,
                           x_end=1e9, y_floor=Y_FLOOR):
    """``(2 pi i)^-1 sum_+- int chi_R(x) q(x, y) conj(I_+-(x, zeta)) I_+-(x, zeta') dx``.

    ``I_+-`` are the eta-integrals of ``e^{i phi}`` localized by
    ``chi_eps(+-eta - sqrt(2x))`` with ``eps = eps(x)`` from
    :func:`born_window`; ``chi_R`` vanishes below ``R`` and equals one above
    ``4R/3``.  The ``x``-range beyond ``x_end`` is estimated by its stationary
    phase limit and returned as a bound.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    zeta_p = np.atleast_1d(np.asarray(zeta_p, dtype=float))
    y, ny = _radial(y)
    if zeta.shape != y.shape or zeta_p.shape != y.shape:
        raise DomainError("zeta, zeta' and y must all lie in R^(d-1)")
    if q.is_zero:
        return BornResult(0j, 0.0, R)
    _check_floor(q, ny, y_floor)
    if 2 * (R + lam) <= 1 + max(zeta @ zeta, zeta_p @ zeta_p):
        raise DomainError("R too small: 2(R + lam) - |zeta|^2 must exceed 1")
    chi_R = cutoff("above", R)
    # panels: geometric in x, refined so the relative phase of the two branches
    # turns by at most 2 per panel
    rate = 0.5 * abs(zeta @ zeta - zeta_p @ zeta_p)
    edges = [R * 13 / 12]
    while edges[-1] < x_end:
        x0 = edges[-1]
        step = 0.25 * x0
        if rate > 0:
            step = min(step, 2.0 * np.sqrt(2 * x0) / rate)
        edges.append(x0 + step)
    edges = np.asarray(edges)
    x, w = gl_panels(edges, 16)
    X = np.concatenate([x[:, None], np.broadcast_to(y, (len(x), y.size))], axis=-1)
    weight = chi_R(x) * q.value(X) * w
    acc = 0j
    for sign in (1, -1):
        a = _localized_eta(x, zeta, lam, sign, K)
        b = _localized_eta(x, zeta_p, lam, sign, K)
        acc += np.sum(weight * np.conj(a) * b)
    # beyond x_end: stationary-phase limit -2i int q / sqrt(2x)
    Xe = np.concatenate([[x_end], y])
    q_end = float(q.value(Xe))
    a = q.homogeneity
    tail = 0.0 if not np.isfinite(a) else 2 * abs(q_end) * x_end / np.sqrt(2 * x_end) / (a - 0.5)
    return BornResult(complex(acc / (2j * np.pi)), float(tail), R)
