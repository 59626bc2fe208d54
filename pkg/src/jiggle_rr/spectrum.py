"""Spectral distribution mu(z) of the radiation-reaction damping.

The double integral defining mu(z) is evaluated through its real-axis
spectral density ``sigma(w) = Re mu(w + i0)``, a single integral over
field frequencies. The bare double integral diverges; the divergent part
is a constant frequency shift, which is dropped (static counterterm).
The remaining function is analytic in the upper half plane, tends to a
constant ``sigma_inf`` (an ohmic term) at large |z| and obeys

    mu(z) = sigma_inf + (i/pi) * int dw' sigma(w') / (z - w'),

which is how both ``mu_complex`` and :class:`SpectralTable` evaluate it.
"""
from __future__ import annotations

import functools
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError
from .model import (QUANTUM, FieldStatistics, ReducedParams, _bose_unchecked,
                    _check_beta, coth_half)
from .quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, adaptive_panels

_K_LEVELS = (0.0, 2.0, 4.0, 7.0, 10.0)
_SIGMA_FLOOR = 1e-8


# ---------------------------------------------------------------- integrands

def _kpm(x, y, chi, c):
    h = 0.5 * chi * x * x
    w = chi * x * x * c
    kp = np.exp(-(y + x + h) ** 2 / w) - np.exp(-(y - x - h) ** 2 / w)
    km = np.exp(-(y - x + h) ** 2 / w) - np.exp(-(y + x - h) ** 2 / w)
    return kp, km


def _check_xc(x, chi):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("x must be positive")
    if not (math.isfinite(chi) and chi > 0):
        raise DomainError(f"chi must be positive and finite, got {chi!r}")
    return x


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def k_pm(x, y, chi, beta_omegaI):
    """Gaussian differences K+ and K- of the spectral integrand.

    Parameters
    ----------
    x : float or array_like
        Field frequency in units of omega_I, positive.
    y : float or array_like
        Frequency offset in units of omega_I.
    chi, beta_omegaI : float

    Returns
    -------
    k_plus, k_minus : float or ndarray
    """
    x = _check_xc(x, float(chi))
    c = coth_half(_check_beta(beta_omegaI))
    kp, km = _kpm(x, np.asarray(y, dtype=float), float(chi), c)
    return _out(kp), _out(km)


def _u(x, y, chi, beta, c, stats):
    kp, km = _kpm(x, y, chi, c)
    if stats is QUANTUM:
        if math.isinf(beta):
            return kp
        return kp + _bose_unchecked(beta * x) * (kp + km)
    return 0.5 * (kp - km) + (kp + km) / (beta * x)


def u_quantum(x, y, chi, beta_omegaI):
    """``K+ + n(beta x) (K+ + K-)``; equals K+ at zero temperature."""
    x = _check_xc(x, float(chi))
    beta = _check_beta(beta_omegaI)
    return _out(_u(x, np.asarray(y, dtype=float), float(chi), beta, coth_half(beta), QUANTUM))


def u_classical(x, y, chi, beta_omegaI):
    """``(K+ - K-)/2 + (K+ + K-)/(beta x)``: the field without zero-point motion."""
    x = _check_xc(x, float(chi))
    beta = _check_beta(beta_omegaI)
    FieldStatistics.CLASSICAL.validate(beta)
    return _out(_u(x, np.asarray(y, dtype=float), float(chi), beta, coth_half(beta),
                   FieldStatistics.CLASSICAL))


def sigma_asymptote(params: ReducedParams, stats=QUANTUM) -> float:
    """Large-frequency limit of Re mu.

    With zero-point fluctuations the Gaussian ridge of K+ contributes
    ``2 mu0 sqrt(pi c) / chi^(3/2)``; for classical statistics the ridges of
    K+ and K- cancel and the limit is zero.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    if stats is not QUANTUM:
        return 0.0
    return 2.0 * params.mu0 * math.sqrt(math.pi * params.coth) / params.chi ** 1.5


# ------------------------------------------------------- spectral density

def _positive_roots(A, B, C):
    """Positive real roots of A x^2 + B x + C (A > 0), NaN where absent."""
    disc = B * B - 4.0 * A * C
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    q = -0.5 * (B + np.where(B >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / A
        r2 = np.where(q != 0, C / q, np.nan)
    r1 = np.where(ok & (r1 > 0), r1, np.nan)
    r2 = np.where(ok & (r2 > 0), r2, np.nan)
    return r1, r2


def _x_breaks(m, chi, c, beta):
    """Breakpoints in x for the sigma integral at frequencies ``m > 0``.

    The Gaussian centres a = x + chi x^2/2 and b = x - chi x^2/2 meet the
    frequency where |m +/- a| or |m +/- b| equals k widths sqrt(chi c) x.
    The k = 10 crossings bound the support to exp(-100).
    """
    q = math.sqrt(chi * c)
    A = 0.5 * chi
    cols = {}
    for k in _K_LEVELS:
        found = []
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                found.extend(_positive_roots(A, 1.0 - s2 * k * q, -s1 * m))
                found.extend(_positive_roots(A, s2 * k * q - 1.0, s1 * m))
        cols[k] = np.column_stack(found)
    bound = cols[10.0]
    lo = np.nanmin(bound, axis=1)
    hi = np.nanmax(bound, axis=1)
    inner = np.column_stack([cols[k] for k in _K_LEVELS[:-1]])
    out = []
    for i in range(len(m)):
        pts = inner[i]
        pts = pts[np.isfinite(pts) & (pts > lo[i]) & (pts < hi[i])]
        if math.isfinite(beta):
            th = np.array([1.0, 4.0, 16.0]) / beta
            pts = np.concatenate([pts, th[(th > lo[i]) & (th < hi[i])]])
        br = np.unique(np.concatenate([[lo[i], hi[i]], pts]))
        out.append(br)
    return out


def _sigma_rows(omega, params: ReducedParams, stats, rtol, atol):
    """Re mu at real frequencies; returns (value, err, converged)."""
    signed = np.asarray(omega, dtype=float)
    mag = np.maximum(np.abs(signed), _SIGMA_FLOOR)
    # the sign is kept so that negative frequencies are evaluated, not mirrored
    w = np.copysign(mag, signed)
    chi, beta, c = params.chi, params.beta_omegaI, params.coth
    brs = _x_breaks(mag, chi, c, beta)
    rows = np.concatenate([np.full(len(b) - 1, i, dtype=np.intp) for i, b in enumerate(brs)])
    lo = np.concatenate([b[:-1] for b in brs])
    hi = np.concatenate([b[1:] for b in brs])

    def f(r, x):
        return x * x * _u(x, -w[r], chi, beta, c, stats)

    scale = params.mu0 / w
    res = adaptive_panels(f, rows, lo, hi, len(w), rtol=rtol, atol=atol / np.abs(scale),
                          max_panels=4000)
    return res.value * scale, res.err * np.abs(scale), res.converged


def spectral_density(omega, params: ReducedParams, stats=QUANTUM, tol=1e-10, atol=None):
    """Re mu(w + i0) = (mu0 / w) * int_0^inf x^2 u(x, -w) dx.

    Parameters
    ----------
    omega : float or array_like
        Real frequencies in units of omega_I, nonzero.
    params : ReducedParams
    stats : FieldStatistics
    tol : float
        Relative tolerance.
    atol : float, optional
        Absolute tolerance; defaults to ``tol * mu0``.

    Returns
    -------
    value, err : float or ndarray
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0) or np.any(~np.isfinite(w)):
        raise DomainError("omega must be finite and nonzero")
    atol = tol * params.mu0 if atol is None else atol
    v, e, ok = _sigma_rows(w.ravel(), params, stats, tol, atol)
    if not ok.all():
        bad = w.ravel()[~ok]
        raise ConvergenceError(f"spectral density did not converge at omega = {bad[:5]}",
                               partial=(v.reshape(w.shape), e.reshape(w.shape)))
    return _out(v.reshape(w.shape)), _out(e.reshape(w.shape))


# --------------------------------------------------------------- samples

@dataclass(frozen=True)
class SpectrumSample:
    """One value of mu with absolute error bounds.

    Exactly one of ``omega`` (real axis, boundary value from above) and
    ``z`` (upper half plane) is set.
    """

    re_mu: float
    im_mu: float
    re_err: float
    im_err: float
    stats: FieldStatistics
    omega: float | None = None
    z: complex | None = None

    def __post_init__(self):
        if (self.omega is None) == (self.z is None):
            raise DomainError("exactly one of omega and z must be given")
        if not (self.re_err >= 0 and self.im_err >= 0):
            raise DomainError("error bounds must be non-negative")

    @property
    def mu(self) -> complex:
        return complex(self.re_mu, self.im_mu)

    @property
    def err(self) -> float:
        return math.hypot(self.re_err, self.im_err)

    def location(self) -> str:
        if self.omega is not None:
            return f"{self.omega:.17g}"
        return f"{self.z.real:.17g}{self.z.imag:+.17g}j"


def spectrum_csv(samples) -> str:
    """CSV text ``omega,re_mu,im_mu,re_err,im_err,stats``.

    Complex points are written in the omega column as ``x+yj``.
    """
    buf = io.StringIO(newline="")
    buf.write("omega,re_mu,im_mu,re_err,im_err,stats\n")
    for s in samples:
        buf.write(f"{s.location()},{s.re_mu:.17g},{s.im_mu:.17g},"
                  f"{s.re_err:.17g},{s.im_err:.17g},{s.stats.value}\n")
    return buf.getvalue()


def write_spectrum_csv(samples, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(spectrum_csv(samples))


# ------------------------------------------------- dispersion integrals

@dataclass(frozen=True)
class _FarModel:
    """Power series sum_k c_k |w|^(-k/2) for sigma - sigma_inf beyond ``omega_c``.

    Far out on the real axis the ridge integrals defining sigma cancel
    more and more; the fitted series replaces them there.
    """

    omega_c: float
    coef: tuple
    err: float

    def __call__(self, w):
        a = np.abs(w)
        out = np.zeros_like(a)
        for k, c in enumerate(self.coef, start=1):
            out = out + c * a ** (-0.5 * k)
        return out, self.err * np.sqrt(self.omega_c / a)


@functools.lru_cache(maxsize=64)
def _far_model(params: ReducedParams, stats: FieldStatistics) -> _FarModel:
    c = params.coth
    oc = 1e4 * max(1.0, 1.0 / params.chi, params.chi * c * c)
    w = oc * 2.0 ** (np.arange(13) / 2.0)
    v, e, _ = _sigma_rows(w, params, stats, 1e-13, 1e-16 * params.mu0)
    d = v - sigma_asymptote(params, stats)
    fits = []
    for n in (4, 5):
        basis = (w[:, None] / oc) ** (-0.5 * np.arange(1, n + 1))
        co = np.linalg.lstsq(basis, d, rcond=None)[0]
        fits.append((co, np.abs(basis @ co - d).max()))
    (c4, _), (c5, r5) = fits
    spread = abs(c5.sum() - c4.sum())
    coef = tuple(float(ck * oc ** (0.5 * k)) for k, ck in enumerate(c5, start=1))
    return _FarModel(oc, coef, float(4.0 * r5 + spread + e.max()))


@functools.lru_cache(maxsize=64)
def _sigma_scale(params: ReducedParams, stats: FieldStatistics) -> float:
    """Magnitude of sigma for a parameter set: max(mu0, max |sigma| on a log grid).

    Absolute tolerances of the dispersion integrals are set relative to this
    scale; at high temperature sigma can exceed mu0 by orders of magnitude
    and a mu0-based target would sit below its rounding floor.
    """
    w = np.logspace(-2.0, 2.0, 9)
    v, _, ok = _sigma_rows(w, params, stats, 1e-8, 1e-8 * params.mu0)
    return float(max(params.mu0, np.max(np.abs(v[ok]), initial=0.0)))


def _s_breaks(x0, eta, chi):
    """Panels for the pair variable s around the point x0 + i eta."""
    span = max(64.0, 16.0 * (abs(x0) + eta), 64.0 / chi)
    pts = [np.geomspace(1e-3, span, 42)]
    if eta > 0:
        pts.append(eta * 2.0 ** np.arange(-5, 6))
    if x0 != 0:
        pts.append([abs(x0)])
    pts = np.concatenate(pts)
    pts = pts[(pts > 0) & (pts < span)]
    return np.unique(np.concatenate([[0.0], pts, [span]])), span


def _dispersion_rows(x0, eta, params, stats, tol):
    """J = int_0^inf [-s (d+ - d-) - i eta (d+ + d-)] / (s^2 + eta^2) ds.

    ``d(w) = sigma(w) - sigma_inf`` and ``d+/- = d(x0 +/- s)``, one integral
    per point. Rows ``n + i`` hold the tail ``s = span / t^2``, t in (0, 1].
    Returns (J, err_J, propagated_err, converged).
    """
    x0 = np.asarray(x0, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = len(x0)
    sinf = sigma_asymptote(params, stats)
    far = _far_model(params, stats)
    scale = _sigma_scale(params, stats)
    inner_rtol = 0.1 * tol
    inner_atol = 0.1 * tol * scale
    rows, lo, hi = [], [], []
    spans = np.empty(n)
    for i in range(n):
        br, spans[i] = _s_breaks(x0[i], eta[i], params.chi)
        rows.append(np.full(len(br) - 1, i, dtype=np.intp))
        lo.append(br[:-1])
        hi.append(br[1:])
        t = np.linspace(0.0, 1.0, 5)
        cross = np.array([far.omega_c - abs(x0[i]), far.omega_c + abs(x0[i])])
        cross = cross[cross > spans[i]]
        t = np.unique(np.concatenate([t, np.sqrt(spans[i] / cross)]))
        rows.append(np.full(len(t) - 1, n + i, dtype=np.intp))
        lo.append(t[:-1])
        hi.append(t[1:])
    rows = np.concatenate(rows)
    lo = np.concatenate(lo)
    hi = np.concatenate(hi)

    def f(r, x):
        r = np.broadcast_to(r, x.shape)
        is_tail = r >= n
        k = np.where(is_tail, r - n, r)
        sp = spans[k]
        tt = np.where(is_tail, x, 1.0)
        s = np.where(is_tail, sp / (tt * tt), x)
        jac = np.where(is_tail, 2.0 * sp / tt ** 3, 1.0)
        pts = np.concatenate([(x0[k] + s).ravel(), (x0[k] - s).ravel()])
        d, e = far(pts)
        near = np.abs(pts) <= far.omega_c
        if near.any():
            v, ev, _ = _sigma_rows(pts[near], params, stats, inner_rtol,
                                   inner_atol / (1.0 + np.abs(pts[near])))
            d[near] = v - sinf
            e[near] = ev
        half = x.size
        dp = d[:half].reshape(x.shape)
        dm = d[half:].reshape(x.shape)
        esum = e[:half].reshape(x.shape) + e[half:].reshape(x.shape)
        et = eta[k]
        den = s * s + et * et
        return np.stack([-s * (dp - dm) / den * jac, -et * (dp + dm) / den * jac,
                         (s + et) * esum / den * jac], axis=-1)

    res = adaptive_panels(f, rows, lo, hi, 2 * n, rtol=tol, atol=0.5 * tol * scale,
                          max_panels=4000)
    val = res.value[:n] + res.value[n:]
    J = val[:, 0] + 1j * val[:, 1]
    return J, res.err[:n] + res.err[n:], val[:, 2], res.converged[:n] & res.converged[n:]


_ROW_CHUNK = 4


def _chunked_dispersion(x0, eta, params, stats, tol):
    """Dispersion rows a few at a time; rows are independent, so bits do not change."""
    parts = [_dispersion_rows(x0[i:i + _ROW_CHUNK], eta[i:i + _ROW_CHUNK], params, stats, tol)
             for i in range(0, len(x0), _ROW_CHUNK)]
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(4))


def _check_tol(tol):
    if not (1e-13 <= tol < 1e-2):
        raise DomainError(f"tol must lie in [1e-13, 1e-2), got {tol!r}")


def mu_complex_array(z, params: ReducedParams, stats=QUANTUM, tol=1e-9):
    """Vectorized :func:`mu_complex`: returns (mu, err, converged) arrays.

    ``err`` bounds the real and the imaginary part separately.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    _check_tol(tol)
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(~(z.imag > 0)) or np.any(~np.isfinite(z)):
        raise DomainError("mu_complex needs finite z with Im z > 0; "
                          "use mu_boundary on the real axis")
    J, ej, prop, ok = _chunked_dispersion(z.real, z.imag, params, stats, tol)
    mu = sigma_asymptote(params, stats) - J.imag / math.pi + 1j * J.real / math.pi
    return mu, (ej + prop) / math.pi, ok


def mu_complex(z, params: ReducedParams, stats=QUANTUM, tol=1e-9) -> SpectrumSample:
    """mu(z) in the open upper half plane.

    Parameters
    ----------
    z : complex
        Point with Im z > 0, in units of omega_I.
    params : ReducedParams
    stats : FieldStatistics
    tol : float
        Relative tolerance of the outer dispersion integral; the inner
        field-frequency integrals run ten times tighter.

    Returns
    -------
    SpectrumSample

    Raises
    ------
    DomainError
        If Im z <= 0.
    ConvergenceError
        With the partial sample attached.
    """
    stats = FieldStatistics.parse(stats)
    mu, err, ok = mu_complex_array([z], params, stats, tol)
    s = SpectrumSample(float(mu[0].real), float(mu[0].imag), float(err[0]), float(err[0]),
                       stats, z=complex(z))
    if not ok[0]:
        raise ConvergenceError(f"mu did not converge at z = {z!r}", partial=s)
    return s


def mu_boundary_array(omega, params: ReducedParams, stats=QUANTUM, tol=1e-9):
    """Vectorized :func:`mu_boundary`: returns (mu, re_err, im_err, converged)."""
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    _check_tol(tol)
    w = np.atleast_1d(np.asarray(omega, dtype=float)).ravel()
    if np.any(w == 0) or np.any(~np.isfinite(w)):
        raise DomainError("omega must be finite and nonzero")
    re, re_err, ok_re = _sigma_rows(w, params, stats, 0.1 * tol, 0.1 * tol * params.mu0)
    J, ej, prop, ok_im = _chunked_dispersion(w, np.zeros_like(w), params, stats, tol)
    return re + 1j * J.real / math.pi, re_err, (ej + prop) / math.pi, ok_re & ok_im


def mu_boundary(omega, params: ReducedParams, stats=QUANTUM, tol=1e-9) -> SpectrumSample:
    """Boundary value mu(w + i0) on the real axis.

    The real part is the field-frequency integral of :func:`spectral_density`.
    The imaginary part is the principal value
    ``(1/pi) P int sigma(w') / (w - w') dw'``, evaluated with the symmetric
    pair ``[sigma(w + s) - sigma(w - s)] / s`` so that no singular integrand
    is ever sampled.

    Raises
    ------
    DomainError
        If omega is zero.
    ConvergenceError
        With the partial sample attached.
    """
    stats = FieldStatistics.parse(stats)
    mu, re_err, im_err, ok = mu_boundary_array([omega], params, stats, tol)
    s = SpectrumSample(float(mu[0].real), float(mu[0].imag), float(re_err[0]),
                       float(im_err[0]), stats, omega=float(omega))
    if not ok[0]:
        raise ConvergenceError(f"mu did not converge at omega = {omega!r}", partial=s)
    return s


# ------------------------------------------------------------ tabulation

def _sigma_threaded(w, params, stats, rtol, atol, threads):
    """:func:`_sigma_rows` split over worker threads; rows are independent."""
    if threads <= 1 or len(w) < 64:
        return _sigma_rows(w, params, stats, rtol, atol)
    from concurrent.futures import ThreadPoolExecutor
    parts = np.array_split(np.arange(len(w)), threads * 4)
    atol = np.broadcast_to(atol, w.shape)
    with ThreadPoolExecutor(threads) as ex:
        outs = list(ex.map(lambda ix: _sigma_rows(w[ix], params, stats, rtol, atol[ix]), parts))
    return tuple(np.concatenate([o[k] for o in outs]) for k in range(3))


@dataclass
class SpectralTable:
    """sigma - sigma_inf stored at quadrature nodes for fast evaluation of mu.

    ``mu(z) = sigma_inf + (i/pi) int_0^inf d(w') 2z / (z^2 - w'^2) dw'`` is
    summed with the stored Kronrod weights; the embedded Gauss weights give a
    per-panel error estimate for every z. Each evaluation is an exact Cauchy
    integral of the stored density, hence analytic in z. Accuracy requires
    Im z above roughly the panel width, which is at most ``resolution`` for
    |Re z| below ``span``.

    Build with :meth:`build`.
    """

    params: ReducedParams
    stats: FieldStatistics
    span: float
    resolution: float
    sigma_inf: float
    omega_c: float
    nodes: np.ndarray
    wk: np.ndarray
    wg: np.ndarray
    dsig: np.ndarray
    dsig_err: np.ndarray
    finite: np.ndarray
    tol: float

    @classmethod
    def build(cls, params: ReducedParams, stats=QUANTUM, span=10.0, resolution=0.1,
              tol=1e-10, threads=1) -> "SpectralTable":
        """Tabulate the spectral density.

        Parameters
        ----------
        params : ReducedParams
        stats : FieldStatistics
        span : float
            Frequencies up to ``span`` are covered with panels no wider than
            ``resolution``; beyond, panels grow geometrically.
        resolution : float
        tol : float
            Relative tolerance for each stored density value.
        threads : int
            Worker threads for the density evaluations.
        """
        stats = FieldStatistics.parse(stats)
        stats.validate(params.beta_omegaI)
        _check_tol(tol)
        if not (span > 0 and resolution > 0):
            raise DomainError("span and resolution must be positive")
        far = _far_model(params, stats)
        sinf = sigma_asymptote(params, stats)
        oc = far.omega_c
        if span >= oc:
            raise DomainError(f"span must stay below {oc:.6g}")
        edges = list(np.linspace(0.0, span, int(math.ceil(span / resolution)) + 1))
        e = span
        while e < oc:
            e = min(oc, e + max(resolution, 0.25 * (e - span)))
            edges.append(e)
        edges = np.array(edges)
        tedges = np.linspace(0.0, 1.0, 9)
        n_fin = len(edges) - 1
        rows = np.r_[np.zeros(n_fin, np.intp), np.ones(len(tedges) - 1, np.intp)]
        lo = np.r_[edges[:-1], tedges[:-1]]
        hi = np.r_[edges[1:], tedges[1:]]
        scale = max(span, 1.0)
        inner_atol = 0.1 * tol * params.mu0

        def f(r, x):
            r = np.broadcast_to(r, x.shape)
            tail = r == 1
            tt = np.where(tail, x, 1.0)
            w = np.where(tail, oc / (tt * tt), x)
            jac = np.where(tail, 2.0 * oc / tt ** 3, 1.0)
            d, e = far(w.ravel())
            near = ~tail.ravel()
            if near.any():
                v, ev, _ = _sigma_threaded(w.ravel()[near], params, stats, 0.1 * tol,
                                           inner_atol, threads)
                d[near] = v - sinf
                e[near] = ev
            weight = jac / (1.0 + w / scale) ** 2
            return np.stack([d.reshape(x.shape) * weight, e.reshape(x.shape) * weight],
                            axis=-1)

        res = adaptive_panels(f, rows, lo, hi, 2, rtol=tol, atol=tol * params.mu0 * scale,
                              keep_nodes=True, max_panels=200000)
        if not res.converged.all():
            raise ConvergenceError("spectral table did not converge")
        L = res.leaves
        order = np.lexsort((L["a"], L["rows"]))
        fx = L["fx"][order]
        a, b, tail = L["a"][order], L["b"][order], L["rows"][order] == 1
        half = 0.5 * (b - a)
        x = (0.5 * (a + b))[:, None] + half[:, None] * NODES
        tt = np.where(tail[:, None], x, 1.0)
        w = np.where(tail[:, None], oc / (tt * tt), x)
        jac = np.where(tail[:, None], 2.0 * oc / tt ** 3, 1.0)
        weight = jac / (1.0 + w / scale) ** 2
        return cls(params, stats, float(span), float(resolution), sinf, oc,
                   nodes=w, wk=half[:, None] * KRONROD_WEIGHTS * jac,
                   wg=half[:, None] * GAUSS_WEIGHTS * jac,
                   dsig=fx[..., 0] / weight, dsig_err=fx[..., 1] / weight,
                   finite=~tail, tol=tol)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def mu(self, z, chunk=64):
        """mu at points with Im z > 0; returns (values, err) arrays."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel()
        if np.any(~(z.imag > 0)):
            raise DomainError("SpectralTable.mu needs Im z > 0")
        wn = self.nodes.ravel()
        a = (self.wk * self.dsig).ravel()
        diff = ((self.wk - self.wg) * self.dsig).ravel()
        prop = (np.abs(self.wk) * self.dsig_err).ravel()
        P = self.nodes.shape[0]
        out = np.empty(z.size, dtype=complex)
        err = np.empty(z.size)
        for s in range(0, z.size, chunk):
            zz = z[s:s + chunk, None]
            K = 2.0 * zz / (zz * zz - wn[None, :] ** 2)
            out[s:s + chunk] = K @ a
            e1 = np.abs((K * diff).reshape(len(zz), P, 15).sum(axis=2)).sum(axis=1)
            err[s:s + chunk] = e1 + np.abs(K) @ prop
        mu = self.sigma_inf + 1j * out / math.pi
        err = err / math.pi + 2.0 * _EPS_SUM * np.abs(mu)
        return mu.reshape(shape), err.reshape(shape)

    def boundary(self, omega):
        """mu(w + i0) at real frequencies; returns (values, re_err, im_err)."""
        w = np.asarray(omega, dtype=float)
        shape = w.shape
        w = w.ravel()
        p = np.abs(w)
        if np.any(p == 0) or np.any(p >= self.omega_c):
            raise DomainError(f"omega must be nonzero and below {self.omega_c:.6g}")
        sig, sig_err, ok = _sigma_rows(p, self.params, self.stats, 0.1 * self.tol,
                                       0.1 * self.tol * self.params.mu0)
        if not ok.all():
            raise ConvergenceError("spectral density did not converge on the boundary")
        dp = sig - self.sigma_inf
        wn = self.nodes
        fin = self.finite[:, None]
        im = np.empty(p.size)
        im_err = np.empty(p.size)
        for i, (pi, dpi, epi) in enumerate(zip(p, dp, sig_err)):
            gap = pi - wn
            close = np.abs(gap) <= 1e-12 * pi
            safe = np.where(close, 1.0, gap)
            num = np.where(fin, self.dsig - dpi, self.dsig)
            g = np.where(close, 0.0, num / safe) + self.dsig / (pi + wn)
            total = np.sum(self.wk * g) + dpi * math.log(pi / (self.omega_c - pi))
            e1 = np.abs(np.sum((self.wk - self.wg) * g, axis=1)).sum()
            e2 = np.sum(np.abs(self.wk) * (self.dsig_err + np.where(fin, epi, 0.0))
                        / np.abs(safe))
            im[i] = np.sign(w[i]) * total / math.pi
            im_err[i] = (e1 + e2 + epi * abs(math.log(pi / (self.omega_c - pi)))) / math.pi
        mu = sig + 1j * im
        return mu.reshape(shape), sig_err.reshape(shape), im_err.reshape(shape)


_EPS_SUM = 1e-15
