"""Adaptive panel quadrature, principal values, extrapolation and stencils.

The workhorse is :func:`adaptive_panels`, a vectorized Gauss-Kronrod (7/15)
engine that refines many independent integrals ("rows") at once. Each row is
refined only on the basis of its own panels, so a row's result is bitwise
identical whether it is computed alone or inside a batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

# Kronrod abscissae and weights (positive half, descending), Gauss weights
# for the embedded 7-point rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

#: The 15 Kronrod nodes on [-1, 1] in ascending order.
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
#: Kronrod weights matching :data:`NODES`.
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
#: Gauss weights on the 15-node layout (zero at Kronrod-only nodes).
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG, _WG[-2::-1]])

_EPS = np.finfo(float).eps
_ROUNDING = 50.0 * _EPS
_STALL = 1000.0 * _EPS


@dataclass
class QuadResult:
    """Outcome of a one-dimensional quadrature.

    Attributes
    ----------
    value : float or complex
    err : float
        Absolute error estimate, including any truncation bound.
    n_evals : int
        Number of integrand evaluations.
    converged : bool
    """

    value: complex
    err: float
    n_evals: int
    converged: bool

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(self.value + other.value, self.err + other.err,
                          self.n_evals + other.n_evals,
                          self.converged and other.converged)


@dataclass
class PanelResult:
    """Per-row results of :func:`adaptive_panels`.

    ``leaves`` holds the final panels (row, a, b, node values) when requested;
    rows appear in their own refinement order.
    """

    value: np.ndarray
    err: np.ndarray
    n_evals: np.ndarray
    converged: np.ndarray
    leaves: dict | None = field(default=None, repr=False)

    def row(self, i: int) -> QuadResult:
        v = self.value[i]
        v = complex(v) if np.iscomplexobj(v) else (v if np.ndim(v) else float(v))
        return QuadResult(v, float(self.err[i]), int(self.n_evals[i]),
                          bool(self.converged[i]))


def _rowsum(rows, vals, n_rows):
    """Sum ``vals`` into ``n_rows`` bins in array order (deterministic)."""
    if vals.ndim == 1:
        if np.iscomplexobj(vals):
            return (np.bincount(rows, vals.real, n_rows)
                    + 1j * np.bincount(rows, vals.imag, n_rows))
        return np.bincount(rows, vals, n_rows)
    out = np.zeros((n_rows,) + vals.shape[1:], dtype=vals.dtype)
    np.add.at(out, rows, vals)
    return out


def _gk_panels(f, rows, a, b):
    """Apply the 15-point rule on each panel."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(rows[:, None], x))
    if fx.shape[:2] != x.shape:
        fx = np.broadcast_to(fx, x.shape + fx.shape[2:])
    hk = half.reshape((-1,) + (1,) * (fx.ndim - 2))
    k = np.zeros(fx.shape[:1] + fx.shape[2:], dtype=fx.dtype)
    g = np.zeros_like(k)
    l1 = np.zeros(fx.shape[:1] + fx.shape[2:])
    for j in range(15):
        fj = fx[:, j]
        k = k + KRONROD_WEIGHTS[j] * fj
        l1 = l1 + KRONROD_WEIGHTS[j] * np.abs(fj)
        if GAUSS_WEIGHTS[j]:
            g = g + GAUSS_WEIGHTS[j] * fj
    k = k * hk
    diff = np.abs(k - g * hk)
    l1 = l1 * np.abs(hk)
    if diff.ndim > 1:
        axes = tuple(range(1, diff.ndim))
        diff = diff.max(axis=axes)
        l1 = l1.max(axis=axes)
    return k, diff, l1, fx


def adaptive_panels(f, rows, a, b, n_rows, *, atol=0.0, rtol=1e-10,
                    max_panels=20000, max_iter=64, keep_nodes=False,
                    split_fraction=0.25):
    """Adaptive Gauss-Kronrod quadrature over independent sets of panels.

    Parameters
    ----------
    f : callable
        ``f(rows, x)`` with ``rows`` of shape (n, 1) and ``x`` of shape
        (n, 15); returns values of shape (n, 15) or (n, 15, m).
    rows, a, b : array_like
        Initial panels: row index and endpoints of each panel.
    n_rows : int
        Number of independent integrals.
    atol : float or array_like
        Absolute tolerance, scalar or one per row.
    rtol : float
        Relative tolerance with respect to the running row value.
    max_panels : int
        Leaf budget per row; rows exceeding it stop unconverged.
    keep_nodes : bool
        Return final leaves with their node values.
    split_fraction : float
        Panels with error above this fraction of their row's largest panel
        error are bisected. Refinement never depends on the tolerance, so a
        tighter tolerance only prolongs the same refinement sequence.

    Returns
    -------
    PanelResult
    """
    rows = np.asarray(rows, dtype=np.intp)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    atol = np.broadcast_to(np.asarray(atol, dtype=float), (n_rows,))
    n_evals = np.zeros(n_rows, dtype=np.int64)
    active = np.ones(n_rows, dtype=bool)
    converged = np.zeros(n_rows, dtype=bool)

    k, e, l1, fx = _gk_panels(f, rows, a, b)
    n_evals += 15 * np.bincount(rows, minlength=n_rows)
    L = dict(rows=rows, a=a, b=b, k=k, e=e, l1=l1)
    if keep_nodes:
        L["fx"] = fx
    history = []
    for _ in range(max_iter):
        value = _rowsum(L["rows"], L["k"], n_rows)
        err = np.bincount(L["rows"], L["e"], n_rows)
        l1_row = np.bincount(L["rows"], L["l1"], n_rows)
        scale = np.abs(value)
        if scale.ndim > 1:
            scale = scale.max(axis=tuple(range(1, scale.ndim)))
        thresh = np.maximum(np.maximum(atol, rtol * scale), 2 * _ROUNDING * l1_row)
        done = active & (err <= thresh)
        # rounding-limited rows: error stalled at a level set by cancellation
        if len(history) >= 4:
            done |= active & (err > 0.5 * history[-4]) & (err <= _STALL * l1_row)
        history.append(err)
        converged |= done
        active &= ~done
        if not active.any():
            break
        lrows = L["rows"]
        counts = np.bincount(lrows, minlength=n_rows)
        over = active & (counts >= max_panels)
        active &= ~over
        emax = np.zeros(n_rows)
        np.maximum.at(emax, lrows, L["e"])
        width = L["b"] - L["a"]
        tiny = width <= 1e-13 * np.maximum(np.abs(L["a"]), np.abs(L["b"]))
        split = (active[lrows] & (L["e"] >= split_fraction * emax[lrows])
                 & (L["e"] > _ROUNDING * L["l1"]) & ~tiny)
        stuck = active & (np.bincount(lrows, split, n_rows) == 0)
        active &= ~stuck
        split &= active[lrows]
        if not split.any():
            break
        keep = ~split
        pr, pa, pb = lrows[split], L["a"][split], L["b"][split]
        pm = 0.5 * (pa + pb)
        cr = np.repeat(pr, 2)
        ca = np.column_stack([pa, pm]).ravel()
        cb = np.column_stack([pm, pb]).ravel()
        ck, ce, cl1, cfx = _gk_panels(f, cr, ca, cb)
        n_evals += 15 * np.bincount(cr, minlength=n_rows)
        L = dict(rows=np.concatenate([lrows[keep], cr]),
                 a=np.concatenate([L["a"][keep], ca]),
                 b=np.concatenate([L["b"][keep], cb]),
                 k=np.concatenate([L["k"][keep], ck]),
                 e=np.concatenate([L["e"][keep], ce]),
                 l1=np.concatenate([L["l1"][keep], cl1]),
                 **({"fx": np.concatenate([L["fx"][keep], cfx])} if keep_nodes else {}))
    value = _rowsum(L["rows"], L["k"], n_rows)
    err = np.bincount(L["rows"], L["e"], n_rows)
    l1_row = np.bincount(L["rows"], L["l1"], n_rows)
    err = np.maximum(err, _ROUNDING * l1_row)
    return PanelResult(value, err, n_evals, converged, L if keep_nodes else None)


def _phase_breaks(nu, k, stop):
    """Points where the phase nu*w + k*w^2/2 crosses multiples of pi."""
    total = nu * stop + 0.5 * k * stop * stop
    n = int(math.floor(total / math.pi))
    if n <= 0:
        return np.empty(0)
    j = np.arange(1, n + 1) * math.pi
    if k > 0:
        return 2.0 * j / (nu + np.sqrt(nu * nu + 2.0 * k * j))
    return j / nu


def gaussian_cutoff(envelope_scale, power, rel=1e-16, linear_decay=0.0):
    """Point beyond which ``w^p exp(-(w/s)^2 - b w)`` stays below ``rel`` of its peak."""
    s = float(envelope_scale)
    a = 0.0 if math.isinf(s) else 1.0 / (s * s)
    b = float(linear_decay)
    if a <= 0 and b <= 0:
        raise ValueError("envelope has no decay")

    def log_env(w):
        return (power * math.log(w) if power else 0.0) - a * w * w - b * w

    # peak of the envelope: p/w = 2 a w + b
    if power > 0:
        peak_at = (-b + math.sqrt(b * b + 8.0 * a * power)) / (4.0 * a) if a > 0 else power / b
        target = log_env(peak_at) + math.log(rel)
    else:
        peak_at = 0.0
        target = math.log(rel)
    lo = max(peak_at, 1e-300)
    hi = 2.0 * lo + (s if a > 0 else 1.0 / b)
    while log_env(hi) > target:
        hi *= 2.0
    return brentq(lambda w: log_env(w) - target, lo, hi, xtol=1e-12 * hi)


def semi_infinite_breaks(envelope_scale, oscillation_scales=(), chirp_rates=(),
                         power=3.0, rel=1e-16, linear_decay=0.0):
    """Panel breakpoints on [0, cut] for a damped oscillatory integrand.

    Panel widths are at most half an oscillation period of the fastest
    phase (linear frequencies plus chirps) and at most half the local
    envelope decay length.
    """
    s = float(envelope_scale)
    b = float(linear_decay)
    cut = gaussian_cutoff(s, power, rel, b)
    decay = min(s, 1.0 / b if b > 0 else math.inf)
    nu = float(sum(abs(v) for v in oscillation_scales))
    kr = float(sum(abs(v) for v in chirp_rates))
    pts = [np.linspace(0.0, cut, int(math.ceil(2.0 * cut / decay)) + 1)]
    if nu > 0 or kr > 0:
        pts.append(_phase_breaks(nu, kr, cut))
    br = np.unique(np.concatenate(pts))
    br = br[br <= cut]
    if br[-1] < cut:
        br = np.append(br, cut)
    return br


def integrate_semi_infinite(f, envelope_scale, oscillation_scales=(), tol=1e-10, *,
                            chirp_rates=(), power=3.0, linear_decay=0.0, atol=0.0,
                            max_panels=200000):
    """Integrate a Gaussian-damped oscillatory function over [0, inf).

    Parameters
    ----------
    f : callable
        Vectorized integrand of one array argument.
    envelope_scale : float
        Scale ``s`` of the envelope ``w^power exp(-(w/s)^2)`` dominating |f|.
    oscillation_scales : sequence of float
        Angular frequencies of the oscillatory factors.
    tol : float
        Relative tolerance.
    chirp_rates : sequence of float
        Coefficients ``k`` of chirped phases ``k w^2 / 2``.
    power : float
        Polynomial growth of the envelope.
    linear_decay : float
        Optional extra ``exp(-b w)`` factor in the envelope.

    Returns
    -------
    QuadResult
        The error includes an analytic bound on the truncated Gaussian tail.
    """
    if not envelope_scale > 0:
        raise ValueError("envelope_scale must be positive")
    br = semi_infinite_breaks(envelope_scale, oscillation_scales, chirp_rates, power,
                              linear_decay=linear_decay)
    n = len(br) - 1
    res = adaptive_panels(lambda r, x: f(x), np.zeros(n, dtype=np.intp), br[:-1], br[1:], 1,
                          atol=atol, rtol=tol, max_panels=max_panels)
    out = res.row(0)
    out.err += _tail_bound(f, envelope_scale, power, linear_decay, br[-1])
    return out


def _tail_bound(f, s, power, b, cut):
    """Bound the integral beyond ``cut`` by scaling the envelope to |f| near ``cut``."""
    a = 0.0 if math.isinf(s) else 1.0 / (s * s)
    probe = np.linspace(0.9 * cut, cut, 9)
    env = probe ** power * np.exp(-a * probe * probe - b * probe)
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.max(np.abs(np.asarray(f(probe))) / np.where(env > 0, env, np.inf))
    # past the peak the log-envelope slope is below -(2 a cut + b - p / cut)
    slope = 2.0 * a * cut + b - power / cut
    env_c = cut ** power * math.exp(-a * cut * cut - b * cut)
    tail = env_c / slope if slope > 0 else env_c * cut
    return float(amp * tail) if np.isfinite(amp) else 0.0


def integrate_pv(f, pole, half_width, tol=1e-10, *, lower=-math.inf, upper=math.inf,
                 atol=0.0, max_panels=20000):
    """Principal value of the integral of f(y)/(y - pole).

    Within ``|y - pole| < half_width`` the pair ``[f(pole+s) - f(pole-s)]/s``
    is integrated over ``s > 0``; outside, the ordinary integrand is used.
    Infinite ranges are mapped with ``y = pole +/- half_width / t^2``.

    Parameters
    ----------
    f : callable
        Vectorized, smooth at the pole; decaying at infinity when a range is
        infinite.
    pole : float
    half_width : float
        Half-width of the symmetric subtraction window.
    tol : float
        Relative tolerance.

    Returns
    -------
    QuadResult
    """
    p = float(pole)
    hw = float(min(half_width, p - lower, upper - p))
    if hw < 0:
        return _outside_pv(f, p, lower, upper, tol, atol, max_panels)
    pieces = []
    if hw > 0:
        pieces.append(("pair", 0.0, hw))
    for side, end in ((1.0, upper), (-1.0, lower)):
        lo = p + side * hw
        if math.isinf(end):
            pieces.append(("map", side, hw))
        elif side * (end - lo) > 0:
            pieces.append(("plain", min(lo, end), max(lo, end)))

    def g(rows, x):
        out = np.empty(np.broadcast(rows, x).shape)
        r = np.broadcast_to(rows, out.shape)
        for i, (kind, u, v) in enumerate(pieces):
            m = r == i
            if not m.any():
                continue
            xi = x[m] if x.shape == out.shape else np.broadcast_to(x, out.shape)[m]
            if kind == "pair":
                out[m] = (np.asarray(f(p + xi)) - np.asarray(f(p - xi))) / xi
            elif kind == "map":
                out[m] = u * 2.0 * np.asarray(f(p + u * v / (xi * xi))) / xi
            else:
                out[m] = np.asarray(f(xi)) / (xi - p)
        return out

    ra, rb = [], []
    for kind, u, v in pieces:
        if kind == "map":
            ra.append(0.0)
            rb.append(1.0)
        else:
            ra.append(u)
            rb.append(v)
    n = len(pieces)
    res = adaptive_panels(g, np.arange(n), np.array(ra), np.array(rb), n,
                          atol=atol / max(n, 1), rtol=tol, max_panels=max_panels)
    return QuadResult(float(res.value.sum()), float(res.err.sum()),
                      int(res.n_evals.sum()), bool(res.converged.all()))


def _outside_pv(f, p, lower, upper, tol, atol, max_panels):
    if math.isinf(lower) or math.isinf(upper):
        raise ValueError("pole outside an infinite range")
    res = adaptive_panels(lambda r, x: np.asarray(f(x)) / (x - p), np.zeros(1, dtype=np.intp),
                          np.array([lower]), np.array([upper]), 1,
                          atol=atol, rtol=tol, max_panels=max_panels)
    return res.row(0)


@dataclass
class RichardsonResult:
    """Extrapolated limit with the spread of the last two tableau levels."""

    limit: complex
    err: float
    order: float
    low_confidence: bool

    def __iter__(self):
        return iter((self.limit, self.err))


def _detect_order(values, etas):
    v = np.asarray(values)
    e = np.asarray(etas, dtype=float)
    d1, d2 = abs(v[-3] - v[-2]), abs(v[-2] - v[-1])
    if d1 == 0 or d2 == 0:
        return math.nan
    target = d1 / d2

    def g(p):
        return (e[-3] ** p - e[-2] ** p) / (e[-2] ** p - e[-1] ** p) - target

    try:
        return brentq(g, 0.05, 20.0, xtol=1e-10)
    except ValueError:
        return math.nan


def richardson(values, etas, order_hint=None) -> RichardsonResult:
    """Polynomial extrapolation of ``values(eta)`` to ``eta = 0``.

    Parameters
    ----------
    values : array_like
        Real or complex samples, at least three.
    etas : array_like
        Strictly decreasing positive parameters.
    order_hint : float, optional
        Extrapolate in ``eta**order_hint`` instead of ``eta``.

    Returns
    -------
    RichardsonResult
        ``err`` is the difference between the last two diagonal entries of the
        Neville tableau; ``low_confidence`` flags non-monotone residuals.
    """
    v = np.asarray(values)
    e = np.asarray(etas, dtype=float)
    if v.shape[0] < 3 or v.shape[0] != e.shape[0]:
        raise ValueError("richardson needs at least three matching samples")
    if np.any(np.diff(e) >= 0) or np.any(e <= 0):
        raise ValueError("etas must be positive and strictly decreasing")
    x = e ** (order_hint if order_hint else 1.0)
    n = len(v)
    t = [v.astype(complex if np.iscomplexobj(v) else float)]
    for j in range(1, n):
        prev = t[-1]
        cur = (x[:n - j] * prev[1:] - x[j:] * prev[:-1]) / (x[:n - j] - x[j:])
        t.append(cur)
    diag = np.array([t[j][-1] for j in range(n)])
    limit = diag[-1]
    err = float(abs(diag[-1] - diag[-2]))
    steps = np.abs(np.diff(v))
    low = bool(np.any(steps[1:] > steps[:-1])) or bool(
        n > 3 and abs(diag[-1] - diag[-2]) > abs(diag[-2] - diag[-3]))
    order = _detect_order(v, e)
    lim = complex(limit) if np.iscomplexobj(limit) else float(limit)
    return RichardsonResult(lim, err, order, low)


def cauchy_riemann_residual(f, z, h):
    """Central-difference Cauchy-Riemann residual of ``f`` at points ``z``.

    Returns ``|dRe/dx - dIm/dy| + |dRe/dy + dIm/dx|`` with step ``h``; it
    vanishes for analytic ``f`` up to O(h^2) and rounding.
    """
    z = np.asarray(z, dtype=complex)
    pts = np.concatenate([z + h, z - h, z + 1j * h, z - 1j * h])
    vals = np.asarray(f(pts), dtype=complex)
    n = z.size
    fp, fm, gp, gm = (vals[i * n:(i + 1) * n].reshape(z.shape) for i in range(4))
    fx = (fp - fm) / (2.0 * h)
    fy = (gp - gm) / (2.0 * h)
    return np.abs(fx.real - fy.imag) + np.abs(fy.real + fx.imag)
