"""Positive-real-function checks on the spectral distribution mu.

A damping function describes a causal, passive, Hermitian response when
(i) it is analytic in the upper half plane, (ii) Re mu(w + i0) >= 0 and
(iii) mu(-w + i0) = conj(mu(w + i0)). The checks here certify these
numerically, count zeros of the characteristic function
``F(z) = z^2 - w0^2 + i z mu(z)`` in the upper half plane and assemble
scan reports.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (ContourDegenerateError, ContourResolutionError, ConvergenceError,
                     DomainError)
from .model import INFINITE, QUANTUM, FieldStatistics, ReducedParams, format_beta
from .spectrum import SpectralTable, _sigma_rows, mu_boundary_array

#: Default scan grids (units of omega_I).
DEFAULT_CHI = (0.1, 1.0, 10.0)
DEFAULT_BETA = (0.1, 1.0, 10.0, INFINITE)


def symmetric_log_grid(lo=1e-2, hi=10.0, n=81):
    """``-logspace`` followed by ``+logspace``: 2n frequencies without zero."""
    pos = np.logspace(math.log10(lo), math.log10(hi), n)
    return np.concatenate([-pos[::-1], pos])


def default_tolerance(params: ReducedParams) -> float:
    """Scale-aware positivity tolerance 1e-8 * mu0."""
    return 1e-8 * params.mu0


# ---------------------------------------------------------------- records

@dataclass
class PositivityRecord:
    """Criterion (ii): Re mu on the real axis."""

    passed: bool
    min_re_mu: float
    argmin_omega: float
    tolerance: float
    omegas: np.ndarray = field(repr=False)
    re_mu: np.ndarray = field(repr=False)
    re_err: np.ndarray = field(repr=False)
    flagged: list = field(default_factory=list)
    sign_changes: list = field(default_factory=list)

    def failing(self):
        """Indices with Re mu below -(re_err + tolerance)."""
        return np.flatnonzero(self.re_mu < -(self.re_err + self.tolerance))

    def as_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "min_re_mu": float(self.min_re_mu),
            "argmin_omega": float(self.argmin_omega),
            "tolerance": float(self.tolerance),
            "n_points": int(len(self.omegas)),
            "flagged": [float(w) for w in self.flagged],
            "sign_changes": [float(w) for w in self.sign_changes],
        }


@dataclass
class SymmetryRecord:
    """Criterion (iii): mu(-w) = conj(mu(w))."""

    passed: bool
    max_asymmetry: float
    combined_error: float
    tolerance: float
    flagged: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "max_asymmetry": float(self.max_asymmetry),
            "combined_error": float(self.combined_error),
            "tolerance": float(self.tolerance),
            "flagged": [float(w) for w in self.flagged],
        }


@dataclass
class AnalyticityRecord:
    """Criterion (i): Cauchy-Riemann residuals on a grid above the real axis."""

    passed: bool
    max_residual: float
    observed_order: float
    orders: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    x_grid: tuple = ()
    y_grid: tuple = ()
    h_sequence: tuple = ()
    n_floor_limited: int = 0
    flagged: list = field(default_factory=list)

    def as_dict(self) -> dict:
        finite = self.orders[np.isfinite(self.orders)]
        return {
            "passed": bool(self.passed),
            "max_residual": float(self.max_residual),
            "observed_order": float(self.observed_order),
            "order_range": ([float(finite.min()), float(finite.max())] if finite.size
                            else None),
            "grid": {"x": [float(v) for v in self.x_grid], "y": [float(v) for v in self.y_grid]},
            "h_sequence": [float(h) for h in self.h_sequence],
            "n_floor_limited": int(self.n_floor_limited),
            "flagged": [[float(z.real), float(z.imag)] for z in self.flagged],
        }


@dataclass
class FLOReport:
    """All three criteria and the zero count for one (chi, beta) cell."""

    params: ReducedParams
    stats: FieldStatistics
    criterion_i: AnalyticityRecord | None
    criterion_ii: PositivityRecord
    criterion_iii: SymmetryRecord
    uhp_zero_count: int | None
    violations: list
    converged: bool = True

    @property
    def passed(self) -> bool:
        if not self.converged:
            return False
        ok = self.criterion_ii.passed and self.criterion_iii.passed
        if self.criterion_i is not None:
            ok = ok and self.criterion_i.passed
        if self.uhp_zero_count is not None:
            ok = ok and self.uhp_zero_count == 0
        return ok

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "stats": self.stats.value,
            "passed": bool(self.passed),
            "converged": bool(self.converged),
            "criterion_i": None if self.criterion_i is None else self.criterion_i.as_dict(),
            "criterion_ii": self.criterion_ii.as_dict(),
            "criterion_iii": self.criterion_iii.as_dict(),
            "uhp_zero_count": self.uhp_zero_count,
            "violations": [
                {"chi": float(c), "beta_omegaI": format_beta(b), "omega": float(w),
                 "re_mu": float(r)}
                for c, b, w, r in self.violations
            ],
        }


def _json_safe(obj):
    """Non-finite floats become null; containers are walked recursively."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def reports_to_json(reports) -> str:
    """Deterministic JSON text for a list of reports (NaN written as null)."""
    body = {"reports": [_json_safe(r.as_dict()) for r in reports]}
    return json.dumps(body, indent=2, allow_nan=False) + "\n"


# -------------------------------------------------------------- criteria

def _check_grid(omega_grid):
    w = np.asarray(omega_grid, dtype=float).ravel()
    if w.size == 0 or np.any(w == 0) or np.any(~np.isfinite(w)):
        raise DomainError("omega grid must be nonempty, finite and exclude 0")
    return w


def _bisect_crossing(params, stats, a, b, fa, iters=40):
    for _ in range(iters):
        m = 0.5 * (a + b)
        v, _, _ = _sigma_rows(np.array([m]), params, stats, 1e-12, 0.0)
        if (v[0] < 0) == (fa < 0):
            a, fa = m, v[0]
        else:
            b = m
    return 0.5 * (a + b)


def check_positivity(params: ReducedParams, stats=QUANTUM, omega_grid=None, tol=None,
                     refine=True) -> PositivityRecord:
    """Criterion (ii) on a frequency grid.

    Each point passes when ``Re mu >= -(re_err + tol)``. Points whose
    quadrature does not converge are flagged and excluded. With ``refine``
    every sign change of Re mu between neighbouring grid points is located
    by bisection and recorded.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    w = _check_grid(symmetric_log_grid() if omega_grid is None else omega_grid)
    tol = default_tolerance(params) if tol is None else float(tol)
    if not tol > 0:
        raise DomainError("tol must be positive")
    v, e, ok = _sigma_rows(w, params, stats, 1e-11, 0.01 * tol)
    flagged = [float(x) for x in w[~ok]]
    vv = np.where(ok, v, np.inf)
    i = int(np.argmin(vv))
    passed = bool(np.all((v >= -(e + tol)) | ~ok))
    changes = []
    if refine:
        order = np.argsort(w)
        ws, vs, oks = w[order], v[order], ok[order]
        for j in range(len(ws) - 1):
            if oks[j] and oks[j + 1] and ws[j] * ws[j + 1] > 0 and (vs[j] < 0) != (vs[j + 1] < 0):
                changes.append(_bisect_crossing(params, stats, ws[j], ws[j + 1], vs[j]))
    return PositivityRecord(passed, float(vv[i]), float(w[i]), tol, w, v, e, flagged, changes)


def symmetry_defect(omegas, mus, errs, tol) -> SymmetryRecord:
    """Compare mu(w) with conj(mu(-w)) for every w present with its mirror."""
    w = np.asarray(omegas, dtype=float)
    mu = np.asarray(mus, dtype=complex)
    err = np.asarray(errs, dtype=float)
    index = {float(x): k for k, x in enumerate(w)}
    worst, comb = 0.0, 0.0
    passed = True
    for k, x in enumerate(w):
        if x <= 0:
            continue
        j = index.get(-float(x))
        if j is None:
            raise DomainError(f"omega grid is not symmetric: {-x!r} missing")
        d = abs(mu[k] - np.conj(mu[j]))
        c = err[k] + err[j]
        if d > c + tol:
            passed = False
        if d >= worst:
            worst, comb = d, c
    return SymmetryRecord(passed, float(worst), float(comb), float(tol))


def check_symmetry(params: ReducedParams, stats=QUANTUM, omega_grid=None, tol=None,
                   table: SpectralTable | None = None) -> SymmetryRecord:
    """Criterion (iii) from boundary values on a grid symmetric about 0.

    By default every frequency, negative ones included, is evaluated
    independently with :func:`mu_boundary_array`. A :class:`SpectralTable`
    may be passed for speed, but its imaginary part is odd by construction,
    so only the real part is then really tested.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    w = _check_grid(symmetric_log_grid() if omega_grid is None else omega_grid)
    tol = default_tolerance(params) if tol is None else float(tol)
    if table is None:
        mu, re_err, im_err, ok = mu_boundary_array(w, params, stats, 1e-9)
        bad = w[~ok]
        keep = ~(np.isin(w, bad) | np.isin(w, -bad))
        rec = symmetry_defect(w[keep], mu[keep], np.hypot(re_err, im_err)[keep], tol)
        rec.flagged = [float(x) for x in bad]
        return rec
    mu, re_err, im_err = table.boundary(w)
    return symmetry_defect(w, mu, np.hypot(re_err, im_err), tol)


def cr_residuals(f, z, h):
    """Central-difference Cauchy-Riemann residuals of ``f`` at points ``z``."""
    z = np.asarray(z, dtype=complex)
    fx = (f(z + h) - f(z - h)) / (2.0 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2.0 * h)
    return np.abs(fx.real - fy.imag) + np.abs(fy.real + fx.imag)


def analyticity_orders(f, z, h_sequence, scale, floor_rel=1e-13):
    """Residuals for each h and observed orders between consecutive h.

    A pair of step sizes counts only when both residuals exceed ten times
    the rounding floor ``floor_rel * scale / h``; otherwise the order is NaN.
    """
    hs = np.asarray(h_sequence, dtype=float)
    if hs.size < 2 or np.any(np.diff(hs) >= 0) or np.any(hs <= 0):
        raise DomainError("h_sequence needs at least two decreasing positive steps")
    z = np.asarray(z, dtype=complex).ravel()
    res = np.array([cr_residuals(f, z, h) for h in hs])
    floor = floor_rel * np.asarray(scale, dtype=float) / hs[:, None]
    orders = np.full((len(hs) - 1, z.size), np.nan)
    for k in range(len(hs) - 1):
        good = (res[k] > 10 * floor[k]) & (res[k + 1] > 10 * floor[k + 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            o = np.log(res[k] / res[k + 1]) / math.log(hs[k] / hs[k + 1])
        orders[k] = np.where(good, o, np.nan)
    return res, orders


def check_analyticity(params: ReducedParams, stats=QUANTUM, x_grid=None, y_grid=None,
                      h_sequence=(1e-2, 1e-3), table: SpectralTable | None = None,
                      order_range=(1.5, 2.5)) -> AnalyticityRecord:
    """Criterion (i) from Cauchy-Riemann residuals of tabulated mu.

    Passes when every step pair above the rounding floor shows an observed
    order within ``order_range`` and no point carries a quadrature error
    larger than its residual floor allows. If no pair clears the floor, a
    ten times larger step is prepended while ``Im z >= 2 h`` still holds.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    xs = tuple(np.linspace(-3.0, 3.0, 7) if x_grid is None else np.asarray(x_grid, float))
    ys = tuple(np.linspace(0.5, 3.0, 6) if y_grid is None else np.asarray(y_grid, float))
    hs = tuple(float(h) for h in h_sequence)
    if min(ys) < 2 * max(hs):
        raise DomainError("grid points need Im z >= 2 max(h)")
    z = (np.array(xs)[None, :] + 1j * np.array(ys)[:, None]).ravel()
    given = table
    while True:
        if given is None:
            span = max(abs(x) for x in xs) + 2 * max(hs) + 10.0
            table = SpectralTable.build(params, stats, span=span,
                                        resolution=0.25 * (min(ys) - max(hs)), tol=1e-11)
        values, errs = table.mu(z)
        res, orders = analyticity_orders(lambda q: table.mu(q)[0], z, hs, np.abs(values))
        counted = orders[np.isfinite(orders)]
        # Smooth mu can sit at the rounding floor for every step; widen the
        # steps until the residual decay is measurable.
        if counted.size or given is not None or 20 * hs[0] > min(ys):
            break
        hs = (10 * hs[0],) + hs
    flagged = [complex(p) for p, v, e in zip(z, values, errs) if not np.isfinite(v)]
    passed = (counted.size > 0 and bool(np.all((counted >= order_range[0])
                                                & (counted <= order_range[1])))
              and not flagged)
    observed = float(np.median(counted)) if counted.size else float("nan")
    n_floor = int(np.sum(np.all(~np.isfinite(orders), axis=0)))
    return AnalyticityRecord(passed, float(res.max()), observed, orders, res, xs, ys, hs,
                             n_floor, flagged)


# ----------------------------------------------------------- zero count

def characteristic(params: ReducedParams, mu):
    """F(z) = z^2 - w0^2 + i z mu(z) for a callable mu."""
    w0 = params.omega0_over_omegaI
    return lambda z: z * z - w0 * w0 + 1j * z * mu(z)


def _rectangle(X, y0, Y, n):
    """Counter-clockwise boundary parameter points, n per side."""
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    bottom = -X + 2 * X * t + 1j * y0
    right = X + 1j * (y0 + (Y - y0) * t)
    top = X - 2 * X * t + 1j * Y
    left = -X + 1j * (Y - (Y - y0) * t)
    return np.concatenate([bottom, right, top, left])


def winding_number(F, X, y0, Y, n_contour_points=4000, max_points=2_000_000,
                   max_step=0.25 * math.pi):
    """Winding number of F around the rectangle [-X, X] x [y0, Y].

    Segments whose phase increment exceeds ``max_step`` are bisected until
    every increment is below it.

    Returns
    -------
    count : int
    info : dict
        ``min_abs`` (smallest |F| seen), ``n_points`` and ``raw`` (phase / 2 pi).

    Raises
    ------
    ContourResolutionError
        If the sampling budget is exhausted or the winding is not integral.
    """
    pts = _rectangle(X, y0, Y, max(4, n_contour_points // 4))
    vals = F(pts)
    while True:
        nxt = np.roll(pts, -1)
        nv = np.roll(vals, -1)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.angle(nv / vals)
        bad = np.abs(step) > max_step
        if not bad.any():
            break
        if pts.size + bad.sum() > max_points:
            raise ContourResolutionError(
                f"phase increments above {max_step:.3g} remain after {pts.size} samples")
        mid = _midpoints(pts[bad], nxt[bad], X, y0, Y)
        mv = F(mid)
        idx = np.flatnonzero(bad) + 1
        pts = np.insert(pts, idx, mid)
        vals = np.insert(vals, idx, mv)
    raw = float(np.sum(step)) / (2.0 * math.pi)
    count = int(round(raw))
    if abs(raw - count) > 1e-3:
        raise ContourResolutionError(f"winding {raw!r} is not an integer")
    return count, {"min_abs": float(np.min(np.abs(vals))), "n_points": int(pts.size),
                   "raw": raw}


def _midpoints(a, b, X, y0, Y):
    """Midpoints along the rectangle boundary (corners handled by the path)."""
    m = 0.5 * (a + b)
    # a segment spanning a corner: place the midpoint on the boundary path
    corner = (np.abs(a.real - b.real) > 0) & (np.abs(a.imag - b.imag) > 0)
    if corner.any():
        ca = a[corner]
        cb = b[corner]
        cx = np.where(np.isclose(np.abs(ca.real), X), ca.real, cb.real)
        cy = np.where(np.isclose(ca.imag, y0) | np.isclose(ca.imag, Y), ca.imag, cb.imag)
        m[corner] = cx + 1j * cy
    return m


def count_uhp_zeros(params: ReducedParams, stats=QUANTUM, X=20.0, y0=1e-2, Y=20.0,
                    n_contour_points=4000, table: SpectralTable | None = None, F=None):
    """Zeros of F(z) = z^2 - w0^2 + i z mu(z) inside [-X, X] x [y0, Y].

    The winding number is exact when the sampled |F| exceeds the error of
    F on the contour everywhere, which is checked from the tabulation error.
    If |F| < 1e-6 anywhere, the rectangle is scaled by 5% and retried once.

    Returns
    -------
    count : int
    info : dict

    Raises
    ------
    ContourDegenerateError
        If F stays near zero on the contour after the retry.
    ContourResolutionError
        If the phase cannot be resolved or the error certificate fails.
    """
    if not (X > 0 and 0 < y0 < Y):
        raise DomainError("need X > 0 and 0 < y0 < Y")
    err_of = None
    if F is None:
        stats = FieldStatistics.parse(stats)
        stats.validate(params.beta_omegaI)
        if table is None:
            table = SpectralTable.build(params, stats, span=1.05 * 1.05 * X + 1.0,
                                        resolution=0.5 * y0 / 1.05, tol=1e-10)
        F = characteristic(params, lambda z: table.mu(z)[0])

        def err_of(z):
            return np.abs(z) * table.mu(z)[1]

    for attempt, scale in enumerate((1.0, 1.05, 1.0 / 1.05)):
        Xs, y0s, Ys = X * scale, y0 / scale if scale > 1 else y0 * scale, Y * scale
        count, info = winding_number(F, Xs, y0s, Ys, n_contour_points)
        if info["min_abs"] >= 1e-6:
            break
        if attempt == 2:
            raise ContourDegenerateError(
                f"|F| = {info['min_abs']:.3g} on the contour after rescaling")
    info["rectangle"] = [Xs, y0s, Ys]
    if err_of is not None:
        pts = _rectangle(Xs, y0s, Ys, max(4, n_contour_points // 4))
        margin = np.min(np.abs(F(pts)) - err_of(pts))
        info["certificate_margin"] = float(margin)
        if margin <= 0:
            raise ContourResolutionError("tabulation error of F exceeds |F| on the contour")
    return count, info


# ------------------------------------------------------------------ scans

def evaluate_cell(params: ReducedParams, stats=QUANTUM, omega_grid=None, tol=None,
                  analyticity=True, zeros=False) -> FLOReport:
    """All checks for one parameter cell."""
    stats = FieldStatistics.parse(stats)
    w = np.sort(_check_grid(symmetric_log_grid() if omega_grid is None else omega_grid))
    tol = default_tolerance(params) if tol is None else float(tol)
    pos = check_positivity(params, stats, w, tol)
    sym = check_symmetry(params, stats, w, tol)
    ana = check_analyticity(params, stats) if analyticity else None
    nz = count_uhp_zeros(params, stats)[0] if zeros else None
    viol = [(params.chi, params.beta_omegaI, float(pos.omegas[k]), float(pos.re_mu[k]))
            for k in pos.failing()]
    return FLOReport(params, stats, ana, pos, sym, nz, viol, converged=not pos.flagged)


def scan(chi_grid=DEFAULT_CHI, beta_grid=DEFAULT_BETA, omega_grid=None, stats=QUANTUM,
         tol=None, gamma_omegaI=1.0, omega0_over_omegaI=1.0, analyticity=True,
         zeros=False, threads=1):
    """Reports over the (chi, beta) cross product, ordered by (chi, beta).

    Cells that fail to converge are recorded with NaN entries rather than
    stopping the scan; their violation lists stay empty and they are marked
    unconverged in ``criterion_ii.flagged``.
    """
    stats = FieldStatistics.parse(stats)
    chis = sorted(float(c) for c in chi_grid)
    betas = sorted(float(b) for b in beta_grid)
    if not chis or not betas:
        raise DomainError("scan grids must be nonempty")
    w = np.sort(_check_grid(symmetric_log_grid() if omega_grid is None else omega_grid))
    cells = []
    for c in chis:
        for b in betas:
            if stats is not QUANTUM and math.isinf(b):
                continue
            cells.append(ReducedParams.create(c, b, gamma_omegaI, omega0_over_omegaI))

    def run(p):
        try:
            return evaluate_cell(p, stats, w, tol, analyticity, zeros)
        except ConvergenceError:
            return _failed_cell(p, stats, w, tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(run, cells))
    return [run(p) for p in cells]


def _failed_cell(p, stats, w, tol):
    tol = default_tolerance(p) if tol is None else float(tol)
    nan = float("nan")
    pos = PositivityRecord(False, nan, nan, tol, w, np.full(w.shape, nan),
                           np.full(w.shape, nan), [float(x) for x in w])
    sym = SymmetryRecord(False, nan, nan, tol, [float(x) for x in w])
    return FLOReport(p, stats, None, pos, sym, None, [], converged=False)
