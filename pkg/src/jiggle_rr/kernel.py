"""Field correlation function and the non-Markovian memory kernel D(tau)."""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from .com_dynamics import COMState, delta_sq, green_g
from .errors import ConvergenceError, DomainError, ShortTimeSingularityError
from .model import QUANTUM, FieldStatistics, ReducedParams, _coth_half_unchecked
from .quadrature import _phase_breaks, adaptive_panels, semi_infinite_breaks

#: Default short-time guard in units of 1/omega_I.
TAU_MIN = 1e-3

_FOUR_PI_SQ = (2.0 * math.pi) ** 2


def gamma_fn(omega, tau, beta, stats=QUANTUM):
    """Field correlation function.

    ``theta(tau) sin(w tau) + (i/2) coth(beta w / 2) cos(w tau)`` for quantum
    statistics; the classical variant replaces the coth term by
    ``i cos(w tau) / (beta w)``.

    Parameters
    ----------
    omega : float or array_like
        Positive field frequency.
    tau : float or array_like
        Time difference; theta(0) is taken as 0.
    beta : float
        Inverse temperature (``INFINITE`` allowed for quantum statistics).
    stats : FieldStatistics

    Returns
    -------
    complex or ndarray
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(beta)
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("gamma_fn requires omega > 0")
    t = np.asarray(tau, dtype=float)
    re = np.where(t > 0, np.sin(w * t), 0.0)
    out = re + 1j * _im_weight(w, float(beta), stats) * np.cos(w * t)
    return complex(out) if out.ndim == 0 else out


def _im_weight(w, beta, stats):
    """Imaginary-part weight: coth(beta w/2)/2 or 1/(beta w)."""
    if stats is QUANTUM:
        return 0.5 * _coth_half_unchecked(beta * w)
    return 1.0 / (beta * w)


def kernel_integrand(omega, tau, params: ReducedParams, stats=QUANTUM):
    """Integrand of D(tau) over field frequencies, including the 1/(2 pi)^2."""
    stats = FieldStatistics.parse(stats)
    s = COMState.from_params(params)
    w = np.asarray(omega, dtype=float)
    t = np.asarray(tau, dtype=float)
    return _integrand(w, t, delta_sq(np.maximum(t, 0.0), s), green_g(t, s),
                      params.beta_omegaI, stats)


def _integrand(w, t, d2, g, beta, stats):
    phase = 0.5 * w * w * g
    re = np.where(t > 0, np.sin(w * t), 0.0)
    im = _im_weight(w, beta, stats) * np.cos(w * t)
    return (w * w * w * np.exp(-0.5 * w * w * d2)
            * (np.cos(phase) * re + 2.0 * np.sin(phase) * im) / _FOUR_PI_SQ)


def _check_tol(tol):
    if not (1e-12 < tol < 1e-2):
        raise DomainError(f"tol must lie in (1e-12, 1e-2), got {tol!r}")


def _coefficients(w, beta, stats):
    """Weights of exp(i phi_+) and exp(i phi_-) in the kernel bracket.

    The bracket equals Im[(1/2 + c) e^{i phi_+} + (1/2 - c) e^{i phi_-}] with
    ``c = coth(beta w/2)/2`` (quantum) or ``1/(beta w)`` (classical) and
    ``phi_pm = w tau +/- w^2 G / 2``; both weights extend analytically off the
    real axis away from the imaginary-axis poles.
    """
    if stats is QUANTUM:
        if math.isinf(beta):
            return 1.0, 0.0
        x = beta * w
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            n = np.where(x.real > 700.0, 0.0, 1.0 / np.expm1(np.where(x.real > 700.0, 0.0, x)))
        return 1.0 + n, -n
    c = 1.0 / (beta * w)
    return 0.5 + c, 0.5 - c


def _envelope_l1(a, b):
    """Integral of r^3 exp(-a r^2 - b r) over r > 0, a cancellation proxy."""
    if a < 0 or (a == 0 and b <= 0):
        return math.inf
    if a == 0:
        return 6.0 / b ** 4
    x = b / (2.0 * math.sqrt(a))
    if x > 8.0:
        return 6.0 / b ** 4
    i0 = 0.5 * math.sqrt(math.pi / a) * erfcx(x)
    i1 = (1.0 - b * i0) / (2.0 * a)
    i2 = (i0 - b * i1) / (2.0 * a)
    return (2.0 * i1 - b * i2) / (2.0 * a)


def _ray_angles(tau, d2, g, beta, stats):
    """Rotation angles for the two exponentials.

    Each exponential is moved onto the ray in the sector where it decays
    that minimises the L1 norm of its envelope. exp(i phi_+) decays while
    2 theta + atan(Delta^2 / G) < pi; exp(i phi_-) needs
    tan(2 theta) < Delta^2 / G.
    The quantum occupancy adds exp(-beta r cos(theta)) to the second term.
    """
    extra = beta if (stats is QUANTUM and not math.isinf(beta)) else 0.0

    def best(sign, top):
        grid = np.linspace(0.0, top, 33)
        costs = [_envelope_l1(0.5 * (d2 * math.cos(2 * t) + sign * g * math.sin(2 * t)),
                              tau * math.sin(t) + (extra * math.cos(t) if sign < 0 else 0.0))
                 for t in grid]
        return float(grid[int(np.argmin(costs))])

    alpha = math.atan(d2 / g) if g > 0 else 0.5 * math.pi
    plus = best(1.0, min(0.475 * (math.pi - alpha), 0.4 * math.pi))
    minus = best(-1.0, 0.475 * alpha)
    return plus, minus


def _kernel_rows(taus, params: ReducedParams, stats: FieldStatistics, tol: float,
                 method: str = "ray"):
    """Batch evaluation; every row is refined independently."""
    if method == "real":
        return _kernel_rows_real(taus, params, stats, tol)
    s = COMState.from_params(params)
    taus = np.asarray(taus, dtype=float)
    d2 = delta_sq(taus, s)
    g = green_g(taus, s)
    beta = params.beta_omegaI
    has_minus = not (stats is QUANTUM and math.isinf(beta))
    rows, lo, hi = [], [], []
    th_p = np.empty(len(taus))
    th_m = np.empty(len(taus))
    offset = np.empty(len(taus))
    for i, (t, di, gi) in enumerate(zip(taus, d2, g)):
        tp, tm = _ray_angles(t, di, gi, beta, stats)
        th_p[i], th_m[i] = tp, tm
        quantum_t = stats is QUANTUM and not math.isinf(beta)
        ap = 0.5 * (di * math.cos(2 * tp) + gi * math.sin(2 * tp))
        br = semi_infinite_breaks(1.0 / math.sqrt(ap), (t * math.cos(tp),),
                                  (abs(gi * math.cos(2 * tp) - di * math.sin(2 * tp)),),
                                  power=3.0, linear_decay=t * math.sin(tp))
        if quantum_t:
            # the occupancy ripple only matters while exp(-beta r cos) is not negligible
            reach = min(br[-1], 40.0 / (beta * math.cos(tp)))
            br = np.union1d(br, _phase_breaks(beta * math.sin(tp), 0.0, reach))
        offset[i] = br[-1]
        if has_minus:
            am = 0.5 * (di * math.cos(2 * tm) - gi * math.sin(2 * tm))
            nu = t * math.cos(tm) + (beta * math.sin(tm) if quantum_t else 0.0)
            lin = t * math.sin(tm) + (beta * math.cos(tm) if quantum_t else 0.0)
            bm = semi_infinite_breaks(1.0 / math.sqrt(am), (nu,),
                                      (abs(gi * math.cos(2 * tm) + di * math.sin(2 * tm)),),
                                      power=3.0, linear_decay=lin)
            br = np.concatenate([br, offset[i] + bm[1:]])
        rows.append(np.full(len(br) - 1, i, dtype=np.intp))
        lo.append(br[:-1])
        hi.append(br[1:])

    def f(r, x):
        r = np.broadcast_to(r, x.shape)
        minus = x > offset[r]
        th = np.where(minus, th_m[r], th_p[r])
        rad = np.where(minus, x - offset[r], x)
        rot = np.exp(1j * th)
        w = rad * rot
        cp, cm = _coefficients(w, beta, stats)
        coef = np.where(minus, cm, cp)
        sign = np.where(minus, -1.0, 1.0)
        t = taus[r]
        expo = -0.5 * w * w * d2[r] + 1j * (w * t + sign * 0.5 * w * w * g[r])
        return (rot * coef * w * w * w * np.exp(expo)).imag / _FOUR_PI_SQ

    res = adaptive_panels(f, np.concatenate(rows), np.concatenate(lo), np.concatenate(hi),
                          len(taus), rtol=tol, max_panels=400000)
    return res.value, res.err, res.converged


def _kernel_rows_real(taus, params: ReducedParams, stats: FieldStatistics, tol: float):
    """Quadrature along the real frequency axis (reference path)."""
    s = COMState.from_params(params)
    taus = np.asarray(taus, dtype=float)
    d2 = delta_sq(taus, s)
    g = green_g(taus, s)
    env = np.sqrt(2.0 / d2)
    rows, lo, hi = [], [], []
    for i, (t, e, gi) in enumerate(zip(taus, env, g)):
        br = semi_infinite_breaks(e, (t,), (gi,), power=3.0)
        rows.append(np.full(len(br) - 1, i, dtype=np.intp))
        lo.append(br[:-1])
        hi.append(br[1:])
    beta = params.beta_omegaI

    def f(r, w):
        return _integrand(w, taus[r], d2[r], g[r], beta, stats)

    res = adaptive_panels(f, np.concatenate(rows), np.concatenate(lo), np.concatenate(hi),
                          len(taus), rtol=tol, max_panels=400000)
    return res.value, res.err, res.converged


def memory_kernel_d(tau, params: ReducedParams, stats=QUANTUM, tol=1e-10, tau_min=TAU_MIN,
                    method="ray"):
    """Memory kernel D(tau) by damped-oscillatory quadrature over frequency.

    Parameters
    ----------
    tau : float
        Time difference in units of 1/omega_I, above ``tau_min``.
    params : ReducedParams
    stats : FieldStatistics
    tol : float
        Relative tolerance in (1e-12, 1e-2).
    tau_min : float
        Short-time guard; the kernel is not integrable pointwise at tau -> 0.
    method : {"ray", "real"}
        "ray" integrates each analytic exponential along a rotated ray in
        the complex frequency plane, which removes the oscillatory
        cancellation that limits the real-axis path at small chi.

    Returns
    -------
    value, err : float
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    _check_tol(tol)
    tau = float(tau)
    if not tau > tau_min:
        raise ShortTimeSingularityError(
            f"tau = {tau!r} is not above the short-time guard tau_min = {tau_min!r}")
    v, e, ok = _kernel_rows(np.array([tau]), params, stats, tol, method)
    if not ok[0]:
        raise ConvergenceError(f"memory kernel did not converge at tau = {tau!r}",
                               partial=(float(v[0]), float(e[0])))
    return float(v[0]), float(e[0])


@dataclass
class KernelTable:
    """Memory kernel sampled on a time grid.

    Attributes
    ----------
    taus, values, err_estimates : ndarray
    stats : FieldStatistics
    params : ReducedParams
    converged : ndarray of bool
        False marks rows holding only a partial value.
    """

    taus: np.ndarray
    values: np.ndarray
    err_estimates: np.ndarray
    stats: FieldStatistics
    params: ReducedParams
    converged: np.ndarray = field(default=None)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.err_estimates = np.asarray(self.err_estimates, dtype=float)
        if self.converged is None:
            self.converged = np.ones(self.taus.shape, dtype=bool)
        if not (self.taus.shape == self.values.shape == self.err_estimates.shape):
            raise DomainError("KernelTable arrays must have equal length")
        if np.any(np.diff(self.taus) <= 0):
            raise DomainError("KernelTable taus must be strictly increasing")

    def to_csv(self) -> str:
        """CSV text with header ``tau,D,err``; unconverged rows carry err = nan."""
        buf = io.StringIO(newline="")
        buf.write("tau,D,err\n")
        for t, v, e, ok in zip(self.taus, self.values, self.err_estimates, self.converged):
            err = f"{e:.17g}" if ok else "nan"
            buf.write(f"{t:.17g},{v:.17g},{err}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _validate_grid(taus, tau_min):
    taus = np.asarray(taus, dtype=float).ravel()
    if taus.size == 0:
        raise DomainError("empty tau grid")
    if np.any(np.diff(taus) <= 0):
        raise DomainError("tau grid must be strictly increasing")
    if not taus[0] > tau_min:
        raise ShortTimeSingularityError(
            f"tau grid starts at {taus[0]!r}, not above tau_min = {tau_min!r}")
    return taus


def kernel_table(tau_grid, params: ReducedParams, stats=QUANTUM, tol=1e-10,
                 tau_min=TAU_MIN, threads=1, chunk=16) -> KernelTable:
    """Evaluate D(tau) on a grid with a shared tolerance.

    Rows are computed independently, so chunking and thread count never
    change the output bits.

    Raises
    ------
    ConvergenceError
        Names the first offending tau; ``partial`` holds the full table with
        its ``converged`` mask.
    """
    stats = FieldStatistics.parse(stats)
    stats.validate(params.beta_omegaI)
    _check_tol(tol)
    taus = _validate_grid(tau_grid, tau_min)
    chunks = [taus[i:i + chunk] for i in range(0, len(taus), chunk)]

    def run(c):
        return _kernel_rows(c, params, stats, tol)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    values = np.concatenate([p[0] for p in parts])
    errs = np.concatenate([p[1] for p in parts])
    ok = np.concatenate([p[2] for p in parts])
    table = KernelTable(taus, values, errs, stats, params, ok)
    if not ok.all():
        bad = taus[~ok][0]
        raise ConvergenceError(f"memory kernel did not converge at tau = {bad!r}", partial=table)
    return table


def markov_limit_probe(tau, params_sequence, stats=QUANTUM, tol=1e-10, tau_min=TAU_MIN):
    """D(tau) along a sequence of parameter sets with strictly decreasing chi.

    Parameters
    ----------
    tau : float
    params_sequence : sequence of ReducedParams
    stats : FieldStatistics
    tol : float

    Returns
    -------
    values : ndarray
    """
    seq = list(params_sequence)
    chis = np.array([p.chi for p in seq])
    if len(seq) == 0 or np.any(np.diff(chis) >= 0):
        raise DomainError("params_sequence must have strictly decreasing chi")
    return np.array([memory_kernel_d(tau, p, stats, tol, tau_min)[0] for p in seq])
