"""Abraham-Lorentz runaways versus the amended non-Markovian dynamics.

Frequencies and times are in units of omega_I unless a function takes
``gamma`` and ``omega0`` directly, in which case any consistent unit works.
The convention is ``r(t) ~ exp(-i z t)``, so modes with Im z > 0 grow.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BandwidthError, DomainError, GridError, NearResonanceError,
                     RunawayOverflowError)
from .kernel import TAU_MIN, kernel_table
from .model import QUANTUM, FieldStatistics, ReducedParams
from .spectrum import SpectralTable, sigma_asymptote

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_TAIL_X, _TAIL_W = np.polynomial.legendre.leggauss(32)
_TAIL_X = 0.5 * (_TAIL_X + 1.0)
_TAIL_W = 0.5 * _TAIL_W


class Model(enum.Enum):
    CLASSICAL_AL = "classical-al"
    AMENDED_SPECTRAL = "amended"
    AMENDED_VOLTERRA = "volterra"


@dataclass
class Trajectory:
    """Sampled dipole coordinate r(t).

    Attributes
    ----------
    ts, rs : ndarray
    model : Model
    params : dict
        Snapshot of the parameters used.
    metadata : dict
        Run details (choices made, diagnostics).
    """

    ts: np.ndarray
    rs: np.ndarray
    model: Model
    params: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.rs = np.asarray(self.rs, dtype=float)
        if self.ts.shape != self.rs.shape or self.ts.ndim != 1:
            raise DomainError("ts and rs must be 1-d arrays of equal length")
        if np.any(np.diff(self.ts) <= 0):
            raise DomainError("ts must be strictly increasing")

    def peaks(self):
        """Values of the local maxima of |r|."""
        a = np.abs(self.rs)
        i = np.flatnonzero((a[1:-1] >= a[:-2]) & (a[1:-1] > a[2:])) + 1
        return a[i]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(f"# model={self.model.value}\n")
        for k, v in self.params.items():
            buf.write(f"# {k}={_fmt(v)}\n")
        for k in sorted(self.metadata):
            v = self.metadata[k]
            if isinstance(v, (bool, int, float, str)):
                buf.write(f"# {k}={_fmt(v)}\n")
        buf.write("t,r\n")
        for t, r in zip(self.ts, self.rs):
            buf.write(f"{t:.17g},{r:.17g}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _fmt(v):
    if isinstance(v, bool) or isinstance(v, str):
        return str(v).lower() if isinstance(v, bool) else v
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.17g}"
    return str(v)


# ------------------------------------------------------ Abraham-Lorentz

@dataclass(frozen=True)
class CharRoots:
    """Roots of ``i gamma z^3 + z^2 - omega0^2``; the runaway root comes first."""

    roots: tuple
    gamma: float
    omega0: float

    @property
    def runaway(self) -> complex:
        return self.roots[0]

    def residuals(self) -> np.ndarray:
        z = np.array(self.roots)
        return np.abs(z * z - self.omega0 ** 2 + 1j * self.gamma * z ** 3)

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "omega0": self.omega0,
            "roots": [{"re": float(z.real), "im": float(z.imag), "residual": float(r)}
                      for z, r in zip(self.roots, self.residuals())],
        }


def al_char_roots(gamma: float, omega0: float) -> CharRoots:
    """Characteristic roots of the Abraham-Lorentz equation.

    With ``z = i w`` the polynomial becomes the real cubic
    ``gamma w^3 - w^2 - omega0^2``, which has exactly one real root (w > 0).
    That root gives the purely imaginary runaway frequency; the other two
    form a pair ``z, -conj(z)`` in the lower half plane.
    """
    gamma, omega0 = float(gamma), float(omega0)
    if not (gamma > 0 and omega0 > 0 and math.isfinite(gamma) and math.isfinite(omega0)):
        raise DomainError("gamma and omega0 must be positive and finite")
    coef = np.array([gamma, -1.0, 0.0, -omega0 * omega0])
    w = np.roots(coef).astype(complex)
    for _ in range(3):
        p = np.polyval(coef, w)
        dp = np.polyval(np.polyder(coef), w)
        w = w - np.where(dp != 0, p / dp, 0)
    k = int(np.argmin(np.abs(w.imag)))
    w_run = float(w[k].real)
    rest = np.delete(w, k)
    # the pair is conjugate in w, hence mirrored about the imaginary z axis
    pair = sorted((1j * x for x in rest), key=lambda z: -z.real)
    z1 = complex(abs(pair[0].real), pair[0].imag)
    roots = (complex(0.0, w_run), z1, complex(-z1.real, z1.imag))
    return CharRoots(roots, gamma, omega0)


def al_trajectory(gamma, omega0, r0, v0, T, dt, suppress_runaway=False) -> Trajectory:
    """Exact mode solution of the Abraham-Lorentz equation.

    The three mode amplitudes match r(0) = r0 and r'(0) = v0. The third
    condition is r''(0) = 0 when ``suppress_runaway`` is false, or a zero
    runaway amplitude when it is true.

    Raises
    ------
    RunawayOverflowError
        If the runaway mode would overflow double precision before T.
    """
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    cr = al_char_roots(gamma, omega0)
    z = np.array(cr.roots)
    lam = -1j * z
    if suppress_runaway:
        A = np.array([[1, 1], lam[1:]])
        c = np.r_[0.0, np.linalg.solve(A, np.array([r0, v0], dtype=complex))]
    else:
        A = np.array([np.ones(3), lam, lam * lam])
        c = np.linalg.solve(A, np.array([r0, v0, 0.0], dtype=complex))
        rate = z[0].imag
        if c[0] != 0 and rate * T + math.log(abs(c[0])) > 700.0:
            raise RunawayOverflowError(
                f"runaway mode grows as exp(t/{1 / rate:.6g}) and overflows before T = {T!r}",
                timescale=1.0 / rate)
    n = int(math.floor(T / dt + 1e-9)) + 1
    ts = np.arange(n) * dt
    live = c != 0
    rs = (np.exp(np.outer(ts, lam[live])) @ c[live]).real
    meta = {"suppress_runaway": bool(suppress_runaway),
            "third_condition": "runaway amplitude = 0" if suppress_runaway else "a(0) = 0",
            "runaway_rate": float(z[0].imag)}
    return Trajectory(ts, rs, Model.CLASSICAL_AL,
                      {"gamma": float(gamma), "omega0": float(omega0),
                       "r0": float(r0), "v0": float(v0)}, meta)


# ------------------------------------------------------ amended dynamics

def _params_snapshot(params: ReducedParams, stats, **extra) -> dict:
    d = {k: v for k, v in params.as_dict().items()}
    d["stats"] = FieldStatistics.parse(stats).value
    d.update(extra)
    return d


def amended_response(omega_grid, params: ReducedParams, stats=QUANTUM, mu=None,
                     table: SpectralTable | None = None):
    """Response ``1 / (w0^2 - w^2 - i w mu(w + i0))`` on a real grid.

    Parameters
    ----------
    omega_grid : array_like
        Nonzero frequencies.
    mu : callable, optional
        Replacement for the boundary values of mu (vectorized, real input).

    Raises
    ------
    NearResonanceError
        If the denominator modulus falls below 1e-12.
    """
    w = np.asarray(omega_grid, dtype=float)
    if w.size == 0 or np.any(w == 0) or np.any(~np.isfinite(w)):
        raise DomainError("omega grid must be nonempty, finite and exclude 0")
    if mu is None:
        stats = FieldStatistics.parse(stats)
        stats.validate(params.beta_omegaI)
        if table is None:
            table = SpectralTable.build(params, stats, span=1.25 * np.max(np.abs(w)) + 1.0,
                                        resolution=0.25, tol=1e-10)
        m = table.boundary(w)[0]
    else:
        m = np.asarray(mu(w), dtype=complex) * np.ones_like(w)
    w0 = params.omega0_over_omegaI
    den = w0 * w0 - w * w - 1j * w * m
    small = np.abs(den) < 1e-12
    if small.any():
        raise NearResonanceError(f"response denominator vanishes at omega = {w[small][0]!r}")
    return 1.0 / den


def _damped_solution(ts, w0, s, r0, v0):
    """Solution of r'' + s r' + w0^2 r = 0."""
    disc = complex(0.25 * s * s - w0 * w0) ** 0.5
    lp, lm = -0.5 * s + disc, -0.5 * s - disc
    if abs(disc) < 1e-8 * w0:
        lam = -0.5 * s
        return (r0 + (v0 - lam * r0) * ts) * np.exp(lam * ts)
    a = (v0 - lm * r0) / (lp - lm)
    b = r0 - a
    return (a * np.exp(lp * ts) + b * np.exp(lm * ts)).real


def amended_trajectory(r0, v0, T, n_samples, params: ReducedParams, stats=QUANTUM,
                       mu=None, threads=1) -> Trajectory:
    """Trajectory of the amended equation by spectral synthesis.

    The Laplace transform of the solution is ``(i z r0 - v0 - s r0) / F(z)``
    with ``F = z^2 - w0^2 + i z mu(z)`` and s the local friction ``sigma_inf``.
    The damped-oscillator part with ``mu -> s`` is subtracted and added back
    in closed form; the remainder decays like z^(-5/2) and is inverted by
    FFT on the line Im z = 12/T with period 2T, which keeps wrap-around
    below exp(-24).

    Parameters
    ----------
    r0, v0 : float
        Initial position and velocity.
    T : float
        Final time (units of 1/omega_I); samples are equally spaced on [0, T].
    n_samples : int
        Power of two.
    mu : callable, optional
        Replacement for mu(z) in the upper half plane; the local friction is
        then taken as zero.

    Raises
    ------
    NearResonanceError
        If |F| < 1e-12 on the integration line.
    BandwidthError
        If the top frequency decade holds more than 1e-6 of the spectral
        energy of the remainder.
    """
    n = int(n_samples)
    if n < 4 or n & (n - 1):
        raise DomainError("n_samples must be a power of two (>= 4)")
    if not T > 0:
        raise DomainError("T must be positive")
    w0 = params.omega0_over_omegaI
    if mu is None:
        stats = FieldStatistics.parse(stats)
        stats.validate(params.beta_omegaI)
        s = sigma_asymptote(params, stats)
    else:
        s = 0.0
    dt = T / (n - 1)
    N = 2 * n
    P = N * dt
    eta = 12.0 / T
    x = np.arange(N // 2 + 1) * (2.0 * math.pi / P)
    z = x + 1j * eta
    if mu is None:
        table = SpectralTable.build(params, stats, span=1.05 * x[-1] + 1.0,
                                    resolution=0.5 * eta, tol=1e-10, threads=threads)
        m = table.mu(z)[0]
    else:
        m = np.asarray(mu(z), dtype=complex) * np.ones_like(z)
    F = z * z - w0 * w0 + 1j * z * m
    if np.min(np.abs(F)) < 1e-12:
        k = int(np.argmin(np.abs(F)))
        raise NearResonanceError(f"characteristic function vanishes near z = {z[k]!r}")
    Fref = z * z - w0 * w0 + 1j * z * s
    num = 1j * z * r0 - (v0 + s * r0)
    rd = num * 1j * z * (s - m) / (F * Fref)
    rd[-1] = rd[-1].real  # the Nyquist bin of a real signal is real
    energy = np.abs(rd) ** 2
    top = energy[x >= 0.1 * x[-1]].sum()
    total = energy.sum()
    frac = top / total if total > 0 else 0.0
    if frac > 1e-6:
        raise BandwidthError(
            f"top frequency decade holds {frac:.3g} of the spectral energy; "
            f"increase n_samples beyond {n}")
    ts = np.arange(n) * dt
    with np.errstate(over="ignore"):
        grow = np.exp(eta * ts)
    synth = np.fft.hfft(rd, N)[:n] / P
    full = np.concatenate([rd, np.conj(rd[-2:0:-1])])
    resid = np.fft.fft(full)[:n].imag / P
    rs = _damped_solution(ts, w0, s, r0, v0) + grow * synth
    bound = (abs(r0) + abs(v0) / w0) * 1.05
    amp = float(np.max(np.abs(rs)))
    meta = {"eta": eta, "period": P, "n_fft": N, "local_friction": s,
            "bandwidth_fraction": float(frac),
            "imag_residue": float(np.max(np.abs(grow * resid)) / max(amp, 1e-300)),
            "bounded": bool(amp <= bound), "injected_mu": mu is not None}
    return Trajectory(ts, rs, Model.AMENDED_SPECTRAL,
                      _params_snapshot(params, stats, r0=float(r0), v0=float(v0)), meta)


# ----------------------------------------------------- Volterra (diagnostic)

def _kernel_values(taus, params, stats, kernel, tau_min, tol, threads):
    taus = np.asarray(taus, dtype=float)
    if kernel is not None:
        return np.asarray(kernel(taus), dtype=float) * np.ones_like(taus)
    order = np.argsort(taus, kind="stable")
    st = taus[order]
    uniq, inv = np.unique(st, return_inverse=True)
    vals = kernel_table(uniq, params, stats, tol=tol, tau_min=tau_min, threads=threads).values
    out = np.empty_like(taus)
    out[order] = vals[inv]
    return out


def volterra_evolve(r0, v0, T, dt, params: ReducedParams, stats=QUANTUM, tau_min=TAU_MIN,
                    kernel=None, sigma_inf=None, n_moment=16, tol=1e-10,
                    threads=1) -> Trajectory:
    """DIAGNOSTIC time stepping of the amended equation with the memory kernel.

    Solves, with r(t) = 0 for t < 0,

        r'' = -w0^2 r - s r' + 2 gamma [int_0^t D(tau) (r(t - tau) - r(t)) dtau
                                        - r(t) int_t^inf D]

    where s = sigma_inf is the local friction that accompanies D. The memory
    integral uses product integration with piecewise-linear r: weights are
    exact Gauss moments of D on the first ``n_moment`` intervals (D ~ tau^-1.5
    there) and trapezoid values beyond. The contribution of (0, tau_min] is
    dropped; its size is estimated in ``metadata["omission_estimate"]``.
    Time stepping is velocity Verlet with the friction treated implicitly;
    the t^-1/2 force from the history cut at t = 0 is integrated exactly
    over the first ``n_moment`` steps.

    Parameters
    ----------
    kernel : callable, optional
        Replacement for D (vectorized). The local friction then defaults to 0.
    sigma_inf : float, optional
        Override for the local friction.

    Raises
    ------
    GridError
        If dt <= tau_min.
    """
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    if not dt > tau_min:
        raise GridError(f"dt = {dt!r} must exceed tau_min = {tau_min!r}")
    stats = FieldStatistics.parse(stats)
    if kernel is None:
        stats.validate(params.beta_omegaI)
    if sigma_inf is None:
        sigma_inf = sigma_asymptote(params, stats) if kernel is None else 0.0
    s = float(sigma_inf)
    g2 = 2.0 * params.gamma_omegaI
    w0 = params.omega0_over_omegaI
    N = int(math.floor(T / dt + 1e-9))
    K = min(int(n_moment), N)
    t = np.arange(N + 1) * dt

    # kernel on the grid (index 0 unused) and Gauss moments on early intervals
    lo = np.r_[tau_min, t[1:K]]
    hi = t[1:K + 1]
    # sqrt map on the first interval absorbs the tau^-1.5 growth
    s0 = math.sqrt(tau_min) + (math.sqrt(dt) - math.sqrt(tau_min)) * _GL_X
    nodes0 = s0 * s0
    jac0 = 2.0 * s0 * (math.sqrt(dt) - math.sqrt(tau_min)) * _GL_W
    nodes = np.vstack([nodes0] + [a + (b - a) * _GL_X for a, b in zip(lo[1:], hi[1:])])
    jac = np.vstack([jac0] + [(b - a) * _GL_W for a, b in zip(lo[1:], hi[1:])])
    # tail beyond T by tau = T_end / u^2
    t_end = max(t[-1], dt)
    u = _TAIL_X
    tail_nodes = t_end / (u * u)
    need = np.concatenate([t[1:], nodes.ravel(), tail_nodes])
    vals = _kernel_values(need, params, stats, kernel, tau_min, tol, threads)
    D = np.r_[0.0, vals[:N]]
    Dn = vals[N:N + nodes.size].reshape(nodes.shape)
    tail_end = float(np.sum(vals[N + nodes.size:] * 2.0 * t_end / u ** 3 * _TAIL_W))

    m0 = np.empty(N)
    m1 = np.empty(N)
    m0[:K] = np.sum(Dn * jac, axis=1)
    m1[:K] = np.sum(Dn * jac * (nodes - t[:K, None]) / dt, axis=1)
    m0[K:] = 0.5 * dt * (D[K:N] + D[K + 1:N + 1])
    m1[K:] = dt * (D[K:N] / 6.0 + D[K + 1:N + 1] / 3.0)
    cum = np.r_[0.0, np.cumsum(m0)]
    total = cum[-1] + tail_end
    tail = total - cum  # int_{max(t_n, tau_min)}^inf D

    W = np.zeros(N + 1)  # full hat weights
    E = np.zeros(N + 1)  # half hats at the end of the history
    W[1:N] = m1[:N - 1] + m0[1:N] - m1[1:N]
    E[1:] = m1
    if N > K:
        W[K + 1:N] = dt * D[K + 1:N]
        E[K + 1:] = 0.5 * dt * D[K + 1:]

    # exact step integrals of tail(t) for the first K steps
    I1 = np.zeros(K)
    I2 = np.zeros(K)
    for n in range(K):
        if n == 0:
            q = np.sqrt(dt) * _GL_X
            ts_, wq = q * q, 2.0 * q * np.sqrt(dt) * _GL_W
        else:
            ts_, wq = t[n] + dt * _GL_X, dt * _GL_W
        # tail(ts) = tail(t_{n+1}) + int_{max(ts, tau_min)}^{t_{n+1}} D
        a = np.maximum(ts_, tau_min)
        q2 = np.sqrt(a)[:, None] + (math.sqrt(t[n + 1]) - np.sqrt(a))[:, None] * _GL_X
        inner_nodes = q2 * q2
        inner_w = 2.0 * q2 * (math.sqrt(t[n + 1]) - np.sqrt(a))[:, None] * _GL_W
        Dq = _kernel_values(inner_nodes.ravel(), params, stats, kernel, tau_min, tol,
                            threads).reshape(inner_nodes.shape)
        tq = tail[n + 1] + np.sum(Dq * inner_w, axis=1)
        I1[n] = np.sum(tq * wq)
        I2[n] = np.sum(tq * (t[n + 1] - ts_) * wq)

    r = np.zeros(N + 1)
    v = np.zeros(N + 1)
    r[0], v[0] = r0, v0

    def memory(n):
        if n == 0:
            return 0.0
        hist = r[n - 1::-1][:n]  # r_{n-1}, ..., r_0
        acc = np.dot(W[1:n], hist[:n - 1] - r[n]) + E[n] * (r[0] - r[n])
        return g2 * acc

    def accel(n, with_tail):
        a = -w0 * w0 * r[n] + memory(n)
        if with_tail:
            a -= g2 * r[n] * tail[n]
        return a

    a_n = accel(0, K == 0)
    for n in range(N):
        early = n < K
        if early:
            r[n + 1] = r[n] + dt * v[n] + 0.5 * dt * dt * (a_n - s * v[n]) - g2 * r[n] * I2[n]
            a_next = accel(n + 1, n + 1 >= K)
            slope = (r[n + 1] - r[n]) / dt
            imp = g2 * (r[n] * I1[n] + slope * (dt * I1[n] - I2[n]))
            rhs = v[n] * (1.0 - 0.5 * dt * s) + 0.5 * dt * (a_n + a_next) - imp
            if n + 1 >= K:
                # the tail force at t_{n+1} is already part of a_next
                rhs -= 0.5 * dt * (-g2 * r[n + 1] * tail[n + 1])
        else:
            r[n + 1] = r[n] + dt * v[n] + 0.5 * dt * dt * (a_n - s * v[n])
            a_next = accel(n + 1, True)
            rhs = v[n] * (1.0 - 0.5 * dt * s) + 0.5 * dt * (a_n + a_next)
        v[n + 1] = rhs / (1.0 + 0.5 * dt * s)
        a_n = a_next

    c_short = abs(D[1]) * dt ** 1.5 if N >= 1 else 0.0
    omission = float(g2 * 2.0 * c_short * math.sqrt(tau_min) * np.max(np.abs(v)))
    meta = {"label": "DIAGNOSTIC", "dt": float(dt), "tau_min": float(tau_min),
            "local_friction": s, "omission_estimate": omission,
            "kernel_total": float(total), "injected_kernel": kernel is not None}
    return Trajectory(t, r, Model.AMENDED_VOLTERRA,
                      _params_snapshot(params, stats, r0=float(r0), v0=float(v0)), meta)
