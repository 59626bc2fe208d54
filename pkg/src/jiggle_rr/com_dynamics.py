"""Centre-of-mass fluctuation and response functions of the free dipole."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import _check_beta, coth_half


@dataclass(frozen=True)
class COMState:
    """Thermal harmonic initial state of the centre of mass.

    Attributes
    ----------
    chi : float
        omega_I / omega_M.
    beta_omegaI : float
        Inverse temperature in units of 1/omega_I, or ``INFINITE``.
    """

    chi: float
    beta_omegaI: float

    def __post_init__(self):
        chi = float(self.chi)
        if not (math.isfinite(chi) and chi > 0.0):
            raise DomainError(f"chi must be positive and finite, got {chi!r}")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "beta_omegaI", _check_beta(self.beta_omegaI))

    @classmethod
    def from_params(cls, params) -> "COMState":
        return cls(params.chi, params.beta_omegaI)

    @property
    def bracket(self) -> float:
        """2 n(beta omega_I) + 1."""
        return coth_half(self.beta_omegaI)


def delta_sq(tau, s: COMState):
    """Position-variance growth (2n + 1) tau^2 chi / 2 for tau >= 0."""
    t = np.asarray(tau, dtype=float)
    if np.any(~(t >= 0.0)):
        raise DomainError("delta_sq requires tau >= 0")
    out = s.bracket * t * t * s.chi / 2.0
    return float(out) if out.ndim == 0 else out


def green_g(tau, s: COMState):
    """Commutator function theta(tau) tau chi, zero for tau <= 0."""
    t = np.asarray(tau, dtype=float)
    out = np.where(t > 0.0, t * s.chi, 0.0)
    return float(out) if out.ndim == 0 else out
