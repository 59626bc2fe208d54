"""Parameter sets, unit conventions and thermal helpers.

Natural units (hbar = c = k_B = 1) are used throughout and every reduced
quantity is expressed in units of the initial trap frequency omega_I.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidCombinationError

#: Zero temperature marker for inverse temperatures.
INFINITE = math.inf


class FieldStatistics(enum.Enum):
    """Field fluctuation weighting: coth(x/2) for QUANTUM, 2/x for CLASSICAL."""

    QUANTUM = "quantum"
    CLASSICAL = "classical"

    @classmethod
    def parse(cls, value) -> "FieldStatistics":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown field statistics {value!r}") from None

    def validate(self, beta_omegaI: float) -> None:
        """Reject the classical weighting at zero temperature."""
        if self is FieldStatistics.CLASSICAL and math.isinf(beta_omegaI):
            raise InvalidCombinationError(
                "classical field statistics are undefined at zero temperature")


QUANTUM = FieldStatistics.QUANTUM
CLASSICAL = FieldStatistics.CLASSICAL


def _check_beta(beta) -> float:
    beta = float(beta)
    if math.isnan(beta) or beta <= 0.0:
        raise DomainError(f"inverse temperature must be positive, got {beta!r}")
    return beta


def bose_occupancy(x):
    """Bose-Einstein occupancy 1/(e^x - 1).

    Parameters
    ----------
    x : float or array_like
        Positive argument; ``INFINITE`` gives zero occupancy.

    Returns
    -------
    float or ndarray
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("bose_occupancy requires x > 0")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(arr)
    return float(out) if out.ndim == 0 else out


def coth_half(x):
    """coth(x/2) = 1 + 2 n(x), equal to 1 at ``INFINITE``."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("coth_half requires x > 0")
    with np.errstate(over="ignore"):
        out = 1.0 + 2.0 / np.expm1(arr)
    return float(out) if out.ndim == 0 else out


def _coth_half_unchecked(x):
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 + 2.0 / np.expm1(x)


def _bose_unchecked(x):
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 / np.expm1(x)


def mu0_value(chi: float, beta_omegaI: float, gamma_omegaI: float) -> float:
    """Spectral scale gamma omega_I / (4 sqrt(pi^3 chi coth(beta omega_I / 2)))."""
    return gamma_omegaI / (4.0 * math.sqrt(math.pi ** 3 * chi * coth_half(beta_omegaI)))


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional inputs.

    Attributes
    ----------
    gamma : float
        Radiation-reaction time 2q^2/(3m).
    omega0 : float
        Dipole oscillator frequency.
    omegaI : float
        Trap frequency of the initial thermal centre-of-mass state.
    omegaM : float
        Compton frequency (the dipole mass).
    beta : float
        Inverse temperature, or ``INFINITE``.
    """

    gamma: float
    omega0: float
    omegaI: float
    omegaM: float
    beta: float = INFINITE

    def __post_init__(self):
        for name in ("gamma", "omega0", "omegaI", "omegaM"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "beta", _check_beta(self.beta))


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless parameter groups in units of omega_I.

    Build with :meth:`create` (or :func:`reduce`) so that ``mu0`` is
    consistent with the other fields.
    """

    chi: float
    beta_omegaI: float
    gamma_omegaI: float
    omega0_over_omegaI: float
    mu0: float

    def __post_init__(self):
        chi = float(self.chi)
        if not (math.isfinite(chi) and chi > 0.0):
            raise DomainError(f"chi must be positive and finite, got {chi!r}")
        beta = _check_beta(self.beta_omegaI)
        for name in ("gamma_omegaI", "omega0_over_omegaI", "mu0"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "beta_omegaI", beta)

    @classmethod
    def create(cls, chi, beta_omegaI=INFINITE, gamma_omegaI=1.0,
               omega0_over_omegaI=1.0) -> "ReducedParams":
        """Reduced parameters with ``mu0`` computed from the other groups."""
        chi = float(chi)
        beta = _check_beta(beta_omegaI)
        if not (math.isfinite(chi) and chi > 0.0):
            raise DomainError(f"chi must be positive and finite, got {chi!r}")
        return cls(chi, beta, float(gamma_omegaI), float(omega0_over_omegaI),
                   mu0_value(chi, beta, float(gamma_omegaI)))

    def replace(self, **changes) -> "ReducedParams":
        """Copy with some groups changed; ``mu0`` is recomputed."""
        fields = dict(chi=self.chi, beta_omegaI=self.beta_omegaI,
                      gamma_omegaI=self.gamma_omegaI,
                      omega0_over_omegaI=self.omega0_over_omegaI)
        fields.update(changes)
        return ReducedParams.create(**fields)

    @property
    def coth(self) -> float:
        return coth_half(self.beta_omegaI)

    @property
    def occupancy(self) -> float:
        return bose_occupancy(self.beta_omegaI)

    def as_dict(self) -> dict:
        return {
            "chi": self.chi,
            "beta_omegaI": format_beta(self.beta_omegaI),
            "gamma_omegaI": self.gamma_omegaI,
            "omega0_over_omegaI": self.omega0_over_omegaI,
            "mu0": self.mu0,
        }


def format_beta(beta: float):
    """JSON-friendly inverse temperature: a float or the string ``"inf"``."""
    return "inf" if math.isinf(beta) else float(beta)


def reduce(p: PhysicalParams) -> ReducedParams:
    """Collapse physical inputs to dimensionless groups in units of omega_I."""
    return ReducedParams.create(
        chi=p.omegaI / p.omegaM,
        beta_omegaI=p.beta * p.omegaI,
        gamma_omegaI=p.gamma * p.omegaI,
        omega0_over_omegaI=p.omega0 / p.omegaI,
    )
