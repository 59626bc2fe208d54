"""Amended Abraham-Lorentz dynamics of a jiggling dipole.

Memory kernel and spectral distribution of the radiation-reaction force
including centre-of-mass fluctuations, positive-real-function checks for
quantum and classical field statistics, and classical versus amended
dipole dynamics.
"""
from .errors import (BandwidthError, ContourDegenerateError, ContourResolutionError,
                     ConvergenceError, DomainError, GridError, InvalidCombinationError,
                     JiggleError, NearResonanceError, RunawayOverflowError,
                     ShortTimeSingularityError)
from .model import (CLASSICAL, INFINITE, QUANTUM, FieldStatistics, PhysicalParams,
                    ReducedParams, bose_occupancy, coth_half, reduce)

__version__ = "0.1.0"
