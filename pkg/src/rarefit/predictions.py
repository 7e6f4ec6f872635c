"""Post-hoc prediction correctors layered on a converged Jeffreys fit.

Both correctors shift each penalized prediction by its leverage-weighted
distance from one half: the approximate Bayesian corrector adds the term
and doubles the event-rate bias of the base fit, the approximate unbiased
corrector subtracts it and restores the observed event rate exactly, at the
price of occasionally leaving the unit interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, _hat_diagonals, _probabilities
from .fitting import FitResult, _check_firth_base

__all__ = ["PredictionSet", "predict_ab", "predict_au"]


@dataclass(frozen=True)
class PredictionSet:
    """Per-row predicted probabilities with their method tag.

    ``clipped`` is only populated by the approximate unbiased corrector,
    flagging rows whose value left [0, 1]; values are always reported
    unclipped.
    """

    pi: np.ndarray
    method: str
    clipped: Optional[np.ndarray] = None


def _corrected(ds, fl, sign):
    _check_firth_base(ds, fl)
    pi = _probabilities(ds.X, fl.beta)
    h = _hat_diagonals(ds.X, ds.w, pi)
    return pi + sign * (0.5 - pi) * h


def predict_ab(ds: Dataset, fl: FitResult) -> PredictionSet:
    """Approximate Bayesian predictions: pi + (1/2 - pi) * h.

    The correction approximates averaging the penalized predictions over
    the asymptotic posterior of the coefficients; summed over rows it
    equals the event-rate excess of the base fit, so the average corrected
    prediction overshoots the observed rate by exactly twice that excess.
    """
    return PredictionSet(pi=_corrected(ds, fl, +1.0), method="ab")


def predict_au(ds: Dataset, fl: FitResult) -> PredictionSet:
    """Approximate unbiased predictions: pi - (1/2 - pi) * h.

    The average corrected prediction equals the observed event rate.
    Individual values can fall outside [0, 1]; they are flagged through
    ``clipped`` and never silently truncated.
    """
    pi = _corrected(ds, fl, -1.0)
    clipped = (pi < 0.0) | (pi > 1.0)
    return PredictionSet(pi=pi, method="au", clipped=clipped)
