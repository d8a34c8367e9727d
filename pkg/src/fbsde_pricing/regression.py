"""Least-squares continuation values and the exercise/call decision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .contracts import Optionality
from .errors import DegenerateDesign, InsufficientPoints


@dataclass(frozen=True)
class RegressionFit:
    """Polynomial fit ``E[Y | s] = sum_k coefficients[k] * s**k``."""

    coefficients: np.ndarray
    residual_variance: float
    num_points: int

    @property
    def order(self):
        return len(self.coefficients) - 1


def design_matrix(states, order=2):
    s = np.asarray(states, dtype=float)
    return np.vander(s, order + 1, increasing=True)


def fit_quadratic(states, values, mask=None, order=2):
    """OLS of ``values`` on ``{1, s, ..., s**order}`` over the masked paths.

    Solved through a QR factorization of the design matrix.

    Raises
    ------
    InsufficientPoints
        Fewer than ``order + 1`` included points.
    DegenerateDesign
        Fewer than ``order + 1`` distinct states.
    """
    if not 1 <= order <= 4:
        raise ValueError(f"basis order must be in 1..4, got {order}")
    s = np.asarray(states, dtype=float)
    y = np.asarray(values, dtype=float)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        s, y = s[mask], y[mask]
    p = order + 1
    if s.size < p:
        raise InsufficientPoints(f"need at least {p} points, got {s.size}")
    if np.unique(s).size < p:
        raise DegenerateDesign(f"need at least {p} distinct states")
    A = design_matrix(s, order)
    q, r = np.linalg.qr(A)
    coef = solve_triangular(r, q.T @ y)
    resid = y - A @ coef
    dof = max(s.size - p, 1)
    return RegressionFit(coef, float(resid @ resid) / dof, int(s.size))


def conditional_expectation(fit, s):
    """Evaluate the fitted polynomial at ``s`` (Horner)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for c in fit.coefficients[::-1]:
        out = out * s + c
    return out


@dataclass(frozen=True)
class ExerciseState:
    regressor: np.ndarray
    values: np.ndarray
    call_values: np.ndarray
    owner: Optionality
    mask: np.ndarray | None = None


def exercise_decision(state, fit):
    """Boolean per path: True where the path is reset to its call value.

    The holder exercises when the regressed continuation is below the call
    value; the issuer calls when it is above.
    """
    expected = conditional_expectation(fit, state.regressor)
    calls = np.asarray(state.call_values, dtype=float)
    if state.owner is Optionality.HOLDER:
        decide = expected < calls
    elif state.owner is Optionality.ISSUER:
        decide = expected > calls
    else:
        raise ValueError("contract has no optionality")
    if state.mask is not None:
        decide &= np.asarray(state.mask, dtype=bool)
    return decide


def apply_exercise(state, fit):
    """Reset decided paths to their actual call value; others keep their value."""
    decide = exercise_decision(state, fit)
    return np.where(decide, state.call_values, state.values)


def fit_for_event(regressor, values, mask, order=2):
    """Fit on the decision mask; ``None`` when too few usable paths."""
    try:
        return fit_quadratic(regressor, values, mask, order)
    except (InsufficientPoints, DegenerateDesign):
        return None
