"""Laguerre filter bank: continuous definition, coefficient transform,
exact discretization, and signal filtering.

The bank holds three filters sharing one real pole at -cutoff: a first-order
lag followed by two all-pass sections.  Realizing them as a single 3-state
cascade keeps the outputs exactly consistent with each other and halves the
state count relative to three independent filters.

Filtering treats every input as held constant over each sampling interval,
for which the discretized cascade is exact.  Signals that are not truly
piecewise constant (sampled voltage, spline basis values) inherit a small
hold error; see ``recovery.zoh_gain_debias`` for the systematic part of its
effect on recovered parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .errors import DegenerateBank, EmptyInput, PoleEvaluation


def tf_eval(k: int, cutoff: float, s):
    """Gain of filter k at complex frequency s: (2c/(s+c)) * ((s-c)/(s+c))^k."""
    s = complex(s)
    if s == -cutoff:
        raise PoleEvaluation(f"s == -cutoff ({-cutoff}) is the filter pole")
    return (2.0 * cutoff / (s + cutoff)) * ((s - cutoff) / (s + cutoff)) ** k


@dataclass(frozen=True)
class LagCoeffs:
    """Transfer-function coefficients re-expressed in the filter basis."""

    abar: np.ndarray  # (abar0, abar1, abar2)
    bbar: np.ndarray  # (bbar0, bbar1, bbar2)


def coeff_transform(a1: float, a2: float, b0: float, b1: float, b2: float,
                    cutoff: float) -> LagCoeffs:
    """Map (a1, a2, b0, b1, b2) of (b0 s^2 + b1 s + b2)/(s^2 + a1 s + a2)
    into the filter-basis coefficients.

    abar0 = c^2 - a1 c + a2      bbar0 = b0 c^2 - b1 c + b2
    abar1 = 2 c^2 - 2 a2         bbar1 = 2 b0 c^2 - 2 b2
    abar2 = c^2 + a1 c + a2      bbar2 = b0 c^2 + b1 c + b2
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    c = cutoff
    abar = np.array([c * c - a1 * c + a2, 2 * c * c - 2 * a2, c * c + a1 * c + a2])
    bbar = np.array([b0 * c * c - b1 * c + b2, 2 * b0 * c * c - 2 * b2,
                     b0 * c * c + b1 * c + b2])
    scale = c * c + abs(a1) * c + abs(a2)
    if abs(abar[0]) <= 1e-14 * scale:
        raise DegenerateBank(
            f"abar0 vanishes at cutoff {c}; choose a different cutoff"
        )
    return LagCoeffs(abar=abar, bbar=bbar)


@dataclass(frozen=True)
class LaguerreBank:
    """Discretized 3-state cascade at a fixed cutoff and sampling interval.

    ad, bd are the held-input discretization of the continuous cascade;
    cmat reads out the three filter outputs from the shared state.  The
    discrete pole is exp(-cutoff * ts) (triple), strictly inside the unit
    circle for any positive cutoff.
    """

    cutoff: float
    ts: float
    ad: np.ndarray
    bd: np.ndarray
    cmat: np.ndarray
    order: int = 2

    @property
    def pole(self) -> float:
        return float(np.exp(-self.cutoff * self.ts))


def discretize(cutoff: float, ts: float) -> LaguerreBank:
    """Build the bank's exact held-input discretization.

    Continuous cascade (state x, input u):
        x' = [[-c, 0, 0], [2c, -c, 0], [2c, -2c, -c]] x + [1, 0, 0]' u
        y  = [[2c, 0, 0], [2c, -2c, 0], [2c, -2c, -2c]] x
    giving outputs (L0 u, L1 u, L2 u).
    """
    if cutoff <= 0 or ts <= 0:
        raise ValueError("cutoff and ts must be positive")
    if cutoff * ts >= 10:
        raise ValueError("cutoff * ts must stay below 10")
    c = cutoff
    a_c = np.array([[-c, 0.0, 0.0], [2 * c, -c, 0.0], [2 * c, -2 * c, -c]])
    cmat = np.array([[2 * c, 0.0, 0.0], [2 * c, -2 * c, 0.0],
                     [2 * c, -2 * c, -2 * c]])
    aug = np.zeros((4, 4))
    aug[:3, :3] = a_c
    aug[0, 3] = 1.0
    md = expm(aug * ts)
    return LaguerreBank(cutoff=cutoff, ts=ts, ad=np.ascontiguousarray(md[:3, :3]),
                        bd=np.ascontiguousarray(md[:3, 3]),
                        cmat=np.ascontiguousarray(cmat))


def filter_signal(bank: LaguerreBank, x) -> np.ndarray:
    """Filter x through the bank from zero initial state.

    Returns an (n, 3) array with columns (L0 x, L1 x, L2 x) at the sample
    instants; exact when x is held constant over each interval.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("cannot filter an empty signal")
    return _kernels.cascade_filter(bank.ad, bank.bd, bank.cmat, x)
