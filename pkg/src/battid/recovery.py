"""Back-transformation from normalized estimates to circuit values.

Chain: (a~, b~) at a known cutoff -> transfer-function coefficients
(a1, a2, b0, b1, b2) -> series resistance, two RC branches, and time
constants.  The fast branch (smaller time constant) is reported first,
matching the convention that branch 1 models the fast dynamics.

The normalized coefficients divide everything by abar0:
a~_i = abar_i / abar0 and b~_j = bbar_j / abar0.  (Only that convention is
consistent with the regression layout; dividing b by bbar0 instead would
not reproduce the data equation.)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ecm import EcmParams
from .errors import (
    ComplexTimeConstants,
    NegativeCoefficientWarning,
    SingularSystem,
)


@dataclass(frozen=True)
class TfCoeffs:
    """Coefficients of (b0 s^2 + b1 s + b2) / (s^2 + a1 s + a2)."""

    a1: float
    a2: float
    b0: float
    b1: float
    b2: float


@dataclass(frozen=True)
class RecoveredParams:
    """Circuit values as recovered, with physicality flags.

    Non-physical values (negative resistance or capacitance) are reported
    as-is with ``physical=False`` rather than clipped, so poorly excited
    data stays diagnosable.
    """

    r0: float
    r1: float
    r2: float
    c1: float
    c2: float
    tau1: float
    tau2: float
    physical: bool
    notes: tuple = ()

    def to_ecm_params(self, capacity_ah: float) -> EcmParams:
        if not self.physical:
            raise ValueError(f"recovered values are non-physical: {self.notes}")
        return EcmParams(r0=self.r0, r1=self.r1, r2=self.r2,
                         c1=self.c1, c2=self.c2, capacity_ah=capacity_ah)


def physical_to_tf(params: EcmParams) -> TfCoeffs:
    """Forward map from circuit values to transfer-function coefficients.

    a1 = 1/tau1 + 1/tau2, a2 = 1/(tau1 tau2), b0 = r0,
    b1 = r0 a1 + 1/c1 + 1/c2, b2 = (r0 + r1 + r2)/(tau1 tau2).
    """
    t1, t2 = params.tau1, params.tau2
    a1 = 1.0 / t1 + 1.0 / t2
    a2 = 1.0 / (t1 * t2)
    b0 = params.r0
    b1 = params.r0 * a1 + 1.0 / params.c1 + 1.0 / params.c2
    b2 = (params.r0 + params.r1 + params.r2) / (t1 * t2)
    return TfCoeffs(a1=a1, a2=a2, b0=b0, b1=b1, b2=b2)


def tilde_to_tf(a_tilde, b_tilde, cutoff: float) -> TfCoeffs:
    """Invert the filter-basis normalization.

    Uses the linear sums of the basis transform: the three abar values sum
    to 4 c^2, differ pairwise by 2 a1 c, and pair-sum to 2 c^2 + 2 a2 (and
    analogously for bbar), which solves both linear systems in closed form.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    at1, at2 = float(a_tilde[0]), float(a_tilde[1])
    c = cutoff
    denom = 1.0 + at1 + at2
    if abs(denom) < 1e-12 * max(1.0, abs(at1), abs(at2)):
        raise SingularSystem(
            "1 + a~1 + a~2 vanishes; the normalization cannot be inverted"
        )
    abar0 = 4.0 * c * c / denom
    abar2 = at2 * abar0
    a1 = (abar2 - abar0) / (2.0 * c)
    a2 = (abar0 + abar2) / 2.0 - c * c
    if a1 <= 0 or a2 <= 0:
        warnings.warn(
            f"recovered denominator is not stable: a1={a1:.4g}, a2={a2:.4g}",
            NegativeCoefficientWarning,
            stacklevel=2,
        )
    bbar = np.asarray(b_tilde, dtype=np.float64) * abar0
    b0 = (bbar[0] + bbar[1] + bbar[2]) / (4.0 * c * c)
    b1 = (bbar[2] - bbar[0]) / (2.0 * c)
    b2 = (bbar[0] + bbar[2]) / 2.0 - b0 * c * c
    return TfCoeffs(a1=a1, a2=a2, b0=float(b0), b1=float(b1), b2=float(b2))


def time_constants(tf: TfCoeffs) -> tuple:
    """Both branch time constants, ascending; 1/tau are roots of
    x^2 - a1 x + a2."""
    disc = tf.a1 * tf.a1 - 4.0 * tf.a2
    if disc < 0:
        raise ComplexTimeConstants(
            f"a1^2 - 4 a2 = {disc:.4g} < 0: no real time constants"
        )
    root = math.sqrt(disc)
    fast_rate = (tf.a1 + root) / 2.0
    slow_rate = (tf.a1 - root) / 2.0
    if fast_rate <= 0 or slow_rate <= 0:
        raise ComplexTimeConstants(
            f"pole rates not positive: {fast_rate:.4g}, {slow_rate:.4g}"
        )
    return 1.0 / fast_rate, 1.0 / slow_rate


def tf_to_physical(tf: TfCoeffs) -> RecoveredParams:
    """Invert the forward map: r0 = b0; branch split from
    r1 + r2 = b2/a2 - r0 and r1/tau1 + r2/tau2 = b1 - r0 a1."""
    if tf.a2 <= 0:
        raise ComplexTimeConstants(f"a2 = {tf.a2:.4g} must be positive")
    tau1, tau2 = time_constants(tf)
    r0 = tf.b0
    r_sum = tf.b2 / tf.a2 - r0
    r_weighted = tf.b1 - r0 * tf.a1
    if tau1 == tau2:
        # double pole: the 2x2 split is singular; consistent data would
        # need r_weighted == r_sum / tau, else there is no exact circuit
        if not math.isclose(r_weighted, r_sum / tau1, rel_tol=1e-9):
            return RecoveredParams(r0=r0, r1=math.nan, r2=math.nan,
                                   c1=math.nan, c2=math.nan,
                                   tau1=tau1, tau2=tau2, physical=False,
                                   notes=("equal time constants with "
                                          "inconsistent numerator",))
        r1 = r2 = r_sum / 2.0
    else:
        r1 = (r_weighted - r_sum / tau2) / (1.0 / tau1 - 1.0 / tau2)
        r2 = r_sum - r1
    c1 = tau1 / r1 if r1 != 0 else math.inf
    c2 = tau2 / r2 if r2 != 0 else math.inf
    notes = []
    for name, val in (("r0", r0), ("r1", r1), ("r2", r2), ("c1", c1), ("c2", c2)):
        if not (val > 0 and math.isfinite(val)):
            notes.append(f"{name}={val:.4g} not physical")
    return RecoveredParams(r0=r0, r1=r1, r2=r2, c1=c1, c2=c2,
                           tau1=tau1, tau2=tau2,
                           physical=not notes, notes=tuple(notes))


def zoh_gain_debias(rec: RecoveredParams, ts: float) -> RecoveredParams:
    """Undo the branch-gain inflation from held-input filtering of sampled
    voltage.

    Fitting a continuous model to held-sampled signals reproduces the
    sampled system's transfer function at z = exp(s ts): pole locations
    (time constants) are preserved, but each branch residue, hence its
    resistance, is inflated by zeta(x) = (exp(x) - 1)/x with x = ts/tau.
    Dividing the branch resistances by zeta and restoring the exact DC sum
    r0 + r1 + r2 removes the systematic part.  zeta -> 1 as ts -> 0, so the
    correction is harmless for finely sampled data.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    if not rec.physical:
        return rec

    def zeta(x):
        return math.expm1(x) / x

    z1 = zeta(ts / rec.tau1)
    z2 = zeta(ts / rec.tau2)
    r1 = rec.r1 / z1
    r2 = rec.r2 / z2
    r0 = rec.r0 + (rec.r1 - r1) + (rec.r2 - r2)
    return replace(rec, r0=r0, r1=r1, r2=r2,
                   c1=rec.tau1 / r1, c2=rec.tau2 / r2)
