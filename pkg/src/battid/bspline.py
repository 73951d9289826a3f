"""Cubic B-spline basis over a knot vector on SOC.

Basis values follow the two-term recursion with the 0/0 := 0 convention;
derivatives apply the degree-lowering derivative recursion d times.  The
default knot layout is clamped (first and last breakpoints repeated four
times) and uniform over the observed SOC range, so the curve interpolates
its end control points and every basis carries data support.

With ``n_break`` breakpoints the clamped vector has n_break + 6 knots and
therefore h = n_break + 2 basis functions (knot count = h + degree + 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BadOrder, OutOfSupport, TooSmall, UnsortedInput

DEGREE = 3


@dataclass(frozen=True)
class KnotVector:
    """Non-decreasing cubic knot sequence; h = len(knots) - 4 bases."""

    knots: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=np.float64)
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if self.h < 4:
            raise ValueError("need at least 4 basis functions")
        inner = knots[DEGREE:self.h + 1]
        if np.any(np.diff(inner) <= 0):
            raise ValueError("spans inside the support must have positive width")

    @property
    def h(self) -> int:
        return len(self.knots) - DEGREE - 1

    @property
    def support(self) -> tuple:
        return float(self.knots[DEGREE]), float(self.knots[self.h])

    def find_span(self, z) -> np.ndarray:
        """Index k with knots[k] <= z < knots[k+1], right end closed."""
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        span = np.searchsorted(self.knots, z, side="right") - 1
        return np.clip(span, DEGREE, self.h - 1)


def uniform_clamped(lo: float, hi: float, n_break: int) -> KnotVector:
    """Clamped knot vector with n_break uniform breakpoints on [lo, hi]."""
    if n_break < 2:
        raise ValueError("need at least two breakpoints")
    if hi <= lo:
        raise ValueError("hi must exceed lo")
    breakpoints = np.linspace(lo, hi, n_break)
    knots = np.concatenate(([lo] * DEGREE, breakpoints, [hi] * DEGREE))
    return KnotVector(knots)


def _check_support(kv: KnotVector, z: np.ndarray):
    lo, hi = kv.support
    bad = np.where((z < lo) | (z > hi))[0]
    if bad.size:
        i = int(bad[0])
        raise OutOfSupport(
            f"sample {i} (z={z[i]!r}) outside support [{lo}, {hi}]"
        )


def eval_basis(kv: KnotVector, z: float) -> np.ndarray:
    """All h basis values at z, built from the degree-0 indicators upward."""
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    _check_support(kv, zs)
    zz = float(zs[0])
    span = int(kv.find_span(zz)[0])
    return _raise_degree(kv.knots, 0, DEGREE, zz, span, _indicator(kv.knots, span))


def _indicator(knots, span):
    vals = np.zeros(len(knots) - 1)
    vals[span] = 1.0
    return vals


def _raise_degree(knots, q_from, q_to, z, span, vals):
    nk = len(knots)
    for q in range(q_from + 1, q_to + 1):
        nb = nk - q - 1
        new = np.zeros(nb)
        lo = max(span - q, 0)
        for i in range(lo, min(span + 1, nb)):
            acc = 0.0
            den_l = knots[i + q] - knots[i]
            if den_l > 0.0 and vals[i] != 0.0:
                acc += (z - knots[i]) / den_l * vals[i]
            den_r = knots[i + q + 1] - knots[i + 1]
            if den_r > 0.0 and vals[i + 1] != 0.0:
                acc += (knots[i + q + 1] - z) / den_r * vals[i + 1]
            new[i] = acc
        vals = new
    return vals


def eval_deriv(kv: KnotVector, z: float, d: int) -> np.ndarray:
    """h-vector of d-th derivative values at z, d in 1..3.

    Derivatives of degree-q bases come from degree-(q-1) values:
        g'_{i,q} = q * (g_{i,q-1}/(t[i+q]-t[i]) - g_{i+1,q-1}/(t[i+q+1]-t[i+1]))
    applied d times starting from the degree (3 - d) values.
    """
    if not 1 <= d <= DEGREE:
        raise BadOrder(f"derivative order must be in 1..{DEGREE}, got {d}")
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    _check_support(kv, zs)
    zz = float(zs[0])
    span = int(kv.find_span(zz)[0])
    knots = kv.knots
    vals = _raise_degree(knots, 0, DEGREE - d, zz, span, _indicator(knots, span))
    nk = len(knots)
    for q in range(DEGREE - d + 1, DEGREE + 1):
        nb = nk - q - 1
        new = np.zeros(nb)
        for i in range(nb):
            acc = 0.0
            den_l = knots[i + q] - knots[i]
            if den_l > 0.0:
                acc += vals[i] / den_l
            den_r = knots[i + q + 1] - knots[i + 1]
            if den_r > 0.0:
                acc -= vals[i + 1] / den_r
            new[i] = q * acc
        vals = new
    return vals


def design_matrix(kv: KnotVector, soc) -> np.ndarray:
    """Rows of basis values for each sample; at most 4 nonzeros per row."""
    z = np.asarray(soc, dtype=np.float64)
    _check_support(kv, z)
    span = kv.find_span(z)
    return _kernels.basis_rows(kv.knots, DEGREE, z, span, kv.h)


def third_deriv_matrix(kv: KnotVector, soc_sorted) -> np.ndarray:
    """Rows of third-derivative values over a non-decreasing SOC sequence.

    The third derivative of a cubic basis is constant within each span, so
    rows are computed once per visited span and replicated.
    """
    z = np.asarray(soc_sorted, dtype=np.float64)
    if np.any(np.diff(z) < 0):
        raise UnsortedInput("soc sequence must be non-decreasing")
    _check_support(kv, z)
    spans = kv.find_span(z)
    out = np.empty((len(z), kv.h))
    for sp in np.unique(spans):
        idx = np.where(spans == sp)[0]
        out[idx] = eval_deriv(kv, float(z[idx[0]]), 3)
    return out


def diff_matrix(m: int) -> np.ndarray:
    """First-difference matrix: (m-1) x m with rows (.., 1, -1, ..)."""
    if m < 2:
        raise TooSmall("need at least two rows to difference")
    d = np.zeros((m - 1, m))
    idx = np.arange(m - 1)
    d[idx, idx] = 1.0
    d[idx, idx + 1] = -1.0
    return d


@dataclass(frozen=True)
class SplineCurve:
    """A spline with fixed knots and control points, e.g. an OCV estimate."""

    kv: KnotVector
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=np.float64)
        gamma.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)
        if len(gamma) != self.kv.h:
            raise ValueError(f"expected {self.kv.h} control points, got {len(gamma)}")
        if not np.all(np.isfinite(gamma)):
            raise ValueError("control points must be finite")

    def evaluate(self, z):
        z_arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
        out = design_matrix(self.kv, z_arr) @ self.gamma
        return out if np.ndim(z) else float(out[0])

    def to_ocv(self):
        from .ecm import OcvFunction

        lo, hi = self.kv.support
        return OcvFunction(self.evaluate, z_lo=lo, z_hi=hi, name="spline_ocv")

    def sampled(self, n: int = 200):
        """(soc, volts) table over the support, for plotting or export."""
        lo, hi = self.kv.support
        z = np.linspace(lo, hi, n)
        return z, self.evaluate(z)

    def save_csv(self, path, header_comment=None):
        with open(path, "w", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(",".join(f"{v:.17g}" for v in self.kv.knots) + "\n")
            fh.write(",".join(f"{v:.17g}" for v in self.gamma) + "\n")

    @classmethod
    def load_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        knots = np.array([float(v) for v in rows[0].split(",")])
        gamma = np.array([float(v) for v in rows[1].split(",")])
        return cls(kv=KnotVector(knots), gamma=gamma)
