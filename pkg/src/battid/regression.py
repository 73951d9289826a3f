"""Assembly of the identification data equation.

For a record with SOC and a knot vector, the target and regressor blocks are

    y   = [L2 v]                                       (n,)
    Pi  = [-L1 v, -L0 v, L2 i, L1 i, L0 i, L2 g_1..g_h] (n, 5 + h)
    F   = [L1 g_1..g_h, L0 g_1..g_h]                    (n, 2h)

so that y = Pi phi + F vec(M) holds for phi = (a~1, a~2, b~0, b~1, b~2,
gamma) and M = a~ gamma^T vectorized row-wise.  Columns of Pi and F are
normalized to unit Euclidean norm over unmasked rows; the recorded factors
convert solver variables back to physical units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bspline import KnotVector, design_matrix, third_deriv_matrix
from .errors import DegenerateColumn, MissingSoc
from .laguerre import discretize, filter_signal
from .signals import SampledRecord
from .solver_settings import SolverSettings


@dataclass(frozen=True)
class IdConfig:
    """Everything the identification pipeline needs besides the data."""

    nu: float = 1e-3                  # filter cutoff, rad/s
    knot_count: int = 21              # spline breakpoints over observed SOC
    lambda1: float = 1e-8             # structured-matrix nuclear-norm weight
    lambda2: float = 0.0              # L1 weight on differenced 3rd derivative
    burn_in: int | str = "auto"       # samples masked out, or "auto"
    burn_cap_frac: float = 0.2        # cap for the auto policy
    sample_debias: bool = True        # undo held-sampling gain inflation
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("regularization weights must be non-negative")
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    def burn_samples(self, n: int, ts: float) -> int:
        """Mask length: ceil(5 / (nu * ts)) capped at burn_cap_frac of n."""
        if self.burn_in != "auto":
            nb = int(self.burn_in)
            if nb < 0 or nb >= n:
                raise ValueError("burn_in must lie in [0, n)")
            return nb
        return min(math.ceil(5.0 / (self.nu * ts)), int(self.burn_cap_frac * n))


@dataclass(frozen=True)
class IdProblem:
    """Assembled regression with burn-in mask and column scaling.

    y          target vector, all rows
    pi, f      column-normalized regressor blocks, all rows
    dg3        differenced third-derivative rows over sorted unmasked SOC
    burn_mask  True where a row is excluded from the fit
    scale      norms of the original Pi|F columns (length 5 + 3h)
    """

    y: np.ndarray
    pi: np.ndarray
    f: np.ndarray
    dg3: np.ndarray
    burn_mask: np.ndarray
    scale: np.ndarray
    kv: KnotVector
    nu: float
    ts: float

    @property
    def h(self) -> int:
        return self.kv.h

    @property
    def n_rows(self) -> int:
        return len(self.y)


def assemble(rec: SampledRecord, kv: KnotVector, cfg: IdConfig) -> IdProblem:
    """Filter the record and stack the data equation.

    Raises DegenerateColumn when a regressor column is identically zero on
    the unmasked rows (e.g. an unexcited input), since no scaling or solve
    can use it.
    """
    if rec.soc is None:
        raise MissingSoc("record has no soc; run coulomb_count first")
    n = len(rec)
    bank = discretize(cfg.nu, rec.ts)
    fv = filter_signal(bank, rec.voltage)
    fi = filter_signal(bank, rec.current)
    g = design_matrix(kv, rec.soc)
    h = kv.h
    fg = np.empty((n, 3, h))
    for k in range(h):
        fg[:, :, k] = filter_signal(bank, g[:, k])

    y = fv[:, 2].copy()
    pi = np.empty((n, 5 + h))
    pi[:, 0] = -fv[:, 1]
    pi[:, 1] = -fv[:, 0]
    pi[:, 2] = fi[:, 2]
    pi[:, 3] = fi[:, 1]
    pi[:, 4] = fi[:, 0]
    pi[:, 5:] = fg[:, 2, :]
    f = np.concatenate([fg[:, 1, :], fg[:, 0, :]], axis=1)

    nb = cfg.burn_samples(n, rec.ts)
    burn_mask = np.zeros(n, dtype=bool)
    burn_mask[:nb] = True
    keep = ~burn_mask

    scale = np.concatenate([
        np.linalg.norm(pi[keep], axis=0),
        np.linalg.norm(f[keep], axis=0),
    ])
    zero = np.where(scale == 0.0)[0]
    if zero.size:
        raise DegenerateColumn(
            f"column {int(zero[0])} is identically zero on unmasked rows"
        )
    pi = pi / scale[: 5 + h]
    f = f / scale[5 + h:]

    soc_sorted = rec.soc[keep][sort_by_soc_indices(rec.soc[keep])]
    g3 = third_deriv_matrix(kv, soc_sorted)
    dg3 = g3[:-1] - g3[1:]  # first differences along sorted SOC

    for name, arr in (("y", y), ("pi", pi), ("f", f), ("dg3", dg3)):
        if not np.all(np.isfinite(arr)):
            raise DegenerateColumn(f"{name} contains non-finite entries")

    return IdProblem(y=y, pi=pi, f=f, dg3=dg3, burn_mask=burn_mask,
                     scale=scale, kv=kv, nu=cfg.nu, ts=rec.ts)


def sort_by_soc_indices(soc: np.ndarray) -> np.ndarray:
    return np.argsort(soc, kind="stable")


def dump_problem(prob: IdProblem, directory) -> None:
    """Write the assembled blocks as a CSV bundle for external debugging.

    Files: y.csv, pi.csv, f.csv, dg3.csv, mask.csv, scale.csv, knots.csv,
    meta.csv (nu, ts).  All numeric values use %.17g.
    """
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "y.csv", prob.y, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "pi.csv", prob.pi, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "f.csv", prob.f, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "dg3.csv", prob.dg3, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "mask.csv", prob.burn_mask.astype(int), fmt="%d")
    np.savetxt(directory / "scale.csv", prob.scale, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "knots.csv", prob.kv.knots, fmt="%.17g", delimiter=",")
    with open(directory / "meta.csv", "w", encoding="utf-8") as fh:
        fh.write(f"nu,{prob.nu:.17g}\nts,{prob.ts:.17g}\n")
