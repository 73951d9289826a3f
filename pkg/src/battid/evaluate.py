"""Fit metrics, the end-to-end identification pipeline, grid search, and
the Monte Carlo harness.

Scoring convention: predicted voltage comes from a forward simulation with
the recovered circuit and spline curve (not from the regression residual),
and RMSE/VAF compare it against the record's measured voltage on the rows
that survive burn-in masking.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bspline import SplineCurve, uniform_clamped
from .ecm import EcmParams, OcvFunction, SimConfig, simulate
from .errors import AllSolvesFailed, BattidError, LengthMismatch, ZeroVariance
from .recovery import (
    RecoveredParams,
    TfCoeffs,
    tf_to_physical,
    tilde_to_tf,
    zoh_gain_debias,
)
from .regression import IdConfig, assemble
from .signals import BatteryMeta, SampledRecord
from .solver import Solution, extract_rank_one, solve


def rmse(v, v_hat) -> float:
    """Root mean squared error over all compared samples."""
    v = np.asarray(v, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if v.shape != v_hat.shape or v.size == 0:
        raise LengthMismatch(f"shapes {v.shape} and {v_hat.shape}")
    d = v - v_hat
    return float(np.sqrt(np.mean(d * d)))


def vaf(v, v_hat) -> float:
    """Variance accounted for, percent: 100 (1 - var(v - v_hat)/var(v))."""
    v = np.asarray(v, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if v.shape != v_hat.shape or v.size == 0:
        raise LengthMismatch(f"shapes {v.shape} and {v_hat.shape}")
    denom = float(np.var(v))
    if denom == 0.0:
        raise ZeroVariance("measured sequence has zero variance")
    return float((1.0 - np.var(v - v_hat) / denom) * 100.0)


def simulate_identified(params: EcmParams, ocv: SplineCurve,
                        current: SampledRecord, z0: float) -> np.ndarray:
    """Noise-free forward simulation with identified quantities."""
    cfg = SimConfig(noise_std=0.0, seed=0, initial_soc=z0)
    out = simulate(params, ocv.to_ocv(), current, cfg)
    return out.voltage


@dataclass(frozen=True)
class FitReport:
    """Everything a single identification run produced."""

    rmse: float
    vaf: float
    n_samples: int
    converged: bool
    params: RecoveredParams
    ocv: SplineCurve
    tf: TfCoeffs
    solution: Solution
    lambda1: float
    lambda2: float

    def summary_dict(self) -> dict:
        return {
            "rmse_v": self.rmse,
            "vaf_pct": self.vaf,
            "n_samples": self.n_samples,
            "converged": self.converged,
            "physical": self.params.physical,
            "notes": list(self.params.notes),
            "r0_ohm": self.params.r0,
            "r1_ohm": self.params.r1,
            "r2_ohm": self.params.r2,
            "c1_f": self.params.c1,
            "c2_f": self.params.c2,
            "tau1_s": self.params.tau1,
            "tau2_s": self.params.tau2,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
        }


def identify(rec: SampledRecord, meta: BatteryMeta, cfg: IdConfig) -> FitReport:
    """Full pipeline: assemble, solve, recover, simulate back, score.

    The record must carry SOC (run coulomb_count first if not).  The knot
    vector spans the observed SOC range so no basis sits outside data.
    """
    kv = uniform_clamped(float(rec.soc.min()), float(rec.soc.max()),
                         cfg.knot_count)
    prob = assemble(rec, kv, cfg)
    sol = solve(prob, cfg)

    a_tilde, gamma = sol.a_tilde, sol.gamma
    if cfg.solver.rank_one_extract:
        a_tilde, gamma = extract_rank_one(sol)

    tf = tilde_to_tf(a_tilde, sol.b_tilde, cfg.nu)
    rp = tf_to_physical(tf)
    if cfg.sample_debias:
        rp = zoh_gain_debias(rp, rec.ts)
    curve = SplineCurve(kv=kv, gamma=gamma)

    keep = ~prob.burn_mask
    if rp.physical:
        params = rp.to_ecm_params(meta.capacity_ah)
        v_hat = simulate_identified(params, curve, rec, float(rec.soc[0]))
        fit_rmse = rmse(rec.voltage[keep], v_hat[keep])
        fit_vaf = vaf(rec.voltage[keep], v_hat[keep])
    else:
        fit_rmse = float("nan")
        fit_vaf = float("nan")
    return FitReport(rmse=fit_rmse, vaf=fit_vaf, n_samples=int(keep.sum()),
                     converged=sol.diagnostics.converged, params=rp,
                     ocv=curve, tf=tf, solution=sol,
                     lambda1=cfg.lambda1, lambda2=cfg.lambda2)


@dataclass(frozen=True)
class GridSpec:
    """Candidate regularization weights, usually log-spaced."""

    lambda1: tuple
    lambda2: tuple

    def __post_init__(self):
        if not self.lambda1 or not self.lambda2:
            raise ValueError("grid axes must be non-empty")
        if any(v < 0 for v in self.lambda1) or any(v < 0 for v in self.lambda2):
            raise ValueError("grid values must be non-negative")

    @classmethod
    def log_spaced(cls, lo1, hi1, n1, lo2, hi2, n2):
        return cls(tuple(np.geomspace(lo1, hi1, n1)),
                   tuple(np.geomspace(lo2, hi2, n2)))


@dataclass(frozen=True)
class GridResult:
    best_lambda1: float
    best_lambda2: float
    best_report: FitReport
    # rows: (lambda1, lambda2, rmse, vaf, converged, failure)
    table: tuple


def grid_search(rec: SampledRecord, meta: BatteryMeta, grid: GridSpec,
                cfg: IdConfig, jobs: int = 1,
                holdout_frac: float = 0.0) -> GridResult:
    """Score every (lambda1, lambda2) cell by forward-simulation RMSE.

    By default cells are scored in-sample on the full record (minus
    burn-in).  With ``holdout_frac`` > 0 the fit uses only the leading part
    of the record and the score is the RMSE over the held-out tail, an
    honest generalization check.  Failed cells (non-physical recovery,
    numerical breakdown) are recorded and skipped.  Ties prefer the larger
    lambda1, then larger lambda2.
    """
    if not 0.0 <= holdout_frac < 0.9:
        raise ValueError("holdout_frac must lie in [0, 0.9)")
    cells = [(l1, l2) for l1 in grid.lambda1 for l2 in grid.lambda2]
    n_fit = len(rec) - int(holdout_frac * len(rec))
    fit_rec = rec if holdout_frac == 0.0 else SampledRecord(
        ts=rec.ts, current=rec.current[:n_fit], voltage=rec.voltage[:n_fit],
        t0=rec.t0, soc=rec.soc[:n_fit])

    def run(cell):
        l1, l2 = cell
        sub = IdConfig(nu=cfg.nu, knot_count=cfg.knot_count, lambda1=l1,
                       lambda2=l2, burn_in=cfg.burn_in,
                       burn_cap_frac=cfg.burn_cap_frac,
                       sample_debias=cfg.sample_debias, solver=cfg.solver)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rep = identify(fit_rec, meta, sub)
            if not rep.params.physical or not np.isfinite(rep.rmse):
                return cell, None, "non-physical recovery"
            if holdout_frac > 0.0:
                # the tail can wander beyond the SOC range the curve was
                # fitted on; score only up to the point it leaves support
                lo, hi = rep.ocv.kv.support
                outside = np.where((rec.soc < lo) | (rec.soc > hi))[0]
                end = int(outside[0]) if outside.size else len(rec)
                if end <= n_fit:
                    return cell, None, "held-out soc outside fitted support"
                part = SampledRecord(ts=rec.ts, current=rec.current[:end],
                                     voltage=rec.voltage[:end], t0=rec.t0,
                                     soc=rec.soc[:end])
                params = rep.params.to_ecm_params(meta.capacity_ah)
                v_hat = simulate_identified(params, rep.ocv, part,
                                            float(part.soc[0]))
                score = rmse(part.voltage[n_fit:end], v_hat[n_fit:end])
                rep = FitReport(rmse=score, vaf=rep.vaf,
                                n_samples=end - n_fit,
                                converged=rep.converged, params=rep.params,
                                ocv=rep.ocv, tf=rep.tf,
                                solution=rep.solution, lambda1=l1, lambda2=l2)
            return cell, rep, ""
        except BattidError as ex:
            return cell, None, f"{type(ex).__name__}: {ex}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    table = []
    best = None
    for (l1, l2), rep, failure in results:
        if rep is None:
            table.append((l1, l2, float("nan"), float("nan"), False, failure))
            continue
        table.append((l1, l2, rep.rmse, rep.vaf, rep.converged, ""))
        key = (-rep.rmse, l1, l2)
        if best is None or key > best[0]:
            best = (key, l1, l2, rep)
    if best is None:
        raise AllSolvesFailed("every grid cell failed")
    _, l1, l2, rep = best
    return GridResult(best_lambda1=float(l1), best_lambda2=float(l2),
                      best_report=rep, table=tuple(table))


@dataclass(frozen=True)
class MonteCarloResult:
    reports: tuple
    failures: tuple                 # (run index, message)
    param_names: tuple = ("r0", "r1", "r2", "c1", "c2", "tau1", "tau2")
    param_mean: np.ndarray = field(default=None)
    param_std: np.ndarray = field(default=None)
    ocv_grid: np.ndarray = field(default=None)
    ocv_mean: np.ndarray = field(default=None)
    ocv_band: np.ndarray = field(default=None)   # 2 sigma half-width

    @property
    def vaf_mean(self) -> float:
        return float(np.mean([r.vaf for r in self.reports]))

    @property
    def rmse_mean(self) -> float:
        return float(np.mean([r.rmse for r in self.reports]))


def monte_carlo(truth: EcmParams, ocv: OcvFunction, profile: SampledRecord,
                n_runs: int, noise_std: float, cfg: IdConfig,
                initial_soc: float, base_seed: int = 0,
                jobs: int = 1) -> MonteCarloResult:
    """Repeat identification over independent noise realizations.

    Run k simulates with seed base_seed + k, identifies, and reports
    per-parameter mean and standard deviation plus a 2-sigma band of the
    recovered curves on a common SOC grid.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    meta = BatteryMeta(capacity_ah=truth.capacity_ah, initial_soc=initial_soc)

    def run(k):
        sim_cfg = SimConfig(noise_std=noise_std, seed=base_seed + k,
                            initial_soc=initial_soc)
        rec = simulate(truth, ocv, profile, sim_cfg)
        return identify(rec, meta, cfg)

    reports = []
    failures = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda k: _guard(run, k), range(n_runs)))
    else:
        outcomes = [_guard(run, k) for k in range(n_runs)]
    for k, (rep, err) in enumerate(outcomes):
        if rep is not None:
            reports.append(rep)
        else:
            failures.append((k, err))
    if not reports:
        raise AllSolvesFailed("every noise realization failed")

    vals = np.array([[r.params.r0, r.params.r1, r.params.r2,
                      r.params.c1, r.params.c2,
                      r.params.tau1, r.params.tau2] for r in reports])
    lo = max(float(r.ocv.kv.support[0]) for r in reports)
    hi = min(float(r.ocv.kv.support[1]) for r in reports)
    zg = np.linspace(lo, hi, 200)
    curves = np.array([r.ocv.evaluate(zg) for r in reports])
    return MonteCarloResult(
        reports=tuple(reports),
        failures=tuple(failures),
        param_mean=vals.mean(axis=0),
        param_std=vals.std(axis=0),
        ocv_grid=zg,
        ocv_mean=curves.mean(axis=0),
        ocv_band=2.0 * curves.std(axis=0),
    )


def _guard(fn, k):
    try:
        return fn(k), ""
    except BattidError as ex:
        return None, f"{type(ex).__name__}: {ex}"
