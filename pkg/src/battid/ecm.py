"""Second-order equivalent-circuit battery simulator.

The circuit is a series resistance plus two parallel RC branches and a
SOC-dependent voltage source.  Branch states advance by the exact matrix
exponential under held current, so the generator itself adds no
discretization error: the only approximations in an identification run are
the estimator's own.

Measurement noise is drawn from numpy's PCG64 generator via
``standard_normal`` (ziggurat transform); fixing the seed reproduces runs
bit for bit on any platform with the same numpy version.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, NonFiniteOcv, SocRangeExceeded
from .signals import BatteryMeta, SampledRecord, coulomb_count


@dataclass(frozen=True)
class EcmParams:
    """Circuit values: series resistance, two RC branches, capacity.

    Branch 1 is the fast branch (smaller time constant) by convention.
    """

    r0: float
    r1: float
    r2: float
    c1: float
    c2: float
    capacity_ah: float

    def __post_init__(self):
        for name in ("r0", "r1", "r2", "c1", "c2", "capacity_ah"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not (math.isfinite(self.tau1) and math.isfinite(self.tau2)):
            raise ValueError("time constants must be finite")

    @property
    def tau1(self) -> float:
        return self.r1 * self.c1

    @property
    def tau2(self) -> float:
        return self.r2 * self.c2


class OcvFunction:
    """Open-circuit voltage as a function of SOC with a declared valid range."""

    def __init__(self, fn, z_lo: float, z_hi: float, name: str = "ocv"):
        self.fn = fn
        self.z_lo = float(z_lo)
        self.z_hi = float(z_hi)
        self.name = name

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        if np.any(z < self.z_lo) or np.any(z > self.z_hi):
            raise DomainError(
                f"{self.name}: soc outside [{self.z_lo}, {self.z_hi}]"
            )
        out = np.asarray(self.fn(z), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NonFiniteOcv(f"{self.name} produced non-finite values")
        return out if out.ndim else float(out)


def ocv_sim_curve(z):
    """Synthetic OCV curve: 3 + 0.03*(1.5 - z)**-4 + 0.1*ln(z + 0.01).

    Valid for z in (-0.01, 1.5); natural logarithm.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= -0.01) or np.any(z >= 1.5):
        raise DomainError("ocv_sim_curve requires -0.01 < z < 1.5")
    out = 3.0 + 0.03 * (1.5 - z) ** (-4) + 0.1 * np.log(z + 0.01)
    return out if out.ndim else float(out)


def sim_ocv() -> OcvFunction:
    """The synthetic curve wrapped with its usable SOC range."""
    return OcvFunction(ocv_sim_curve, z_lo=0.0, z_hi=1.0, name="sim_ocv")


@dataclass(frozen=True)
class SimConfig:
    """Noise level, seed, and initial conditions for a simulation run."""

    noise_std: float = 0.0
    seed: int = 0
    initial_soc: float = 0.5
    initial_rc_voltages: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def simulate(params: EcmParams, ocv: OcvFunction, current: SampledRecord,
             cfg: SimConfig) -> SampledRecord:
    """Terminal-voltage response to the record's current profile.

    Branch voltages follow v_k[j+1] = exp(-ts/tau_k) v_k[j]
    + r_k (1 - exp(-ts/tau_k)) i[j]; the output adds the series drop, the
    OCV at the integrated SOC, and i.i.d. Gaussian noise.
    """
    ts = current.ts
    meta = BatteryMeta(capacity_ah=params.capacity_ah, initial_soc=cfg.initial_soc)
    rec = coulomb_count(current, meta)
    z = rec.soc
    if z.min() < ocv.z_lo or z.max() > ocv.z_hi:
        raise SocRangeExceeded(
            f"soc range [{z.min():.4f}, {z.max():.4f}] leaves ocv domain "
            f"[{ocv.z_lo}, {ocv.z_hi}]"
        )
    e1 = math.exp(-ts / params.tau1)
    e2 = math.exp(-ts / params.tau2)
    v10, v20 = cfg.initial_rc_voltages
    branches = _kernels.rc_pair(e1, params.r1 * (1.0 - e1),
                                e2, params.r2 * (1.0 - e2),
                                float(v10), float(v20), rec.current)
    vb = branches[:, 0] + branches[:, 1] + params.r0 * rec.current + ocv(z)
    if cfg.noise_std > 0:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        vb = vb + cfg.noise_std * rng.standard_normal(len(rec))
    return SampledRecord(ts=ts, current=rec.current, voltage=vb,
                         t0=rec.t0, soc=z)


def gen_drive_cycle(duration_s: float, ts: float, seed: int,
                    amplitude_a: float, warm_frac: float = 0.25) -> SampledRecord:
    """Surrogate urban drive-cycle current: held segments of 1-60 s.

    The opening ``warm_frac`` of the record is charge sustaining (idle and
    small zero-mean bursts, stop-and-go traffic character), which keeps
    early SOC values revisited after any burn-in masking.  The remainder
    alternates discharge stretches with shorter regenerative stretches, so
    the net-discharging SOC trajectory descends as a sawtooth and passes
    most SOC values more than once; single-pass trajectories leave parts of
    the curve estimate poorly excited.  All values stay within
    +/- amplitude_a; the same seed reproduces the profile exactly.
    """
    if duration_s < 10 * ts:
        raise ValueError("duration_s must be at least 10 sampling intervals")
    n = int(round(duration_s / ts))
    rng = np.random.Generator(np.random.PCG64(seed))
    cur = np.empty(n)
    n_warm = int(warm_frac * n)
    j = 0
    in_regen = True          # first toggle enters a discharge stretch
    phase_end = n_warm
    while j < n:
        if j >= n_warm and j >= phase_end:
            if in_regen:
                phase_end = j + max(int(rng.integers(240, 421) / ts), 1)
            else:
                phase_end = j + max(int(rng.integers(100, 201) / ts), 1)
            in_regen = not in_regen
        dur = max(int(rng.integers(1, 61) / ts), 1)
        u = rng.random()
        if j < n_warm:
            if u < 0.45:
                val = amplitude_a * rng.uniform(-0.5, 0.5)
            elif u < 0.75:
                val = 0.0
            else:
                val = amplitude_a * rng.uniform(-0.25, 0.25)
        elif in_regen:
            if u < 0.6:
                val = amplitude_a * rng.uniform(0.2, 0.8)
            elif u < 0.85:
                val = amplitude_a * rng.uniform(-0.3, 0.3)
            else:
                val = 0.0
        else:
            if u < 0.7:
                val = -amplitude_a * rng.uniform(0.3, 0.95)
            elif u < 0.9:
                val = amplitude_a * rng.uniform(-0.5, 0.5)
            else:
                val = 0.0
        cur[j:j + dur] = val
        j += dur
    return SampledRecord(ts=ts, current=cur, voltage=np.zeros(n))
