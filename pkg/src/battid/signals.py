"""Sampled current/voltage records: CSV ingestion, SOC integration, sorting.

Conventions: charging current is positive; time stamps are seconds; SOC is a
unitless fraction in [0, 1].  Records are immutable after construction and a
record's arrays are marked read-only, so instances are safe to share between
threads.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    MissingColumn,
    MissingSoc,
    NonMonotonicTime,
    NonUniformSampling,
    SocOutOfRange,
)

_SOC_TOL = 1e-9
# Integration overshoot beyond this window indicates a wrong capacity or
# initial SOC rather than numerical round-off.
_SOC_HARD_LO = -0.01
_SOC_HARD_HI = 1.01


def _frozen_array(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr = np.array(arr)  # private copy
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SampledRecord:
    """Uniformly sampled current/voltage series with optional SOC.

    ts       sampling interval in seconds (> 0)
    t0       time of the first sample in seconds
    current  amperes, charging positive, held constant over each interval
    voltage  volts at sample instants
    soc      optional state-of-charge fractions in [0, 1]
    """

    ts: float
    current: np.ndarray
    voltage: np.ndarray
    t0: float = 0.0
    soc: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "current", _frozen_array(self.current, "current"))
        object.__setattr__(self, "voltage", _frozen_array(self.voltage, "voltage"))
        if self.ts <= 0:
            raise ValueError("ts must be strictly positive")
        if len(self.current) != len(self.voltage):
            raise ValueError("current and voltage must have equal length")
        if len(self.current) < 2:
            raise ValueError("record needs at least two samples")
        if self.soc is not None:
            soc = _frozen_array(self.soc, "soc")
            if len(soc) != len(self.current):
                raise ValueError("soc length must match current")
            if soc.min() < -_SOC_TOL or soc.max() > 1.0 + _SOC_TOL:
                raise SocOutOfRange(
                    f"soc outside [0, 1]: range [{soc.min()}, {soc.max()}]"
                )
            object.__setattr__(self, "soc", soc)

    def __len__(self):
        return len(self.current)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.ts * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.ts * (len(self) - 1)

    def with_soc(self, soc) -> "SampledRecord":
        return replace(self, soc=soc)


@dataclass(frozen=True)
class BatteryMeta:
    """Capacity in ampere-hours and the SOC at the first sample."""

    capacity_ah: float
    initial_soc: float

    def __post_init__(self):
        if self.capacity_ah <= 0:
            raise ValueError("capacity_ah must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError("initial_soc must lie in [0, 1]")


@dataclass(frozen=True)
class CsvSchema:
    """Column-name mapping for CSV ingestion."""

    time: str = "time_s"
    current: str = "current_a"
    voltage: str = "voltage_v"
    soc: str | None = "soc"
    # set for data sets that log discharge as positive current
    sign_flip: bool = False


DEFAULT_SCHEMA = CsvSchema()


def load_csv(path, schema: CsvSchema = DEFAULT_SCHEMA, resample_ts: float | None = None,
             uniform_rtol: float = 1e-6) -> SampledRecord:
    """Read a record from CSV.

    The file must have a header row; lines starting with '#' are ignored.
    Time stamps must be strictly increasing.  Non-uniform stamps raise
    NonUniformSampling unless ``resample_ts`` requests resampling, which
    holds current constant between samples and interpolates voltage
    linearly.
    """
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in row]
                continue
            rows.append(row)
    if header is None or not rows:
        raise EmptyFile(f"{path} contains no data rows")

    def col(name):
        try:
            return header.index(name)
        except ValueError:
            raise MissingColumn(f"column {name!r} not in {header}") from None

    it, ic, iv = col(schema.time), col(schema.current), col(schema.voltage)
    isoc = None
    if schema.soc is not None and schema.soc in header:
        isoc = header.index(schema.soc)

    data = np.empty((len(rows), 3 + (isoc is not None)))
    for k, row in enumerate(rows):
        data[k, 0] = float(row[it])
        data[k, 1] = float(row[ic])
        data[k, 2] = float(row[iv])
        if isoc is not None:
            data[k, 3] = float(row[isoc])

    t = data[:, 0]
    cur = -data[:, 1] if schema.sign_flip else data[:, 1]
    vol = data[:, 2]
    soc = data[:, 3] if isoc is not None else None

    dt = np.diff(t)
    if np.any(dt <= 0):
        raise NonMonotonicTime("time stamps must be strictly increasing")
    ts = float(np.median(dt))
    if np.max(np.abs(dt - ts)) > uniform_rtol * ts:
        if resample_ts is None:
            raise NonUniformSampling(
                f"time step varies by more than rtol={uniform_rtol}; "
                "pass resample_ts to resample"
            )
        return _resample(t, cur, vol, soc, resample_ts)
    return SampledRecord(ts=ts, current=cur, voltage=vol, t0=float(t[0]), soc=soc)


def _resample(t, cur, vol, soc, ts):
    grid = np.arange(t[0], t[-1] + 0.5 * ts, ts)
    # current: zero-order hold (previous sample applies until the next stamp)
    idx = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, len(t) - 1)
    cur_g = cur[idx]
    vol_g = np.interp(grid, t, vol)
    soc_g = np.interp(grid, t, soc) if soc is not None else None
    return SampledRecord(ts=float(ts), current=cur_g, voltage=vol_g,
                         t0=float(grid[0]), soc=soc_g)


def save_csv(rec: SampledRecord, path, header_comment: str | None = None) -> None:
    """Write a record as CSV (time_s, current_a, voltage_v[, soc])."""
    path = Path(path)
    cols = ["time_s", "current_a", "voltage_v"]
    arrays = [rec.times, rec.current, rec.voltage]
    if rec.soc is not None:
        cols.append("soc")
        arrays.append(rec.soc)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(cols) + "\n")
        for vals in zip(*arrays):
            # %.17g round-trips any double exactly
            fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")


def coulomb_count(rec: SampledRecord, meta: BatteryMeta) -> SampledRecord:
    """Attach SOC integrated from current.

    soc[j] = initial_soc + sum_{k<j} current[k] * ts / (3600 * capacity_ah),
    the left-rectangle rule, which is exact for current held constant over
    each sampling interval.  Values are clipped to [0, 1]; integration
    leaving [-0.01, 1.01] raises SocOutOfRange.
    """
    scale = rec.ts / (3600.0 * meta.capacity_ah)
    acc = np.concatenate(([0.0], np.cumsum(rec.current[:-1]) * scale))
    soc = meta.initial_soc + acc
    if soc.min() < _SOC_HARD_LO or soc.max() > _SOC_HARD_HI:
        raise SocOutOfRange(
            f"integrated soc range [{soc.min():.4f}, {soc.max():.4f}] "
            f"exceeds [{_SOC_HARD_LO}, {_SOC_HARD_HI}]"
        )
    return rec.with_soc(np.clip(soc, 0.0, 1.0))


def sort_by_soc(rec: SampledRecord) -> np.ndarray:
    """Stable permutation putting the record's SOC in non-decreasing order."""
    if rec.soc is None:
        raise MissingSoc("record has no soc; run coulomb_count first")
    return np.argsort(rec.soc, kind="stable")
