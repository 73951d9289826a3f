"""Command-line front end.

Subcommands: simulate, identify, tune, montecarlo.  Configuration comes
from a sectioned key=value file (INI syntax); unknown sections or keys are
rejected.  Every output file starts with a comment line carrying the tool
version and a hash of the configuration, and is written atomically via a
temporary file and rename.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ecm import EcmParams, SimConfig, gen_drive_cycle, sim_ocv, simulate
from .errors import BattidError
from .evaluate import GridSpec, grid_search, identify, monte_carlo
from .regression import IdConfig
from .signals import (
    BatteryMeta,
    CsvSchema,
    SampledRecord,
    coulomb_count,
    load_csv,
    save_csv,
)
from .solver_settings import SolverSettings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# every key a config file may set, with its section
_SCHEMA = {
    "battery": {"capacity_ah", "initial_soc"},
    "filter": {"nu", "burn_in"},
    "spline": {"knot_count"},
    "solver": {"lambda1", "lambda2", "max_iters", "abs_tol", "rel_tol",
               "rank_one_extract", "sample_debias"},
    "io": {"time_column", "current_column", "voltage_column", "soc_column",
           "sign_flip", "resample_ts"},
    "simulation": {"r0", "r1", "r2", "c1", "c2", "duration_s", "ts",
                   "amplitude_a", "profile"},
    "experiment": {"seed", "runs", "noise_std"},
    "tune": {"lambda1_grid", "lambda2_grid"},
}


class ConfigError(Exception):
    pass


class RunConfig:
    """Validated view over the configuration file."""

    def __init__(self, path: Path):
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigError(f"config file not found: {self.path}")
        raw = self.path.read_bytes()
        self.hash = hashlib.sha256(raw).hexdigest()[:12]
        parser = configparser.ConfigParser()
        try:
            parser.read_string(raw.decode("utf-8"))
        except (configparser.Error, UnicodeDecodeError) as ex:
            raise ConfigError(f"cannot parse {self.path}: {ex}") from ex
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key in parser[section]:
                if key not in _SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section}]"
                    )
        self._p = parser

    def get(self, section, key, cast=str, default=None, required=False):
        if self._p.has_option(section, key):
            raw = self._p.get(section, key)
            try:
                if cast is bool:
                    return raw.strip().lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError as ex:
                raise ConfigError(
                    f"[{section}] {key} = {raw!r}: {ex}"
                ) from ex
        if required:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return default

    def id_config(self) -> IdConfig:
        burn = self.get("filter", "burn_in", str, "auto")
        if burn != "auto":
            burn = int(burn)
        settings = SolverSettings(
            max_iters=self.get("solver", "max_iters", int, 2000),
            abs_tol=self.get("solver", "abs_tol", float, 1e-9),
            rel_tol=self.get("solver", "rel_tol", float, 1e-7),
            rank_one_extract=self.get("solver", "rank_one_extract", bool, False),
        )
        return IdConfig(
            nu=self.get("filter", "nu", float, 1e-3),
            knot_count=self.get("spline", "knot_count", int, 21),
            lambda1=self.get("solver", "lambda1", float, 1e-8),
            lambda2=self.get("solver", "lambda2", float, 0.0),
            burn_in=burn,
            sample_debias=self.get("solver", "sample_debias", bool, True),
            solver=settings,
        )

    def csv_schema(self) -> CsvSchema:
        return CsvSchema(
            time=self.get("io", "time_column", str, "time_s"),
            current=self.get("io", "current_column", str, "current_a"),
            voltage=self.get("io", "voltage_column", str, "voltage_v"),
            soc=self.get("io", "soc_column", str, "soc"),
            sign_flip=self.get("io", "sign_flip", bool, False),
        )

    def sim_params(self) -> EcmParams:
        return EcmParams(
            r0=self.get("simulation", "r0", float, required=True),
            r1=self.get("simulation", "r1", float, required=True),
            r2=self.get("simulation", "r2", float, required=True),
            c1=self.get("simulation", "c1", float, required=True),
            c2=self.get("simulation", "c2", float, required=True),
            capacity_ah=self.get("battery", "capacity_ah", float, required=True),
        )


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _header(cfg: RunConfig) -> str:
    return f"battid {__version__} config={cfg.hash}"


def _atomic_record(path: Path, rec, cfg: RunConfig) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    save_csv(rec, tmp, header_comment=_header(cfg))
    os.replace(tmp, path)


def cmd_simulate(cfg: RunConfig, out_path: str, seed_override=None,
                 verbose=False) -> int:
    params = cfg.sim_params()
    duration = cfg.get("simulation", "duration_s", float, 3600.0)
    ts = cfg.get("simulation", "ts", float, 1.0)
    amp = cfg.get("simulation", "amplitude_a", float, 2.0)
    seed = seed_override if seed_override is not None else \
        cfg.get("experiment", "seed", int, 0)
    noise = cfg.get("experiment", "noise_std", float, 0.0)
    z0 = cfg.get("battery", "initial_soc", float, required=True)

    kind = cfg.get("simulation", "profile", str, "urban")
    if kind == "urban":
        profile = gen_drive_cycle(duration, ts, seed, amp)
    elif kind == "step":
        # constant discharge at the configured amplitude, for step-response
        # checks against the true-curve sidecar
        n = int(round(duration / ts))
        profile = SampledRecord(ts=ts, current=np.full(n, -amp),
                                voltage=np.zeros(n))
    else:
        raise ConfigError(f"[simulation] profile must be urban or step, "
                          f"got {kind!r}")
    rec = simulate(params, sim_ocv(), profile,
                   SimConfig(noise_std=noise, seed=seed, initial_soc=z0))
    out = Path(out_path)
    _atomic_record(out, rec, cfg)

    truth = {
        "tool": _header(cfg),
        "r0_ohm": params.r0, "r1_ohm": params.r1, "r2_ohm": params.r2,
        "c1_f": params.c1, "c2_f": params.c2,
        "capacity_ah": params.capacity_ah,
        "tau1_s": params.tau1, "tau2_s": params.tau2,
        "initial_soc": z0, "noise_std": noise, "seed": seed,
    }
    _atomic_write(out.with_suffix(out.suffix + ".truth.json"),
                  json.dumps(truth, indent=2) + "\n")

    zg = np.linspace(float(rec.soc.min()), float(rec.soc.max()), 400)
    ocv_rows = "\n".join(f"{z:.12g},{v:.12g}"
                         for z, v in zip(zg, sim_ocv()(zg)))
    _atomic_write(out.with_suffix(out.suffix + ".ocv.csv"),
                  f"# {_header(cfg)}\nsoc,ocv_v\n{ocv_rows}\n")
    if verbose:
        print(f"wrote {out} ({len(rec)} samples)")
    return EXIT_OK


def _load_record(cfg: RunConfig, data_path: str):
    schema = cfg.csv_schema()
    resample = cfg.get("io", "resample_ts", float, None)
    rec = load_csv(data_path, schema=schema, resample_ts=resample)
    if rec.soc is None:
        cap = cfg.get("battery", "capacity_ah", float)
        z0 = cfg.get("battery", "initial_soc", float)
        if cap is None or z0 is None:
            raise ConfigError(
                "data has no soc column; set capacity_ah and initial_soc "
                "in [battery] so soc can be integrated from current"
            )
        rec = coulomb_count(rec, BatteryMeta(capacity_ah=cap, initial_soc=z0))
    return rec


def _report_json(cfg: RunConfig, report) -> str:
    d = {"tool": _header(cfg)}
    d.update(report.summary_dict())
    d["tf_a1"] = report.tf.a1
    d["tf_a2"] = report.tf.a2
    d["tf_b0"] = report.tf.b0
    d["tf_b1"] = report.tf.b1
    d["tf_b2"] = report.tf.b2
    diag = report.solution.diagnostics
    d["solver_iterations"] = diag.iterations
    d["solver_stop"] = diag.stop_reason
    d["solver_null_dim"] = diag.null_dim
    return json.dumps(d, indent=2) + "\n"


def _print_summary(report) -> None:
    p = report.params
    print(f"r0 = {p.r0:.6g} ohm   r1 = {p.r1:.6g} ohm   r2 = {p.r2:.6g} ohm")
    print(f"c1 = {p.c1:.6g} F     c2 = {p.c2:.6g} F")
    print(f"time constants: {p.tau1:.4g} s (fast), {p.tau2:.4g} s (slow)")
    print(f"rmse = {report.rmse * 1e3:.4g} mV   vaf = {report.vaf:.4f} %")
    if not p.physical:
        print(f"WARNING non-physical recovery: {'; '.join(p.notes)}")
    if not report.converged:
        print("WARNING solver did not meet its tolerances")


def cmd_identify(cfg: RunConfig, data_path: str, out_path: str,
                 verbose=False) -> int:
    rec = _load_record(cfg, data_path)
    cap = cfg.get("battery", "capacity_ah", float, required=True)
    z0 = float(rec.soc[0])
    meta = BatteryMeta(capacity_ah=cap, initial_soc=z0)
    id_cfg = cfg.id_config()
    if verbose:
        id_cfg = IdConfig(
            nu=id_cfg.nu, knot_count=id_cfg.knot_count,
            lambda1=id_cfg.lambda1, lambda2=id_cfg.lambda2,
            burn_in=id_cfg.burn_in, sample_debias=id_cfg.sample_debias,
            solver=SolverSettings(
                max_iters=id_cfg.solver.max_iters,
                abs_tol=id_cfg.solver.abs_tol,
                rel_tol=id_cfg.solver.rel_tol,
                rank_one_extract=id_cfg.solver.rank_one_extract,
                verbose=True,
            ),
        )
    report = identify(rec, meta, id_cfg)

    out = Path(out_path)
    _atomic_write(out, _report_json(cfg, report))
    zg, vg = report.ocv.sampled(400)
    rows = "\n".join(f"{z:.12g},{v:.12g}" for z, v in zip(zg, vg))
    _atomic_write(out.with_suffix(out.suffix + ".ocv.csv"),
                  f"# {_header(cfg)}\nsoc,ocv_v\n{rows}\n")
    spline_path = out.with_suffix(out.suffix + ".spline.csv")
    tmp = spline_path.with_name(f".{spline_path.name}.tmp{os.getpid()}")
    report.ocv.save_csv(tmp, header_comment=_header(cfg))
    os.replace(tmp, spline_path)

    _print_summary(report)
    print(f"report: {out}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig, data_path: str, out_path: str, jobs=1,
             verbose=False) -> int:
    g1 = cfg.get("tune", "lambda1_grid", str, "")
    g2 = cfg.get("tune", "lambda2_grid", str, "")
    try:
        l1 = tuple(float(v) for v in g1.split(",") if v.strip())
        l2 = tuple(float(v) for v in g2.split(",") if v.strip())
        grid = GridSpec(lambda1=l1, lambda2=l2)
    except ValueError as ex:
        raise ConfigError(f"bad [tune] grid: {ex}") from ex

    rec = _load_record(cfg, data_path)
    cap = cfg.get("battery", "capacity_ah", float, required=True)
    meta = BatteryMeta(capacity_ah=cap, initial_soc=float(rec.soc[0]))
    result = grid_search(rec, meta, grid, cfg.id_config(), jobs=jobs)

    lines = [f"# {_header(cfg)}",
             "lambda1,lambda2,rmse_v,vaf_pct,converged,failure"]
    for l1v, l2v, r, v, conv, fail in result.table:
        lines.append(f"{l1v:.6g},{l2v:.6g},{r:.10g},{v:.10g},{int(conv)},{fail}")
    _atomic_write(Path(out_path), "\n".join(lines) + "\n")
    print(f"best lambda1 = {result.best_lambda1:.6g}, "
          f"lambda2 = {result.best_lambda2:.6g} "
          f"(rmse {result.best_report.rmse * 1e3:.4g} mV)")
    _print_summary(result.best_report)
    return EXIT_OK


def cmd_montecarlo(cfg: RunConfig, out_dir: str, jobs=1, seed_override=None,
                   verbose=False) -> int:
    params = cfg.sim_params()
    duration = cfg.get("simulation", "duration_s", float, 3600.0)
    ts = cfg.get("simulation", "ts", float, 1.0)
    amp = cfg.get("simulation", "amplitude_a", float, 2.0)
    z0 = cfg.get("battery", "initial_soc", float, required=True)
    runs = cfg.get("experiment", "runs", int, 20)
    noise = cfg.get("experiment", "noise_std", float, 1e-4)
    seed = seed_override if seed_override is not None else \
        cfg.get("experiment", "seed", int, 0)

    profile = gen_drive_cycle(duration, ts, seed, amp)
    result = monte_carlo(params, sim_ocv(), profile, runs, noise,
                         cfg.id_config(), initial_soc=z0,
                         base_seed=seed + 1, jobs=jobs)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, rep in enumerate(result.reports):
        _atomic_write(out / f"run_{k:03d}.json", _report_json(cfg, rep))

    truth_vals = {"r0": params.r0, "r1": params.r1, "r2": params.r2,
                  "c1": params.c1, "c2": params.c2,
                  "tau1": params.tau1, "tau2": params.tau2}
    lines = [f"# {_header(cfg)}", "parameter,truth,mean,std"]
    for name, mean, std in zip(result.param_names, result.param_mean,
                               result.param_std):
        lines.append(f"{name},{truth_vals[name]:.10g},{mean:.10g},{std:.10g}")
    _atomic_write(out / "parameter_stats.csv", "\n".join(lines) + "\n")

    spread = [f"# {_header(cfg)}",
              "run,r0,r1,r2,c1,c2,tau1,tau2,rmse_v,vaf_pct"]
    for k, rep in enumerate(result.reports):
        p = rep.params
        spread.append(f"{k},{p.r0:.10g},{p.r1:.10g},{p.r2:.10g},"
                      f"{p.c1:.10g},{p.c2:.10g},{p.tau1:.10g},{p.tau2:.10g},"
                      f"{rep.rmse:.10g},{rep.vaf:.10g}")
    _atomic_write(out / "parameter_spread.csv", "\n".join(spread) + "\n")

    band = [f"# {_header(cfg)}", "soc,ocv_mean_v,ocv_2sigma_v"]
    for z, m, b in zip(result.ocv_grid, result.ocv_mean, result.ocv_band):
        band.append(f"{z:.10g},{m:.10g},{b:.10g}")
    _atomic_write(out / "ocv_band.csv", "\n".join(band) + "\n")

    print(f"{len(result.reports)}/{runs} runs succeeded; "
          f"mean vaf = {result.vaf_mean:.4f} %, "
          f"mean rmse = {result.rmse_mean * 1e3:.4g} mV")
    for k, msg in result.failures:
        print(f"run {k} failed: {msg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="battid",
        description="battery circuit and OCV curve identification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, out_help="output path"):
        p.add_argument("--config", required=True, help="config file (INI)")
        if data:
            p.add_argument("--data", required=True, help="input CSV")
        p.add_argument("--out", required=True, help=out_help)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="override [experiment] seed")
        p.add_argument("--verbose", action="store_true")

    common(sub.add_parser("simulate", help="generate synthetic data"),
           out_help="output CSV")
    common(sub.add_parser("identify", help="fit circuit and OCV to data"),
           data=True, out_help="report JSON")
    common(sub.add_parser("tune", help="grid-search regularization weights"),
           data=True, out_help="score table CSV")
    common(sub.add_parser("montecarlo", help="repeat identification over "
                          "noise realizations"), out_help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(Path(args.config))
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, seed_override=args.seed,
                                verbose=args.verbose)
        if args.command == "identify":
            return cmd_identify(cfg, args.data, args.out,
                                verbose=args.verbose)
        if args.command == "tune":
            return cmd_tune(cfg, args.data, args.out, jobs=args.jobs,
                            verbose=args.verbose)
        if args.command == "montecarlo":
            return cmd_montecarlo(cfg, args.out, jobs=args.jobs,
                                  seed_override=args.seed,
                                  verbose=args.verbose)
        return EXIT_CONFIG
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as ex:
        print(f"data error: {ex}", file=sys.stderr)
        return EXIT_DATA
    except BattidError as ex:
        from .errors import (
            AllSolvesFailed,
            ComplexTimeConstants,
            DegenerateColumn,
            DegenerateP,
            NumericalFailure,
            SingularSystem,
            SvdFailure,
        )

        numeric = (NumericalFailure, SvdFailure, SingularSystem,
                   ComplexTimeConstants, DegenerateP, DegenerateColumn,
                   AllSolvesFailed)
        code = EXIT_NUMERIC if isinstance(ex, numeric) else EXIT_DATA
        kind = "numerical" if code == EXIT_NUMERIC else "data"
        print(f"{kind} error: {type(ex).__name__}: {ex}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
