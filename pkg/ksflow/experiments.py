# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

import configparser
import glob
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from ksflow.analysis import (
    DecayFit,
    ScatteringResult,
    fit_decay,
    scattering_extract,
    verify_gamma_domination,
    verify_pointwise_rho_bound,
    verify_xyrc,
)
from ksflow.constants import (
    APRIORI_MIN_REFERENCE_TIME,
    APRIORI_RATIO_BOUND,
    BOUNDARY_MASS_LIMIT,
    DECAY_RATE_TOLERANCE,
    EXIT_CONFIG,
    EXIT_MONITOR,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_VIOLATION,
    FIT_MIN_SAMPLES,
    FIT_WINDOW,
    LONG_RANGE,
    RUN_SUITES,
    SCATTERING_CAUCHY_START,
    SCATTERING_RESIDUAL_LIMIT,
    SNAPSHOT_SUFFIX,
)
from ksflow.dynamics import AprioriReport, EvolutionState, NormSeries, Schedule, apriori_monitor, evolve
from ksflow.errors import (
    ConfigError,
    GridMismatchError,
    IntegrityError,
    KsflowError,
    MonitorAlarm,
    NumericalFailure,
)
from ksflow.grid import Grid, PotentialSpec
from ksflow.initial_data import mixture_state
from ksflow.nonlinearity import SelfInteraction, check_admissibility, classify_range
from ksflow.setup import setup
from ksflow.snapshot import read_snapshot, write_snapshot
from ksflow.suites import run_suite
from ksflow.utils import format_float, join_list, parse_list, relative_difference, sha256_hex

logger = logging.getLogger(__name__)

SERIES_FILE = "series.csv"
REPORT_FILE = "report.txt"
CONFIG_FILE = "config.ini"
SNAPSHOT_DIR = "snapshots"
FINAL_SNAPSHOT = "final" + SNAPSHOT_SUFFIX

# fitted column -> expected decay exponent per dimension
DECAY_RATES = {"gamma_inf": 1.0, "L2r_Linf_c": 0.5}

# config section -> ExperimentConfig fields, in canonical order
SECTIONS = {
    "grid": ("d", "n", "L"),
    "interaction": ("lambda1", "potential", "lambda2", "beta"),
    "initial": ("rank", "seed", "width_min", "width_max", "velocity_max", "center_fraction", "snapshot"),
    "schedule": ("t_final", "dt", "record_every", "dyadic_snapshots", "dyadic_start"),
    "suites": ("run",),
    "output": ("dir", "exploratory"),
    "numerics": ("rank_max", "compress_tol", "boundary_limit"),
}

# option name -> field name where they differ
OPTION_FIELDS = {("suites", "run"): "suites", ("output", "dir"): "out_dir"}


@dataclass
class ExperimentConfig:
    """One experiment, read from a flat INI file.

    Exponents (beta, the riesz exponent) stay text until the interaction
    is built so that the canonical rendering keeps them exact.
    """

    d: int = 1
    n: int = 512
    L: float = 64.0
    lambda1: float = 0.0
    potential: str = "none"
    lambda2: float = 0.0
    beta: str = ""
    rank: int = 1
    seed: int = 0
    width_min: float = 1.0
    width_max: float = 1.5
    velocity_max: float = 2.0
    center_fraction: float = 0.125
    snapshot: str = ""
    t_final: float = 1.0
    dt: float = 1e-3
    record_every: int = 100
    dyadic_snapshots: bool = False
    dyadic_start: float = 1.25
    suites: Tuple[str, ...] = ()
    out_dir: str = "ksflow-run"
    exploratory: bool = False
    rank_max: int = 64
    compress_tol: float = 1e-12
    boundary_limit: float = BOUNDARY_MASS_LIMIT
    source: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        unknown = [name for name in self.suites if name not in RUN_SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}, expected a subset of {list(RUN_SUITES)}")
        if self.rank < 1:
            raise ConfigError("rank must be positive")
        if not 0 < self.width_min <= self.width_max:
            raise ConfigError("widths must satisfy 0 < width_min <= width_max")
        try:
            self.grid
            self.interaction
            self.schedule
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(str(err)) from err

    @property
    def grid(self) -> Grid:
        return Grid(self.d, self.n, self.L)

    @property
    def interaction(self) -> SelfInteraction:
        return SelfInteraction(
            lambda1=self.lambda1,
            potential=PotentialSpec.from_string(self.potential),
            lambda2=self.lambda2,
            beta=self.beta or None,
        )

    @property
    def schedule(self) -> Schedule:
        return Schedule(
            t_final=self.t_final,
            dt=self.dt,
            record_every=self.record_every,
            dyadic_snapshots=self.dyadic_snapshots,
            dyadic_start=self.dyadic_start,
        )

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser, source: Optional[str] = None):
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for option in parser[section]:
                if option not in SECTIONS[section]:
                    raise ConfigError(f"unknown option {option!r} in [{section}]")
                name = OPTION_FIELDS.get((section, option), option)
                kind = types[name]
                try:
                    if kind in (bool, "bool"):
                        values[name] = parser.getboolean(section, option)
                    elif kind in (int, "int"):
                        values[name] = parser.getint(section, option)
                    elif kind in (float, "float"):
                        values[name] = parser.getfloat(section, option)
                    elif name == "suites":
                        values[name] = tuple(parse_list(parser.get(section, option)))
                    else:
                        values[name] = parser.get(section, option).strip()
                except ValueError as err:
                    raise ConfigError(f"[{section}] {option}: {err}") from err
        return cls(source=source, **values)

    @classmethod
    def from_string(cls, text: str, source: Optional[str] = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text, source=source or "<string>")
        except configparser.Error as err:
            raise ConfigError(f"config parse error: {err}") from err
        return cls.from_parser(parser, source)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as handle:
                text = handle.read()
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        return cls.from_string(text, source=path)

    def to_string(self) -> str:
        """Canonical rendering; every option is written, in section order."""
        values = asdict(self)
        lines = []
        for section, options in SECTIONS.items():
            lines.append(f"[{section}]")
            for option in options:
                value = values[OPTION_FIELDS.get((section, option), option)]
                if isinstance(value, bool):
                    text = str(value).lower()
                elif isinstance(value, float):
                    text = format_float(value)
                elif isinstance(value, tuple):
                    text = join_list(value)
                else:
                    text = str(value)
                lines.append(f"{option} = {text}")
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return sha256_hex(self.to_string().encode("utf-8"))

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ExperimentConfig(**values)


def _write_lines(path: str, rows: List[str]) -> None:
    with open(path, "w") as handle:
        handle.write("\n".join(rows) + "\n")


def _emit(rows: List[str]) -> None:
    for row in rows:
        print(row)


def _snapshot_path(out_dir: str, t: float) -> str:
    return os.path.join(out_dir, SNAPSHOT_DIR, f"t{t:012.6f}{SNAPSHOT_SUFFIX}")


def _decay_rows(series: NormSeries, t_final: float) -> Tuple[List[str], Dict[str, DecayFit]]:
    t0, t1 = FIT_WINDOW
    t1 = min(t1, t_final)
    rows, fits = [], {}
    for column in DECAY_RATES:
        try:
            fit = fit_decay(series.column("t"), series.column(column), t0, t1)
        except ValueError as err:
            logger.warning("no decay fit of %s: %s", column, err)
            rows.append(f"decay column={column} skipped={err}")
            continue
        fits[column] = fit
        rows.append(f"decay column={column} {fit.to_row()}")
    return rows, fits


def _conservation_rows(series: NormSeries, spectra) -> List[str]:
    trace = series.column("trace")
    energy = series.column("energy")
    rows = [
        f"trace_drift={format_float(relative_difference(trace[-1], trace[0]))}",
        f"energy_drift={format_float(relative_difference(energy[-1], energy[0]))}",
    ]
    if spectra:
        first, last = spectra[0][1], spectra[-1][1]
        size = min(len(first), len(last))
        drift = max((relative_difference(a, b) for a, b in zip(first[:size], last[:size])), default=0.0)
        rows.append(f"eigenvalue_drift={format_float(drift)}")
    return rows


def _apriori_rows(series: NormSeries, spec: SelfInteraction) -> Tuple[List[str], Optional[AprioriReport]]:
    times = series.column("t")
    if times[-1] < APRIORI_MIN_REFERENCE_TIME:
        logger.warning("run ends before t=%g, no a priori check", APRIORI_MIN_REFERENCE_TIME)
        return [f"apriori skipped=run ends at t={format_float(times[-1])}"], None
    reports = [apriori_monitor(series, b, APRIORI_MIN_REFERENCE_TIME, spec) for b in (1, 2)]
    return [row for report in reports for row in report.to_rows()], reports[0]


def _scattering_rows(
    snapshots: Dict[float, object], spec: SelfInteraction, accepted: bool
) -> Tuple[List[str], Optional[ScatteringResult]]:
    if len(snapshots) < 2:
        logger.warning("scattering needs two snapshots, have %d", len(snapshots))
        return ["scattering skipped=fewer than two snapshots"], None
    result = scattering_extract(snapshots, spec)
    rows = [f"scattering accepted_class={accepted}"]
    rows += [f"scattering {row}" for row in result.to_rows()]
    rows.append(f"scattering relative_final_residual={format_float(result.relative_final_residual)}")
    return rows, result


@dataclass
class AcceptanceCheck:
    """One pass/fail criterion of a short-range run."""

    name: str
    value: float
    target: str
    passed: bool

    def to_row(self) -> str:
        return (
            f"acceptance check={self.name} value={format_float(self.value)} "
            f"target={self.target} passed={self.passed}"
        )


def acceptance_checks(
    d: int,
    fits: Dict[str, DecayFit],
    apriori: Optional[AprioriReport] = None,
    scattering: Optional[ScatteringResult] = None,
) -> List[AcceptanceCheck]:
    """Decay rates, W1 growth and profile convergence of a short-range run.

    The rates are judged against d for gamma_inf and d/2 for L2r_Linf_c
    within DECAY_RATE_TOLERANCE; missing diagnostics yield no check.
    """
    checks = []
    for column, fit in fits.items():
        target = DECAY_RATES[column] * d
        error = abs(fit.nu - target) / target
        checks.append(
            AcceptanceCheck(
                f"decay_{column}",
                fit.nu,
                f"{format_float(target)}+-{format_float(100 * DECAY_RATE_TOLERANCE)}%",
                error <= DECAY_RATE_TOLERANCE,
            )
        )
    if apriori is not None:
        checks.append(
            AcceptanceCheck(
                f"apriori_W{apriori.b}",
                apriori.sup_ratio,
                f"<={format_float(APRIORI_RATIO_BOUND)}",
                apriori.bounded,
            )
        )
    if scattering is not None:
        tail = [v for t, v in scattering.cauchy if t >= SCATTERING_CAUCHY_START - 1e-9]
        if len(tail) >= 2:
            checks.append(
                AcceptanceCheck(
                    "scattering_cauchy",
                    max(b / a for a, b in zip(tail, tail[1:])),
                    "<1",
                    all(b < a for a, b in zip(tail, tail[1:])),
                )
            )
        residual = scattering.relative_final_residual
        checks.append(
            AcceptanceCheck(
                "scattering_residual",
                residual,
                f"<={format_float(SCATTERING_RESIDUAL_LIMIT)}",
                residual <= SCATTERING_RESIDUAL_LIMIT,
            )
        )
    return checks


def _inequality_rows(kappa, t: float) -> Tuple[List[str], int]:
    entries = [verify_xyrc(kappa, s) for s in (4.0, np.inf)]
    entries += [verify_gamma_domination(kappa, s) for s in (4.0, np.inf)]
    entries.append(verify_pointwise_rho_bound(kappa, t))
    rows, violations = [], 0
    for entry in entries:
        row = entry.to_row()
        violations += entry.violated
        rows.append("inequality " + " ".join(f"{k}={v}" for k, v in row.items()))
    return rows, violations


def analyse_run(
    series: NormSeries,
    snapshots: Dict[float, object],
    config: ExperimentConfig,
    spectra=None,
    final=None,
) -> Tuple[List[str], int]:
    """Post-run diagnostics for the configured suites.

    Short-range runs that are not exploratory also get acceptance rows.
    Returns the report rows and the number of exact-inequality violations.
    """
    spec = config.interaction
    range_class = classify_range(spec, config.d)
    accepted = range_class != LONG_RANGE
    rows = _conservation_rows(series, spectra or [])
    violations = 0
    fits, apriori, scattering = {}, None, None
    for suite in config.suites:
        if suite == "decay":
            decay_rows, fits = _decay_rows(series, config.t_final)
            rows += decay_rows
        elif suite == "apriori":
            apriori_rows, apriori = _apriori_rows(series, spec)
            rows += apriori_rows
        elif suite == "scattering":
            scattering_rows, scattering = _scattering_rows(snapshots, spec, accepted)
            rows += scattering_rows
        elif suite == "inequalities" and final is not None:
            inequality_rows, violations = _inequality_rows(final.kappa, final.t)
            rows += inequality_rows
    if accepted and not config.exploratory:
        checks = acceptance_checks(config.d, fits, apriori, scattering)
        if checks:
            rows += [check.to_row() for check in checks]
            failed = [check.name for check in checks if not check.passed]
            if failed:
                logger.warning("acceptance checks failed: %s", ", ".join(failed))
            rows.append(f"acceptance passed={not failed}")
    return rows, violations


def cmd_run(
    config: ExperimentConfig,
    exploratory: bool = False,
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> int:
    """Runs one experiment and writes series.csv, snapshots and report.txt."""
    if seed is not None:
        config = config.replace(seed=int(seed))
    if out is not None:
        config = config.replace(out_dir=out)
    exploratory = exploratory or config.exploratory
    out_dir = config.out_dir
    setup(rank_max=config.rank_max, compress_tol=config.compress_tol)

    spec, grid = config.interaction, config.grid
    admissibility = check_admissibility(spec, config.d)
    range_class = classify_range(spec, config.d)
    header = [
        f"config_hash={config.config_hash()}",
        f"interaction={spec}",
        f"range_class={range_class}",
        f"exploratory={exploratory}",
    ] + admissibility.to_rows()
    if not admissibility.admissible and not exploratory:
        logger.error("interaction is not admissible in d=%d: %s", config.d, admissibility.reasons)
        _emit(header)
        return EXIT_CONFIG
    if range_class == LONG_RANGE and not exploratory:
        logger.warning("long-range interaction, run tagged exploratory")
        exploratory = True
        header[3] = "exploratory=True"

    try:
        os.makedirs(os.path.join(out_dir, SNAPSHOT_DIR), exist_ok=True)
        with open(os.path.join(out_dir, CONFIG_FILE), "w") as handle:
            handle.write(config.to_string())
    except OSError as err:
        logger.error("output directory %s is not writable: %s", out_dir, err)
        return EXIT_CONFIG

    try:
        if config.snapshot:
            kappa0, snapshot = read_snapshot(config.snapshot)
            grid.check_same(kappa0.grid)
            t0 = snapshot.time
            logger.info("restarting from %s at t=%g", config.snapshot, t0)
        else:
            _, kappa0 = mixture_state(
                grid,
                config.rank,
                config.seed,
                (config.width_min, config.width_max),
                config.velocity_max,
                config.center_fraction,
            )
            t0 = 0.0

        def on_snapshot(t, kappa):
            write_snapshot(_snapshot_path(out_dir, t), kappa, t, config.seed, config.config_hash())

        trajectory = evolve(kappa0, spec, config.schedule, t0, on_snapshot, config.boundary_limit)
    except GridMismatchError as err:
        logger.error("snapshot does not match the configured grid: %s", err)
        return EXIT_CONFIG
    except MonitorAlarm as err:
        logger.error("monitor alarm: %s", err)
        return EXIT_MONITOR
    except IntegrityError as err:
        logger.error("corrupt snapshot %s: %s", config.snapshot, err)
        return EXIT_NUMERIC
    except (NumericalFailure, KsflowError) as err:
        logger.error("numerical failure: %s", err)
        return EXIT_NUMERIC
    except (ValueError, OSError) as err:
        logger.error("cannot start the run: %s", err)
        return EXIT_CONFIG

    final = trajectory.final
    trajectory.series.to_csv(os.path.join(out_dir, SERIES_FILE))
    write_snapshot(
        os.path.join(out_dir, SNAPSHOT_DIR, FINAL_SNAPSHOT), final.kappa, final.t, config.seed, config.config_hash()
    )
    rows, violations = analyse_run(
        trajectory.series, trajectory.snapshots, config.replace(exploratory=exploratory), trajectory.spectra, final
    )
    if violations:
        logger.warning("%d exact inequality violations at t=%g", violations, final.t)
    report = header + rows
    _write_lines(os.path.join(out_dir, REPORT_FILE), report)
    _emit(report)
    logger.info("run finished at t=%g, results in %s", final.t, out_dir)
    return EXIT_OK


def cmd_verify(
    suite: str, seed: int, samples: int, out: str, snapshot: Optional[str] = None
) -> int:
    """Runs a verify suite; exit 5 on any violation of an exact property."""
    extra = []
    if snapshot:
        try:
            kappa, _ = read_snapshot(snapshot)
        except IntegrityError as err:
            logger.error("corrupt snapshot %s: %s", snapshot, err)
            print(f"snapshot={snapshot} error={err}")
            return EXIT_NUMERIC
        except OSError as err:
            logger.error("cannot read snapshot %s: %s", snapshot, err)
            return EXIT_CONFIG
        extra.append(kappa)
    if samples < 1:
        logger.error("samples must be positive")
        return EXIT_CONFIG
    try:
        result = run_suite(suite, seed, samples, extra)
    except NumericalFailure as err:
        logger.error("numerical failure in %s: %s", suite, err)
        return EXIT_NUMERIC
    except ValueError as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    result.write(out)
    _emit(result.summary_rows())
    return EXIT_OK if result.passed else EXIT_VIOLATION


def cmd_fit(series_path: str, column: str, t0: float = FIT_WINDOW[0], t1: float = FIT_WINDOW[1]) -> int:
    """Fits value ~ t^(-nu) to one column of a series CSV."""
    try:
        series = NormSeries.from_csv(series_path)
        fit = fit_decay(series.column("t"), series.column(column), t0, t1)
    except OSError as err:
        logger.error("cannot read %s: %s", series_path, err)
        return EXIT_CONFIG
    except (KeyError, ValueError) as err:
        logger.error("no fit of %s: %s", column, err)
        return EXIT_CONFIG
    print(f"column={column} {fit.to_row()}")
    return EXIT_OK


def load_snapshots(out_dir: str) -> Dict[float, object]:
    """Dyadic snapshots of a run directory keyed by time."""
    snapshots = {}
    pattern = os.path.join(out_dir, SNAPSHOT_DIR, "t*" + SNAPSHOT_SUFFIX)
    for path in sorted(glob.glob(pattern)):
        kappa, snapshot = read_snapshot(path)
        snapshots[snapshot.time] = kappa
    return snapshots


def cmd_report(out_dir: str) -> int:
    """Re-derives the report of a finished run directory."""
    try:
        config = ExperimentConfig.from_file(os.path.join(out_dir, CONFIG_FILE))
        series = NormSeries.from_csv(os.path.join(out_dir, SERIES_FILE))
        snapshots = load_snapshots(out_dir)
        final = None
        final_path = os.path.join(out_dir, SNAPSHOT_DIR, FINAL_SNAPSHOT)
        if os.path.exists(final_path):
            kappa, snapshot = read_snapshot(final_path)
            final = EvolutionState(kappa, snapshot.time, config.dt)
    except IntegrityError as err:
        logger.error("corrupt snapshot in %s: %s", out_dir, err)
        return EXIT_NUMERIC
    except (ConfigError, OSError, ValueError) as err:
        logger.error("cannot read run directory %s: %s", out_dir, err)
        return EXIT_CONFIG
    if len(series) < FIT_MIN_SAMPLES:
        logger.warning("series has only %d rows", len(series))
    rows, _ = analyse_run(series, snapshots, config, final=final)
    report = [f"config_hash={config.config_hash()}", f"range_class={classify_range(config.interaction, config.d)}"]
    report += rows
    _write_lines(os.path.join(out_dir, REPORT_FILE), report)
    _emit(report)
    return EXIT_OK
