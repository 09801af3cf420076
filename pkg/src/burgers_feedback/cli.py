"""Command-line driver: ``burgers-feedback {simulate,convergence,decay}``.

Runs are configured by a plain ``key = value`` file (``#`` starts a comment)
plus ``--set key=value`` overrides. Results are CSV files written to
``<output_dir>/<subcommand>/<run_name>/``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .assembly import BoundaryParams, assemble_mass, assemble_stiffness
from .convergence import StudyPlan, build_mesh, run_study
from .diagnostics import NonPositiveNorm, fit_decay_rate, norm_report
from .models import ProblemSpec, control_trace
from .stepper import SolverError, ThetaConfig, run_simulation

log = logging.getLogger("burgers_feedback")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

DEFAULTS = {
    "dimension": "1",
    "nu": "0.1",
    "w_d": "1",
    "c0": "0.1",
    "c1": "0.1",
    "c2": "0.1",
    "theta": "1",
    "n": "30",
    "M": "100",
    "T": "1",
    "initial_condition": "example1",
    "controlled": "true",
    "output_dir": "results",
    "run_name": "",
    "newton_tol": "1e-12",
    "newton_max_iter": "25",
    "sample_every": "10",
    # convergence
    "tables": "table1,table2,table3,table4,table5",
    "h_levels": "4,8,16,32,64",
    "h_levels_controls": "8,16,32,64,128",
    "k_levels": "8,16,32,64,128,256",
    "k_levels_cn": "40,80,160,320,640,1280",
    "reference_factor": "8",
    "control_time": "final",
    # decay
    "sweeps": "gains,nu,theta",
    "gains_values": "0.1,0.5,1",
    "nu_values": "0.1,0.5,1",
    "theta_values": "0.5,0.75,1",
}

KNOWN_TABLES = ("table1", "table2", "table3", "table4", "table5", "table2d")
KNOWN_SWEEPS = ("gains", "nu", "theta")


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def preset_text(name: str) -> str:
    try:
        return resources.files("burgers_feedback.presets").joinpath(f"{name}.cfg").read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown preset {name!r}") from exc


@dataclass
class RunConfig:
    """Validated configuration. ``raw`` keeps every key as given."""

    raw: dict[str, str]
    problem: ProblemSpec = field(init=False)
    theta_config: ThetaConfig = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        unknown = set(self.raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            params = BoundaryParams(
                nu=self.get_float("nu"), w_d=self.get_float("w_d"),
                c0=self.get_float("c0"), c1=self.get_float("c1"), c2=self.get_float("c2"),
            )
            self.problem = ProblemSpec(
                dimension=self.get_int("dimension"),
                params=params,
                controlled=self.get_bool("controlled"),
                initial_condition=self.raw["initial_condition"],
            )
            self.theta_config = ThetaConfig.from_final_time(
                self.get_float("theta"), self.get_float("T"), self.get_int("M"),
                newton_tol=self.get_float("newton_tol"),
                newton_max_iter=self.get_int("newton_max_iter"),
            )
            self.n = self.get_int("n")
            if self.n < 1:
                raise ValueError("n must be positive")
            if self.get_int("sample_every") < 1:
                raise ValueError("sample_every must be positive")
            if self.get_int("reference_factor") < 1:
                raise ValueError("reference_factor must be positive")
            for key in ("h_levels", "h_levels_controls", "k_levels", "k_levels_cn"):
                self.int_list(key)
            for key in ("gains_values", "nu_values", "theta_values"):
                self.float_list(key)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        bad = [t for t in self.get_list("tables") if t not in KNOWN_TABLES]
        if bad:
            raise ConfigError(f"unknown tables: {', '.join(bad)}")
        bad = [s for s in self.get_list("sweeps") if s not in KNOWN_SWEEPS]
        if bad:
            raise ConfigError(f"unknown sweeps: {', '.join(bad)}")
        if self.raw["control_time"] not in ("final", "max"):
            raise ConfigError("control_time must be 'final' or 'max'")

    @classmethod
    def load(cls, config_path=None, preset=None, overrides=()) -> RunConfig:
        values = dict(DEFAULTS)
        if preset:
            values.update(parse_config_text(preset_text(preset), f"preset {preset}"))
        if config_path:
            try:
                text = Path(config_path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
            values.update(parse_config_text(text, str(config_path)))
        for item in overrides:
            values.update(parse_config_text(item, "--set"))
        return cls(values)

    def get_float(self, key) -> float:
        try:
            return float(self.raw[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {self.raw[key]!r}") from None

    def get_int(self, key) -> int:
        try:
            return int(self.raw[key])
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {self.raw[key]!r}") from None

    def get_bool(self, key) -> bool:
        value = self.raw[key].lower()
        if value in ("1", "true", "yes", "on"):
            return True
        if value in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {self.raw[key]!r}")

    def get_list(self, key) -> list[str]:
        return [item.strip() for item in self.raw[key].split(",") if item.strip()]

    def int_list(self, key) -> list[int]:
        try:
            return [int(v) for v in self.get_list(key)]
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated integers") from None

    def float_list(self, key) -> list[float]:
        try:
            return [float(v) for v in self.get_list(key)]
        except ValueError:
            raise ConfigError(f"{key}: expected comma-separated numbers") from None

    def with_values(self, **changes) -> RunConfig:
        raw = dict(self.raw)
        raw.update({k: str(v) for k, v in changes.items()})
        return RunConfig(raw)

    def run_dir(self, subcommand: str) -> Path:
        name = self.raw["run_name"] or time.strftime("%Y%m%d-%H%M%S")
        path = Path(self.raw["output_dir"]) / subcommand / name
        path.mkdir(parents=True, exist_ok=True)
        return path


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def cmd_simulate(config: RunConfig, out: Path) -> int:
    problem = config.problem
    mesh = build_mesh(problem.dimension, config.n)
    try:
        trajectory = run_simulation(problem, mesh, config.theta_config)
    except SolverError as exc:
        partial = getattr(exc, "trajectory", None)
        if partial is not None:
            _write_simulation(config, mesh, partial, out)
        print(f"solver failure at step {getattr(exc, 'step', '?')}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_simulation(config, mesh, trajectory, out)
    return EXIT_OK


def _write_simulation(config: RunConfig, mesh, trajectory, out: Path) -> None:
    mass, stiffness = assemble_mass(mesh), assemble_stiffness(mesh)
    times = trajectory.times
    with np.errstate(over="ignore", invalid="ignore"):
        reports = [norm_report(mesh, W, mass, stiffness) for W in trajectory.states]
    write_csv(out / "norms.csv", ["t", "l2", "h1", "linf"],
              ([t, r.l2, r.h1, r.linf] for t, r in zip(times, reports)))

    trace = control_trace(config.problem, mesh, trajectory.states, times)
    if mesh.dim == 1:
        write_csv(out / "controls.csv", ["t", "v0", "v1"], zip(times, trace.v0, trace.v1))
    else:
        write_csv(out / "controls.csv", ["t", "v2_l2"], zip(times, trace.v2_boundary_l2))

    every = config.get_int("sample_every")
    last = len(trajectory.states) - 1
    samples = sorted(set(range(0, last + 1, every)) | {last})
    if mesh.dim == 1:
        header, coords = ["t", "node", "x", "w"], mesh.nodes[:, None]
    else:
        header, coords = ["t", "node", "x", "y", "w"], mesh.vertices
    rows = (
        [times[n], i, *coords[i], trajectory.states[n][i]]
        for n in samples
        for i in range(mesh.num_nodes)
    )
    write_csv(out / "states.csv", header, rows)

    write_csv(
        out / "report.csv",
        ["step", "newton_iterations", "final_residual_norm", "converged"],
        ([r.step, r.newton_iterations, r.final_residual_norm, r.converged]
         for r in trajectory.reports),
    )


def _table_rows(rows, columns, theta=None):
    for row in rows:
        values = [] if theta is None else [theta]
        values.append(row.resolution)
        for col in columns:
            values += [row.errors.get(col), row.orders.get(col)]
        yield values


def _table_header(columns, with_theta=False):
    header = ["theta"] if with_theta else []
    header.append("resolution")
    for col in columns:
        header += [f"err_{col}", f"oc_{col}"]
    return header


def cmd_convergence(config: RunConfig, out: Path) -> int:
    problem = config.problem
    theta = config.get_float("theta")
    T = config.get_float("T")
    M = config.get_int("M")
    common = dict(problem=problem, T=T, reference_factor=config.get_int("reference_factor"),
                  control_time=config.raw["control_time"])
    tables = config.get_list("tables")
    cache = {}

    def study(key, plan):
        if key not in cache:
            cache[key] = run_study(plan)
        return cache[key]

    failed = False
    for table in tables:
        if table in ("table1", "table2", "table2d"):
            levels = config.int_list("h_levels_controls" if table == "table2" else "h_levels")
            plan = StudyPlan("spatial", levels, M, theta, **common)
            rows = study((table == "table2", "spatial"), plan)
            if table == "table1":
                columns = ["l2", "linf"]
            elif table == "table2":
                columns = ["v0", "v1"]
            else:
                columns = ["l2", "linf", "v2_l2"] if problem.controlled else ["l2", "linf"]
            write_csv(out / f"{table}.csv", _table_header(columns), _table_rows(rows, columns))
        else:
            column = {"table3": "linf", "table4": "v0", "table5": "v1"}[table]
            all_rows = []
            for th, key in ((1.0, "k_levels"), (0.5, "k_levels_cn")):
                plan = StudyPlan("temporal", config.int_list(key), config.n, th, **common)
                rows = study(("temporal", th), plan)
                all_rows += list(_table_rows(rows, [column], theta=th))
            write_csv(out / f"{table}.csv", _table_header([column], True), all_rows)
        failed |= any(r.failure for rows in cache.values() for r in rows)
    return EXIT_SOLVER if failed else EXIT_OK


def _check_dimension(config: RunConfig, tables):
    dim = config.problem.dimension
    for table in tables:
        if (table == "table2d") != (dim == 2):
            raise ConfigError(f"{table} is not available for dimension {dim}")


def cmd_decay(config: RunConfig, out: Path) -> int:
    rows = []
    gain_keys = ("c0", "c1") if config.problem.dimension == 1 else ("c2",)
    for sweep in config.get_list("sweeps"):
        for value in config.float_list(f"{sweep}_values"):
            if sweep == "gains":
                variant = config.with_values(**{k: value for k in gain_keys})
            else:
                variant = config.with_values(**{sweep: value})
            mesh = build_mesh(variant.problem.dimension, variant.n)
            try:
                trajectory = run_simulation(variant.problem, mesh, variant.theta_config)
                fit = fit_decay_rate(trajectory)
            except SolverError as exc:
                print(f"solver failure in {sweep}={value}: {exc}", file=sys.stderr)
                return EXIT_SOLVER
            except NonPositiveNorm as exc:
                print(f"decay fit failed in {sweep}={value}: {exc}", file=sys.stderr)
                return EXIT_SOLVER
            rows.append([sweep, value, fit.alpha_hat, fit.residual])
    write_csv(out / "decay.csv", ["sweep", "value", "alpha_hat", "fit_residual"], rows)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "convergence": cmd_convergence, "decay": cmd_decay}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burgers-feedback",
        description="Theta-scheme FEM for Burgers' equation with boundary feedback.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--preset", help="bundled preset (example1, example2)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig.load(args.config, args.preset, args.overrides)
        if args.command == "convergence":
            _check_dimension(config, config.get_list("tables"))
        out = config.run_dir(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = COMMANDS[args.command](config, out)
    if code == EXIT_OK:
        print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
