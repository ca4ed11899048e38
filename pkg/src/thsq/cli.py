"""Command-line front end: thsq run / validate / version.

One scenario per invocation; outputs are deterministic delimited text
(identical config -> byte-identical files). Exit status 0 on success,
1 on a config error, 2 on a numerical failure. The THSQ_LOG environment
variable (quiet | info | debug) controls diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dyson
from .control import (
    BilinearSystem,
    ControlField,
    ControlProblem,
    OptimizerOptions,
    build_toy_model,
    evaluate_problem,
    optimize,
)
from .errors import ConfigError, IoError, ThsqError, ValidationError, VerificationFailed
from .evolution import (
    StatePair,
    TimeGrid,
    Trajectory,
    norm_drift,
    propagate_f,
    propagate_metric,
    propagate_p,
    propagate_ths,
)
from .linalg import fro
from .metric import solve_metric
from .scenario import Scenario, parse_config

log = logging.getLogger("thsq")

_FMT = "{:.17g}"  # >= 15 significant digits; round-trips float64


def _setup_logging():
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("THSQ_LOG", "quiet").lower(), logging.WARNING
    )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers.clear()
    log.addHandler(handler)
    log.setLevel(level)


def emit_trajectory(traj: Trajectory, path) -> None:
    """Write a state trajectory as comma-separated text.

    Header: t, re_psi_0, im_psi_0, ..., re_dual_0, im_dual_0, ..., s_norm.
    """
    if traj.kets is None:
        raise ValueError("trajectory carries no states; use emit_metrics")
    n = traj.kets.shape[1]
    header = ["t"]
    header += [f"{p}_psi_{i}" for i in range(n) for p in ("re", "im")]
    header += [f"{p}_dual_{i}" for i in range(n) for p in ("re", "im")]
    header += ["s_norm"]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(", ".join(header) + "\n")
            for i in range(traj.samples):
                row = [traj.times[i]]
                for x in traj.kets[i]:
                    row += [x.real, x.imag]
                for x in traj.duals[i]:
                    row += [x.real, x.imag]
                row.append(traj.s_norms[i])
                fh.write(", ".join(_FMT.format(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write trajectory to {path}: {exc}") from exc


def emit_matrix(M: np.ndarray, path, label: str = "theta") -> None:
    """Write one matrix flattened row-major as re/im column pairs."""
    n = M.shape[0]
    header = [f"{p}_{label}_{i}_{j}" for i in range(n) for j in range(n) for p in ("re", "im")]
    row = []
    for i in range(n):
        for j in range(n):
            row += [M[i, j].real, M[i, j].imag]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(", ".join(header) + "\n")
            fh.write(", ".join(_FMT.format(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write matrix to {path}: {exc}") from exc


def emit_metrics(traj: Trajectory, out_dir: Path) -> None:
    """One file per sampled metric, plus the sample-time index."""
    if traj.metrics is None:
        raise ValueError("trajectory carries no metrics")
    try:
        with open(out_dir / "theta_times.csv", "w", encoding="utf-8") as fh:
            fh.write("index, t\n")
            for k, t in enumerate(traj.times):
                fh.write(f"{k}, " + _FMT.format(t) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {out_dir}/theta_times.csv: {exc}") from exc
    for k in range(traj.samples):
        emit_matrix(traj.metrics[k], out_dir / f"theta_{k:04d}.csv")


def _grid_with_steps(grid: TimeGrid, steps: int) -> TimeGrid:
    try:
        return TimeGrid(t_end=grid.t_end, steps=steps, samples=grid.samples, t_start=grid.t_start)
    except ValueError:
        return TimeGrid(t_end=grid.t_end, steps=steps, samples=None, t_start=grid.t_start)


def _generator_from(scn: Scenario):
    if scn.generator is not None:
        return scn.generator
    return dyson.dressed_generator(scn.hamiltonian, scn.map, hbar=scn.hbar)


def _run_evolve_p(scn: Scenario, out: Path) -> dict:
    traj = propagate_p(
        scn.hamiltonian,
        scn.state,
        scn.grid,
        hbar=scn.hbar,
        norm_tol=scn.tol("norm_tol", 1e-8),
        herm_tol=scn.tol("herm_tol", 1e-10),
    )
    emit_trajectory(traj, out / "trajectory.csv")
    return {"norm_drift": norm_drift(traj)}


def _run_evolve_f(scn: Scenario, out: Path) -> dict:
    traj = propagate_f(scn.operator, scn.state, scn.grid, hbar=scn.hbar)
    emit_trajectory(traj, out / "trajectory.csv")
    return {"final_norm": float(traj.s_norms[-1])}


def _initial_pair(scn: Scenario) -> StatePair:
    if scn.dual is not None:
        return StatePair(ket=scn.state, dual=scn.dual)
    theta0 = scn.theta0
    if theta0 is None:
        theta0 = dyson.metric_at(scn.map, scn.grid.t_start)
    return StatePair.from_metric(scn.state, theta0)


def _run_evolve_ths(scn: Scenario, out: Path) -> dict:
    traj = propagate_ths(
        _generator_from(scn),
        _initial_pair(scn),
        scn.grid,
        hbar=scn.hbar,
        norm_tol=scn.tol("norm_tol", 1e-8),
    )
    emit_trajectory(traj, out / "trajectory.csv")
    return {"norm_drift": norm_drift(traj)}


def _run_evolve_metric(scn: Scenario, out: Path) -> dict:
    theta0 = scn.theta0
    if theta0 is None:
        theta0 = dyson.metric_at(scn.map, scn.grid.t_start)
    traj = propagate_metric(
        _generator_from(scn),
        theta0,
        scn.grid,
        hbar=scn.hbar,
        tol_pd=scn.tol("tol_pd", 1e-10),
    )
    emit_metrics(traj, out)
    return {"max_resym": traj.meta["max_resym"]}


def _run_solve_metric(scn: Scenario, out: Path) -> dict:
    tol_real = scn.tolerances.get("tol_real")
    cand = solve_metric(scn.operator, scn.weights, tol_real=tol_real)
    emit_matrix(cand.theta, out / "theta_0000.csv")
    return {"residual": cand.residual, "min_eig": cand.min_eig}


def _control_problem(scn: Scenario, seed: int) -> ControlProblem:
    c = scn.control
    drift = scn.matrices[c["drift"]]
    controls = tuple(scn.matrices[name] for name in c["controls"])
    theta1 = scn.matrices[c["theta1"]] if c["theta1"] else None
    initial = scn.states[c["initial"]]
    target = scn.states[c["target"]]

    opt_cfg = dict(c["optimizer"])
    guess_scale = float(opt_cfg.pop("guess_scale", 1.0))
    options = OptimizerOptions(**opt_cfg)

    horizon = scn.grid.t_end - scn.grid.t_start
    if c["guess"] == "random":
        rng = np.random.default_rng(seed)
        options.guess = tuple(
            ControlField(
                horizon=horizon,
                amplitudes=rng.uniform(-guess_scale, guess_scale, options.intervals),
                u_max=options.u_max,
            )
            for _ in controls
        )
    elif c["guess"] is not None:
        options.guess = tuple(scn.fields[name] for name in c["guess"])

    if c["w"] is not None:
        toy = build_toy_model(drift, controls[0], theta1, scn.fields[c["w"]])
        return toy.problem(initial, target, scn.grid, options=options, hbar=scn.hbar)
    system = BilinearSystem(drift=drift, controls=controls, kind=c["kind"], theta1=theta1)
    return ControlProblem(
        system=system,
        initial=initial,
        target=target,
        grid=scn.grid,
        map=scn.map,
        hbar=scn.hbar,
        options=options,
    )


def _run_control(scn: Scenario, out: Path, seed: int) -> dict:
    problem = _control_problem(scn, seed)
    fields, history = optimize(problem)
    fid, traj = evaluate_problem(problem, fields, norm_tol=scn.tol("norm_tol", 1e-8))
    emit_trajectory(traj, out / "trajectory.csv")
    try:
        with open(out / "fields.csv", "w", encoding="utf-8") as fh:
            cols = ["interval", "t_lo", "t_hi"] + [f"u_{k}" for k in range(len(fields))]
            fh.write(", ".join(cols) + "\n")
            m = max(f.intervals for f in fields)
            width = fields[0].horizon / m
            for j in range(m):
                row = [float(j), j * width, (j + 1) * width]
                row += [f.amplitudes[j * f.intervals // m] for f in fields]
                fh.write(", ".join(_FMT.format(v) for v in row) + "\n")
        with open(out / "history.csv", "w", encoding="utf-8") as fh:
            fh.write("iteration, fidelity\n")
            for i, f in enumerate(history):
                fh.write(f"{i}, " + _FMT.format(f) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write control outputs: {exc}") from exc
    return {
        "fidelity": fid,
        "norm_drift": norm_drift(traj),
        "iterations": len(history) - 1,
    }


def _run_verify(scn: Scenario, out: Path) -> dict:
    grid = scn.grid
    h = scn.hamiltonian
    norm_tol = scn.tol("norm_tol", 1e-8)

    G = dyson.dressed_generator(h, scn.map, hbar=scn.hbar)
    theta0 = dyson.metric_at(scn.map, grid.t_start)
    pair0 = StatePair.from_metric(scn.state, theta0)
    traj_s = propagate_ths(G, pair0, grid, hbar=scn.hbar, norm_tol=norm_tol)

    psi_p0 = dyson.evaluate_map(scn.map, grid.t_start) @ scn.state
    traj_p = propagate_p(
        h, psi_p0, grid, hbar=scn.hbar, norm_tol=norm_tol, herm_tol=scn.tol("herm_tol", 1e-10)
    )

    equiv = np.empty(traj_s.samples)
    for i, t in enumerate(traj_s.times):
        omega = dyson.evaluate_map(scn.map, t)
        equiv[i] = np.linalg.norm(omega @ traj_s.kets[i] - traj_p.kets[i])

    traj_m = propagate_metric(G, theta0, grid, hbar=scn.hbar, tol_pd=scn.tol("tol_pd", 1e-10))
    metric_res = max(
        fro(traj_m.metrics[i] - dyson.metric_at(scn.map, t))
        for i, t in enumerate(traj_m.times)
    )

    drift = norm_drift(traj_s)
    try:
        with open(out / "verify.csv", "w", encoding="utf-8") as fh:
            fh.write("t, equivalence_residual, s_norm\n")
            for i in range(traj_s.samples):
                fh.write(
                    ", ".join(
                        _FMT.format(v)
                        for v in (traj_s.times[i], equiv[i], traj_s.s_norms[i])
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoError(f"cannot write verify.csv: {exc}") from exc

    equiv_tol = scn.tol("equiv_tol", 1e-6)
    metric_tol = scn.tol("metric_tol", 1e-6)
    worst = float(equiv.max())
    if worst > equiv_tol:
        raise VerificationFailed(
            f"three-way equivalence residual {worst:.3e} exceeds {equiv_tol:.1e}"
        )
    if metric_res > metric_tol:
        raise VerificationFailed(
            f"metric Cauchy residual {metric_res:.3e} exceeds {metric_tol:.1e}"
        )
    if drift > norm_tol:
        raise VerificationFailed(f"S-norm drift {drift:.3e} exceeds {norm_tol:.1e}")
    return {"equiv_residual": worst, "metric_residual": metric_res, "norm_drift": drift}


_RUNNERS = {
    "evolve-p": lambda scn, out, seed: _run_evolve_p(scn, out),
    "evolve-f": lambda scn, out, seed: _run_evolve_f(scn, out),
    "evolve-ths": lambda scn, out, seed: _run_evolve_ths(scn, out),
    "evolve-metric": lambda scn, out, seed: _run_evolve_metric(scn, out),
    "solve-metric": lambda scn, out, seed: _run_solve_metric(scn, out),
    "control-optimize": _run_control,
    "verify": lambda scn, out, seed: _run_verify(scn, out),
}


def run_scenario(
    scn: Scenario,
    out_dir,
    steps: int | None = None,
    seed: int = 0,
) -> dict:
    """Dispatch a validated scenario and write its outputs.

    Returns the summary mapping (mode, n, per-mode figures); the caller
    owns printing and the exit status.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    if steps is not None:
        scn.grid = _grid_with_steps(scn.grid, steps)
    log.info("running scenario %s in mode %s", scn.name, scn.mode)
    t0 = time.perf_counter()
    figures = _RUNNERS[scn.mode](scn, out, seed)
    wall = time.perf_counter() - t0
    summary = {"mode": scn.mode, "name": scn.name, "n": scn.dim}
    summary.update(figures)
    summary["status"] = "ok"
    summary["wall_time_s"] = round(wall, 6)
    return summary


def _summary_line(summary: dict, with_wall: bool = True) -> str:
    parts = []
    for key, value in summary.items():
        if key == "wall_time_s" and not with_wall:
            continue
        if isinstance(value, float):
            parts.append(f"{key}={value:.9g}")
        else:
            parts.append(f"{key}={value}")
    return " ".join(parts)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors (exit 1)
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="thsq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("--config", required=True, help="path to the scenario file")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--steps", type=int, default=None, help="override grid steps")
    run.add_argument("--seed", type=int, default=0, help="seed for random field guesses")

    val = sub.add_parser("validate", help="parse and validate a scenario config")
    val.add_argument("--config", required=True, help="path to the scenario file")

    sub.add_parser("version", help="print the version")
    return parser


def _read_config(path: str) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "version":
            print(f"thsq {__version__}")
            return 0
        if args.command == "validate":
            scn = _read_config(args.config)
            print(f"ok name={scn.name} mode={scn.mode} n={scn.dim}")
            return 0
        scn = _read_config(args.config)
        summary = run_scenario(scn, args.out, steps=args.steps, seed=args.seed)
        print(_summary_line(summary))
        try:
            with open(Path(args.out) / "summary.log", "a", encoding="utf-8") as fh:
                fh.write(_summary_line(summary, with_wall=False) + "\n")
        except OSError as exc:
            raise IoError(f"cannot append summary.log: {exc}") from exc
        return 0
    except ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ThsqError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
