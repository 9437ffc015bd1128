"""Command-line entry point.

    nhllg run <config.yaml>
    nhllg check-mesh <meshfile>
    nhllg oracle-compare <config.yaml>

Relative output directories are placed under ``$NHLLG_OUTPUT_ROOT`` when it is set.
Exit codes: 0 ok, 2 config error, 3 solver failure, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigParseError, RunConfig, parse_config
from .fem import Operators, assemble_stiffness
from .io import read_snapshot, write_energy_csv, write_snapshot, write_spectral_csv
from .mesh import MeshError, check_sign_condition, generate_structured, read_mesh
from .spectral import SpectralBasis, SpectralBlowup, compare_to_fem, integrate, smooth_initial_1d
from .stepper import SolverConfig, StepFailure, skyrmion_initial, per_step_decay_margin, run
from .torque import SotParams, SttParams, make_sot, make_stt, make_zero

log = logging.getLogger("nhllg")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4
OUTPUT_ROOT_ENV = "NHLLG_OUTPUT_ROOT"

UNIT_NORM_TOL = 1e-12
TANGENCY_TOL = 1e-12
PYTHAGORAS_TOL = 1e-10
DECAY_SLACK = 1e-9


def build_mesh(cfg: RunConfig):
    if cfg.mesh.file is not None:
        return read_mesh(cfg.resolve(cfg.mesh.file))
    return generate_structured(cfg.mesh.bounds, cfg.mesh.subdivisions, cfg.mesh.diagonal_rule)


def build_model(cfg: RunConfig, dimension: int):
    t = cfg.torque
    if t.kind == "stt":
        if len(t.j) != dimension:
            raise ConfigParseError(f"must have {dimension} components", "torque.j")
        return make_stt(SttParams(t.lam, t.mu, tuple(t.j)))
    if t.kind == "sot":
        return make_sot(SotParams(tuple(t.c)), dimension)
    return make_zero(dimension)


def build_initial(cfg: RunConfig, mesh):
    i = cfg.initial
    if i.kind == "paper_skyrmion":
        if mesh.dimension != 2:
            raise ConfigParseError("paper_skyrmion is defined on a 2D domain", "initial.kind")
        return skyrmion_initial
    if i.kind == "smooth_1d":
        return smooth_initial_1d
    if i.kind == "constant":
        vec = np.array(i.vector, dtype=float)
        return np.tile(vec, (mesh.n_nodes, 1))
    _, coords, m = read_snapshot(cfg.resolve(i.path))
    if len(m) != mesh.n_nodes:
        raise ConfigParseError(f"file has {len(m)} nodes, mesh has {mesh.n_nodes}", "initial.path")
    return m


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.scheme
    return SolverConfig.from_horizon(
        s.T,
        s.steps,
        alpha=cfg.physics.alpha,
        beta=cfg.physics.beta,
        theta=s.theta,
        tol=s.tol,
        max_iter=s.max_iter,
        snapshot_interval=s.snapshot_interval,
        theta_override=s.theta_override,
        linear_solver=s.linear_solver,
    )


def output_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.output.dir)
    if not p.is_absolute():
        root = os.environ.get(OUTPUT_ROOT_ENV)
        p = Path(root) / p if root else p
    return p


def _oracle_difference(cfg: RunConfig, mesh, scfg: SolverConfig, model, snapshots):
    o = cfg.oracle
    (lo, hi), = cfg.mesh.bounds
    if lo != 0.0:
        raise ConfigParseError("the spectral oracle works on (0, L); set mesh.bounds to [[0, L]]", "mesh.bounds")
    basis = SpectralBasis(hi, o.modes, o.quadrature)
    initial = build_initial(cfg, mesh)
    if not callable(initial):
        raise ConfigParseError("oracle comparison needs an analytic initial condition", "initial.kind")
    traj = integrate(initial, basis, model, scfg, substeps=o.substeps)
    return compare_to_fem(traj, snapshots, o.times, mesh), traj


def run_experiment(cfg: RunConfig) -> int:
    out = output_dir(cfg)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(cfg)
    ops = Operators.build(mesh)
    quality = check_sign_condition(mesh, ops.stiffness)
    model = build_model(cfg, mesh.dimension)
    scfg = solver_config(cfg)
    initial = build_initial(cfg, mesh)

    oracle_times = set()
    if cfg.oracle.compare_oracle:
        for t in cfg.oracle.times:
            j = round(t / scfg.k)
            if abs(j * scfg.k - t) > 1e-9 or not 0 <= j <= scfg.J:
                raise ConfigParseError(f"time {t} is not a step time of this run", "oracle.times")
            oracle_times.add(j)
    kept = []

    def on_snapshot(s):
        if s.step % scfg.snapshot_interval == 0 or s.step == scfg.J:
            write_snapshot(snap_dir / f"step_{s.step:06d}.txt", s.time, mesh.nodes, s.m)
        if s.step in oracle_times:
            kept.append(s)

    report = {
        "mesh": {"dimension": mesh.dimension, "nodes": mesh.n_nodes, "elements": mesh.n_elements},
        "sign_condition": {
            "satisfied": quality.satisfies_sign_condition,
            "max_offdiagonal_stiffness": quality.max_offdiagonal_stiffness,
        },
        "torque": model.name,
        "steps": scfg.J,
        "k": scfg.k,
        "theta": scfg.theta,
    }
    t0 = time.time()
    status = EXIT_OK
    try:
        result = run(mesh, scfg, model, initial, ops=ops, on_snapshot=on_snapshot, keep_snapshots=False,
                     extra_snapshots=oracle_times)
        trace = result.trace
        report["completed"] = True
    except StepFailure as exc:
        log.error("%s", exc)
        trace = exc.partial.trace if exc.partial else None
        report["completed"] = False
        report["failure"] = {"category": exc.category, "message": str(exc)}
        status = EXIT_SOLVER if exc.category == "solver" else EXIT_INVARIANT
    report["runtime_seconds"] = time.time() - t0

    violations = []
    if trace is not None and len(trace):
        write_energy_csv(trace, out / "energy.csv")
        e = trace.array("exchange_energy")
        norm_err = float(trace.array("max_norm_err").max())
        tang = float(trace.array("max_tangency").max())
        pyth = float(trace.array("pythagoras_err").max())
        increases = int(np.sum(np.diff(e) > DECAY_SLACK))
        decay_required = model.is_zero and quality.satisfies_sign_condition
        strengthened = int(np.sum(per_step_decay_margin(trace, scfg) < -DECAY_SLACK)) if model.is_zero else None
        report["invariants"] = {
            "unit_norm_max_error": norm_err,
            "unit_norm_violations": int(np.sum(trace.array("max_norm_err") > UNIT_NORM_TOL)),
            "tangency_max": tang,
            "tangency_violations": int(np.sum(trace.array("max_tangency") > TANGENCY_TOL)),
            "pythagoras_max_error": pyth,
            "energy_increases": increases,
            "energy_decay_required": decay_required,
            "energy_decay_violations": increases if decay_required else 0,
            "strengthened_decay_violations": strengthened if decay_required else None,
            "initial_energy": float(e[0]),
            "final_energy": float(e[-1]),
        }
        inv = report["invariants"]
        if inv["unit_norm_violations"]:
            violations.append("unit_norm")
        if inv["tangency_violations"]:
            violations.append("tangency")
        if pyth > PYTHAGORAS_TOL:
            violations.append("pythagoras")
        if inv["energy_decay_violations"] or (decay_required and strengthened):
            violations.append("energy_decay")

    if cfg.oracle.compare_oracle and status == EXIT_OK:
        try:
            diff, traj = _oracle_difference(cfg, mesh, scfg, model, kept)
            write_spectral_csv(traj, out / "spectral.csv")
            report["oracle"] = {"times": list(cfg.oracle.times), "l2_difference": diff}
        except SpectralBlowup as exc:
            report["oracle"] = {"error": str(exc)}
            status = EXIT_SOLVER

    report["violations"] = violations
    if violations and status == EXIT_OK:
        status = EXIT_INVARIANT
    report["exit_status"] = status
    (out / "report.json").write_text(json.dumps(report, indent=2))
    return status


def check_mesh(path) -> int:
    try:
        mesh = read_mesh(path)
        mesh.validate()
        K = assemble_stiffness(mesh)
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    q = check_sign_condition(mesh, K)
    print(json.dumps({
        "dimension": mesh.dimension,
        "nodes": mesh.n_nodes,
        "elements": mesh.n_elements,
        "measure": float(mesh.measures().sum()),
        "max_offdiagonal_stiffness": q.max_offdiagonal_stiffness,
        "satisfies_sign_condition": q.satisfies_sign_condition,
        "min_angle": q.min_angle,
        "max_angle": q.max_angle,
    }, indent=2))
    return EXIT_OK if q.satisfies_sign_condition else EXIT_INVARIANT


def oracle_compare(cfg: RunConfig) -> int:
    """FEM run and spectral run side by side; prints the L2 difference at oracle.times."""
    if cfg.mesh.file is not None or cfg.mesh.dimension != 1:
        raise ConfigParseError("oracle-compare needs a generated 1D mesh", "mesh.dimension")
    mesh = build_mesh(cfg)
    model = build_model(cfg, 1)
    scfg = solver_config(cfg)
    steps = sorted({round(t / scfg.k) for t in cfg.oracle.times})
    if any(not 0 <= j <= scfg.J for j in steps):
        raise ConfigParseError("oracle time outside the run", "oracle.times")
    result = run(mesh, scfg, model, build_initial(cfg, mesh), extra_snapshots=steps)
    snaps = [s for s in result.snapshots if s.step in steps]
    diff, traj = _oracle_difference(cfg, mesh, scfg, model, snaps)
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_spectral_csv(traj, out / "spectral.csv")
    payload = {"times": list(cfg.oracle.times), "l2_difference": diff}
    (out / "oracle.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nhllg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a configured FEM experiment")
    p.add_argument("config")
    p = sub.add_parser("check-mesh", help="validate a mesh file and check the sign condition")
    p.add_argument("meshfile")
    p = sub.add_parser("oracle-compare", help="compare a 1D FEM run against the spectral oracle")
    p.add_argument("config")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "check-mesh":
        return check_mesh(args.meshfile)
    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            return run_experiment(cfg)
        return oracle_compare(cfg)
    except (ConfigParseError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SpectralBlowup as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
