"""Command-line interface: single solves, convergence studies, diagnostics."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import SpaceConfig
from .mesh import build_uniform_triangulation
from .problems import PROBLEM_NAMES, manufactured_problem
from .solver import TimeGrid, solve_evolutionary, solve_steady
from .study import StudyConfig, run_convergence_study
from .verify import (
    check_weak_identities,
    estimate_coercivity,
    estimate_infsup,
    evaluate_errors,
    incompressibility_residual,
    kernel_min_eigenvalue,
)

_STUDY_KEYS = (
    "problem", "elements", "mesh_sizes", "gamma", "alpha", "zeta", "sigma",
    "mu", "rho", "tau_rule", "t_final", "out_dir", "formats", "workers",
)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(","))


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--problem", default="steady_oseen_ex1", choices=PROBLEM_NAMES)
    p.add_argument("--elements", default="1,0,1,0,0",
                   help="degrees k,j,l,m,n (comma separated)")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--sigma", type=int, default=None, choices=(0, 1))
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)


def _space_config(args) -> SpaceConfig:
    k, j, l, m, n = _parse_ints(args.elements)
    kwargs = {}
    for name in ("gamma", "alpha", "zeta", "sigma", "mu", "rho"):
        value = getattr(args, name)
        if value is not None:
            kwargs[name] = value
    return SpaceConfig(k, j, l, m, n, **kwargs)


def _cmd_problems(args) -> int:
    for name in PROBLEM_NAMES:
        prob = manufactured_problem(name)
        kind = "steady" if prob.steady else "evolutionary"
        print(f"{name:26s} {kind}")
    return 0


def _cmd_solve(args) -> int:
    cfg = _space_config(args)
    problem = manufactured_problem(args.problem, mu=cfg.mu, rho=cfg.rho)
    mesh = build_uniform_triangulation(args.cells)
    if problem.steady:
        solution = solve_steady(mesh, cfg, problem)
    else:
        grid = TimeGrid.from_tau(args.tfinal, args.tau)
        solution = solve_evolutionary(mesh, cfg, problem, grid)
    report = evaluate_errors(mesh, cfg, solution, problem)
    print(f"problem      : {args.problem}")
    print(f"mesh         : {args.cells} x {args.cells} cells, "
          f"{mesh.n_elements} triangles, {mesh.n_edges} edges")
    print(f"energy error : {report.energy:.4e}")
    print(f"L2(u) error  : {report.l2_velocity_proj:.4e}  "
          f"(vs exact: {report.l2_velocity_true:.4e})")
    print(f"L2(p) error  : {report.l2_pressure_true:.4e}  "
          f"(vs projection: {report.l2_pressure_proj:.4e})")
    print(f"pressure mean: {solution.pressure_mean:.3e}")
    print(f"div residual : {incompressibility_residual(solution):.3e}")
    if args.dump is not None:
        _dump_solution(Path(args.dump), solution)
        print(f"solution dump: {args.dump}")
    return 0


def _dump_solution(path: Path, solution) -> None:
    """Plain-text dump: per-element interior and per-edge trace coefficients."""
    with path.open("w") as fh:
        vel = solution.velocity
        fh.write(f"# time {solution.time:.17g}\n")
        for t, block in enumerate(vel.interior):
            flat = " ".join(f"{v:.17g}" for v in block.ravel())
            fh.write(f"interior {t} {flat}\n")
        for e, block in enumerate(vel.traces):
            flat = " ".join(f"{v:.17g}" for v in block.ravel())
            fh.write(f"trace {e} {flat}\n")
        for t, block in enumerate(solution.pressure.coeffs):
            flat = " ".join(f"{v:.17g}" for v in block.ravel())
            fh.write(f"pressure {t} {flat}\n")


def _cmd_study(args) -> int:
    values = {}
    if args.config is not None:
        values.update(json.loads(Path(args.config).read_text()))
        unknown = set(values) - set(_STUDY_KEYS)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    if args.problem is not None:
        values["problem"] = args.problem
    if args.elements is not None:
        values["elements"] = _parse_ints(args.elements)
    if args.mesh is not None:
        values["mesh_sizes"] = _parse_ints(args.mesh)
    for name in ("gamma", "alpha", "zeta", "sigma", "mu", "rho", "workers"):
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    if args.tau_rule is not None:
        values["tau_rule"] = args.tau_rule
    if args.tfinal is not None:
        values["t_final"] = args.tfinal
    if args.out is not None:
        values["out_dir"] = args.out
    if args.format is not None:
        values["formats"] = ("csv", "md") if args.format == "both" else (args.format,)

    values.setdefault("problem", "steady_oseen_ex1")
    values.setdefault("elements", (1, 0, 1, 0, 0))
    values.setdefault("mesh_sizes", (8, 16, 32))
    values["elements"] = tuple(values["elements"])
    values["mesh_sizes"] = tuple(values["mesh_sizes"])
    if "formats" in values:
        values["formats"] = tuple(values["formats"])

    study = StudyConfig(**values)
    report = run_convergence_study(study)
    sys.stdout.write(report.markdown_text())
    if study.out_dir is not None:
        print(f"reports written to {study.out_dir}")
    return 0


def _cmd_verify(args) -> int:
    cfg = _space_config(args)
    mesh = build_uniform_triangulation(args.cells)
    problem = manufactured_problem(args.problem, mu=cfg.mu, rho=cfg.rho)
    failures = 0

    identities = check_weak_identities(mesh, cfg, trials=args.trials, seed=args.seed)
    ok = identities.passed
    failures += 0 if ok else 1
    print(f"[{'PASS' if ok else 'FAIL'}] weak-operator identities: "
          f"max residuals {identities.max_residual_identity1:.2e} / "
          f"{identities.max_residual_identity2:.2e} (tol {identities.tol:.1e})")

    lam = kernel_min_eigenvalue(mesh, cfg)
    ok = lam > 0
    failures += 0 if ok else 1
    print(f"[{'PASS' if ok else 'FAIL'}] energy-norm kernel: "
          f"min eigenvalue {lam:.3e} on the zero-trace subspace")

    beta_h = estimate_infsup(mesh, cfg)
    ok = beta_h > 0
    failures += 0 if ok else 1
    print(f"[{'PASS' if ok else 'FAIL'}] inf-sup constant: {beta_h:.4f}")

    coer = estimate_coercivity(mesh, cfg, problem.beta)
    ok = coer > 0
    failures += 0 if ok else 1
    print(f"[{'PASS' if ok else 'FAIL'}] coercivity margin (scaled): {coer:.3e}")

    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gwgflow",
        description="Generalized weak Galerkin solver for the Oseen equations "
        "on uniform triangulations of the unit square.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single solve with error report")
    _add_common(p_solve)
    p_solve.add_argument("--cells", type=int, default=8, help="cells per side")
    p_solve.add_argument("--tau", type=float, default=1e-2)
    p_solve.add_argument("--tfinal", type=float, default=1.0)
    p_solve.add_argument("--dump", default=None, help="write solution dump file")
    p_solve.set_defaults(func=_cmd_solve)

    p_study = sub.add_parser("study", help="convergence study over meshes")
    p_study.add_argument("--config", default=None, help="JSON file with StudyConfig fields")
    p_study.add_argument("--problem", default=None, choices=PROBLEM_NAMES)
    p_study.add_argument("--elements", default=None)
    p_study.add_argument("--mesh", default=None, help="cells per side list, e.g. 8,16,32,64")
    for name in ("gamma", "alpha", "zeta", "mu", "rho"):
        p_study.add_argument(f"--{name}", type=float, default=None)
    p_study.add_argument("--sigma", type=int, default=None, choices=(0, 1))
    p_study.add_argument("--tau-rule", dest="tau_rule", default=None,
                         help="h2 | fixed:<v> | list:<v,...>")
    p_study.add_argument("--tfinal", type=float, default=None)
    p_study.add_argument("--out", default=None)
    p_study.add_argument("--format", default=None, choices=("csv", "md", "both"))
    p_study.add_argument("--workers", type=int, default=None)
    p_study.set_defaults(func=_cmd_study)

    p_verify = sub.add_parser("verify", help="run the stability diagnostics")
    _add_common(p_verify)
    p_verify.add_argument("--cells", type=int, default=8)
    p_verify.add_argument("--trials", type=int, default=100)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=_cmd_verify)

    p_problems = sub.add_parser("problems", help="list the problem registry")
    p_problems.set_defaults(func=_cmd_problems)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
