"""Batch front end: ``sp4bvp {solve,expand,verify,sweep,oracle-check} --config run.ini``.

Exit status: 0 when everything requested succeeded, 1 when a check fails
(the failing checks are named on stderr), 2 for configuration errors.
Log verbosity comes from the ``SP4BVP_LOG_LEVEL`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import warnings
from functools import partial
from pathlib import Path

import numpy as np

from . import fem, greens
from .config import RunConfig, load_config
from .decomposition import BoundConstants, build, choose_M, eval_expansion, layer_forcing
from .errors import ConfigError, Sp4Error
from .svg import line_plot
from .verify import _map, measure_remainder, run_checks

log = logging.getLogger("sp4bvp")

COMMANDS = ("solve", "expand", "verify", "sweep", "oracle-check")
LOG_ENV = "SP4BVP_LOG_LEVEL"
ORACLE_TERMS = 6
ORACLE_TOL = 1e-8
ORACLE_RANDOM_POINTS = 8


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)  # + 0.0 folds -0.0 into 0.0
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: Path, header, rows) -> None:
    """Comma-separated, ``.`` decimal, header row, full float precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _split_tolerances(cfg: RunConfig) -> tuple[dict[str, float], float]:
    tol = dict(cfg.tolerances)
    return tol, tol.pop("oracle_tol", ORACLE_TOL)


# -- commands -------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out: Path, jobs: int, seed: int) -> int:
    """Reference solutions for every (eps, p): samples of u, u', u''."""
    problem = cfg.problem()
    lam0 = fem.default_lambda0(problem)
    rows, summary = [], []
    for eps in cfg.eps_list:
        for p in cfg.degrees:
            mesh = fem.build_layer_mesh(eps, p, lam0)
            sol = fem.solve(problem, eps, mesh, p)
            for x, u, du, d2u in sol.samples(fem.sample_points(mesh, 20)):
                rows.append([eps, p, x, u, du, d2u])
            summary.append([eps, p, mesh.n_elements, mesh.transition[0], mesh.transition[1],
                            sol.error_estimate, sol.condition])
    write_csv(out / "solve.csv", ["eps", "p", "x", "u", "du", "d2u"], rows)
    write_csv(out / "solve_summary.csv",
              ["eps", "p", "elements", "tau_left", "tau_right", "error_estimate", "condition"], summary)
    print(f"wrote {len(rows)} samples for {len(summary)} solves to {out / 'solve.csv'}")
    return 0


def cmd_expand(cfg: RunConfig, out: Path, jobs: int, seed: int) -> int:
    """Decomposition terms and sampled partial sums for every eps."""
    problem = cfg.problem()
    consts = BoundConstants.from_problem(problem)
    index = []
    for k, eps in enumerate(cfg.eps_list):
        mc = choose_M(eps, consts)
        if cfg.M_override is None and mc.degenerate:
            print(f"eps={eps:g}: degenerate regime, expansion skipped (q={consts.q:.4g} < eps)")
            index.append([eps, "", "", 1])
            continue
        M = mc.M if cfg.M_override is None else cfg.M_override
        d = build(problem, eps, M, consts)
        name = f"expansion_{k:02d}.csv"
        (out / name).write_text(d.to_csv())
        xs = np.linspace(0.0, 1.0, 201)
        sm, le, ri = eval_expansion(d, xs)
        write_csv(out / f"expansion_values_{k:02d}.csv", ["x", "smooth", "left", "right", "total"],
                  zip(xs, sm, le, ri, sm + le + ri))
        index.append([eps, M, name, 0])
        print(f"eps={eps:g}: M={M}, wrote {name}")
    write_csv(out / "expansion_index.csv", ["eps", "M", "file", "degenerate"], index)
    return 0


def _verify(cfg: RunConfig, out: Path, jobs: int):
    tol, _ = _split_tolerances(cfg)
    report = run_checks(cfg.problem(), cfg.eps_list, checks=cfg.checks, N=cfg.N, M_cap=cfg.M_cap,
                        tolerances=tol, jobs=jobs)
    (out / "report.txt").write_text(report.to_text())
    for c in report.checks:
        (out / f"check_{c.name}.csv").write_text(c.to_csv())
    return report


def _finish(report) -> int:
    for c in report.checks:
        print(f"{c.name}: {c.status}")
    if report.overall != "pass":
        print("failing checks: " + ", ".join(report.failing()), file=sys.stderr)
        return 1
    return 0


def cmd_verify(cfg: RunConfig, out: Path, jobs: int, seed: int) -> int:
    return _finish(_verify(cfg, out, jobs))


def _energy_row(problem, degrees, eps: float) -> list[float]:
    """Energy error for each degree against a reference of degree max + 10."""
    lam0 = fem.default_lambda0(problem)
    p_ref = max(degrees) + 10
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fem.ConditioningWarning)
        ref = fem.solve(problem, eps, fem.build_layer_mesh(eps, p_ref, lam0), p_ref, estimate=False)
        errs = []
        for p in degrees:
            u_h = fem.solve(problem, eps, fem.build_layer_mesh(eps, p, lam0), p, estimate=False)
            errs.append(fem.energy_error(u_h, partial(ref, n=0), partial(ref, n=1), partial(ref, n=2),
                                         breaks=ref.mesh.nodes))
    return errs


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int, seed: int) -> int:
    """Verification plus a combined convergence table and two SVG plots."""
    problem = cfg.problem()
    report = _verify(cfg, out, jobs)
    rem = {}
    rec = next((c for c in report.checks if c.name == "remainder"), None)
    if rec is not None:
        for r in rec.rows:
            rem[r[0]] = (r[2], r[4] + r[5], r[8])
    else:
        consts = BoundConstants.from_problem(problem)
        pts = _map(partial(measure_remainder, problem, consts=consts, M_cap=cfg.M_cap), cfg.eps_list, jobs)
        for pt in pts:
            if pt is not None:
                rem[pt.eps] = (pt.M, pt.measured, int(pt.kept))
    energy = _map(partial(_energy_row, problem, cfg.degrees), cfg.eps_list, jobs)
    header = ["eps", "inv_eps", "M", "remainder", "remainder_kept"] + [f"energy_p{p}" for p in cfg.degrees]
    rows = []
    for eps, errs in zip(cfg.eps_list, energy):
        M, val, kept = rem.get(eps, ("", float("nan"), 0))
        rows.append([eps, 1.0 / eps, M, val, kept] + errs)
    write_csv(out / "sweep.csv", header, rows)
    kept = sorted((1.0 / e, v[1]) for e, v in rem.items() if v[2])
    (out / "sweep_remainder.svg").write_text(line_plot(
        [("remainder", [k for k, _ in kept], [v for _, v in kept])],
        "Remainder vs 1/eps", "1/eps", "max-norm + boundary terms"))
    (out / "sweep_energy.svg").write_text(line_plot(
        [(f"eps={eps:g}", cfg.degrees, errs) for eps, errs in zip(cfg.eps_list, energy)],
        "Energy error vs polynomial degree", "p", "energy error"))
    return _finish(report)


def cmd_oracle_check(cfg: RunConfig, out: Path, jobs: int, seed: int) -> int:
    """Layer terms from the symbolic engine against the Green's-function quadrature."""
    problem = cfg.problem()
    _, tol = _split_tolerances(cfg)
    M = cfg.M_override if cfg.M_override is not None else ORACLE_TERMS - 1
    d = build(problem, cfg.eps_list[0], M)
    rng = np.random.default_rng(seed)
    s = np.unique(np.concatenate([np.linspace(0.0, 30.0, 61), rng.uniform(0.0, 30.0, ORACLE_RANDOM_POINTS)]))
    rows, worst = [], 0.0
    print(f"{'side':>5} {'j':>2} {'max |layer - oracle|':>22} {'max |layer|':>12}")
    for side, terms in (("left", d.left), ("right", d.right)):
        for j in range(1, min(ORACLE_TERMS, M + 1) + 1):
            F, g1 = layer_forcing(d, side, j)
            hp = greens.HalfLineProblem(lambda t, F=F: F(np.asarray(t, dtype=float)), g1, terms[0].kappa)
            ref = greens.solve_halfline_many(hp, s)
            val = terms[j](s)
            diff = np.abs(val - ref)
            worst = max(worst, float(diff.max()))
            rows.extend([side, j, si, vi, ri, di] for si, vi, ri, di in zip(s, val, ref, diff))
            print(f"{side:>5} {j:>2} {diff.max():22.3e} {np.abs(val).max():12.3e}")
    write_csv(out / "oracle_check.csv", ["side", "j", "s", "layer", "oracle", "abs_diff"], rows)
    if worst > tol:
        print(f"failing checks: oracle_check (max difference {worst:.3e} > {tol:g})", file=sys.stderr)
        return 1
    return 0


HANDLERS = {"solve": cmd_solve, "expand": cmd_expand, "verify": cmd_verify, "sweep": cmd_sweep,
            "oracle-check": cmd_oracle_check}


def run(command: str, cfg: RunConfig, out: Path | None = None, jobs: int = 1, seed: int = 0) -> int:
    """Run one command; returns the exit status."""
    if command not in HANDLERS:
        raise ValueError(f"unknown command {command!r}")
    out = Path(out) if out is not None else cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir {out} is not writable: {exc.strerror}") from None
    return HANDLERS[command](cfg, out, jobs, seed)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sp4bvp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for eps-parallel work")
    ap.add_argument("--seed", type=int, default=0, help="seed for random sample points")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        return run(args.command, cfg, Path(args.out) if args.out else None, args.jobs, args.seed)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return 2
    except Sp4Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
