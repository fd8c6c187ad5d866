"""Command-line driver for the bi-parabolic experiments.

Subcommands ``run``, ``convergence``, ``stability`` and ``grids`` each write
plain CSV tables plus a ``meta.txt`` with every flag into ``--out``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import StabilityReport, check_estimate, l2_error, observed_order
from .biparabolic import BiparabolicProblem, assemble, exact_solutions, snapshots_csv
from .schemes import RHS_SAMPLINGS, SCHEMES, Trajectory, run_scheme
from .timegrid import TimeGrid, fmt, grid_stats, random_grid, uniform_grid

log = logging.getLogger("opdiff")


@dataclass
class RunConfig:
    alpha: float = 0.01
    h: float = 2e-3
    T: float = 0.1
    N: int = 100
    sigma: float = 0.5
    scheme: str = "vector"
    grid: str = "uniform"
    q: float = 0.5
    seed: int = 0
    rhs_sampling: str = "point"
    snapshots: Optional[list] = None
    out: str = "out"

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.grid not in ("uniform", "random"):
            raise ValueError(f"unknown grid kind {self.grid!r}")
        if self.rhs_sampling not in RHS_SAMPLINGS:
            raise ValueError(f"unknown rhs sampling {self.rhs_sampling!r}")
        if self.scheme == "three-level-uniform" and self.grid != "uniform":
            raise ValueError("scheme three-level-uniform requires --grid uniform")
        if self.scheme == "three-level-nonuniform" and self.sigma != 0.5:
            raise ValueError("scheme three-level-nonuniform is defined for sigma=0.5 only")
        if not self.alpha > 0.0:
            raise ValueError("time stepping needs alpha > 0")
        if not self.T > 0.0 or self.N < 1:
            raise ValueError("need T > 0 and N >= 1")

    def snapshot_times(self) -> list:
        return list(self.snapshots) if self.snapshots else [self.T]


def make_grid(cfg: RunConfig, N: Optional[int] = None) -> TimeGrid:
    N = cfg.N if N is None else N
    if cfg.grid == "uniform":
        return uniform_grid(cfg.T, N)
    return random_grid(cfg.T, N, cfg.q, cfg.seed)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _meta(cfg: RunConfig, command: str, extra: Optional[dict] = None) -> str:
    lines = [f"opdiff {__version__}", f"command = {command}"]
    for k, v in asdict(cfg).items():
        if isinstance(v, float):
            v = fmt(v)
        elif isinstance(v, list):
            v = ",".join(fmt(t) for t in v)
        lines.append(f"{k} = {v}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def _simulate(bp: BiparabolicProblem, cfg: RunConfig, grid: TimeGrid):
    problem = bp.as_problem()
    with np.errstate(over="ignore", invalid="ignore"):
        traj = run_scheme(problem, grid, cfg.scheme, cfg.sigma, cfg.rhs_sampling)
        report = check_estimate(traj, problem)
    return traj, report


def _error_csv(bp: BiparabolicProblem, traj: Trajectory) -> tuple[str, float]:
    grid = traj.grid
    U = exact_solutions(bp, grid.levels)
    rows = ["n,t_n,tau_n,eps"]
    eps = 0.0
    for n, t in enumerate(grid.levels):
        eps = l2_error(traj.y[n], U[n], bp.h)
        tau = "" if n == 0 else fmt(grid.steps[n - 1])
        rows.append(f"{n},{fmt(t)},{tau},{fmt(eps)}")
    return "\n".join(rows) + "\n", eps


def run_experiment(cfg: RunConfig) -> tuple[dict, StabilityReport]:
    cfg.validate()
    out = Path(cfg.out)
    bp = assemble(cfg.alpha, cfg.h)
    grid = make_grid(cfg)
    traj, report = _simulate(bp, cfg, grid)

    levels = grid.levels
    idx = [int(np.argmin(np.abs(levels - t))) for t in cfg.snapshot_times()]
    snap_t = [float(levels[i]) for i in idx]
    exact = exact_solutions(bp, snap_t)
    error_text, eps_T = _error_csv(bp, traj)

    files = {
        "grid": out / "grid.csv",
        "solution": out / "solution.csv",
        "exact": out / "exact.csv",
        "error": out / "error.csv",
        "stability": out / "stability.csv",
        "meta": out / "meta.txt",
    }
    _write(files["grid"], grid.to_csv())
    _write(files["solution"], snapshots_csv(bp.x, snap_t, [traj.y[i] for i in idx]))
    _write(files["exact"], snapshots_csv(bp.x, snap_t, list(exact)))
    _write(files["error"], error_text)
    _write(files["stability"], report.to_csv())
    _write(files["meta"], _meta(cfg, "run", {
        "eps_T": fmt(eps_T),
        "stability_verdict": report.verdict,
        "stability_precondition": report.precondition or "",
        "scheme_flags": "; ".join(traj.flags),
    }))
    return files, report


def run_convergence(cfg: RunConfig, N_list: Sequence[int]) -> tuple[dict, list]:
    if len(N_list) < 2:
        raise ValueError("convergence needs at least two N values")
    cfg.validate()
    out = Path(cfg.out)
    bp = assemble(cfg.alpha, cfg.h)
    u_T = exact_solutions(bp, [cfg.T])[0]
    errors, reports = [], []
    for N in sorted(N_list):
        grid = make_grid(cfg, N)
        traj, report = _simulate(bp, replace(cfg, N=N), grid)
        errors.append((N, l2_error(traj.y[-1], u_T, bp.h)))
        reports.append(report)
        _write(out / "grids" / f"grid_N{N}.csv", grid.to_csv())
    orders = observed_order(errors)
    rows = ["N,eps_T,order"]
    for i, (N, e) in enumerate(errors):
        rows.append(f"{N},{fmt(e)},{'' if i == 0 else fmt(orders[i - 1])}")
    files = {"convergence": out / "convergence.csv", "meta": out / "meta.txt"}
    _write(files["convergence"], "\n".join(rows) + "\n")
    _write(files["meta"], _meta(cfg, "convergence", {
        "N_list": ",".join(str(N) for N, _ in errors),
        "stability_verdicts": ",".join(r.verdict for r in reports),
    }))
    return files, reports


def run_stability(cfg: RunConfig, sigma_list: Sequence[float]) -> tuple[dict, list]:
    out = Path(cfg.out)
    bp = assemble(cfg.alpha, cfg.h)
    grid = None
    reports = []
    rows = ["sigma,scheme,all_ok,max_violation"]
    files = {}
    for sigma in sigma_list:
        c = replace(cfg, sigma=float(sigma))
        c.validate()
        grid = grid or make_grid(c)
        _, report = _simulate(bp, c, grid)
        reports.append(report)
        name = f"stability_sigma_{fmt(sigma)}.csv"
        files[name] = out / name
        _write(files[name], report.to_csv())
        rows.append(f"{fmt(sigma)},{cfg.scheme},{'true' if report.all_ok else 'false'},"
                    f"{fmt(report.max_violation)}")
    files["summary"] = out / "stability_summary.csv"
    files["grid"] = out / "grid.csv"
    files["meta"] = out / "meta.txt"
    _write(files["summary"], "\n".join(rows) + "\n")
    _write(files["grid"], grid.to_csv())
    _write(files["meta"], _meta(cfg, "stability", {
        "sigma_list": ",".join(fmt(s) for s in sigma_list),
        "modes": ",".join(r.verdict for r in reports),
    }))
    return files, reports


def run_grids(cfg: RunConfig) -> dict:
    grid = make_grid(cfg)
    out = Path(cfg.out)
    stats = grid_stats(grid)
    files = {"grid": out / "grid.csv", "meta": out / "meta.txt"}
    _write(files["grid"], grid.to_csv())
    _write(files["meta"], _meta(cfg, "grids", {
        "min_step": fmt(stats.min_step),
        "max_step": fmt(stats.max_step),
        "max_adjacent_ratio": fmt(stats.max_adjacent_ratio),
    }))
    print(f"N={grid.N} min={fmt(stats.min_step)} max={fmt(stats.max_step)} "
          f"max_adjacent_ratio={fmt(stats.max_adjacent_ratio)}")
    return files


def _float_list(text: str) -> list:
    return [float(s) for s in text.split(",") if s.strip()]


def _int_list(text: str) -> list:
    return [int(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=0.01)
    common.add_argument("--h", type=float, default=2e-3)
    common.add_argument("--T", type=float, default=0.1)
    common.add_argument("--scheme", choices=SCHEMES, default="vector")
    common.add_argument("--grid", choices=("uniform", "random"), default="uniform")
    common.add_argument("--q", type=float, default=0.5)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--rhs-sampling", dest="rhs_sampling", choices=RHS_SAMPLINGS,
                        default="point")
    common.add_argument("--out", default="out")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="opdiff", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"opdiff {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="single experiment")
    run.add_argument("--N", type=int, default=100)
    run.add_argument("--sigma", type=float, default=0.5)
    run.add_argument("--snapshots", type=_float_list, default=None,
                     help="comma-separated times, default T")

    conv = sub.add_parser("convergence", parents=[common], help="error vs N sweep")
    conv.add_argument("--N", type=_int_list, default=[50, 100, 200],
                      help="comma-separated step counts")
    conv.add_argument("--sigma", type=float, default=0.5)

    stab = sub.add_parser("stability", parents=[common], help="stability monitor audit")
    stab.add_argument("--N", type=int, default=100)
    stab.add_argument("--sigma", type=_float_list, default=[0.5, 0.75, 1.0],
                      help="comma-separated weights")

    grids = sub.add_parser("grids", parents=[common], help="export a time grid")
    grids.add_argument("--N", type=int, default=100)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    base = dict(alpha=args.alpha, h=args.h, T=args.T, scheme=args.scheme, grid=args.grid,
                q=args.q, seed=args.seed, rhs_sampling=args.rhs_sampling, out=args.out)
    try:
        if args.command == "run":
            cfg = RunConfig(N=args.N, sigma=args.sigma, snapshots=args.snapshots, **base)
            files, report = run_experiment(cfg)
            reports = [report]
        elif args.command == "convergence":
            cfg = RunConfig(N=max(args.N), sigma=args.sigma, **base)
            files, reports = run_convergence(cfg, args.N)
        elif args.command == "stability":
            cfg = RunConfig(N=args.N, sigma=args.sigma[0], **base)
            files, reports = run_stability(cfg, args.sigma)
        else:
            cfg = RunConfig(N=args.N, **base)
            run_grids(cfg)
            return 0
    except (ValueError, OSError) as exc:
        print(f"opdiff: error: {exc}", file=sys.stderr)
        return 2
    for name, path in files.items():
        log.info("wrote %s", path)
    failed = [r for r in reports if not r.passed]
    if failed:
        for r in failed:
            print(f"opdiff: stability estimate violated: scheme={r.scheme} sigma={fmt(r.sigma)} "
                  f"max_violation={fmt(r.max_violation)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
