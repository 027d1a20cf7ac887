"""Command line driver: problem -> distance profile -> index function -> checks.

Every stage reads its inputs from the output directory and writes its
artifacts there, so stages can be run one at a time or all at once with
``pipeline``. Exit status: 0 on success, 2 when the source inequality is
violated, 1 on any execution error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import problems
from .config import ConfigError, RunConfig, load_config, parse_config
from .distfun import DistanceProfile, distance_profile
from .indexfun import IndexFunction, index_from_distance
from .rates import add_noise, choose_alpha, default_deltas, run_rate_experiment
from .tikhonov import solve
from .vsc import default_samples, verify_vsc

log = logging.getLogger("vsc_lab")

STAGES = ("solve", "distfun", "indexfun", "verify", "rates")
EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

# per-stage offsets keep staged and pipeline runs on identical random streams
_SEED_OFFSET = {"solve": 0, "distfun": 1, "verify": 2, "rates": 3}


class StageError(RuntimeError):
    pass


class Workspace:
    """Output directory holding the config copy, artifacts and summary."""

    def __init__(self, out: Path):
        self.out = out

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, name: str, stage: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise StageError(f"missing {name} in {self.out}; run the '{stage}' stage first")
        return p

    def write_json(self, name: str, data) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def read_json(self, name: str):
        with open(self.path(name)) as fh:
            return json.load(fh)

    def update_summary(self, **items) -> None:
        p = self.path("summary.json")
        summary = self.read_json("summary.json") if p.exists() else {}
        summary.update(items)
        self.write_json("summary.json", summary)


def _stage_seed(cfg: RunConfig, stage: str) -> int:
    return cfg.seed + _SEED_OFFSET[stage]


def _solver_kwargs(cfg: RunConfig, problem, stage: str) -> dict:
    r = cfg.rates
    if problem.kind is problems.ProblemKind.AUTOCONVOLUTION:
        return {"starts": r.starts, "tol": r.tol, "max_iter": r.max_iter,
                "seed": _stage_seed(cfg, stage)}
    if problem.kind is problems.ProblemKind.L1_LINEAR:
        return {"tol": r.tol, "max_iter": r.max_iter}
    return {}


def _deltas(cfg: RunConfig, problem) -> np.ndarray:
    r = cfg.rates
    return default_deltas(float(np.linalg.norm(problem.y_dagger)), r.num_deltas,
                          r.delta_max_factor, r.delta_min_factor)


def load_problem(ws: Workspace, cfg: RunConfig):
    p = ws.path("problem.json")
    if p.exists():
        return problems.load_problem(p)
    problem = cfg.build_problem()
    problems.save_problem(problem, p)
    return problem


def stage_solve(ws: Workspace, cfg: RunConfig) -> int:
    problem = load_problem(ws, cfg)
    delta = cfg.solve.delta_factor * float(np.linalg.norm(problem.y_dagger))
    y_obs = add_noise(problem.y_dagger, delta, _stage_seed(cfg, "solve"))
    alpha = cfg.solve.alpha if cfg.solve.alpha is not None else max(delta, 1e-12)
    sol = solve(problem, y_obs, alpha, **_solver_kwargs(cfg, problem, "solve"))
    data = sol.to_dict()
    data["delta"] = delta
    ws.write_json("tikhonov_solution.json", data)
    ws.update_summary(solve={"alpha": alpha, "delta": delta, "converged": sol.converged})
    return EXIT_OK


def stage_distfun(ws: Workspace, cfg: RunConfig) -> int:
    problem = load_problem(ws, cfg)
    d = cfg.distfun
    profile = distance_profile(problem, cfg.beta, d.r_min, d.r_max, d.num_points,
                               multistart=d.multistart, tol=d.tol, max_iter=d.max_iter,
                               seed=_stage_seed(cfg, "distfun"))
    profile.to_csv(ws.path("distance_profile.csv"))
    profile.to_json(ws.path("distance_profile.json"))
    monotone, convex = profile.check_structure()
    ws.update_summary(
        trivial_vsc=profile.trivial_vsc,
        linear_vsc=profile.linear_vsc,
        linear_slope=profile.linear_slope,
        certification_coverage=float(np.mean(profile.exact)),
        profile_monotone=monotone,
        profile_convex=convex,
    )
    return EXIT_OK


def stage_indexfun(ws: Workspace, cfg: RunConfig) -> int:
    profile = DistanceProfile.from_json(ws.require("distance_profile.json", "distfun"))
    problem = load_problem(ws, cfg)
    ip = cfg.indexfun
    y_norm = float(np.linalg.norm(problem.y_dagger)) or 1.0
    t_grid = np.concatenate([[0.0], np.geomspace(ip.t_min_factor * y_norm,
                                                 ip.t_max_factor * y_norm, ip.num_t)])
    phi = index_from_distance(profile, t_grid, decay_tol=ip.decay_tol,
                              trivial_slope=ip.trivial_slope)
    phi.to_csv(ws.path("index_function.csv"))
    phi.to_json(ws.path("index_function.json"))
    ws.update_summary(index_trivial=phi.trivial, decay_tol=phi.decay_tol)
    return EXIT_OK


def stage_verify(ws: Workspace, cfg: RunConfig) -> int:
    phi = IndexFunction.from_json(ws.require("index_function.json", "indexfun"))
    profile = DistanceProfile.from_json(ws.require("distance_profile.json", "distfun"))
    problem = load_problem(ws, cfg)
    seed = _stage_seed(cfg, "verify")
    extra = [profile.maximizers]
    kwargs = _solver_kwargs(cfg, problem, "verify")
    for k, delta in enumerate(_deltas(cfg, problem)):
        # one Tikhonov minimizer per noise level joins the sample set
        y_obs = add_noise(problem.y_dagger, delta, [seed, k])
        try:
            alpha = choose_alpha(delta, problem.p, phi, cfg.rates.rule, problem, y_obs,
                                 solver_kwargs=kwargs)
        except (ValueError, RuntimeError):
            continue
        extra.append(solve(problem, y_obs, alpha, **kwargs).x[None, :])
    samples = default_samples(problem, cfg.vsc.num_samples, cfg.vsc.scales, seed,
                              extra=np.vstack(extra))
    report = verify_vsc(problem, cfg.beta, phi, samples, cfg.vsc.tolerance)
    report.to_json(ws.path("vsc_report.json"))
    ws.update_summary(vsc_violations=report.num_violations, vsc_worst_gap=report.worst_gap,
                      vsc_samples=report.num_samples)
    if report.num_violations:
        ws.update_summary(status="vsc_violation", failed_stage="verify")
        return EXIT_VIOLATION
    return EXIT_OK


def stage_rates(ws: Workspace, cfg: RunConfig) -> int:
    phi = IndexFunction.from_json(ws.require("index_function.json", "indexfun"))
    problem = load_problem(ws, cfg)
    r = cfg.rates
    report = run_rate_experiment(problem, cfg.beta, phi, _deltas(cfg, problem),
                                 replicates=r.replicates, rule=r.rule,
                                 seed=_stage_seed(cfg, "rates"),
                                 solver_kwargs=_solver_kwargs(cfg, problem, "rates"))
    report.to_csv(ws.path("rate_report.csv"))
    report.to_json(ws.path("rate_report.json"))
    report.to_long_csv(ws.path("rate_long.csv"))

    def finite(v):
        return float(v) if np.isfinite(v) else None

    ws.update_summary(fitted_exponent=finite(report.fitted_exponent),
                      envelope_constant=finite(report.envelope_constant),
                      rate_failures=int(report.failures.sum()))
    return EXIT_OK


_RUNNERS = {"solve": stage_solve, "distfun": stage_distfun, "indexfun": stage_indexfun,
            "verify": stage_verify, "rates": stage_rates}
PIPELINE = ("distfun", "indexfun", "verify", "rates")


def _resolve_config(args, out: Optional[Path]) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif out is not None and (out / "config.json").exists():
        with open(out / "config.json") as fh:
            cfg = parse_config(json.load(fh))
    else:
        raise ConfigError("no --config given and no config.json in the output directory")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg.seed = args.seed
    return cfg


def run(command: str, config: Optional[str] = None, out: Optional[str] = None,
        seed: Optional[int] = None) -> int:
    """Run one stage (or ``pipeline``) and return the exit status."""
    args = argparse.Namespace(config=config, out=out, seed=seed)
    out_dir = Path(out) if out is not None else None
    ws = None
    try:
        cfg = _resolve_config(args, out_dir)
        if out_dir is None:
            if cfg.output_dir is None:
                raise ConfigError("no --out given and config.output_dir is not set")
            out_dir = Path(cfg.output_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StageError(f"cannot create output directory {out_dir}: {exc.strerror}")
        ws = Workspace(out_dir)
        stored = cfg.to_dict()
        stored.pop("output_dir")
        previous = ws.read_json("config.json") if ws.path("config.json").exists() else None
        if previous is not None and previous != stored:
            # a new configuration invalidates downstream artifacts
            for name in ("problem.json", "summary.json"):
                if ws.path(name).exists():
                    ws.path(name).unlink()
        ws.write_json("config.json", stored)
        cfg.build_problem()

        stages = PIPELINE if command == "pipeline" else (command,)
        ws.update_summary(status="running", failed_stage=None, error=None)
        status = EXIT_OK
        for stage in stages:
            log.info("running stage %s", stage)
            code = _RUNNERS[stage](ws, cfg)
            status = max(status, code)
        if status == EXIT_OK:
            ws.update_summary(status="ok")
        return status
    except (ConfigError, StageError, ValueError, RuntimeError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        if ws is not None:
            try:
                ws.update_summary(status="error", error=str(exc),
                                  failed_stage=command)
            except OSError:
                pass
        return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsc-lab",
        description="Distance functions, index functions and source-condition checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
