#!/usr/bin/env python3
"""
cli.py - The experiment pipeline, one subcommand per stage

    pretrain ----> pretrained.ckpt
        |
        +--> finetune --> expert_<rid>.ckpt (one per reward)
        |        |
        |        +--> rs ------------> rs_front.{csv,json}, lmc_report, selection.json
        |        +--> lmc -----------> lmc_report.{csv,json}
        |        +--> ensemble-audit -> ensemble_audit.json, ensemble_front.csv
        +--> morl ---------------------> morl_front.{csv,json}
                                              |
    compare  <----- rs_front.json + morl_front.json --> comparison.json
    quad-verify      (closed forms only)            --> quad_verify.json, bound_curve.csv
    scratch-control  (pretrained vs scratch inits)  --> scratch_control.json

Every command reads one config plus a seed and writes plain files under
--out; the lifecycle goes to <out>/events.jsonl.

Usage:
    python -m rsoup pretrain --config configs/pointmass.yaml --out runs/pm
    python -m rsoup rs --config configs/pointmass.yaml --out runs/pm --jobs 4
    python -m rsoup quad-verify --count 1000
"""

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from . import __version__
from .config import (ENV_JOBS, ENV_LOG_LEVEL, ENV_OUT, ExperimentConfig,
                     config_hash, load_config, resolve)
from .envs import RewardVector, evaluate
from .errors import (EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, ArityError,
                     DegenerateRangeError, DivergenceError,
                     InsufficientDataError, SoupError, UsageError,
                     exit_code_for)
from .jobs import JobPool
from .pareto import FrontPoint, compare_fronts, joint_normalization, normalize
from .policy import init_weights, load_checkpoint, save_checkpoint
from .quadratic import bound_curve, verify_instances
from .report import (ExperimentReport, front_table, lmc_table, read_json,
                     run_summary, write_csv, write_json)
from .runlog import RunLog, setup_logging
from .seeding import derive_seed, rng_for
from .soup import (SimplexPoint, ensemble_front_sweep, ensembling_gap,
                   extrapolation_grid, front_sweep, init_sweep, lambda_grid,
                   lmc_audit, naive_coefficient, scaling_audit,
                   scalarized_scores, select_coefficient)
from .trainer import (RewardWeighting, finetune_experts, morl_sweep,
                      pretrain_run, run_seed, train)

logger = logging.getLogger("rsoup")


# -- Context: everything a command handler needs --
@dataclass
class Context:
    args: argparse.Namespace
    out: Path
    jobs: int
    log: RunLog
    config: ExperimentConfig | None = None
    progress: bool = False
    written: list = field(default_factory=list)

    @cached_property
    def config_hash(self) -> str | None:
        return config_hash(self.config) if self.config is not None else None

    def require_config(self) -> ExperimentConfig:
        if self.config is None:
            raise UsageError(f"`{self.args.command}` needs --config")
        return self.config

    @cached_property
    def env(self):
        return self.require_config().build_env()

    @cached_property
    def arch(self):
        return self.require_config().build_arch(self.env)

    @property
    def reward_ids(self) -> tuple:
        return self.require_config().reward_ids()

    def derived(self, purpose: str) -> int:
        return derive_seed(self.require_config().seed, purpose)

    def write_csv(self, name: str, header: list, rows: list) -> Path:
        return self._written(write_csv(self.out / name, header, rows))

    def write_json(self, name: str, payload: dict) -> Path:
        return self._written(write_json(self.out / name, payload))

    def save_checkpoint(self, name: str, weights) -> Path:
        return self._written(save_checkpoint(weights, self.out / name))

    def _written(self, path: Path) -> Path:
        self.written.append(str(path))
        self.log.emit("file.written", path=str(path))
        logger.info("wrote %s", path)
        return path

    def report(self, command: str, **fields) -> ExperimentReport:
        return ExperimentReport(command, self.config_hash, self.reward_ids, **fields)


# -- Shared pipeline steps --
def _load_pretrained(ctx: Context):
    path = Path(ctx.args.pretrained) if getattr(ctx.args, "pretrained", None) else ctx.out / "pretrained.ckpt"
    if not path.is_file():
        raise UsageError(f"{path} not found; run `rsoup pretrain` first")
    return load_checkpoint(path, ctx.arch)


def _load_experts(ctx: Context) -> list:
    experts = []
    for rid in ctx.reward_ids:
        path = ctx.out / f"expert_{rid}.ckpt"
        if not path.is_file():
            raise UsageError(f"{path} not found; run `rsoup finetune` first")
        experts.append(load_checkpoint(path, ctx.arch))
    return experts


def _train_config(ctx: Context, stage: str):
    config = ctx.require_config()
    return getattr(config, stage).build(config.seed, ctx.progress)


def _finetune(ctx: Context, init) -> list:
    ids = ctx.reward_ids
    for rid in ids:
        ctx.log.emit("run.start", label=rid, stage="finetune")
    records = finetune_experts(init, ctx.env, _train_config(ctx, "finetune"), ids, ctx.jobs)
    for rid, record in zip(ids, records):
        ctx.save_checkpoint(f"expert_{rid}.ckpt", record.final_weights)
        ctx.write_csv(f"finetune_{rid}_history.csv", *record.history_table())
        ctx.log.emit("run.end", label=rid, wall_clock=record.wall_clock, weight_distance=record.init_distance)
    return records


def _simplex_grid(ctx: Context, n: int, points: int) -> list:
    config = ctx.require_config()
    return lambda_grid(n, points, config.grids.simplex_samples, rng_for(config.seed, "simplex"))


def _selection_grid(ctx: Context, n: int) -> list:
    if n == 2:
        points = ctx.config.grids.selection_points
        return [SimplexPoint.pair(k / (points - 1)) for k in range(points)]
    return [SimplexPoint.vertex(n, i) for i in range(n)] + [SimplexPoint.barycenter(n)]


def _lmc_pairs(ctx: Context, experts: list, seed: int) -> list:
    ids = ctx.reward_ids
    lambdas = np.linspace(0.0, 1.0, ctx.config.grids.lmc_points)
    episodes = ctx.config.eval.episodes
    reports = []
    for i in range(len(experts)):
        for j in range(i + 1, len(experts)):
            report = lmc_audit(experts[i], experts[j], ctx.env, lambdas, episodes, seed, ids, ctx.jobs)
            reports.append(((ids[i], ids[j]), report))
    return reports


def _write_lmc(ctx: Context, pairs: list) -> list:
    header, rows = None, []
    for (a, b), report in pairs:
        h, r = lmc_table(report)
        header = ["pair", *h]
        rows += [[f"{a}|{b}", *row] for row in r]
    if header is not None:
        ctx.write_csv("lmc_report.csv", header, rows)
    return [{"pair": [a, b], **report.to_dict()} for (a, b), report in pairs]


def _normalized(init: RewardVector, points: list) -> tuple:
    try:
        spec = joint_normalization(init, [p.rewards for p in points])
    except DegenerateRangeError as e:
        logger.warning("skipping normalization: %s", e)
        return None, None
    return spec, normalize(points, spec)


def _points(candidates: list) -> list:
    return [FrontPoint(c.eval, c.provenance, c.coeffs) for c in candidates]


# === SECTION: commands ===

def cmd_pretrain(ctx: Context) -> int:
    ctx.log.emit("run.start", label="pretrain", stage="pretrain")
    record = pretrain_run(ctx.arch, ctx.env, _train_config(ctx, "pretrain"))
    ctx.save_checkpoint("pretrained.ckpt", record.final_weights)
    ctx.write_csv("pretrain_history.csv", *record.history_table())
    ctx.log.emit("run.end", label="pretrain", wall_clock=record.wall_clock)
    return EXIT_OK


def cmd_finetune(ctx: Context) -> int:
    _finetune(ctx, _load_pretrained(ctx))
    return EXIT_OK


def cmd_rs(ctx: Context) -> int:
    config, env, ids = ctx.require_config(), ctx.env, ctx.reward_ids
    init = _load_pretrained(ctx)
    records = _finetune(ctx, init)
    experts = [r.final_weights for r in records]
    test_seed, val_seed = ctx.derived("test"), ctx.derived("validation")
    episodes = config.eval.episodes

    grid = _simplex_grid(ctx, len(ids), config.grids.lambda_points)
    test = front_sweep(experts, env, grid, episodes, test_seed, ids, ctx.jobs)
    rows = list(test)
    if config.grids.extrapolate is not None and len(ids) == 2:
        lo, hi = config.grids.extrapolate
        rows += front_sweep(experts, env, extrapolation_grid(lo, hi, config.grids.extrapolate_points), episodes,
                            test_seed, ids, ctx.jobs, allow_extrapolation=True, provenance="RS-extrapolated")
    points = _points(rows)
    ctx.write_csv("rs_front.csv", *front_table(points, ids))

    init_eval = evaluate(init, env, episodes, test_seed).select(ids)
    spec, _ = _normalized(init_eval, _points(test))
    if spec is not None:
        ctx.write_csv("rs_front_normalized.csv", *front_table(normalize(points, spec), ids))

    lmc = _write_lmc(ctx, _lmc_pairs(ctx, experts, test_seed))

    # Selection on validation episodes, scored on test episodes.
    validation = front_sweep(experts, env, grid, config.eval.validation_episodes, val_seed, ids, ctx.jobs)
    selection = []
    for mu in _selection_grid(ctx, len(ids)):
        chosen = select_coefficient(validation, mu)
        naive = naive_coefficient(test, mu)
        test_scores = scalarized_scores(test, mu)
        selection.append({
            "mu_hat": list(mu.coeffs),
            "selected_lambda": list(chosen.coeffs),
            "selected_test_value": float(test_scores[validation.index(chosen)]),
            "naive_lambda": list(naive.coeffs),
            "naive_test_value": float(test_scores[test.index(naive)]),
            "best_test_value": float(test_scores.max()),
        })
    ctx.write_json("selection.json", ctx.report("rs", extra={"selection": selection}).to_dict())

    lambdas = np.linspace(0.0, 1.0, config.grids.init_interp_points)
    for rid, expert in zip(ids, experts):
        sweep = init_sweep(init, expert, env, lambdas, episodes, test_seed, ids, ctx.jobs)
        ctx.write_csv(f"init_interp_{rid}.csv", *front_table(_points(sweep), ids))

    report = ctx.report("rs", runs=[run_summary(r) for r in records], points=[p.to_dict() for p in points],
                        init=init_eval.as_dict(), normalization=spec.to_dict() if spec else None, lmc=lmc)
    ctx.write_json("rs_front.json", report.to_dict())
    return EXIT_OK


def cmd_morl(ctx: Context) -> int:
    config, env, ids = ctx.require_config(), ctx.env, ctx.reward_ids
    init = _load_pretrained(ctx)
    test_seed = ctx.derived("test")
    mus = [RewardWeighting(ids, mu) for mu in _simplex_grid(ctx, len(ids), config.grids.mu_points)]
    for w in mus:
        ctx.log.emit("run.start", label=w.tag(), stage="morl")
    records = morl_sweep(init, env, mus, _train_config(ctx, "finetune"), ctx.jobs)
    for k, record in enumerate(records):
        ctx.write_csv(f"morl_{k}_history.csv", *record.history_table())
        ctx.log.emit("run.end", label=record.label, wall_clock=record.wall_clock)

    evals = JobPool(ctx.jobs).map(
        lambda r: evaluate(r.final_weights, env, config.eval.episodes, test_seed).select(ids), records)
    points = [FrontPoint(ev, "MORL", w.coeffs.coeffs) for ev, w in zip(evals, mus)]
    ctx.write_csv("morl_front.csv", *front_table(points, ids, prefix="mu"))
    init_eval = evaluate(init, env, config.eval.episodes, test_seed).select(ids)
    report = ctx.report("morl", runs=[run_summary(r) for r in records], points=[p.to_dict() for p in points],
                        init=init_eval.as_dict())
    ctx.write_json("morl_front.json", report.to_dict())
    return EXIT_OK


def _front_from_json(payload: dict, provenance: str) -> list:
    ids = tuple(payload["reward_ids"])
    return [FrontPoint(RewardVector(ids, [p["rewards"][r] for r in ids]), p["provenance"], p.get("coeffs", ()))
            for p in payload["points"] if p["provenance"] == provenance]


def cmd_compare(ctx: Context) -> int:
    rs_path = Path(ctx.args.rs) if ctx.args.rs else ctx.out / "rs_front.json"
    morl_path = Path(ctx.args.morl) if ctx.args.morl else ctx.out / "morl_front.json"
    for path in (rs_path, morl_path):
        if not path.is_file():
            raise UsageError(f"{path} not found")
    rs, morl = read_json(rs_path), read_json(morl_path)
    if list(rs["reward_ids"]) != list(morl["reward_ids"]):
        raise ArityError(f"Reward ids differ: {rs['reward_ids']} vs {morl['reward_ids']}")
    ids = tuple(rs["reward_ids"])
    fronts = {"RS": _front_from_json(rs, "RS"), "MORL": _front_from_json(morl, "MORL")}

    spec = None
    if rs.get("init") and not ctx.args.raw:
        init = RewardVector(ids, [rs["init"][r] for r in ids])
        spec, _ = _normalized(init, fronts["RS"] + fronts["MORL"])
    comparison = compare_fronts(fronts, ctx.args.utopia, ctx.args.floor, spec)
    payload = comparison.to_dict()
    payload.update({"version": __version__, "config_hash": rs.get("config_hash"),
                    "inputs": {"rs": rs.get("config_hash"), "morl": morl.get("config_hash")}})
    ctx.write_json("comparison.json", payload)
    logger.info("deficiency %s, relative gap %s", comparison.deficiency, comparison.relative_gap)
    return EXIT_OK


def cmd_quad_verify(ctx: Context) -> int:
    a = ctx.args
    seed = _flag(a, "seed")
    if seed is None:
        seed = ctx.config.seed if ctx.config else 0
    params = {"count": a.count, "dim_range": [a.dim_min, a.dim_max], "curvature_range": [a.eta_min, a.eta_max],
              "seed": seed, "mu_points": a.mu_points, "bound_scale": a.bound_scale,
              "M_values": a.M_values, "curve_points": a.curve_points}
    params_hash = hashlib.sha256(json.dumps(params, sort_keys=True).encode("utf-8")).hexdigest()
    report = verify_instances(a.count, (a.dim_min, a.dim_max), (a.eta_min, a.eta_max), seed,
                              a.mu_points, a.bound_scale)
    ctx.write_json("quad_verify.json", {"version": __version__, "config_hash": params_hash, "params": params,
                                        "ok": report.ok, **report.to_dict()})
    ctx.write_csv("bound_curve.csv", *bound_curve(a.M_values, np.linspace(0.0, 1.0, a.curve_points)))
    if not report.ok:
        first = report.violations[0]
        logger.error("%d violations; first: instance %s at mu_hat=%s (%s)", len(report.violations),
                     first["instance"], first["mu_hat"], first["kind"])
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_scratch_control(ctx: Context) -> int:
    config, env = ctx.require_config(), ctx.env
    ids = ctx.reward_ids[:2]
    if len(ids) < 2:
        raise UsageError("scratch-control needs two rewards")
    pre_cfg, ft_cfg = _train_config(ctx, "pretrain"), _train_config(ctx, "finetune")
    scratch_updates = pre_cfg.updates + ft_cfg.updates
    lambdas = np.linspace(0.0, 1.0, config.grids.lmc_points)
    seeds = []
    for k in range(config.control.seeds):
        seed_k = ctx.derived(f"control/{k}")
        eval_seed = derive_seed(seed_k, "test")
        ctx.log.emit("run.start", label=f"control/{k}", stage="scratch-control")

        init = pretrain_run(ctx.arch, env, pre_cfg.with_seed(seed_k)).final_weights
        shared = finetune_experts(init, env, ft_cfg.with_seed(seed_k), ids, ctx.jobs)
        pretrained = lmc_audit(shared[0].final_weights, shared[1].final_weights, env, lambdas,
                               config.eval.episodes, eval_seed, ids, ctx.jobs)

        def scratch(i, rid):
            weighting = RewardWeighting.vertex(ids, rid)
            fresh = init_weights(ctx.arch, rng_for(seed_k, f"scratch/{i}"))
            cfg = ft_cfg.with_seed(run_seed(seed_k, weighting))
            return train(fresh, env, weighting, replace(cfg, updates=scratch_updates),
                         label=f"scratch/{rid}")

        scratch_runs = JobPool(ctx.jobs).map(lambda item: scratch(*item), list(enumerate(ids)))
        from_scratch = lmc_audit(scratch_runs[0].final_weights, scratch_runs[1].final_weights, env, lambdas,
                                 config.eval.episodes, eval_seed, ids, ctx.jobs)
        m_pre, m_scratch = pretrained.mean_interior_margin(), from_scratch.mean_interior_margin()
        seeds.append({
            "seed_index": k,
            "pretrained": pretrained.to_dict(),
            "scratch": from_scratch.to_dict(),
            "difference": {r: m_pre[r] - m_scratch[r] for r in ids},
            "weight_distance": {"pretrained": [r.init_distance for r in shared],
                                "scratch": [r.init_distance for r in scratch_runs]},
        })
        ctx.log.emit("run.end", label=f"control/{k}")

    mean = {arm: {r: float(np.mean([s[arm]["mean_interior_margin"][r] for s in seeds])) for r in ids}
            for arm in ("pretrained", "scratch")}
    summary = {"mean_interior_margin": mean,
               "mean_difference": {r: mean["pretrained"][r] - mean["scratch"][r] for r in ids},
               "pretrained_exceeds_scratch": {r: mean["pretrained"][r] > mean["scratch"][r] for r in ids},
               "lambdas": [float(x) for x in lambdas], "scratch_updates": scratch_updates}
    report = ctx.report("scratch-control", extra={"seeds": seeds, "summary": summary})
    ctx.write_json("scratch_control.json", report.to_dict())
    return EXIT_OK


def cmd_lmc(ctx: Context) -> int:
    experts = _load_experts(ctx)
    if len(experts) < 2:
        raise UsageError("lmc needs at least two experts")
    lmc = _write_lmc(ctx, _lmc_pairs(ctx, experts, ctx.derived("test")))
    ctx.write_json("lmc_report.json", ctx.report("lmc", lmc=lmc).to_dict())
    return EXIT_OK


def cmd_ensemble_audit(ctx: Context) -> int:
    config, env, ids = ctx.require_config(), ctx.env, ctx.reward_ids
    experts = _load_experts(ctx)
    if len(experts) < 2:
        raise UsageError("ensemble-audit needs at least two experts")
    theta1, theta2 = experts[0], experts[1]
    lam = config.control.lam
    probes = env.probe_observations(rng_for(config.seed, "probe"), config.control.probes)
    gap, details = ensembling_gap(theta1, theta2, lam, probes)
    try:
        slope = scaling_audit(theta1, theta2.values - theta1.values, lam, config.control.scales, probes)
    except InsufficientDataError as e:
        logger.warning("scaling audit: %s", e)
        slope = None

    test_seed = ctx.derived("test")
    grid = _simplex_grid(ctx, len(ids), config.grids.lambda_points)
    soup = front_sweep(experts, env, grid, config.eval.episodes, test_seed, ids, ctx.jobs)
    ensemble = ensemble_front_sweep(experts, env, grid, config.eval.episodes, test_seed, ids, ctx.jobs)
    points = _points(soup) + _points(ensemble)
    ctx.write_csv("ensemble_front.csv", *front_table(points, ids))
    report = ctx.report("ensemble-audit", points=[p.to_dict() for p in points], extra={
        "lambda": lam, "gap": gap, "per_probe": details,
        "scales": list(config.control.scales), "slope": slope,
    })
    ctx.write_json("ensemble_audit.json", report.to_dict())
    return EXIT_OK


COMMAND_HANDLERS = {
    "pretrain":        cmd_pretrain,
    "finetune":        cmd_finetune,
    "rs":              cmd_rs,
    "morl":            cmd_morl,
    "compare":         cmd_compare,
    "quad-verify":     cmd_quad_verify,
    "scratch-control": cmd_scratch_control,
    "lmc":             cmd_lmc,
    "ensemble-audit":  cmd_ensemble_audit,
}
NEEDS_CONFIG = {"pretrain", "finetune", "rs", "morl", "scratch-control", "lmc", "ensemble-audit"}


# === SECTION: argument parsing ===

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="Experiment YAML")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Override the config seed")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="Output directory")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="Concurrent runs")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="DEBUG, INFO, WARNING, ...")
    common.add_argument("--progress", action="store_true", default=argparse.SUPPRESS,
                        help="Show training progress bars")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="rsoup", parents=[common],
        description="Rewarded soups: per-reward fine-tuning, weight interpolation, and the MORL baseline",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:")[1],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("pretrain", "finetune", "rs", "morl", "scratch-control", "lmc", "ensemble-audit"):
        p = sub.add_parser(name, parents=[common])
        if name in ("finetune", "rs", "morl"):
            p.add_argument("--pretrained", type=Path, help="Pretrained checkpoint (default <out>/pretrained.ckpt)")

    p = sub.add_parser("compare", parents=[common])
    p.add_argument("--rs", type=Path, help="RS front JSON (default <out>/rs_front.json)")
    p.add_argument("--morl", type=Path, help="MORL front JSON (default <out>/morl_front.json)")
    p.add_argument("--utopia", type=float, nargs=2, help="Utopia point (default: componentwise max)")
    p.add_argument("--floor", type=float, nargs=2, help="Floor point (default: componentwise min)")
    p.add_argument("--raw", action="store_true", help="Compare unnormalized rewards")

    p = sub.add_parser("quad-verify", parents=[common])
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--dim-min", type=int, default=1)
    p.add_argument("--dim-max", type=int, default=64)
    p.add_argument("--eta-min", type=float, default=0.1)
    p.add_argument("--eta-max", type=float, default=10.0)
    p.add_argument("--mu-points", type=int, default=21)
    p.add_argument("--bound-scale", type=float, default=1.0, help="Multiply the bound (negative control)")
    p.add_argument("--M-values", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0])
    p.add_argument("--curve-points", type=int, default=101)
    return parser


def _flag(args, name):
    return getattr(args, name, None)


def main(argv=None) -> int:
    load_dotenv(override=True)
    args = build_parser().parse_args(argv)
    setup_logging(resolve(_flag(args, "log_level"), ENV_LOG_LEVEL, "INFO"))

    config = None
    try:
        if _flag(args, "config") is not None:
            config = load_config(args.config)
            if _flag(args, "seed") is not None:
                config = config.model_copy(update={"seed": args.seed})
        elif args.command in NEEDS_CONFIG:
            raise UsageError(f"`{args.command}` needs --config")
        out = Path(resolve(_flag(args, "out"), ENV_OUT, config.output_dir if config else Path("runs"), Path))
        jobs = resolve(_flag(args, "jobs"), ENV_JOBS, config.jobs if config else 1, int)
        if jobs < 1:
            raise UsageError(f"--jobs must be >= 1, got {jobs}")
    except SoupError as e:
        logger.error("%s", e)
        return exit_code_for(e)

    ctx = Context(args, out, jobs, RunLog(out / "events.jsonl"), config, bool(_flag(args, "progress")))
    ctx.log.emit("command.start", command=args.command, config_hash=ctx.config_hash, version=__version__,
                 jobs=jobs, argv=list(sys.argv[1:] if argv is None else argv))
    try:
        code = COMMAND_HANDLERS[args.command](ctx)
    except SoupError as e:
        if isinstance(e, DivergenceError):
            ctx.log.emit("run.diverged", update=e.update, message=str(e))
        ctx.log.emit("command.error", command=args.command, error=type(e).__name__, message=str(e))
        logger.error("%s: %s", type(e).__name__, e)
        return exit_code_for(e)
    except FileNotFoundError as e:
        ctx.log.emit("command.error", command=args.command, error="FileNotFoundError", message=str(e))
        logger.error("%s", e)
        return EXIT_USAGE
    ctx.log.emit("command.end", command=args.command, code=code, files=ctx.written)
    return code


if __name__ == "__main__":
    sys.exit(main())
