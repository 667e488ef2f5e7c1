"""
Experiment Service

Orchestrates the CLI commands on top of the services:
- train:   one run, history + error grid + checkpoints
- eval:    error grid of a saved model on the configured test set
- compare: the four normalization modes (optionally plus the plain PINN) with identical
           seeds and initial networks, joined REL curves and a final-REL summary
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from wavepinn.errors import ConfigError
from wavepinn.schemas import RunConfig
from wavepinn.services.checkpoint_service import (
    Checkpoint,
    load_checkpoint,
    resolve_resume,
    save_checkpoint,
)
from wavepinn.services.fourier_net import FfmNetwork, init_network
from wavepinn.services.geometry_service import EvaluationSet, build_test_set
from wavepinn.services.loss_service import DataSet, load_data_set
from wavepinn.services.normalization_service import NormalizationMode, NormalizationPlan
from wavepinn.services.problem_registry import WaveProblem, resolve_problem
from wavepinn.services.report_service import (
    error_grid_frame,
    joined_rel_frame,
    summary_lines,
    write_reports,
)
from wavepinn.services.trainer_service import TrainHistory, TrainResult, evaluate_rel, predict, train
from wavepinn.settings import get_settings
from wavepinn.utils.config_file import dump_run_config

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG = "effective_config.env"
CHECKPOINT_DIR = "checkpoints"
FINAL_MODEL = "final.npz"
PLAIN_LABEL = "PINN"


@dataclass
class RunContext:
    config: RunConfig
    problem: WaveProblem
    plan: NormalizationPlan
    test_set: EvaluationSet
    data_set: Optional[DataSet]
    out_dir: Path


def resolve_config(config: RunConfig, problem: WaveProblem) -> RunConfig:
    """Fill unset keys from the problem defaults and the environment settings."""
    defaults = problem.defaults
    update = {}
    if config.n_interior is None:
        update["n_interior"] = defaults.n_interior
    if config.n_boundary is None:
        update["n_boundary"] = defaults.n_boundary
    if config.n_initial is None:
        update["n_initial"] = defaults.n_initial
    if config.scales is None:
        count = config.subnet_count or defaults.subnet_count
        update["scales"] = [float(a) for a in range(1, count + 1)]
        update["subnet_count"] = count
    elif config.subnet_count is None:
        update["subnet_count"] = len(config.scales)
    elif config.subnet_count != len(config.scales):
        raise ConfigError(
            f"subnet_count={config.subnet_count} disagrees with {len(config.scales)} scales"
        )
    if config.output_dir is None:
        update["output_dir"] = get_settings().output_dir

    if config.eval_kind is None:
        spec = defaults.eval_set
        update["eval_kind"] = spec.kind
        update["eval_t"] = spec.t_eval if config.eval_t is None else config.eval_t
        if spec.kind in ("grid", "cut_planes"):
            update["eval_resolution"] = config.eval_resolution or spec.resolution
            update["eval_exclude_holes"] = (
                spec.exclude_holes if config.eval_exclude_holes is None else config.eval_exclude_holes
            )
        if spec.kind == "sphere":
            update["eval_center"] = list(spec.center)
            update["eval_radius"] = spec.radius
            update["eval_count"] = spec.count
        if spec.kind == "cut_planes":
            update["eval_planes"] = list(spec.planes)
    elif config.eval_t is None:
        update["eval_t"] = problem.defaults.eval_set.t_eval
    return config.model_copy(update=update)


def prepare(config: RunConfig) -> RunContext:
    problem = resolve_problem(config.problem, config.problem_file)
    config = resolve_config(config, problem)
    # derived configs fail here, before anything is written to the output dir
    config.network_config(problem.input_dim).check()
    config.train_config()
    config.loss_weights()
    plan = NormalizationPlan.from_problem(problem, config.normalization, config.legacy_st_time_factor)
    test_set = build_test_set(config.eval_set(), problem)
    data_set = load_data_set(config.data_file, problem.dim) if config.data_file else None
    return RunContext(
        config=config,
        problem=problem,
        plan=plan,
        test_set=test_set,
        data_set=data_set,
        out_dir=Path(config.output_dir),
    )


def _run_meta(config: RunConfig) -> Dict[str, object]:
    return {
        "problem": config.problem,
        "problem_file": config.problem_file,
        "normalization": config.normalization,
        "legacy_st_time_factor": config.legacy_st_time_factor,
    }


def model_label(config: RunConfig) -> str:
    mode = NormalizationMode(config.normalization)
    if config.first_layer == "plain":
        return PLAIN_LABEL if mode is NormalizationMode.NONE else f"{PLAIN_LABEL}-{mode.value}"
    return mode.label


def _final_rel(ctx: RunContext, net: FfmNetwork) -> Optional[float]:
    if ctx.test_set.exact is None:
        return None
    return evaluate_rel(net, ctx.plan, ctx.problem, ctx.test_set)


def _train_into(ctx: RunContext, out_dir: Path, resume: Optional[Checkpoint] = None) -> TrainResult:
    config = ctx.config
    net = init_network(config.network_config(ctx.problem.input_dim))
    result = train(
        ctx.problem,
        net,
        ctx.plan,
        config.train_config(),
        config.loss_weights(),
        test_set=ctx.test_set if ctx.test_set.exact is not None else None,
        data_set=ctx.data_set,
        checkpoint_dir=out_dir / CHECKPOINT_DIR,
        resume=resume,
        meta=_run_meta(config),
    )
    save_checkpoint(out_dir / CHECKPOINT_DIR / FINAL_MODEL, Checkpoint(
        network=result.network,
        optimizer=result.optimizer,
        epoch=result.epochs_completed,
        seed=config.seed,
        rng_state={},
        loss_rows=result.history.loss_array(),
        rel_rows=result.history.rel_array(),
        initial_rel=result.history.initial_rel,
        meta=_run_meta(config),
    ))
    return result


def _config_lines(ctx: RunContext) -> List[str]:
    config = ctx.config
    return [
        f"problem: {ctx.problem.name}",
        f"epochs: {config.epochs}",
        f"counts: {config.n_interior}/{config.n_boundary}/{config.n_initial}",
        f"subnets: {config.subnet_count}, widths: {','.join(str(w) for w in config.hidden_widths)}",
        f"test points: {len(ctx.test_set)} ({config.eval_kind}, t={config.eval_t!r})",
    ]


# ==================== Commands ====================

def run_train(config: RunConfig, resume_path=None) -> TrainResult:
    ctx = prepare(config)
    resume = load_checkpoint(resolve_resume(resume_path)) if resume_path else None
    if resume is not None and resume.epoch >= ctx.config.epochs:
        raise ConfigError(
            f"checkpoint is at epoch {resume.epoch}; nothing to resume for epochs={ctx.config.epochs}"
        )
    dump_run_config(ctx.config, ctx.out_dir / EFFECTIVE_CONFIG)
    result = _train_into(ctx, ctx.out_dir, resume)

    pred = predict(result.network, ctx.plan, ctx.test_set.x, ctx.test_set.t)
    label = model_label(ctx.config)
    final_rel = _final_rel(ctx, result.network)
    write_reports(
        ctx.out_dir,
        history=result.history,
        error_grid=error_grid_frame(ctx.test_set, pred),
        summary=summary_lines(f"train {ctx.problem.name}", {label: final_rel}, _config_lines(ctx)),
    )
    return result


def run_eval(config: RunConfig, checkpoint_path) -> Optional[float]:
    """Error grid of a saved model; problem and normalization come from the checkpoint."""
    checkpoint = load_checkpoint(checkpoint_path)
    meta = checkpoint.meta
    if meta:
        config = config.model_copy(update={
            key: meta[key]
            for key in ("problem", "problem_file", "normalization", "legacy_st_time_factor")
            if key in meta
        })
    ctx = prepare(config)
    net = checkpoint.network
    if net.input_dim != ctx.problem.input_dim:
        raise ConfigError(
            f"checkpoint network takes {net.input_dim} inputs, problem '{ctx.problem.name}' needs "
            f"{ctx.problem.input_dim}"
        )
    pred = predict(net, ctx.plan, ctx.test_set.x, ctx.test_set.t)
    rel = _final_rel(ctx, net)
    label = model_label(ctx.config)
    write_reports(
        ctx.out_dir,
        error_grid=error_grid_frame(ctx.test_set, pred),
        summary=summary_lines(
            f"eval {ctx.problem.name} (checkpoint epoch {checkpoint.epoch})", {label: rel}, _config_lines(ctx)
        ),
    )
    logger.info(f"Evaluated {len(pred)} points" + (f", REL={rel:.4e}" if rel is not None else ""))
    return rel


def compare_variants(config: RunConfig, include_plain: bool = False) -> Dict[str, RunConfig]:
    """Run label -> config for every compared model; identical seeds and architecture."""
    variants = {}
    for mode in NormalizationMode:
        variants[mode.label] = config.model_copy(update={"normalization": mode.value, "first_layer": "fourier"})
    if include_plain:
        variants[PLAIN_LABEL] = config.model_copy(update={"normalization": "none", "first_layer": "plain"})
    return variants


def _variant_dir(variant: RunConfig) -> str:
    return "plain" if variant.first_layer == "plain" else variant.normalization


def run_compare(config: RunConfig, include_plain: bool = False) -> Dict[str, TrainHistory]:
    base = prepare(config)
    out_dir = base.out_dir
    dump_run_config(base.config, out_dir / EFFECTIVE_CONFIG)

    histories: Dict[str, TrainHistory] = {}
    final_rels: Dict[str, Optional[float]] = {}
    for label, variant in compare_variants(base.config, include_plain).items():
        ctx = prepare(variant)
        run_dir = out_dir / _variant_dir(variant)
        logger.info(f"compare: training {label} into {run_dir}")
        result = _train_into(ctx, run_dir)
        pred = predict(result.network, ctx.plan, ctx.test_set.x, ctx.test_set.t)
        final_rels[label] = _final_rel(ctx, result.network)
        write_reports(
            run_dir,
            history=result.history,
            error_grid=error_grid_frame(ctx.test_set, pred),
        )
        histories[label] = result.history

    write_reports(
        out_dir,
        rel_curve=joined_rel_frame(histories),
        summary=summary_lines(f"compare {base.problem.name}", final_rels, _config_lines(base)),
    )
    return histories
