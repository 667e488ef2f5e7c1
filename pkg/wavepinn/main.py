"""
wavepinn command line.

    python -m wavepinn.main train  --config run.env [--set key=value ...] [--resume ckpt.npz|run_dir]
    python -m wavepinn.main eval   --config run.env --checkpoint runs/checkpoints/final.npz
    python -m wavepinn.main compare --config run.env [--include-plain]
    python -m wavepinn.main gradcheck [--seeds 20]
    python -m wavepinn.main residualcheck [--problems example1_large,...]

Exit status: 0 on success, otherwise the error category's code (see wavepinn.errors).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from wavepinn.errors import CheckFailedError, WavePinnError
from wavepinn.schemas import NORMALIZATION_MODES
from wavepinn.services import experiment_service, verification_service
from wavepinn.services.problem_registry import PROBLEM_NAMES
from wavepinn.services.report_service import summary_lines, write_reports
from wavepinn.settings import get_settings
from wavepinn.utils.config_file import load_run_config, parse_overrides
from wavepinn.utils.csv_serialization import format_float, write_csv

logger = logging.getLogger("wavepinn")


def _csv_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="key=value run configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config key (repeatable)",
    )
    parser.add_argument("--problem", type=str, default=None, help=f"Built-in problem: {', '.join(PROBLEM_NAMES)}")
    parser.add_argument("--normalization", type=str, default=None, choices=NORMALIZATION_MODES)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output-dir", type=str, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavepinn",
        description="Fourier-feature PINNs for the wave equation with domain normalization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train one model and write its history and error grid")
    _add_run_options(train)
    train.add_argument(
        "--resume", type=str, default=None,
        help="Checkpoint file, or a run directory holding checkpoints/checkpoint_latest.npz",
    )

    evaluate = sub.add_parser("eval", help="Write the point-wise error grid of a saved model")
    _add_run_options(evaluate)
    evaluate.add_argument("--checkpoint", type=str, required=True)

    compare = sub.add_parser("compare", help="Train FPINN, S-, T- and ST-NFPINN with identical seeds")
    _add_run_options(compare)
    compare.add_argument("--include-plain", action="store_true", help="Also train the plain PINN baseline")

    gradcheck = sub.add_parser("gradcheck", help="Analytic derivatives vs finite differences")
    gradcheck.add_argument("--seeds", type=int, default=20)
    gradcheck.add_argument("--subnets", type=str, default="1,3,10", help="Comma separated subnet counts")
    gradcheck.add_argument("--points", type=int, default=8)
    gradcheck.add_argument("--params", type=int, default=40, help="Parameters checked per network")
    gradcheck.add_argument("--problem", type=str, default="example1_small")
    gradcheck.add_argument("--output-dir", type=str, default=None)

    residualcheck = sub.add_parser("residualcheck", help="Exact-solution residuals per problem and mode")
    residualcheck.add_argument("--problems", type=str, default=",".join(PROBLEM_NAMES))
    residualcheck.add_argument("--modes", type=str, default=",".join(NORMALIZATION_MODES))
    residualcheck.add_argument("--points", type=int, default=1000)
    residualcheck.add_argument("--seed", type=int, default=0)
    residualcheck.add_argument("--legacy-st-time-factor", action="store_true")
    residualcheck.add_argument("--output-dir", type=str, default=None)
    return parser


def _run_config(args):
    overrides = parse_overrides(args.overrides)
    for key in ("problem", "normalization", "epochs", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    return load_run_config(args.config, overrides)


def _check_output_dir(args) -> Path:
    return Path(args.output_dir or get_settings().output_dir)


def _finish_check(frame, out_dir: Path, name: str, title: str) -> None:
    write_csv(frame, out_dir / f"{name}.csv")
    failed = frame[~frame["passed"]]
    lines = [title, f"rows: {len(frame)}", f"failed: {len(failed)}"]
    numeric = [c for c in frame.columns if c.endswith("_err") or c == "max_abs_residual"]
    for column in numeric:
        lines.append(f"max {column}: {format_float(frame[column].max())}")
    write_reports(out_dir, summary=lines)
    if len(failed):
        raise CheckFailedError(f"{name}: {len(failed)} of {len(frame)} rows exceed tolerance")


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "train":
        experiment_service.run_train(_run_config(args), resume_path=args.resume)
    elif args.command == "eval":
        experiment_service.run_eval(_run_config(args), args.checkpoint)
    elif args.command == "compare":
        experiment_service.run_compare(_run_config(args), include_plain=args.include_plain)
    elif args.command == "gradcheck":
        frame = verification_service.gradcheck(
            seeds=range(args.seeds),
            subnet_counts=[int(q) for q in _csv_list(args.subnets)],
            n_points=args.points,
            n_params=args.params,
            problem_name=args.problem,
        )
        _finish_check(frame, _check_output_dir(args), "gradcheck", "gradcheck: finite differences vs analytic")
    elif args.command == "residualcheck":
        frame = verification_service.residualcheck(
            problem_names=_csv_list(args.problems),
            modes=_csv_list(args.modes),
            n_points=args.points,
            seed=args.seed,
            legacy_time_factor=args.legacy_st_time_factor,
        )
        _finish_check(frame, _check_output_dir(args), "residualcheck", "residualcheck: exact-solution residuals")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return run(argv)
    except WavePinnError as e:
        logger.error(f"{e.category}: {e.detail}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
