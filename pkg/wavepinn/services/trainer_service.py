"""
Trainer Service

Training loop: every epoch draws a fresh LHS training batch, evaluates the composite loss
and its parameter gradient, and takes one Adam step at lr_at(epoch). REL on the problem's
test set is recorded every `test_interval` epochs; checkpoints are written at their own
cadence and allow a bit-for-bit resume.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from wavepinn.errors import DegenerateReferenceError, NumericError, UnsupportedError
from wavepinn.schemas import LossWeights, TrainConfig
from wavepinn.services.checkpoint_service import (
    LATEST_NAME,
    Checkpoint,
    restore_rng,
    save_checkpoint,
)
from wavepinn.services.deriv_engine import value_grad_laplacian
from wavepinn.services.fourier_net import FfmNetwork
from wavepinn.services.geometry_service import EvaluationSet, sample_training_batch
from wavepinn.services.loss_service import DataSet, loss_and_gradient
from wavepinn.services.normalization_service import NormalizationPlan
from wavepinn.services.optimizer import OptimizerState, adam_step, lr_at
from wavepinn.settings import get_settings
from wavepinn.utils.parallel import chunk_slices, map_ordered

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ["epoch", "loss_total", "loss_pde", "loss_bc", "loss_icv", "loss_icd", "lr"]
REL_COLUMNS = ["epoch", "rel"]
CHECKPOINT_NAME = LATEST_NAME


@dataclass
class TrainHistory:
    """
    loss_rows: one row per epoch (epoch = completed epochs), loss measured before that
    epoch's step: epoch, total, pde, bc, ic_value, ic_velocity, data, lr.
    rel_rows: (epoch, rel) at multiples of test_interval.
    interval_seconds: wall-clock per test interval; kept in memory only.
    """

    loss_rows: List[Tuple[float, ...]] = field(default_factory=list)
    rel_rows: List[Tuple[int, float]] = field(default_factory=list)
    interval_seconds: List[float] = field(default_factory=list)
    initial_rel: Optional[float] = None

    def loss_frame(self) -> pd.DataFrame:
        rows = [(int(r[0]), r[1], r[2], r[3], r[4], r[5], r[7]) for r in self.loss_rows]
        frame = pd.DataFrame(rows, columns=LOSS_COLUMNS)
        return frame.astype({"epoch": "int64"})

    def rel_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([(int(e), float(r)) for e, r in self.rel_rows], columns=REL_COLUMNS)
        return frame.astype({"epoch": "int64", "rel": "float64"})

    @property
    def final_rel(self) -> Optional[float]:
        return self.rel_rows[-1][1] if self.rel_rows else None

    def loss_array(self) -> np.ndarray:
        return np.asarray(self.loss_rows, dtype=float).reshape(-1, 8)

    def rel_array(self) -> np.ndarray:
        return np.asarray(self.rel_rows, dtype=float).reshape(-1, 2)

    @classmethod
    def from_arrays(
        cls, loss_rows: np.ndarray, rel_rows: np.ndarray, initial_rel: Optional[float] = None
    ) -> "TrainHistory":
        return cls(
            loss_rows=[tuple(float(v) for v in row) for row in loss_rows],
            rel_rows=[(int(row[0]), float(row[1])) for row in rel_rows],
            initial_rel=initial_rel,
        )


@dataclass
class TrainResult:
    network: FfmNetwork
    history: TrainHistory
    optimizer: OptimizerState
    epochs_completed: int


# ==================== Evaluation ====================

def predict(net: FfmNetwork, plan: NormalizationPlan, x, t, workers: Optional[int] = None) -> np.ndarray:
    """Network prediction at physical points, evaluated chunk-wise."""
    settings = get_settings()
    z = plan.to_unit(x, t)
    slices = chunk_slices(len(z), settings.chunk_size)
    if not slices:
        return np.zeros(0)
    parts = map_ordered(
        lambda sl: value_grad_laplacian(net, z[sl], order=0).value,
        slices,
        workers or settings.workers,
    )
    return np.concatenate(parts)


def rel_from_values(pred: np.ndarray, exact: np.ndarray) -> float:
    """sqrt(sum (pred - exact)^2 / sum exact^2)."""
    pred = np.asarray(pred, dtype=float)
    exact = np.asarray(exact, dtype=float)
    denom = float(np.dot(exact, exact))
    if denom == 0.0:
        raise DegenerateReferenceError("reference solution is identically zero on the test set")
    diff = pred - exact
    return float(np.sqrt(np.dot(diff, diff) / denom))


def evaluate_rel(
    net: FfmNetwork,
    plan: NormalizationPlan,
    problem,
    test_set: EvaluationSet,
    workers: Optional[int] = None,
) -> float:
    if len(test_set) == 0:
        raise DegenerateReferenceError("test set is empty")
    exact = test_set.exact
    if exact is None:
        if problem.exact is None:
            raise UnsupportedError(f"problem '{problem.name}' has no exact solution; REL is undefined")
        exact = problem.exact(test_set.x, test_set.t)[0]
    return rel_from_values(predict(net, plan, test_set.x, test_set.t, workers), exact)


# ==================== Training loop ====================

def _checkpoint(path: Path, net, state, epoch, config, rng, history, meta):
    save_checkpoint(path, Checkpoint(
        network=net,
        optimizer=state,
        epoch=epoch,
        seed=config.seed,
        rng_state=rng.bit_generator.state,
        loss_rows=history.loss_array(),
        rel_rows=history.rel_array(),
        meta=meta,
        initial_rel=history.initial_rel,
    ))


def train(
    problem,
    net: FfmNetwork,
    plan: NormalizationPlan,
    config: TrainConfig,
    weights: LossWeights,
    test_set: Optional[EvaluationSet] = None,
    data_set: Optional[DataSet] = None,
    checkpoint_dir=None,
    resume: Optional[Checkpoint] = None,
    meta: Optional[Dict[str, Any]] = None,
    workers: Optional[int] = None,
) -> TrainResult:
    """Run epochs [start, config.epochs) and return the trained network with its history."""
    meta = dict(meta or {})
    if resume is not None:
        net = resume.network.copy()
        state = resume.optimizer.copy()
        rng = restore_rng(resume.rng_state)
        history = TrainHistory.from_arrays(resume.loss_rows, resume.rel_rows, resume.initial_rel)
        start = resume.epoch
        logger.info(f"Resuming training at epoch {start} of {config.epochs}")
    else:
        state = OptimizerState.fresh(net.parameter_count)
        rng = np.random.default_rng(config.seed)
        history = TrainHistory()
        start = 0

    track_rel = test_set is not None and (test_set.exact is not None or problem.exact is not None)
    if track_rel and start == 0:
        history.initial_rel = evaluate_rel(net, plan, problem, test_set, workers)
        logger.info(f"Initial REL: {history.initial_rel:.6e}")

    checkpoint_every = config.test_interval if config.checkpoint_interval is None else config.checkpoint_interval
    checkpoint_path = Path(checkpoint_dir) / CHECKPOINT_NAME if checkpoint_dir else None

    logger.info(
        f"Training {problem.name} [{plan.mode.value}]: epochs {start}..{config.epochs}, "
        f"counts {config.counts}, {net.parameter_count} parameters"
    )
    tic = time.perf_counter()
    for epoch in range(start, config.epochs):
        batch = sample_training_batch(problem, config.counts, rng)
        lr = lr_at(config, epoch)
        try:
            loss, grad = loss_and_gradient(net, plan, problem, batch, weights, data_set, workers)
            params, state = adam_step(
                state, net.params, grad, lr, config.adam_beta1, config.adam_beta2, config.adam_eps
            )
        except NumericError as e:
            logger.error(
                f"Training aborted at epoch {epoch + 1}: {e.detail}"
                + (f"; last checkpoint kept at {checkpoint_path}" if checkpoint_path else "")
            )
            raise
        net.set_params(params)
        done = epoch + 1
        history.loss_rows.append(
            (float(done), loss.total, loss.pde, loss.bc, loss.ic_value, loss.ic_velocity, loss.data, lr)
        )

        if done % config.test_interval == 0:
            elapsed = time.perf_counter() - tic
            history.interval_seconds.append(elapsed)
            message = f"epoch {done}/{config.epochs} loss={loss.total:.4e} lr={lr:.4e}"
            if track_rel:
                rel = evaluate_rel(net, plan, problem, test_set, workers)
                history.rel_rows.append((done, rel))
                message += f" REL={rel:.4e}"
            logger.info(f"{message} ({elapsed:.1f}s)")
            tic = time.perf_counter()

        if checkpoint_path is not None and checkpoint_every and (
            done % checkpoint_every == 0 or done == config.epochs
        ):
            _checkpoint(checkpoint_path, net, state, done, config, rng, history, meta)

    return TrainResult(network=net, history=history, optimizer=state, epochs_completed=config.epochs)
