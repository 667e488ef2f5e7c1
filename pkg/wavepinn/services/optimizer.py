"""
Learning-rate schedule and Adam update on the flat parameter vector.
"""

import logging
from dataclasses import dataclass

import numpy as np

from wavepinn.errors import NumericError, ShapeError
from wavepinn.schemas import TrainConfig

logger = logging.getLogger(__name__)


def lr_at(config: TrainConfig, epoch: int) -> float:
    """
    staircase:  lr0 * (1 - decay_rate) ** floor(epoch / decay_interval_epochs)
    continuous: lr0 * (1 - decay_rate) ** (epoch / decay_interval_epochs)
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if config.lr_schedule == "continuous":
        exponent = epoch / config.decay_interval_epochs
    else:
        exponent = epoch // config.decay_interval_epochs
    return config.lr0 * (1.0 - config.decay_rate) ** exponent


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, size: int) -> "OptimizerState":
        return cls(m=np.zeros(size), v=np.zeros(size), step=0)

    def copy(self) -> "OptimizerState":
        return OptimizerState(m=self.m.copy(), v=self.v.copy(), step=self.step)


def adam_step(
    state: OptimizerState,
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """
    One bias-corrected Adam update. Returns (new params, new state); the inputs are left
    untouched, so a rejected step leaves no trace.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ShapeError(
            f"Adam shapes disagree: params {params.shape}, grad {grad.shape}, moments {state.m.shape}"
        )
    if not np.all(np.isfinite(grad)):
        bad = int(np.count_nonzero(~np.isfinite(grad)))
        raise NumericError("gradient", f"{bad} non-finite entries; optimizer state unchanged")

    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, OptimizerState(m=m, v=v, step=step)
