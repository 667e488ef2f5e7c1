"""
Checkpoint Service

Checkpoint file layout (numpy .npz archive, format "wavepinn-checkpoint", version 1):

    header      JSON text: format, version, epoch (completed epochs), seed, initial REL, network config,
                run metadata (problem, normalization, ...)
    params      float64 flat parameter vector
    adam_m      float64 first moments
    adam_v      float64 second moments
    adam_step   int64 scalar
    rng_state   JSON text of the sampling generator's bit_generator.state
    loss_rows   float64 (epochs, 8): epoch, total, pde, bc, ic_value, ic_velocity, data, lr
    rel_rows    float64 (k, 2): epoch, rel

All arrays are stored bit-exactly, so loading and continuing reproduces an uninterrupted run.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from wavepinn.errors import ConfigError, FileError
from wavepinn.schemas import NetworkConfig
from wavepinn.services.fourier_net import FfmNetwork
from wavepinn.services.optimizer import OptimizerState

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "wavepinn-checkpoint"
CHECKPOINT_VERSION = 1
LOSS_ROW_WIDTH = 8
LATEST_NAME = "checkpoint_latest.npz"


@dataclass
class Checkpoint:
    network: FfmNetwork
    optimizer: OptimizerState
    epoch: int
    seed: int
    rng_state: Dict[str, Any]
    loss_rows: np.ndarray = field(default_factory=lambda: np.zeros((0, LOSS_ROW_WIDTH)))
    rel_rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    meta: Dict[str, Any] = field(default_factory=dict)
    initial_rel: Optional[float] = None


def save_checkpoint(path, checkpoint: Checkpoint) -> Path:
    """Write atomically: a crash mid-write never replaces the previous checkpoint."""
    path = Path(path)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "epoch": int(checkpoint.epoch),
        "seed": int(checkpoint.seed),
        "initial_rel": checkpoint.initial_rel,
        "network": checkpoint.network.config.model_dump(),
        "meta": checkpoint.meta,
    }
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as fh:
            np.savez(
                fh,
                header=np.array(json.dumps(header, sort_keys=True)),
                params=checkpoint.network.params,
                adam_m=checkpoint.optimizer.m,
                adam_v=checkpoint.optimizer.v,
                adam_step=np.array(checkpoint.optimizer.step, dtype=np.int64),
                rng_state=np.array(json.dumps(checkpoint.rng_state, sort_keys=True)),
                loss_rows=np.asarray(checkpoint.loss_rows, dtype=float).reshape(-1, LOSS_ROW_WIDTH),
                rel_rows=np.asarray(checkpoint.rel_rows, dtype=float).reshape(-1, 2),
            )
        os.replace(tmp, path)
    except OSError as e:
        raise FileError(path, f"cannot write checkpoint ({e})")
    logger.info(f"Checkpoint saved: {path} (epoch {checkpoint.epoch})")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileError(path, "checkpoint not found")
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            params = data["params"].copy()
            adam_m = data["adam_m"].copy()
            adam_v = data["adam_v"].copy()
            adam_step = int(data["adam_step"])
            rng_state = json.loads(str(data["rng_state"]))
            loss_rows = data["loss_rows"].copy()
            rel_rows = data["rel_rows"].copy()
    except (OSError, ValueError, KeyError) as e:
        raise FileError(path, f"not a readable checkpoint ({e})")

    if header.get("format") != CHECKPOINT_FORMAT:
        raise FileError(path, f"unexpected format tag {header.get('format')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(
            f"{path}: checkpoint version {header.get('version')} is not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )

    network = FfmNetwork(NetworkConfig.model_validate(header["network"]), params)
    logger.info(f"Checkpoint loaded: {path} (epoch {header['epoch']})")
    return Checkpoint(
        network=network,
        optimizer=OptimizerState(m=adam_m, v=adam_v, step=adam_step),
        epoch=int(header["epoch"]),
        seed=int(header["seed"]),
        rng_state=rng_state,
        loss_rows=loss_rows,
        rel_rows=rel_rows,
        meta=header.get("meta", {}),
        initial_rel=header.get("initial_rel"),
    )


def restore_rng(state: Dict[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    try:
        rng.bit_generator.state = state
    except (TypeError, ValueError) as e:
        raise ConfigError(f"checkpoint RNG state cannot be restored ({e})")
    return rng


def latest_checkpoint(directory) -> Optional[Path]:
    """checkpoint_latest.npz inside a checkpoint directory or a run directory, if any."""
    directory = Path(directory)
    for candidate in (directory / LATEST_NAME, directory / "checkpoints" / LATEST_NAME):
        if candidate.is_file():
            return candidate
    return None


def resolve_resume(path) -> Path:
    """A checkpoint file as given, or the latest checkpoint below a directory."""
    path = Path(path)
    if not path.is_dir():
        return path
    found = latest_checkpoint(path)
    if found is None:
        raise FileError(path, f"no {LATEST_NAME} in this directory or its checkpoints/")
    return found
