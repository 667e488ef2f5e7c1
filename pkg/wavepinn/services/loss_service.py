"""
Loss Service

Composite training loss:

    total = w_pde * pde + w_bc * bc + w_ic_value * ic_value + w_ic_velocity * ic_velocity
            + w_data * data

Every component is the mean over its batch of squared residuals (normalize module).
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from wavepinn.errors import ArgumentError, FileError
from wavepinn.schemas import LossWeights
from wavepinn.services import normalization_service as ns
from wavepinn.services.deriv_engine import LinearizedResidual, ResidualTerm, evaluate_terms
from wavepinn.services.fourier_net import FfmNetwork
from wavepinn.services.geometry_service import TrainingBatch

logger = logging.getLogger(__name__)

COMPONENTS = ("pde", "bc", "ic_value", "ic_velocity", "data")


@dataclass
class LossBreakdown:
    pde: float = 0.0
    bc: float = 0.0
    ic_value: float = 0.0
    ic_velocity: float = 0.0
    data: float = 0.0
    total: float = 0.0

    @classmethod
    def from_components(cls, components: Dict[str, float], weights: LossWeights) -> "LossBreakdown":
        values = {name: float(components.get(name, 0.0)) for name in COMPONENTS}
        total = (
            weights.w_pde * values["pde"]
            + weights.w_bc * values["bc"]
            + weights.w_ic_value * values["ic_value"]
            + weights.w_ic_velocity * values["ic_velocity"]
            + weights.w_data * values["data"]
        )
        return cls(total=total, **values)

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class DataSet:
    """Labeled points (x, t, u) for the optional supervised term."""

    x: np.ndarray
    t: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def load_data_set(path, dim: int) -> DataSet:
    """Read a CSV with columns x1..xd, t, u."""
    path = Path(path)
    if not path.is_file():
        raise FileError(path, "data file not found")
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise FileError(path, f"cannot parse data file ({e})")
    columns = [f"x{i + 1}" for i in range(dim)] + ["t", "u"]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise FileError(path, f"missing column(s) {', '.join(missing)}")
    values = frame[columns].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise FileError(path, "data file contains non-finite values")
    logger.info(f"Loaded {len(values)} labeled points from {path}")
    return DataSet(x=values[:, :dim], t=values[:, dim], u=values[:, dim + 1])


def build_terms(
    plan: ns.NormalizationPlan,
    problem,
    batch: TrainingBatch,
    weights: LossWeights,
    data_set: Optional[DataSet] = None,
) -> List[ResidualTerm]:
    """Residual terms of the composite loss for one training batch."""
    if len(batch.interior_t) == 0:
        raise ArgumentError("interior batch is empty")

    ix, it = batch.interior_x, batch.interior_t
    terms = [ResidualTerm(
        name="pde",
        inputs=plan.to_unit(ix, it),
        order=2,
        residual=lambda b, sl: ns.pde_terms(problem, plan, b, ix[sl], it[sl]),
        weight=weights.w_pde,
    )]

    boundary = batch.boundary
    if len(boundary):
        bx, bt, normal = boundary.x, boundary.t, boundary.normal
        data = problem.boundary_values(boundary)
        terms.append(ResidualTerm(
            name="bc",
            inputs=plan.to_unit(bx, bt),
            order=0 if problem.boundary_kind == "dirichlet" else 1,
            residual=lambda b, sl: ns.boundary_terms(problem, plan, b, bx[sl], bt[sl], normal[sl], data[sl]),
            weight=weights.w_bc,
        ))

    if len(batch.initial_x):
        x0 = batch.initial_x
        z0 = plan.to_unit(x0, batch.initial_t)
        terms.append(ResidualTerm(
            name="ic_value",
            inputs=z0,
            order=0,
            residual=lambda b, sl: ns.initial_value_terms(problem, b, x0[sl]),
            weight=weights.w_ic_value,
        ))
        terms.append(ResidualTerm(
            name="ic_velocity",
            inputs=z0,
            order=1,
            residual=lambda b, sl: ns.initial_velocity_terms(problem, plan, b, x0[sl]),
            weight=weights.w_ic_velocity,
        ))

    if data_set is not None and len(data_set):
        labels = data_set.u
        terms.append(ResidualTerm(
            name="data",
            inputs=plan.to_unit(data_set.x, data_set.t),
            order=0,
            residual=lambda b, sl: LinearizedResidual(
                values=b.value - labels[sl], d_value=np.ones(len(b.value))
            ),
            weight=weights.w_data,
        ))
    return terms


def _field_components(field, terms: List[ResidualTerm]) -> Dict[str, float]:
    """Mean squares for any field with evaluate(z, order), e.g. an exact-solution oracle."""
    components = {}
    for term in terms:
        n = len(term.inputs)
        if n == 0:
            components[term.name] = 0.0
            continue
        bundle = field.evaluate(term.inputs, order=term.order)
        r = term.residual(bundle, slice(0, n)).values
        components[term.name] = float(np.dot(r, r)) / n
    return components


def assemble_loss(
    net,
    plan: ns.NormalizationPlan,
    problem,
    batch: TrainingBatch,
    weights: LossWeights,
    data_set: Optional[DataSet] = None,
    workers: Optional[int] = None,
) -> LossBreakdown:
    terms = build_terms(plan, problem, batch, weights, data_set)
    if isinstance(net, FfmNetwork):
        components = evaluate_terms(net, terms, with_gradient=False, workers=workers).components
    else:
        components = _field_components(net, terms)
    return LossBreakdown.from_components(components, weights)


def loss_and_gradient(
    net: FfmNetwork,
    plan: ns.NormalizationPlan,
    problem,
    batch: TrainingBatch,
    weights: LossWeights,
    data_set: Optional[DataSet] = None,
    workers: Optional[int] = None,
) -> Tuple[LossBreakdown, np.ndarray]:
    """Loss breakdown and the gradient of its total with respect to all parameters."""
    terms = build_terms(plan, problem, batch, weights, data_set)
    result = evaluate_terms(net, terms, with_gradient=True, workers=workers)
    return LossBreakdown.from_components(result.components, weights), result.grad
