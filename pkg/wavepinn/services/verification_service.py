"""
Verification Service

Oracle checks behind the `gradcheck` and `residualcheck` commands:
- analytic input derivatives and parameter gradients against central finite differences
- exact-solution residuals of the built-in problems under every normalization mode
- chain-rule equivalence of the normalized residuals for random smooth test functions
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from wavepinn.schemas import LossWeights, NetworkConfig
from wavepinn.services import normalization_service as ns
from wavepinn.services.deriv_engine import evaluate_terms, value_grad_laplacian
from wavepinn.services.fourier_net import init_network
from wavepinn.services.geometry_service import sample_training_batch
from wavepinn.services.loss_service import build_terms, loss_and_gradient
from wavepinn.services.problem_registry import PROBLEM_NAMES, get_problem, self_test

logger = logging.getLogger(__name__)

INPUT_STEP = 1e-4
PARAM_STEP = 1e-5
INPUT_TOLERANCE = 1e-5
PARAM_TOLERANCE = 1e-4
CHAIN_RULE_TOLERANCE = 1e-9


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """||approx - exact|| / ||exact||, absolute when the reference is ~0."""
    approx = np.ravel(approx)
    exact = np.ravel(exact)
    scale = np.linalg.norm(exact)
    err = np.linalg.norm(approx - exact)
    return float(err / scale) if scale > 1e-12 else float(err)


# ==================== Finite differences ====================

def fd_input_derivatives(net, z: np.ndarray, step: float = INPUT_STEP):
    """Central-difference gradient and diagonal second derivatives at inputs z (N, D)."""
    z = np.atleast_2d(z)
    base = value_grad_laplacian(net, z, order=0).value
    grad = np.empty_like(z)
    diag2 = np.empty_like(z)
    for k in range(z.shape[1]):
        shift = np.zeros(z.shape[1])
        shift[k] = step
        plus = value_grad_laplacian(net, z + shift, order=0).value
        minus = value_grad_laplacian(net, z - shift, order=0).value
        grad[:, k] = (plus - minus) / (2 * step)
        diag2[:, k] = (plus - 2 * base + minus) / step ** 2
    return grad, diag2


def fd_param_gradient(loss_fn, params: np.ndarray, indices: Sequence[int], step: float = PARAM_STEP) -> np.ndarray:
    """Central differences of loss_fn(params) for the selected parameter indices."""
    fd = np.empty(len(indices))
    work = params.copy()
    for j, idx in enumerate(indices):
        h = step * max(1.0, abs(params[idx]))
        work[idx] = params[idx] + h
        plus = loss_fn(work)
        work[idx] = params[idx] - h
        minus = loss_fn(work)
        work[idx] = params[idx]
        fd[j] = (plus - minus) / (2 * h)
    return fd


# ==================== gradcheck ====================

def gradcheck(
    seeds: Iterable[int] = range(20),
    subnet_counts: Sequence[int] = (1, 3, 10),
    first_layers: Sequence[str] = ("fourier", "plain"),
    hidden_widths: Sequence[int] = (20, 15, 15, 10),
    problem_name: str = "example1_small",
    mode: str = "spatial",
    n_points: int = 8,
    n_params: int = 40,
) -> pd.DataFrame:
    """
    One row per (seed, Q, first layer): relative errors of the analytic gradient/diag2
    and of the parameter gradient against central finite differences.
    """
    problem = get_problem(problem_name)
    plan = ns.NormalizationPlan.from_problem(problem, mode)
    weights = LossWeights()
    rows = []
    for seed in seeds:
        for q in subnet_counts:
            for first_layer in first_layers:
                config = NetworkConfig(
                    input_dim=problem.input_dim,
                    hidden_widths=list(hidden_widths),
                    scales=[float(a) for a in range(1, q + 1)],
                    first_layer=first_layer,
                    init_seed=seed,
                )
                net = init_network(config)
                rng = np.random.default_rng(seed)

                z = rng.random((n_points, problem.input_dim))
                bundle = value_grad_laplacian(net, z, order=2)
                fd_grad, fd_diag2 = fd_input_derivatives(net, z)
                grad_err = relative_error(fd_grad, bundle.grad)
                diag2_err = relative_error(fd_diag2, bundle.diag2)

                batch = sample_training_batch(problem, (n_points, n_points, n_points), rng)
                _, analytic = loss_and_gradient(net, plan, problem, batch, weights)
                terms = build_terms(plan, problem, batch, weights)
                probe = net.copy()

                def total_loss(params):
                    probe.set_params(params)
                    components = evaluate_terms(probe, terms, with_gradient=False).components
                    return sum(term.weight * components[term.name] for term in terms)

                indices = rng.choice(net.parameter_count, size=min(n_params, net.parameter_count), replace=False)
                indices = np.sort(indices)
                fd = fd_param_gradient(total_loss, net.params, indices)
                param_err = relative_error(fd, analytic[indices])

                rows.append({
                    "seed": int(seed),
                    "subnet_count": q,
                    "first_layer": first_layer,
                    "grad_rel_err": grad_err,
                    "diag2_rel_err": diag2_err,
                    "param_rel_err": param_err,
                    "passed": bool(
                        grad_err <= INPUT_TOLERANCE
                        and diag2_err <= INPUT_TOLERANCE
                        and param_err <= PARAM_TOLERANCE
                    ),
                })
    frame = pd.DataFrame(rows)
    logger.info(
        f"gradcheck: {int(frame['passed'].sum())}/{len(frame)} configurations within tolerance"
    )
    return frame


# ==================== chain-rule equivalence ====================

class SmoothTestFunction:
    """g(y) = (c0 + c.y) * sin(k.y + phi) over y = (x1..xd, t), with exact derivatives."""

    def __init__(self, rng: np.random.Generator, input_dim: int, extent: float = 1.0):
        self.c0 = rng.uniform(-1, 1)
        self.c = rng.uniform(-1, 1, input_dim) / max(extent, 1.0)
        self.k = rng.uniform(-1, 1, input_dim) * np.pi / max(extent, 1.0) * 2
        self.phi = rng.uniform(0, 2 * np.pi)

    def __call__(self, x, t):
        y = np.column_stack([x, t])
        P = self.c0 + y @ self.c
        theta = y @ self.k + self.phi
        S, C = np.sin(theta), np.cos(theta)
        u = P * S
        grad = self.c * S[:, None] + (P * C)[:, None] * self.k
        diag2 = 2 * (self.c * self.k) * C[:, None] - (P * S)[:, None] * self.k ** 2
        return u, grad, diag2


def chain_rule_check(problem, n_functions: int = 100, n_points: int = 100, seed: int = 0) -> List[Dict[str, object]]:
    """
    Max relative difference between the un-normalized residual of g and the normalized
    residual of g composed with the inverse map, per mode.
    """
    rng = np.random.default_rng(seed)
    reference = ns.NormalizationPlan.from_problem(problem, ns.NormalizationMode.NONE)
    extent = float(max(np.max(problem.domain.upper - problem.domain.lower), problem.time.span))
    worst = {mode.value: 0.0 for mode in ns.NormalizationMode if mode is not ns.NormalizationMode.NONE}
    for _ in range(n_functions):
        g = SmoothTestFunction(rng, problem.input_dim, extent)
        batch = sample_training_batch(problem, (n_points, 1, 1), rng)
        x, t = batch.interior_x, batch.interior_t
        base = ns.pde_residual(problem, ns.ComposedField(g, reference), reference, x, t)
        for mode in worst:
            plan = ns.NormalizationPlan.from_problem(problem, mode)
            other = ns.pde_residual(problem, ns.ComposedField(g, plan), plan, x, t)
            diff = np.abs(other - base) / np.maximum(1.0, np.abs(base))
            worst[mode] = max(worst[mode], float(np.max(diff)))
    return [
        {
            "problem": problem.name,
            "mode": mode,
            "kind": "chain_rule",
            "points": n_functions * n_points,
            "max_abs_residual": value,
            "passed": value <= CHAIN_RULE_TOLERANCE,
        }
        for mode, value in worst.items()
    ]


# ==================== residualcheck ====================

def residualcheck(
    problem_names: Optional[Iterable[str]] = None,
    modes: Optional[Iterable[str]] = None,
    n_points: int = 1000,
    seed: int = 0,
    legacy_time_factor: bool = False,
    include_chain_rule: bool = True,
) -> pd.DataFrame:
    """Exact-solution residual report: one row per (problem, mode, residual kind)."""
    rows = []
    for name in problem_names or PROBLEM_NAMES:
        problem = get_problem(name)
        rows.extend(self_test(problem, modes, n_points, seed, legacy_time_factor))
        if include_chain_rule:
            rows.extend(chain_rule_check(problem, n_functions=20, n_points=50, seed=seed))
    frame = pd.DataFrame(rows)
    worst = float(frame["max_abs_residual"].max()) if len(frame) else 0.0
    logger.info(f"residualcheck: {int(frame['passed'].sum())}/{len(frame)} rows pass, worst {worst:.3e}")
    return frame
