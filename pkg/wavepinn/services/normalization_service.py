"""
Normalization Service

Affine maps between physical space-time coordinates and network inputs, and the PDE,
boundary and initial residuals rescaled by the chain-rule factors of the active mode:

    none            network sees (x, t)
    spatial         x~_i = (x_i - x_i^min) / s_i
    temporal        t~ = (t - t0) / s_T
    spatiotemporal  both

Data functions (forcing, boundary, initial data) are always evaluated at physical
coordinates; only the network derivatives are rescaled.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from wavepinn.errors import ConfigError
from wavepinn.services.deriv_engine import DerivativeBundle, LinearizedResidual

logger = logging.getLogger(__name__)


class NormalizationMode(str, Enum):
    NONE = "none"
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    SPATIOTEMPORAL = "spatiotemporal"

    @property
    def label(self) -> str:
        return {
            "none": "FPINN",
            "spatial": "S-NFPINN",
            "temporal": "T-NFPINN",
            "spatiotemporal": "ST-NFPINN",
        }[self.value]


@dataclass(frozen=True, eq=False)
class NormalizationPlan:
    mode: NormalizationMode
    x_min: np.ndarray
    s: np.ndarray
    t0: float
    s_T: float
    # spatio-temporal mode only: use 1/s_T instead of 1/s_T^2 on the second time derivative
    legacy_time_factor: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", NormalizationMode(self.mode))
        object.__setattr__(self, "x_min", np.asarray(self.x_min, dtype=float))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        if np.any(self.s <= 0) or not self.s_T > 0:
            raise ConfigError(f"normalization scales must be positive, got s={self.s}, s_T={self.s_T}")

    @classmethod
    def from_problem(cls, problem, mode, legacy_time_factor: bool = False) -> "NormalizationPlan":
        domain, time = problem.domain, problem.time
        return cls(
            mode=NormalizationMode(mode),
            x_min=domain.lower.copy(),
            s=domain.upper - domain.lower,
            t0=time.t0,
            s_T=time.span,
            legacy_time_factor=legacy_time_factor,
        )

    @property
    def dim(self) -> int:
        return len(self.s)

    @property
    def space_normalized(self) -> bool:
        return self.mode in (NormalizationMode.SPATIAL, NormalizationMode.SPATIOTEMPORAL)

    @property
    def time_normalized(self) -> bool:
        return self.mode in (NormalizationMode.TEMPORAL, NormalizationMode.SPATIOTEMPORAL)

    # -- coordinate maps -------------------------------------------------

    def to_unit(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xs = (x - self.x_min) / self.s if self.space_normalized else x
        ts = (t - self.t0) / self.s_T if self.time_normalized else t
        return np.concatenate([xs, ts[:, None]], axis=1)

    def to_physical(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        xs, ts = z[:, :-1], z[:, -1]
        x = self.x_min + self.s * xs if self.space_normalized else xs
        t = self.t0 + self.s_T * ts if self.time_normalized else ts
        return x, t

    # -- chain-rule factors ----------------------------------------------

    @property
    def space_first(self) -> np.ndarray:
        return 1.0 / self.s if self.space_normalized else np.ones(self.dim)

    @property
    def space_second(self) -> np.ndarray:
        return 1.0 / self.s ** 2 if self.space_normalized else np.ones(self.dim)

    @property
    def time_first(self) -> float:
        return 1.0 / self.s_T if self.time_normalized else 1.0

    @property
    def time_second(self) -> float:
        if not self.time_normalized:
            return 1.0
        if self.legacy_time_factor and self.mode is NormalizationMode.SPATIOTEMPORAL:
            return 1.0 / self.s_T
        return 1.0 / self.s_T ** 2

    def first_factors(self) -> np.ndarray:
        """d/d(physical) = factor * d/d(network input), per input coordinate."""
        return np.append(self.space_first, self.time_first)

    def second_factors(self) -> np.ndarray:
        return np.append(self.space_second, self.time_second)


def map_to_unit(plan: NormalizationPlan, x, t) -> np.ndarray:
    """Network input for physical points (x, t)."""
    z = plan.to_unit(x, t)
    return z[0] if np.ndim(t) == 0 else z


def map_to_physical(plan: NormalizationPlan, z):
    return plan.to_physical(z)


# ==================== Residuals from a derivative bundle ====================

def pde_terms(problem, plan: NormalizationPlan, bundle: DerivativeBundle, x, t) -> LinearizedResidual:
    """u~_tt c_T - a^2 sum_i c_i u~_ii - f(x, t, u~)."""
    c = plan.second_factors()
    d = plan.dim
    u = bundle.value
    laplacian = bundle.diag2[:, :d] @ c[:d]
    forcing = problem.forcing(x, t, u)
    values = c[d] * bundle.diag2[:, d] - problem.a_sq * laplacian - forcing

    d_diag2 = np.empty_like(bundle.diag2)
    d_diag2[:, :d] = -problem.a_sq * c[:d]
    d_diag2[:, d] = c[d]
    d_value = None
    if problem.forcing_du is not None:
        d_value = -problem.forcing_du(x, t, u)
    return LinearizedResidual(values=values, d_value=d_value, d_diag2=d_diag2)


def boundary_terms(
    problem, plan: NormalizationPlan, bundle: DerivativeBundle, x, t, normal, face_data
) -> LinearizedResidual:
    """
    Dirichlet: u~ - g_D. Neumann: sum_i c_i^(1) u~_i n_i - g_N.
    `face_data` holds the data values g at the points (already evaluated per face).
    """
    if problem.boundary_kind == "dirichlet":
        return LinearizedResidual(values=bundle.value - face_data, d_value=np.ones_like(face_data))
    c1 = plan.space_first
    d = plan.dim
    coef = normal * c1
    values = np.sum(bundle.grad[:, :d] * coef, axis=1) - face_data
    d_grad = np.zeros_like(bundle.grad)
    d_grad[:, :d] = coef
    return LinearizedResidual(values=values, d_grad=d_grad)


def initial_value_terms(problem, bundle: DerivativeBundle, x) -> LinearizedResidual:
    target = problem.initial_value(x)
    return LinearizedResidual(values=bundle.value - target, d_value=np.ones_like(target))


def initial_velocity_terms(problem, plan: NormalizationPlan, bundle: DerivativeBundle, x) -> LinearizedResidual:
    d = plan.dim
    target = problem.initial_velocity(x)
    values = plan.time_first * bundle.grad[:, d] - target
    d_grad = np.zeros_like(bundle.grad)
    d_grad[:, d] = plan.time_first
    return LinearizedResidual(values=values, d_grad=d_grad)


# ==================== Point-wise residual operations ====================

def _as_points(x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return x, t


def _unwrap(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def pde_residual(problem, field, plan: NormalizationPlan, x, t):
    """
    PDE residual at physical points. `field` is anything with
    evaluate(z, order) -> DerivativeBundle in network coordinates (network or oracle).
    """
    scalar = np.ndim(t) == 0
    x, t = _as_points(x, t)
    bundle = field.evaluate(plan.to_unit(x, t), order=2)
    return _unwrap(pde_terms(problem, plan, bundle, x, t).values, scalar)


def boundary_residual(problem, field, plan: NormalizationPlan, x, t, face, normal=None):
    """Boundary residual on one face (geometry Face) at physical points."""
    scalar = np.ndim(t) == 0
    x, t = _as_points(x, t)
    condition = problem.condition_for(face)
    if normal is None:
        normal = problem.face_normals(face, x)
    normal = np.atleast_2d(np.asarray(normal, dtype=float))
    order = 0 if problem.boundary_kind == "dirichlet" else 1
    bundle = field.evaluate(plan.to_unit(x, t), order=order)
    data = condition(x, t)
    return _unwrap(boundary_terms(problem, plan, bundle, x, t, normal, data).values, scalar)


def initial_residuals(problem, field, plan: NormalizationPlan, x):
    """(value residual, velocity residual) at spatial points x, t = t0."""
    scalar = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.full(len(x), problem.time.t0)
    bundle = field.evaluate(plan.to_unit(x, t), order=1)
    value = initial_value_terms(problem, bundle, x).values
    velocity = initial_velocity_terms(problem, plan, bundle, x).values
    return _unwrap(value, scalar), _unwrap(velocity, scalar)


# ==================== Closed-form fields ====================

class ComposedField:
    """
    A closed-form physical function seen through the plan's inverse map, so it can stand
    in for the network: evaluate(z) returns derivatives with respect to network inputs.
    """

    def __init__(self, physical, plan: NormalizationPlan):
        # physical(x, t) -> (u, grad (N, D), diag2 (N, D)) in physical coordinates
        self.physical = physical
        self.plan = plan

    def evaluate(self, z: np.ndarray, order: int = 2) -> DerivativeBundle:
        x, t = self.plan.to_physical(z)
        u, grad, diag2 = self.physical(x, t)
        # d/dz = d/dx * dx/dz with dx/dz = 1 / first factor
        scale1 = 1.0 / self.plan.first_factors()
        scale2 = scale1 ** 2
        return DerivativeBundle(
            value=np.asarray(u, dtype=float),
            grad=grad * scale1 if order >= 1 else None,
            diag2=diag2 * scale2 if order >= 2 else None,
        )


def exact_field(problem, plan: NormalizationPlan) -> Optional[ComposedField]:
    if problem.exact is None:
        return None
    return ComposedField(problem.exact, plan)
