"""
Problem Registry

Built-in wave problems u_tt - a^2 Laplace(u) = f(x, t, u) with closed-form solutions,
plus declarative custom problems read from key=value files.

Neumann data are outward normal derivatives of the material domain: on a low face the
data equal -du/dx_i, on a high face +du/dx_i.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from wavepinn.errors import ConfigError, ProblemLookupError, UnsupportedError
from wavepinn.schemas import (
    CustomProblemSpec,
    CutPlane,
    CutPlanesEvalSet,
    EvalSetSpec,
    GridEvalSet,
    SphereEvalSet,
)
from wavepinn.services.geometry_service import (
    BoundaryBatch,
    Domain,
    Face,
    Hole,
    TimeRange,
    sample_training_batch,
)
from wavepinn.utils.expressions import (
    SymbolicOracle,
    compile_expression,
    derivative_in_u,
)

logger = logging.getLogger(__name__)

PI = np.pi
SELF_TEST_TOLERANCE = 1e-9

ExactOracle = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]
BoundaryData = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemDefaults:
    n_interior: int
    n_boundary: int
    n_initial: int
    subnet_count: int
    eval_set: EvalSetSpec


@dataclass(frozen=True, eq=False)
class WaveProblem:
    name: str
    a_sq: float
    domain: Domain
    time: TimeRange
    boundary_kind: str                       # "dirichlet" | "neumann"
    boundary: Dict[str, BoundaryData]        # keyed by Face.label
    forcing: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    initial_value: Callable[[np.ndarray], np.ndarray]
    initial_velocity: Callable[[np.ndarray], np.ndarray]
    defaults: ProblemDefaults
    exact: Optional[ExactOracle] = None
    forcing_du: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    hole_boundary: Optional[BoundaryData] = None
    description: str = ""

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def input_dim(self) -> int:
        return self.domain.dim + 1

    def condition_for(self, face: Face) -> BoundaryData:
        if face.is_hole:
            if self.hole_boundary is None:
                raise ConfigError(f"problem '{self.name}' declares no boundary data on {face.label}")
            return self.hole_boundary
        try:
            return self.boundary[face.label]
        except KeyError:
            raise ConfigError(f"problem '{self.name}' declares no boundary data on face {face.label}")

    def face_normals(self, face: Face, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if face.is_hole:
            hole = self.domain.holes[face.hole]
            offset = x - hole.center
            return -offset / np.linalg.norm(offset, axis=1, keepdims=True)
        normal = np.zeros_like(x, dtype=float)
        normal[:, face.axis] = 1.0 if face.side == "high" else -1.0
        return normal

    def boundary_values(self, batch: BoundaryBatch) -> np.ndarray:
        """Boundary data at every point of a boundary batch, face by face."""
        values = np.empty(len(batch))
        for idx, face in enumerate(batch.faces):
            sel = batch.face_index == idx
            if np.any(sel):
                values[sel] = self.condition_for(face)(batch.x[sel], batch.t[sel])
        return values


# ==================== Built-in problems ====================

def _sin(x, i):
    return np.sin(x[:, i])


def _cos(x, i):
    return np.cos(x[:, i])


def _t4(t):
    return np.asarray(t, dtype=float) ** 4


def _porous_holes(dim: int) -> Tuple[Hole, ...]:
    """Radius-pi circles/spheres on a 2-per-axis lattice at 2.5pi + 5pi*k."""
    centers = np.stack(np.meshgrid(*[[2.5 * PI, 7.5 * PI]] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    return tuple(Hole(center=c, radius=PI) for c in centers)


def _box(dim: int, upper: float) -> np.ndarray:
    return np.array([[0.0, upper]] * dim)


def _defaults_2d(eval_set) -> ProblemDefaults:
    return ProblemDefaults(n_interior=1500, n_boundary=300, n_initial=700, subnet_count=10, eval_set=eval_set)


def _defaults_3d(eval_set) -> ProblemDefaults:
    return ProblemDefaults(n_interior=2000, n_boundary=500, n_initial=1000, subnet_count=15, eval_set=eval_set)


# -- example 1: u = t^4 + sin x1 sin x2 sin t, a^2 = 1/2 -------------------

def _example1_exact(x, t):
    s1, s2, c1, c2 = _sin(x, 0), _sin(x, 1), _cos(x, 0), _cos(x, 1)
    st, ct = np.sin(t), np.cos(t)
    S = s1 * s2 * st
    u = _t4(t) + S
    grad = np.stack([c1 * s2 * st, s1 * c2 * st, 4 * t ** 3 + s1 * s2 * ct], axis=1)
    diag2 = np.stack([-S, -S, 12 * t ** 2 - S], axis=1)
    return u, grad, diag2


def _example1(name: str, upper: float, t_max: float, t_eval: float) -> WaveProblem:
    domain = Domain(bounds=_box(2, upper))
    dirichlet = {face.label: (lambda x, t: _t4(t)) for face in domain.outer_faces()}
    return WaveProblem(
        name=name,
        a_sq=0.5,
        domain=domain,
        time=TimeRange(0.0, t_max),
        boundary_kind="dirichlet",
        boundary=dirichlet,
        forcing=lambda x, t, u: 12 * np.asarray(t) ** 2 + 0 * x[:, 0],
        initial_value=lambda x: np.zeros(len(x)),
        initial_velocity=lambda x: _sin(x, 0) * _sin(x, 1),
        exact=_example1_exact,
        defaults=_defaults_2d(GridEvalSet(resolution=128, t_eval=t_eval)),
        description=f"u = t^4 + sin x1 sin x2 sin t on [0,{upper / PI:g}pi]^2, Dirichlet",
    )


# -- example 2: high frequency, a^2 = 0.01 -------------------------------

def _example2_exact(x, t):
    c8, c6 = np.cos(8 * x[:, 0]), np.cos(6 * x[:, 1])
    s8, s6 = np.sin(8 * x[:, 0]), np.sin(6 * x[:, 1])
    st, ct = np.sin(t), np.cos(t)
    C = c8 * c6 * st
    u = _t4(t) + C
    grad = np.stack([-8 * s8 * c6 * st, -6 * c8 * s6 * st, 4 * t ** 3 + c8 * c6 * ct], axis=1)
    diag2 = np.stack([-64 * C, -36 * C, 12 * t ** 2 - C], axis=1)
    return u, grad, diag2


def _example2() -> WaveProblem:
    domain = Domain(bounds=_box(2, 10 * PI))
    # cos(8x1) = 1 on x1 in {0, 10pi} and cos(6x2) = 1 on x2 in {0, 10pi}
    x1_face = lambda x, t: _t4(t) + np.cos(6 * x[:, 1]) * np.sin(t)
    x2_face = lambda x, t: _t4(t) + np.cos(8 * x[:, 0]) * np.sin(t)
    return WaveProblem(
        name="example2_highfreq",
        a_sq=0.01,
        domain=domain,
        time=TimeRange(0.0, 10.0),
        boundary_kind="dirichlet",
        boundary={"x1_low": x1_face, "x1_high": x1_face, "x2_low": x2_face, "x2_high": x2_face},
        forcing=lambda x, t, u: 12 * np.asarray(t) ** 2 + 0 * x[:, 0],
        initial_value=lambda x: np.zeros(len(x)),
        initial_velocity=lambda x: np.cos(8 * x[:, 0]) * np.cos(6 * x[:, 1]),
        exact=_example2_exact,
        defaults=_defaults_2d(GridEvalSet(resolution=128, t_eval=2.5)),
        description="u = t^4 + cos 8x1 cos 6x2 sin t on [0,10pi]^2, Dirichlet",
    )


# -- example 3: porous 2D, Neumann -----------------------------------------

def _example3_exact(x, t):
    x1 = x[:, 0]
    s1, s2, c1, c2 = _sin(x, 0), _sin(x, 1), _cos(x, 0), _cos(x, 1)
    st, ct = np.sin(t), np.cos(t)
    P = x1 * s1 * s2
    u = _t4(t) + P * st
    grad = np.stack([(s1 + x1 * c1) * s2 * st, x1 * s1 * c2 * st, 4 * t ** 3 + P * ct], axis=1)
    diag2 = np.stack([(2 * c1 - x1 * s1) * s2 * st, -P * st, 12 * t ** 2 - P * st], axis=1)
    return u, grad, diag2


def _example3() -> WaveProblem:
    domain = Domain(bounds=_box(2, 10 * PI), holes=_porous_holes(2))
    # outward derivatives of the solution, using sin = 0 and cos = 1 at 0 and 10pi
    neumann = {
        "x1_low": lambda x, t: 0 * x[:, 1] * np.sin(t),
        "x1_high": lambda x, t: 10 * PI * _sin(x, 1) * np.sin(t),
        "x2_low": lambda x, t: -x[:, 0] * _sin(x, 0) * np.sin(t),
        "x2_high": lambda x, t: x[:, 0] * _sin(x, 0) * np.sin(t),
    }
    return WaveProblem(
        name="example3_porous",
        a_sq=0.5,
        domain=domain,
        time=TimeRange(0.0, 10.0),
        boundary_kind="neumann",
        boundary=neumann,
        forcing=lambda x, t, u: 12 * np.asarray(t) ** 2 - _cos(x, 0) * _sin(x, 1) * np.sin(t),
        initial_value=lambda x: np.zeros(len(x)),
        initial_velocity=lambda x: x[:, 0] * _sin(x, 0) * _sin(x, 1),
        exact=_example3_exact,
        defaults=_defaults_2d(GridEvalSet(resolution=142, t_eval=2.5, exclude_holes=True)),
        description="u = t^4 + x1 sin x1 sin x2 sin t on porous [0,10pi]^2, Neumann",
    )


# -- example 4: 3D Dirichlet, sphere test set -----------------------------

def _example4_exact(x, t):
    s1, s2, s3 = _sin(x, 0), _sin(x, 1), _sin(x, 2)
    c1, c2, c3 = _cos(x, 0), _cos(x, 1), _cos(x, 2)
    st, ct = np.sin(t), np.cos(t)
    S = s1 * s2 * st
    u = _t4(t) + S + s3
    grad = np.stack([c1 * s2 * st, s1 * c2 * st, c3, 4 * t ** 3 + s1 * s2 * ct], axis=1)
    diag2 = np.stack([-S, -S, -s3, 12 * t ** 2 - S], axis=1)
    return u, grad, diag2


def _example4() -> WaveProblem:
    domain = Domain(bounds=_box(3, 10 * PI))
    side = lambda x, t: _t4(t) + _sin(x, 2)
    top = lambda x, t: _t4(t) + _sin(x, 0) * _sin(x, 1) * np.sin(t)
    boundary = {f"x{a}_{s}": side for a in (1, 2) for s in ("low", "high")}
    boundary.update({"x3_low": top, "x3_high": top})
    sphere = SphereEvalSet(center=[5 * PI] * 3, radius=3.0, count=3000, t_eval=2.5)
    return WaveProblem(
        name="example4_sphere",
        a_sq=0.5,
        domain=domain,
        time=TimeRange(0.0, 10.0),
        boundary_kind="dirichlet",
        boundary=boundary,
        forcing=lambda x, t, u: 12 * np.asarray(t) ** 2 + 0.5 * _sin(x, 2),
        initial_value=lambda x: _sin(x, 2),
        initial_velocity=lambda x: _sin(x, 0) * _sin(x, 1),
        exact=_example4_exact,
        defaults=_defaults_3d(sphere),
        description="u = t^4 + sin x1 sin x2 sin t + sin x3 on [0,10pi]^3, Dirichlet",
    )


# -- example 5: porous 3D, Neumann ------------------------------------------

def _example5_exact(x, t):
    s1, s2, s3 = _sin(x, 0), _sin(x, 1), _sin(x, 2)
    c1, c2, c3 = _cos(x, 0), _cos(x, 1), _cos(x, 2)
    st, ct = np.sin(t), np.cos(t)
    u = _t4(t) + s1 * s2 + s3 * st
    grad = np.stack([c1 * s2, s1 * c2, c3 * st, 4 * t ** 3 + s3 * ct], axis=1)
    diag2 = np.stack([-s1 * s2, -s1 * s2, -s3 * st, 12 * t ** 2 - s3 * st], axis=1)
    return u, grad, diag2


def _example5() -> WaveProblem:
    domain = Domain(bounds=_box(3, 10 * PI), holes=_porous_holes(3))
    neumann = {
        "x1_low": lambda x, t: -_sin(x, 1),
        "x1_high": lambda x, t: _sin(x, 1),
        "x2_low": lambda x, t: -_sin(x, 0),
        "x2_high": lambda x, t: _sin(x, 0),
        "x3_low": lambda x, t: -np.sin(t) + 0 * x[:, 0],
        "x3_high": lambda x, t: np.sin(t) + 0 * x[:, 0],
    }
    planes = CutPlanesEvalSet(
        planes=[CutPlane(axis=2, value=2.5 * PI), CutPlane(axis=0, value=2.5 * PI)],
        resolution=64,
        exclude_holes=True,
        t_eval=2.5,
    )
    return WaveProblem(
        name="example5_porous3d",
        a_sq=1.0,
        domain=domain,
        time=TimeRange(0.0, 10.0),
        boundary_kind="neumann",
        boundary=neumann,
        forcing=lambda x, t, u: 12 * np.asarray(t) ** 2 + 2 * _sin(x, 0) * _sin(x, 1),
        initial_value=lambda x: _sin(x, 0) * _sin(x, 1),
        initial_velocity=lambda x: _sin(x, 2),
        exact=_example5_exact,
        defaults=_defaults_3d(planes),
        description="u = t^4 + sin x1 sin x2 + sin x3 sin t on porous [0,10pi]^3, Neumann",
    )


_BUILDERS: Dict[str, Callable[[], WaveProblem]] = {
    "example1_small": lambda: _example1("example1_small", 2 * PI, 2.0, 0.5),
    "example1_large": lambda: _example1("example1_large", 10 * PI, 10.0, 2.5),
    "example2_highfreq": _example2,
    "example3_porous": _example3,
    "example4_sphere": _example4,
    "example5_porous3d": _example5,
}

PROBLEM_NAMES: Tuple[str, ...] = tuple(_BUILDERS)


def get_problem(name: str) -> WaveProblem:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ProblemLookupError(f"unknown problem '{name}'; choose one of {', '.join(PROBLEM_NAMES)}")
    return builder()


def exact_eval(problem: WaveProblem, x, t):
    """(u, grad, diag2) of the closed-form solution at physical points."""
    if problem.exact is None:
        raise UnsupportedError(f"problem '{problem.name}' has no exact solution")
    scalar = np.ndim(t) == 0
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    u, grad, diag2 = problem.exact(x, t)
    if scalar:
        return float(u[0]), grad[0], diag2[0]
    return u, grad, diag2


# ==================== Custom problems ====================

def _default_eval_set(spec: CustomProblemSpec):
    t_eval = spec.t0 + 0.25 * (spec.t_max - spec.t0)
    return GridEvalSet(resolution=128 if spec.dim == 2 else 32, t_eval=t_eval, exclude_holes=True)


def build_custom_problem(spec: CustomProblemSpec) -> WaveProblem:
    """Compile a declarative problem description into a WaveProblem."""
    dim = spec.dim
    if len(spec.bounds) != dim:
        raise ConfigError(f"bounds: expected {dim} (min, max) pairs, got {len(spec.bounds)}")
    domain = Domain(
        bounds=np.array(spec.bounds, dtype=float),
        holes=tuple(Hole(center=np.array(h.center, dtype=float), radius=h.radius) for h in spec.holes),
    )

    forcing = compile_expression(spec.forcing, dim, allow_u=True, key="forcing")
    forcing_du = derivative_in_u(forcing)
    boundary = {}
    for key, text in spec.face_expressions().items():
        if text is None:
            continue
        boundary[key[len("boundary_"):]] = compile_expression(text, dim, key=key)
    hole_boundary = None
    if spec.hole_boundary is not None:
        hole_boundary = compile_expression(spec.hole_boundary, dim, key="hole_boundary")

    initial_value = compile_expression(spec.initial_value, dim, key="initial_value")
    initial_velocity = compile_expression(spec.initial_velocity, dim, key="initial_velocity")
    exact = SymbolicOracle(spec.exact, dim) if spec.exact is not None else None

    t0 = spec.t0
    defaults = (_defaults_2d if dim == 2 else _defaults_3d)(_default_eval_set(spec))
    problem = WaveProblem(
        name=spec.name,
        a_sq=spec.a_sq,
        domain=domain,
        time=TimeRange(spec.t0, spec.t_max),
        boundary_kind=spec.boundary_kind,
        boundary=boundary,
        forcing=lambda x, t, u: forcing(x, t, u),
        forcing_du=(lambda x, t, u: forcing_du(x, t, u)) if forcing_du is not None else None,
        initial_value=lambda x: initial_value(x, np.full(len(np.atleast_2d(x)), t0)),
        initial_velocity=lambda x: initial_velocity(x, np.full(len(np.atleast_2d(x)), t0)),
        exact=exact,
        hole_boundary=hole_boundary,
        defaults=defaults,
        description=f"custom problem '{spec.name}'",
    )
    logger.info(
        f"Built custom problem '{spec.name}': dim={dim}, {spec.boundary_kind}, "
        f"{len(boundary)}/{2 * dim} faces with data, {len(domain.holes)} holes"
    )
    return problem


def load_custom_problem(path) -> WaveProblem:
    from wavepinn.utils.config_file import build_model, read_key_values

    values = read_key_values(path)
    spec = build_model(CustomProblemSpec, values, source=str(path))
    return build_custom_problem(spec)


def resolve_problem(name: Optional[str], problem_file: Optional[str] = None) -> WaveProblem:
    if problem_file:
        return load_custom_problem(Path(problem_file))
    return get_problem(name)


# ==================== Self test ====================

def self_test(
    problem: WaveProblem,
    modes: Optional[Iterable[str]] = None,
    n_points: int = 1000,
    seed: int = 0,
    legacy_time_factor: bool = False,
) -> List[Dict[str, object]]:
    """
    Maximum absolute residual of the exact solution per mode and residual kind, at random
    interior, boundary and initial points. One row per (mode, kind).
    """
    from wavepinn.services import normalization_service as ns

    if problem.exact is None:
        raise UnsupportedError(f"problem '{problem.name}' has no exact solution to self-test")
    modes = list(modes) if modes is not None else [m.value for m in ns.NormalizationMode]
    rows = []
    for mode in modes:
        rng = np.random.default_rng(seed)
        plan = ns.NormalizationPlan.from_problem(problem, mode, legacy_time_factor=legacy_time_factor)
        field_ = ns.exact_field(problem, plan)
        batch = sample_training_batch(problem, (n_points, n_points, n_points), rng)

        pde = ns.pde_residual(problem, field_, plan, batch.interior_x, batch.interior_t)
        bc = []
        boundary = batch.boundary
        for idx, face in enumerate(boundary.faces):
            sel = boundary.face_index == idx
            if np.any(sel):
                bc.append(ns.boundary_residual(
                    problem, field_, plan, boundary.x[sel], boundary.t[sel], face, normal=boundary.normal[sel]
                ))
        bc = np.concatenate(bc) if bc else np.zeros(0)
        ic_value, ic_velocity = ns.initial_residuals(problem, field_, plan, batch.initial_x)

        for kind, values in (("pde", pde), ("bc", bc), ("ic_value", ic_value), ("ic_velocity", ic_velocity)):
            max_abs = float(np.max(np.abs(values))) if len(values) else 0.0
            rows.append({
                "problem": problem.name,
                "mode": mode,
                "kind": kind,
                "points": int(len(values)),
                "max_abs_residual": max_abs,
                "passed": max_abs <= SELF_TEST_TOLERANCE,
            })
    return rows
