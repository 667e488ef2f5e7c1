"""
Geometry Service

Computational domains (boxes with optional circular/spherical holes), Latin hypercube
sampling of training collocation sets and deterministic evaluation point sets:
- interior / boundary / initial training batches (resampled every epoch)
- equidistant grids, Fibonacci sphere surfaces and axis-parallel cut planes for testing
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from wavepinn.errors import ArgumentError, GeometryError
from wavepinn.schemas import CutPlanesEvalSet, GridEvalSet, SphereEvalSet

logger = logging.getLogger(__name__)

FACE_TOLERANCE = 1e-12
MAX_OVERSAMPLING = 1000
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class Hole:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class Face:
    """Outer face (axis, side in {'low', 'high'}) or hole surface (hole index)."""

    axis: Optional[int] = None
    side: Optional[str] = None
    hole: Optional[int] = None

    @property
    def is_hole(self) -> bool:
        return self.hole is not None

    @property
    def label(self) -> str:
        if self.is_hole:
            return f"hole{self.hole}"
        return f"x{self.axis + 1}_{self.side}"


@dataclass(frozen=True, eq=False)
class Domain:
    bounds: np.ndarray  # (dim, 2)
    holes: Tuple[Hole, ...] = ()

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise GeometryError(f"bounds must be (dim, 2) pairs, got shape {bounds.shape}")
        if bounds.shape[0] not in (2, 3):
            raise GeometryError(f"domain dimension must be 2 or 3, got {bounds.shape[0]}")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise GeometryError(f"every axis needs min < max, got {bounds.tolist()}")
        holes = []
        for hole in self.holes:
            center = np.asarray(hole.center, dtype=float)
            if center.shape != (bounds.shape[0],):
                raise GeometryError(f"hole center {center.tolist()} does not match dim {bounds.shape[0]}")
            if np.any(center <= bounds[:, 0]) or np.any(center >= bounds[:, 1]):
                raise GeometryError(f"hole center {center.tolist()} lies outside the domain bounds")
            if not hole.radius > 0:
                raise GeometryError(f"hole radius must be positive, got {hole.radius}")
            holes.append(Hole(center=center, radius=float(hole.radius)))
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "holes", tuple(holes))

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[:, 1]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def outer_faces(self) -> List[Face]:
        return [Face(axis=a, side=s) for a in range(self.dim) for s in ("low", "high")]

    def outside_holes(self, x: np.ndarray) -> np.ndarray:
        """Mask of points strictly outside every hole."""
        mask = np.ones(len(x), dtype=bool)
        for hole in self.holes:
            mask &= np.linalg.norm(x - hole.center, axis=1) > hole.radius
        return mask

    def contains(self, x: np.ndarray) -> np.ndarray:
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=1)
        return inside & self.outside_holes(x)


@dataclass(frozen=True)
class TimeRange:
    t0: float
    t_max: float

    def __post_init__(self):
        if not self.t0 < self.t_max:
            raise GeometryError(f"time range needs t0 < t_max, got ({self.t0}, {self.t_max})")

    @property
    def span(self) -> float:
        return self.t_max - self.t0


class SampleCounts(NamedTuple):
    interior: int
    boundary: int
    initial: int


@dataclass
class BoundaryBatch:
    x: np.ndarray        # (N_B, dim)
    t: np.ndarray        # (N_B,)
    face_index: np.ndarray  # (N_B,) index into `faces`
    normal: np.ndarray   # (N_B, dim), outward unit normals of the material domain
    faces: List[Face] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class TrainingBatch:
    interior_x: np.ndarray
    interior_t: np.ndarray
    boundary: BoundaryBatch
    initial_x: np.ndarray
    t0: float

    @property
    def initial_t(self) -> np.ndarray:
        return np.full(len(self.initial_x), self.t0)


@dataclass
class EvaluationSet:
    x: np.ndarray
    t: np.ndarray
    exact: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.t)


# ==================== Sampling ====================

def lhs_sample(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """
    Latin hypercube sample of n points in [0, 1)^d.

    Every dimension gets exactly one point in each stratum [k/n, (k+1)/n); the
    stratum order is an independent uniform permutation per dimension. Draws come
    from `rng` itself, so consecutive calls continue its stream.
    """
    if n < 1 or d < 1:
        raise ArgumentError(f"lhs_sample needs n >= 1 and d >= 1, got n={n}, d={d}")
    return qmc.LatinHypercube(d, seed=rng).random(n)


def _map_to_box(unit: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return lower + unit * (upper - lower)


def _sample_interior(domain: Domain, time: TimeRange, n: int, rng: np.random.Generator):
    """LHS space-time points, rejection-resampled until strictly inside and outside all holes."""
    dim = domain.dim
    kept_x, kept_t = [], []
    kept = drawn = 0
    while kept < n:
        if drawn >= MAX_OVERSAMPLING * n:
            raise GeometryError(
                f"interior rejection sampling kept {kept}/{n} points after {drawn} draws; "
                "holes cover the domain"
            )
        request = n if drawn == 0 else max(n - kept, 16) * 2
        unit = lhs_sample(request, dim + 1, rng)
        drawn += request
        x = _map_to_box(unit[:, :dim], domain.lower, domain.upper)
        t = time.t0 + unit[:, dim] * time.span
        ok = np.all((x > domain.lower) & (x < domain.upper), axis=1) & domain.outside_holes(x)
        kept_x.append(x[ok])
        kept_t.append(t[ok])
        kept += int(ok.sum())
    return np.concatenate(kept_x)[:n], np.concatenate(kept_t)[:n]


def _sample_initial(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    kept_x = []
    kept = drawn = 0
    while kept < n:
        if drawn >= MAX_OVERSAMPLING * n:
            raise GeometryError(
                f"initial rejection sampling kept {kept}/{n} points after {drawn} draws; "
                "holes cover the domain"
            )
        request = n if drawn == 0 else max(n - kept, 16) * 2
        x = _map_to_box(lhs_sample(request, domain.dim, rng), domain.lower, domain.upper)
        drawn += request
        ok = domain.outside_holes(x)
        kept_x.append(x[ok])
        kept += int(ok.sum())
    return np.concatenate(kept_x)[:n]


def _unit_directions(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def sample_boundary(
    domain: Domain,
    time: TimeRange,
    n: int,
    rng: np.random.Generator,
    include_holes: bool = False,
) -> BoundaryBatch:
    """
    Boundary points: face uniform over faces (one per hole when hole data exist),
    position and time LHS on the face, exact face coordinate, outward normal.
    """
    dim = domain.dim
    faces = domain.outer_faces()
    if include_holes:
        faces = faces + [Face(hole=i) for i in range(len(domain.holes))]

    face_index = rng.integers(0, len(faces), size=n)
    unit = lhs_sample(n, dim + 1, rng)
    x = _map_to_box(unit[:, :dim], domain.lower, domain.upper)
    t = time.t0 + unit[:, dim] * time.span
    normal = np.zeros((n, dim))

    for idx, face in enumerate(faces):
        sel = face_index == idx
        count = int(sel.sum())
        if not count:
            continue
        if face.is_hole:
            hole = domain.holes[face.hole]
            direction = _unit_directions(count, dim, rng)
            x[sel] = hole.center + hole.radius * direction
            # material lies outside the hole, so its outward normal points into the hole
            normal[sel] = -direction
        else:
            is_high = face.side == "high"
            x[sel, face.axis] = domain.upper[face.axis] if is_high else domain.lower[face.axis]
            normal[sel, face.axis] = 1.0 if is_high else -1.0

    return BoundaryBatch(x=x, t=t, face_index=face_index, normal=normal, faces=faces)


def sample_training_batch(problem, counts: Sequence[int], rng: np.random.Generator) -> TrainingBatch:
    """Draw the epoch's training set: interior, boundary and initial collocation points."""
    counts = SampleCounts(*counts)
    if min(counts) < 1:
        raise ArgumentError(f"sample counts must be positive, got {tuple(counts)}")
    domain, time = problem.domain, problem.time
    interior_x, interior_t = _sample_interior(domain, time, counts.interior, rng)
    boundary = sample_boundary(
        domain, time, counts.boundary, rng,
        include_holes=problem.hole_boundary is not None and bool(domain.holes),
    )
    initial_x = _sample_initial(domain, counts.initial, rng)
    return TrainingBatch(
        interior_x=interior_x,
        interior_t=interior_t,
        boundary=boundary,
        initial_x=initial_x,
        t0=time.t0,
    )


# ==================== Evaluation sets ====================

def _grid_points(lower: np.ndarray, upper: np.ndarray, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _sphere_points(center: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Fibonacci spiral on a sphere (3D) or equally spaced points on a circle (2D)."""
    i = np.arange(count) + 0.5
    if len(center) == 2:
        angle = 2.0 * np.pi * i / count
        return center + radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * np.arange(count)
    return center + radius * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _cut_plane_points(domain: Domain, planes, resolution: int) -> np.ndarray:
    blocks = []
    for plane in planes:
        if plane.axis >= domain.dim:
            raise GeometryError(f"cut plane axis {plane.axis} outside dimension {domain.dim}")
        if not domain.lower[plane.axis] <= plane.value <= domain.upper[plane.axis]:
            raise GeometryError(f"cut plane x{plane.axis + 1}={plane.value} lies outside the domain")
        others = [a for a in range(domain.dim) if a != plane.axis]
        face = _grid_points(domain.lower[others], domain.upper[others], resolution)
        pts = np.empty((len(face), domain.dim))
        pts[:, others] = face
        pts[:, plane.axis] = plane.value
        blocks.append(pts)
    return np.concatenate(blocks)


def build_test_set(spec, problem=None, domain: Optional[Domain] = None) -> EvaluationSet:
    """Deterministic evaluation points (+ exact values when the problem has an oracle)."""
    if domain is None:
        domain = problem.domain

    if isinstance(spec, GridEvalSet):
        x = _grid_points(domain.lower, domain.upper, spec.resolution)
        if spec.exclude_holes and domain.holes:
            x = x[domain.outside_holes(x)]
    elif isinstance(spec, SphereEvalSet):
        center = np.asarray(spec.center, dtype=float)
        if center.shape != (domain.dim,):
            raise GeometryError(f"sphere center {spec.center} does not match dim {domain.dim}")
        if np.any(center - spec.radius < domain.lower) or np.any(center + spec.radius > domain.upper):
            raise GeometryError(
                f"sphere of radius {spec.radius} at {spec.center} extends outside the domain"
            )
        x = _sphere_points(center, spec.radius, spec.count)
    elif isinstance(spec, CutPlanesEvalSet):
        x = _cut_plane_points(domain, spec.planes, spec.resolution)
        if spec.exclude_holes and domain.holes:
            x = x[domain.outside_holes(x)]
    else:
        raise ArgumentError(f"unknown evaluation set descriptor {spec!r}")

    t = np.full(len(x), float(spec.t_eval))
    exact = None
    if problem is not None and problem.exact is not None:
        exact = problem.exact(x, t)[0]
    logger.debug(f"Built {type(spec).__name__} with {len(x)} points at t={spec.t_eval}")
    return EvaluationSet(x=x, t=t, exact=exact)
