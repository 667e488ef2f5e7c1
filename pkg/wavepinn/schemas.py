from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from wavepinn.errors import ConfigError


def _split_list(value: Any, sep: str = ",") -> Any:
    """Accept comma separated strings from key=value files for list fields."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(sep)]
        return [p for p in parts if p]
    return value


def _derived(model, **values):
    """Build a derived config; validation failures surface as ConfigError naming the key."""
    try:
        return model(**values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise ConfigError(f"invalid value for '{key}': {first.get('msg')}")


# ------------------------------------------------------------------
# NETWORK / TRAINING / LOSS SCHEMAS
# ------------------------------------------------------------------

class NetworkConfig(BaseModel):
    """Architecture of the FFM network: Q subnetworks, one input scale each."""

    input_dim: int = Field(ge=2)
    hidden_widths: List[int] = Field(default_factory=lambda: [20, 15, 15, 10])
    scales: List[float] = Field(default_factory=lambda: [float(a) for a in range(1, 11)])
    first_layer: Literal["fourier", "plain"] = "fourier"
    init_seed: int = 0

    @field_validator("hidden_widths", "scales", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @property
    def subnet_count(self) -> int:
        return len(self.scales)

    def check(self) -> None:
        """Structural invariants; raises ConfigError."""
        if not self.hidden_widths:
            raise ConfigError("hidden_widths must name at least one layer")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError(f"hidden_widths must be positive, got {self.hidden_widths}")
        if self.first_layer == "fourier" and self.hidden_widths[0] % 2:
            raise ConfigError(
                f"first hidden width {self.hidden_widths[0]} must be even for a Fourier layer "
                "(cos/sin halves)"
            )
        if not self.scales:
            raise ConfigError("scales must contain at least one subnet scale")
        if any(not (a >= 1.0) for a in self.scales):
            raise ConfigError(f"subnet scales must all be >= 1, got {self.scales}")


class TrainConfig(BaseModel):
    epochs: int = Field(default=30000, ge=1)
    n_interior: int = Field(default=1500, ge=1)
    n_boundary: int = Field(default=300, ge=1)
    n_initial: int = Field(default=700, ge=1)
    test_interval: int = Field(default=1000, ge=1)
    lr0: float = Field(default=0.01, gt=0)
    decay_rate: float = Field(default=0.035, ge=0, lt=1)
    decay_interval_epochs: int = Field(default=100, ge=1)
    lr_schedule: Literal["staircase", "continuous"] = "staircase"
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    seed: int = 0
    # None -> same cadence as test_interval, 0 -> no checkpoints
    checkpoint_interval: Optional[int] = Field(default=None, ge=0)

    @property
    def counts(self) -> Tuple[int, int, int]:
        return (self.n_interior, self.n_boundary, self.n_initial)


class LossWeights(BaseModel):
    model_config = ConfigDict(allow_inf_nan=False)

    w_pde: float = Field(default=1.0, ge=0)
    w_bc: float = Field(default=1.0, ge=0)  # gamma, boundary weight
    w_ic_value: float = Field(default=1.0, ge=0)
    w_ic_velocity: float = Field(default=1.0, ge=0)
    w_data: float = Field(default=1.0, ge=0)


# ------------------------------------------------------------------
# EVALUATION SET DESCRIPTORS
# ------------------------------------------------------------------

class GridEvalSet(BaseModel):
    kind: Literal["grid"] = "grid"
    resolution: int = Field(default=128, ge=2)
    t_eval: float
    exclude_holes: bool = True


class SphereEvalSet(BaseModel):
    kind: Literal["sphere"] = "sphere"
    center: List[float]
    radius: float = Field(gt=0)
    count: int = Field(ge=1)
    t_eval: float


class CutPlane(BaseModel):
    axis: int = Field(ge=0)
    value: float


class CutPlanesEvalSet(BaseModel):
    kind: Literal["cut_planes"] = "cut_planes"
    planes: List[CutPlane]
    resolution: int = Field(default=64, ge=2)
    exclude_holes: bool = True
    t_eval: float


EvalSetSpec = Annotated[
    Union[GridEvalSet, SphereEvalSet, CutPlanesEvalSet],
    Field(discriminator="kind"),
]


# ------------------------------------------------------------------
# RUN CONFIG (flat, one key per config-file line)
# ------------------------------------------------------------------

NORMALIZATION_MODES = ("none", "spatial", "temporal", "spatiotemporal")


class RunConfig(BaseModel):
    """
    Flat run configuration. Keys match the config-file keys one to one.
    Optional fields left as None resolve to the selected problem's defaults.
    """

    model_config = ConfigDict(extra="forbid")

    problem: str = "example1_large"
    problem_file: Optional[str] = None
    normalization: Literal["none", "spatial", "temporal", "spatiotemporal"] = "spatial"
    legacy_st_time_factor: bool = False

    # network
    hidden_widths: List[int] = Field(default_factory=lambda: [20, 15, 15, 10])
    scales: Optional[List[float]] = None
    subnet_count: Optional[int] = Field(default=None, ge=1)
    first_layer: Literal["fourier", "plain"] = "fourier"
    init_seed: int = 0

    # training
    epochs: int = Field(default=30000, ge=1)
    n_interior: Optional[int] = Field(default=None, ge=1)
    n_boundary: Optional[int] = Field(default=None, ge=1)
    n_initial: Optional[int] = Field(default=None, ge=1)
    test_interval: int = Field(default=1000, ge=1)
    lr0: float = Field(default=0.01, gt=0)
    decay_rate: float = Field(default=0.035, ge=0, lt=1)
    decay_interval_epochs: int = Field(default=100, ge=1)
    lr_schedule: Literal["staircase", "continuous"] = "staircase"
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    seed: int = 0
    checkpoint_interval: Optional[int] = Field(default=None, ge=0)

    # loss
    w_pde: float = Field(default=1.0, ge=0)
    w_bc: float = Field(default=1.0, ge=0)
    w_ic_value: float = Field(default=1.0, ge=0)
    w_ic_velocity: float = Field(default=1.0, ge=0)
    w_data: float = Field(default=1.0, ge=0)
    data_file: Optional[str] = None

    output_dir: Optional[str] = None

    # evaluation set
    eval_kind: Optional[Literal["grid", "sphere", "cut_planes"]] = None
    eval_resolution: Optional[int] = Field(default=None, ge=2)
    eval_t: Optional[float] = None
    eval_exclude_holes: Optional[bool] = None
    eval_center: Optional[List[float]] = None
    eval_radius: Optional[float] = Field(default=None, gt=0)
    eval_count: Optional[int] = Field(default=None, ge=1)
    eval_planes: Optional[List[CutPlane]] = None

    @field_validator("hidden_widths", "scales", "eval_center", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("eval_planes", mode="before")
    @classmethod
    def _parse_planes(cls, value: Any) -> Any:
        if isinstance(value, str):
            planes = []
            for item in _split_list(value, ";"):
                axis, _, plane_value = item.partition(":")
                planes.append({"axis": int(axis), "value": float(plane_value)})
            return planes
        return value

    @field_validator("problem_file", "data_file", "output_dir", mode="before")
    @classmethod
    def _empty_is_none(cls, value: Any) -> Any:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    # -- derived configs -------------------------------------------------

    def network_config(self, input_dim: int) -> NetworkConfig:
        scales = self.scales
        if scales is None:
            count = self.subnet_count or 10
            scales = [float(a) for a in range(1, count + 1)]
        return _derived(
            NetworkConfig,
            input_dim=input_dim,
            hidden_widths=self.hidden_widths,
            scales=scales,
            first_layer=self.first_layer,
            init_seed=self.init_seed,
        )

    def train_config(self) -> TrainConfig:
        return _derived(
            TrainConfig,
            epochs=self.epochs,
            n_interior=self.n_interior or 1500,
            n_boundary=self.n_boundary or 300,
            n_initial=self.n_initial or 700,
            test_interval=self.test_interval,
            lr0=self.lr0,
            decay_rate=self.decay_rate,
            decay_interval_epochs=self.decay_interval_epochs,
            lr_schedule=self.lr_schedule,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            checkpoint_interval=self.checkpoint_interval,
        )

    def loss_weights(self) -> LossWeights:
        return _derived(
            LossWeights,
            w_pde=self.w_pde,
            w_bc=self.w_bc,
            w_ic_value=self.w_ic_value,
            w_ic_velocity=self.w_ic_velocity,
            w_data=self.w_data,
        )

    def eval_set(self) -> Union[GridEvalSet, SphereEvalSet, CutPlanesEvalSet]:
        if self.eval_kind is None or self.eval_t is None:
            raise ConfigError("eval_kind and eval_t must be set (or resolved from the problem)")
        if self.eval_kind == "grid":
            return _derived(
                GridEvalSet,
                resolution=self.eval_resolution or 128,
                t_eval=self.eval_t,
                exclude_holes=True if self.eval_exclude_holes is None else self.eval_exclude_holes,
            )
        if self.eval_kind == "sphere":
            if self.eval_center is None or self.eval_radius is None or self.eval_count is None:
                raise ConfigError("sphere evaluation needs eval_center, eval_radius and eval_count")
            return _derived(
                SphereEvalSet,
                center=self.eval_center,
                radius=self.eval_radius,
                count=self.eval_count,
                t_eval=self.eval_t,
            )
        if not self.eval_planes:
            raise ConfigError("cut_planes evaluation needs eval_planes")
        return _derived(
            CutPlanesEvalSet,
            planes=self.eval_planes,
            resolution=self.eval_resolution or 64,
            exclude_holes=True if self.eval_exclude_holes is None else self.eval_exclude_holes,
            t_eval=self.eval_t,
        )


# ------------------------------------------------------------------
# CUSTOM PROBLEM DESCRIPTION
# ------------------------------------------------------------------

class HoleSpec(BaseModel):
    center: List[float]
    radius: float = Field(gt=0)


class CustomProblemSpec(BaseModel):
    """Declarative wave problem; expressions use x1..xd, t (and u in forcing)."""

    model_config = ConfigDict(extra="forbid")

    name: str = "custom"
    dim: int = Field(ge=2, le=3)
    bounds: List[Tuple[float, float]]
    t0: float = 0.0
    t_max: float
    a_sq: float = Field(gt=0)
    forcing: str = "0"
    boundary_kind: Literal["dirichlet", "neumann"] = "dirichlet"
    boundary: Optional[str] = None
    boundary_x1_low: Optional[str] = None
    boundary_x1_high: Optional[str] = None
    boundary_x2_low: Optional[str] = None
    boundary_x2_high: Optional[str] = None
    boundary_x3_low: Optional[str] = None
    boundary_x3_high: Optional[str] = None
    hole_boundary: Optional[str] = None
    initial_value: str = "0"
    initial_velocity: str = "0"
    exact: Optional[str] = None
    holes: List[HoleSpec] = Field(default_factory=list)

    @field_validator("bounds", mode="before")
    @classmethod
    def _parse_bounds(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [tuple(float(v) for v in _split_list(pair)) for pair in _split_list(value, ";")]
        return value

    @field_validator("holes", mode="before")
    @classmethod
    def _parse_holes(cls, value: Any) -> Any:
        if isinstance(value, str):
            holes = []
            for item in _split_list(value, ";"):
                numbers = [float(v) for v in _split_list(item)]
                holes.append({"center": numbers[:-1], "radius": numbers[-1]})
            return holes
        return value

    def face_expressions(self) -> Dict[str, Optional[str]]:
        faces = {}
        for axis in range(1, self.dim + 1):
            for side in ("low", "high"):
                key = f"boundary_x{axis}_{side}"
                faces[key] = getattr(self, key) or self.boundary
        return faces
