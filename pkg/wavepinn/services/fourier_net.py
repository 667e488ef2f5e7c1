"""
FFM network: Q parallel subnetworks, each scaling its input by a fixed a_i, a Fourier
(cos/sin) or plain GELU first layer, GELU hidden layers and a linear scalar output.
The network output is the mean of the subnetwork outputs.

Parameters live in one flat float64 vector; per-layer arrays are views into it, so the
optimizer and the checkpoint format only ever see the flat vector.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import erf

from wavepinn.errors import ShapeError
from wavepinn.schemas import NetworkConfig

logger = logging.getLogger(__name__)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu_with_derivatives(x):
    """GELU(x) = x * Phi(x) with its first and second derivatives."""
    x = np.asarray(x, dtype=float)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    value = x * cdf
    first = cdf + x * pdf
    # phi'(x) = -x phi(x)
    second = 2.0 * pdf - x * x * pdf
    return value, first, second


def gelu_third_derivative(x):
    x = np.asarray(x, dtype=float)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return (x ** 3 - 4.0 * x) * pdf


@dataclass(frozen=True)
class ParamSlot:
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def subnet_layout(config: NetworkConfig) -> List[ParamSlot]:
    """Parameter slots of one subnetwork, in flat-vector order."""
    widths = list(config.hidden_widths)
    slots: List[ParamSlot] = []
    offset = 0

    def add(name, shape):
        nonlocal offset
        slot = ParamSlot(name, tuple(shape), offset)
        slots.append(slot)
        offset += slot.size

    if config.first_layer == "fourier":
        add("W1", (widths[0] // 2, config.input_dim))
    else:
        add("W1", (widths[0], config.input_dim))
        add("b1", (widths[0],))
    for layer in range(1, len(widths)):
        add(f"W{layer + 1}", (widths[layer], widths[layer - 1]))
        add(f"b{layer + 1}", (widths[layer],))
    add("w_out", (widths[-1],))
    add("b_out", ())
    return slots


class FfmNetwork:
    """Fourier-feature network with Q scaled subnetworks and averaged output."""

    def __init__(self, config: NetworkConfig, params: np.ndarray):
        config.check()
        self.config = config
        self.layout = subnet_layout(config)
        self.subnet_size = sum(slot.size for slot in self.layout)
        expected = self.subnet_size * config.subnet_count
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (expected,):
            raise ShapeError(f"parameter vector has shape {params.shape}, expected ({expected},)")
        self.params = params
        self.scales = np.asarray(config.scales, dtype=float)

    @property
    def parameter_count(self) -> int:
        return self.params.size

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    @property
    def is_fourier(self) -> bool:
        return self.config.first_layer == "fourier"

    @property
    def depth(self) -> int:
        return len(self.config.hidden_widths)

    def subnet(self, index: int, vector: np.ndarray = None) -> Dict[str, np.ndarray]:
        """Views of subnet `index` inside `vector` (default: the parameters)."""
        vector = self.params if vector is None else vector
        base = index * self.subnet_size
        return {
            slot.name: vector[base + slot.offset: base + slot.offset + slot.size].reshape(slot.shape)
            for slot in self.layout
        }

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != self.params.shape:
            raise ShapeError(f"parameter vector has shape {params.shape}, expected {self.params.shape}")
        self.params[...] = params

    def copy(self) -> "FfmNetwork":
        return FfmNetwork(self.config.model_copy(deep=True), self.params.copy())

    def evaluate(self, z: np.ndarray, order: int = 2):
        """DerivativeBundle at network inputs z, up to the requested derivative order."""
        from wavepinn.services.deriv_engine import value_grad_laplacian

        return value_grad_laplacian(self, z, order=order)

    # -- serialization ---------------------------------------------------

    def to_vector(self) -> np.ndarray:
        return self.params.copy()

    @classmethod
    def from_vector(cls, config: NetworkConfig, vector: np.ndarray) -> "FfmNetwork":
        return cls(config, np.array(vector, dtype=np.float64, copy=True))


def init_network(config: NetworkConfig, rng: np.random.Generator = None) -> FfmNetwork:
    """Glorot-uniform weights, zero biases; deterministic for a given generator/seed."""
    config.check()
    if rng is None:
        rng = np.random.default_rng(config.init_seed)
    layout = subnet_layout(config)
    subnet_size = sum(slot.size for slot in layout)
    params = np.zeros(subnet_size * config.subnet_count)

    for index in range(config.subnet_count):
        base = index * subnet_size
        for slot in layout:
            if slot.name.startswith("b"):
                continue
            if slot.name == "w_out":
                fan_in, fan_out = slot.shape[0], 1
            else:
                fan_out, fan_in = slot.shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[base + slot.offset: base + slot.offset + slot.size] = rng.uniform(
                -bound, bound, size=slot.size
            )

    logger.debug(
        f"Initialized FFM network: Q={config.subnet_count}, widths={config.hidden_widths}, "
        f"first_layer={config.first_layer}, {params.size} parameters"
    )
    return FfmNetwork(config, params)


def forward(net: FfmNetwork, z: np.ndarray) -> np.ndarray:
    """Network output at z; a single input vector gives a scalar."""
    from wavepinn.services.deriv_engine import value_grad_laplacian

    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    value = value_grad_laplacian(net, z, order=0).value
    return float(value[0]) if single else value
