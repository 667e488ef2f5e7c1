"""
Unit tests for the FFM network: layout, initialization, forward pass, GELU.

Run with: pytest tests/unit_tests/test_fourier_net.py -v
"""

import numpy as np
import pytest

from wavepinn.errors import ConfigError, ShapeError
from wavepinn.schemas import NetworkConfig
from wavepinn.services.fourier_net import (
    FfmNetwork,
    forward,
    gelu_with_derivatives,
    init_network,
)
from tests.conftest import make_net


def default_config(first_layer="fourier", input_dim=3):
    return NetworkConfig(input_dim=input_dim, first_layer=first_layer)


def test_parameter_count_fourier():
    net = init_network(default_config())
    # W1 10x3, W2 15x20+15, W3 15x15+15, W4 10x15+10, w_out 10 + b_out
    assert net.subnet_size == 756
    assert net.parameter_count == 7560


def test_parameter_count_plain():
    net = init_network(default_config(first_layer="plain"))
    assert net.subnet_size == 806
    assert net.parameter_count == 8060


def test_odd_fourier_width_rejected():
    config = NetworkConfig(input_dim=3, hidden_widths=[15, 10])
    with pytest.raises(ConfigError):
        init_network(config)


def test_scale_below_one_rejected():
    config = NetworkConfig(input_dim=3, scales=[0.5])
    with pytest.raises(ConfigError):
        init_network(config)


def test_same_seed_same_parameters():
    a = init_network(default_config())
    b = init_network(default_config())
    assert np.array_equal(a.params, b.params)
    c = init_network(NetworkConfig(input_dim=3, init_seed=1))
    assert not np.array_equal(a.params, c.params)


def test_biases_start_at_zero():
    net = make_net(first_layer="plain")
    for index in range(net.config.subnet_count):
        for name, values in net.subnet(index).items():
            if name.startswith("b"):
                assert np.all(values == 0)


def test_zero_weights_give_output_bias():
    net = make_net()
    net.params[...] = 0.0
    for index in range(net.config.subnet_count):
        net.subnet(index)["b_out"][...] = 0.75
    z = np.random.default_rng(0).random((5, 3))
    assert np.allclose(forward(net, z), 0.75, atol=0, rtol=1e-15)


def test_identical_subnets_equal_single_subnet():
    single = make_net(scales=(2.0,))
    tripled = FfmNetwork(
        NetworkConfig(input_dim=3, hidden_widths=[8, 6], scales=[2.0, 2.0, 2.0]),
        np.tile(single.params, 3),
    )
    z = np.random.default_rng(1).random((10, 3))
    assert np.allclose(forward(tripled, z), forward(single, z), rtol=1e-14, atol=1e-15)


def test_scaling_output_layer_scales_output():
    net = make_net()
    z = np.random.default_rng(2).random((6, 3))
    before = forward(net, z)
    for index in range(net.config.subnet_count):
        view = net.subnet(index)
        view["w_out"][...] *= 2.0
        view["b_out"][...] *= 2.0
    assert np.allclose(forward(net, z), 2.0 * before, rtol=1e-14, atol=1e-15)


def test_single_input_returns_scalar():
    net = make_net()
    value = forward(net, np.array([0.1, 0.2, 0.3]))
    assert isinstance(value, float)


def test_wrong_input_length_rejected():
    net = make_net()
    with pytest.raises(ShapeError):
        forward(net, np.zeros((2, 4)))


def test_set_params_checks_shape():
    net = make_net()
    with pytest.raises(ShapeError):
        net.set_params(np.zeros(3))


def test_vector_round_trip_is_exact():
    net = make_net()
    clone = FfmNetwork.from_vector(net.config, net.to_vector())
    z = np.random.default_rng(3).random((4, 3))
    assert np.array_equal(forward(clone, z), forward(net, z))


def test_gelu_values():
    value, first, second = gelu_with_derivatives(np.array([0.0, 10.0, -10.0]))
    assert value[0] == 0.0
    assert first[0] == 0.5
    assert second[0] == pytest.approx(np.sqrt(2.0 / np.pi), rel=1e-15)
    assert value[1] == pytest.approx(10.0, abs=1e-8)
    assert value[2] == pytest.approx(0.0, abs=1e-8)


def test_gelu_derivatives_match_differences():
    x = np.linspace(-3, 3, 13)
    h = 1e-5
    value, first, second = gelu_with_derivatives(x)
    plus, _, _ = gelu_with_derivatives(x + h)
    minus, _, _ = gelu_with_derivatives(x - h)
    assert np.allclose((plus - minus) / (2 * h), first, atol=1e-8)
    assert np.allclose((plus - 2 * value + minus) / h ** 2, second, atol=1e-4)
