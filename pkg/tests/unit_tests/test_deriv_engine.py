"""
Unit tests for the derivative engine: input derivatives and parameter gradients.

Run with: pytest tests/unit_tests/test_deriv_engine.py -v
"""

import numpy as np
import pytest

from wavepinn.errors import NumericError, ShapeError
from wavepinn.services.deriv_engine import (
    LinearizedResidual,
    ResidualTerm,
    _contract,
    _dense,
    evaluate_terms,
    param_gradient,
    value_grad_laplacian,
)
from wavepinn.services.fourier_net import FfmNetwork, forward
from wavepinn.services.verification_service import (
    fd_input_derivatives,
    fd_param_gradient,
    relative_error,
)
from tests.conftest import make_net


def mixed_term(z, weight=1.0, name="mixed"):
    """r = u + 0.5 u_z1 + u_z2z2 - 1, touching every bundle channel."""
    def residual(bundle, sl):
        n, d = bundle.grad.shape
        d_grad = np.zeros((n, d))
        d_grad[:, 0] = 0.5
        d_diag2 = np.zeros((n, d))
        d_diag2[:, 1] = 1.0
        values = bundle.value + 0.5 * bundle.grad[:, 0] + bundle.diag2[:, 1] - 1.0
        return LinearizedResidual(values=values, d_value=np.ones(n), d_grad=d_grad, d_diag2=d_diag2)

    return ResidualTerm(name=name, inputs=z, order=2, residual=residual, weight=weight)


def value_term(z, target=0.0, name="value"):
    return ResidualTerm(
        name=name,
        inputs=z,
        order=0,
        residual=lambda b, sl: LinearizedResidual(values=b.value - target, d_value=np.ones(len(b.value))),
    )


def test_value_channel_matches_forward():
    net = make_net()
    z = np.random.default_rng(0).random((7, 3))
    assert np.array_equal(value_grad_laplacian(net, z, order=2).value, forward(net, z))


def test_order_controls_channels():
    net = make_net()
    z = np.random.default_rng(0).random((3, 3))
    bundle = value_grad_laplacian(net, z, order=0)
    assert bundle.grad is None and bundle.diag2 is None
    bundle = value_grad_laplacian(net, z, order=1)
    assert bundle.grad.shape == (3, 3) and bundle.diag2 is None
    with pytest.raises(ShapeError):
        value_grad_laplacian(net, z, order=3)


def test_constant_network_has_zero_derivatives():
    net = make_net()
    net.params[...] = 0.0
    for index in range(net.config.subnet_count):
        net.subnet(index)["b_out"][...] = -1.25
    bundle = value_grad_laplacian(net, np.random.default_rng(1).random((4, 3)), order=2)
    assert np.all(bundle.value == -1.25)
    assert np.all(bundle.grad == 0)
    assert np.all(bundle.diag2 == 0)


@pytest.mark.parametrize("first_layer", ["fourier", "plain"])
@pytest.mark.parametrize("scales", [(1.0,), (1.0, 2.0, 3.0)])
def test_input_derivatives_match_finite_differences(first_layer, scales):
    for seed in range(3):
        net = make_net(widths=(10, 8, 6), scales=scales, first_layer=first_layer, seed=seed)
        z = np.random.default_rng(seed).random((6, 3))
        bundle = value_grad_laplacian(net, z, order=2)
        fd_grad, fd_diag2 = fd_input_derivatives(net, z)
        assert relative_error(fd_grad, bundle.grad) <= 1e-5
        assert relative_error(fd_diag2, bundle.diag2) <= 1e-5


def test_scale_change_is_input_rescaling():
    c = 3.0
    base = make_net(scales=(2.0,))
    scaled = FfmNetwork(base.config.model_copy(update={"scales": [2.0 * c]}), base.params.copy())
    z = np.random.default_rng(4).random((5, 3))
    b_scaled = value_grad_laplacian(scaled, z, order=2)
    b_base = value_grad_laplacian(base, c * z, order=2)
    assert np.allclose(b_scaled.value, b_base.value, rtol=1e-12, atol=1e-14)
    assert np.allclose(b_scaled.grad, c * b_base.grad, rtol=1e-12, atol=1e-14)
    assert np.allclose(b_scaled.diag2, c ** 2 * b_base.diag2, rtol=1e-12, atol=1e-13)


def test_tiny_plain_network_is_nearly_linear():
    net = make_net(first_layer="plain")
    net.params[...] *= 1e-7
    bundle = value_grad_laplacian(net, np.random.default_rng(5).random((5, 3)), order=2)
    assert np.max(np.abs(bundle.diag2)) <= 1e-12


def test_zero_residual_gives_zero_gradient():
    net = make_net()
    z = np.random.default_rng(6).random((9, 3))
    term = ResidualTerm(
        name="zero",
        inputs=z,
        order=2,
        residual=lambda b, sl: LinearizedResidual(
            values=np.zeros(len(b.value)), d_value=np.ones(len(b.value)), d_diag2=np.ones_like(b.diag2)
        ),
    )
    result = param_gradient(net, [term])
    assert result.components["zero"] == 0.0
    assert np.all(result.grad == 0)


def test_parameter_gradient_matches_finite_differences():
    for first_layer in ("fourier", "plain"):
        net = make_net(widths=(10, 8), scales=(1.0, 2.0), first_layer=first_layer, seed=3)
        z = np.random.default_rng(7).random((8, 3))
        terms = [mixed_term(z), value_term(z[:4], target=0.3)]
        analytic = param_gradient(net, terms).grad
        probe = net.copy()

        def loss(params):
            probe.set_params(params)
            components = evaluate_terms(probe, terms, with_gradient=False).components
            return sum(components.values())

        indices = np.sort(np.random.default_rng(8).choice(net.parameter_count, 30, replace=False))
        fd = fd_param_gradient(loss, net.params, indices)
        assert relative_error(fd, analytic[indices]) <= 1e-4


def test_gradient_is_linear_in_terms():
    net = make_net()
    z = np.random.default_rng(9).random((12, 3))
    a, b = mixed_term(z, name="a"), value_term(z, target=1.0, name="b")
    both = param_gradient(net, [a, b]).grad
    separate = param_gradient(net, [a]).grad + param_gradient(net, [b]).grad
    assert np.allclose(both, separate, rtol=1e-13, atol=1e-15)


def test_weight_scales_gradient_not_component():
    net = make_net()
    z = np.random.default_rng(10).random((6, 3))
    plain = param_gradient(net, [mixed_term(z)])
    weighted = param_gradient(net, [mixed_term(z, weight=2.5)])
    assert weighted.components["mixed"] == plain.components["mixed"]
    assert np.allclose(weighted.grad, 2.5 * plain.grad, rtol=1e-13, atol=1e-15)


def test_results_identical_for_any_worker_count():
    net = make_net()
    z = np.random.default_rng(11).random((50, 3))
    terms = [mixed_term(z)]
    one = param_gradient(net, terms, workers=1, chunk_size=7)
    four = param_gradient(net, terms, workers=4, chunk_size=7)
    assert one.components == four.components
    assert np.array_equal(one.grad, four.grad)


def test_gradient_under_point_permutation():
    net = make_net(widths=(10, 8), seed=5)
    z = np.random.default_rng(13).random((40, 3))
    perm = np.random.default_rng(14).permutation(len(z))
    first = param_gradient(net, [mixed_term(z)], chunk_size=16)
    again = param_gradient(net, [mixed_term(z)], chunk_size=16)
    shuffled = param_gradient(net, [mixed_term(z[perm])], chunk_size=16)

    # fixed order: bit-identical; permuted order: equal up to summation rounding
    assert np.array_equal(first.grad, again.grad)
    assert relative_error(shuffled.grad, first.grad) <= 1e-12
    assert shuffled.components["mixed"] == pytest.approx(first.components["mixed"], rel=1e-12)


def test_non_finite_residual_names_term():
    net = make_net()
    term = ResidualTerm(
        name="broken",
        inputs=np.random.default_rng(12).random((3, 3)),
        order=0,
        residual=lambda b, sl: LinearizedResidual(values=np.full(len(b.value), np.nan)),
    )
    with pytest.raises(NumericError) as excinfo:
        param_gradient(net, [term])
    assert excinfo.value.term == "broken"


def test_batched_products_match_einsum():
    rng = np.random.default_rng(15)
    t = rng.standard_normal((7, 3, 5))
    M = rng.standard_normal((5, 4))
    other = rng.standard_normal((7, 3, 6))
    assert np.allclose(_dense(t, M), np.einsum("nkw,wo->nko", t, M), rtol=1e-13, atol=1e-14)
    assert np.allclose(_contract(t, other), np.einsum("nko,nki->oi", t, other), rtol=1e-13, atol=1e-13)
