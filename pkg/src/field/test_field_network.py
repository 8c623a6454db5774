"""Tests for the field network, its layers and the mapping network."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parent.parent))

from common.errors import PreconditionError, ShapeError
from field.gradcheck import numeric_input_gradient, relative_error
from field.layers import AffineLayer, FilmSirenLayer, film_siren_forward
from field.mapping import MappingNetwork, ModulationSignals, leaky_relu, mapping_forward
from field.network import (
    FieldArchitecture,
    FieldNetwork,
    field_query,
    param_gradient_regression,
    sdf_input_gradient,
)

SMALL = FieldArchitecture(z_dim=8, mapping_width=16, width=16, feature_dim=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_net(rng):
    return FieldNetwork.initialize(SMALL, rng)


def zero_network(arch, gamma=0.0, beta=0.0, sdf_bias=0.0):
    """Network whose every weight is zero; only the SDF head bias is set."""
    trunk = [FilmSirenLayer(np.zeros((arch.width, 3 if i == 0 else arch.width)), np.zeros(arch.width)) for i in range(arch.depth)]
    mapping = MappingNetwork(
        [AffineLayer(np.zeros((arch.mapping_width, arch.z_dim if i == 0 else arch.mapping_width)), np.zeros(arch.mapping_width)) for i in range(3)],
        AffineLayer(np.zeros((2 * sum(arch.film_widths), arch.mapping_width)), np.zeros(2 * sum(arch.film_widths))),
        arch.film_widths,
    )
    net = FieldNetwork(
        arch,
        mapping,
        trunk,
        AffineLayer(np.zeros((1, arch.width)), np.array([sdf_bias])),
        FilmSirenLayer(np.zeros((arch.feature_dim, arch.width + 3)), np.zeros(arch.feature_dim)),
        AffineLayer(np.zeros((3, arch.feature_dim)), np.zeros(3)),
    )
    return net, ModulationSignals.constant(arch.film_widths, gamma, beta)


def unit_vectors(rng, count):
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_mapping_forward_zero_parameters_gives_zero_signals(rng):
    net, _ = zero_network(SMALL)
    mods = mapping_forward(net.mapping, rng.standard_normal(SMALL.z_dim))
    assert len(mods) == SMALL.depth + 1
    assert all(np.all(g == 0) for g in mods.gammas)
    assert all(np.all(b == 0) for b in mods.betas)


def test_mapping_forward_single_column_toy_net():
    # identity hidden layers (positive inputs pass the leaky rectifier unchanged)
    eye = np.eye(2)
    head_weight = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]])
    head_bias = np.array([0.5, 0.5, 0.5, 0.5])
    net = MappingNetwork([AffineLayer(eye, np.zeros(2)) for _ in range(3)], AffineLayer(head_weight, head_bias), [1, 1])
    mods = mapping_forward(net, np.array([1.0, 0.0]))
    np.testing.assert_allclose(np.concatenate(mods.gammas + mods.betas), head_weight[:, 0] + head_bias)


def test_mapping_forward_is_deterministic(small_net, rng):
    z = rng.standard_normal(SMALL.z_dim)
    first = mapping_forward(small_net.mapping, z)
    second = mapping_forward(small_net.mapping, z)
    for a, b in zip(first.gammas + first.betas, second.gammas + second.betas):
        assert np.array_equal(a, b)
    assert first.intermediate.shape == (SMALL.mapping_width,)


def test_mapping_forward_rejects_wrong_latent_width(small_net):
    with pytest.raises(ShapeError):
        mapping_forward(small_net.mapping, np.zeros(SMALL.z_dim + 1))


def test_mapping_head_gamma_bias_starts_at_omega0(small_net):
    total = sum(SMALL.film_widths)
    np.testing.assert_array_equal(small_net.mapping.head.bias[:total], SMALL.omega0)
    np.testing.assert_array_equal(small_net.mapping.head.bias[total:], 0.0)


def test_leaky_relu_slope():
    np.testing.assert_allclose(leaky_relu(np.array([-1.0, 2.0])), [-0.2, 2.0])


def test_film_siren_identity_layer():
    layer = FilmSirenLayer(np.eye(2), np.zeros(2))
    out = film_siren_forward(layer, np.array([0.0, np.pi / 2]), np.ones(2), np.zeros(2))
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-15)


def test_film_siren_zero_frequency_gives_ones(rng):
    layer = FilmSirenLayer(rng.standard_normal((4, 3)), rng.standard_normal(4))
    out = film_siren_forward(layer, rng.standard_normal(3), np.zeros(4), np.full(4, np.pi / 2))
    np.testing.assert_allclose(out, np.ones(4))


def test_film_siren_matches_scalar_formula(rng):
    weight = rng.standard_normal((5, 3))
    bias = rng.standard_normal(5)
    gamma = rng.standard_normal(5)
    beta = rng.standard_normal(5)
    x = rng.standard_normal(3)
    out = film_siren_forward(FilmSirenLayer(weight, bias), x, gamma, beta)
    for i in range(5):
        pre = sum(weight[i, j] * x[j] for j in range(3)) + bias[i]
        assert abs(out[i] - np.sin(gamma[i] * pre + beta[i])) < 1e-12


def test_film_siren_width_mismatch(rng):
    layer = FilmSirenLayer(rng.standard_normal((4, 3)), np.zeros(4))
    with pytest.raises(ShapeError):
        film_siren_forward(layer, np.zeros(2), np.ones(4), np.zeros(4))
    with pytest.raises(ShapeError):
        film_siren_forward(layer, np.zeros(3), np.ones(3), np.zeros(3))


def test_field_query_constant_field_returns_head_bias(rng):
    net, mods = zero_network(SMALL, sdf_bias=0.37)
    sample = field_query(net, rng.uniform(-1, 1, (10, 3)), unit_vectors(rng, 10), mods)
    np.testing.assert_array_equal(sample.d, 0.37)
    np.testing.assert_allclose(sample.c, 0.5)


def test_field_query_sdf_ignores_view_direction(small_net, rng):
    mods = small_net.modulations(rng.standard_normal(SMALL.z_dim))
    x = rng.uniform(-0.5, 0.5, 3)
    dirs = unit_vectors(rng, 100)
    values = [field_query(small_net, x, v, mods).d for v in dirs]
    assert len(set(float(d) for d in values)) == 1
    colors = np.array([field_query(small_net, x, v, mods).c for v in dirs])
    assert np.all((colors >= 0) & (colors <= 1))


def test_field_query_matches_layer_by_layer_oracle(small_net, rng):
    mods = small_net.modulations(rng.standard_normal(SMALL.z_dim))
    x = rng.uniform(-0.5, 0.5, 3)
    v = unit_vectors(rng, 1)[0]
    h = x
    for i, layer in enumerate(small_net.trunk):
        h = np.sin(mods.gammas[i] * (layer.weight @ h + layer.bias) + mods.betas[i])
    d = small_net.sdf_head.weight @ h + small_net.sdf_head.bias
    f = np.sin(mods.gammas[-1] * (small_net.color_film.weight @ np.concatenate([h, v]) + small_net.color_film.bias) + mods.betas[-1])
    c = 1.0 / (1.0 + np.exp(-(small_net.color_head.weight @ f + small_net.color_head.bias)))

    sample = field_query(small_net, x, v, mods)
    assert abs(sample.d - d[0]) < 1e-10
    np.testing.assert_allclose(sample.f, f, atol=1e-10)
    np.testing.assert_allclose(sample.c, c, atol=1e-10)


def test_field_query_rejects_non_unit_direction(small_net, rng):
    mods = small_net.modulations(rng.standard_normal(SMALL.z_dim))
    with pytest.raises(PreconditionError):
        field_query(small_net, np.zeros(3), np.array([0.0, 0.0, 1.1]), mods)


def test_field_query_rejects_mismatched_modulations(small_net):
    with pytest.raises(ShapeError):
        field_query(small_net, np.zeros(3), np.array([0.0, 0.0, 1.0]), ModulationSignals.constant([4] * 9))


def test_sdf_input_gradient_constant_field_is_zero(rng):
    net, mods = zero_network(SMALL, gamma=1.0)
    np.testing.assert_array_equal(sdf_input_gradient(net, rng.uniform(-1, 1, 3), mods), 0.0)


def test_sdf_input_gradient_single_sine_layer():
    arch = FieldArchitecture(z_dim=2, mapping_width=2, width=1, depth=1, feature_dim=1)
    net, mods = zero_network(arch, gamma=1.0)
    net.trunk[0].weight[0, 0] = 1.0
    net.sdf_head.weight[0, 0] = 1.0
    x = np.array([0.3, -0.2, 0.9])
    assert abs(net.sdf(x[None, :], mods)[0] - np.sin(0.3)) < 1e-15
    np.testing.assert_allclose(sdf_input_gradient(net, x, mods), [np.cos(0.3), 0.0, 0.0], atol=1e-15)


def test_sdf_input_gradient_matches_finite_differences(rng):
    for _ in range(5):
        net = FieldNetwork.initialize(SMALL, rng)
        mods = net.modulations(rng.standard_normal(SMALL.z_dim))
        points = rng.uniform(-0.5, 0.5, (20, 3))
        grads = sdf_input_gradient(net, points, mods)
        assert grads.shape == (20, 3)
        for x, g in zip(points, grads):
            assert relative_error(g, numeric_input_gradient(net, x, mods)) < 1e-4


def test_param_gradient_zero_at_exact_targets(small_net, rng):
    mods = small_net.modulations(rng.standard_normal(SMALL.z_dim))
    points = rng.uniform(-0.5, 0.5, (6, 3))
    loss, grads = param_gradient_regression(small_net, points, small_net.sdf(points, mods), mods)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())
    assert "mapping.head.weight" in grads and "trunk.7.weight" in grads
    assert "color_head.weight" not in grads


def test_param_gradient_one_parameter_closed_form():
    arch = FieldArchitecture(z_dim=2, mapping_width=2, width=1, depth=1, feature_dim=1)
    net, mods = zero_network(arch, gamma=1.0)
    net.trunk[0].weight[0, 0] = 0.7
    net.sdf_head.weight[0, 0] = 1.0
    points = np.array([[0.4, 0.0, 0.0]])
    target = np.array([0.1])
    loss, grads = param_gradient_regression(net, points, target, mods)
    residual = np.sin(0.7 * 0.4) - 0.1
    assert abs(loss - residual**2) < 1e-15
    assert abs(grads["trunk.0.weight"][0, 0] - 2 * residual * np.cos(0.28) * 0.4) < 1e-15


def test_param_gradient_matches_finite_differences(rng):
    net = FieldNetwork.initialize(SMALL, rng)
    z = rng.standard_normal(SMALL.z_dim)
    points = rng.uniform(-0.5, 0.5, (8, 3))
    targets = rng.uniform(-0.3, 0.3, 8)
    _, grads = param_gradient_regression(net, points, targets, mapping_forward(net.mapping, z))
    params = net.parameters()
    step = 1e-5
    for name, grad in grads.items():
        array = params[name]
        idx = np.unravel_index(int(rng.integers(array.size)), array.shape)
        saved = array[idx]
        array[idx] = saved + step
        plus, _ = param_gradient_regression(net, points, targets, mapping_forward(net.mapping, z))
        array[idx] = saved - step
        minus, _ = param_gradient_regression(net, points, targets, mapping_forward(net.mapping, z))
        array[idx] = saved
        numeric = (plus - minus) / (2 * step)
        assert relative_error(grad[idx], numeric) < 1e-4, name


def test_param_gradient_rejects_empty_batch(small_net, rng):
    mods = small_net.modulations(rng.standard_normal(SMALL.z_dim))
    with pytest.raises(PreconditionError):
        param_gradient_regression(small_net, np.zeros((0, 3)), np.zeros(0), mods)


def test_parameters_and_copy_are_independent(small_net):
    clone = small_net.copy()
    clone.trunk[0].weight[0, 0] += 1.0
    assert small_net.trunk[0].weight[0, 0] != clone.trunk[0].weight[0, 0]
    names = list(small_net.parameters())
    assert names[0] == "mapping.hidden.0.weight"
    assert names[-1] == "color_head.bias"
