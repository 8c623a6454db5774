"""Tests for analytic SDFs, scenes, network files and the gradient check."""

import json
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parent.parent))

from common.errors import FormatError, ParameterError, PreconditionError
from field.analytic import AnalyticSdf, analytic_sdf_eval
from field.gradcheck import GradcheckConfig, run_gradcheck
from field.network import FieldArchitecture, FieldNetwork, field_query, sdf_input_gradient
from field.scene import AnalyticScene, ConstantScene, NetworkScene
from field.serialization import FORMAT_VERSION, MAGIC, load_network, save_network


def central_gradient(shape, x, h=1e-5):
    grad = np.zeros(3)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        grad[axis] = (shape.evaluate(x + e) - shape.evaluate(x - e)) / (2 * h)
    return grad


def test_sphere_examples():
    sphere = AnalyticSdf.sphere(0.25)
    assert analytic_sdf_eval(sphere, np.array([0.25, 0.0, 0.0])) == 0.0
    assert analytic_sdf_eval(sphere, np.zeros(3)) == -0.25


def test_box_corner_distance():
    box = AnalyticSdf.box((1.0, 1.0, 1.0))
    assert abs(analytic_sdf_eval(box, np.array([2.0, 2.0, 2.0])) - np.sqrt(3.0)) < 1e-15
    assert analytic_sdf_eval(box, np.array([0.5, 0.0, 0.0])) == -0.5


def test_torus_values():
    torus = AnalyticSdf.torus(0.3, 0.1)
    assert abs(analytic_sdf_eval(torus, np.array([0.3, 0.0, 0.0])) + 0.1) < 1e-15
    assert abs(analytic_sdf_eval(torus, np.array([0.0, 0.0, 0.5])) - 0.1) < 1e-15


@pytest.mark.parametrize(
    "make",
    [
        lambda: AnalyticSdf.sphere(0.0),
        lambda: AnalyticSdf.sphere(-1.0),
        lambda: AnalyticSdf.box((1.0, 0.0, 1.0)),
        lambda: AnalyticSdf.torus(0.1, 0.2),
        lambda: AnalyticSdf("cone"),
    ],
)
def test_degenerate_shapes_rejected(make):
    with pytest.raises(ParameterError):
        make()


@pytest.mark.parametrize(
    "shape",
    [AnalyticSdf.sphere(0.25), AnalyticSdf.box((0.2, 0.3, 0.25)), AnalyticSdf.torus(0.3, 0.1)],
)
def test_analytic_gradients_have_unit_norm(shape):
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        x = rng.uniform(-0.6, 0.6, 3)
        analytic = shape.gradient(x)
        numeric = central_gradient(shape, x)
        # skip points near a medial axis where the numeric gradient is not defined
        if np.linalg.norm(analytic - numeric) > 1e-3:
            continue
        assert 1 - 1e-3 <= np.linalg.norm(numeric) <= 1 + 1e-3
        checked += 1


def test_scenes_share_one_interface():
    points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    dirs = np.tile([0.0, 0.0, -1.0], (2, 1))
    d, c, f = AnalyticScene(AnalyticSdf.sphere(0.5)).query(points, dirs)
    np.testing.assert_allclose(d, [-0.5, 0.5])
    assert c.shape == (2, 3) and f.shape == (2, 0)
    d, c, f = ConstantScene(3.0).query(points, dirs)
    np.testing.assert_array_equal(d, 3.0)


def test_network_scene_fixed_view_direction():
    rng = np.random.default_rng(3)
    arch = FieldArchitecture(z_dim=4, mapping_width=8, width=8, feature_dim=4)
    net = FieldNetwork.initialize(arch, rng)
    mods = net.modulations(rng.standard_normal(4))
    frontal = np.array([0.0, 0.0, -1.0])
    scene = NetworkScene(net, mods, view_direction=frontal)
    points = rng.uniform(-0.3, 0.3, (5, 3))
    dirs = np.tile([1.0, 0.0, 0.0], (5, 1))
    _, c, _ = scene.query(points, dirs)
    expected = field_query(net, points, np.tile(frontal, (5, 1)), mods).c
    np.testing.assert_array_equal(c, expected)
    assert scene.feature_dim == 4


def test_network_scene_rejects_non_unit_view_direction():
    rng = np.random.default_rng(4)
    net = FieldNetwork.initialize(FieldArchitecture(z_dim=4, mapping_width=8, width=8, feature_dim=4), rng)
    mods = net.modulations(rng.standard_normal(4))
    with pytest.raises(PreconditionError):
        NetworkScene(net, mods, view_direction=[0.0, 0.0, -2.0])
    with pytest.raises(PreconditionError):
        NetworkScene(net, mods, view_direction=np.zeros(3))
    NetworkScene(net, mods, view_direction=[0.6, 0.0, -0.8])


def test_network_file_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    arch = FieldArchitecture(z_dim=4, mapping_width=8, width=8, feature_dim=4)
    net = FieldNetwork.initialize(arch, rng)
    path = tmp_path / "net.sdfn"
    save_network(net, path)
    assert path.read_bytes()[:8] == MAGIC
    loaded = load_network(path)
    assert loaded.architecture == arch
    for name, array in net.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], array.astype(np.float32))
    mods = loaded.modulations(np.ones(4))
    assert sdf_input_gradient(loaded, np.zeros(3), mods).shape == (3,)


def test_network_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.sdfn"
    path.write_bytes(b"not a network file at all")
    with pytest.raises(FormatError):
        load_network(path)


def write_network_header(path, header):
    data = json.dumps(header).encode("utf-8")
    path.write_bytes(struct.pack("<8sII", MAGIC, FORMAT_VERSION, len(data)) + data)


@pytest.mark.parametrize(
    "architecture",
    [
        {"z_dim": 4, "bogus": 1},
        {"z_dim": 4, "bogus": 1, "leaky_slope": 0.2},
        {"z_dim": 0, "leaky_slope": 0.2},
    ],
)
def test_network_file_rejects_bad_architecture(tmp_path, architecture):
    path = tmp_path / "bad.sdfn"
    write_network_header(path, {"architecture": architecture, "parameters": []})
    with pytest.raises(FormatError):
        load_network(path)


def test_network_file_rejects_truncation(tmp_path):
    rng = np.random.default_rng(0)
    net = FieldNetwork.initialize(FieldArchitecture(z_dim=4, mapping_width=8, width=8, feature_dim=4), rng)
    path = tmp_path / "net.sdfn"
    save_network(net, path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(FormatError):
        load_network(path)


def test_gradcheck_passes_and_covers_every_layer():
    config = GradcheckConfig(networks=2, points=10, width=16, mapping_width=16, z_dim=8, feature_dim=8)
    report = run_gradcheck(config, np.random.default_rng(5))
    layers = set(report["layer"])
    assert {f"trunk.{i}" for i in range(8)} <= layers
    assert {"sdf_head", "color_head", "color_film", "input", "mapping.head"} <= layers
    assert report["passed"].all()


def test_gradcheck_flags_corrupted_gradient():
    config = GradcheckConfig(networks=1, points=5, width=16, mapping_width=16, z_dim=8, feature_dim=8)

    def corrupted(net, x, mods):
        return 1.01 * sdf_input_gradient(net, x, mods)

    report = run_gradcheck(config, np.random.default_rng(5), input_gradient_fn=corrupted)
    row = report[report["layer"] == "input"].iloc[0]
    assert not row["passed"]
