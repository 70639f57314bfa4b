import numpy as np
import pytest

from gffdetect.config import NetworkConfig, AggregatorConfig, GffConfig
from gffdetect.exceptions import ShapeMismatch, ConfigError, ModelFormatError
from gffdetect.tinynet import ModelParams, CnnBlockParams
from gffdetect.tinynet.params import cnnblock_shapes, aggregator_shapes


SMALL = NetworkConfig(kernel_sizes=(1, 3), conv1_filters=2, conv2_filters=3, dense_units=4)
GFF = GffConfig(frames_per_matrix=8, face_slots=2)


def test_shapes():
    shapes = cnnblock_shapes(SMALL)
    assert shapes["conv1.k3.weight"][0] == (2, 3, 3)
    assert shapes["conv2.k3.weight"][0] == (3, 4, 3)
    assert shapes["dense.weight"][0] == (4, 6)
    assert shapes["out.weight"][0] == (4,)
    assert not any(name.startswith("conv3.") for name in shapes)
    single = cnnblock_shapes(SMALL.replace(num_layers=1))
    assert not any(name.startswith("conv2.") for name in single)
    assert single["dense.weight"][0] == (4, 4)
    assert aggregator_shapes(AggregatorConfig(mode="max")) == {}
    assert aggregator_shapes(AggregatorConfig(max_groups=5, hidden_units=7))["hidden.weight"][0] == (7, 5)


@pytest.mark.parametrize("num_layers", [3, 4])
def test_deep_shapes(num_layers):
    shapes = cnnblock_shapes(SMALL.replace(num_layers=num_layers))
    # layers past the second read the stacked outputs of the one before
    for layer in range(3, num_layers + 1):
        assert shapes[f"conv{layer}.k3.weight"][0] == (3, 6, 3)
        assert shapes[f"conv{layer}.k1.bias"][0] == (3,)
    assert f"conv{num_layers + 1}.k1.weight" not in shapes
    assert shapes["dense.weight"][0] == (4, 6)


def test_parameter_count():
    model = ModelParams.zeros(SMALL, AggregatorConfig(max_groups=2, hidden_units=2), GFF)
    # conv1 2*1 + 2*9 + 4, conv2 3*4*1 + 3*4*3 + 6, dense 24 + 4, out 5, aggregator 4 + 2 + 2 + 1
    assert model.parameter_count() == 24 + 54 + 28 + 5 + 9


def test_initialize_is_seeded():
    a = ModelParams.initialize(SMALL, gff=GFF, seed=3)
    b = ModelParams.initialize(SMALL, gff=GFF, seed=3)
    c = ModelParams.initialize(SMALL, gff=GFF, seed=4)
    assert all(np.array_equal(a.flat()[k], b.flat()[k]) for k in a.flat())
    assert not np.array_equal(a.flat()["cnn.dense.weight"], c.flat()["cnn.dense.weight"])


def test_initialize_biases_zero_weights_bounded():
    model = ModelParams.initialize(SMALL, gff=GFF, seed=0)
    for name, value in model.flat().items():
        if name.endswith(".bias"):
            assert not value.any()
    limit = np.sqrt(6.0 / (6 + 4))
    assert np.abs(model.flat()["cnn.dense.weight"]).max() <= limit


def test_fakeness_channels_resolved():
    model = ModelParams.zeros(SMALL, gff=GFF, fakeness_channels=3)
    assert model.fakeness_channels == 3
    assert model.input_shape == (8, 8)
    pinned = ModelParams.zeros(SMALL, gff=GFF.replace(fakeness_channels=2), fakeness_channels=3)
    assert pinned.fakeness_channels == 2


def test_unresolved_channels_rejected():
    model = ModelParams.zeros(SMALL, gff=GFF)
    with pytest.raises(ConfigError):
        ModelParams(model.cnnblock, model.aggregator, GFF, model.tracker_config)


def test_tensor_recipe_enforced():
    tensors = CnnBlockParams.zeros(SMALL).tensors
    with pytest.raises(ShapeMismatch):
        CnnBlockParams(SMALL, {k: v for k, v in tensors.items() if k != "out.bias"})
    with pytest.raises(ShapeMismatch):
        CnnBlockParams(SMALL, dict(tensors, **{"out.bias": np.zeros(2)}))


def test_with_flat():
    model = ModelParams.zeros(SMALL, gff=GFF)
    flat = {k: v + 1.0 for k, v in model.flat().items()}
    other = model.with_flat(flat)
    assert other.flat()["cnn.out.bias"].tolist() == [1.0]
    assert model.flat()["cnn.out.bias"].tolist() == [0.0]
    with pytest.raises(ShapeMismatch):
        model.with_flat(dict(flat, stray=np.zeros(1)))


def test_velocity_layout_checked():
    model = ModelParams.zeros(SMALL, gff=GFF)
    velocity = {k: np.zeros_like(v) for k, v in model.flat().items()}
    assert model.with_flat(model.flat(), velocity).velocity is not None
    velocity["cnn.out.bias"] = np.zeros(3)
    with pytest.raises(ShapeMismatch):
        model.with_flat(model.flat(), velocity)


def test_from_tree_rejects_non_finite():
    tree = ModelParams.zeros(SMALL, gff=GFF).to_tree()
    tree["tensors"]["cnn.out.bias"] = [[1], [float("nan")]]
    with pytest.raises(ModelFormatError):
        ModelParams.from_tree(tree)


def test_from_tree_rejects_unknown_tensor():
    tree = ModelParams.zeros(SMALL, gff=GFF).to_tree()
    tree["tensors"]["cnn.extra.weight"] = [[1], [0.0]]
    with pytest.raises(ModelFormatError):
        ModelParams.from_tree(tree)
