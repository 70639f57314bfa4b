import numpy as np
from numpy.testing import assert_allclose
import pytest

from gffdetect.exceptions import ShapeMismatch
from gffdetect.tinynet import sgd_nesterov_step, lookahead
from gffdetect.tinynet.optim import zero_velocity


def test_step_from_rest():
    params = {"w": np.array([1.0, -2.0]), "b": np.array([0.5])}
    grads = {"w": np.array([1.0, 1.0]), "b": np.array([-1.0])}
    new, velocity = sgd_nesterov_step(params, grads, None, 0.1, 0.9)
    assert_allclose(velocity["w"], [-0.1, -0.1])
    assert_allclose(new["w"], [0.9, -2.1])
    assert_allclose(new["b"], [0.6])


def test_momentum_accumulates():
    params = {"w": np.array([0.0])}
    grads = {"w": np.array([1.0])}
    velocity = None
    for _ in range(3):
        params, velocity = sgd_nesterov_step(params, grads, velocity, 1.0, 0.5)
    # v: -1, -1.5, -1.75
    assert_allclose(velocity["w"], [-1.75])
    assert_allclose(params["w"], [-4.25])


def test_inputs_are_not_modified():
    params = {"w": np.array([1.0])}
    grads = {"w": np.array([3.0])}
    velocity = {"w": np.array([0.2])}
    sgd_nesterov_step(params, grads, velocity, 0.1, 0.9)
    assert params["w"].tolist() == [1.0]
    assert grads["w"].tolist() == [3.0]
    assert velocity["w"].tolist() == [0.2]


def test_lookahead():
    params = {"w": np.array([1.0, 2.0])}
    assert lookahead(params, None, 0.9)["w"].tolist() == [1.0, 2.0]
    shifted = lookahead(params, {"w": np.array([1.0, -1.0])}, 0.5)
    assert shifted["w"].tolist() == [1.5, 1.5]


def test_zero_velocity():
    velocity = zero_velocity({"w": np.ones((2, 3))})
    assert velocity["w"].shape == (2, 3)
    assert not velocity["w"].any()


@pytest.mark.parametrize(
    "grads,velocity",
    [
        ({"w": np.zeros(3)}, None),
        ({"v": np.zeros(2)}, None),
        ({"w": np.zeros(2)}, {"w": np.zeros((2, 1))}),
    ],
)
def test_layout_mismatch(grads, velocity):
    with pytest.raises(ShapeMismatch):
        sgd_nesterov_step({"w": np.zeros(2)}, grads, velocity, 0.1, 0.9)
