"""
Finite-difference check of the analytic gradients.
"""

from dataclasses import dataclass
import logging

import numpy as np

from ..config import NetworkConfig, AggregatorConfig, GffConfig
from ..exceptions import GradientCheckFailure
from .network import model_forward, model_backward, bce_loss, bce_grad
from .params import ModelParams


__all__ = [
    "GradCheckResult",
    "gradient_check",
    "assert_gradients",
    "small_instance",
    "relative_error",
    "activation_pattern",
    "DEFAULT_TOLERANCE",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


DEFAULT_TOLERANCE = 1e-4


@dataclass(frozen=True)
class GradCheckResult:
    """
    Outcome of `gradient_check`.

    ``n_skipped`` counts the coordinates whose finite-difference step
    crossed a ReLU, pooling or sorting kink; they are left out of
    ``max_rel_error``.
    """
    max_rel_error: float
    worst_parameter: str
    n_parameters: int
    tolerance: float
    n_skipped: int = 0

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def relative_error(analytic, numeric):
    """
    ``|a - n| / max(1e-6, |a| + |n|)``, elementwise.

    Examples
    --------
    >>> float(relative_error(1.0, 1.0))
    0.0
    >>> float(relative_error(0.0, 0.0))
    0.0
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(1e-6, np.abs(a) + np.abs(n))


def small_instance(seed, network=None, aggregator=None, groups=3):
    """
    Random small model and input for gradient checking.

    The defaults are 8 frames, 2 face slots, 1 fakeness channel, 2
    filters per kernel size, kernel sizes 1 and 2, three groups and the
    fully connected aggregator.  Biases are randomized as well so that
    every ReLU sees both signs.

    Returns
    -------
    model : ModelParams
    stack : ndarray
    label : int
    """
    rng = np.random.default_rng(seed)
    network = network or NetworkConfig(kernel_sizes=(1, 2), conv1_filters=2, conv2_filters=2, dense_units=4)
    aggregator = aggregator or AggregatorConfig(max_groups=4, hidden_units=3)
    gff = GffConfig(frames_per_matrix=8, face_slots=2, fakeness_channels=1)
    model = ModelParams.initialize(network, aggregator, gff, seed=seed)
    flat = {name: value + rng.uniform(-0.1, 0.1, size=value.shape) for name, value in model.flat().items()}
    model = model.with_flat(flat)
    stack = rng.uniform(0.0, 1.0, size=(groups,) + model.input_shape)
    label = int(rng.integers(0, 2))
    return model, stack, label


def activation_pattern(cache):
    """
    Every discrete choice a forward pass made: ReLU signs, max-pool
    winners and the order of the group scores.
    """
    caches, agg_cache = cache
    pattern = []
    for _, first, time_layers, time_pool_cache, _, relu_cache, *_ in caches:
        for _, z, pool_cache in first:
            pattern.extend([z > 0, pool_cache[3]])
        for layer in time_layers:
            for _, z, pool_cache in layer:
                pattern.append(z > 0)
                if pool_cache is not None:
                    pattern.append(pool_cache[3])
        if time_pool_cache is not None:
            pattern.append(time_pool_cache[3])
        pattern.append(relu_cache > 0)
    if agg_cache[0] == "max":
        pattern.append(agg_cache[2])
    else:
        pattern.extend([agg_cache[2], agg_cache[4] > 0])
    return pattern


def _same_pattern(a, b):
    return all((x is None and y is None) or np.array_equal(x, y) for x, y in zip(a, b))


def gradient_check(seed, tolerance=DEFAULT_TOLERANCE, h=1e-5, eps=0.001, network=None, aggregator=None):
    """
    Compare analytic gradients with central differences on every
    parameter of a random small instance.

    Parameters
    ----------
    seed : int
    tolerance : float
        Passing bound on the maximum relative error.
    h : float
        Finite-difference step.
    eps : float
        Label smoothing inside the checked loss.
    network, aggregator : optional
        Recipes replacing the defaults of `small_instance`.

    Returns
    -------
    GradCheckResult
    """
    model, stack, label = small_instance(seed, network, aggregator)

    def loss_at(flat):
        score, _, cache = model_forward(stack, model.with_flat(flat))
        return bce_loss(score, label, eps), activation_pattern(cache)

    score, _, cache = model_forward(stack, model)
    analytic = model_backward(bce_grad(score, label, eps), cache)
    base = activation_pattern(cache)
    flat = {name: value.copy() for name, value in model.flat().items()}

    worst, worst_name, count, skipped = 0.0, "", 0, 0
    for name, value in flat.items():
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + h
            plus, plus_pattern = loss_at(flat)
            value[index] = original - h
            minus, minus_pattern = loss_at(flat)
            value[index] = original
            count += 1
            if not (_same_pattern(base, plus_pattern) and _same_pattern(base, minus_pattern)):
                skipped += 1
                log.debug(f"Skipping {name}{list(index)}: the step crosses a kink")
                continue
            numeric = (plus - minus) / (2.0 * h)
            err = float(relative_error(analytic[name][index], numeric))
            if err > worst:
                worst, worst_name = err, f"{name}{list(index)}"
    log.info(f"Gradient check seed {seed}: max relative error {worst:.3e} at {worst_name or '-'} "
             f"over {count} parameters, {skipped} skipped at kinks")
    return GradCheckResult(worst, worst_name, count, tolerance, skipped)


def assert_gradients(seed, tolerance=DEFAULT_TOLERANCE, **kwargs):
    """
    Like `gradient_check` but raise on failure.

    Raises
    ------
    GradientCheckFailure
    """
    result = gradient_check(seed, tolerance, **kwargs)
    if not result.passed:
        raise GradientCheckFailure(result.max_rel_error, tolerance)
    return result
