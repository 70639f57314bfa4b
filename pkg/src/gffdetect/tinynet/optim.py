"""
Stochastic gradient descent with Nesterov momentum.

The lookahead form is used: the gradient is taken at ``theta + mu * v``
and then::

    v     <- mu * v - lr * grad f(theta + mu * v)
    theta <- theta + v

`lookahead` produces the point at which the caller evaluates the
gradient; `sgd_nesterov_step` applies the update.
"""

import numpy as np

from ..exceptions import ShapeMismatch


__all__ = ["zero_velocity", "lookahead", "sgd_nesterov_step"]


def _check_layout(reference, other, what):
    if set(reference) != set(other):
        raise ShapeMismatch(f"{what} names differ from the parameters: "
                            f"{sorted(set(reference) ^ set(other))}")
    for name, value in reference.items():
        if np.shape(other[name]) != np.shape(value):
            raise ShapeMismatch(
                f"{what} {name} has shape {np.shape(other[name])}, parameter has {np.shape(value)}")


def zero_velocity(params):
    return {name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()}


def lookahead(params, velocity, momentum):
    """``theta + mu * v`` for every tensor."""
    if velocity is None:
        return dict(params)
    _check_layout(params, velocity, "Velocity")
    return {name: value + momentum * velocity[name] for name, value in params.items()}


def sgd_nesterov_step(params, grads, velocity, lr, momentum):
    """
    One Nesterov update.

    Parameters
    ----------
    params : dict
        name -> ndarray.
    grads : dict
        Gradients evaluated at ``lookahead(params, velocity, momentum)``.
    velocity : dict or None
        `None` starts from zero velocity.
    lr : float
    momentum : float

    Returns
    -------
    params, velocity : dict
        New dictionaries; the inputs are not modified.

    Raises
    ------
    ShapeMismatch

    Examples
    --------
    >>> import numpy as np
    >>> p, v = sgd_nesterov_step({"w": np.array([1.0])}, {"w": np.array([2.0])}, None, 0.1, 0.9)
    >>> p["w"].tolist(), v["w"].tolist()
    ([0.8], [-0.2])
    """
    if velocity is None:
        velocity = zero_velocity(params)
    _check_layout(params, grads, "Gradient")
    _check_layout(params, velocity, "Velocity")
    new_velocity = {}
    new_params = {}
    for name, value in params.items():
        v = momentum * velocity[name] - lr * grads[name]
        new_velocity[name] = v
        new_params[name] = value + v
    return new_params, new_velocity
