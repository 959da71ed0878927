"""
Central finite differences for checking analytic gradients.
"""

import logging

import numpy as np

from .tensor import backward, no_grad, zero_grads

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5


def finite_difference(loss_fn, params, eps=DEFAULT_STEP):
    """Centered-difference gradient of ``loss_fn()`` with respect to every
    element of every tensor in ``params``.

    ``loss_fn`` takes no arguments and returns a scalar Tensor; parameter
    values are perturbed in place and restored afterwards.
    """
    grads = []
    with no_grad():
        for param in params:
            data = param.data
            grad = np.zeros_like(data)
            flat = data.reshape(-1)
            flat_grad = grad.reshape(-1)
            for j in range(flat.size):
                original = flat[j]
                flat[j] = original + eps
                fplus = loss_fn().item()
                flat[j] = original - eps
                fminus = loss_fn().item()
                flat[j] = original
                flat_grad[j] = (fplus - fminus) / (2 * eps)
            grads.append(grad)
    return grads


def analytic_gradient(loss_fn, params):
    zero_grads(params)
    loss = loss_fn()
    backward(loss)
    grads = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        for p in params
    ]
    zero_grads(params)
    return grads


def relative_error(analytic, numeric, floor=1e-6):
    """Largest absolute difference scaled by the larger of the two
    gradients' magnitudes."""
    diff = np.abs(analytic - numeric).max() if analytic.size else 0.0
    scale = max(np.abs(analytic).max() if analytic.size else 0.0,
                np.abs(numeric).max() if numeric.size else 0.0,
                floor)
    return float(diff / scale)


def check_gradients(loss_fn, named_params, eps=DEFAULT_STEP):
    """Returns ``{name: relative error}`` for every named parameter."""
    names = [name for name, _ in named_params]
    params = [param for _, param in named_params]
    analytic = analytic_gradient(loss_fn, params)
    numeric = finite_difference(loss_fn, params, eps=eps)
    errors = {}
    for name, a, n in zip(names, analytic, numeric):
        errors[name] = relative_error(a, n)
        logger.debug('gradient check %s: relative error %.3e', name, errors[name])
    return errors
