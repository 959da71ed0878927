"""
AdamW with decoupled weight decay, the warmup + cosine schedule, and
freeze masks over parameter groups.
"""

import math

import numpy as np

from .errors import ConfigurationError, ContractError

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


class Schedule:
    __slots__ = ('peak_lr', 'warmup_steps', 'total_steps', 'min_lr')

    def __init__(self, peak_lr, warmup_steps, total_steps, min_lr=0.0):
        if not 0 <= warmup_steps < total_steps:
            raise ConfigurationError(
                'need 0 <= warmup_steps < total_steps, got {} and {}'.format(
                    warmup_steps, total_steps
                )
            )
        if min_lr > peak_lr:
            raise ConfigurationError(
                'min_lr {} exceeds peak_lr {}'.format(min_lr, peak_lr)
            )
        self.peak_lr = peak_lr
        self.warmup_steps = warmup_steps
        self.total_steps = total_steps
        self.min_lr = min_lr

    def __repr__(self):
        return 'Schedule(peak_lr={}, warmup_steps={}, total_steps={}, min_lr={})'.format(
            self.peak_lr, self.warmup_steps, self.total_steps, self.min_lr
        )


def lr_at(step, schedule):
    """Linear warmup from 0 to ``peak_lr``, then cosine decay to
    ``min_lr`` at ``total_steps``. Steps past the end give ``min_lr``."""
    peak, low = schedule.peak_lr, schedule.min_lr
    warmup, total = schedule.warmup_steps, schedule.total_steps
    if step < 0:
        raise ValueError('step must be non-negative, got {}'.format(step))
    if step > total:
        return low
    if step < warmup:
        return peak * step / warmup
    progress = (step - warmup) / (total - warmup)
    return low + (peak - low) * (1 + math.cos(math.pi * progress)) / 2


class FreezeMask:
    """The parameter groups that train; every other group is frozen."""
    __slots__ = ('trainable', )

    def __init__(self, trainable):
        self.trainable = frozenset(trainable)

    def is_trainable(self, group):
        return group in self.trainable

    def __eq__(self, other):
        if not isinstance(other, FreezeMask):
            return NotImplemented
        return self.trainable == other.trainable

    def __repr__(self):
        return 'FreezeMask({})'.format(', '.join(sorted(self.trainable)))


class OptimizerState:
    """First and second moments for exactly the trainable parameters."""
    __slots__ = ('m', 'v', 'step', 'beta1', 'beta2', 'eps', 'weight_decay')

    def __init__(self, shapes, weight_decay=0.0, beta1=BETA1, beta2=BETA2, eps=ADAM_EPS):
        self.m = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.v = {name: np.zeros(shape) for name, shape in shapes.items()}
        self.step = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls({name: p.shape for name, p in params.items()}, **kwargs)

    @property
    def names(self):
        return sorted(self.m)

    def nbytes(self):
        return sum(a.nbytes for a in self.m.values()) + sum(a.nbytes for a in self.v.values())


def adamw_step(params, grads, state, lr):
    """One AdamW update of every parameter that has moments in ``state``.

    ``params`` maps names to Tensors. Gradients are read from the mapping ``grads``
    when given, otherwise from each tensor's ``grad``. Parameters without
    moments are left alone.
    """
    missing = [
        name for name in state.m
        if name not in params or
        (grads.get(name) if grads is not None else params[name].grad) is None
    ]
    if missing:
        raise ContractError(
            'no gradient for trainable parameters: {}'.format(', '.join(sorted(missing)))
        )
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    correction1 = 1 - b1 ** t
    correction2 = 1 - b2 ** t
    for name in state.names:
        param = params[name]
        g = grads[name] if grads is not None else param.grad
        m = state.m[name] = b1 * state.m[name] + (1 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        update = m_hat / (np.sqrt(v_hat) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * param.data
        param.data = (param.data - lr * update).astype(param.data.dtype)
