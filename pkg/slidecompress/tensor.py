"""
Dense tensors with reverse-mode differentiation.

Every model computation in slidecompress runs on :class:`Tensor`. An op whose
inputs require gradients records a :class:`Node` on its output; calling
:func:`backward` on a scalar loss orders those nodes with :class:`GradTape`
and pushes gradients back to the leaves.

The tape has a single writer: a forward/backward step runs on one thread.
Tensors that do not take part in differentiation are never mutated by ops and
can be shared freely.
"""

from contextlib import contextmanager

import numpy as np

from .errors import ContractError, NumericError, ShapeError, TokenIndexError


DTYPES = {
    'float64': np.float64,
    'float32': np.float32,
}

# Checkpoint dtype codes.
DTYPE_CODES = {
    np.dtype(np.float64): 0,
    np.dtype(np.float32): 1,
}

LAYER_NORM_EPS = 1e-5

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_GELU_C = 0.044715

_state = {
    'grad_enabled': True,
    'dtype': np.float64,
}


def set_default_dtype(name):
    """Sets the dtype of newly created tensors; ``'float64'`` or ``'float32'``.

    All correctness checks assume ``'float64'``; ``'float32'`` exists for
    benchmarking only.
    """
    try:
        _state['dtype'] = DTYPES[name]
    except KeyError:
        raise ValueError(
            "dtype must be one of {}, got {}".format(
                ', '.join(sorted(DTYPES)), repr(name)
            )
        )


def get_default_dtype():
    return _state['dtype']


def is_grad_enabled():
    return _state['grad_enabled']


@contextmanager
def no_grad():
    """Disables tape recording inside the block."""
    previous = _state['grad_enabled']
    _state['grad_enabled'] = False
    try:
        yield
    finally:
        _state['grad_enabled'] = previous


class Node:
    __slots__ = ('op', 'inputs', 'backward_fn')

    def __init__(self, op, inputs, backward_fn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn

    def __repr__(self):
        return 'Node({})'.format(self.op)


class Tensor:
    """A dense array of floats that may take part in differentiation.

    :param data: anything ``numpy.asarray`` accepts.
    :param requires_grad: mark this tensor as a leaf whose gradient
                          is accumulated into ``grad`` by :func:`backward`.
    :param dtype: numpy float dtype; defaults to the module default.
    """
    __slots__ = ('data', 'requires_grad', 'grad', '_node', 'name')

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if dtype is None:
            if (
                isinstance(data, np.ndarray) and
                data.dtype in (np.float64, np.float32)
            ):
                dtype = data.dtype
            else:
                dtype = _state['dtype']
        self.data = np.asarray(data, dtype=dtype, order='C')
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._node = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._node is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    @property
    def T(self):
        return transpose(self)

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return scale(self, 1.0 / other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        parts = ['shape={}'.format(self.data.shape)]
        if self.name:
            parts.insert(0, repr(self.name))
        if self.requires_grad:
            parts.append('requires_grad=True')
        if self._node is not None:
            parts.append('op={}'.format(self._node.op))
        return 'Tensor({})'.format(', '.join(parts))


def as_tensor(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def _check_finite(data, op):
    if not np.isfinite(data).all():
        raise NumericError(
            "'{}' produced non-finite values".format(op)
        )


def _record(op, data, inputs, backward_fn):
    _check_finite(data, op)
    out = Tensor(data, dtype=data.dtype)
    if _state['grad_enabled'] and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._node = Node(op, tuple(inputs), backward_fn)
    return out


def _reduce_to(grad, shape):
    """Sums a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    if len(shape) == 1 and grad.shape[-1] == shape[0]:
        return grad.reshape(-1, shape[0]).sum(axis=0)
    if shape == ():
        return np.asarray(grad.sum())
    raise ShapeError('cannot reduce gradient', grad.shape, shape)


def _check_broadcast(op, a, b):
    if a.shape == b.shape:
        return
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        return
    raise ShapeError(
        "'{}' needs equal shapes or a last-dim vector".format(op),
        a.shape,
        b.shape,
    )


class GradTape:
    """The recorded computation behind one output, in topological order.

    Each tensor appears after all of the inputs it was computed from.
    """
    __slots__ = ('tensors', )

    def __init__(self, tensors):
        self.tensors = tensors

    @classmethod
    def from_output(cls, output):
        order = []
        visited = set()
        stack = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            node = tensor._node
            if node is not None:
                for inp in node.inputs:
                    if inp.requires_grad and id(inp) not in visited:
                        stack.append((inp, False))
        return cls(order)

    def __len__(self):
        return len(self.tensors)

    def leaves(self):
        return [t for t in self.tensors if t._node is None]


def backward(loss):
    """Accumulates d(loss)/d(leaf) into ``grad`` of every leaf that
    requires gradients. Gradients add up across calls until zeroed."""
    if loss.data.ndim != 0:
        raise ContractError(
            'backward needs a scalar loss, got shape {}'.format(loss.shape)
        )
    if not loss.requires_grad:
        raise ContractError('loss is not on the gradient tape')

    tape = GradTape.from_output(loss)
    grads = {id(loss): np.ones_like(loss.data)}

    for tensor in reversed(tape.tensors):
        grad = grads.pop(id(tensor), None)
        if grad is None:
            continue
        node = tensor._node
        if node is None:
            if tensor.grad is None:
                tensor.grad = np.array(grad, dtype=tensor.data.dtype)
            else:
                tensor.grad = tensor.grad + grad
            continue
        input_grads = node.backward_fn(grad)
        for inp, input_grad in zip(node.inputs, input_grads):
            if input_grad is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + input_grad
            else:
                grads[key] = input_grad


def zero_grads(tensors):
    for tensor in tensors:
        tensor.grad = None


# Elementwise and affine ops.

def add(a, b):
    _check_broadcast('add', a, b)

    def backward_fn(g):
        return g, _reduce_to(g, b.shape)
    return _record('add', a.data + b.data, (a, b), backward_fn)


def sub(a, b):
    _check_broadcast('sub', a, b)

    def backward_fn(g):
        return g, -_reduce_to(g, b.shape)
    return _record('sub', a.data - b.data, (a, b), backward_fn)


def mul(a, b):
    _check_broadcast('mul', a, b)

    def backward_fn(g):
        return g * b.data, _reduce_to(g * a.data, b.shape)
    return _record('mul', a.data * b.data, (a, b), backward_fn)


def scale(a, factor):
    factor = float(factor)

    def backward_fn(g):
        return (g * factor, )
    return _record('scale', a.data * factor, (a, ), backward_fn)


def add_scalar(a, value):
    def backward_fn(g):
        return (g, )
    return _record('add_scalar', a.data + value, (a, ), backward_fn)


def matmul(a, b):
    """``c[i][j] = sum_p a[i][p] * b[p][j]`` for 2-D ``a`` and ``b``."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError('matmul extents do not line up', a.shape, b.shape)

    def backward_fn(g):
        grad_a = g @ b.data.T if a.requires_grad else None
        grad_b = a.data.T @ g if b.requires_grad else None
        return grad_a, grad_b
    return _record('matmul', a.data @ b.data, (a, b), backward_fn)


def transpose(a):
    if a.ndim != 2:
        raise ShapeError('transpose needs a matrix', a.shape)

    def backward_fn(g):
        return (g.T, )
    return _record('transpose', a.data.T, (a, ), backward_fn)


def tanh(a):
    y = np.tanh(a.data)

    def backward_fn(g):
        return (g * (1.0 - y * y), )
    return _record('tanh', y, (a, ), backward_fn)


def sigmoid(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def backward_fn(g):
        return (g * y * (1.0 - y), )
    return _record('sigmoid', y, (a, ), backward_fn)


def gelu(a):
    x = a.data
    inner = _SQRT_2_OVER_PI * (x + _GELU_C * x ** 3)
    t = np.tanh(inner)
    y = 0.5 * x * (1.0 + t)

    def backward_fn(g):
        d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner), )
    return _record('gelu', y, (a, ), backward_fn)


# Reductions.

def sum(a):
    def backward_fn(g):
        return (np.broadcast_to(g, a.shape).copy(), )
    return _record('sum', np.asarray(a.data.sum()), (a, ), backward_fn)


def mean(a):
    n = a.data.size

    def backward_fn(g):
        return (np.full(a.shape, g / n, dtype=a.data.dtype), )
    return _record('mean', np.asarray(a.data.mean()), (a, ), backward_fn)


# Normalisation.

def softmax_lastdim(x, mask=None):
    """Softmax over the last axis, with max subtraction.

    :param mask: optional boolean array broadcastable to ``x``; ``False``
                 entries are treated as minus infinity before the softmax
                 and get probability exactly zero.
    """
    if x.shape[-1] < 1:
        raise ShapeError('softmax needs a non-empty last axis', x.shape)
    data = x.data
    if mask is None:
        shifted = data - data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), data.shape)
        if not mask.any(axis=-1).all():
            raise ContractError('softmax mask leaves a row with no entries')
        masked = np.where(mask, data, -np.inf)
        shifted = masked - masked.max(axis=-1, keepdims=True)
        e = np.where(mask, np.exp(np.where(mask, shifted, 0.0)), 0.0)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)), )
    return _record('softmax', y, (x, ), backward_fn)


def layer_norm(x, gain, bias, eps=LAYER_NORM_EPS):
    """Normalises every row of ``x`` to zero mean and unit variance,
    then applies ``gain`` and ``bias``."""
    d = x.shape[-1]
    if gain.shape != (d, ) or bias.shape != (d, ):
        raise ShapeError('layer_norm parameters must match the row width',
                         x.shape, gain.shape, bias.shape)
    if eps <= 0:
        raise ValueError('eps must be positive, got {}'.format(eps))
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    y = xhat * gain.data + bias.data

    def backward_fn(g):
        grad_x = None
        if x.requires_grad:
            dxhat = g * gain.data
            grad_x = inv_std * (
                dxhat -
                dxhat.mean(axis=-1, keepdims=True) -
                xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            )
        grad_gain = (g * xhat).reshape(-1, d).sum(axis=0)
        grad_bias = g.reshape(-1, d).sum(axis=0)
        return grad_x, grad_gain, grad_bias
    return _record('layer_norm', y, (x, gain, bias), backward_fn)


def cross_entropy_logits(logits, targets):
    """Mean over rows of ``-log softmax(logits[t])[targets[t]]``."""
    if logits.ndim != 2:
        raise ShapeError('cross entropy needs T x V logits', logits.shape)
    targets = np.asarray(targets, dtype=np.int64)
    t, v = logits.shape
    if targets.shape != (t, ):
        raise ShapeError('one target per logit row', logits.shape, targets.shape)
    if t == 0:
        raise ContractError('cross entropy over zero positions')
    bad = (targets < 0) | (targets >= v)
    if bad.any():
        raise TokenIndexError(
            'target index {} out of range for vocabulary of {}'.format(
                int(targets[bad][0]), v
            )
        )
    data = logits.data
    shifted = data - data.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(t)
    losses = log_z - shifted[rows, targets]

    def backward_fn(g):
        probs = np.exp(shifted - log_z[:, None])
        probs[rows, targets] -= 1.0
        return (probs * (g / t), )
    return _record('cross_entropy', np.asarray(losses.mean()), (logits, ), backward_fn)


# Indexing and assembly.

def take_rows(table, ids):
    """Gathers rows of ``table``; the gradient scatters back to used rows."""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    n = table.shape[0]
    bad = (ids < 0) | (ids >= n)
    if bad.any():
        raise TokenIndexError(
            'row index {} out of range for table of {} rows'.format(
                int(ids[bad][0]), n
            )
        )

    def backward_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad, )
    return _record('take_rows', table.data[ids], (table, ), backward_fn)


def slice_rows(x, start, stop):
    def backward_fn(g):
        grad = np.zeros_like(x.data)
        grad[start:stop] = g
        return (grad, )
    return _record('slice_rows', x.data[start:stop], (x, ), backward_fn)


def slice_cols(x, start, stop):
    if x.ndim != 2:
        raise ShapeError('slice_cols needs a matrix', x.shape)

    def backward_fn(g):
        grad = np.zeros_like(x.data)
        grad[:, start:stop] = g
        return (grad, )
    return _record('slice_cols', x.data[:, start:stop], (x, ), backward_fn)


def concat_rows(tensors):
    tensors = list(tensors)
    widths = {t.shape[1:] for t in tensors}
    if len(widths) != 1:
        raise ShapeError('concat_rows needs equal row widths',
                         *(t.shape for t in tensors))
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])

    def backward_fn(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(tensors)))
    data = np.concatenate([t.data for t in tensors], axis=0)
    return _record('concat_rows', data, tensors, backward_fn)


def concat_cols(tensors):
    tensors = list(tensors)
    heights = {t.shape[0] for t in tensors}
    if len(heights) != 1 or any(t.ndim != 2 for t in tensors):
        raise ShapeError('concat_cols needs matrices of equal height',
                         *(t.shape for t in tensors))
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward_fn(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))
    data = np.concatenate([t.data for t in tensors], axis=1)
    return _record('concat_cols', data, tensors, backward_fn)


# Constructors.

def zeros(shape, requires_grad=False, dtype=None):
    return Tensor(np.zeros(shape, dtype=dtype or _state['dtype']),
                  requires_grad=requires_grad)


def ones(shape, requires_grad=False, dtype=None):
    return Tensor(np.ones(shape, dtype=dtype or _state['dtype']),
                  requires_grad=requires_grad)


def normal(rng, shape, std, requires_grad=False, dtype=None):
    data = rng.normal(0.0, std, size=shape)
    return Tensor(data.astype(dtype or _state['dtype']),
                  requires_grad=requires_grad)
