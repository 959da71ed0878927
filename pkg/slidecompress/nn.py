"""
Attention, transformer layers, embeddings and masks shared by the
compression stack and the decoder.
"""

import numpy as np

from .errors import ConfigurationError, ShapeError
from .tensor import (
    add,
    concat_cols,
    gelu,
    layer_norm,
    matmul,
    normal,
    ones,
    scale,
    slice_cols,
    softmax_lastdim,
    take_rows,
    transpose,
    zeros,
)

INIT_STD = 0.02
MLP_EXPANSION = 4


def _join(prefix, name):
    return '{}.{}'.format(prefix, name) if prefix else name


def causal_mask(length):
    """Boolean ``length x length`` mask; entry ``(i, j)`` is permitted
    iff ``j <= i``."""
    if length < 1:
        raise ValueError('mask length must be positive, got {}'.format(length))
    return np.tril(np.ones((length, length), dtype=bool))


def full_mask(length):
    return np.ones((length, length), dtype=bool)


class Linear:
    __slots__ = ('weight', 'bias')

    def __init__(self, weight, bias=None):
        self.weight = weight
        self.bias = bias

    @classmethod
    def init(cls, rng, d_in, d_out, std=INIT_STD, bias=True):
        weight = normal(rng, (d_in, d_out), std, requires_grad=True)
        return cls(weight, zeros((d_out, ), requires_grad=True) if bias else None)

    @property
    def d_in(self):
        return self.weight.shape[0]

    @property
    def d_out(self):
        return self.weight.shape[1]

    def __call__(self, x):
        y = matmul(x, self.weight)
        if self.bias is not None:
            y = add(y, self.bias)
        return y

    def named_parameters(self, prefix=''):
        yield _join(prefix, 'weight'), self.weight
        if self.bias is not None:
            yield _join(prefix, 'bias'), self.bias


class LayerNormParams:
    __slots__ = ('gain', 'bias')

    def __init__(self, gain, bias):
        self.gain = gain
        self.bias = bias

    @classmethod
    def init(cls, d):
        return cls(ones((d, ), requires_grad=True), zeros((d, ), requires_grad=True))

    def __call__(self, x):
        return layer_norm(x, self.gain, self.bias)

    def named_parameters(self, prefix=''):
        yield _join(prefix, 'gain'), self.gain
        yield _join(prefix, 'bias'), self.bias


class AttentionParams:
    """Query, key, value and output projections for ``heads`` heads."""
    __slots__ = ('w_q', 'w_k', 'w_v', 'w_o', 'heads')

    def __init__(self, w_q, w_k, w_v, w_o, heads):
        d = w_q.shape[0]
        for w in (w_q, w_k, w_v, w_o):
            if w.shape != (d, d):
                raise ShapeError('attention projections must be square and equal',
                                 w_q.shape, w.shape)
        if heads < 1 or d % heads:
            raise ConfigurationError(
                'width {} is not divisible by {} heads'.format(d, heads)
            )
        self.w_q = w_q
        self.w_k = w_k
        self.w_v = w_v
        self.w_o = w_o
        self.heads = heads

    @classmethod
    def init(cls, rng, d, heads, std=INIT_STD):
        return cls(
            *(normal(rng, (d, d), std, requires_grad=True) for _ in range(4)),
            heads=heads
        )

    @property
    def d_h(self):
        return self.w_q.shape[0]

    @property
    def d_k(self):
        return self.d_h // self.heads

    def named_parameters(self, prefix=''):
        for name in ('w_q', 'w_k', 'w_v', 'w_o'):
            yield _join(prefix, name), getattr(self, name)


class TransformerLayer:
    """Pre-norm layer: ``x + attn(norm(x))`` then ``x + mlp(norm(x))``."""
    __slots__ = ('attention', 'norm1', 'norm2', 'mlp_in', 'mlp_out')

    def __init__(self, attention, norm1, norm2, mlp_in, mlp_out):
        self.attention = attention
        self.norm1 = norm1
        self.norm2 = norm2
        self.mlp_in = mlp_in
        self.mlp_out = mlp_out

    @classmethod
    def init(cls, rng, d, heads, std=INIT_STD):
        return cls(
            attention=AttentionParams.init(rng, d, heads, std),
            norm1=LayerNormParams.init(d),
            norm2=LayerNormParams.init(d),
            mlp_in=Linear.init(rng, d, MLP_EXPANSION * d, std),
            mlp_out=Linear.init(rng, MLP_EXPANSION * d, d, std),
        )

    @property
    def d_h(self):
        return self.attention.d_h

    @property
    def heads(self):
        return self.attention.heads

    def named_parameters(self, prefix=''):
        yield from self.attention.named_parameters(_join(prefix, 'attention'))
        yield from self.norm1.named_parameters(_join(prefix, 'norm1'))
        yield from self.norm2.named_parameters(_join(prefix, 'norm2'))
        yield from self.mlp_in.named_parameters(_join(prefix, 'mlp_in'))
        yield from self.mlp_out.named_parameters(_join(prefix, 'mlp_out'))

    def __call__(self, x, mask):
        return transformer_layer_forward(x, self, mask)


class EmbeddingTable:
    __slots__ = ('rows', )

    def __init__(self, rows):
        self.rows = rows

    @classmethod
    def init(cls, rng, count, d, std=INIT_STD):
        return cls(normal(rng, (count, d), std, requires_grad=True))

    def __len__(self):
        return self.rows.shape[0]

    @property
    def d_h(self):
        return self.rows.shape[1]

    def named_parameters(self, prefix=''):
        yield _join(prefix, 'rows'), self.rows


def mha_forward(x, params, mask):
    """Scaled dot-product attention per head, heads concatenated and
    projected by ``w_o``. ``mask`` is a boolean ``L x L`` array of
    permitted (query, key) pairs."""
    length, d = x.shape
    if d != params.d_h:
        raise ShapeError('input width does not match attention width',
                         x.shape, params.w_q.shape)
    if d % params.heads:
        raise ConfigurationError(
            'width {} is not divisible by {} heads'.format(d, params.heads)
        )
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (length, length):
        raise ShapeError('mask does not match sequence length', mask.shape, x.shape)

    q = matmul(x, params.w_q)
    k = matmul(x, params.w_k)
    v = matmul(x, params.w_v)
    d_k = params.d_k
    inv_scale = 1.0 / np.sqrt(d_k)

    outputs = []
    for h in range(params.heads):
        if params.heads == 1:
            qh, kh, vh = q, k, v
        else:
            lo, hi = h * d_k, (h + 1) * d_k
            qh = slice_cols(q, lo, hi)
            kh = slice_cols(k, lo, hi)
            vh = slice_cols(v, lo, hi)
        scores = scale(matmul(qh, transpose(kh)), inv_scale)
        weights = softmax_lastdim(scores, mask)
        outputs.append(matmul(weights, vh))

    merged = outputs[0] if len(outputs) == 1 else concat_cols(outputs)
    return matmul(merged, params.w_o)


def transformer_layer_forward(x, layer, mask):
    x = add(x, mha_forward(layer.norm1(x), layer.attention, mask))
    hidden = gelu(layer.mlp_in(layer.norm2(x)))
    return add(x, layer.mlp_out(hidden))


def embed(ids, table):
    """Row gather from ``table``; out-of-range ids raise an index error."""
    rows = table.rows if isinstance(table, EmbeddingTable) else table
    return take_rows(rows, ids)


def copy_parameters(source, target):
    """Copies every parameter value of ``source`` into ``target``.

    Both must expose ``named_parameters`` with matching names and shapes.
    """
    source_params = list(source.named_parameters())
    target_params = list(target.named_parameters())
    if [n for n, _ in source_params] != [n for n, _ in target_params]:
        raise ConfigurationError('parameter layouts differ')
    for (name, src), (_, dst) in zip(source_params, target_params):
        if src.shape != dst.shape:
            raise ConfigurationError(
                "parameter '{}' has shape {} in the source but {} in the target".format(
                    name, src.shape, dst.shape
                )
            )
        dst.data = src.data.copy()
