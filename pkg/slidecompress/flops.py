"""
Closed-form forward FLOP counts.

A ``m x k`` by ``k x n`` matmul costs ``2 m n k``. A transformer layer over
``L`` rows of width ``d`` costs ``8 L d^2`` for the four projections,
``2 L^2 d`` each for attention scores and mixing, and ``16 L d^2`` for the
MLP. Elementwise work (norms, softmax, activations) is not counted.
"""

from collections import OrderedDict

from .nn import MLP_EXPANSION

COMPONENTS = ('encoder', 'projector', 'compression', 'pooling', 'decoder')

# Backward costs about twice the forward pass of every part on the tape.
BACKWARD_FACTOR = 2


def matmul_flops(m, n, k):
    return 2 * m * n * k


def layer_flops(length, d):
    projections = 4 * matmul_flops(length, d, d)
    attention = matmul_flops(length, length, d) + matmul_flops(length, d, length)
    mlp = 2 * matmul_flops(length, MLP_EXPANSION * d, d)
    return projections + attention + mlp


class FlopCount:
    __slots__ = ('kind', 'lens', 'components', 'decoder_length')

    def __init__(self, kind, lens, components, decoder_length):
        self.kind = kind
        self.lens = lens
        self.components = OrderedDict(components)
        self.decoder_length = decoder_length

    @property
    def total(self):
        return sum(self.components.values())

    def __getitem__(self, component):
        return self.components[component]

    @property
    def training_total(self):
        """Forward plus estimated backward. The frozen encoder runs once
        at data generation and is excluded."""
        on_tape = self.total - self.components['encoder']
        return on_tape * (1 + BACKWARD_FACTOR)

    def __repr__(self):
        return 'FlopCount({}, total={:.3e})'.format(self.kind, self.total)


def visual_rows(config, kind, l_wsi):
    """Rows the visual path hands the decoder."""
    if kind == 'tcp':
        return config.l_c
    if kind == 'full-forward':
        return min(l_wsi, config.max_visual_tokens)
    if kind == 'prune-k':
        return min(config.l_c, l_wsi)
    if kind == 'random-k':
        return min(config.random_k, l_wsi)
    if kind == 'mil-pool':
        return 1
    raise ValueError('unknown kind {!r}'.format(kind))


def count_flops(config, lens, kind='tcp', vocab_size=256):
    """Forward FLOPs of one sample.

    :param lens: ``(l_wsi, l_t, l_c, T)``; ``l_t`` is the prompt length and
                 ``T`` the answer length.
    """
    l_wsi, l_t, l_c, answer = lens
    config = config.replace(l_c=l_c)
    d = config.d_h
    flat = config.patch_px * config.patch_px * 3

    components = OrderedDict((name, 0) for name in COMPONENTS)
    components['encoder'] = matmul_flops(l_wsi, config.d_f, flat)
    components['projector'] = matmul_flops(l_wsi, d, config.d_f)
    if kind == 'tcp':
        components['compression'] = config.n_cmp * layer_flops(l_c + l_wsi + l_t, d)
    elif kind == 'mil-pool':
        components['pooling'] = (
            2 * matmul_flops(l_wsi, config.mil_hidden, d) +
            matmul_flops(l_wsi, 1, config.mil_hidden) +
            matmul_flops(1, d, l_wsi)
        )

    decoder_length = visual_rows(config, kind, l_wsi) + l_t + answer
    components['decoder'] = (
        config.n_dec * layer_flops(decoder_length, d) +
        matmul_flops(decoder_length, vocab_size, d)
    )
    return FlopCount(kind, tuple(lens), components, decoder_length)
