"""
Compression tokens and the bidirectional stack that fuses them with the
visual and text tokens.

The joint sequence is ``(H^c, H^v, H^t)``. Compression slots and text slots
get learned position embeddings; visual tokens get none, so the output
does not depend on patch order. Only the first ``l_c`` output states are
kept.
"""

import numpy as np

from .errors import ConfigurationError, ShapeError
from .nn import INIT_STD, EmbeddingTable, TransformerLayer, copy_parameters, full_mask
from .tensor import add, concat_rows, normal, slice_rows, take_rows


class CompressionBank:
    __slots__ = ('tokens', )

    def __init__(self, tokens):
        if tokens.ndim != 2 or tokens.shape[0] < 1:
            raise ConfigurationError(
                'a compression bank needs at least one token, got shape {}'.format(tokens.shape)
            )
        self.tokens = tokens

    @classmethod
    def init(cls, rng, l_c, d_h):
        if l_c < 1:
            raise ConfigurationError('l_c must be at least 1, got {}'.format(l_c))
        return cls(normal(rng, (l_c, d_h), INIT_STD, requires_grad=True))

    @property
    def l_c(self):
        return self.tokens.shape[0]

    @property
    def d_h(self):
        return self.tokens.shape[1]

    def named_parameters(self, prefix=''):
        yield ('{}.tokens'.format(prefix) if prefix else 'tokens'), self.tokens


class CompressionStack:
    __slots__ = ('layers', 'slot_positions', 'text_positions')

    def __init__(self, layers, slot_positions, text_positions):
        self.layers = list(layers)
        self.slot_positions = slot_positions
        self.text_positions = text_positions

    @classmethod
    def init(cls, rng, n_layers, d_h, heads, l_c, max_text):
        return cls(
            layers=[TransformerLayer.init(rng, d_h, heads) for _ in range(n_layers)],
            slot_positions=EmbeddingTable.init(rng, l_c, d_h),
            text_positions=EmbeddingTable.init(rng, max_text, d_h),
        )

    @property
    def d_h(self):
        return self.slot_positions.d_h

    def named_parameters(self, prefix=''):
        def join(name):
            return '{}.{}'.format(prefix, name) if prefix else name
        for i, layer in enumerate(self.layers):
            yield from layer.named_parameters(join('layers.{}'.format(i)))
        yield from self.slot_positions.named_parameters(join('slot_positions'))
        yield from self.text_positions.named_parameters(join('text_positions'))


def joint_length(l_c, l_wsi, l_t):
    return l_c + l_wsi + l_t


def compress(bank, hv, ht, stack):
    """Runs ``stack`` over ``(H^c, H^v, H^t)`` with full attention and
    returns the first ``l_c`` hidden states.

    ``hv`` may have zero rows. ``ht`` already carries its text positions.
    """
    d = bank.d_h
    if stack.slot_positions.d_h != d or len(stack.slot_positions) < bank.l_c:
        raise ShapeError('stack slot positions do not cover the bank',
                         stack.slot_positions.rows.shape, bank.tokens.shape)
    parts = [add(bank.tokens, take_rows(stack.slot_positions.rows, np.arange(bank.l_c)))]
    for name, seq in (('visual', hv), ('text', ht)):
        if seq is None:
            continue
        if seq.ndim != 2 or seq.shape[1] != d:
            raise ShapeError('{} tokens do not match the bank width'.format(name),
                             seq.shape, bank.tokens.shape)
        if seq.shape[0]:
            parts.append(seq)

    x = parts[0] if len(parts) == 1 else concat_rows(parts)
    if not stack.layers:
        return parts[0]
    mask = full_mask(x.shape[0])
    for layer in stack.layers:
        x = layer(x, mask)
    return slice_rows(x, 0, bank.l_c)


def init_from_decoder(stack, decoder, n_layers):
    """Copies the values of the first ``n_layers`` decoder layers into the
    stack. The two never share storage."""
    if n_layers < 0 or n_layers > len(decoder.layers) or n_layers > len(stack.layers):
        raise ConfigurationError(
            'cannot copy {} layers: decoder has {}, stack has {}'.format(
                n_layers, len(decoder.layers), len(stack.layers)
            )
        )
    for i in range(n_layers):
        source, target = decoder.layers[i], stack.layers[i]
        if source.d_h != target.d_h or source.heads != target.heads:
            raise ConfigurationError(
                'decoder layer {} has width {} and {} heads, stack layer has {} and {}'.format(
                    i, source.d_h, source.heads, target.d_h, target.heads
                )
            )
        copy_parameters(source, target)
