"""
The causal decoder that reads a soft prefix plus the prompt and writes
the answer.

Soft prefix rows enter the decoder as they are. Position embeddings are
added to token rows only, counting from 0 after the prefix and skipping
PAD tokens, so the same decoder serves every prefix length.
"""

import numpy as np

from .encoders import BOS, EOS, PAD, tokenize_generated
from .errors import ConfigurationError, ContractError, LengthError, ShapeError
from .nn import (
    EmbeddingTable,
    LayerNormParams,
    TransformerLayer,
    causal_mask,
    embed,
)
from .optim import adamw_step
from .tensor import (
    add,
    backward,
    concat_rows,
    cross_entropy_logits,
    matmul,
    no_grad,
    scale,
    slice_rows,
    take_rows,
    transpose,
    zero_grads,
    zeros,
)

PROMPT_TEMPLATE = 'Q: {question}\nA. {a} B. {b} C. {c} D. {d}\nAnswer:'
ANSWER_TEMPLATE = '{letter}. {text}'


def prompt_text(record):
    a, b, c, d = record.choices
    return PROMPT_TEMPLATE.format(question=record.question, a=a, b=b, c=c, d=d)


def answer_text(record):
    return ANSWER_TEMPLATE.format(letter=record.gold, text=record.gold_text)


def scaffold_texts():
    """Text the prompt and answer templates add around generator text."""
    return [
        PROMPT_TEMPLATE.format(question='', a='', b='', c='', d=''),
        ANSWER_TEMPLATE.format(letter='A', text=''),
    ]


def prompt_ids(vocab, record):
    return [BOS] + tokenize_generated(vocab, prompt_text(record))


def answer_ids(vocab, record):
    return tokenize_generated(vocab, answer_text(record)) + [EOS]


class GenerationSettings:
    __slots__ = ('max_new_tokens', 'strategy', 'stop')

    def __init__(self, max_new_tokens=16, strategy='greedy', stop=EOS):
        if max_new_tokens < 1:
            raise ConfigurationError(
                'max_new_tokens must be at least 1, got {}'.format(max_new_tokens)
            )
        if strategy != 'greedy':
            raise ConfigurationError("only 'greedy' decoding is supported, got {!r}".format(
                strategy
            ))
        self.max_new_tokens = max_new_tokens
        self.strategy = strategy
        self.stop = stop


class DecoderLM:
    __slots__ = ('tokens', 'positions', 'layers', 'final_norm', 'out_bias')

    def __init__(self, tokens, positions, layers, final_norm, out_bias):
        self.tokens = tokens
        self.positions = positions
        self.layers = list(layers)
        self.final_norm = final_norm
        self.out_bias = out_bias

    @classmethod
    def init(cls, rng, vocab_size, d_h, heads, n_layers, context):
        return cls(
            tokens=EmbeddingTable.init(rng, vocab_size, d_h),
            positions=EmbeddingTable.init(rng, context, d_h),
            layers=[TransformerLayer.init(rng, d_h, heads) for _ in range(n_layers)],
            final_norm=LayerNormParams.init(d_h),
            out_bias=zeros((vocab_size, ), requires_grad=True),
        )

    @property
    def vocab_size(self):
        return len(self.tokens)

    @property
    def d_h(self):
        return self.tokens.d_h

    @property
    def context(self):
        return len(self.positions)

    def named_parameters(self, prefix=''):
        def join(name):
            return '{}.{}'.format(prefix, name) if prefix else name
        yield from self.tokens.named_parameters(join('tokens'))
        yield from self.positions.named_parameters(join('positions'))
        for i, layer in enumerate(self.layers):
            yield from layer.named_parameters(join('layers.{}'.format(i)))
        yield from self.final_norm.named_parameters(join('final_norm'))
        yield join('out_bias'), self.out_bias

    def input_sequence(self, prefix, ids):
        """The embedded sequence ``prefix ++ embed(ids)`` and its attention
        mask."""
        ids = np.asarray(ids, dtype=np.int64)
        n_prefix = 0 if prefix is None else prefix.shape[0]
        length = n_prefix + len(ids)
        if length < 1:
            raise ContractError('the decoder needs at least one input row')
        if length > self.context:
            raise LengthError(
                'sequence of {} rows exceeds the context limit {}'.format(length, self.context)
            )
        valid = ids != PAD
        positions = np.where(valid, np.cumsum(valid) - 1, 0)
        parts = []
        if n_prefix:
            if prefix.ndim != 2 or prefix.shape[1] != self.d_h:
                raise ShapeError('prefix width does not match the decoder',
                                 prefix.shape, self.tokens.rows.shape)
            parts.append(prefix)
        if len(ids):
            parts.append(add(embed(ids, self.tokens), take_rows(self.positions.rows, positions)))
        x = parts[0] if len(parts) == 1 else concat_rows(parts)

        keys = np.concatenate([np.ones(n_prefix, dtype=bool), valid])
        mask = causal_mask(length) & keys[None, :]
        np.fill_diagonal(mask, True)
        return x, mask

    def hidden_states(self, prefix, ids):
        x, mask = self.input_sequence(prefix, ids)
        for layer in self.layers:
            x = layer(x, mask)
        return self.final_norm(x)

    def project_out(self, hidden):
        return add(matmul(hidden, transpose(self.tokens.rows)), self.out_bias)

    def forward_logits(self, prefix, ids):
        """``L x V`` logits for every row of ``prefix ++ ids``."""
        return self.project_out(self.hidden_states(prefix, ids))

    def hint_prefix(self, answer, length):
        """A soft prefix made of the token embeddings of ``answer``
        (EOS dropped), repeated to ``length`` rows."""
        ids = [i for i in answer if i != EOS] or [BOS]
        ids = [ids[i % len(ids)] for i in range(length)]
        return embed(ids, self.tokens)


def strip_trailing_pad(prompt):
    """``prompt`` without trailing PAD ids. The last real prompt token
    predicts the first answer token."""
    prompt = list(prompt)
    while prompt and prompt[-1] == PAD:
        prompt.pop()
    return prompt


def check_context(decoder, l_prefix, l_prompt, n_answer):
    total = l_prefix + l_prompt + n_answer
    if total > decoder.context:
        raise LengthError(
            'l_c + l_prompt + T = {} + {} + {} = {} exceeds the context limit {}'.format(
                l_prefix, l_prompt, n_answer, total, decoder.context
            )
        )


def answer_loss(logits, first_row, answer):
    """Mean cross entropy of ``answer`` against logit rows
    ``first_row .. first_row + T - 1``; every other row is ignored."""
    rows = slice_rows(logits, first_row, first_row + len(answer))
    return cross_entropy_logits(rows, answer)


def forward_loss(decoder, prefix, prompt, answer):
    """Teacher-forced answer loss. The input is ``prefix ++ prompt ++
    answer[:-1]``; only positions that predict answer tokens count."""
    answer = list(answer)
    if not answer or answer[-1] != EOS:
        raise ContractError('answer ids must end with EOS')
    prompt = strip_trailing_pad(prompt)
    if not prompt:
        raise ContractError('the prompt needs at least one token')
    n_prefix = 0 if prefix is None else prefix.shape[0]
    check_context(decoder, n_prefix, len(prompt), len(answer))
    ids = list(prompt) + answer[:-1]
    logits = decoder.forward_logits(prefix, ids)
    return answer_loss(logits, n_prefix + len(prompt) - 1, answer)


def transcript_loss(decoder, ids, prefix=None):
    """Next-token loss over every token of ``ids`` after the first."""
    if len(ids) < 2:
        raise ContractError('a transcript needs at least two tokens')
    n_prefix = 0 if prefix is None else prefix.shape[0]
    logits = decoder.forward_logits(prefix, ids[:-1])
    return cross_entropy_logits(slice_rows(logits, n_prefix, n_prefix + len(ids) - 1), ids[1:])


def generate_ids(decoder, prefix, prompt, settings):
    """Greedy continuation of ``prompt`` until the stop id (if any) or
    ``max_new_tokens``. The stop id is not returned."""
    n_prefix = 0 if prefix is None else prefix.shape[0]
    ids = strip_trailing_pad(prompt)
    out = []
    with no_grad():
        for _ in range(settings.max_new_tokens):
            if n_prefix + len(ids) > decoder.context:
                break
            hidden = decoder.hidden_states(prefix, ids)
            last = slice_rows(hidden, hidden.shape[0] - 1, hidden.shape[0])
            logits = decoder.project_out(last).data[0]
            token = int(np.argmax(logits))
            if settings.stop is not None and token == settings.stop:
                break
            out.append(token)
            ids.append(token)
    return out


def generate(decoder, prefix, prompt, settings, vocab):
    """Greedy free-form answer as text."""
    return vocab.detokenize(generate_ids(decoder, prefix, prompt, settings))


def pretrain_lm_step(decoder, batch, state, lr, rng=None, hint_prob=0.0, max_hint=16):
    """One optimizer step of next-token training on text-only transcripts.

    ``batch`` holds ``(prompt_ids, answer_ids)`` pairs. With probability
    ``hint_prob`` a transcript is preceded by a hint prefix of random
    length ``1..max_hint``. Returns the mean loss.
    """
    params = dict(decoder.named_parameters())
    zero_grads(params.values())
    total = 0.0
    for prompt, answer in batch:
        ids = list(prompt) + list(answer)
        prefix = None
        if rng is not None and hint_prob > 0 and rng.random() < hint_prob:
            length = int(rng.integers(1, max_hint + 1))
            length = min(length, decoder.context - len(ids) + 1)
            if length > 0:
                prefix = decoder.hint_prefix(answer, length)
        loss = transcript_loss(decoder, ids, prefix)
        backward(scale(loss, 1.0 / len(batch)))
        total += loss.item()
    adamw_step(params, None, state, lr)
    zero_grads(params.values())
    return total / len(batch)

