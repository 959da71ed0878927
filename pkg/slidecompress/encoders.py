"""
From patches and text to token sequences of width ``d_h``.
"""

import re
import warnings

import numpy as np

from .errors import LengthError, ShapeError
from .nn import Linear, embed
from .tensor import Tensor, add, get_default_dtype, take_rows

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ('<pad>', '<bos>', '<eos>', '<unk>')

_WORD_RE = re.compile(r'\w+|[^\w\s]')


class FrozenVisualEncoder:
    """A fixed random projection with orthonormal columns.

    Not a parameter: it never requires gradients and its output is never
    on the tape.
    """
    __slots__ = ('projection', 'seed')

    def __init__(self, projection, seed=None):
        self.projection = projection
        self.seed = seed

    @classmethod
    def create(cls, patch_px, d_f, seed):
        in_dim = patch_px * patch_px * 3
        if d_f > in_dim:
            raise ShapeError(
                'feature width {} exceeds flattened patch size {}'.format(d_f, in_dim)
            )
        rng = np.random.default_rng(seed)
        q, r = np.linalg.qr(rng.standard_normal((in_dim, d_f)))
        # Fix column signs so the factorisation is unique.
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        return cls(Tensor(q, dtype=np.float64), seed)

    @property
    def patch_px(self):
        return int(round(np.sqrt(self.projection.shape[0] / 3)))

    @property
    def d_f(self):
        return self.projection.shape[1]

    def encode_patches(self, patches):
        """``l x d_f`` features, row ``i`` = ``projection.T @ flatten(patch i)``."""
        sizes = {patch.pixels.shape for patch in patches}
        if len(sizes) > 1:
            raise ShapeError('patches have mixed sizes', *sorted(sizes))
        if not patches:
            return Tensor(np.zeros((0, self.d_f)), dtype=np.float64)
        shape, = sizes
        expected = (self.patch_px, self.patch_px, 3)
        if shape != expected:
            raise ShapeError('patch size does not match the encoder', shape, expected)
        flat = np.stack([patch.pixels.reshape(-1) for patch in patches])
        return Tensor(flat @ self.projection.data, dtype=np.float64)

    def named_parameters(self, prefix=''):
        yield ('{}.projection'.format(prefix) if prefix else 'projection'), self.projection


class Projector:
    """Affine map from frozen features (``d_f``) to the model width (``d_h``)."""
    __slots__ = ('linear', )

    def __init__(self, linear):
        self.linear = linear

    @classmethod
    def init(cls, rng, d_f, d_h):
        return cls(Linear.init(rng, d_f, d_h))

    def project(self, features):
        if not isinstance(features, Tensor):
            features = Tensor(np.asarray(features), dtype=get_default_dtype())
        if features.ndim != 2 or features.shape[1] != self.linear.d_in:
            raise ShapeError('features do not match the projector input width',
                             features.shape, self.linear.weight.shape)
        return self.linear(features)

    __call__ = project

    def named_parameters(self, prefix=''):
        yield from self.linear.named_parameters(prefix)


def normalize_text(text):
    return ' '.join(_WORD_RE.findall(text.lower()))


class Vocabulary:
    """Word-level vocabulary. Ids 0-3 are reserved for PAD, BOS, EOS and UNK."""
    __slots__ = ('tokens', '_ids')

    def __init__(self, words=()):
        self.tokens = list(RESERVED)
        self._ids = {token: i for i, token in enumerate(self.tokens)}
        for word in words:
            self.add(word)

    def add(self, word):
        if word not in self._ids:
            self._ids[word] = len(self.tokens)
            self.tokens.append(word)
        return self._ids[word]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, word):
        return word in self._ids

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.tokens == other.tokens

    def id_of(self, word):
        return self._ids.get(word, UNK)

    def word_of(self, token_id):
        return self.tokens[token_id]

    def tokenize(self, text):
        """Lowercases and splits ``text`` on whitespace and punctuation.
        Unknown words map to UNK."""
        return [self.id_of(word) for word in _WORD_RE.findall(text.lower())]

    def detokenize(self, ids):
        return ' '.join(self.tokens[i] for i in ids if i not in (PAD, BOS, EOS))

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.writelines(token + '\n' for token in self.tokens[len(RESERVED):])

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            return cls(line.rstrip('\n') for line in f if line.strip())

    def __repr__(self):
        return 'Vocabulary({} tokens)'.format(len(self.tokens))


def build_vocabulary(texts):
    """Vocabulary over every word of ``texts``, sorted for stable ids."""
    words = set()
    for text in texts:
        words.update(_WORD_RE.findall(text.lower()))
    return Vocabulary(sorted(words))


def tokenize_generated(vocab, text):
    """Like :meth:`Vocabulary.tokenize`, warning when generator text
    produces UNK."""
    ids = vocab.tokenize(text)
    if UNK in ids:
        warnings.warn(
            'text contains words outside the vocabulary: {!r}'.format(text),
            UserWarning
        )
    return ids


def embed_text(ids, tokens, positions):
    """``l_t x d_h`` text token sequence: token rows plus the learned
    position rows ``0 .. l_t - 1``."""
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) > len(positions):
        raise LengthError(
            'text of {} tokens exceeds {} text positions'.format(len(ids), len(positions))
        )
    return add(embed(ids, tokens), take_rows(positions.rows, np.arange(len(ids))))
