"""
Visual paths the token-compression path is compared against.

- ``full-forward`` feeds every projected visual token to the decoder.
- ``prune-k`` keeps ``l_c`` mutually distant tokens (greedy farthest point).
- ``random-k`` keeps ``random_k`` uniformly sampled tokens.
- ``mil-pool`` collapses the visual tokens into one by gated attention
  pooling.
"""

import warnings

import numpy as np

from .errors import ConfigurationError
from .model import MIL_POOL, PROJECTOR, register_visual_path
from .nn import Linear
from .tensor import matmul, mul, sigmoid, softmax_lastdim, tanh, transpose


def cap_visual_tokens(features, limit):
    """The first ``limit`` rows of ``features``, warning when rows are dropped."""
    if len(features) > limit:
        warnings.warn(
            'slide has {} visual tokens, keeping the first {}'.format(len(features), limit),
            UserWarning
        )
        return features[:limit]
    return features


def farthest_point_select(points, k):
    """Indices of ``k`` points chosen by greedy max-min Euclidean distance.

    The point nearest the centroid anchors the distances; it is chosen
    only if the greedy rule picks it. Ties go to the lowest index. The
    result is sorted.
    """
    if k < 1:
        raise ConfigurationError('k must be at least 1, got {}'.format(k))
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if k > n:
        warnings.warn('k={} exceeds the {} available tokens, keeping all'.format(k, n),
                      UserWarning)
        k = n
    if k == n:
        return np.arange(n)
    points = points.reshape(n, -1)
    centroid = points.mean(axis=0)
    anchor = int(np.argmin(np.linalg.norm(points - centroid, axis=1)))
    nearest = np.linalg.norm(points - points[anchor], axis=1)
    chosen = []
    for _ in range(k):
        i = int(np.argmax(nearest))
        chosen.append(i)
        nearest = np.minimum(nearest, np.linalg.norm(points - points[i], axis=1))
        nearest[chosen] = -1.0
    return np.sort(np.asarray(chosen, dtype=np.int64))


def random_select(n, k, rng):
    if k >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=k, replace=False))


class GatedAttentionPool:
    """Gated attention pooling over a bag of tokens:
    ``w = softmax(c(tanh(a(h)) * sigmoid(b(h))))``, output ``w @ h``."""
    __slots__ = ('attention_a', 'attention_b', 'attention_c')

    def __init__(self, attention_a, attention_b, attention_c):
        self.attention_a = attention_a
        self.attention_b = attention_b
        self.attention_c = attention_c

    @classmethod
    def init(cls, rng, d_h, hidden):
        return cls(
            Linear.init(rng, d_h, hidden),
            Linear.init(rng, d_h, hidden),
            Linear.init(rng, hidden, 1),
        )

    def __call__(self, tokens):
        """Returns ``(pooled 1 x d_h, weights 1 x L)``."""
        gate = mul(tanh(self.attention_a(tokens)), sigmoid(self.attention_b(tokens)))
        scores = transpose(self.attention_c(gate))
        weights = softmax_lastdim(scores)
        return matmul(weights, tokens), weights

    def named_parameters(self, prefix=''):
        def join(name):
            return '{}.{}'.format(prefix, name) if prefix else name
        yield from self.attention_a.named_parameters(join('attention_a'))
        yield from self.attention_b.named_parameters(join('attention_b'))
        yield from self.attention_c.named_parameters(join('attention_c'))


@register_visual_path('full-forward', trainable=(PROJECTOR, ))
def full_forward_prefix(bundle, sample):
    features = cap_visual_tokens(sample.features, bundle.config.max_visual_tokens)
    return bundle.visual_tokens(features)


@register_visual_path('prune-k', trainable=(PROJECTOR, ))
def pruned_prefix(bundle, sample):
    features = cap_visual_tokens(sample.features, bundle.config.max_visual_tokens)
    keep = farthest_point_select(features, bundle.l_c)
    return bundle.visual_tokens(features[keep])


@register_visual_path('random-k', trainable=(PROJECTOR, ))
def random_prefix(bundle, sample):
    rng = bundle.sample_rng(sample, 'random-k')
    keep = random_select(len(sample.features), bundle.config.random_k, rng)
    return bundle.visual_tokens(sample.features[keep])


@register_visual_path('mil-pool', trainable=(PROJECTOR, MIL_POOL), groups=(MIL_POOL, ))
def pooled_prefix(bundle, sample):
    pooled, _ = bundle.pool(bundle.visual_tokens(sample.features))
    return pooled
