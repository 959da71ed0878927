"""
Everything one run trains and evaluates, grouped for freezing and
checkpointing, plus the registry of visual paths.

A visual path turns a sample into the soft prefix the decoder reads. The
token-compression path is registered here; the baselines register theirs
in :mod:`slidecompress.baselines`.
"""

import inspect
from collections import OrderedDict

import numpy as np

from .compression import CompressionBank, CompressionStack, compress
from .decoder import DecoderLM, forward_loss, generate
from .encoders import FrozenVisualEncoder, Projector, embed_text
from .errors import ConfigurationError
from .optim import FreezeMask
from .utils import array_digest, derive_seed, make_rng

VISUAL_ENCODER = 'visual_encoder'
PROJECTOR = 'projector'
COMPRESSION_BANK = 'compression_bank'
COMPRESSION_STACK = 'compression_stack'
MIL_POOL = 'mil_pool'
DECODER = 'decoder'

GROUP_ORDER = (
    VISUAL_ENCODER,
    PROJECTOR,
    COMPRESSION_BANK,
    COMPRESSION_STACK,
    MIL_POOL,
    DECODER,
)

STAGE0_MASK = FreezeMask([DECODER])

_VISUAL_PATHS = OrderedDict()


class VisualPath:
    __slots__ = ('kind', 'fn', 'trainable', 'groups')

    def __init__(self, kind, fn, trainable, groups):
        self.kind = kind
        self.fn = fn
        self.trainable = FreezeMask(trainable)
        self.groups = tuple(groups)


def register_visual_path(kind, trainable, groups=()):
    """Returns a decorator that registers the decorated function as the
    visual path ``kind``.

    :param trainable: the parameter groups stage-1 training updates.
    :param groups: groups beyond the shared ones this path needs built.

    The decorated function must accept exactly two positional arguments,
    the ``bundle`` and the ``sample``, and return the prefix Tensor.
    """
    def decorator(fn):
        try:
            inspect.signature(fn).bind(None, None)
        except TypeError:
            raise ValueError(
                "Functions decorated with register_visual_path must accept "
                "exactly two positional parameters: 'bundle' and 'sample'. "
                "The function signature for {}.{} was not compatible.".format(
                    fn.__module__, fn.__qualname__
                )
            )
        _VISUAL_PATHS[kind] = VisualPath(kind, fn, trainable, groups)
        return fn
    return decorator


def is_registered(kind):
    return kind in _VISUAL_PATHS


def registered_kinds():
    return tuple(_VISUAL_PATHS)


def get_visual_path(kind):
    try:
        return _VISUAL_PATHS[kind]
    except KeyError:
        raise ConfigurationError(
            "unknown baseline kind '{}', expected one of {}".format(
                kind, ', '.join(_VISUAL_PATHS)
            )
        )


class Sample:
    """One record with its slide features and token ids."""
    __slots__ = ('record', 'features', 'prompt_ids', 'answer_ids', 'tumor_type')

    def __init__(self, record, features, prompt_ids, answer_ids, tumor_type=None):
        self.record = record
        self.features = features
        self.prompt_ids = list(prompt_ids)
        self.answer_ids = list(answer_ids)
        self.tumor_type = tumor_type

    @property
    def record_id(self):
        return self.record.record_id

    @property
    def seed(self):
        return self.record.seed

    @property
    def l_wsi(self):
        return self.features.shape[0]

    def __repr__(self):
        return 'Sample({!r}, l_wsi={})'.format(self.record_id, self.l_wsi)


def make_encoder(config):
    """The frozen visual encoder of every run sharing ``config.seed``."""
    return FrozenVisualEncoder.create(
        config.patch_px, config.d_f, derive_seed(config.seed, VISUAL_ENCODER)
    )


def init_seeds(config):
    return OrderedDict(
        (group, derive_seed(config.seed, 'init', group)) for group in GROUP_ORDER
    )


class ModelBundle:
    __slots__ = ('config', 'kind', 'encoder', 'projector', 'bank', 'stack', 'pool',
                 'decoder', 'seeds')

    def __init__(self, config, kind, encoder, projector, bank, stack, pool, decoder, seeds):
        self.config = config
        self.kind = kind
        self.encoder = encoder
        self.projector = projector
        self.bank = bank
        self.stack = stack
        self.pool = pool
        self.decoder = decoder
        self.seeds = seeds

    @classmethod
    def build(cls, config, vocab_size, kind=None):
        from .baselines import GatedAttentionPool

        kind = kind or config.baseline
        path = get_visual_path(kind)
        seeds = init_seeds(config)
        seeds[VISUAL_ENCODER] = derive_seed(config.seed, VISUAL_ENCODER)

        def rng(group):
            return np.random.default_rng(seeds[group])

        bank = stack = pool = None
        if COMPRESSION_BANK in path.groups:
            bank = CompressionBank.init(rng(COMPRESSION_BANK), config.l_c, config.d_h)
        if COMPRESSION_STACK in path.groups:
            stack = CompressionStack.init(
                rng(COMPRESSION_STACK), config.n_cmp, config.d_h, config.heads,
                config.l_c, config.context,
            )
        if MIL_POOL in path.groups:
            pool = GatedAttentionPool.init(rng(MIL_POOL), config.d_h, config.mil_hidden)
        return cls(
            config=config,
            kind=kind,
            encoder=make_encoder(config),
            projector=Projector.init(rng(PROJECTOR), config.d_f, config.d_h),
            bank=bank,
            stack=stack,
            pool=pool,
            decoder=DecoderLM.init(
                rng(DECODER), vocab_size, config.d_h, config.heads, config.n_dec,
                config.context,
            ),
            seeds=seeds,
        )

    @property
    def path(self):
        return get_visual_path(self.kind)

    @property
    def l_c(self):
        return self.config.l_c

    def _modules(self):
        return (
            (VISUAL_ENCODER, self.encoder),
            (PROJECTOR, self.projector),
            (COMPRESSION_BANK, self.bank),
            (COMPRESSION_STACK, self.stack),
            (MIL_POOL, self.pool),
            (DECODER, self.decoder),
        )

    def groups(self):
        """``{group: [(name, Tensor), ...]}`` in a fixed order, for the
        groups this bundle has."""
        return OrderedDict(
            (group, list(module.named_parameters(group)))
            for group, module in self._modules()
            if module is not None
        )

    def named_parameters(self, groups=None):
        return OrderedDict(
            (name, param)
            for group, params in self.groups().items()
            if groups is None or group in groups
            for name, param in params
        )

    def group_digest(self, group):
        return array_digest(p.data for _, p in self.groups()[group])

    def freeze_mask(self, stage=1):
        return STAGE0_MASK if stage == 0 else self.path.trainable

    def apply_freeze(self, mask):
        """Marks exactly the parameters of trainable groups as requiring
        gradients. The visual encoder never does."""
        for group, params in self.groups().items():
            trainable = group != VISUAL_ENCODER and mask.is_trainable(group)
            for _, param in params:
                param.requires_grad = trainable
                param.grad = None

    def trainable_parameters(self, mask):
        return self.named_parameters(
            [group for group in self.groups() if mask.is_trainable(group)]
        )

    def visual_tokens(self, features):
        return self.projector.project(features)

    def text_tokens(self, ids):
        return embed_text(ids, self.decoder.tokens, self.stack.text_positions)

    def prefix(self, sample):
        return self.path.fn(self, sample)

    def loss(self, sample):
        return forward_loss(self.decoder, self.prefix(sample), sample.prompt_ids,
                            sample.answer_ids)

    def answer(self, sample, settings, vocab):
        return generate(self.decoder, self.prefix(sample), sample.prompt_ids, settings, vocab)

    def decoder_input_length(self, sample):
        """Rows the decoder reads before generating: prefix plus prompt."""
        return self.prefix(sample).shape[0] + len(sample.prompt_ids)

    def sample_rng(self, sample, name):
        return make_rng(sample.seed, name)

    def __repr__(self):
        return 'ModelBundle(kind={!r}, groups={})'.format(
            self.kind, ', '.join(self.groups())
        )


@register_visual_path(
    'tcp',
    trainable=(PROJECTOR, COMPRESSION_BANK, COMPRESSION_STACK),
    groups=(COMPRESSION_BANK, COMPRESSION_STACK),
)
def compressed_prefix(bundle, sample):
    hv = bundle.visual_tokens(sample.features)
    ht = bundle.text_tokens(sample.prompt_ids)
    return compress(bundle.bank, hv, ht, bundle.stack)


# Registers the baseline visual paths.
import slidecompress.baselines  # noqa
