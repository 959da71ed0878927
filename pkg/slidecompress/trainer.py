"""
Stage-0 text-only pretraining of the decoder and stage-1 training of a
visual path with the decoder frozen.
"""

import logging
import math
import os
import time
from collections import OrderedDict

from .checkpoint import MANIFEST_NAME, load_checkpoint, restore, save_checkpoint
from .compression import init_from_decoder
from .dataset import FeatureStore
from .decoder import answer_ids, pretrain_lm_step, prompt_ids, scaffold_texts
from .encoders import Vocabulary, build_vocabulary
from .errors import ConfigurationError, ContractError, EvaluationError
from .model import DECODER, STAGE0_MASK, ModelBundle, Sample
from .optim import OptimizerState, Schedule, adamw_step, lr_at
from .synth import template_corpus
from .tensor import GradTape, backward, scale, set_default_dtype, zero_grads
from .utils import chunked, make_rng

logger = logging.getLogger(__name__)

STAGE0_NAME = 'stage0'
FINAL_NAME = 'final'
METRICS_FILE = 'metrics.tsv'


def run_name(config, kind=None):
    return '{}-lc{}'.format(kind or config.baseline, config.l_c)


def stage0_dir(config):
    return os.path.join(config.checkpoint_dir, STAGE0_NAME)


def run_dir(config, kind=None):
    return os.path.join(config.checkpoint_dir, run_name(config, kind))


def final_dir(config, kind=None):
    return os.path.join(run_dir(config, kind), FINAL_NAME)


def dataset_vocabulary(config):
    """The closed vocabulary of everything the generator and the prompt
    templates can produce."""
    return build_vocabulary(template_corpus(config.n_categories) + scaffold_texts())


def load_vocabulary(config):
    return Vocabulary.load(config.vocab_path)


def make_samples(manifest, store, vocab, split, template_id=None):
    return [
        Sample(
            record,
            store[record.slide_id],
            prompt_ids(vocab, record),
            answer_ids(vocab, record),
            tumor_type=manifest.tumor_types.get(record.slide_id),
        )
        for record in manifest.records_for(split, template_id)
    ]


class MetricsLog:
    """Append-only ``step<TAB>loss<TAB>lr<TAB>samples_per_sec`` lines."""

    def __init__(self, path):
        self.path = path
        self.rows = []
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        self._file = open(path, 'w', encoding='utf-8')

    def append(self, step, loss, lr, samples_per_sec):
        self.rows.append((step, loss, lr, samples_per_sec))
        self._file.write('{}\t{:.6f}\t{:.6e}\t{:.3f}\n'.format(step, loss, lr, samples_per_sec))
        self._file.flush()

    def close(self):
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def read_metrics(path):
    rows = []
    with open(path, encoding='utf-8') as f:
        for line in f:
            step, loss, lr, rate = line.rstrip('\n').split('\t')
            rows.append((int(step), float(loss), float(lr), float(rate)))
    return rows


def accumulate_gradients(bundle, samples):
    """Backpropagates the mean answer loss of ``samples``, one sample at a
    time. Returns that mean loss."""
    total = 0.0
    for sample in samples:
        loss = bundle.loss(sample)
        backward(scale(loss, 1.0 / len(samples)))
        total += loss.item()
    return total / len(samples)


def _schedule(peak_lr, warmup, total, min_lr):
    return Schedule(peak_lr, min(warmup, total - 1), total, min_lr)


class TrainResult:
    __slots__ = ('bundle', 'directory', 'checkpoint', 'metrics', 'state')

    def __init__(self, bundle, directory, checkpoint, metrics, state):
        self.bundle = bundle
        self.directory = directory
        self.checkpoint = checkpoint
        self.metrics = metrics
        self.state = state


def pretrain(config, manifest, vocab):
    """Stage 0: next-token training of the decoder on the text of the
    training records. Writes the checkpoint to ``<checkpoint_dir>/stage0``."""
    set_default_dtype(config.dtype)
    transcripts = [
        (prompt_ids(vocab, record), answer_ids(vocab, record))
        for record in manifest.records_for('train')
    ]
    if not transcripts:
        raise EvaluationError('the manifest has no training records')

    bundle = ModelBundle.build(config, len(vocab))
    bundle.apply_freeze(STAGE0_MASK)
    decoder = bundle.decoder
    state = OptimizerState.for_params(
        dict(decoder.named_parameters()), weight_decay=config.weight_decay
    )
    steps = config.pretrain_steps
    schedule = _schedule(config.pretrain_lr, config.pretrain_warmup, steps, config.min_lr)
    rng = make_rng(config.seed, 'pretrain')
    directory = stage0_dir(config)

    order, cursor = rng.permutation(len(transcripts)), 0
    with MetricsLog(os.path.join(directory, METRICS_FILE)) as metrics:
        for step in range(1, steps + 1):
            batch = []
            while len(batch) < config.accum_steps:
                if cursor == len(order):
                    order, cursor = rng.permutation(len(transcripts)), 0
                batch.append(transcripts[order[cursor]])
                cursor += 1
            lr = lr_at(step, schedule)
            started = time.perf_counter()
            loss = pretrain_lm_step(decoder, batch, state, lr, rng=rng,
                                    hint_prob=config.hint_prob, max_hint=config.l_c)
            rate = len(batch) / max(time.perf_counter() - started, 1e-9)
            metrics.append(step, loss, lr, rate)
            if step % config.log_every == 0 or step == steps:
                logger.info('stage-0 step %d/%d loss %.4f lr %.3e', step, steps, loss, lr)
    save_checkpoint(directory, bundle, stage=0, step=steps, groups=[DECODER])
    return TrainResult(bundle, directory, directory, metrics.rows, state)


def prepare_stage1(config, vocab, kind=None):
    """Builds a bundle for ``kind`` with the stage-0 decoder loaded, the
    compression stack seeded from the decoder, and the freeze mask applied."""
    stage0 = stage0_dir(config)
    if not os.path.exists(os.path.join(stage0, MANIFEST_NAME)):
        raise ConfigurationError(
            'stage-0 checkpoint not found at {}; run pretrain-lm first'.format(stage0)
        )
    set_default_dtype(config.dtype)
    bundle = ModelBundle.build(config, len(vocab), kind)
    restore(bundle, load_checkpoint(stage0), groups=[DECODER])
    if bundle.stack is not None:
        init_from_decoder(bundle.stack, bundle.decoder, config.init_layers)
    bundle.apply_freeze(bundle.freeze_mask(stage=1))
    return bundle


def reachable_parameters(bundle, params, sample):
    """The entries of ``params`` that the loss of ``sample`` depends on.

    A path can leave trainable groups off the tape; with no compression
    layers the bank alone makes the prefix. Those tensors are marked
    frozen and get no optimizer state.
    """
    leaves = {id(t) for t in GradTape.from_output(bundle.loss(sample)).leaves()}
    reachable = OrderedDict()
    for name, param in params.items():
        if id(param) in leaves:
            reachable[name] = param
        else:
            param.requires_grad = False
            param.grad = None
    unused = [name for name in params if name not in reachable]
    if unused:
        logger.warning('not on the loss tape, left untrained: %s', ', '.join(unused))
    return reachable


def frozen_digests(bundle, mask):
    return OrderedDict(
        (group, bundle.group_digest(group))
        for group in bundle.groups()
        if not mask.is_trainable(group)
    )


def check_frozen(bundle, digests):
    changed = [
        group for group, digest in digests.items()
        if bundle.group_digest(group) != digest
    ]
    if changed:
        raise ContractError('frozen groups changed during training: {}'.format(
            ', '.join(changed)
        ))


def train(config, manifest, vocab, data_dir=None, kind=None):
    """Stage 1: trains the groups the visual path marks trainable.

    Gradients of ``accum_steps`` single-sample micro-batches are summed
    (each scaled by the micro-batch count) before one AdamW step.
    """
    bundle = prepare_stage1(config, vocab, kind)
    mask = bundle.freeze_mask(stage=1)
    frozen = frozen_digests(bundle, mask)

    store = FeatureStore(data_dir or config.data_dir, manifest)
    samples = make_samples(manifest, store, vocab, 'train')
    if not samples:
        raise EvaluationError('the manifest has no training records')
    params = reachable_parameters(bundle, bundle.trainable_parameters(mask), samples[0])
    state = OptimizerState.for_params(params, weight_decay=config.weight_decay)
    logger.info('training %s: %d trainable tensors, optimizer state %d bytes',
                ', '.join(sorted(mask.trainable)), len(params), state.nbytes())
    per_epoch = math.ceil(len(samples) / config.accum_steps)
    total = config.total_steps or config.epochs * per_epoch
    schedule = _schedule(config.peak_lr, config.warmup_steps, total, config.min_lr)
    directory = run_dir(config, bundle.kind)

    step = 0
    with MetricsLog(os.path.join(directory, METRICS_FILE)) as metrics:
        for epoch in range(config.epochs):
            order = make_rng(config.seed, 'epoch', epoch).permutation(len(samples))
            for chunk in chunked(order, config.accum_steps):
                if step >= total:
                    break
                started = time.perf_counter()
                loss = accumulate_gradients(bundle, [samples[i] for i in chunk])
                step += 1
                lr = lr_at(step, schedule)
                adamw_step(params, None, state, lr)
                zero_grads(params.values())
                rate = len(chunk) / max(time.perf_counter() - started, 1e-9)
                metrics.append(step, loss, lr, rate)
                if step % config.log_every == 0:
                    logger.info('step %d/%d loss %.4f lr %.3e %.2f samples/s',
                                step, total, loss, lr, rate)
                if step % config.checkpoint_every == 0:
                    save_checkpoint(os.path.join(directory, 'step-{:06d}'.format(step)),
                                    bundle, stage=1, step=step)
            save_checkpoint(os.path.join(directory, 'epoch-{}'.format(epoch + 1)),
                            bundle, stage=1, step=step)
    check_frozen(bundle, frozen)
    final = save_checkpoint(os.path.join(directory, FINAL_NAME), bundle, stage=1, step=step)
    logger.info('finished %s after %d steps', run_name(config, bundle.kind), step)
    return TrainResult(bundle, directory, final, metrics.rows, state)


def load_trained(config, vocab, kind=None):
    """The bundle saved at the end of stage 1."""
    set_default_dtype(config.dtype)
    bundle = ModelBundle.build(config, len(vocab), kind)
    restore(bundle, load_checkpoint(final_dir(config, bundle.kind)))
    return bundle
