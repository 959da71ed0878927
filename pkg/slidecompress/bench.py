"""
Wall-clock throughput of the token-compression path against feeding
every visual token to the decoder, on identical samples.
"""

import logging
import time
import warnings

from .decoder import GenerationSettings, answer_ids, generate_ids, prompt_ids
from .errors import EvaluationError
from .flops import count_flops
from .model import ModelBundle, Sample, make_encoder
from .synth import MARKER_IDENTITY, generate_qa, generate_slide, slide_spec_for
from .tensor import backward, no_grad, set_default_dtype, zero_grads
from .utils import derive_seed

logger = logging.getLogger(__name__)

TIMER = 'time.perf_counter'
PAIRED_KINDS = ('tcp', 'full-forward')
PHASES = ('inference', 'train')

# Tokens generated per inference sample; generation does not stop early.
ANSWER_TOKENS = 4


class ThroughputReport:
    __slots__ = ('kind', 'phase', 'l_wsi', 'samples', 'seconds', 'flops', 'warmup')

    def __init__(self, kind, phase, l_wsi, samples, seconds, flops, warmup):
        self.kind = kind
        self.phase = phase
        self.l_wsi = l_wsi
        self.samples = samples
        self.seconds = seconds
        self.flops = flops
        self.warmup = warmup

    @property
    def samples_per_sec(self):
        return self.samples / self.seconds

    @property
    def tflops(self):
        """Analytic FLOPs per second, in units of 1e12."""
        return self.flops * self.samples / self.seconds / 1e12

    def __repr__(self):
        return 'ThroughputReport({}, {}, {:.3f} samples/s)'.format(
            self.kind, self.phase, self.samples_per_sec
        )


class BenchReport:
    __slots__ = ('config_digest', 'warmup', 'timer', 'throughput', 'flops')

    def __init__(self, config_digest, warmup, throughput, flops, timer=TIMER):
        self.config_digest = config_digest
        self.warmup = warmup
        self.timer = timer
        self.throughput = throughput
        self.flops = flops

    def ratio(self, phase='inference'):
        """tcp samples/sec over full-forward samples/sec."""
        by_kind = {r.kind: r for r in self.throughput if r.phase == phase}
        return by_kind['tcp'].samples_per_sec / by_kind['full-forward'].samples_per_sec


def bench_samples(config, vocab, count):
    """``count`` freshly generated marker-identity samples on the
    configured grid. Slide indices start past the dataset's."""
    encoder = make_encoder(config)
    samples = []
    for i in range(count):
        spec = slide_spec_for(config.n_slides + i, config)
        patches, metadata = generate_slide(spec)
        record = generate_qa(metadata, MARKER_IDENTITY,
                             derive_seed(config.seed, 'bench', spec.slide_id))
        samples.append(Sample(
            record,
            encoder.encode_patches(patches).data,
            prompt_ids(vocab, record),
            answer_ids(vocab, record),
        ))
    return samples


def required_context(samples, visual_rows, answer_tokens=ANSWER_TOKENS):
    return max(visual_rows(s) + len(s.prompt_ids) + answer_tokens for s in samples)


def _run_once(bundle, sample, phase, settings):
    if phase == 'inference':
        with no_grad():
            generate_ids(bundle.decoder, bundle.prefix(sample), sample.prompt_ids, settings)
    else:
        loss = bundle.loss(sample)
        backward(loss)
        zero_grads(bundle.named_parameters().values())


def bench_throughput(bundle, samples, phase='inference', warmup=5, flops=0):
    """Mean samples per second over ``samples`` after ``warmup``
    untimed iterations."""
    if not samples:
        raise EvaluationError('no samples to benchmark')
    if phase not in PHASES:
        raise ValueError('phase must be one of {}, got {!r}'.format(', '.join(PHASES), phase))
    settings = GenerationSettings(ANSWER_TOKENS, stop=None)
    if phase == 'train':
        bundle.apply_freeze(bundle.freeze_mask(stage=1))
    for i in range(warmup):
        _run_once(bundle, samples[i % len(samples)], phase, settings)
    started = time.perf_counter()
    for sample in samples:
        _run_once(bundle, sample, phase, settings)
    seconds = max(time.perf_counter() - started, 1e-9)
    return ThroughputReport(
        bundle.kind, phase, samples[0].l_wsi, len(samples), seconds, flops, warmup
    )


def paired_bench(config, vocab, samples=None, phases=PHASES):
    """Throughput and FLOPs of tcp and full-forward on the same samples.

    The decoder context is widened when full-forward needs more rows than
    ``config.context``.
    """
    set_default_dtype(config.dtype)
    samples = samples or bench_samples(config, vocab, config.bench_samples)
    needed = required_context(
        samples, lambda s: min(s.l_wsi, config.max_visual_tokens)
    )
    if needed > config.context:
        warnings.warn(
            'widening the decoder context from {} to {} rows for full-forward'.format(
                config.context, needed
            ),
            UserWarning
        )
        config = config.replace(context=needed)

    l_wsi = samples[0].l_wsi
    l_t = len(samples[0].prompt_ids)
    throughput, flop_counts = [], []
    for kind in PAIRED_KINDS:
        bundle = ModelBundle.build(config, len(vocab), kind)
        count = count_flops(config, (l_wsi, l_t, config.l_c, ANSWER_TOKENS), kind, len(vocab))
        flop_counts.append(count)
        for phase in phases:
            flops = count.total if phase == 'inference' else count.training_total
            report = bench_throughput(bundle, samples, phase, config.bench_warmup, flops)
            logger.info('%s %s: %.3f samples/s', kind, phase, report.samples_per_sec)
            throughput.append(report)
    return BenchReport(config.digest(), config.bench_warmup, throughput, flop_counts)
