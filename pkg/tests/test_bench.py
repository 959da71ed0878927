import pytest

from slidecompress.bench import (
    ANSWER_TOKENS,
    PAIRED_KINDS,
    bench_samples,
    bench_throughput,
    paired_bench,
)
from slidecompress.config import RunConfig
from slidecompress.errors import EvaluationError
from slidecompress.model import ModelBundle
from slidecompress.trainer import dataset_vocabulary

from .conftest import TINY


def test_bench_samples_come_after_the_dataset(tiny_config, tiny_dataset):
    _, manifest, vocab = tiny_dataset
    samples = bench_samples(tiny_config, vocab, 2)
    assert [s.record.slide_id for s in samples] == ['slide-0060', 'slide-0061']
    assert not set(s.record.slide_id for s in samples) & set(manifest.splits)
    assert samples[0].features.shape == (16, tiny_config.d_f)


def test_bench_throughput_checks(tiny_bundle, tiny_samples):
    with pytest.raises(EvaluationError):
        bench_throughput(tiny_bundle, [])
    with pytest.raises(ValueError):
        bench_throughput(tiny_bundle, tiny_samples, phase='serve')


@pytest.mark.parametrize('phase', ['inference', 'train'])
def test_bench_throughput(tiny_bundle, tiny_samples, phase):
    report = bench_throughput(tiny_bundle, tiny_samples[:2], phase, warmup=1, flops=1000)
    assert report.samples == 2
    assert report.samples_per_sec > 0
    assert report.tflops == pytest.approx(2000 / report.seconds / 1e12)
    assert report.l_wsi == 16


def test_paired_bench(tiny_config, tiny_dataset):
    _, _, vocab = tiny_dataset
    report = paired_bench(tiny_config, vocab)
    assert [(r.kind, r.phase) for r in report.throughput] == [
        ('tcp', 'inference'), ('tcp', 'train'),
        ('full-forward', 'inference'), ('full-forward', 'train'),
    ]
    assert [count.kind for count in report.flops] == list(PAIRED_KINDS)
    assert report.config_digest == tiny_config.digest()
    assert report.ratio('inference') > 0
    assert report.flops[1]['decoder'] > report.flops[0]['decoder']


def test_paired_bench_widens_context(tiny_dataset):
    _, _, vocab = tiny_dataset
    config = RunConfig(**{**TINY, 'context': 20})
    with pytest.warns(UserWarning, match='widening the decoder context'):
        report = paired_bench(config, vocab, phases=('inference', ))
    assert report.config_digest != config.digest()


@pytest.mark.skip(reason="unskip to run the wall-clock comparison at l_WSI = 1024")
def test_compression_is_faster_at_1024_tokens():
    config = RunConfig(grid=(32, 32), bench_samples=10, bench_warmup=5)
    vocab = dataset_vocabulary(config)
    report = paired_bench(config, vocab, phases=('inference', ))
    print('tcp / full-forward inference throughput: {:.2f}'.format(report.ratio('inference')))
    assert report.ratio('inference') > 1


@pytest.mark.skip(reason="unskip to run the wall-clock scaling check")
def test_full_forward_slows_down_more_than_compression():
    vocab = dataset_vocabulary(RunConfig())
    seconds = {}
    for grid in ((16, 16), (32, 32)):
        config = RunConfig(grid=grid, bench_samples=5, bench_warmup=2)
        samples = bench_samples(config, vocab, config.bench_samples)
        context = 32 * 32 + 64 + ANSWER_TOKENS
        for kind in PAIRED_KINDS:
            bundle = ModelBundle.build(config.replace(context=context), len(vocab), kind)
            report = bench_throughput(bundle, samples, 'inference', config.bench_warmup)
            seconds[kind, grid] = report.seconds
    tcp = seconds['tcp', (32, 32)] / seconds['tcp', (16, 16)]
    full = seconds['full-forward', (32, 32)] / seconds['full-forward', (16, 16)]
    assert full > tcp
