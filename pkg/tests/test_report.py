import re
from io import StringIO

import colorful
import pytest

from slidecompress.bench import BenchReport, ThroughputReport
from slidecompress.color import (
    default_dark_style,
    default_light_style,
    detect_light_background,
    set_default_style,
)
from slidecompress.config import RunConfig
from slidecompress.errors import FormatError
from slidecompress.evaluation import CategoryScore, EvalReport
from slidecompress.flops import count_flops
from slidecompress.render import render_to_str
from slidecompress.report import (
    ablation_segments,
    bench_report_segments,
    eval_report_segments,
    flop_segments,
    parse_eval_report,
    report_to_str,
    save_report,
    write_report,
)
from slidecompress.segments import SLine, annotated
from slidecompress.syntax import Token

_ANSI_RE = re.compile(r'\x1b\[[0-9;]*m')


def sample_report():
    return EvalReport(
        [('amber', CategoryScore(41, 50)), ('basalt', CategoryScore(9, 10))],
        label='test',
    )


@pytest.fixture
def true_colors():
    previous = colorful.colormode
    colorful.use_true_colors()
    yield
    if previous:
        colorful.setup(colormode=previous)
    else:
        colorful.disable()


def test_eval_report_format():
    text = report_to_str(eval_report_segments(sample_report(), config_digest='abc'))
    assert text == (
        '# label = test\n'
        '# config = abc\n'
        'amber\t41\t50\t0.8200\n'
        'basalt\t9\t10\t0.9000\n'
        'AVG\t50\t60\t0.8600\n'
    )


def test_parse_failures_are_reported():
    report = sample_report()
    report.parse_failures = 3
    text = report_to_str(eval_report_segments(report))
    assert text.splitlines()[1] == '# parse_failures = 3'


def test_parse_eval_report_inverts_rendering():
    report = sample_report()
    report.parse_failures = 2
    back = parse_eval_report(report_to_str(eval_report_segments(report)))
    assert back.label == 'test'
    assert back.parse_failures == 2
    assert back.categories == ['amber', 'basalt']
    assert (back.correct, back.total) == (50, 60)
    assert back.average == pytest.approx(0.86)


def test_published_accuracies_render_with_missing_counts():
    report = EvalReport.from_accuracies(
        {'amber': 0.8354, 'basalt': 0.6756}, label='published'
    )
    text = report_to_str(eval_report_segments(report))
    assert 'amber\t-\t-\t0.8354\n' in text
    assert parse_eval_report(text).accuracy('basalt') == pytest.approx(0.6756)


def test_parse_eval_report_names_bad_line():
    with pytest.raises(FormatError) as exc_info:
        parse_eval_report('# label = x\namber\t1\t2\n', path='r.tsv')
    assert exc_info.value.offset == 2


def test_flop_segments():
    count = count_flops(RunConfig(), (256, 30, 16, 4), 'tcp')
    lines = report_to_str(flop_segments(count)).splitlines()
    assert lines[0] == '# flops.tcp = l_wsi=256 l_t=30 l_c=16 T=4 decoder_length=50'
    assert lines[-1] == 'tcp\ttotal\t{}'.format(count.total)
    assert len(lines) == 2 + len(count.components)


def test_bench_report_segments():
    config = RunConfig()
    throughput = [
        ThroughputReport('tcp', 'inference', 1024, 10, 2.0, 1e9, 5),
        ThroughputReport('full-forward', 'inference', 1024, 10, 8.0, 4e9, 5),
    ]
    flops = [count_flops(config, (1024, 30, 16, 4), kind) for kind in ('tcp', 'full-forward')]
    report = BenchReport('abc', 5, throughput, flops)
    lines = report_to_str(bench_report_segments(report)).splitlines()
    assert lines[:3] == ['# config = abc', '# warmup = 5', '# timer = time.perf_counter']
    assert lines[4] == 'tcp\tinference\t1024\t5.0000\t0.005000'
    assert 'ratio\tinference\t4.0000' in lines


def test_ablation_segments():
    reports = [
        (4, EvalReport.from_accuracies({'a': 0.80})),
        (16, EvalReport.from_accuracies({'a': 0.84})),
    ]
    text = report_to_str(ablation_segments(reports, 'abc'))
    assert text.splitlines()[1] == 'l_c=4\t0\t0\t0.8000'
    assert text.splitlines()[-1] == 'spread\t0.0400'


def test_save_report(tmp_path):
    path = str(tmp_path / 'report.tsv')
    save_report(path, eval_report_segments(sample_report()))
    with open(path, encoding='utf-8') as f:
        assert parse_eval_report(f.read()).total == 60


def test_render_to_str_drops_annotations():
    segments = list(annotated(Token.KEY, 'x')) + [SLine(2), 'y']
    assert render_to_str(segments) == 'x\n  y'


@pytest.mark.parametrize('style', [default_dark_style, default_light_style])
def test_colored_report_has_the_plain_text(true_colors, style):
    segments = list(eval_report_segments(sample_report()))
    stream = StringIO()
    write_report(stream, segments, color=True, style=style)
    colored = stream.getvalue()
    assert '\x1b[' in colored
    assert _ANSI_RE.sub('', colored) == report_to_str(segments)


def test_set_default_style():
    set_default_style('light')
    set_default_style('dark')
    with pytest.raises(TypeError):
        set_default_style('solarized')


@pytest.mark.parametrize('environ, expected', [
    ({}, None),
    ({'COLORFGBG': '15;0'}, False),
    ({'COLORFGBG': '0;15'}, True),
    ({'COLORFGBG': 'garbage'}, None),
    ({'COLORFGBG': '15;0', 'SLIDECOMPRESS_LIGHT_BACKGROUND': '1'}, True),
    ({'COLORFGBG': '0;15', 'SLIDECOMPRESS_LIGHT_BACKGROUND': 'false'}, False),
])
def test_detect_light_background(environ, expected):
    assert detect_light_background(environ) is expected
