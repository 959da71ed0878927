"""
Text reports. Each ``*_segments`` function yields a segment stream; the
plain rendering of that stream is the documented file format, and the
colored rendering adds terminal colors on top of the same text.

Evaluation report::

    # label = test
    # config = 3f2a...
    amber<TAB>41<TAB>50<TAB>0.8200
    ...
    AVG<TAB>402<TAB>500<TAB>0.8040
"""

from collections import OrderedDict

from .color import colored_render_to_stream
from .errors import FormatError
from .evaluation import CategoryScore, EvalReport
from .render import render_to_str, render_to_stream
from .segments import SLine, annotated
from .syntax import Token

SUMMARY_ROW = 'AVG'
MISSING = '-'


def _header(key, value):
    yield from annotated(Token.HEADER, '# {} = {}'.format(key, value))
    yield SLine(0)


def _row(*cells):
    for i, (value, text) in enumerate(cells):
        if i:
            yield '\t'
        yield from annotated(value, text)
    yield SLine(0)


def _int(value):
    return (Token.NUMBER_INT, MISSING if value is None else str(value))


def _float(value, digits=4):
    return (Token.NUMBER_FLOAT, '{:.{}f}'.format(value, digits))


def eval_report_segments(report, config_digest=None):
    if report.label:
        yield from _header('label', report.label)
    if config_digest is not None:
        yield from _header('config', config_digest)
    if report.parse_failures:
        yield from annotated(
            Token.WARNING, '# parse_failures = {}'.format(report.parse_failures)
        )
        yield SLine(0)
    for name, correct, total, accuracy in report.rows():
        yield from _row(
            (Token.SUMMARY if name == SUMMARY_ROW else Token.CATEGORY, name),
            _int(correct),
            _int(total),
            _float(accuracy),
        )


def parse_eval_report(text, path=None):
    """Inverse of the plain rendering of ``eval_report_segments``. The
    ``AVG`` row is recomputed, not read."""
    scores, label, failures = OrderedDict(), '', 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith('#'):
            key, _, value = line[1:].partition('=')
            key, value = key.strip(), value.strip()
            if key == 'label':
                label = value
            elif key == 'parse_failures':
                failures = int(value)
            continue
        fields = line.split('\t')
        if len(fields) != 4:
            raise FormatError('expected 4 fields, found {}'.format(len(fields)), path, lineno)
        name, correct, total, accuracy = fields
        if name == SUMMARY_ROW:
            continue
        scores[name] = CategoryScore(
            None if correct == MISSING else int(correct),
            None if total == MISSING else int(total),
            float(accuracy),
        )
    return EvalReport(scores, parse_failures=failures, label=label)


def flop_segments(count):
    l_wsi, l_t, l_c, answer = count.lens
    yield from _header(
        'flops.{}'.format(count.kind),
        'l_wsi={} l_t={} l_c={} T={} decoder_length={}'.format(
            l_wsi, l_t, l_c, answer, count.decoder_length
        ),
    )
    for component, value in count.components.items():
        yield from _row(
            (Token.KIND, count.kind), (Token.KEY, component), _int(value)
        )
    yield from _row((Token.KIND, count.kind), (Token.SUMMARY, 'total'), _int(count.total))


def bench_report_segments(report):
    yield from _header('config', report.config_digest)
    yield from _header('warmup', report.warmup)
    yield from _header('timer', report.timer)
    yield from _header('tflops', 'analytic flops per sample * samples / wall seconds / 1e12')
    for result in report.throughput:
        yield from _row(
            (Token.KIND, result.kind),
            (Token.KEY, result.phase),
            _int(result.l_wsi),
            _float(result.samples_per_sec),
            _float(result.tflops, 6),
        )
    phases = []
    for result in report.throughput:
        if result.phase not in phases:
            phases.append(result.phase)
    for phase in phases:
        yield from _row(
            (Token.SUMMARY, 'ratio'), (Token.KEY, phase), _float(report.ratio(phase))
        )
    for count in report.flops:
        yield from flop_segments(count)


def ablation_segments(results, config_digest=None):
    """One ``l_c<TAB>correct<TAB>total<TAB>average`` row per run, then the
    spread of the averages."""
    if config_digest is not None:
        yield from _header('config', config_digest)
    averages = []
    for l_c, report in results:
        averages.append(report.average)
        yield from _row(
            (Token.KEY, 'l_c={}'.format(l_c)),
            _int(report.correct),
            _int(report.total),
            _float(report.average),
        )
    if averages:
        yield from _row((Token.SUMMARY, 'spread'), _float(max(averages) - min(averages)))


def write_report(stream, segments, color=False, style=None):
    if color:
        colored_render_to_stream(stream, segments, style)
    else:
        render_to_stream(stream, segments)


def report_to_str(segments):
    return render_to_str(segments)


def save_report(path, segments):
    with open(path, 'w', encoding='utf-8') as f:
        write_report(f, segments)
