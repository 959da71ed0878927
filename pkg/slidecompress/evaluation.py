"""
Multiple-choice scoring of free-form answers.
"""

import re
from collections import OrderedDict

from .decoder import GenerationSettings, generate
from .errors import ContractError, EvaluationError
from .tensor import no_grad

# A standalone choice letter at the start, then '.', ')', whitespace or
# the end of the text.
_CHOICE_RE = re.compile(r'\s*([A-Da-d])(?=[.)]|\s|$)')

ALL_CATEGORY = 'all'


def parse_choice(text):
    """The choice letter a free-form answer starts with, or ``None``."""
    if not isinstance(text, str):
        return None
    match = _CHOICE_RE.match(text)
    return match.group(1).upper() if match else None


class CategoryScore:
    __slots__ = ('correct', 'total', 'accuracy')

    def __init__(self, correct, total, accuracy=None):
        self.correct = correct
        self.total = total
        if accuracy is None:
            accuracy = correct / total if total else 0.0
        self.accuracy = accuracy


class EvalReport:
    """Per-category accuracy; the average is the unweighted mean over
    categories."""
    __slots__ = ('scores', 'parse_failures', 'label')

    def __init__(self, scores, parse_failures=0, label=''):
        self.scores = OrderedDict(scores)
        self.parse_failures = parse_failures
        self.label = label

    @classmethod
    def from_accuracies(cls, accuracies, label=''):
        return cls(
            ((name, CategoryScore(None, None, acc)) for name, acc in accuracies.items()),
            label=label,
        )

    @property
    def categories(self):
        return list(self.scores)

    def accuracy(self, category):
        return self.scores[category].accuracy

    @property
    def average(self):
        if not self.scores:
            return 0.0
        return sum(s.accuracy for s in self.scores.values()) / len(self.scores)

    @property
    def correct(self):
        return sum(s.correct or 0 for s in self.scores.values())

    @property
    def total(self):
        return sum(s.total or 0 for s in self.scores.values())

    def rows(self):
        """``(name, correct, total, accuracy)`` per category, then ``AVG``."""
        for name, score in self.scores.items():
            yield name, score.correct, score.total, score.accuracy
        yield 'AVG', self.correct, self.total, self.average

    def __repr__(self):
        return 'EvalReport({} categories, average={:.4f})'.format(
            len(self.scores), self.average
        )


def accuracy(predictions, manifest, split='test', template_id=None):
    """Scores ``{record_id: generated text}`` against the gold letters of
    ``split``. Unparseable answers count as wrong."""
    records = manifest.records_for(split, template_id)
    missing = [r.record_id for r in records if r.record_id not in predictions]
    if missing:
        raise EvaluationError('no prediction for {} records'.format(len(missing)), missing)

    tallies = OrderedDict()
    failures = 0
    for record in records:
        category = manifest.tumor_types.get(record.slide_id, ALL_CATEGORY)
        letter = parse_choice(predictions[record.record_id])
        if letter is None:
            failures += 1
        correct, total = tallies.get(category, (0, 0))
        tallies[category] = (correct + (letter == record.gold), total + 1)
    scores = ((name, CategoryScore(*tallies[name])) for name in sorted(tallies))
    return EvalReport(scores, parse_failures=failures, label=template_id or split)


def predict(bundle, samples, vocab, settings=None):
    """``{record_id: generated text}`` for every sample."""
    settings = settings or GenerationSettings(bundle.config.max_new_tokens)
    predictions = OrderedDict()
    with no_grad():
        for sample in samples:
            prefix = bundle.prefix(sample)
            if bundle.kind == 'tcp' and prefix.shape[0] != bundle.l_c:
                raise ContractError(
                    'compressed prefix has {} rows, expected l_c = {}'.format(
                        prefix.shape[0], bundle.l_c
                    )
                )
            predictions[sample.record_id] = generate(
                bundle.decoder, prefix, sample.prompt_ids, settings, vocab
            )
    return predictions


def write_transcripts(path, predictions):
    with open(path, 'w', encoding='utf-8') as f:
        for record_id, text in predictions.items():
            f.write('{}\t{}\n'.format(record_id, text.replace('\t', ' ').replace('\n', ' ')))


def read_transcripts(path):
    predictions = OrderedDict()
    with open(path, encoding='utf-8') as f:
        for line in f:
            record_id, _, text = line.rstrip('\n').partition('\t')
            predictions[record_id] = text
    return predictions


def evaluate_run(config, manifest, vocab, kind=None, split='test', template_id=None,
                 data_dir=None):
    """Loads the final stage-1 checkpoint of ``kind`` and scores it on
    ``split``. Returns ``(report, predictions)``."""
    from .dataset import FeatureStore
    from .trainer import load_trained, make_samples

    bundle = load_trained(config, vocab, kind)
    store = FeatureStore(data_dir or config.data_dir, manifest)
    samples = make_samples(manifest, store, vocab, split, template_id)
    if not samples:
        raise EvaluationError('split {!r} has no records'.format(split))
    predictions = predict(bundle, samples, vocab)
    return accuracy(predictions, manifest, split, template_id), predictions


def run_baseline(kind, config, manifest, vocab, split='test', template_id=None):
    """Test-split report of a trained visual path ``kind``."""
    report, _ = evaluate_run(config, manifest, vocab, kind, split, template_id)
    report.label = '{} {}'.format(kind, report.label)
    return report
