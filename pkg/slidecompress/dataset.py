"""
VQA records, the manifest, and their on-disk layout.

A dataset directory holds::

    manifest.tsv    one record per line: slide_id, split, template_id,
                    question, choice A..D, gold, seed
    slides.tsv      one slide per line: slide_id, split, tumor_type,
                    feature file (relative to the directory)
    features/       one ``.tcpf`` feature file per slide
    vocab.txt       the closed vocabulary
"""

import os
import struct

from .errors import ContractError, FormatError
from .serialize import FEATURE_MAGIC, read_features, write_features

MANIFEST_FILE = 'manifest.tsv'
SLIDES_FILE = 'slides.tsv'
VOCAB_FILE = 'vocab.txt'

SPLITS = ('train', 'val', 'test')
GOLD_LETTERS = ('A', 'B', 'C', 'D')

_MANIFEST_FIELDS = 10
_SLIDES_FIELDS = 4


class VQARecord:
    __slots__ = ('slide_id', 'question', 'choices', 'gold', 'template_id', 'seed')

    def __init__(self, slide_id, question, choices, gold, template_id, seed):
        choices = tuple(choices)
        if len(choices) != 4:
            raise ContractError('a record needs exactly 4 choices, got {}'.format(len(choices)))
        if len(set(choices)) != 4:
            raise ContractError('choices must be pairwise distinct: {!r}'.format(choices))
        if gold not in GOLD_LETTERS:
            raise ContractError('gold must be one of A-D, got {!r}'.format(gold))
        self.slide_id = slide_id
        self.question = question
        self.choices = choices
        self.gold = gold
        self.template_id = template_id
        self.seed = int(seed)

    @property
    def record_id(self):
        return '{}-{}'.format(self.slide_id, self.template_id)

    @property
    def gold_text(self):
        return self.choices[GOLD_LETTERS.index(self.gold)]

    def _key(self):
        return (self.slide_id, self.question, self.choices, self.gold,
                self.template_id, self.seed)

    def __eq__(self, other):
        if not isinstance(other, VQARecord):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return 'VQARecord({!r}, gold={})'.format(self.record_id, self.gold)


class Manifest:
    """Records plus the per-slide feature file, split and tumor type."""
    __slots__ = ('records', 'feature_files', 'splits', 'tumor_types')

    def __init__(self, records=(), feature_files=None, splits=None, tumor_types=None):
        self.records = list(records)
        self.feature_files = dict(feature_files or {})
        self.splits = dict(splits or {})
        self.tumor_types = dict(tumor_types or {})

    def slide_ids(self, split=None):
        return sorted(
            slide_id for slide_id, tag in self.splits.items()
            if split is None or tag == split
        )

    def records_for(self, split=None, template_id=None):
        return [
            record for record in self.records
            if (split is None or self.splits[record.slide_id] == split) and
            (template_id is None or record.template_id == template_id)
        ]

    def record_index(self):
        return {record.record_id: record for record in self.records}

    def validate(self, path=None):
        for lineno, record in enumerate(self.records, start=1):
            if record.slide_id not in self.splits:
                raise FormatError(
                    "record refers to unknown slide '{}'".format(record.slide_id),
                    path,
                    lineno,
                )
            if record.slide_id not in self.feature_files:
                raise FormatError(
                    "slide '{}' has no feature file".format(record.slide_id),
                    path,
                    lineno,
                )
        for slide_id, tag in self.splits.items():
            if tag not in SPLITS:
                raise FormatError(
                    "slide '{}' has unknown split '{}'".format(slide_id, tag), path
                )
        return self

    def __eq__(self, other):
        if not isinstance(other, Manifest):
            return NotImplemented
        return (
            self.records == other.records and
            self.feature_files == other.feature_files and
            self.splits == other.splits and
            self.tumor_types == other.tumor_types
        )

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return 'Manifest({} records, {} slides)'.format(len(self.records), len(self.splits))


def _check_field(value, what):
    if '\t' in value or '\n' in value or '\r' in value:
        raise ContractError('{} contains a tab or newline: {!r}'.format(what, value))
    return value


def _record_line(record, split):
    fields = [record.slide_id, split, record.template_id, record.question]
    fields.extend(record.choices)
    fields.extend([record.gold, str(record.seed)])
    return '\t'.join(_check_field(f, 'record field') for f in fields)


def write_dataset(manifest, directory, features=None):
    """Writes ``manifest`` (and, if given, the ``{slide_id: matrix}``
    feature files) into ``directory``. The manifest is written last."""
    os.makedirs(directory, exist_ok=True)
    if features:
        for slide_id, matrix in features.items():
            path = os.path.join(directory, manifest.feature_files[slide_id])
            os.makedirs(os.path.dirname(path), exist_ok=True)
            write_features(path, matrix)

    slide_lines = [
        '\t'.join(_check_field(f, 'slide field') for f in (
            slide_id,
            manifest.splits[slide_id],
            manifest.tumor_types.get(slide_id, ''),
            manifest.feature_files[slide_id],
        ))
        for slide_id in sorted(manifest.splits)
    ]
    with open(os.path.join(directory, SLIDES_FILE), 'w', encoding='utf-8') as f:
        f.writelines(line + '\n' for line in slide_lines)

    record_lines = [
        _record_line(record, manifest.splits[record.slide_id])
        for record in manifest.records
    ]
    with open(os.path.join(directory, MANIFEST_FILE), 'w', encoding='utf-8') as f:
        f.writelines(line + '\n' for line in record_lines)


def _read_lines(path):
    with open(path, encoding='utf-8') as f:
        return [line.rstrip('\n') for line in f]


def _check_feature_header(path):
    size = os.path.getsize(path)
    with open(path, 'rb') as f:
        header = f.read(20)
    if len(header) < 20:
        raise FormatError('truncated feature header', path, len(header))
    if header[:4] != FEATURE_MAGIC:
        raise FormatError(
            'bad magic {!r}, expected {!r}'.format(header[:4], FEATURE_MAGIC), path, 0
        )
    _, count, payload = struct.unpack_from('<IQI', header, 4)
    if size != 20 + count * payload:
        raise FormatError(
            'expected {} payload bytes, found {}'.format(count * payload, size - 20),
            path,
            min(size, 20 + count * payload),
        )


def read_dataset(directory, check_features=True):
    """Reads a dataset directory written by :func:`write_dataset`."""
    slides_path = os.path.join(directory, SLIDES_FILE)
    manifest_path = os.path.join(directory, MANIFEST_FILE)

    splits, feature_files, tumor_types = {}, {}, {}
    for lineno, line in enumerate(_read_lines(slides_path), start=1):
        fields = line.split('\t')
        if len(fields) != _SLIDES_FIELDS:
            raise FormatError(
                'expected {} fields, found {}'.format(_SLIDES_FIELDS, len(fields)),
                slides_path,
                lineno,
            )
        slide_id, split, tumor_type, feature_file = fields
        if slide_id in splits:
            raise FormatError("slide '{}' listed twice".format(slide_id), slides_path, lineno)
        splits[slide_id] = split
        feature_files[slide_id] = feature_file
        if tumor_type:
            tumor_types[slide_id] = tumor_type

    records = []
    for lineno, line in enumerate(_read_lines(manifest_path), start=1):
        fields = line.split('\t')
        if len(fields) != _MANIFEST_FIELDS:
            raise FormatError(
                'expected {} fields, found {}'.format(_MANIFEST_FIELDS, len(fields)),
                manifest_path,
                lineno,
            )
        slide_id, split, template_id, question = fields[:4]
        if splits.get(slide_id, split) != split:
            raise FormatError(
                "slide '{}' appears in more than one split".format(slide_id),
                manifest_path,
                lineno,
            )
        try:
            record = VQARecord(
                slide_id=slide_id,
                question=question,
                choices=fields[4:8],
                gold=fields[8],
                template_id=template_id,
                seed=int(fields[9]),
            )
        except (ValueError, ContractError) as exc:
            raise FormatError(str(exc), manifest_path, lineno)
        records.append(record)

    manifest = Manifest(records, feature_files, splits, tumor_types)
    manifest.validate(manifest_path)
    if check_features:
        for slide_id in sorted(feature_files):
            _check_feature_header(os.path.join(directory, feature_files[slide_id]))
    return manifest


class FeatureStore:
    """Loads feature matrices from a dataset directory on demand."""

    def __init__(self, directory, manifest):
        self.directory = directory
        self.manifest = manifest
        self._cache = {}

    def __getitem__(self, slide_id):
        try:
            return self._cache[slide_id]
        except KeyError:
            pass
        path = os.path.join(self.directory, self.manifest.feature_files[slide_id])
        matrix = read_features(path)
        self._cache[slide_id] = matrix
        return matrix
