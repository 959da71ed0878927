import os

import pytest

from slidecompress.dataset import (
    MANIFEST_FILE,
    SLIDES_FILE,
    FeatureStore,
    Manifest,
    VQARecord,
    read_dataset,
    write_dataset,
)
from slidecompress.errors import ContractError, FormatError
from slidecompress.utils import file_digest


def record(**overrides):
    fields = dict(
        slide_id='slide-0001',
        question='Which tissue pattern covers most of this slide?',
        choices=('stroma', 'mucin', 'adipose', 'vessel'),
        gold='B',
        template_id='majority-tissue',
        seed=7,
    )
    fields.update(overrides)
    return VQARecord(**fields)


def test_record_contract():
    assert record().record_id == 'slide-0001-majority-tissue'
    assert record().gold_text == 'mucin'
    with pytest.raises(ContractError):
        record(choices=('a', 'b', 'c'))
    with pytest.raises(ContractError):
        record(choices=('a', 'b', 'c', 'a'))
    with pytest.raises(ContractError):
        record(gold='E')


def test_manifest_queries():
    manifest = Manifest(
        [record(), record(slide_id='slide-0002', template_id='marker-identity')],
        feature_files={'slide-0001': 'f/1.tcpf', 'slide-0002': 'f/2.tcpf'},
        splits={'slide-0001': 'train', 'slide-0002': 'test'},
    )
    assert manifest.slide_ids('test') == ['slide-0002']
    assert [r.slide_id for r in manifest.records_for('train')] == ['slide-0001']
    assert manifest.records_for(template_id='marker-identity')[0].slide_id == 'slide-0002'
    assert len(manifest) == 2


def test_write_read_dataset(tiny_dataset):
    config, manifest, _ = tiny_dataset
    assert read_dataset(config.data_dir) == manifest
    assert set(manifest.splits.values()) == {'train', 'val', 'test'}


def test_writing_twice_gives_identical_files(tiny_dataset, tmp_path):
    config, manifest, _ = tiny_dataset
    other = str(tmp_path / 'copy')
    write_dataset(manifest, other)
    for name in (MANIFEST_FILE, SLIDES_FILE):
        assert file_digest(os.path.join(other, name)) == \
            file_digest(os.path.join(config.data_dir, name))


def test_malformed_manifest_line_names_line(tiny_dataset):
    config, _, _ = tiny_dataset
    path = os.path.join(config.data_dir, MANIFEST_FILE)
    with open(path, encoding='utf-8') as f:
        lines = f.readlines()
    lines[2] = 'slide-0000\ttrain\tonly three\n'
    with open(path, 'w', encoding='utf-8') as f:
        f.writelines(lines)
    with pytest.raises(FormatError) as exc_info:
        read_dataset(config.data_dir)
    assert exc_info.value.offset == 3
    assert exc_info.value.path == path


def test_truncated_feature_file_detected(tiny_dataset):
    config, manifest, _ = tiny_dataset
    path = os.path.join(config.data_dir, manifest.feature_files['slide-0005'])
    with open(path, 'rb') as f:
        data = f.read()
    with open(path, 'wb') as f:
        f.write(data[:-8])
    with pytest.raises(FormatError) as exc_info:
        read_dataset(config.data_dir)
    assert exc_info.value.path == path
    read_dataset(config.data_dir, check_features=False)


def test_record_fields_must_not_contain_tabs(tmp_path):
    manifest = Manifest(
        [record(question='a\tb?')],
        feature_files={'slide-0001': 'f.tcpf'},
        splits={'slide-0001': 'train'},
    )
    with pytest.raises(ContractError):
        write_dataset(manifest, str(tmp_path))


def test_feature_store_caches(tiny_dataset):
    config, manifest, _ = tiny_dataset
    store = FeatureStore(config.data_dir, manifest)
    first = store['slide-0003']
    assert first.shape == (16, config.d_f)
    assert store['slide-0003'] is first
