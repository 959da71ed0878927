import os

import numpy as np
import pytest

from slidecompress.checkpoint import (
    MANIFEST_NAME,
    checkpoint_digest,
    load_checkpoint,
    restore,
    save_checkpoint,
)
from slidecompress.errors import ConfigurationError, FormatError, ShapeError
from slidecompress.model import DECODER, PROJECTOR, ModelBundle


def test_save_load_restore(tiny_bundle, tmp_path):
    directory = str(tmp_path / 'ckpt')
    save_checkpoint(directory, tiny_bundle, stage=1, step=7)
    checkpoint = load_checkpoint(directory)
    assert checkpoint.header['kind'] == 'tcp'
    assert checkpoint.header['step'] == '7'
    assert checkpoint.header['seed.decoder'] == str(tiny_bundle.seeds[DECODER])
    assert checkpoint.config == tiny_bundle.config
    assert checkpoint.entries['projector.weight'].shape == (6, 8)

    other = ModelBundle.build(tiny_bundle.config.replace(seed=5), len(tiny_bundle.decoder.tokens))
    restore(other, checkpoint)
    for group in tiny_bundle.groups():
        assert other.group_digest(group) == tiny_bundle.group_digest(group)


def test_equal_bundles_give_identical_directories(tiny_bundle, tmp_path):
    a = save_checkpoint(str(tmp_path / 'a'), tiny_bundle, stage=1)
    b = save_checkpoint(str(tmp_path / 'b'), tiny_bundle, stage=1)
    assert checkpoint_digest(a) == checkpoint_digest(b)
    tiny_bundle.projector.linear.bias.data = tiny_bundle.projector.linear.bias.data + 1
    c = save_checkpoint(str(tmp_path / 'c'), tiny_bundle, stage=1)
    assert checkpoint_digest(c) != checkpoint_digest(a)


def test_group_subset(tiny_bundle, tmp_path):
    directory = save_checkpoint(str(tmp_path / 'd'), tiny_bundle, stage=0, groups=[DECODER])
    checkpoint = load_checkpoint(directory)
    assert checkpoint.groups == [DECODER]
    restore(tiny_bundle, checkpoint, groups=[DECODER])
    with pytest.raises(ConfigurationError):
        restore(tiny_bundle, checkpoint, groups=[PROJECTOR])


def test_shape_mismatch(tiny_bundle, tmp_path):
    directory = save_checkpoint(str(tmp_path / 'e'), tiny_bundle, stage=1)
    wider = ModelBundle.build(tiny_bundle.config.replace(d_f=4), len(tiny_bundle.decoder.tokens))
    with pytest.raises(ShapeError) as exc_info:
        restore(wider, load_checkpoint(directory), groups=[PROJECTOR])
    assert 'projector.weight' in str(exc_info.value)
    assert exc_info.value.shapes == ((6, 8), (4, 8))


def test_missing_and_malformed_manifests(tiny_bundle, tmp_path):
    with pytest.raises(ConfigurationError):
        load_checkpoint(str(tmp_path / 'nowhere'))
    directory = save_checkpoint(str(tmp_path / 'f'), tiny_bundle, stage=1)
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, encoding='utf-8') as f:
        lines = f.readlines()
    with open(path, 'w', encoding='utf-8') as f:
        f.writelines(lines + ['decoder\tbroken\n'])
    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(directory)
    assert exc_info.value.offset == len(lines) + 1
    with open(path, 'w', encoding='utf-8') as f:
        f.write('not a checkpoint\n')
    with pytest.raises(FormatError):
        load_checkpoint(directory)


def test_restored_values_keep_model_dtype(tiny_bundle, tmp_path):
    directory = save_checkpoint(str(tmp_path / 'g'), tiny_bundle, stage=1)
    restore(tiny_bundle, load_checkpoint(directory))
    assert tiny_bundle.projector.linear.weight.data.dtype == np.float64
