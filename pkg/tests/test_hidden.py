import os

import numpy as np
import pytest

from slidecompress.errors import ConfigurationError, FormatError
from slidecompress.hidden import (
    BLOCKS_FILE,
    dump_token_states,
    mean_pairwise_distance,
    read_token_states,
    token_cluster_stats,
    token_states,
)
from slidecompress.model import ModelBundle


def test_token_state_shapes(tiny_bundle, tiny_samples):
    sample = tiny_samples[0]
    blocks = token_states(tiny_bundle, sample)
    assert list(blocks) == ['visual', 'text', 'compressed']
    assert blocks['visual'].shape == (sample.l_wsi, 8)
    assert blocks['text'].shape == (len(sample.prompt_ids), 8)
    assert blocks['compressed'].shape == (tiny_bundle.l_c, 8)


def test_dump_and_reread_bitwise(tiny_bundle, tiny_samples, tmp_path):
    directory = str(tmp_path / 'hidden')
    blocks = dump_token_states(tiny_bundle, tiny_samples[0], directory)
    back = read_token_states(directory)
    assert list(back) == list(blocks)
    for label in blocks:
        assert back[label].tobytes() == blocks[label].tobytes()
    with open(os.path.join(directory, BLOCKS_FILE), encoding='utf-8') as f:
        first = f.readline()
    assert first == 'visual.tcpf\tvisual\t16\t8\n'


def test_sidecar_shape_mismatch(tiny_bundle, tiny_samples, tmp_path):
    directory = str(tmp_path / 'hidden')
    dump_token_states(tiny_bundle, tiny_samples[0], directory)
    path = os.path.join(directory, BLOCKS_FILE)
    with open(path, encoding='utf-8') as f:
        lines = f.readlines()
    lines[1] = lines[1].replace('\t8\n', '\t9\n')
    with open(path, 'w', encoding='utf-8') as f:
        f.writelines(lines)
    with pytest.raises(FormatError) as exc_info:
        read_token_states(directory)
    assert exc_info.value.offset == 2


def test_needs_compression_path(tiny_dataset, tiny_samples):
    config, _, vocab = tiny_dataset
    bundle = ModelBundle.build(config, len(vocab), 'full-forward')
    with pytest.raises(ConfigurationError):
        token_states(bundle, tiny_samples[0])


def test_mean_pairwise_distance():
    assert mean_pairwise_distance(np.zeros((1, 3))) == 0.0
    points = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]])
    # distances 5, 0, 5 in both directions over 6 ordered pairs
    assert mean_pairwise_distance(points) == pytest.approx(20 / 6)


def test_token_cluster_stats():
    blocks = {
        'visual': np.array([[0.0, 0.0], [2.0, 0.0]]),
        'compressed': np.array([[1.0, 3.0]]),
    }
    stats = token_cluster_stats(blocks)
    assert stats.spread['visual'] == pytest.approx(2.0)
    assert stats.spread['compressed'] == 0.0
    assert stats.centroid_distance['visual', 'compressed'] == pytest.approx(3.0)
