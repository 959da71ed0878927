"""
Exports of the three token families of one sample for external
projection and plotting.

A dump directory holds one feature file per family and ``blocks.txt``::

    visual.tcpf<TAB>visual<TAB>256<TAB>64
    text.tcpf<TAB>text<TAB>21<TAB>64
    compressed.tcpf<TAB>compressed<TAB>16<TAB>64
"""

import os
from collections import OrderedDict

import numpy as np

from .errors import ConfigurationError, FormatError
from .serialize import read_features, write_features
from .tensor import no_grad

BLOCKS_FILE = 'blocks.txt'
BLOCK_LABELS = ('visual', 'text', 'compressed')


def token_states(bundle, sample):
    """``{label: matrix}`` of visual, text and compressed token states."""
    if bundle.stack is None:
        raise ConfigurationError(
            "token states need the compression path, not '{}'".format(bundle.kind)
        )
    with no_grad():
        states = (
            bundle.visual_tokens(sample.features),
            bundle.text_tokens(sample.prompt_ids),
            bundle.prefix(sample),
        )
    return OrderedDict(zip(BLOCK_LABELS, (s.data for s in states)))


def dump_token_states(bundle, sample, directory):
    os.makedirs(directory, exist_ok=True)
    lines = []
    blocks = token_states(bundle, sample)
    for label, matrix in blocks.items():
        filename = label + '.tcpf'
        write_features(os.path.join(directory, filename), matrix)
        lines.append('{}\t{}\t{}\t{}\n'.format(filename, label, *matrix.shape))
    with open(os.path.join(directory, BLOCKS_FILE), 'w', encoding='utf-8') as f:
        f.writelines(lines)
    return blocks


def read_token_states(directory):
    path = os.path.join(directory, BLOCKS_FILE)
    blocks = OrderedDict()
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            fields = line.rstrip('\n').split('\t')
            if len(fields) != 4:
                raise FormatError('malformed block line {!r}'.format(line), path, lineno)
            filename, label, rows, cols = fields
            matrix = read_features(os.path.join(directory, filename))
            if matrix.shape != (int(rows), int(cols)):
                raise FormatError(
                    "block '{}' is {}x{} but the sidecar says {}x{}".format(
                        label, matrix.shape[0], matrix.shape[1], rows, cols
                    ),
                    path,
                    lineno,
                )
            blocks[label] = matrix
    return blocks


def mean_pairwise_distance(matrix):
    if matrix.shape[0] < 2:
        return 0.0
    diff = matrix[:, None, :] - matrix[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    n = matrix.shape[0]
    return float(dist.sum() / (n * (n - 1)))


class ClusterStats:
    __slots__ = ('spread', 'centroid_distance')

    def __init__(self, spread, centroid_distance):
        # label -> mean within-block pairwise distance
        self.spread = spread
        # (label, label) -> distance between block centroids
        self.centroid_distance = centroid_distance


def token_cluster_stats(blocks):
    spread = OrderedDict(
        (label, mean_pairwise_distance(matrix)) for label, matrix in blocks.items()
    )
    centroids = OrderedDict(
        (label, matrix.mean(axis=0)) for label, matrix in blocks.items()
    )
    labels = list(centroids)
    distances = OrderedDict()
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            distances[a, b] = float(np.linalg.norm(centroids[a] - centroids[b]))
    return ClusterStats(spread, distances)
