"""
Binary formats.

Tensor file (``.tcpt``), little-endian::

    b'TCPT'  u32 rank  u64 extent * rank  u8 dtype code  raw values

Feature file (``.tcpf``), little-endian::

    b'TCPF'  u32 version=1  u64 count  u32 payload bytes  payload * count

Feature payloads are float64 rows, so a feature file holds a
``count x (payload / 8)`` matrix.
"""

import struct

import numpy as np

from .errors import FormatError
from .tensor import DTYPE_CODES

TENSOR_MAGIC = b'TCPT'
FEATURE_MAGIC = b'TCPF'
FEATURE_VERSION = 1

_CODE_TO_DTYPE = {code: dtype for dtype, code in DTYPE_CODES.items()}


def encode_tensor(array):
    array = np.asarray(array)
    try:
        code = DTYPE_CODES[array.dtype]
    except KeyError:
        raise TypeError(
            'only float64 and float32 arrays can be stored, got {}'.format(
                array.dtype
            )
        )
    little = array.astype(array.dtype.newbyteorder('<'), copy=False)
    parts = [
        TENSOR_MAGIC,
        struct.pack('<I', array.ndim),
        struct.pack('<{}Q'.format(array.ndim), *array.shape),
        struct.pack('<B', code),
        np.ascontiguousarray(little).tobytes(),
    ]
    return b''.join(parts)


def decode_tensor(buf, path=None):
    if len(buf) < 8:
        raise FormatError('truncated tensor header', path, len(buf))
    if buf[:4] != TENSOR_MAGIC:
        raise FormatError(
            'bad magic {!r}, expected {!r}'.format(buf[:4], TENSOR_MAGIC),
            path,
            0,
        )
    rank, = struct.unpack_from('<I', buf, 4)
    offset = 8
    if len(buf) < offset + 8 * rank + 1:
        raise FormatError('truncated tensor extents', path, len(buf))
    shape = struct.unpack_from('<{}Q'.format(rank), buf, offset)
    offset += 8 * rank
    code, = struct.unpack_from('<B', buf, offset)
    offset += 1
    try:
        dtype = np.dtype(_CODE_TO_DTYPE[code]).newbyteorder('<')
    except KeyError:
        raise FormatError('unknown dtype code {}'.format(code), path, offset - 1)
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    expected = count * dtype.itemsize
    payload = buf[offset:]
    if len(payload) != expected:
        raise FormatError(
            'expected {} data bytes, found {}'.format(expected, len(payload)),
            path,
            offset,
        )
    data = np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder('='))
    return data.reshape(shape)


def write_tensor(path, array):
    with open(path, 'wb') as f:
        f.write(encode_tensor(array))


def read_tensor(path):
    with open(path, 'rb') as f:
        return decode_tensor(f.read(), path=str(path))


def encode_features(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError('features must be a matrix, got shape {}'.format(matrix.shape))
    count, width = matrix.shape
    header = FEATURE_MAGIC + struct.pack('<IQI', FEATURE_VERSION, count, width * 8)
    return header + np.ascontiguousarray(matrix, dtype='<f8').tobytes()


def decode_features(buf, path=None):
    header_size = 4 + 4 + 8 + 4
    if len(buf) < header_size:
        raise FormatError('truncated feature header', path, len(buf))
    if buf[:4] != FEATURE_MAGIC:
        raise FormatError(
            'bad magic {!r}, expected {!r}'.format(buf[:4], FEATURE_MAGIC),
            path,
            0,
        )
    version, count, payload = struct.unpack_from('<IQI', buf, 4)
    if version != FEATURE_VERSION:
        raise FormatError('unsupported version {}'.format(version), path, 4)
    if payload % 8:
        raise FormatError(
            'payload of {} bytes is not a whole number of float64 values'.format(payload),
            path,
            16,
        )
    expected = count * payload
    body = buf[header_size:]
    if len(body) != expected:
        raise FormatError(
            'expected {} payload bytes, found {}'.format(expected, len(body)),
            path,
            header_size + min(len(body), expected),
        )
    width = payload // 8
    data = np.frombuffer(body, dtype='<f8').astype(np.float64)
    return data.reshape(count, width)


def write_features(path, matrix):
    with open(path, 'wb') as f:
        f.write(encode_features(matrix))


def read_features(path):
    with open(path, 'rb') as f:
        return decode_features(f.read(), path=str(path))
