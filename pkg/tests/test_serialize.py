import struct

import numpy as np
import pytest

from slidecompress.errors import FormatError
from slidecompress.serialize import (
    decode_features,
    decode_tensor,
    encode_features,
    encode_tensor,
    read_features,
    read_tensor,
    write_features,
    write_tensor,
)


def test_tensor_file_layout():
    buf = encode_tensor(np.array([[1.0, 2.0]]))
    assert buf[:4] == b'TCPT'
    assert struct.unpack_from('<I', buf, 4) == (2, )
    assert struct.unpack_from('<2Q', buf, 8) == (1, 2)
    assert buf[24] == 0
    assert len(buf) == 25 + 16


def test_tensor_file_keeps_dtype_and_bits(tmp_path, rng):
    array = rng.normal(size=(3, 5)).astype(np.float32)
    path = str(tmp_path / 'x.tcpt')
    write_tensor(path, array)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert back.tobytes() == array.tobytes()


def test_scalar_tensor():
    assert decode_tensor(encode_tensor(np.array(2.5))).shape == ()


def test_integer_arrays_are_rejected():
    with pytest.raises(TypeError):
        encode_tensor(np.arange(3))


def test_bad_magic_reports_offset_zero():
    buf = b'NOPE' + encode_tensor(np.zeros(2))[4:]
    with pytest.raises(FormatError) as exc_info:
        decode_tensor(buf, path='x.tcpt')
    assert exc_info.value.offset == 0
    assert exc_info.value.path == 'x.tcpt'


def test_truncated_tensor_payload():
    buf = encode_tensor(np.zeros((2, 2)))[:-3]
    with pytest.raises(FormatError) as exc_info:
        decode_tensor(buf)
    assert 'expected 32 data bytes' in str(exc_info.value)


def test_feature_file_layout(tmp_path, rng):
    matrix = rng.normal(size=(4, 3))
    buf = encode_features(matrix)
    assert buf[:4] == b'TCPF'
    assert struct.unpack_from('<IQI', buf, 4) == (1, 4, 24)
    path = str(tmp_path / 's.tcpf')
    write_features(path, matrix)
    assert read_features(path).tobytes() == matrix.tobytes()


def test_feature_file_version_checked():
    buf = bytearray(encode_features(np.zeros((1, 2))))
    buf[4] = 9
    with pytest.raises(FormatError) as exc_info:
        decode_features(bytes(buf))
    assert exc_info.value.offset == 4


def test_feature_file_trailing_bytes():
    buf = encode_features(np.zeros((1, 2))) + b'\x00'
    with pytest.raises(FormatError):
        decode_features(buf)
