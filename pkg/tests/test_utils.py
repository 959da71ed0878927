import numpy as np

from slidecompress.utils import (
    array_digest,
    chunked,
    derive_seed,
    file_digest,
    format_shape,
    make_rng,
)


def test_derive_seed():
    assert derive_seed(0, 'decoder') == derive_seed(0, 'decoder')
    assert derive_seed(0, 'decoder') != derive_seed(1, 'decoder')
    assert derive_seed(0, 'decoder') != derive_seed(0, 'projector')
    assert 0 <= derive_seed(7, 'slide', 3) < 2 ** 64


def test_make_rng_is_reproducible():
    assert make_rng(3, 'epoch', 0).random() == make_rng(3, 'epoch', 0).random()


def test_chunked():
    assert list(chunked([1, 2, 3, 4, 5], 2)) == [[1, 2], [3, 4], [5]]
    assert list(chunked([], 3)) == []


def test_array_digest_sees_shape_and_dtype():
    a = np.zeros((2, 3))
    assert array_digest([a]) == array_digest([np.zeros((2, 3))])
    assert array_digest([a]) != array_digest([a.reshape(3, 2)])
    assert array_digest([a]) != array_digest([a.astype(np.float32)])


def test_file_digest(tmp_path):
    path = tmp_path / 'x.bin'
    path.write_bytes(b'slide')
    assert file_digest(str(path), blocksize=2) == file_digest(str(path))


def test_format_shape():
    assert format_shape((32, 64)) == '32x64'
    assert format_shape(()) == 'scalar'
