import hashlib

import numpy as np


def chunked(seq, size):
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def derive_seed(seed, *names):
    """Derives a u64 seed for a named component from the run seed.

    The same ``(seed, names)`` always gives the same value, independent
    of the order in which components are built.
    """
    text = ':'.join([str(seed)] + [str(name) for name in names])
    digest = hashlib.sha256(text.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def make_rng(seed, *names):
    return np.random.default_rng(derive_seed(seed, *names))


def array_digest(arrays):
    """SHA-256 over the shapes, dtypes and raw bytes of ``arrays``."""
    h = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array)
        h.update(str(array.shape).encode('ascii'))
        h.update(array.dtype.str.encode('ascii'))
        h.update(array.tobytes())
    return h.hexdigest()


def file_digest(path, blocksize=1 << 16):
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        while True:
            block = f.read(blocksize)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def format_shape(shape):
    return 'x'.join(str(extent) for extent in shape) or 'scalar'
