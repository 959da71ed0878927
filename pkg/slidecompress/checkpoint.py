"""
Checkpoint directories: one ``.tcpt`` tensor file per parameter plus
``manifest.txt``::

    # slidecompress checkpoint
    kind = tcp
    stage = 1
    ...
    seed.projector = 1234
    [config]
    d_h = 64
    ...
    [tensors]
    projector<TAB>projector.weight<TAB>32x64<TAB>projector.weight.tcpt

No timestamps are written, so equal runs give byte-identical directories.
"""

import hashlib
import os
from collections import OrderedDict

from .config import parse_config, render_config
from .errors import ConfigurationError, FormatError, ShapeError
from .serialize import read_tensor, write_tensor
from .utils import format_shape

MANIFEST_NAME = 'manifest.txt'
HEADER_LINE = '# slidecompress checkpoint'


class CheckpointEntry:
    __slots__ = ('group', 'name', 'shape', 'filename')

    def __init__(self, group, name, shape, filename):
        self.group = group
        self.name = name
        self.shape = shape
        self.filename = filename


class Checkpoint:
    __slots__ = ('directory', 'header', 'config_text', 'entries')

    def __init__(self, directory, header, config_text, entries):
        self.directory = directory
        self.header = header
        self.config_text = config_text
        self.entries = entries

    @property
    def config(self):
        return parse_config(self.config_text)

    @property
    def groups(self):
        return sorted({entry.group for entry in self.entries.values()})

    def array(self, name):
        entry = self.entries[name]
        return read_tensor(os.path.join(self.directory, entry.filename))

    def __repr__(self):
        return 'Checkpoint({!r}, {} tensors)'.format(self.directory, len(self.entries))


def checkpoint_header(bundle, stage, step):
    header = OrderedDict([
        ('kind', bundle.kind),
        ('stage', stage),
        ('step', step),
        ('l_c', bundle.config.l_c),
        ('n_cmp', bundle.config.n_cmp),
        ('heads', bundle.config.heads),
        ('d_h', bundle.config.d_h),
    ])
    for group, seed in bundle.seeds.items():
        header['seed.{}'.format(group)] = seed
    return header


def save_checkpoint(directory, bundle, stage, step=0, groups=None):
    """Writes every parameter of ``bundle`` (or of ``groups``) and the
    manifest into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    lines = [HEADER_LINE]
    lines.extend(
        '{} = {}'.format(key, value)
        for key, value in checkpoint_header(bundle, stage, step).items()
    )
    lines.append('[config]')
    lines.extend(render_config(bundle.config, full=True).splitlines())
    lines.append('[tensors]')
    for group, params in bundle.groups().items():
        if groups is not None and group not in groups:
            continue
        for name, param in params:
            filename = name + '.tcpt'
            write_tensor(os.path.join(directory, filename), param.data)
            lines.append('\t'.join([group, name, format_shape(param.shape), filename]))
    with open(os.path.join(directory, MANIFEST_NAME), 'w', encoding='utf-8') as f:
        f.writelines(line + '\n' for line in lines)
    return directory


def _parse_shape(text):
    if text == 'scalar':
        return ()
    return tuple(int(part) for part in text.split('x'))


def load_checkpoint(directory):
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ConfigurationError('no checkpoint at {}'.format(directory))
    with open(path, encoding='utf-8') as f:
        lines = [line.rstrip('\n') for line in f]
    if not lines or lines[0] != HEADER_LINE:
        raise FormatError('not a checkpoint manifest', path, 0)

    header, config_lines, entries = OrderedDict(), [], OrderedDict()
    section = 'header'
    for lineno, line in enumerate(lines[1:], start=2):
        if line in ('[config]', '[tensors]'):
            section = line.strip('[]')
            continue
        if section == 'header':
            key, sep, value = line.partition(' = ')
            if not sep:
                raise FormatError('malformed header line {!r}'.format(line), path, lineno)
            header[key] = value
        elif section == 'config':
            config_lines.append(line)
        else:
            fields = line.split('\t')
            if len(fields) != 4:
                raise FormatError('malformed tensor line {!r}'.format(line), path, lineno)
            group, name, shape, filename = fields
            entries[name] = CheckpointEntry(group, name, _parse_shape(shape), filename)
    return Checkpoint(directory, header, ''.join(text + '\n' for text in config_lines), entries)


def restore(bundle, checkpoint, groups=None):
    """Copies checkpoint values into the matching parameters of ``bundle``.

    A missing tensor raises :class:`ConfigurationError`; a tensor whose
    shape differs from the parameter raises :class:`ShapeError`.
    """
    params = bundle.named_parameters(groups)
    for name, param in params.items():
        if name not in checkpoint.entries:
            raise ConfigurationError(
                "checkpoint {} has no tensor '{}'".format(checkpoint.directory, name)
            )
        array = checkpoint.array(name)
        if array.shape != param.shape:
            raise ShapeError(
                "tensor '{}' in {} does not fit the model".format(name, checkpoint.directory),
                array.shape, param.shape
            )
        param.data = array.astype(param.data.dtype)
    return bundle


def checkpoint_digest(directory):
    """SHA-256 over the manifest and every tensor file, in manifest order."""
    checkpoint = load_checkpoint(directory)
    h = hashlib.sha256()
    files = [MANIFEST_NAME] + [entry.filename for entry in checkpoint.entries.values()]
    for filename in files:
        with open(os.path.join(directory, filename), 'rb') as f:
            h.update(f.read())
    return h.hexdigest()
