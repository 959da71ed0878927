"""
Run configuration: flat ``key = value`` text, one key per line.

Every key has a default. Lines starting with ``#`` are comments and later
lines override earlier ones.
"""

import hashlib
import os
from types import MappingProxyType

from .errors import ConfigError, ConfigurationError

BASELINE_KINDS = ('tcp', 'full-forward', 'prune-k', 'random-k', 'mil-pool')
DTYPE_NAMES = ('float64', 'float32')


class UnsetSentinel:
    def __repr__(self):
        return 'UNSET'

    __str__ = __repr__


_UNSET_SENTINEL = UnsetSentinel()


# Canonical key order is the order of this table.
_default_config = {
    'd_h': 64,
    'd_f': 32,
    'heads': 4,
    'n_cmp': 2,
    'n_dec': 4,
    'l_c': 16,
    'n_categories': 12,
    'n_slides': 800,
    'grid': (16, 16),
    'patch_px': 16,
    'marker_rarity': 0.02,
    'templates': ('marker-identity', 'majority-tissue', 'marker-count-band'),
    'vocab': '',
    'context': 512,
    'max_new_tokens': 16,
    'peak_lr': 3e-4,
    'min_lr': 0.0,
    'weight_decay': 0.0,
    'warmup_steps': 50,
    'total_steps': 0,
    'accum_steps': 8,
    'epochs': 2,
    'pretrain_steps': 1500,
    'pretrain_lr': 1e-3,
    'pretrain_warmup': 100,
    'hint_prob': 0.5,
    'init_layers': 2,
    'checkpoint_every': 500,
    'log_every': 10,
    'seed': 0,
    'baseline': 'tcp',
    'random_k': 30,
    'mil_hidden': 32,
    'max_visual_tokens': 10000,
    'bench_warmup': 5,
    'bench_samples': 10,
    'lc_list': (4, 16, 64, 256),
    'dtype': 'float64',
    'workers': 1,
    'data_dir': 'data',
    'checkpoint_dir': 'checkpoints',
}

# Smallest permitted value of integer keys.
_INT_MINIMUM = {
    'd_h': 1, 'd_f': 1, 'heads': 1, 'n_cmp': 0, 'n_dec': 1, 'l_c': 1,
    'n_categories': 4, 'n_slides': 1, 'patch_px': 1, 'context': 1,
    'max_new_tokens': 1, 'warmup_steps': 0, 'total_steps': 0, 'accum_steps': 1,
    'epochs': 1, 'pretrain_steps': 1, 'pretrain_warmup': 0, 'init_layers': 0,
    'checkpoint_every': 1, 'log_every': 1, 'seed': 0, 'random_k': 1,
    'mil_hidden': 1, 'max_visual_tokens': 1, 'bench_warmup': 0, 'bench_samples': 1,
    'workers': 1,
}


def get_default_config():
    """Returns a read-only view of the default configuration"""
    return MappingProxyType(_default_config)


def _parse_grid(text):
    rows, sep, cols = text.lower().partition('x')
    if not sep:
        raise ValueError('expected ROWSxCOLS, got {!r}'.format(text))
    return (int(rows), int(cols))


def _coerce(key, value):
    """Converts ``value`` (text or an already typed value) to the type of
    ``key``'s default."""
    default = _default_config[key]
    if key == 'grid':
        grid = _parse_grid(value) if isinstance(value, str) else tuple(int(v) for v in value)
        if len(grid) != 2 or min(grid) < 1:
            raise ValueError('grid extents must be positive, got {!r}'.format(value))
        return grid
    if key in ('templates', 'lc_list'):
        if isinstance(value, str):
            value = [part.strip() for part in value.split(',') if part.strip()]
        items = tuple(int(v) for v in value) if key == 'lc_list' else tuple(value)
        if not items:
            raise ValueError('{} needs at least one entry'.format(key))
        return items
    if isinstance(default, int):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError('expected an integer, got {!r}'.format(value))
        number = int(value)
        if number < _INT_MINIMUM.get(key, 0):
            raise ValueError('must be at least {}, got {}'.format(_INT_MINIMUM[key], number))
        return number
    if isinstance(default, float):
        return float(value)
    return str(value)


def _check(values):
    if values['d_h'] % values['heads']:
        raise ConfigurationError(
            "d_h = {} is not divisible by heads = {}".format(values['d_h'], values['heads'])
        )
    if values['baseline'] not in BASELINE_KINDS:
        raise ConfigurationError(
            "unknown baseline kind '{}', expected one of {}".format(
                values['baseline'], ', '.join(BASELINE_KINDS)
            )
        )
    if values['dtype'] not in DTYPE_NAMES:
        raise ConfigurationError(
            "dtype must be one of {}, got '{}'".format(', '.join(DTYPE_NAMES), values['dtype'])
        )
    if not 0 < values['marker_rarity'] <= 0.1:
        raise ConfigurationError(
            'marker_rarity must be in (0, 0.1], got {}'.format(values['marker_rarity'])
        )
    if not 0 <= values['hint_prob'] <= 1:
        raise ConfigurationError('hint_prob must be in [0, 1], got {}'.format(values['hint_prob']))
    if values['init_layers'] > min(values['n_cmp'], values['n_dec']):
        raise ConfigurationError(
            'init_layers = {} exceeds n_cmp = {} or n_dec = {}'.format(
                values['init_layers'], values['n_cmp'], values['n_dec']
            )
        )


class RunConfig:
    """Immutable set of every tunable. Attribute access by key."""
    __slots__ = ('_values', )

    def __init__(self, **overrides):
        values = dict(_default_config)
        for key, value in overrides.items():
            if key not in _default_config:
                raise ConfigurationError("unknown configuration key '{}'".format(key))
            try:
                values[key] = _coerce(key, value)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError("bad value for '{}': {}".format(key, exc))
        _check(values)
        object.__setattr__(self, '_values', values)

    def __getattr__(self, key):
        if key == '_values':
            raise AttributeError(key)
        try:
            return self._values[key]
        except KeyError:
            raise AttributeError(key)

    def __setattr__(self, key, value):
        raise AttributeError('RunConfig is immutable; use replace()')

    def replace(self, **overrides):
        return RunConfig(**{**self._values, **overrides})

    def items(self):
        return self._values.items()

    def as_dict(self):
        return dict(self._values)

    def non_default_keys(self):
        return [key for key in _default_config if self._values[key] != _default_config[key]]

    @property
    def vocab_path(self):
        return self.vocab or os.path.join(self.data_dir, 'vocab.txt')

    def digest(self):
        return hashlib.sha256(render_config(self, full=True).encode('utf-8')).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self._values == other._values

    def __hash__(self):
        return hash(render_config(self, full=True))

    def __repr__(self):
        changed = ', '.join(
            '{}={!r}'.format(key, self._values[key]) for key in self.non_default_keys()
        )
        return 'RunConfig({})'.format(changed)


def _format(key, value):
    if key == 'lc_list' or key == 'templates':
        return ','.join(str(v) for v in value)
    if key == 'grid':
        return '{}x{}'.format(*value)
    return str(value)


def render_config(config, full=False):
    """``key = value`` lines in canonical order; only non-default keys
    unless ``full``."""
    keys = list(_default_config) if full else config.non_default_keys()
    return ''.join('{} = {}\n'.format(key, _format(key, getattr(config, key))) for key in keys)


def parse_config(text, overrides=_UNSET_SENTINEL):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value', got {!r}".format(raw), lineno)
        if key not in _default_config:
            raise ConfigError("unknown configuration key '{}'".format(key), lineno, key)
        try:
            values[key] = _coerce(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for '{}': {}".format(key, exc), lineno, key)
    if overrides is not _UNSET_SENTINEL:
        values.update(overrides)
    return RunConfig(**values)


def load_config(path, overrides=_UNSET_SENTINEL):
    with open(path, encoding='utf-8') as f:
        text = f.read()
    try:
        return parse_config(text, overrides)
    except ConfigError as exc:
        error = ConfigError("{}: {}".format(path, exc), None, exc.key)
        error.lineno = exc.lineno
        raise error


def reference_config(**overrides):
    """Defaults with the published compression-token count and learning
    rate."""
    return RunConfig(**{'l_c': 100, 'peak_lr': 1.5e-5, **overrides})
