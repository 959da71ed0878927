import pytest
from hypothesis import given
from hypothesis import strategies as st

from slidecompress.config import (
    RunConfig,
    get_default_config,
    load_config,
    parse_config,
    reference_config,
    render_config,
)
from slidecompress.errors import ConfigError, ConfigurationError


def test_empty_text_gives_defaults():
    config = parse_config('')
    assert config == RunConfig()
    assert config.l_c == 16
    assert config.grid == (16, 16)
    assert config.non_default_keys() == []


def test_later_lines_override_earlier():
    config = parse_config('# compression\nl_c = 100\n\nl_c = 8\ngrid = 4x6\n')
    assert config.l_c == 8
    assert config.grid == (4, 6)


def test_bad_value_names_line_and_key():
    with pytest.raises(ConfigError) as exc_info:
        parse_config('l_c = banana')
    assert exc_info.value.lineno == 1
    assert exc_info.value.key == 'l_c'
    assert str(exc_info.value).startswith('line 1: ')


def test_unknown_key_and_missing_equals():
    with pytest.raises(ConfigError) as exc_info:
        parse_config('l_c = 4\nlearning_rate = 1e-4')
    assert exc_info.value.lineno == 2
    with pytest.raises(ConfigError):
        parse_config('l_c 4')


def test_minimums_and_cross_key_checks():
    with pytest.raises(ConfigurationError):
        RunConfig(l_c=0)
    with pytest.raises(ConfigurationError):
        RunConfig(d_h=10, heads=4)
    with pytest.raises(ConfigurationError):
        RunConfig(baseline='vit')
    with pytest.raises(ConfigurationError):
        RunConfig(marker_rarity=0.2)
    with pytest.raises(ConfigurationError):
        RunConfig(n_cmp=1, init_layers=2)
    with pytest.raises(ConfigurationError):
        RunConfig(nonsense=1)


def test_overrides_win_over_text():
    config = parse_config('l_c = 100\n', {'l_c': 32, 'templates': 'marker-identity'})
    assert config.l_c == 32
    assert config.templates == ('marker-identity', )


def test_render_parse_inverse():
    config = RunConfig(l_c=64, grid=(8, 12), lc_list='4,8', peak_lr=1e-5, baseline='prune-k')
    assert parse_config(render_config(config)) == config
    assert parse_config(render_config(config, full=True)) == config
    assert render_config(config).splitlines()[0] == 'l_c = 64'


@given(
    l_c=st.integers(min_value=1, max_value=4096),
    seed=st.integers(min_value=0, max_value=2 ** 32),
)
def test_digest_depends_on_values(l_c, seed):
    config = RunConfig(l_c=l_c, seed=seed)
    assert config.digest() == RunConfig(seed=seed, l_c=l_c).digest()
    assert config.digest() != config.replace(seed=seed + 1).digest()


def test_config_is_immutable():
    config = RunConfig()
    with pytest.raises(AttributeError):
        config.l_c = 4
    defaults = get_default_config()
    with pytest.raises(TypeError):
        defaults['l_c'] = 4
    assert config.replace(l_c=4).l_c == 4
    assert config.l_c == 16


def test_reference_config():
    config = reference_config()
    assert config.l_c == 100
    assert config.peak_lr == 1.5e-5
    assert reference_config(l_c=50).l_c == 50


def test_load_config_reports_path(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('d_h = 32\nheads = x\n')
    with pytest.raises(ConfigError) as exc_info:
        load_config(str(path))
    assert str(path) in str(exc_info.value)
    assert exc_info.value.lineno == 2
    path.write_text('d_h = 32\n')
    assert load_config(str(path)).d_h == 32


def test_vocab_path_defaults_to_data_dir():
    assert RunConfig(data_dir='d').vocab_path.endswith('vocab.txt')
    assert RunConfig(vocab='v.txt').vocab_path == 'v.txt'
