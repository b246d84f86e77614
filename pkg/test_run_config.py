"""Tests for config-file loading, validation and precedence."""

import json

import pytest

import config
from run_config import ConfigError, load_config_file, resolve


def write(tmp_path, text, name='run.json'):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.parametrize("path", sorted(config.CONFIGS_DIR.glob('*.json')), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    subcommand = max((name for name in config.SUBCOMMAND_DEFAULTS if path.stem.startswith(name)),
                     key=len)
    values = load_config_file(subcommand, path)
    assert set(values) <= set(config.SUBCOMMAND_DEFAULTS[subcommand]) | {'seed'}


def test_syntax_error_reports_its_line(tmp_path):
    path = write(tmp_path, '{\n  "episodes": 5,\n  "noise": ,\n}\n')
    with pytest.raises(ConfigError) as excinfo:
        load_config_file('gmm-demo', path)
    assert excinfo.value.line == 3
    assert f"{path}:3:" in str(excinfo.value)


def test_unknown_key_reports_its_line(tmp_path):
    path = write(tmp_path, '{\n  "episodes": 5,\n  "epsiodes": 6\n}\n')
    with pytest.raises(ConfigError) as excinfo:
        load_config_file('gmm-demo', path)
    assert excinfo.value.line == 3
    assert 'epsiodes' in str(excinfo.value)


@pytest.mark.parametrize("key, value", [
    ('episodes', 2.5),
    ('episodes', True),
    ('noise', 'loud'),
    ('seed', -1),
])
def test_wrong_types_rejected(tmp_path, key, value):
    path = write(tmp_path, json.dumps({key: value}, indent=2))
    with pytest.raises(ConfigError) as excinfo:
        load_config_file('gmm-demo', path)
    assert excinfo.value.line == 2


def test_ints_accepted_for_floats(tmp_path):
    path = write(tmp_path, '{"separation": 1}')
    assert load_config_file('gmm-demo', path) == {'separation': 1}


def test_top_level_must_be_an_object(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file('gmm-demo', write(tmp_path, '[1, 2]'))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file('gmm-demo', tmp_path / 'absent.json')


def test_unknown_subcommand(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file('fly', write(tmp_path, '{}'))


def test_precedence_flags_over_file_over_defaults():
    settings = resolve('gmm-demo', {'episodes': 10, 'noise': 0.02}, {'episodes': 3, 'noise': None})
    assert settings['episodes'] == 3
    assert settings['noise'] == 0.02
    assert settings['separation'] == config.SUBCOMMAND_DEFAULTS['gmm-demo']['separation']
    assert settings['seed'] == config.DEFAULT_SEED
    assert resolve('gmm-demo', {'seed': 7})['seed'] == 7
