"""End-to-end tests of the experiment runner command line."""

import json

import pandas as pd
import pytest

from main import EXIT_FAILED_CELLS, EXIT_OK, EXIT_USAGE, main

SMALL_MAZE = {'preset': 'nuisance', 'n_m_max': [1, 2], 'eta': [0.0, 0.3], 'demo_count': [5],
              'seeds': 2}


def config_file(tmp_path, values, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(values, indent=2))
    return path


def run(tmp_path, subcommand, values=None, *extra, out='out'):
    argv = [subcommand, '--out', str(tmp_path / out)]
    if values is not None:
        argv += ['--config', str(config_file(tmp_path, values, f'{out}.json'))]
    return main(argv + list(extra))


def test_gmm_demo_writes_manifest_and_table(tmp_path):
    assert run(tmp_path, 'gmm-demo', None, '--episodes', '5', '--seed', '3') == EXIT_OK
    out = tmp_path / 'out'
    manifest = json.loads((out / 'manifest.json').read_text())
    assert manifest['subcommand'] == 'gmm-demo'
    assert manifest['seed'] == 3
    assert manifest['config']['episodes'] == 5
    table = pd.read_csv(out / 'gmm_demo.csv')
    assert list(table.columns) == ['model', 'success_rate', 'mean_offset_m']
    assert (out / 'gmm-demo.log').exists()


def test_maze_sweep_outputs(tmp_path):
    assert run(tmp_path, 'maze-sweep', SMALL_MAZE, '--gnuplot') == EXIT_OK
    out = tmp_path / 'out'
    raw = pd.read_csv(out / 'maze_raw.csv')
    assert len(raw) == 2 * 2 * 1 * 2
    agg = pd.read_csv(out / 'maze_agg.csv')
    assert len(agg) == 4
    dat = (out / 'maze_agg.dat').read_text().splitlines()
    assert dat[0].startswith('# n_m_max eta demo_count')


def test_reruns_are_byte_identical(tmp_path):
    run(tmp_path, 'maze-sweep', SMALL_MAZE, out='first')
    run(tmp_path, 'maze-sweep', SMALL_MAZE, '--jobs', '2', out='second')
    for name in ('maze_raw.csv', 'maze_agg.csv'):
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes()


def test_failed_cells_exit_one(tmp_path, capsys):
    values = {**SMALL_MAZE, 'eta': [0.0, 1.0]}
    assert run(tmp_path, 'maze-sweep', values) == EXIT_FAILED_CELLS
    assert 'failed cell' in capsys.readouterr().err
    raw = pd.read_csv(tmp_path / 'out' / 'maze_raw.csv')
    assert set(raw['eta']) == {0.0}


def test_empty_speed_list_is_a_usage_error(tmp_path):
    assert run(tmp_path, 'tracking-sweep', {'speeds': []}) == EXIT_USAGE
    assert (tmp_path / 'out' / 'manifest.json').exists()


def test_malformed_config_is_a_usage_error(tmp_path, capsys):
    path = tmp_path / 'bad.json'
    path.write_text('{\n  "episodes": 4,\n  "separation": oops\n}\n')
    assert main(['gmm-demo', '--out', str(tmp_path / 'out'), '--config', str(path)]) == EXIT_USAGE
    assert f"{path}:3:" in capsys.readouterr().err


def test_unknown_config_key_is_a_usage_error(tmp_path):
    assert run(tmp_path, 'gmm-demo', {'episodes': 4, 'sepration': 0.2}) == EXIT_USAGE


def test_invalid_domain_values_are_usage_errors(tmp_path):
    assert run(tmp_path, 'gmm-demo', {'separation': 0.01, 'episodes': 2}) == EXIT_USAGE
    assert run(tmp_path, 'maze-sweep', {'preset': 'spiral'}, out='maze') == EXIT_USAGE


@pytest.mark.parametrize("seed", ['-1', str(2 ** 64)])
def test_seed_outside_u64_rejected(tmp_path, seed):
    assert run(tmp_path, 'gmm-demo', None, '--seed', seed) == EXIT_USAGE


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as excinfo:
        main(['fly'])
    assert excinfo.value.code == 2


def test_episode_subcommand(tmp_path, capsys):
    values = {'skill': 'pick', 'belt_speed': 0.1, 'write_trace': True}
    assert run(tmp_path, 'episode', values, '--seed', '1') == EXIT_OK
    summary = json.loads((tmp_path / 'out' / 'episode_result.json').read_text())
    assert summary['skill'] == 'pick'
    assert summary['success'] == (summary['failure_reason'] is None)
    trace = pd.read_csv(tmp_path / 'out' / 'episode_trace.csv')
    assert trace['t'].is_monotonic_increasing
    assert '"skill": "pick"' in capsys.readouterr().out


def test_speed_sweep_without_tracking(tmp_path):
    values = {'speeds': [0.1], 'episodes': 2}
    assert run(tmp_path, 'speed-sweep', values, '--no-tracking') == EXIT_OK
    manifest = json.loads((tmp_path / 'out' / 'manifest.json').read_text())
    assert manifest['config']['tracking'] is False
    table = pd.read_csv(tmp_path / 'out' / 'speed_sweep.csv')
    assert table['rate'].tolist() == [0.0]


def test_memoryless_recitation_flag(tmp_path):
    values = {'length': 4, 'epochs': 5}
    assert run(tmp_path, 'memory-recite', values, '--memoryless') == EXIT_OK
    saved = json.loads((tmp_path / 'out' / 'memory_params_s0.json').read_text())
    assert saved['memoryless'] is True
    assert len(saved['sequence']) == 4
