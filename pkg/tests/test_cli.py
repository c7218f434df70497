import pytest

import csv
import json

import numpy as np

from thermoqc.cli import (COMMANDS, SCHEME_ALIASES, build_parser, main, resolve_config, write_json,
                         write_trajectory)
from thermoqc.control import RESET_TRANSFER_MATRIX, ControlField
from thermoqc.errors import ConfigError, PropagationError
from thermoqc.operators import DEFAULT_DELTA
from thermoqc.thermo import CSV_COLUMNS

PERIOD = 2 * np.pi / DEFAULT_DELTA


def write_config(tmp_path, text):
    path = tmp_path / 'scenario.yaml'
    path.write_text(text)
    return str(path)


def write_field(tmp_path, coeffs=(0.0,)):
    m = len(coeffs)
    field = ControlField(PERIOD, PERIOD / 8, 2 * np.pi * np.arange(1, m + 1) / PERIOD, coeffs)
    path = tmp_path / 'field.json'
    write_json(path, field.to_dict())
    return str(path)


def read_csv(path):
    with open(path, newline='') as f:
        return list(csv.reader(f))


def test_scheme_aliases():
    assert SCHEME_ALIASES == {'a': 'closed', 'b': 'closed_field_on_open', 'c': 'open'}
    for alias, scheme in SCHEME_ALIASES.items():
        opts = build_parser().parse_args(['optimize', '--scheme', alias])
        assert resolve_config(opts).scheme == scheme

    opts = build_parser().parse_args(['optimize', '--scheme', 'open'])
    assert resolve_config(opts).scheme == 'open'

    with pytest.raises(SystemExit):
        build_parser().parse_args(['optimize', '--scheme', 'd'])


def test_resolve_config_overrides(tmp_path):
    opts = build_parser().parse_args(['optimize', '--seed', '3', '--restarts', '2', '--out', str(tmp_path),
                                      '--rate-mode', 'main_text', '--preset', 'stretch'])
    config = resolve_config(opts)
    assert config.optimizer.seed == 3
    assert config.optimizer.restarts == 2
    assert config.optimizer.max_evals == 20000
    assert config.output.dir == str(tmp_path)
    assert config.bath.rate_mode == 'main_text'
    assert config.preset == 'stretch'

    with pytest.raises(ConfigError) as e:
        resolve_config(build_parser().parse_args(['optimize', '--seed', '-1']))
    assert '--seed' in str(e.value)


def test_write_trajectory(tmp_path):
    path = tmp_path / 'trajectory.csv'
    write_trajectory(path, [(0.0, 1.0, None), (1.0, 2.0, 3.0)], ('t', 'a', 'b'))
    assert read_csv(path) == [['t', 'a', 'b'], ['0.0', '1.0', ''], ['1.0', '2.0', '3.0']]


def test_bad_config_exits_1(tmp_path, capsys):
    config = write_config(tmp_path, 'task: heat\nscheme: open\nmodel:\n  dim: 2\n  delta_au: -1.0\n')
    assert main(['optimize', '--config', config, '--out', str(tmp_path / 'out')]) == 1
    err = capsys.readouterr().err
    assert 'model.delta_au must be > 0' in err
    assert 'line 5' in err
    assert not (tmp_path / 'out' / 'summary.json').exists()


def test_runtime_failure_exits_1(tmp_path, monkeypatch, capsys, caplog):
    def diverge(config, opts):
        raise PropagationError('divergent Newton interpolation', terms=512)

    monkeypatch.setitem(COMMANDS, 'simulate', diverge)
    with caplog.at_level('ERROR'):
        assert main(['simulate', '--out', str(tmp_path)]) == 1
    assert 'divergent Newton interpolation (terms=512)' in capsys.readouterr().err
    assert 'simulate failed: PropagationError' in caplog.text
    assert not (tmp_path / 'timing.json').exists()


def test_simulate_needs_field(tmp_path, capsys):
    assert main(['simulate', '--out', str(tmp_path)]) == 1
    assert 'simulate needs --field' in capsys.readouterr().err


def test_simulate_bad_field(tmp_path, capsys):
    path = tmp_path / 'field.json'
    path.write_text('{"tau": 1.0}')
    assert main(['simulate', '--field', str(path), '--out', str(tmp_path)]) == 1
    assert 'Cannot read field' in capsys.readouterr().err


def test_simulate(tmp_path):
    config = write_config(tmp_path, 'task: heat\nfield:\n  steps_per_period: 50\n')
    out = tmp_path / 'out'
    field = write_field(tmp_path, (1e-3, -2e-3))
    assert main(['simulate', '--config', config, '--field', field, '--out', str(out)]) == 0

    rows = read_csv(out / 'trajectory.csv')
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 52
    assert float(rows[1][0]) == 0.0
    assert rows[1][CSV_COLUMNS.index('gen_purity')] == ''

    summary = json.loads((out / 'summary.json').read_text())
    assert summary['task'] == 'heat'
    assert summary['scheme'] == 'open'
    assert summary['trajectory']['steps'] == 50
    assert summary['value'] >= 0
    assert 'overlap_raw' not in summary
    assert (out / 'timing.json').exists()


def test_simulate_closed(tmp_path):
    config = write_config(tmp_path, 'task: heat\nfield:\n  steps_per_period: 50\n')
    out = tmp_path / 'out'
    field = write_field(tmp_path)
    assert main(['simulate', '--config', config, '--field', field, '--out', str(out), '--scheme', 'a']) == 0
    rows = read_csv(out / 'trajectory.csv')
    assert {row[CSV_COLUMNS.index('sigma_rate')] for row in rows[1:]} == {'0.0'}


def test_optimize_small_budget(tmp_path):
    config = write_config(tmp_path, '\n'.join([
        'task: heat',
        'field:',
        '  m: 2',
        '  steps_per_period: 50',
        'optimizer:',
        '  restarts: 1',
        '  max_evals: 30',
        '',
    ]))
    out = tmp_path / 'out'
    assert main(['optimize', '--config', config, '--out', str(out), '--seed', '4']) in (0, 2)

    summary = json.loads((out / 'summary.json').read_text())
    assert summary['seed'] == 4
    assert summary['restarts'] == 1
    assert summary['m'] == 2
    assert summary['restart_stats']['count'] == 1
    assert summary['restart_stats']['evaluations'] <= 30
    assert summary['converged'] == (summary['value'] <= summary['threshold'])

    field = json.loads((out / 'field.json').read_text())
    assert len(field['coeffs']) == 2
    assert field['task'] == 'heat'
    assert ControlField.from_dict(field).tau == pytest.approx(PERIOD)
    assert len(read_csv(out / 'trajectory.csv')) == 52


def test_gate_verbs_need_gate_task(tmp_path, capsys):
    assert main(['compare-schemes', '--out', str(tmp_path)]) == 1
    assert 'compare-schemes needs a gate task' in capsys.readouterr().err

    assert main(['sweep-coupling', '--gamma-list', '1e-7', '--out', str(tmp_path)]) == 1
    assert 'sweep-coupling needs a gate task' in capsys.readouterr().err


def test_freq_study_needs_entropy_task(tmp_path, capsys):
    config = write_config(tmp_path, 'task: hadamard\n')
    assert main(['freq-study', '--config', config, '--out', str(tmp_path)]) == 1
    assert 'freq-study needs the heat or cool task' in capsys.readouterr().err

    assert main(['freq-study', '--dims', '5', '--out', str(tmp_path)]) == 1
    assert 'dims 2, 3 and 4' in capsys.readouterr().err


def test_sweep_coupling_needs_ascending_gammas(tmp_path, capsys):
    config = write_config(tmp_path, 'task: hadamard\n')
    assert main(['sweep-coupling', '--config', config, '--gamma-list', '1e-6', '1e-7',
                 '--out', str(tmp_path)]) == 1
    assert '--gamma-list must be positive and ascending' in capsys.readouterr().err

    assert main(['sweep-coupling', '--config', config, '--gamma-list', '0', '1e-7',
                 '--out', str(tmp_path)]) == 1


def test_sweep_coupling_needs_gamma_list():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['sweep-coupling'])


def test_tomography(tmp_path):
    config = write_config(tmp_path, 'task: reset\nfield:\n  steps_per_period: 50\n')
    out = tmp_path / 'out'
    field = write_field(tmp_path)
    assert main(['tomography', '--config', config, '--field', field, '--out', str(out)]) == 0

    result = json.loads((out / 'transfer_matrix.json').read_text())
    r = np.array(result['transfer_matrix'])
    assert r.shape == (4, 4)
    assert np.allclose(r[0], [1, 0, 0, 0], atol=1e-10)
    assert np.allclose(result['target'], RESET_TRANSFER_MATRIX)
    assert result['max_deviation'] == pytest.approx(np.max(np.abs(r - RESET_TRANSFER_MATRIX)))


def test_tomography_needs_qubit(tmp_path, capsys):
    config = write_config(tmp_path, 'task: heat\nmodel:\n  dim: 3\n')
    field = write_field(tmp_path)
    assert main(['tomography', '--config', config, '--field', field, '--out', str(tmp_path)]) == 1
    assert 'qubit scenario' in capsys.readouterr().err
