"""thermoqc command line

    thermoqc optimize         --config heat.yaml [--seed N] [--restarts N] [--out DIR]
    thermoqc simulate         --config heat.yaml --field out/field.json
    thermoqc compare-schemes  --config hadamard.yaml
    thermoqc freq-study       --config heat.yaml --m-list 1 5 20 --dims 2 3 4
    thermoqc sweep-coupling   --config hadamard.yaml --gamma-list 1e-8 1e-7 1e-6
    thermoqc tomography       --config reset.yaml --field out/field.json

Every verb writes into the output directory of the configuration.
`summary.json` only depends on the configuration and the seed, the wall
time goes to `timing.json`.

Exit codes: 0 success, 1 bad configuration, 2 no convergence below the task
threshold.
"""

import csv
import json
import logging
import sys
import time
import argparse

from dataclasses import replace
from pathlib import Path

import numpy as np

from thermoqc.config import ScenarioConfig, apply_preset, load_config, optimizer_config, task_threshold
from thermoqc.control import (GATE_TASKS, HADAMARD_TRANSFER_MATRIX, RESET_TRANSFER_MATRIX,
                              ControlField, field_energy, make_scenario, map_tomography,
                              objective_value, optimize, run_protocol, run_scheme)
from thermoqc.errors import ConfigError, ThermoQCError
from thermoqc.thermo import CSV_COLUMNS

__all__ = ['main', 'build_parser', 'write_trajectory', 'write_json', 'SCHEME_ALIASES']

logger = logging.getLogger(__name__)

SCHEME_ALIASES = {
    'a': 'closed',
    'b': 'closed_field_on_open',
    'c': 'open',
}

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2


def write_trajectory(path, rows, columns=CSV_COLUMNS):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow(['' if v is None else v for v in row])
    logger.info(f'wrote {path}')


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    logger.info(f'wrote {path}')


def read_field(path):
    try:
        return ControlField.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ConfigError(f'Cannot read field from {path}: {e}', field='--field') from e


def _outdir(config):
    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _restart_stats(report):
    values = np.asarray(report.restart_values, dtype=float)
    if values.size == 0:
        return {'count': 0, 'evaluations': report.evaluations}
    return {
        'count': int(values.size),
        'evaluations': report.evaluations,
        'best': float(values.min()),
        'median': float(np.median(values)),
        'worst': float(values.max()),
    }


def _value_summary(config, scenario, value):
    """The final objective with its raw form for overlap objectives."""
    d = {'value': value, 'threshold': task_threshold(config), 'converged': value <= task_threshold(config)}
    if scenario.objective.kind in ('state_overlap', 'map_overlap'):
        d['overlap_raw'] = len(scenario.probes) * (1 - value)
    return d


def _header(config):
    return {
        'task': config.task,
        'scheme': config.scheme,
        'preset': config.preset,
        'seed': config.optimizer.seed,
        'restarts': config.optimizer.restarts,
        'dim': config.model.dim,
        'model': config.model.kind,
        'rate_mode': config.bath.rate_mode,
        'm': config.field.m,
    }


def _field_json(field, config, scheme):
    return {**field.to_dict(), 'task': config.task, 'scheme': scheme}


def cmd_optimize(config, opts):
    out = _outdir(config)
    scenario = make_scenario(config)
    result = run_scheme(config.scheme, scenario, optimizer_config(config))

    write_trajectory(out / 'trajectory.csv', result.trajectory.rows())
    write_json(out / 'field.json', _field_json(result.field, config, config.scheme))

    summary = _header(config)
    summary.update(_value_summary(config, scenario, result.value))
    summary['trajectory'] = result.trajectory.summary()
    summary['field_energy'] = field_energy(result.field, scenario.grid)
    summary['restart_stats'] = _restart_stats(result.report)
    write_json(out / 'summary.json', summary)

    if summary['converged']:
        logger.info(f'{config.task}: {result.value:.3e} <= {summary["threshold"]:.0e}')
        return EXIT_OK
    logger.warning(f'{config.task}: {result.value:.3e} above threshold {summary["threshold"]:.0e}')
    return EXIT_NOT_CONVERGED


def cmd_simulate(config, opts):
    if opts.field is None:
        raise ConfigError('simulate needs --field', field='--field')
    out = _outdir(config)
    field = read_field(opts.field)
    scenario = make_scenario(config)
    if config.scheme == 'closed':
        scenario = scenario.closed()

    states, trajectory = run_protocol(field, scenario)
    value = objective_value(scenario.objective, states)
    write_trajectory(out / 'trajectory.csv', trajectory.rows())

    summary = _header(config)
    summary.update(_value_summary(config, scenario, value))
    summary['trajectory'] = trajectory.summary()
    summary['field_energy'] = field_energy(field, scenario.grid)
    write_json(out / 'summary.json', summary)
    return EXIT_OK


def _require_gate(config, verb):
    if config.task not in GATE_TASKS:
        raise ConfigError(f'{verb} needs a gate task ({", ".join(GATE_TASKS)}), got {config.task}', field='task')


def cmd_compare_schemes(config, opts):
    _require_gate(config, 'compare-schemes')
    out = _outdir(config)
    scenario = make_scenario(config)
    search = optimizer_config(config)

    closed_report = optimize(scenario.objective, scenario.closed(), search)
    results = [run_scheme(scheme, scenario, search, closed_report=closed_report)
               for scheme in ('closed', 'closed_field_on_open')]
    results.append(run_scheme('open', scenario, search))

    rows = [(r.scheme, *row) for r in results for row in r.trajectory.rows()]
    write_trajectory(out / 'schemes.csv', rows, ('scheme', *CSV_COLUMNS))

    summary = _header(config)
    summary['threshold'] = task_threshold(config)
    summary['schemes'] = {}
    for r in results:
        write_json(out / f'field_{r.scheme}.json', _field_json(r.field, config, r.scheme))
        summary['schemes'][r.scheme] = {
            'value': r.value,
            'field_energy': field_energy(r.field, scenario.grid),
            'trajectory': r.trajectory.summary(),
            'restart_stats': _restart_stats(r.report),
        }
    by_scheme = {r.scheme: r.value for r in results}
    opened = by_scheme['open']
    summary['improvement'] = by_scheme['closed_field_on_open'] / opened if opened > 0 else None
    write_json(out / 'summary.json', summary)

    return EXIT_OK if opened <= task_threshold(config) else EXIT_NOT_CONVERGED


def cmd_freq_study(config, opts):
    if config.task not in ('heat', 'cool'):
        raise ConfigError(f'freq-study needs the heat or cool task, got {config.task}', field='task')
    for dim in opts.dims:
        if dim not in (2, 3, 4):
            raise ConfigError(f'freq-study supports dims 2, 3 and 4, got {dim}', field='--dims')
    out = _outdir(config)

    rows = []
    for dim in opts.dims:
        for m in opts.m_list:
            cfg = replace(config, model=replace(config.model, kind='spin_j', dim=dim),
                          field=replace(config.field, m=m))
            scenario = make_scenario(cfg)
            report = optimize(scenario.objective, scenario, optimizer_config(cfg))
            logger.info(f'dim {dim} M {m}: {report.best_value:.6e}')
            rows.append((dim, m, report.best_value, report.evaluations))

    write_trajectory(out / 'freq_study.csv', rows, ('dim', 'm', 'best_value', 'evaluations'))
    summary = _header(config)
    summary['rows'] = [dict(zip(('dim', 'm', 'best_value', 'evaluations'), row)) for row in rows]
    write_json(out / 'summary.json', summary)
    return EXIT_OK


def cmd_sweep_coupling(config, opts):
    _require_gate(config, 'sweep-coupling')
    gammas = list(opts.gamma_list)
    if any(g <= 0 for g in gammas) or gammas != sorted(gammas):
        raise ConfigError('--gamma-list must be positive and ascending', field='--gamma-list')
    out = _outdir(config)
    search = optimizer_config(config)

    # the closed optimum does not depend on Gamma
    base = make_scenario(replace(config, bath=replace(config.bath, gamma_au=gammas[0])))
    closed_report = optimize(base.objective, base.closed(), search)

    rows = []
    for gamma in gammas:
        scenario = make_scenario(replace(config, bath=replace(config.bath, gamma_au=gamma)))
        uncorrected = run_scheme('closed_field_on_open', scenario, search, closed_report=closed_report, record=False)
        corrected = run_scheme('open', scenario, search, record=False)
        logger.info(f'Gamma {gamma:.3e}: corrected {corrected.value:.3e} uncorrected {uncorrected.value:.3e}')
        rows.append((gamma, corrected.value, uncorrected.value))

    columns = ('gamma', 'corrected', 'uncorrected')
    write_trajectory(out / 'sweep_coupling.csv', rows, columns)
    summary = _header(config)
    summary['rows'] = [dict(zip(columns, row)) for row in rows]
    write_json(out / 'summary.json', summary)
    return EXIT_OK


def _target_transfer_matrix(config):
    match config.task:
        case 'reset':
            return RESET_TRANSFER_MATRIX
        case 'hadamard':
            return HADAMARD_TRANSFER_MATRIX
        case 'custom_map':
            return np.array(config.transfer_matrix)
    return None


def cmd_tomography(config, opts):
    if opts.field is None:
        raise ConfigError('tomography needs --field', field='--field')
    out = _outdir(config)
    field = read_field(opts.field)
    scenario = make_scenario(config)
    if config.scheme == 'closed':
        scenario = scenario.closed()

    r = map_tomography(field, scenario)
    result = {'task': config.task, 'scheme': config.scheme, 'transfer_matrix': r.tolist()}
    target = _target_transfer_matrix(config)
    if target is not None:
        result['target'] = np.asarray(target).tolist()
        result['max_deviation'] = float(np.max(np.abs(r - target)))
    write_json(out / 'transfer_matrix.json', result)
    return EXIT_OK


COMMANDS = {
    'optimize': cmd_optimize,
    'simulate': cmd_simulate,
    'compare-schemes': cmd_compare_schemes,
    'freq-study': cmd_freq_study,
    'sweep-coupling': cmd_sweep_coupling,
    'tomography': cmd_tomography,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='YAML scenario file')
    common.add_argument('--seed', type=int, default=None, help='base seed of the restarts')
    common.add_argument('--restarts', type=int, default=None, help='number of restarts')
    common.add_argument('--out', type=str, default=None, help='output directory')
    common.add_argument('--scheme', type=str, default=None,
                        choices=[*SCHEME_ALIASES, *SCHEME_ALIASES.values()],
                        help='a (closed), b (closed_field_on_open) or c (open)')
    common.add_argument('--rate-mode', type=str, default=None, choices=['main_text', 'appendix'])
    common.add_argument('--preset', type=str, default=None, choices=['desk', 'stretch'])
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v info, -vv debug')

    cmdline = argparse.ArgumentParser(prog='thermoqc', description='thermodynamically consistent quantum control')
    verbs = cmdline.add_subparsers(dest='cmd', required=True)
    for name in ('optimize', 'compare-schemes'):
        verbs.add_parser(name, parents=[common])
    for name in ('simulate', 'tomography'):
        verbs.add_parser(name, parents=[common]).add_argument('--field', type=str, default=None,
                                                              help='field.json of an earlier run')
    freq = verbs.add_parser('freq-study', parents=[common])
    freq.add_argument('--m-list', type=int, nargs='+', default=[1, 5, 10, 20])
    freq.add_argument('--dims', type=int, nargs='+', default=[2, 3, 4])
    sweep = verbs.add_parser('sweep-coupling', parents=[common])
    sweep.add_argument('--gamma-list', type=float, nargs='+', required=True)
    return cmdline


def resolve_config(opts):
    """The configuration file with the command line overrides applied."""
    config = load_config(opts.config) if opts.config else ScenarioConfig()

    if opts.preset is not None:
        config = apply_preset(config, opts.preset)
    search = config.optimizer
    if opts.seed is not None:
        if opts.seed < 0:
            raise ConfigError(f'--seed must be >= 0, got {opts.seed}', field='--seed')
        search = replace(search, seed=opts.seed)
    if opts.restarts is not None:
        if opts.restarts < 1:
            raise ConfigError(f'--restarts must be >= 1, got {opts.restarts}', field='--restarts')
        search = replace(search, restarts=opts.restarts)
    config = replace(config, optimizer=search)

    if opts.out is not None:
        config = replace(config, output=replace(config.output, dir=opts.out))
    if opts.scheme is not None:
        config = replace(config, scheme=SCHEME_ALIASES.get(opts.scheme, opts.scheme))
    if opts.rate_mode is not None:
        config = replace(config, bath=replace(config.bath, rate_mode=opts.rate_mode))
    return config


def main(argv=None):
    opts = build_parser().parse_args(sys.argv[1:] if argv is None else argv)

    level = {0: logging.WARNING, 1: logging.INFO}.get(opts.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    start = time.perf_counter()
    try:
        config = resolve_config(opts)
        code = COMMANDS[opts.cmd](config, opts)
    except ConfigError as e:
        print(f'thermoqc: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except ThermoQCError as e:
        if not isinstance(e, ValueError):
            logger.error(f'{opts.cmd} failed: {type(e).__name__}: {e}')
        print(f'thermoqc: {e}', file=sys.stderr)
        return EXIT_CONFIG

    write_json(Path(config.output.dir) / 'timing.json',
               {'command': opts.cmd, 'wall_time_s': time.perf_counter() - start})
    return code


if __name__ == '__main__':
    sys.exit(main())
