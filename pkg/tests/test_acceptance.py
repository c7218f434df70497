import pytest

import csv
import json
import os

import numpy as np
import scipy.linalg

from dataclasses import replace

from thermoqc.cli import main
from thermoqc.config import FieldConfig, ModelConfig, ScenarioConfig
from thermoqc.control import (RESET_TARGET, Objective, OptimizerConfig, optimize, make_scenario,
                              random_field, run_protocol, run_scheme)
from thermoqc.dissipator import BathSpec, assemble_generator, calibrate_bath, kinetic_coefficient
from thermoqc.eigenflow import build_eigenflow, build_eigenoperators
from thermoqc.operators import (ModelSpec, coupling_operator, drift_hamiltonian, gibbs_state,
                                hermitian_eigensystem)
from thermoqc.propagation import (TimeGrid, chebychev_step, commutator_superoperator,
                                  dissipator_superoperator, newton_plan, newton_step,
                                  oracle_integrate, propagate_unitary, unvec, vec)
from thermoqc.thermo import entropy, trace_distance

slow = pytest.mark.skipif(not os.environ.get('THERMOQC_SLOW'), reason='set THERMOQC_SLOW=1 for the long runs')


def random_state(rng, dim, pure=False):
    if pure:
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        return np.outer(psi, psi.conj())
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def scenario_for(task, steps_per_period=200, **model):
    config = ScenarioConfig(task=task, model=ModelConfig(**model),
                            field=FieldConfig(steps_per_period=steps_per_period))
    return make_scenario(config)


def generators(scenario, field):
    grid = scenario.grid
    unitaries = propagate_unitary(lambda t: scenario.hamiltonian(field, t), grid)
    flow = build_eigenflow(unitaries, grid, scenario.hamiltonian(field, grid.t0))
    for k, t in enumerate(grid.midpoints):
        yield assemble_generator(t, scenario.hamiltonian(field, t), build_eigenoperators(flow, k),
                                 scenario.bath, scenario.weight_mode)


def assert_physical(rho):
    assert abs(np.trace(rho) - 1) <= 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-10
    assert np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) >= -1e-8


def test_gibbs_fixed_point():
    model = ModelSpec('spin_j', 2)
    h0 = drift_hamiltonian(model)
    gamma = 1e-4 * model.delta
    bath = calibrate_bath(BathSpec(model.delta, c=1e4, coupling=coupling_operator(model)), h0, gamma)

    grid = TimeGrid.for_period(model.delta)
    flow = build_eigenflow(propagate_unitary(lambda t: h0, grid), grid, h0)
    gen = assemble_generator(0.0, h0, build_eigenoperators(flow, 0), bath)
    period_map = newton_plan(gen.superoperator, model.period).apply(np.eye(4, dtype=complex))

    gibbs = gibbs_state(h0, bath.temperature).entries
    _, basis = hermitian_eigensystem(h0)
    v = basis.entries
    gibbs_populations = np.diag(v.conj().T @ gibbs @ v).real

    # populations relax with Gamma, coherences with Gamma / 2
    populations_map = np.linalg.matrix_power(period_map, int(np.ceil(20 / gamma / model.period)))
    full_map = np.linalg.matrix_power(period_map, int(np.ceil(30 / gamma / model.period)))

    rng = np.random.default_rng(100)
    for k in range(20):
        rho0 = random_state(rng, 2, pure=k % 2 == 0)
        rho = unvec(populations_map @ vec(rho0), 2)
        assert np.max(np.abs(np.diag(v.conj().T @ rho @ v).real - gibbs_populations)) <= 1e-6
        assert trace_distance(unvec(full_map @ vec(rho0), 2), gibbs) <= 1e-6


def test_eigenoperator_relation_on_long_run():
    model = ModelSpec('spin_j', 2)
    h0 = drift_hamiltonian(model).entries
    v = np.diag([0.5, -0.5])
    grid = TimeGrid.for_period(model.delta, steps_per_period=4000)
    field = random_field(20, model.period, model.period / 8, model.delta, np.random.default_rng(101), grid)
    unitaries = propagate_unitary(lambda t: h0 + field(t) * v, grid)
    flow = build_eigenflow(unitaries, grid, h0)

    worst = 0.0
    for k in range(grid.n_steps + 1):
        u = unitaries[k].entries
        ops = build_eigenoperators(flow, k)
        for f, theta in zip(ops.ops, ops.thetas):
            f = f.entries
            worst = max(worst, np.max(np.abs(u @ f @ u.conj().T - np.exp(-1j * theta) * f)))
    assert worst <= 1e-9


@pytest.mark.parametrize('task, model', [('heat', {}), ('cool', {'dim': 3}), ('hadamard', {}), ('reset', {})])
def test_trajectories_stay_physical(task, model):
    scenario = scenario_for(task, **model)
    grid = scenario.grid
    rng = np.random.default_rng(102)
    field = random_field(10, grid.t1, grid.t1 / 8, scenario.model.delta, rng, grid)

    block = np.column_stack([vec(p) for p in scenario.probes])
    dim = scenario.model.dim
    for gen in generators(scenario, field):
        block = newton_plan(gen.superoperator, grid.dt).apply(block)
        for column in block.T:
            assert_physical(unvec(column, dim))


def test_entropy_production_is_non_negative():
    rng = np.random.default_rng(103)
    for run in range(50):
        dim = 2 + run % 2
        scenario = scenario_for('heat' if run % 4 < 2 else 'cool', steps_per_period=100, dim=dim)
        grid = scenario.grid
        amplitude = scenario.model.delta * rng.uniform(0.2, 2)
        field = random_field(int(rng.integers(1, 21)), grid.t1, grid.t1 / 8, amplitude, rng, grid)
        _, trajectory = run_protocol(field, scenario)
        assert min(trajectory.column('sigma_rate')) >= -1e-10


def test_chebychev_oracle():
    rng = np.random.default_rng(104)
    for k in range(20):
        dim = 2 + k % 3
        h = random_hermitian(rng, dim)
        dt = rng.uniform(0.1, 2.0)
        u = chebychev_step(h, dt, np.eye(dim)).entries
        assert np.max(np.abs(u - scipy.linalg.expm(-1j * h * dt))) <= 1e-12


def test_newton_oracle():
    rng = np.random.default_rng(105)
    for k in range(20):
        dim = 2 + k % 3
        lmat = commutator_superoperator(random_hermitian(rng, dim))
        for _ in range(2):
            f = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            lmat = lmat + dissipator_superoperator(f, rng.uniform(0.05, 0.3))
        rho0 = random_state(rng, dim)

        newton = unvec(newton_step(lmat, 1.0, vec(rho0)), dim)
        reference = oracle_integrate(lambda t: lmat, TimeGrid(0.0, 1.0, 1), rho0)[-1].entries
        assert np.max(np.abs(newton - reference)) <= 1e-8


def test_detailed_balance():
    rng = np.random.default_rng(106)
    for _ in range(100):
        temperature = rng.uniform(1e-4, 1e-1)
        omega = rng.uniform(-10, 10) * temperature
        bath = BathSpec(temperature)
        ratio = kinetic_coefficient(omega, bath, 'up') / kinetic_coefficient(omega, bath, 'down')
        assert ratio == pytest.approx(np.exp(-omega / temperature), rel=1e-12)

    bath = BathSpec(3e-3)
    assert abs(kinetic_coefficient(1e-12, bath, 'up')) <= 1e-20
    assert abs(kinetic_coefficient(1e-12, bath, 'down')) <= 1e-20


def test_cli_is_deterministic(tmp_path):
    config = tmp_path / 'heat.yaml'
    config.write_text('task: heat\nfield:\n  m: 3\n  steps_per_period: 50\noptimizer:\n  restarts: 2\n  max_evals: 20\n')

    outputs = []
    for run in ('first', 'second'):
        out = tmp_path / run
        assert main(['optimize', '--config', str(config), '--seed', '11', '--out', str(out)]) in (0, 2)
        outputs.append(out)

    for name in ('summary.json', 'field.json', 'trajectory.csv'):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def desk_search(**kwargs):
    return OptimizerConfig(**{'m': 20, 'restarts': 64, 'time_budget': 1800.0, **kwargs})


@slow
@pytest.mark.slow
def test_heating():
    scenario = scenario_for('heat')
    report = optimize(scenario.objective, scenario, desk_search())
    assert report.best_value <= 1e-4


@slow
@pytest.mark.slow
def test_cooling():
    scenario = scenario_for('cool')
    report = optimize(scenario.objective, scenario, desk_search())
    (final,), _ = run_protocol(report.best_field, scenario, record=False)
    assert report.best_value <= 1e-3
    assert entropy(final) == pytest.approx(report.best_value)


@slow
@pytest.mark.slow
def test_reset_map():
    scenario = scenario_for('reset')
    report = optimize(scenario.objective, scenario, desk_search(target_value=1e-6))

    rng = np.random.default_rng(107)
    states = [random_state(rng, 2, pure=k < 10) for k in range(20)]
    check = replace(scenario, objective=Objective('state_overlap', states, [RESET_TARGET] * 20))
    finals, _ = run_protocol(report.best_field, check, record=False)
    for rho in finals:
        assert 1 - np.trace(rho.entries @ RESET_TARGET.entries).real <= 1e-3


def compare_open_and_replayed(scenario):
    search = desk_search()
    closed = optimize(scenario.objective, scenario.closed(), search)
    replayed = run_scheme('closed_field_on_open', scenario, search, closed_report=closed)
    corrected = run_scheme('open', scenario, search)
    return corrected, replayed


@slow
@pytest.mark.slow
def test_hadamard_under_dissipation():
    corrected, replayed = compare_open_and_replayed(scenario_for('hadamard'))
    assert corrected.value <= 1e-2
    assert replayed.value >= 10 * corrected.value


@slow
@pytest.mark.slow
def test_sqrt_swap_under_dissipation():
    corrected, replayed = compare_open_and_replayed(scenario_for('sqrt_swap', kind='two_qubit', dim=4))
    assert replayed.value >= 10 * corrected.value

    kept = corrected.trajectory.column('gen_purity')
    lost = replayed.trajectory.column('gen_purity')
    assert min(kept) >= 0.9 * kept[0]
    assert lost[-1] < 0.9 * lost[0]


@slow
@pytest.mark.slow
def test_coupling_sweep(tmp_path):
    config = tmp_path / 'hadamard.yaml'
    config.write_text('task: hadamard\noptimizer:\n  time_budget_s: 1200\n')
    gammas = [f'{g:.3e}' for g in 3e-3 * np.logspace(-6, -3, 5)]
    assert main(['sweep-coupling', '--config', str(config), '--gamma-list', *gammas,
                 '--out', str(tmp_path)]) == 0

    with open(tmp_path / 'sweep_coupling.csv', newline='') as f:
        rows = list(csv.DictReader(f))
    corrected = np.array([float(row['corrected']) for row in rows])
    uncorrected = np.array([float(row['uncorrected']) for row in rows])
    assert len(rows) == 5
    assert np.all(np.diff(corrected) >= 0)
    assert np.all(corrected <= uncorrected / 10)


@slow
@pytest.mark.slow
def test_frequency_study(tmp_path):
    config = tmp_path / 'heat.yaml'
    config.write_text('task: heat\noptimizer:\n  restarts: 16\n')
    assert main(['freq-study', '--config', str(config), '--m-list', '1', '5', '20', '--dims', '2', '3', '4',
                 '--out', str(tmp_path)]) == 0

    with open(tmp_path / 'freq_study.csv', newline='') as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 9
    best = {(int(row['dim']), int(row['m'])): float(row['best_value']) for row in rows}
    assert best[2, 20] <= best[2, 1]

    summary = json.loads((tmp_path / 'summary.json').read_text())
    assert len(summary['rows']) == 9
