import pytest

import numpy as np
import scipy.linalg

from dataclasses import replace

from thermoqc.config import FieldConfig, ModelConfig, ScenarioConfig
from thermoqc.control import (FAILED_VALUE, HADAMARD_TRANSFER_MATRIX, HADAMARD_UNITARY, RESET_TARGET,
                              RESET_TRANSFER_MATRIX, SQRT_SWAP_UNITARY, ControlField, Objective,
                              OptimizerConfig, apply_transfer_matrix, draw_frequencies, eval_field,
                              field_energy, make_scenario, map_tomography, multistart_minimize,
                              objective_value, optimize, probe_set, random_field, run_protocol, run_scheme,
                              transfer_matrix_of_unitary)
from thermoqc.dissipator import static_decay_rate
from thermoqc.errors import ContractError, PropagationError
from thermoqc.operators import Operator, as_array, gibbs_state, pauli
from thermoqc.propagation import TimeGrid
from thermoqc.thermo import from_bloch


def scenario_for(task='hadamard', bath=True, periods=1.0, steps_per_period=200, model=None):
    model = model or ModelConfig()
    period = 2 * np.pi / model.delta_au
    config = ScenarioConfig(task=task, model=model,
                            field=FieldConfig(tau_au=periods * period, steps_per_period=steps_per_period))
    scenario = make_scenario(config)
    return scenario if bath else scenario.closed()


def zero_field(scenario):
    tau = scenario.grid.t1 - scenario.grid.t0
    return ControlField(tau, tau / 8, (2 * np.pi / tau,), (0.0,))


def quadratic_factory(rng):
    a = np.array([1.0, -2.0])

    def fun(x):
        return float(np.sum((np.asarray(x) - a) ** 2))

    x0 = rng.normal(size=2)
    return fun, x0, tuple(x0)


def test_eval_field():
    field = ControlField(10.0, 2.0, (1.0, 3.0), (2.0, -1.0))
    assert eval_field(field, 5.0) == pytest.approx(2 * np.sin(5.0) - np.sin(15.0))
    assert field(0.0) == pytest.approx(0.0, abs=1e-15)
    envelope = np.exp(-((2.0 - 5.0) / 4.0) ** 2)
    assert field(2.0) == pytest.approx(envelope * (2 * np.sin(2.0) - np.sin(6.0)))

    values = field(np.array([0.0, 5.0, 10.0]))
    assert values.shape == (3,)
    assert values[1] == pytest.approx(field(5.0))


def test_eval_field_clamps(caplog):
    field = ControlField(10.0, 2.0, (1.0,), (1.0,))
    with caplog.at_level('WARNING'):
        assert field(12.0) == field(10.0)
    assert 'clamping' in caplog.text


def test_control_field_validation():
    with pytest.raises(ContractError) as e:
        ControlField(0.0, 1.0, (1.0,), (1.0,))
    assert 'duration must be positive' in str(e.value)

    with pytest.raises(ContractError) as e:
        ControlField(1.0, 0.0, (1.0,), (1.0,))
    assert 'width must be positive' in str(e.value)

    with pytest.raises(ContractError) as e:
        ControlField(1.0, 1.0, (1.0, 2.0), (1.0,))
    assert 'as many coefficients' in str(e.value)

    with pytest.raises(ContractError):
        ControlField(1.0, 1.0, (), ())


def test_control_field_dict():
    field = ControlField(10.0, 2.0, np.array([1.0, 3.0]), [2.0, -1.0])
    assert field.m == 2
    d = field.to_dict()
    assert d == {'tau': 10.0, 'sigma': 2.0, 'freqs': [1.0, 3.0], 'coeffs': [2.0, -1.0]}
    assert ControlField.from_dict(d) == field
    assert field.with_coeffs([0.0, 1.0]).coeffs == (0.0, 1.0)


def test_draw_frequencies():
    rng = np.random.default_rng(30)
    tau = 5.0
    nu = draw_frequencies(20, tau, rng, spread=0.1)
    base = 2 * np.pi * np.arange(1, 21) / tau
    assert np.all(np.abs(nu / base - 1) <= 0.1)

    again = draw_frequencies(20, tau, np.random.default_rng(30), spread=0.1)
    assert np.array_equal(nu, again)


def test_random_field_amplitude():
    grid = TimeGrid(0.0, 100.0, 400)
    field = random_field(5, 100.0, 12.5, 3e-3, np.random.default_rng(31), grid)
    assert np.max(np.abs(field(grid.times))) == pytest.approx(3e-3)
    assert field.m == 5


def test_field_energy():
    grid = TimeGrid(0.0, 10.0, 1000)
    assert field_energy(ControlField(10.0, 2.0, (1.0,), (0.0,)), grid) == 0.0
    field = ControlField(10.0, 2.0, (1.0,), (1.0,))
    assert field_energy(field, grid) > 0
    assert field_energy(field.with_coeffs([2.0]), grid) == pytest.approx(4 * field_energy(field, grid))


def test_objective_validation():
    with pytest.raises(ContractError) as e:
        Objective('max_purity', (np.eye(2) / 2,))
    assert 'Unknown objective kind' in str(e.value)

    with pytest.raises(ContractError) as e:
        Objective('max_entropy', ())
    assert 'at least one probe' in str(e.value)

    with pytest.raises(ContractError) as e:
        Objective('state_overlap', (np.eye(2) / 2,), ())
    assert '1 probes but 0 targets' in str(e.value)

    basis = (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    with pytest.raises(ContractError) as e:
        Objective('map_overlap', basis, basis)
    assert 'complete probe set' in str(e.value)

    exchange = probe_set('exchange')
    assert len(Objective('map_overlap', exchange, exchange).probes) == 4


def test_objective_value():
    half = np.eye(2) / 2
    assert objective_value(Objective('max_entropy', (half,)), [half]) == pytest.approx(0.0, abs=1e-15)
    assert objective_value(Objective('min_entropy', (half,)), [half]) == pytest.approx(np.log(2))

    probes = probe_set('qubit')
    obj = Objective('map_overlap', probes, probes)
    assert objective_value(obj, probes) == pytest.approx(0.0, abs=1e-15)
    assert objective_value(obj, [half] * 4) == pytest.approx(0.5)

    with pytest.raises(ContractError) as e:
        objective_value(obj, probes[:2])
    assert '2 final states for 4 probes' in str(e.value)


def test_objective_penalty():
    grid = TimeGrid(0.0, 10.0, 1000)
    field = ControlField(10.0, 2.0, (1.0,), (1.0,))
    half = np.eye(2) / 2
    obj = Objective('max_entropy', (half,), penalty=0.5)
    assert objective_value(obj, [half], field, grid) == pytest.approx(0.5 * field_energy(field, grid))
    assert objective_value(obj, [half]) == pytest.approx(0.0, abs=1e-15)


def test_probe_sets():
    for kind, count, dim in (('qubit', 4, 2), ('two_qubit', 16, 4), ('exchange', 4, 4)):
        probes = probe_set(kind)
        assert len(probes) == count
        for p in probes:
            assert p.dim == dim
            assert p.trace() == pytest.approx(1)
            assert np.trace(p.entries @ p.entries).real == pytest.approx(1)

    with pytest.raises(ContractError) as e:
        probe_set('qutrit')
    assert 'Unknown probe set' in str(e.value)


def test_gate_constants():
    assert HADAMARD_UNITARY.unitary
    assert np.allclose(transfer_matrix_of_unitary(HADAMARD_UNITARY), HADAMARD_TRANSFER_MATRIX)
    assert np.allclose(transfer_matrix_of_unitary(np.eye(2)), np.eye(4))

    swap = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(as_array(SQRT_SWAP_UNITARY @ SQRT_SWAP_UNITARY), swap)
    assert SQRT_SWAP_UNITARY.unitary


def test_reset_map():
    rng = np.random.default_rng(32)
    for _ in range(5):
        r = rng.normal(size=3)
        r *= rng.uniform(0, 1) / np.linalg.norm(r)
        assert apply_transfer_matrix(RESET_TRANSFER_MATRIX, from_bloch(r)).allclose(RESET_TARGET)


def test_apply_transfer_matrix_matches_unitary():
    rho = from_bloch((0.3, -0.1, 0.5))
    u = HADAMARD_UNITARY
    assert apply_transfer_matrix(HADAMARD_TRANSFER_MATRIX, rho).allclose(u @ rho @ u.dagger())


def test_closed_protocol_is_unitary():
    scenario = scenario_for(bath=False, periods=0.25)
    states, trajectory = run_protocol(zero_field(scenario), scenario)

    tau = scenario.grid.t1
    u = scipy.linalg.expm(-1j * scenario.drift.entries * tau)
    for probe, final in zip(scenario.probes, states):
        assert final.allclose(u @ probe.entries @ u.conj().T, atol=1e-10)

    assert len(trajectory) == scenario.grid.n_steps + 1
    assert np.all(np.array(trajectory.column('sigma_rate')) == 0)
    # the infidelity column is the objective at every time
    assert trajectory.samples[0].infidelity == pytest.approx(objective_value(scenario.objective, scenario.probes))


def test_undriven_open_protocol_keeps_gibbs_state():
    scenario = scenario_for('heat')
    states, trajectory = run_protocol(zero_field(scenario), scenario)
    gibbs = gibbs_state(scenario.drift, scenario.bath.temperature)
    assert states[0].allclose(gibbs, atol=1e-10)
    assert np.allclose(trajectory.column('entropy'), trajectory.samples[0].entropy, atol=1e-10)
    assert np.max(np.abs(trajectory.column('sigma_rate'))) <= 1e-12


def test_driven_open_protocol():
    scenario = scenario_for('heat')
    grid = scenario.grid
    field = random_field(6, grid.t1, grid.t1 / 8, scenario.model.delta, np.random.default_rng(33), grid)
    (final,), trajectory = run_protocol(field, scenario)

    rho = final.entries
    assert abs(np.trace(rho) - 1) <= 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-10
    assert np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) >= -1e-8

    assert np.all(np.diff(trajectory.times) > 0)
    assert min(trajectory.column('sigma_rate')) >= -1e-10
    assert np.all(np.diff(trajectory.column('sigma_acc')) >= -1e-8)
    assert trajectory.samples[-1].field == pytest.approx(field(grid.t1))
    assert trajectory.samples[-1].infidelity == pytest.approx(np.log(2) - trajectory.samples[-1].entropy)

    again, _ = run_protocol(field, scenario, record=False)
    assert again[0].allclose(final, atol=1e-14)


def test_protocol_refines_coarse_grid(caplog):
    scenario = scenario_for('heat', steps_per_period=4)
    with caplog.at_level('WARNING'):
        (final,), trajectory = run_protocol(zero_field(scenario), scenario)
    assert 'refining grid to 8 steps' in caplog.text
    assert len(trajectory) == 9
    assert final.trace() == pytest.approx(1)


def test_map_tomography_closed():
    scenario = scenario_for(bath=False, periods=0.25)
    r = map_tomography(zero_field(scenario), scenario)
    u = scipy.linalg.expm(-1j * scenario.drift.entries * scenario.grid.t1)
    assert np.allclose(r, transfer_matrix_of_unitary(u), atol=1e-10)


def test_map_tomography_open_is_trace_preserving():
    scenario = scenario_for()
    r = map_tomography(zero_field(scenario), scenario)
    assert np.allclose(r[0], [1, 0, 0, 0], atol=1e-10)


def test_map_tomography_needs_qubit():
    scenario = scenario_for('sqrt_swap', model=ModelConfig(kind='two_qubit', dim=4))
    with pytest.raises(ContractError) as e:
        map_tomography(zero_field(scenario), scenario)
    assert 'qubit scenario' in str(e.value)


def test_multistart_minimize():
    report = multistart_minimize(quadratic_factory, restarts=3, seed=5)
    assert report.best_value <= 1e-10
    assert np.allclose(report.best_coeffs, [1.0, -2.0], atol=1e-5)
    assert report.converged
    assert report.evaluations > 0
    assert report.as_dict()['best_value'] == report.best_value

    again = multistart_minimize(quadratic_factory, restarts=3, seed=5)
    assert again.best_coeffs == report.best_coeffs
    assert again.restart_values == report.restart_values


def test_multistart_failed_evaluations():
    def factory(rng):
        def fun(x):
            raise PropagationError('divergent Newton interpolation')
        return fun, np.zeros(2), None

    report = multistart_minimize(factory, restarts=2, seed=0, max_evals=50)
    assert report.best_value == FAILED_VALUE
    assert report.restart_values == [FAILED_VALUE, FAILED_VALUE]


def test_multistart_budget(caplog):
    with caplog.at_level('WARNING'):
        report = multistart_minimize(quadratic_factory, restarts=2, seed=1, max_evals=3, target_value=0.0)
    assert report.evaluations == 6
    assert len(report.restart_values) == 2
    assert 'hit its budget' in caplog.text


def test_optimize_stops_at_zero_objective():
    scenario = scenario_for('heat', bath=False, periods=0.25)
    mixed = Objective('max_entropy', (Operator(np.eye(2) / 2),))
    config = OptimizerConfig(m=2, restarts=4, seed=3, max_evals=100)

    report = optimize(mixed, scenario, config)
    assert report.converged
    assert report.evaluations == 1
    assert report.restart_values == [report.best_value]
    assert report.best_value <= 1e-12
    assert len(report.best_field.coeffs) == 2

    result = run_scheme('closed', replace(scenario, objective=mixed), config)
    assert result.report.evaluations == 1
    assert result.value <= 1e-12


def test_make_scenario_gate_calibration():
    scenario = scenario_for('hadamard')
    gamma = static_decay_rate(scenario.drift, scenario.bath, weight_mode=scenario.weight_mode)
    assert gamma == pytest.approx(1e-4 * scenario.model.delta, rel=1e-10)
    assert scenario.grid.n_steps == 200
    assert scenario.objective.kind == 'map_overlap'
    assert scenario.dissipative
    assert not scenario.closed().dissipative

    heat = scenario_for('heat')
    assert heat.bath.c == 1e4
    assert heat.objective.kind == 'max_entropy'
    assert heat.probes[0].allclose(gibbs_state(heat.drift, heat.model.delta))


def test_make_scenario_register():
    scenario = scenario_for('sqrt_swap', model=ModelConfig(kind='two_qubit', dim=4))
    assert scenario.model.kind == 'two_qubit'
    assert len(scenario.probes) == 4
    u = SQRT_SWAP_UNITARY.entries
    for probe, target in zip(scenario.probes, scenario.objective.targets):
        assert target.allclose(u @ probe.entries @ u.conj().T)


def test_make_scenario_task_checks():
    with pytest.raises(ContractError) as e:
        make_scenario(ScenarioConfig(task='sqrt_swap'))
    assert 'two_qubit' in str(e.value)

    with pytest.raises(ContractError) as e:
        make_scenario(ScenarioConfig(task='reset', model=ModelConfig(dim=3)))
    assert 'qubit model' in str(e.value)

    with pytest.raises(ContractError) as e:
        make_scenario(ScenarioConfig(task='custom_map'))
    assert 'transfer matrix' in str(e.value)

    custom = make_scenario(ScenarioConfig(task='custom_map', transfer_matrix=tuple(map(tuple, np.eye(4)))))
    for probe, target in zip(custom.probes, custom.objective.targets):
        assert target.allclose(probe)


def test_run_scheme_contract():
    scenario = scenario_for()
    with pytest.raises(ContractError) as e:
        run_scheme('half_open', scenario)
    assert 'Unknown scheme' in str(e.value)


def test_hamiltonian_of_scenario():
    scenario = scenario_for(bath=False)
    field = ControlField(scenario.grid.t1, scenario.grid.t1 / 8, (1e-3,), (1e-3,))
    t = scenario.grid.t1 / 3
    h = scenario.hamiltonian(field, t)
    assert isinstance(h, Operator)
    assert h.allclose(scenario.drift.entries + field(t) * scenario.control.entries)
    assert pauli('z').allclose(2 * scenario.control.entries)
