"""An undriven qubit relaxes to the Gibbs state of its bath."""

import numpy as np

from thermoqc.dissipator import BathSpec, assemble_generator, calibrate_bath, static_decay_rate
from thermoqc.eigenflow import build_eigenflow, build_eigenoperators
from thermoqc.operators import ModelSpec, coupling_operator, drift_hamiltonian, gibbs_state
from thermoqc.propagation import TimeGrid, newton_plan, propagate_unitary, unvec, vec
from thermoqc.thermo import entropy, trace_distance


def main():
    model = ModelSpec('spin_j', 2)
    drift = drift_hamiltonian(model)
    bath = BathSpec(temperature=model.delta, coupling=coupling_operator(model))
    bath = calibrate_bath(bath, drift, 1e-4 * model.delta)
    gamma = static_decay_rate(drift, bath)

    grid = TimeGrid.for_period(model.delta, periods=1, steps_per_period=200)
    flow = build_eigenflow(propagate_unitary(lambda t: drift, grid), grid, drift)
    gen = assemble_generator(0.0, drift, build_eigenoperators(flow, 0), bath)

    # one period of the undriven dynamics as a matrix
    period = newton_plan(gen.superoperator, grid.dt).apply(np.eye(4))
    period = np.linalg.matrix_power(period, grid.n_steps)

    target = gibbs_state(drift, bath.temperature)
    v = vec(np.array([[1, 0], [0, 0]]))
    periods_per_gamma = 1 / (gamma * model.period)
    print(f'Gamma = {gamma:.3e} au, {periods_per_gamma:.0f} periods per 1/Gamma')
    print(f'{"t Gamma":>8} {"S":>10} {"D(rho, gibbs)":>14}')
    done = 0
    for t_gamma in (0, 1, 2, 5, 10, 20):
        n = int(round(t_gamma * periods_per_gamma))
        v = np.linalg.matrix_power(period, n - done) @ v
        done = n
        rho = unvec(v, 2)
        print(f'{t_gamma:8d} {entropy(rho):10.6f} {trace_distance(rho, target):14.3e}')
    print(f'Gibbs entropy {entropy(target):.6f}')


if __name__ == '__main__':
    main()
