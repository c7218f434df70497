"""Eigenoperators and Bohr frequencies of a driven qubit."""

import numpy as np

from thermoqc.control import random_field
from thermoqc.eigenflow import build_eigenflow, build_eigenoperators
from thermoqc.operators import ModelSpec, as_array, control_operator, drift_hamiltonian
from thermoqc.propagation import TimeGrid, propagate_unitary


def main():
    model = ModelSpec('spin_j', 2)
    h0, v = drift_hamiltonian(model).entries, control_operator(model).entries
    grid = TimeGrid.for_period(model.delta, steps_per_period=400)
    rng = np.random.default_rng(7)
    field = random_field(8, model.period, model.period / 8, model.delta, rng, grid)

    unitaries = propagate_unitary(lambda t: h0 + field(t) * v, grid)
    flow = build_eigenflow(unitaries, grid, h0)

    residual = 0.0
    for k in range(0, grid.n_steps + 1, 50):
        u = as_array(unitaries[k])
        ops = build_eigenoperators(flow, k)
        for f, theta in zip(ops.ops, ops.thetas):
            f = f.entries
            residual = max(residual, np.max(np.abs(u @ f @ u.conj().T - np.exp(-1j * theta) * f)))
        print(f't = {grid.times[k]:9.2f}  field = {field(grid.times[k]):+.3e}  '
              f'omega_01 = {flow.bohr(k)[0, 1]:+.4e}')

    print(f'largest |U F U^+ - exp(-i theta) F| = {residual:.2e}')


if __name__ == '__main__':
    main()
