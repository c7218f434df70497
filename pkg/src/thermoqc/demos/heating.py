"""Heat a qubit towards the maximally mixed state with a short CRAB search."""

from dataclasses import replace

import numpy as np

from thermoqc.config import ScenarioConfig, optimizer_config
from thermoqc.control import make_scenario, optimize, run_protocol


def main():
    config = ScenarioConfig(task='heat')
    scenario = make_scenario(config)
    search = replace(optimizer_config(config), m=6, restarts=3, max_evals=150)

    report = optimize(scenario.objective, scenario, search)
    _, trajectory = run_protocol(report.best_field, scenario)

    print(f'restart values: {", ".join(f"{v:.3e}" for v in report.restart_values)}')
    print(f'ln 2 - S_final = {report.best_value:.3e}')
    for sample in trajectory.samples[::25]:
        print(f't = {sample.t:8.1f}  S = {sample.entropy:.6f}  Sigma = {sample.sigma_accumulated:.3e}')
    print(f'S_max = {np.log(2):.6f}')


if __name__ == '__main__':
    main()
