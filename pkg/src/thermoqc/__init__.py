"""thermoqc - thermodynamically consistent control of open quantum systems

A driven system H_S(t) = H_0 + eps(t) V coupled to a bosonic bath is
described by a GKLS master equation whose jump operators are the
eigenoperators of the free propagator.  The dissipator follows the drive, so
control fields optimized with it stay consistent with the second law.

Workflow:

    1. model = ModelSpec('spin_j', dim=2, delta=3e-3)
    2. bath = BathSpec(temperature=3e-3, coupling=coupling_operator(model))
       ...
    3. scenario = make_scenario(config)
       ...
    4. report = optimize(scenario.objective, scenario)
       states, trajectory = run_protocol(report.best_field, scenario)

or from the shell

    thermoqc optimize --config heat.yaml

See `pydoc thermoqc.tutorial` for a walk through and `thermoqc-demo ls` for
runnable examples.
"""

from thermoqc.errors import *  # noqa: F401,F403
from thermoqc.operators import (DEFAULT_DELTA, ModelSpec, Operator, angular_momentum,
                                control_operator, coupling_operator, drift_hamiltonian,
                                gibbs_state, identity, pauli)
from thermoqc.propagation import (NewtonPlan, Superoperator, TimeGrid, chebychev_step,
                                  newton_plan, newton_step, oracle_integrate, propagate_unitary,
                                  unvec, vec)
from thermoqc.eigenflow import EigenFlow, EigenOperatorSet, build_eigenflow, build_eigenoperators
from thermoqc.dissipator import (BathSpec, GKLSGenerator, assemble_generator, calibrate_bath,
                                 instantaneous_attractor, kinetic_coefficient, static_decay_rate)
from thermoqc.thermo import (ThermoSample, TrajectoryRecord, entropy, entropy_production_rate,
                             generalized_purity)
from thermoqc.ensemble import Ensemble
from thermoqc.control import (ControlField, Objective, OptimizerConfig, OptimizationReport,
                              Scenario, make_scenario, map_tomography, optimize, run_protocol,
                              run_scheme)
from thermoqc.config import ScenarioConfig, dump_config, load_config

__version__ = '0.1.0'
