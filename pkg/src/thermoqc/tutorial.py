'''
# thermoqc Tutorial

This tutorial is also available by running

```sh
pydoc thermoqc.tutorial
```

The small programs mentioned below live in `thermoqc.demos` and can be run
with

```sh
thermoqc-demo ls
thermoqc-demo gibbs_relaxation
```

## About

A control field that drives a quantum system also changes how the system
talks to its environment.  Textbook master equations take their jump
operators from the bare Hamiltonian and keep them fixed while the field is
on.  That is fine for weak, slow drives, but an optimized pulse is neither,
and a protocol optimized with such a master equation can come out
thermodynamically inconsistent: the state drifts towards something other
than the instantaneous thermal state and the entropy production can turn
negative.

thermoqc builds the dissipator from the driven dynamics instead.  The free
propagator U(t) of H_S(t) = H_0 + eps(t) V is computed first, its
eigenvectors give eigenoperators F_j with

    U(t) F_j U(t)^+ = exp(-i theta_j(t)) F_j

and the Bohr frequencies omega_j = d theta_j / dt pick the bath rates.  The
result is a GKLS generator for every time step, with a unique instantaneous
attractor and non-negative entropy production.

## Installing

```sh
pip install thermoqc
```

For the tests

```sh
pip install thermoqc[test]
```

## Some concepts

### Models

`ModelSpec` picks one of two systems:

    'spin_j'        u J_z^2 + Delta J_x, a two mode Bose-Hubbard model
                    written with spin j = (dim - 1) / 2 matrices, control
                    through J_z
    'two_qubit'     a register diag(-w1 - w2, w1 - w2, -w1 + w2, w1 + w2)
                    with an exchange control |01><10| + h.c.

All quantities are in atomic units.  The default Delta is 3e-3.

```py
from thermoqc import ModelSpec, drift_hamiltonian, control_operator

model = ModelSpec('spin_j', dim=2)
h0, v = drift_hamiltonian(model), control_operator(model)
```

### Baths

A `BathSpec` is an Ohmic bath J(omega) = c omega**2 at temperature T, coupled
through a Hermitian operator S.  Its kinetic coefficients obey detailed
balance

    k_up(omega) = k_down(omega) exp(-omega / T)

Gate tasks usually want the bath expressed as a decay rate of the undriven
system.  `calibrate_bath` rescales c so the lowest transition decays with the
requested Gamma = k_up + k_down:

```py
from thermoqc import BathSpec, calibrate_bath, coupling_operator

bath = BathSpec(temperature=model.delta, coupling=coupling_operator(model))
bath = calibrate_bath(bath, h0, 1e-4 * model.delta)
```

### Propagation

Three propagators do the work.

    chebychev_step      one step exp(-i H dt) U with a Chebychev series
    newton_plan         exp(L dt) for a non-Hermitian superoperator, as a
                        Newton polynomial on Leja points
    oracle_integrate    adaptive DOP853, only for checking the other two

Density matrices are column stacked, `vec(A X B) = (B^T kron A) vec(X)`.
A `NewtonPlan` is prepared once per step and applied to every probe state.

### Eigenflow

`build_eigenflow` diagonalizes every U(t_k), keeps the labels continuous by
matching overlaps with the previous step and integrates the eigenphases.  If
a phase moves by pi / 2 or more within one step the grid is too coarse and
`UndersampledGridError` tells you so.  `run_protocol` reacts by doubling the
step count.

### Probes and the ensemble

A protocol propagates several initial states, the probes, through the same
generators.  They are kept in an `Ensemble`: a probe is just an id, its
density matrix, target and log are components, and propagation and
recording are systems that run once per time step.

```py
from thermoqc import Ensemble
from thermoqc.ensemble import ProbeState, propagate_system

ens = Ensemble()
ens.create_probe(tag='ground', components={'state': ProbeState.of(rho0)})
ens.add_system(propagate_system, 'state')
ens.add_system_to_domain('propagate', propagate_system)

for step in range(n_steps):
    ens.run_domain(dt, 'propagate', plan=plans[step])
```

All systems of a domain get the same keyword arguments, so write them as
`fkt(dt, eid, *comps, **kwargs)` and ignore what you do not need.

### Tasks

    heat            maximize the entropy of the thermal state, ln N - S
    cool            minimize it, S
    reset           map every qubit state onto (I - sx) / 2
    hadamard        the gate (sx - sz) / sqrt 2
    sqrt_swap       sqrt SWAP on the {|01>, |10>} subspace of the register
    custom_map      any qubit transfer matrix

Map tasks average 1 - tr(rho_k target_k) over an informationally complete
set of probes, so a value of 0 means the whole map is right, not only one
state.

### Fields and the search

Fields are CRAB expansions

    eps(t) = exp(-((t - tau / 2) / (2 sigma))**2) sum_k c_k sin(nu_k t)

with nu_k = 2 pi k / tau (1 + delta_k).  `optimize` draws the frequencies and
the initial coefficients per restart from a seeded generator and runs BFGS on
the coefficients with finite difference gradients.  The same seed gives the
same result.

## Putting it together

```py
from thermoqc import ScenarioConfig, make_scenario, optimize, run_protocol
from thermoqc.config import optimizer_config

config = ScenarioConfig(task='heat')
scenario = make_scenario(config)
report = optimize(scenario.objective, scenario, optimizer_config(config))

states, trajectory = run_protocol(report.best_field, scenario)
for sample in trajectory.samples:
    print(sample.t, sample.entropy, sample.sigma_accumulated)
```

The same from the shell, with the configuration in a YAML file:

```yaml
spec_version: 1
task: heat
scheme: open
model:
  kind: spin_j
  dim: 2
  delta_au: 0.003
optimizer:
  restarts: 16
  seed: 1
```

```sh
thermoqc optimize --config heat.yaml --out runs/heat -v
```

`runs/heat` then holds `trajectory.csv`, `summary.json`, `field.json` and
`timing.json`.  A stored field can be replayed, or its map measured:

```sh
thermoqc simulate --config heat.yaml --field runs/heat/field.json
thermoqc tomography --config reset.yaml --field runs/reset/field.json
```

### Comparing schemes

A gate optimized for the isolated system loses precision once the bath is
switched on.  `compare-schemes` runs the three variants with a shared seed:

    a  closed                   optimized and evaluated without the bath
    b  closed_field_on_open     the closed optimum replayed with the bath
    c  open                     optimized with the bath from the start

and `sweep-coupling` repeats b and c over a list of decay rates.
'''


if __name__ == '__main__':
    from thermoqc.demos.gibbs_relaxation import main
    main()
