"""CRAB control fields, objectives and the optimization loop.

The control field is a Gaussian envelope times a sum of sines

    eps(t) = exp(-((t - tau / 2) / (2 sigma))**2) sum_k c_k sin(nu_k t)

with frequencies nu_k = 2 pi k / tau (1 + delta_k) drawn per restart.  One
optimization step is

    1. guess the coefficients c_k
    2. propagate the free unitary U(t) under H_S(t) = H_0 + eps(t) V
    3. diagonalize U(t) and build the eigenoperators and Bohr frequencies
    4. assemble the GKLS generator of every step and propagate the probes
    5. evaluate the objective and let BFGS pick the next coefficients

`optimize` repeats this from many seeded starting points.
"""

import logging

from dataclasses import dataclass, replace
from math import isfinite

import numpy as np

from pgcooldown import Cooldown
from scipy.integrate import trapezoid
from scipy.optimize import minimize

from thermoqc.dissipator import (BathSpec, assemble_generator, calibrate_bath,
                                 instantaneous_attractor)
from thermoqc.eigenflow import build_eigenflow, build_eigenoperators
from thermoqc.ensemble import Ensemble, ProbeLog, ProbeState, propagate_system
from thermoqc.errors import (AttractorMultiplicityError, ContractError, DissipatorError,
                             PropagationError, UndersampledGridError)
from thermoqc.operators import (ModelSpec, Operator, as_array, control_operator,
                                coupling_operator, drift_hamiltonian, gibbs_state, pauli)
from thermoqc.propagation import (TimeGrid, conjugation_superoperator, newton_plan,
                                  propagate_unitary)
from thermoqc.thermo import (TrajectoryRecord, ThermoSample, accumulate_entropy_production,
                             entropy, sample_thermo)

__all__ = ['ControlField', 'Objective', 'OptimizerConfig', 'OptimizationReport',
           'Scenario', 'SchemeResult', 'TASKS', 'SCHEMES', 'eval_field',
           'draw_frequencies', 'random_field', 'field_energy', 'objective_value',
           'probe_set', 'run_protocol', 'multistart_minimize', 'optimize',
           'map_tomography', 'transfer_matrix_of_unitary', 'apply_transfer_matrix',
           'make_scenario', 'run_scheme', 'RESET_TARGET', 'RESET_TRANSFER_MATRIX',
           'HADAMARD_UNITARY', 'HADAMARD_TRANSFER_MATRIX', 'SQRT_SWAP_UNITARY']

logger = logging.getLogger(__name__)

TASKS = ('heat', 'cool', 'reset', 'hadamard', 'sqrt_swap', 'custom_map')
SCHEMES = ('closed', 'open', 'closed_field_on_open')
OBJECTIVE_KINDS = ('max_entropy', 'min_entropy', 'state_overlap', 'map_overlap')

MAX_REFINEMENTS = 3
FAILED_VALUE = 1e3
FD_STEP = 1e-6
CLAMP_TOL = 1e-9

RESET_TARGET = Operator((np.eye(2) - pauli('x').entries) / 2)
RESET_TRANSFER_MATRIX = np.array([[1, 0, 0, 0],
                                  [-1, 0, 0, 0],
                                  [0, 0, 0, 0],
                                  [0, 0, 0, 0]], dtype=float)
HADAMARD_UNITARY = Operator((pauli('x').entries - pauli('z').entries) / np.sqrt(2))
HADAMARD_TRANSFER_MATRIX = np.array([[1, 0, 0, 0],
                                     [0, 0, 0, -1],
                                     [0, 0, -1, 0],
                                     [0, -1, 0, 0]], dtype=float)
SQRT_SWAP_UNITARY = Operator([[1, 0, 0, 0],
                              [0, (1 + 1j) / 2, (1 - 1j) / 2, 0],
                              [0, (1 - 1j) / 2, (1 + 1j) / 2, 0],
                              [0, 0, 0, 1]])


@dataclass(frozen=True)
class ControlField:
    """A CRAB field.

    tau
        Protocol duration, the field is defined on [0, tau].

    sigma
        Envelope width.

    freqs, coeffs
        The M frequencies nu_k and coefficients c_k.

    """
    tau: float
    sigma: float
    freqs: tuple
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, 'freqs', tuple(float(f) for f in self.freqs))
        object.__setattr__(self, 'coeffs', tuple(float(c) for c in self.coeffs))
        if not self.tau > 0:
            raise ContractError(f'Field duration must be positive, got {self.tau}')
        if not self.sigma > 0:
            raise ContractError(f'Envelope width must be positive, got {self.sigma}')
        if len(self.freqs) < 1 or len(self.freqs) != len(self.coeffs):
            raise ContractError(f'Need M >= 1 frequencies and as many coefficients, '
                                f'got {len(self.freqs)} and {len(self.coeffs)}')

    @property
    def m(self):
        return len(self.freqs)

    def with_coeffs(self, coeffs):
        return replace(self, coeffs=tuple(coeffs))

    def __call__(self, t):
        return eval_field(self, t)

    def to_dict(self):
        return {'tau': self.tau, 'sigma': self.sigma, 'freqs': list(self.freqs), 'coeffs': list(self.coeffs)}

    @classmethod
    def from_dict(cls, d):
        return cls(d['tau'], d['sigma'], d['freqs'], d['coeffs'])


def eval_field(field, t):
    """The field value at time t, scalar or array.

    Times outside [0, tau] are clamped to the interval with a warning.
    """
    t_arr = np.asarray(t, dtype=float)
    lo, hi = 0.0, field.tau
    if np.any(t_arr < lo - CLAMP_TOL * hi) or np.any(t_arr > hi * (1 + CLAMP_TOL)):
        logger.warning(f'field evaluated outside [0, {hi:g}], clamping')
    t_arr = np.clip(t_arr, lo, hi)

    envelope = np.exp(-((t_arr - field.tau / 2) / (2 * field.sigma)) ** 2)
    nu = np.asarray(field.freqs)
    c = np.asarray(field.coeffs)
    value = envelope * (np.sin(np.multiply.outer(t_arr, nu)) @ c)
    return float(value) if np.ndim(value) == 0 else value


def draw_frequencies(m, tau, rng, spread=0.1):
    """nu_k = 2 pi k / tau (1 + delta_k), delta_k uniform in [-spread, spread]."""
    k = np.arange(1, m + 1)
    return 2 * np.pi * k / tau * (1 + rng.uniform(-spread, spread, size=m))


def random_field(m, tau, sigma, amplitude, rng, grid=None, spread=0.1):
    """A random field whose largest value on the grid is `amplitude`."""
    freqs = draw_frequencies(m, tau, rng, spread)
    coeffs = rng.uniform(-1, 1, size=m)
    field = ControlField(tau, sigma, freqs, coeffs)
    times = grid.times if grid is not None else np.linspace(0, tau, 1001)
    peak = np.max(np.abs(eval_field(field, times)))
    if peak == 0:
        return field
    return field.with_coeffs(coeffs * amplitude / peak)


def field_energy(field, grid):
    """int eps(t)**2 dt over the grid."""
    times = grid.times
    return float(trapezoid(eval_field(field, times) ** 2, times))


@dataclass(frozen=True)
class Objective:
    """What a protocol should achieve.

    kind
        'max_entropy', 'min_entropy', 'state_overlap' or 'map_overlap'.

    probes
        Initial states.  Entropy objectives use a single one.

    targets
        Target states for the overlap objectives, one per probe.

    penalty
        Weight lambda of an optional lambda int eps**2 dt term.

    """
    kind: str
    probes: tuple
    targets: tuple = ()
    penalty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'probes', tuple(p if isinstance(p, Operator) else Operator(p) for p in self.probes))
        object.__setattr__(self, 'targets', tuple(p if isinstance(p, Operator) else Operator(p) for p in self.targets))
        if self.kind not in OBJECTIVE_KINDS:
            raise ContractError(f'Unknown objective kind {self.kind!r}')
        if not self.probes:
            raise ContractError('Objective needs at least one probe state')
        if self.kind in ('state_overlap', 'map_overlap') and len(self.targets) != len(self.probes):
            raise ContractError(f'{len(self.probes)} probes but {len(self.targets)} targets')
        if self.kind == 'map_overlap':
            dim = self.probes[0].dim
            gram = np.array([[np.vdot(as_array(a), as_array(b)) for b in self.probes] for a in self.probes])
            rank = np.linalg.matrix_rank(gram, tol=1e-10)
            if rank < dim ** 2 and not _spans_subspace(self.probes):
                raise ContractError(f'map objective needs a complete probe set, rank {rank} < {dim ** 2}')


def _spans_subspace(probes):
    """True if the probes are complete on the subspace they are supported on."""
    support = sum(as_array(p) for p in probes)
    evals = np.linalg.eigvalsh((support + support.conj().T) / 2)
    d = int(np.count_nonzero(evals > 1e-10))
    gram = np.array([[np.vdot(as_array(a), as_array(b)) for b in probes] for a in probes])
    return np.linalg.matrix_rank(gram, tol=1e-10) >= d ** 2


def objective_value(obj, final_states, field=None, grid=None):
    """Value to be minimized.

        max_entropy     ln N - S(rho_f)
        min_entropy     S(rho_f)
        *_overlap       1 - (1 / K) sum_k tr(rho_f,k target_k)

    Entropy objectives average over the final states.  A positive penalty
    adds penalty * int eps**2 dt, which needs `field` and `grid`.

    Raises
    ------
    ContractError
        If the number of final states differs from the number of probes.

    """
    if len(final_states) != len(obj.probes):
        raise ContractError(f'{len(final_states)} final states for {len(obj.probes)} probes')

    match obj.kind:
        case 'max_entropy':
            dim = as_array(final_states[0]).shape[0]
            value = float(np.mean([np.log(dim) - entropy(rho) for rho in final_states]))
        case 'min_entropy':
            value = float(np.mean([entropy(rho) for rho in final_states]))
        case _:
            overlaps = [np.trace(as_array(rho) @ as_array(target)).real
                        for rho, target in zip(final_states, obj.targets)]
            value = float(1 - np.sum(overlaps) / len(overlaps))

    if obj.penalty and field is not None and grid is not None:
        value += obj.penalty * field_energy(field, grid)

    return value


def _projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return Operator(np.outer(psi, psi.conj()))


def probe_set(kind):
    """An informationally complete set of pure probe states.

    'qubit'         |0>, |1>, |+>, |+i>
    'two_qubit'     the 16 products of the qubit probes
    'exchange'      the qubit probes inside span{|01>, |10>}
    """
    s = 1 / np.sqrt(2)
    qubit = [[1, 0], [0, 1], [s, s], [s, 1j * s]]
    match kind:
        case 'qubit':
            return [_projector(psi) for psi in qubit]
        case 'two_qubit':
            return [_projector(np.kron(a, b)) for a in qubit for b in qubit]
        case 'exchange':
            return [_projector([0, a, b, 0]) for a, b in qubit]
        case _:
            raise ContractError(f'Unknown probe set {kind!r}')


def transfer_matrix_of_unitary(u):
    """R_ij = tr(s_i U s_j U^+) / 2 in the {I, sx, sy, sz} basis."""
    u = as_array(u)
    basis = [pauli(a).entries for a in 'ixyz']
    return np.array([[np.trace(si @ u @ sj @ u.conj().T).real / 2 for sj in basis] for si in basis])


def apply_transfer_matrix(r, rho):
    """Apply a qubit transfer matrix to a state."""
    m = as_array(rho)
    basis = [pauli(a).entries for a in 'ixyz']
    coords = np.array([np.trace(m @ s).real for s in basis])
    out = np.asarray(r) @ coords
    return Operator(sum(c * s for c, s in zip(out, basis)) / 2)


@dataclass(frozen=True)
class Scenario:
    """Everything a protocol run needs besides the field.

    A scenario without bath, or with a g = 0 bath, is propagated as a closed
    system.
    """
    task: str
    model: ModelSpec
    drift: Operator
    control: Operator
    grid: TimeGrid
    objective: Objective
    bath: BathSpec | None = None
    weight_mode: str = 'appendix'

    @property
    def dissipative(self):
        return self.bath is not None and self.bath.dissipative

    @property
    def probes(self):
        return self.objective.probes

    def closed(self):
        return replace(self, bath=None)

    def hamiltonian(self, field, t):
        return Operator(self.drift.entries + eval_field(field, t) * self.control.entries)


class _ConjugationStep:
    """U . U^+ for one step, usable in place of a Newton plan."""

    def __init__(self, u_step):
        self.matrix = conjugation_superoperator(u_step)

    def apply(self, v):
        return self.matrix @ v


def _record_system(dt, eid, state, log, *, t, generator, attractor, field_value, target, **kwargs):
    rho = state.rho
    log.samples.append(sample_thermo(t, rho, generator, attractor, field=field_value, target=target.get(eid)))
    log.states.append(rho)


def _setup_ensemble(ens, scenario, record):
    ens.reset()
    targets = scenario.objective.targets
    for k, probe in enumerate(scenario.probes):
        comps = {'state': ProbeState.of(probe)}
        if record:
            comps['log'] = ProbeLog()
        if targets:
            comps['target'] = targets[k]
        ens.create_probe(tag=k, components=comps)

    ens.add_system(propagate_system, 'state')
    ens.add_system_to_domain('propagate', propagate_system)
    if record:
        ens.add_system(_record_system, 'state', 'log')
        ens.add_system_to_domain('record', _record_system)
    assert ens.healthcheck()
    return ens


def _record(ens, scenario, field, t, generator, dt):
    attractor = None
    if generator is not None and generator.dissipative:
        attractor = instantaneous_attractor(generator)
    targets = {eid: target for eid, (target,) in ens.eids_by_cids('target')}
    ens.run_domain(dt, 'record', t=t, generator=generator, attractor=attractor,
                   field_value=eval_field(field, t), target=targets)


def _collect(ens, scenario, field):
    """Merge the per probe logs into one trajectory.

    Scalars are averaged over the probes, the Bloch vector is the first
    probe's and the infidelity column is the objective at that time.
    """
    probe_logs = [ens.comp_of_eid(k, 'log') for k in range(len(scenario.probes))]
    logs = [log.samples for log in probe_logs]
    times = np.array([s.t for s in logs[0]])
    rates = np.mean([[s.sigma_rate for s in samples] for samples in logs], axis=0)
    accumulated = accumulate_entropy_production(times, rates)

    record = TrajectoryRecord()
    for k, t in enumerate(times):
        per_probe = [samples[k] for samples in logs]
        states = [log.states[k] for log in probe_logs]
        gen_purity = per_probe[0].gen_purity
        record.append(ThermoSample(
            t=float(t),
            entropy=float(np.mean([s.entropy for s in per_probe])),
            sigma_rate=float(rates[k]),
            sigma_accumulated=float(accumulated[k]),
            purity=float(np.mean([s.purity for s in per_probe])),
            field=per_probe[0].field,
            infidelity=objective_value(scenario.objective, states),
            bloch=per_probe[0].bloch,
            gen_purity=None if gen_purity is None else float(np.mean([s.gen_purity for s in per_probe])),
        ))
    return record


def _run_on_grid(ens, field, scenario, grid, record):
    dt = grid.dt
    unitaries = propagate_unitary(lambda t: scenario.hamiltonian(field, t), grid)
    _setup_ensemble(ens, scenario, record)
    times = grid.times

    if not scenario.dissipative:
        for k in range(grid.n_steps):
            if record:
                _record(ens, scenario, field, times[k], None, dt)
            step = as_array(unitaries[k + 1]) @ as_array(unitaries[k]).conj().T
            ens.run_domain(dt, 'propagate', plan=_ConjugationStep(step))
        if record:
            _record(ens, scenario, field, times[-1], None, dt)
        return ens

    flow = build_eigenflow(unitaries, grid, scenario.hamiltonian(field, grid.t0))
    for k, t_mid in enumerate(grid.midpoints):
        ops = build_eigenoperators(flow, k)
        gen = assemble_generator(t_mid, scenario.hamiltonian(field, t_mid), ops,
                                 scenario.bath, scenario.weight_mode)
        if record:
            _record(ens, scenario, field, times[k], gen, dt)
        ens.run_domain(dt, 'propagate', plan=newton_plan(gen.superoperator, dt))

    if record:
        ops = build_eigenoperators(flow, grid.n_steps)
        gen = assemble_generator(times[-1], scenario.hamiltonian(field, times[-1]), ops,
                                 scenario.bath, scenario.weight_mode)
        _record(ens, scenario, field, times[-1], gen, dt)
    return ens


def run_protocol(field, scenario, record=True):
    """Propagate all probes of the scenario under the field.

        run_protocol(field, scenario, record=True) -> (final_states, TrajectoryRecord | None)

    The free unitary is propagated first, its eigenflow gives the jump
    operators and Bohr frequencies, and every step's GKLS generator then
    propagates the probes.  Closed scenarios skip the dissipator and conjugate
    the probes with the step unitaries.

    When the eigenphases are undersampled the step count is doubled, at
    most three times.
    """
    grid = scenario.grid
    ens = Ensemble()
    for attempt in range(MAX_REFINEMENTS + 1):
        try:
            _run_on_grid(ens, field, scenario, grid, record)
            break
        except UndersampledGridError as e:
            if attempt == MAX_REFINEMENTS:
                raise
            logger.warning(f'{e}, refining grid to {2 * grid.n_steps} steps')
            grid = grid.refined()

    final_states = ens.states()
    trajectory = _collect(ens, scenario, field) if record else None
    return final_states, trajectory


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the multi-start search.

    m               number of CRAB frequencies
    restarts        number of seeded starting points
    seed            base seed, restart i uses the seed sequence (seed, i)
    max_evals       objective evaluations per restart
    sigma           envelope width, tau / 8 if None
    spread          relative jitter of the frequencies
    amplitude       peak of the initial fields, Delta of the model if None
    penalty         weight of the field energy penalty
    gtol            BFGS gradient tolerance
    target_value    stop all restarts once the objective is this small
    time_budget     wall clock seconds for the whole search, None for no limit
    log_interval    seconds between progress messages
    """
    m: int = 20
    restarts: int = 64
    seed: int = 0
    max_evals: int = 2000
    sigma: float | None = None
    spread: float = 0.1
    amplitude: float | None = None
    penalty: float = 0.0
    gtol: float = 1e-10
    target_value: float = 1e-12
    time_budget: float | None = None
    log_interval: float = 5.0


@dataclass
class OptimizationReport:
    best_coeffs: tuple
    best_value: float
    restart_values: list
    evaluations: int
    converged: bool
    best_field: ControlField | None = None
    best_context: object = None

    def as_dict(self):
        return {
            'best_value': self.best_value,
            'best_coeffs': list(self.best_coeffs),
            'restart_values': list(self.restart_values),
            'evaluations': self.evaluations,
            'converged': self.converged,
        }


class _BudgetExhausted(Exception):
    pass


class _BudgetedObjective:
    """Counts evaluations, remembers the best point and supplies central difference gradients."""

    def __init__(self, fun, max_evals, progress):
        self.fun = fun
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_value = np.inf
        self.progress = progress

    def __call__(self, x):
        if self.evals >= self.max_evals:
            raise _BudgetExhausted
        self.evals += 1
        try:
            value = float(self.fun(x))
        except (PropagationError, UndersampledGridError, AttractorMultiplicityError, DissipatorError) as e:
            logger.debug(f'evaluation failed: {e}')
            value = FAILED_VALUE
        if not isfinite(value):
            value = FAILED_VALUE
        if value < self.best_value:
            self.best_value = value
            self.best_x = np.array(x, dtype=float)
        if self.progress.cold():
            self.progress.reset()
            logger.info(f'{self.evals} evaluations, best {self.best_value:.6e}')
        return value

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        grad = np.empty_like(x)
        for k in range(x.size):
            h = FD_STEP * (1 + abs(x[k]))
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            grad[k] = (self(xp) - self(xm)) / (2 * h)
        return grad


def multistart_minimize(factory, restarts, seed=0, max_evals=2000, gtol=1e-10,
                        target_value=1e-12, time_budget=None, log_interval=5.0):
    """Seeded multi-start BFGS with finite difference gradients.

        multistart_minimize(factory, restarts, ...) -> OptimizationReport

    Arguments:

        factory         called as factory(rng) per restart, returns
                        (fun, x0, context)
        restarts        number of starting points
        seed            restart i draws from np.random.default_rng([seed, i])
        max_evals       evaluation budget per restart, gradients included
        target_value    stop early once reached
        time_budget     wall clock limit in seconds for all restarts

    The report carries the best x as `best_coeffs` and the context of the
    restart that produced it.  `converged` is True if any restart ended with
    a successful BFGS exit or reached `target_value`.
    """
    deadline = Cooldown(time_budget) if time_budget else None
    best_x, best_value, best_context = None, np.inf, None
    values = []
    evaluations = 0
    converged = False

    for i in range(restarts):
        if i and deadline is not None and deadline.cold():
            logger.warning(f'time budget of {time_budget}s used up after {i} restarts')
            break

        rng = np.random.default_rng([seed, i])
        fun, x0, context = factory(rng)
        counted = _BudgetedObjective(fun, max_evals, Cooldown(log_interval))
        success = False
        try:
            first = counted(x0)
            if first <= target_value:
                success = True
            else:
                res = minimize(counted, np.asarray(x0, dtype=float), jac=counted.gradient, method='BFGS',
                               options={'gtol': gtol, 'maxiter': max_evals})
                success = bool(res.success)
        except _BudgetExhausted:
            logger.warning(f'restart {i} hit its budget of {max_evals} evaluations')

        evaluations += counted.evals
        value = counted.best_value
        success = success or value <= target_value
        values.append(value)
        logger.info(f'restart {i}: value {value:.6e} after {counted.evals} evaluations')
        converged = converged or success

        if value < best_value:
            best_x, best_value, best_context = counted.best_x, value, context
        if best_value <= target_value:
            break

    best = tuple(best_x.tolist()) if best_x is not None else ()
    return OptimizationReport(best, float(best_value), values, evaluations, converged, best_context=best_context)


def _amplitude(scenario, config):
    return config.amplitude if config.amplitude is not None else scenario.model.delta


def optimize(objective, scenario, config=None):
    """Search the CRAB coefficients that minimize the objective.

        optimize(objective, scenario, config) -> OptimizationReport

    Each restart draws its own frequencies and starting coefficients, scaled
    so the initial field peaks at the amplitude (Delta by default).  BFGS
    then runs on the coefficients in units of that amplitude.
    """
    config = config or OptimizerConfig()
    scenario = replace(scenario, objective=objective)
    grid = scenario.grid
    tau = grid.t1 - grid.t0
    sigma = config.sigma if config.sigma is not None else tau / 8
    amplitude = _amplitude(scenario, config)
    obj = replace(objective, penalty=config.penalty) if config.penalty else objective

    def factory(rng):
        start = random_field(config.m, tau, sigma, amplitude, rng, grid, config.spread)

        def fun(x):
            f = start.with_coeffs(np.asarray(x) * amplitude)
            states, _ = run_protocol(f, scenario, record=False)
            return objective_value(obj, states, f, grid)

        return fun, np.asarray(start.coeffs) / amplitude, start

    report = multistart_minimize(factory, config.restarts, config.seed, config.max_evals,
                                 config.gtol, config.target_value, config.time_budget,
                                 config.log_interval)
    if report.best_context is not None:
        report.best_coeffs = tuple(c * amplitude for c in report.best_coeffs)
        report.best_field = report.best_context.with_coeffs(report.best_coeffs)
    return report


def map_tomography(field, scenario):
    """Transfer matrix of the qubit map produced by the field.

        map_tomography(field, scenario) -> ndarray (4 x 4)

    The probes |0>, |1>, |+>, |+i> are propagated and the map on I, sx, sy
    and sz follows by linearity.  R_ij = tr(s_i Lambda(s_j)) / 2.
    """
    if scenario.model.dim != 2 or scenario.model.kind != 'spin_j':
        raise ContractError('map_tomography needs a qubit scenario')

    probes = probe_set('qubit')
    tomo = replace(scenario, objective=Objective('map_overlap', probes, probes))
    states, _ = run_protocol(field, tomo, record=False)
    zero, one, plus, plus_i = (as_array(s) for s in states)
    images = [zero + one]
    images.append(2 * plus - images[0])
    images.append(2 * plus_i - images[0])
    images.append(zero - one)

    basis = [pauli(a).entries for a in 'ixyz']
    return np.array([[np.trace(si @ img).real / 2 for img in images] for si in basis])


def _task_objective(task, model, bath_temperature, transfer_matrix=None, penalty=0.0):
    drift = drift_hamiltonian(model)
    match task:
        case 'heat' | 'cool':
            rho0 = gibbs_state(drift, bath_temperature)
            kind = 'max_entropy' if task == 'heat' else 'min_entropy'
            return Objective(kind, (rho0,), penalty=penalty)
        case 'reset':
            probes = probe_set('qubit')
            return Objective('map_overlap', probes, tuple(RESET_TARGET for _ in probes), penalty)
        case 'hadamard':
            probes = probe_set('qubit')
            u = HADAMARD_UNITARY
            return Objective('map_overlap', probes, tuple(u @ p @ u.dagger() for p in probes), penalty)
        case 'sqrt_swap':
            probes = probe_set('exchange')
            u = SQRT_SWAP_UNITARY
            return Objective('map_overlap', probes, tuple(u @ p @ u.dagger() for p in probes), penalty)
        case 'custom_map':
            if transfer_matrix is None:
                raise ContractError('custom_map needs a transfer matrix')
            probes = probe_set('qubit')
            return Objective('map_overlap', probes,
                             tuple(apply_transfer_matrix(transfer_matrix, p) for p in probes), penalty)
        case _:
            raise ContractError(f'Unknown task {task!r}')


GATE_TASKS = ('hadamard', 'sqrt_swap', 'custom_map')
DEFAULT_GAMMA_FACTOR = 1e-4


def make_scenario(config):
    """Build the Scenario described by a ScenarioConfig.

    Gate tasks calibrate the bath so the undriven lowest transition decays
    with Gamma = 1e-4 Delta unless `bath.gamma_au` says otherwise.  Entropy
    and reset tasks use the bath as given unless `bath.gamma_au` is set.
    """
    mc, bc, fc = config.model, config.bath, config.field
    model = ModelSpec(mc.kind, mc.dim, mc.delta_au, mc.u_au, mc.omega1_au, mc.omega2_au)
    if config.task in ('reset', 'hadamard', 'custom_map') and (model.kind != 'spin_j' or model.dim != 2):
        raise ContractError(f'task {config.task} needs a qubit model')
    if config.task == 'sqrt_swap' and model.kind != 'two_qubit':
        raise ContractError('task sqrt_swap needs the two_qubit model')

    drift = drift_hamiltonian(model)
    temperature = bc.temperature_au if bc.temperature_au is not None else model.delta
    tau = fc.tau_au if fc.tau_au is not None else model.period
    steps = max(1, int(round(fc.steps_per_period * tau / model.period)))
    grid = TimeGrid(0.0, tau, steps)

    bath = BathSpec(temperature, bc.c_au, bc.g_au, coupling_operator(model))
    gamma = bc.gamma_au
    if gamma is None and config.task in GATE_TASKS:
        gamma = DEFAULT_GAMMA_FACTOR * model.delta
    if gamma is not None and bath.dissipative:
        bath = calibrate_bath(bath, drift, gamma, bc.rate_mode)

    objective = _task_objective(config.task, model, temperature, config.transfer_matrix, fc.penalty)
    return Scenario(config.task, model, drift, control_operator(model), grid, objective, bath, bc.rate_mode)


@dataclass
class SchemeResult:
    """Outcome of one of the three gate schemes."""
    scheme: str
    report: OptimizationReport
    field: ControlField
    value: float
    trajectory: TrajectoryRecord | None = None


def run_scheme(scheme, scenario, config=None, closed_report=None, record=True):
    """Optimize and evaluate one scheme.

    'closed'                    optimize and evaluate without the bath
    'open'                      optimize and evaluate with the bath
    'closed_field_on_open'      optimize without the bath, evaluate with it

    A finished closed optimization can be passed as `closed_report` so the
    closed and the replayed scheme share it.
    """
    if scheme not in SCHEMES:
        raise ContractError(f'Unknown scheme {scheme!r}')

    if scheme == 'open':
        report = optimize(scenario.objective, scenario, config)
    else:
        report = closed_report or optimize(scenario.objective, scenario.closed(), config)

    target = scenario.closed() if scheme == 'closed' else scenario
    states, trajectory = run_protocol(report.best_field, target, record=record)
    value = objective_value(target.objective, states)
    return SchemeResult(scheme, report, report.best_field, value, trajectory)
