"""Thermodynamic and geometric diagnostics of density matrices.

Entropies are in nats.  The entropy production rate is

    Sigma = -d/dt D(rho || rho_ia)
          = -tr(L[rho] log rho) + tr(L[rho] log rho_ia)

with rho_ia the instantaneous attractor of the generator L, held fixed over
the derivative.  It is non-negative for GKLS generators.
"""

import logging

from dataclasses import dataclass, field

import numpy as np

from scipy.integrate import cumulative_trapezoid
from scipy.special import entr

from thermoqc.dissipator import instantaneous_attractor
from thermoqc.errors import ContractError, InvalidStateError
from thermoqc.operators import Operator, as_array, matrix_function, pauli

__all__ = ['ThermoSample', 'TrajectoryRecord', 'CSV_COLUMNS', 'entropy',
           'relative_entropy', 'entropy_production_rate',
           'accumulate_entropy_production', 'purity', 'trace_distance',
           'bloch_vector', 'from_bloch', 'exchange_generators',
           'generalized_purity', 'sample_thermo']

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-6
CSV_COLUMNS = ('t', 'field', 'entropy', 'sigma_rate', 'sigma_acc', 'infidelity',
               'bx', 'by', 'bz', 'gen_purity')


def _state(rho):
    m = as_array(rho)
    tr = np.trace(m).real
    if abs(tr - 1) > TRACE_TOL:
        raise InvalidStateError(f'density matrix has trace {tr:.8f}')
    return m


def _log(rho):
    m = as_array(rho)
    return as_array(matrix_function(Operator((m + m.conj().T) / 2), 'log'))


def entropy(rho):
    """von Neumann entropy -tr(rho ln rho), with 0 ln 0 = 0.

    Raises
    ------
    InvalidStateError
        If the trace deviates from 1 by more than 1e-6.

    """
    m = _state(rho)
    p = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)
    return float(np.sum(entr(p)))


def relative_entropy(rho, sigma):
    """D(rho || sigma) = tr rho (ln rho - ln sigma)"""
    m = _state(rho)
    log_diff = _log(rho) - _log(sigma)
    return float(np.trace(m @ log_diff).real)


def entropy_production_rate(rho, generator, attractor=None):
    """Entropy production rate of the state under the generator.

        entropy_production_rate(rho, gen, attractor=None) -> nats / time

    A generator without dissipative channels produces no entropy and returns
    0 without looking for an attractor.  Otherwise the attractor is computed
    unless passed in.

    Raises
    ------
    AttractorMultiplicityError
        From the attractor search.

    """
    if not generator.dissipative:
        return 0.0

    if attractor is None:
        attractor = instantaneous_attractor(generator)

    drho = as_array(generator(rho))
    log_rho = _log(rho)
    log_ia = _log(attractor)
    return float(np.trace(drho @ (log_ia - log_rho)).real)


def accumulate_entropy_production(times, rates):
    """Running trapezoid integral of the entropy production rate, starting at 0."""
    return cumulative_trapezoid(np.asarray(rates, dtype=float), np.asarray(times, dtype=float), initial=0.0)


def purity(rho):
    m = as_array(rho)
    return float(np.trace(m @ m).real)


def trace_distance(rho, sigma):
    d = as_array(rho) - as_array(sigma)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2))))


def bloch_vector(rho):
    """(tr rho sx, tr rho sy, tr rho sz) of a qubit state."""
    m = as_array(rho)
    if m.shape != (2, 2):
        raise ContractError(f'bloch_vector needs a qubit state, got dim {m.shape[0]}')
    return np.array([np.trace(m @ pauli(axis).entries).real for axis in 'xyz'])


def from_bloch(r):
    """(I + r . sigma) / 2"""
    rx, ry, rz = r
    return Operator((np.eye(2) + rx * pauli('x').entries + ry * pauli('y').entries
                     + rz * pauli('z').entries) / 2)


def exchange_generators():
    """Pauli matrices of the {|01>, |10>} subspace of two qubits, embedded in dim 4."""
    generators = []
    for axis in 'xyz':
        g = np.zeros((4, 4), dtype=complex)
        g[1:3, 1:3] = pauli(axis).entries
        generators.append(Operator(g))
    return generators


def generalized_purity(rho):
    """Purity of the state projected on the exchange subspace algebra.

    sum_i <P_i>**2 over the embedded Pauli matrices of {|01>, |10>}, 1 for
    a pure state inside the subspace, 0 for states without support or
    coherence there.
    """
    m = as_array(rho)
    if m.shape != (4, 4):
        raise ContractError(f'generalized_purity needs a two qubit state, got dim {m.shape[0]}')
    return float(sum(np.trace(m @ g.entries).real ** 2 for g in exchange_generators()))


@dataclass(frozen=True)
class ThermoSample:
    t: float
    entropy: float
    sigma_rate: float
    sigma_accumulated: float
    purity: float
    field: float = 0.0
    infidelity: float | None = None
    bloch: tuple | None = None
    gen_purity: float | None = None

    def row(self):
        bx, by, bz = self.bloch if self.bloch is not None else (None, None, None)
        return (self.t, self.field, self.entropy, self.sigma_rate, self.sigma_accumulated,
                self.infidelity, bx, by, bz, self.gen_purity)


def sample_thermo(t, rho, generator=None, attractor=None, sigma_accumulated=0.0, field=0.0, target=None):
    """Collect the diagnostics of one state at one time."""
    m = as_array(rho)
    rate = 0.0 if generator is None else entropy_production_rate(rho, generator, attractor)
    infidelity = None if target is None else float(1 - np.trace(m @ as_array(target)).real)
    return ThermoSample(
        t=float(t),
        entropy=entropy(rho),
        sigma_rate=rate,
        sigma_accumulated=float(sigma_accumulated),
        purity=purity(rho),
        field=float(field),
        infidelity=infidelity,
        bloch=tuple(bloch_vector(rho)) if m.shape == (2, 2) else None,
        gen_purity=generalized_purity(rho) if m.shape == (4, 4) else None,
    )


@dataclass
class TrajectoryRecord:
    """Per step diagnostics of a protocol run, one ThermoSample per grid point."""
    samples: list = field(default_factory=list)

    def append(self, sample):
        if self.samples and not sample.t > self.samples[-1].t:
            raise ContractError(f'trajectory times must increase, got {sample.t} after {self.samples[-1].t}')
        self.samples.append(sample)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    def column(self, name):
        idx = CSV_COLUMNS.index(name)
        return [s.row()[idx] for s in self.samples]

    def rows(self):
        return [s.row() for s in self.samples]

    def summary(self):
        if not self.samples:
            return {}
        first, last = self.samples[0], self.samples[-1]
        return {
            'steps': len(self.samples) - 1,
            'entropy_initial': first.entropy,
            'entropy_final': last.entropy,
            'entropy_production_total': last.sigma_accumulated,
            'purity_final': last.purity,
            'infidelity_final': last.infidelity,
            'gen_purity_initial': first.gen_purity,
            'gen_purity_final': last.gen_purity,
        }
