"""The drive dressed GKLS generator.

The system couples to a bosonic bath through a Hermitian operator S.  The
coupling is expanded in the eigenoperators of the free propagator,
S = sum_k c_k F_k, and every eigenoperator becomes a jump operator whose rate
is the bath's kinetic coefficient at the eigenoperator's Bohr frequency

    L_t[rho] = -i [H_S(t), rho]
               + sum_j gamma_j(t) (F_j rho F_j^+ - 1/2 {F_j^+ F_j, rho}).

Two rate conventions are supported:

    'main_text'     gamma_j = k(omega_j)
    'appendix'      gamma_j = |c_j|**2 k(omega_j)

Rates follow detailed balance, k_up(omega) = k_down(omega) exp(-omega / T),
so the undriven generator relaxes to the Gibbs state.
"""

import logging

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable

import numpy as np

from thermoqc.errors import (AttractorMultiplicityError, ContractError, DissipatorError,
                             InvalidBathError)
from thermoqc.operators import Operator, as_array, hermitian_eigensystem
from thermoqc.propagation import (Superoperator, commutator_superoperator,
                                  dissipator_superoperator, unvec, vec)

__all__ = ['BathSpec', 'CouplingExpansion', 'GKLSGenerator', 'WEIGHT_MODES',
           'kinetic_coefficient', 'transition_rate', 'expand_coupling',
           'assemble_generator', 'instantaneous_attractor', 'static_decay_rate',
           'calibrate_bath']

logger = logging.getLogger(__name__)

WEIGHT_MODES = ('main_text', 'appendix')
COMPLETENESS_TOL = 1e-8
UNIQUENESS_RATIO = 1e3
KERNEL_FLOOR = 1e-12


@dataclass(frozen=True)
class BathSpec:
    """A bosonic bath at temperature T.

    temperature
        k_B T in atomic units, > 0.

    c
        Scale of the spectral density J(omega) = c omega**2.

    g
        System-bath coupling strength.

    coupling
        Hermitian system operator S.  None means the model's default, which
        the scenario fills in.

    spectral_density
        Optional replacement for the Ohmic J(omega).  Called with omega > 0.

    """
    temperature: float
    c: float = 1e4
    g: float = 1.0
    coupling: Operator | None = None
    spectral_density: Callable | None = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidBathError(f'Bath temperature must be positive, got {self.temperature}')
        if self.g ** 2 * self.c < 0:
            raise InvalidBathError(f'g**2 c must be non-negative, got {self.g ** 2 * self.c}')
        if self.coupling is not None and not self.coupling.hermitian:
            raise InvalidBathError('Bath coupling operator must be Hermitian')

    @property
    def strength(self):
        return self.g ** 2 * self.c

    @property
    def dissipative(self):
        return self.g != 0 and self.c != 0

    def density(self, omega):
        if self.spectral_density is None:
            return self.c * omega ** 2
        return self.spectral_density(omega)

    def with_coupling(self, coupling):
        return replace(self, coupling=coupling if isinstance(coupling, Operator) else Operator(coupling))


def kinetic_coefficient(omega, bath, direction):
    """Kinetic coefficient of the bath at Bohr frequency omega.

        kinetic_coefficient(omega, bath, 'up' | 'down') -> rate

    For omega > 0

        k_up   = g**2 omega J(omega) N(omega),     N = 1 / (exp(omega / T) - 1)
        k_down = g**2 omega J(omega) (N(omega) + 1)

    and for omega < 0 the two are swapped, so k_up / k_down = exp(-omega / T)
    for every omega.  Both vanish at omega = 0.
    """
    if not bath.temperature > 0:
        raise InvalidBathError(f'Bath temperature must be positive, got {bath.temperature}')
    if direction not in ('up', 'down'):
        raise ContractError(f'direction must be up or down, got {direction!r}')

    omega = float(omega)
    if omega == 0:
        return 0.0
    if omega < 0:
        return kinetic_coefficient(-omega, bath, 'down' if direction == 'up' else 'up')

    x = omega / bath.temperature
    base = (bath.g ** 2) * omega * bath.density(omega)
    if direction == 'up':
        return float(base / np.expm1(x))
    return float(base / -np.expm1(-x))


def transition_rate(omega, bath):
    """Rate of a jump with signed Bohr frequency omega, k_up(omega) raising and k_down(|omega|) lowering."""
    return kinetic_coefficient(omega, bath, 'up')


@dataclass(frozen=True)
class CouplingExpansion:
    """c_k = tr(F_k^+ S) = eta_k exp(-i lambda_k)"""
    coefficients: np.ndarray

    @property
    def eta(self):
        return np.abs(self.coefficients)

    @property
    def lambda_phase(self):
        return -np.angle(self.coefficients)

    def reconstruct(self, ops):
        return Operator(sum(c * as_array(f) for c, f in zip(self.coefficients, ops.ops)))


def expand_coupling(s, ops):
    """Expansion coefficients of S in an orthonormal eigenoperator basis.

    Raises
    ------
    ContractError
        If `ops` is not a complete orthonormal set.

    """
    s = as_array(s)
    dim = s.shape[0]
    if len(ops) != dim ** 2:
        raise ContractError(f'Need {dim ** 2} eigenoperators to expand S, got {len(ops)}')

    basis = np.column_stack([vec(f) for f in ops.ops])
    gram = basis.conj().T @ basis
    if np.max(np.abs(gram - np.eye(dim ** 2))) > COMPLETENESS_TOL:
        raise ContractError('Eigenoperators are not a complete orthonormal set')

    return CouplingExpansion(basis.conj().T @ vec(s))


@dataclass(frozen=True)
class GKLSGenerator:
    """-i [H, .] + sum_j gamma_j D[F_j], built on demand as a superoperator."""
    t: float
    hamiltonian: Operator
    rates: np.ndarray
    jumps: object
    weight_mode: str = 'appendix'

    @property
    def dim(self):
        return self.hamiltonian.dim

    @property
    def dissipative(self):
        return bool(np.any(self.rates > 0))

    @cached_property
    def superoperator(self):
        m = commutator_superoperator(self.hamiltonian)
        for rate, f in zip(self.rates, self.jumps.ops):
            if rate > 0:
                m = m + dissipator_superoperator(f, rate)
        return Superoperator(m)

    def __call__(self, rho):
        return self.superoperator.apply(rho)


def assemble_generator(t, hamiltonian, ops, bath, weight_mode='appendix'):
    """The GKLS generator of one time step.

        assemble_generator(t, H_S, ops, bath, weight_mode) -> GKLSGenerator

    Arguments:

        t               time, only stored
        hamiltonian     H_S(t)
        ops             EigenOperatorSet with Bohr frequencies of this step
        bath            BathSpec, its coupling operator is used in the
                        'appendix' mode
        weight_mode     'main_text' or 'appendix'

    Zero frequency channels get rate 0 and stay in the jump set.  A g = 0
    bath gives a purely unitary generator.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ContractError(f'Unknown weight mode {weight_mode!r}')

    hamiltonian = hamiltonian if isinstance(hamiltonian, Operator) else Operator(hamiltonian)
    rates = np.zeros(len(ops))
    if bath is not None and bath.dissipative:
        rates = np.array([transition_rate(w, bath) for w in ops.omegas])
        if weight_mode == 'appendix':
            if bath.coupling is None:
                raise ContractError('appendix weight mode needs a bath coupling operator')
            rates = rates * expand_coupling(bath.coupling, ops).eta ** 2

    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise DissipatorError(f'invalid kinetic coefficients at t={t}: {rates}')

    return GKLSGenerator(t, hamiltonian, rates, ops, weight_mode)


def instantaneous_attractor(generator):
    """The state annihilated by the generator.

        instantaneous_attractor(gen) -> Operator

    The generator must have a single zero eigenvalue: the second smallest
    eigenvalue magnitude has to exceed the smallest by a factor 1000.

    Raises
    ------
    AttractorMultiplicityError
        If the kernel is degenerate, with the kernel dimension and the
        smallest eigenvalues attached.

    """
    lmat = generator.superoperator.matrix if isinstance(generator, GKLSGenerator) else np.asarray(generator)
    dim = int(round(np.sqrt(lmat.shape[0])))
    scale = max(float(np.max(np.abs(lmat))), np.finfo(float).tiny)

    evals = np.linalg.eigvals(lmat)
    order = np.argsort(np.abs(evals))
    smallest = np.abs(evals[order])
    threshold = max(UNIQUENESS_RATIO * smallest[0], KERNEL_FLOOR * scale)
    if smallest[1] <= threshold:
        kernel = int(np.count_nonzero(smallest <= threshold))
        raise AttractorMultiplicityError(f'generator kernel has dimension {kernel}',
                                         dimension=kernel, eigenvalues=evals[order[:kernel + 1]].tolist())

    # L x = 0 with tr x = 1
    bordered = np.vstack([lmat, vec(np.eye(dim))[None, :]])
    rhs = np.zeros(dim ** 2 + 1, dtype=complex)
    rhs[-1] = 1
    x, *_ = np.linalg.lstsq(bordered, rhs, rcond=None)
    rho = unvec(x, dim)
    rho = (rho + rho.conj().T) / 2
    return Operator(rho / np.trace(rho).real)


def static_decay_rate(drift, bath, coupling=None, weight_mode='appendix'):
    """Gamma = k_up + k_down of the lowest transition of the undriven drift.

    In 'appendix' mode the rates carry |<1|S|0>|**2 of the two lowest
    eigenstates.
    """
    evals, evecs = hermitian_eigensystem(drift)
    omega = evals[1] - evals[0]
    if omega <= 0:
        raise DissipatorError('lowest transition of the drift is degenerate')

    gamma = kinetic_coefficient(omega, bath, 'up') + kinetic_coefficient(omega, bath, 'down')
    if weight_mode == 'appendix':
        s = coupling if coupling is not None else bath.coupling
        if s is None:
            raise ContractError('appendix weight mode needs a bath coupling operator')
        v = evecs.entries
        gamma *= abs(v[:, 1].conj() @ as_array(s) @ v[:, 0]) ** 2

    return gamma


def calibrate_bath(bath, drift, gamma, weight_mode='appendix'):
    """Rescale c so that static_decay_rate(drift, bath) equals gamma."""
    if not gamma > 0:
        raise InvalidBathError(f'Decay rate must be positive, got {gamma}')

    current = static_decay_rate(drift, bath, weight_mode=weight_mode)
    if current == 0:
        raise DissipatorError('cannot calibrate a bath that does not drive the lowest transition')

    calibrated = replace(bath, c=bath.c * gamma / current)
    logger.debug(f'calibrated bath c={calibrated.c:.6e} for Gamma={gamma:.3e}')
    return calibrated
