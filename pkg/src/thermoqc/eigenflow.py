"""Eigenvectors, eigenphases and Bohr frequencies of the free propagator.

The free propagator U(t) of the driven system is diagonalized on every grid
point,

    U(t) |phi_n(t)> = exp(-i eps_n(t)) |phi_n(t)>,

the eigenvectors are labelled continuously in time and the eigenphases are
unwrapped by integrating their rate.  The eigenoperators

    F_(n, m)(t) = |phi_n(t)><phi_m(t)|

then obey U F U^+ = exp(-i theta) F with theta = eps_n - eps_m, and the
Bohr frequency of F is d theta / dt.
"""

import logging

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from scipy.optimize import linear_sum_assignment

from thermoqc.errors import ContractError, UndersampledGridError
from thermoqc.operators import Operator, as_array, hermitian_eigensystem

__all__ = ['EigenFlow', 'EigenOperatorSet', 'diagonalize_unitary', 'match_labels',
           'retrieve_phase', 'phase_rate', 'build_eigenflow', 'build_eigenoperators']

logger = logging.getLogger(__name__)

UNITARY_CHECK_TOL = 1e-10
AMBIGUITY_TOL = 1e-6
DEGENERACY_TOL = 1e-6
MODULUS_TOL = 1e-6


def _wrap(angle):
    """Map angles into (-pi, pi]."""
    wrapped = np.angle(np.exp(1j * np.asarray(angle)))
    return np.where(wrapped <= -np.pi, wrapped + 2 * np.pi, wrapped)


def diagonalize_unitary(u):
    """Eigenphases and orthonormal eigenvectors of a unitary.

        diagonalize_unitary(U) -> (phases, Operator)

    The phases are -arg(lambda) in (-pi, pi].  A complex Schur form is
    used, which is diagonal for normal matrices, so the eigenvectors come out
    orthonormal even for degenerate eigenvalues.

    Raises
    ------
    ContractError
        If U is not unitary to 1e-10.

    """
    m = as_array(u)
    defect = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
    if defect > UNITARY_CHECK_TOL:
        raise ContractError(f'diagonalize_unitary needs a unitary, defect {defect:.2e}')

    t, z = scipy.linalg.schur(m, output='complex')
    phases = _wrap(-np.angle(np.diag(t)))
    return phases, Operator(z)


def match_labels(prev_vectors, new_vectors):
    """Relabel new eigenvectors to follow the previous ones.

        match_labels(prev, new) -> (permutation, Operator)

    The permutation maximizes the summed squared overlaps and is found with
    the Hungarian method.  `permutation[n]` is the column of `new` that
    continues label n.  Every matched vector is rotated by a global phase so
    that <prev_n|new_n> is real and positive.

    Rows where the two best overlaps are within 1e-6 are logged as ambiguous
    and left to the assignment.
    """
    prev = as_array(prev_vectors)
    new = as_array(new_vectors)
    if prev.shape != new.shape:
        raise ContractError(f'Cannot match {prev.shape} against {new.shape} eigenvectors')

    overlap = prev.conj().T @ new
    weight = np.abs(overlap) ** 2
    rows, perm = linear_sum_assignment(weight, maximize=True)

    if weight.shape[1] > 1:
        top2 = np.sort(weight, axis=1)[:, -2:]
        ambiguous = np.nonzero(top2[:, 1] - top2[:, 0] < AMBIGUITY_TOL)[0]
        if ambiguous.size:
            logger.warning(f'ambiguous eigenvector match for labels {ambiguous.tolist()}')

    matched = new[:, perm]
    phase = overlap[rows, perm]
    fix = np.ones_like(phase)
    nonzero = np.abs(phase) > 0
    fix[nonzero] = np.abs(phase[nonzero]) / phase[nonzero]
    return perm, Operator(matched * fix)


def _phase_increments(f_samples):
    """theta increments between samples, theta = -arg f.

    Raises UndersampledGridError for a step of pi / 2 or more.
    """
    f = np.asarray(f_samples, dtype=complex)
    inc = -np.angle(f[1:] * f[:-1].conj())
    bad = np.argwhere(np.abs(inc) >= np.pi / 2)
    if bad.size:
        k = int(bad[0][0])
        step = float(inc[tuple(bad[0])])
        raise UndersampledGridError(f'phase moved by {step:.3f} rad in step {k}', index=k, increment=step)
    return inc


def _rate_from_increments(inc, dt):
    n = inc.shape[0]
    rate = np.empty((n + 1,) + inc.shape[1:])
    if n == 1:
        rate[0] = rate[1] = inc[0] / dt
        return rate

    # central in the interior, second order one-sided at the ends
    rate[1:-1] = (inc[:-1] + inc[1:]) / (2 * dt)
    rate[0] = (3 * inc[0] - inc[1]) / (2 * dt)
    rate[-1] = (3 * inc[-1] - inc[-2]) / (2 * dt)
    return rate


def phase_rate(f_samples, dt):
    """d theta / dt = i f'/f on the grid, for unit modulus samples f = exp(-i theta)."""
    return _rate_from_increments(_phase_increments(f_samples), dt)


def retrieve_phase(f_samples, dt):
    """Unwrapped phase theta of f = exp(-i theta) sampled on an equidistant grid.

        retrieve_phase(f_samples, dt) -> ndarray

    theta(0) = -arg f(0) in (-pi, pi], then theta is the trapezoid integral
    of its rate d theta / dt = i f'/f.  The rate is taken from the wrapped
    phase increments of neighbouring samples, central in the interior and
    one-sided at the ends, so theta is free of 2 pi jumps.

    Raises
    ------
    ContractError
        If a sample is not of unit modulus to 1e-6.

    UndersampledGridError
        If the phase moves by pi / 2 or more within one step.

    """
    f = np.asarray(f_samples, dtype=complex)
    if np.any(np.abs(np.abs(f) - 1) > MODULUS_TOL):
        raise ContractError('retrieve_phase needs unit modulus samples')

    theta0 = float(_wrap(-np.angle(f[0])))
    if f.size == 1:
        return np.array([theta0])

    rate = phase_rate(f, dt)
    steps = dt * (rate[:-1] + rate[1:]) / 2
    return theta0 + np.concatenate([[0.0], np.cumsum(steps)])


@dataclass(frozen=True)
class EigenOperatorSet:
    """The dim**2 eigenoperators of one grid point.

    ops[j] = |phi_n><phi_m| with (n, m) = pairs[j] and j = dim * n + m.
    """
    ops: list
    pairs: list
    thetas: np.ndarray
    omegas: np.ndarray

    @property
    def dim(self):
        return self.ops[0].dim

    def __len__(self):
        return len(self.ops)


@dataclass(frozen=True)
class EigenFlow:
    """Eigenvectors of U(t) with continuous labels, unwrapped phases and Bohr frequencies.

    times
        The grid times, length K + 1.

    phis
        K + 1 x dim x dim, the eigenvectors as columns.

    eps
        K + 1 x dim, eigenphases with eps(0) = 0.

    rates
        K + 1 x dim, d eps / dt.

    """
    times: np.ndarray
    phis: np.ndarray
    eps: np.ndarray
    rates: np.ndarray

    @property
    def dim(self):
        return self.phis.shape[1]

    def pair_index(self, n, m):
        return self.dim * n + m

    def theta(self, k):
        """theta[n, m] = eps_n - eps_m at grid point k."""
        e = self.eps[k]
        return e[:, None] - e[None, :]

    def bohr(self, k):
        """omega[n, m] = d theta / dt at grid point k."""
        r = self.rates[k]
        return r[:, None] - r[None, :]


def _align_degenerate(phases, vectors, prev):
    """Replace eigenvectors of (nearly) degenerate eigenvalues by the closest orthonormal set
    inside their eigenspace, taken from the previous vectors."""
    z = vectors.copy()
    lam = np.exp(-1j * phases)
    n = lam.size
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        cluster = np.nonzero(np.abs(lam - lam[i]) < DEGENERACY_TOL)[0]
        seen[cluster] = True
        if cluster.size < 2:
            continue

        zc = z[:, cluster]
        a = zc.conj().T @ prev
        weight = np.sum(np.abs(a) ** 2, axis=0)
        chosen = np.sort(np.argsort(weight)[-cluster.size:])
        q, _ = scipy.linalg.polar(zc @ a[:, chosen])
        z[:, cluster] = q
        logger.debug(f'aligned degenerate eigenvalues {cluster.tolist()}')

    return z


def build_eigenflow(unitaries, grid, reference_hamiltonian):
    """Follow the eigenvectors and eigenphases of U(t_k) along the grid.

        build_eigenflow(unitaries, grid, H0) -> EigenFlow

    Arguments:

        unitaries               U(t_0) ... U(t_K), U(t_0) = identity
        grid                    the TimeGrid they were computed on
        reference_hamiltonian   H_S(t_0), its eigenvectors label t_0

    Raises UndersampledGridError if an eigenphase moves by pi / 2 or more in
    a step.
    """
    if len(unitaries) != grid.n_steps + 1:
        raise ContractError(f'{len(unitaries)} unitaries for a grid of {grid.n_steps} steps')

    _, ref = hermitian_eigensystem(reference_hamiltonian)
    prev = ref.entries
    dim = prev.shape[0]
    u0 = as_array(unitaries[0])
    if not np.allclose(u0, u0[0, 0] * np.eye(dim), atol=UNITARY_CHECK_TOL):
        # U(t_0) is not trivial, label its own eigenbasis by H_S(t_0)
        phases, vectors = diagonalize_unitary(u0)
        prev = match_labels(prev, _align_degenerate(phases, vectors.entries, prev))[1].entries

    phis = [prev]
    lams = [np.einsum('in,ij,jn->n', prev.conj(), u0, prev)]
    for u in unitaries[1:]:
        phases, vectors = diagonalize_unitary(u)
        z = _align_degenerate(phases, vectors.entries, prev)
        _, matched = match_labels(prev, z)
        prev = matched.entries
        m = as_array(u)
        phis.append(prev)
        lams.append(np.einsum('in,ij,jn->n', prev.conj(), m, prev))

    lams = np.array(lams)
    lams /= np.abs(lams)
    inc = _phase_increments(lams)
    eps = np.concatenate([np.zeros((1, dim)), np.cumsum(inc, axis=0)])
    eps += _wrap(-np.angle(lams[0]))
    rates = _rate_from_increments(inc, grid.dt)

    return EigenFlow(grid.times, np.array(phis), eps, rates)


def build_eigenoperators(flow, k):
    """All dim**2 eigenoperators at grid point k, with their phases and Bohr frequencies."""
    v = flow.phis[k]
    dim = flow.dim
    theta = flow.theta(k)
    omega = flow.bohr(k)

    ops, pairs = [], []
    for n in range(dim):
        for m in range(dim):
            ops.append(Operator(np.outer(v[:, n], v[:, m].conj())))
            pairs.append((n, m))

    return EigenOperatorSet(ops, pairs, theta.reshape(-1), omega.reshape(-1))
