"""Propagators for the driven unitary flow and the GKLS flow.

Density matrices are column stacked, vec(A X B) = (B^T kron A) vec(X), so a
superoperator is a dim**2 x dim**2 matrix acting on `vec(rho)`.

chebychev_step
    exp(-i H dt) U by a Chebychev series with Bessel coefficients.

newton_step
    exp(L dt) v for a non-Hermitian generator L by Newton interpolation at
    Leja points of a rectangle enclosing the spectrum of L.

oracle_integrate
    An adaptive Runge-Kutta integration used to cross-check the two above.
"""

import logging

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from scipy.integrate import solve_ivp
from scipy.special import jv

from thermoqc.errors import ContractError, InvalidGridError, OracleError, PropagationError
from thermoqc.operators import HERMITIAN_TOL, Operator, as_array

__all__ = ['TimeGrid', 'Superoperator', 'vec', 'unvec', 'commutator_superoperator',
           'dissipator_superoperator', 'conjugation_superoperator',
           'chebychev_step', 'propagate_unitary', 'NewtonPlan', 'newton_plan',
           'newton_step', 'oracle_integrate']

logger = logging.getLogger(__name__)

CHEBYCHEV_TOL = 1e-14
SPECTRAL_SAFETY = 1.1
NEWTON_TOL = 1e-14
NEWTON_MAX_TERMS = 512
LEJA_CANDIDATES = 1024


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant time grid t0 .. t1 with n_steps steps."""
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 1:
            raise InvalidGridError(f'n_steps must be a positive integer, got {self.n_steps!r}')
        if not self.t1 > self.t0:
            raise InvalidGridError(f'Empty time grid [{self.t0}, {self.t1}]')

    @classmethod
    def for_period(cls, delta, periods=1.0, steps_per_period=200, t0=0.0):
        """Grid over `periods` times 2 pi / delta, resolving each period with `steps_per_period` steps."""
        period = 2 * np.pi / delta
        n = max(1, int(round(periods * steps_per_period)))
        return cls(t0, t0 + periods * period, n)

    @property
    def dt(self):
        return (self.t1 - self.t0) / self.n_steps

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def midpoints(self):
        return self.t0 + self.dt * (np.arange(self.n_steps) + 0.5)

    def refined(self):
        return TimeGrid(self.t0, self.t1, 2 * self.n_steps)


def vec(rho):
    return as_array(rho).reshape(-1, order='F')


def unvec(v, dim=None):
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.shape[0])))
    return v.reshape((dim, dim), order='F')


@dataclass(frozen=True)
class Superoperator:
    """A linear map on dim x dim matrices, stored as a dim**2 x dim**2 matrix."""
    matrix: np.ndarray

    @cached_property
    def dim(self):
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho):
        return Operator(unvec(self.matrix @ vec(rho), self.dim))

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            return Superoperator(self.matrix @ other.matrix)
        return self.matrix @ other

    def trace_defect(self):
        """max |tr L[E_ij]| over the matrix units, 0 for a trace annihilating generator."""
        n = self.dim
        trace_row = vec(np.eye(n)).conj()
        return float(np.max(np.abs(trace_row @ self.matrix)))


def commutator_superoperator(hamiltonian):
    """-i [H, .]"""
    h = as_array(hamiltonian)
    one = np.eye(h.shape[0])
    return -1j * (np.kron(one, h) - np.kron(h.T, one))


def dissipator_superoperator(jump, rate=1.0):
    """rate (F . F^+ - 1/2 {F^+ F, .})"""
    f = as_array(jump)
    one = np.eye(f.shape[0])
    fdf = f.conj().T @ f
    return rate * (np.kron(f.conj(), f) - 0.5 * np.kron(one, fdf) - 0.5 * np.kron(fdf.T, one))


def conjugation_superoperator(u):
    """U . U^+"""
    u = as_array(u)
    return np.kron(u.conj(), u)


def _gershgorin_interval(h):
    radii = np.sum(np.abs(h), axis=1) - np.abs(np.diag(h))
    centers = np.real(np.diag(h))
    return float(np.min(centers - radii)), float(np.max(centers + radii))


def _chebychev_coefficients(alpha):
    n = int(alpha) + 16
    while True:
        b = jv(np.arange(n), alpha)
        tail = np.nonzero(np.abs(b) >= CHEBYCHEV_TOL)[0]
        last = tail[-1] if tail.size else 0
        if last < n - 2:
            return b[:last + 1]
        n *= 2


def chebychev_step(hamiltonian, dt, u_in):
    """One step exp(-i H dt) U_in with a Chebychev expansion.

        chebychev_step(H, dt, U_in) -> Operator

    The spectrum is bracketed with Gershgorin discs widened by 10%, the
    expansion is truncated when the Bessel coefficients drop below 1e-14.

    Raises
    ------
    ContractError
        If H is not Hermitian.

    PropagationError
        If H contains non-finite entries.

    """
    h = as_array(hamiltonian)
    u = as_array(u_in)
    if not np.all(np.isfinite(h)):
        raise PropagationError('spectral range estimate failed', reason='non-finite Hamiltonian')
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
        raise ContractError('chebychev_step needs a Hermitian Hamiltonian')

    emin, emax = _gershgorin_interval(h)
    center = (emax + emin) / 2
    half = SPECTRAL_SAFETY * (emax - emin) / 2
    phase = np.exp(-1j * center * dt)
    if half == 0:
        return Operator(phase * u)

    hn = (h - center * np.eye(h.shape[0])) / half
    b = _chebychev_coefficients(half * dt)

    # exp(-i x a) = J_0(a) + 2 sum_k (-i)^k J_k(a) T_k(x)
    prev, cur = u, hn @ u
    result = b[0] * prev
    if b.size > 1:
        result = result + 2 * (-1j) * b[1] * cur
    for k in range(2, b.size):
        prev, cur = cur, 2 * hn @ cur - prev
        result = result + 2 * (-1j) ** k * b[k] * cur

    return Operator(phase * result)


def propagate_unitary(hamiltonian_of_t, grid, u0=None):
    """Propagate i dU/dt = H(t) U over the grid.

        propagate_unitary(H_of_t, grid, U0=None) -> [U(t_0), ..., U(t_n)]

    Arguments:

        H_of_t      callable t -> Hermitian operator
        grid        TimeGrid
        U0          start value, identity if None

    H is sampled once per step at the midpoint t_k + dt / 2.
    """
    dt = grid.dt
    mids = grid.midpoints
    if u0 is None:
        u0 = np.eye(as_array(hamiltonian_of_t(grid.t0)).shape[0])

    u = Operator(u0)
    result = [u]
    for t in mids:
        u = chebychev_step(hamiltonian_of_t(t), dt, u)
        result.append(u)

    return result


def _spectral_box(lmat):
    """Bounding rectangle of the spectrum, from row and column Gershgorin discs."""
    d = np.diag(lmat)
    a = np.abs(lmat)
    boxes = []
    for radii in (a.sum(axis=1) - np.abs(d), a.sum(axis=0) - np.abs(d)):
        boxes.append((np.min(d.real - radii), np.max(d.real + radii),
                      np.min(d.imag - radii), np.max(d.imag + radii)))
    (x0, x1, y0, y1), (u0, u1, v0, v1) = boxes
    return max(x0, u0), min(x1, u1), max(y0, v0), min(y1, v1)


def _boundary_candidates(half_x, half_y, count=LEJA_CANDIDATES):
    if half_y <= 1e-8 * half_x:
        return np.linspace(-half_x, half_x, count).astype(complex)
    if half_x <= 1e-8 * half_y:
        return 1j * np.linspace(-half_y, half_y, count)

    perimeter = 4 * (half_x + half_y)
    nx = max(4, int(count * 2 * half_x / perimeter))
    ny = max(4, int(count * 2 * half_y / perimeter))
    xs = np.linspace(-half_x, half_x, nx)
    ys = np.linspace(-half_y, half_y, ny)
    return np.unique(np.concatenate([xs - 1j * half_y, xs + 1j * half_y,
                                     -half_x + 1j * ys, half_x + 1j * ys]))


def _leja_points(candidates, n):
    n = min(n, candidates.size)
    points = np.empty(n, dtype=complex)
    points[0] = candidates[np.argmax(np.abs(candidates))]
    logprod = np.zeros(candidates.size)
    with np.errstate(divide='ignore'):
        for k in range(1, n):
            logprod += np.log(np.abs(candidates - points[k - 1]))
            points[k] = candidates[np.argmax(logprod)]
    return points


def _exp_divided_differences(points, alpha):
    """Divided differences of exp(alpha w) at the points.

    The first column of exp(Z), Z = diag(alpha w) + alpha * subdiagonal
    ones, holds them directly.
    """
    n = points.size
    z = np.diag(alpha * points) + np.diag(np.full(n - 1, alpha, dtype=complex), k=-1)
    return scipy.linalg.expm(z)[:, 0]


@dataclass(frozen=True)
class NewtonPlan:
    """exp(L dt) as a Newton polynomial, reusable for several vectors.

    The generator is shifted and scaled to w = (L - center) / scale, with
    the spectral rectangle mapped into [-2, 2] x [-2i, 2i].
    """
    generator: np.ndarray
    dt: float
    center: complex
    scale: float
    points: np.ndarray
    coefficients: np.ndarray

    def apply(self, v):
        """exp(L dt) v for a vector or a block of column vectors."""
        v = np.asarray(v, dtype=complex)
        if self.scale == 0:
            return np.exp(self.center * self.dt) * v

        norm_v = np.linalg.norm(v)
        if norm_v == 0:
            return np.zeros_like(v)

        lmat = self.generator
        r = v
        result = self.coefficients[0] * r
        small = 0
        for k in range(1, self.coefficients.size):
            r = (lmat @ r - self.center * r) / self.scale - self.points[k - 1] * r
            term = self.coefficients[k] * r
            result = result + term
            if np.linalg.norm(term) <= NEWTON_TOL * max(np.linalg.norm(result), norm_v):
                small += 1
                if small == 2:
                    logger.debug(f'Newton series converged after {k + 1} terms')
                    return np.exp(self.center * self.dt) * result
            else:
                small = 0

        raise PropagationError('divergent Newton interpolation',
                               terms=self.coefficients.size,
                               last_term=float(np.linalg.norm(term)),
                               scale=self.scale, center=self.center, dt=self.dt)


def newton_plan(generator, dt):
    """Prepare the Newton interpolation of exp(L dt) for the generator L."""
    lmat = generator.matrix if isinstance(generator, Superoperator) else np.asarray(generator, dtype=complex)
    if not np.all(np.isfinite(lmat)):
        raise PropagationError('divergent Newton interpolation', reason='non-finite generator')

    x0, x1, y0, y1 = _spectral_box(lmat)
    center = complex((x0 + x1) / 2, (y0 + y1) / 2)
    half_x, half_y = (x1 - x0) / 2, (y1 - y0) / 2
    half = max(half_x, half_y)
    if half <= 0:
        # diagonal with a single value, L = center * I
        return NewtonPlan(lmat, dt, center, 0.0, np.zeros(0, dtype=complex), np.zeros(0, dtype=complex))

    scale = half / 2
    alpha = dt * scale
    n = min(NEWTON_MAX_TERMS, int(3 * np.e * alpha) + 40)
    candidates = _boundary_candidates(half_x / scale, half_y / scale)
    points = _leja_points(candidates, n)
    coefficients = _exp_divided_differences(points, alpha)
    return NewtonPlan(lmat, dt, center, scale, points, coefficients)


def newton_step(generator, dt, rho_vec):
    """exp(L dt) rho_vec by Newton interpolation.

        newton_step(L, dt, rho_vec) -> rho_vec

    `rho_vec` is a column stacked density matrix, or a dim**2 x K block of
    them.

    Raises
    ------
    PropagationError
        If the series does not converge, with the spectral box and term
        count as diagnostics.

    """
    return newton_plan(generator, dt).apply(rho_vec)


def oracle_integrate(generator_of_t, grid, rho0, rtol=1e-12, atol=1e-14):
    """Reference solution of d vec(rho)/dt = L(t) vec(rho) by adaptive DOP853.

        oracle_integrate(L_of_t, grid, rho0) -> [Operator, ...]

    Only meant for validating the polynomial propagators.

    Raises
    ------
    OracleError
        If the integrator gives up, e.g. on step size underflow.

    """
    rho0 = as_array(rho0)
    dim = rho0.shape[0]

    def rhs(t, y):
        lt = generator_of_t(t)
        lmat = lt.matrix if isinstance(lt, Superoperator) else np.asarray(lt)
        return lmat @ y

    sol = solve_ivp(rhs, (grid.t0, grid.t1), vec(rho0).astype(complex), method='DOP853',
                    t_eval=grid.times, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise OracleError(f'oracle integration failed: {sol.message}')

    return [Operator(unvec(sol.y[:, k], dim)) for k in range(sol.y.shape[1])]
