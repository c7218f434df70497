"""Dense operators and the model Hamiltonians.

All quantities are in atomic units with hbar = k_B = 1.  Spin models are
parametrized by the Hilbert space dimension, `j = (dim - 1) / 2`, and the
matrices are written in the J_z eigenbasis ordered from m = +j down to
m = -j.

    >>> spec = ModelSpec('spin_j', dim=2)
    >>> H0 = drift_hamiltonian(spec)
    >>> V = control_operator(spec)
"""

import logging

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from thermoqc.errors import ContractError, InvalidDimensionError, InvalidModelError, LogDomainError

__all__ = ['Operator', 'ModelSpec', 'as_array', 'identity', 'pauli',
           'sigma_plus', 'sigma_minus', 'angular_momentum', 'drift_hamiltonian',
           'control_operator', 'coupling_operator', 'gibbs_state',
           'hermitian_eigensystem', 'matrix_function', 'DEFAULT_DELTA']

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 3e-3
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
LOG_FLOOR = 1e-14
# eigenvalues below this are a broken state, not rounding noise
LOG_NEGATIVE_TOL = 1e-8


class Operator:
    """A dense complex square matrix.

    Operators are immutable.  The `hermitian` and `unitary` flags are
    computed on first access and cached.

    Parameters
    ----------
    entries: array_like
        A dim x dim matrix.  It is copied, so later changes to the source
        don't leak into the operator.

    Raises
    ------
    InvalidDimensionError
        If `entries` is not a non-empty square matrix.

    """
    __slots__ = ('_entries', '_hermitian', '_unitary')

    def __init__(self, entries):
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidDimensionError(f'Operator needs a square matrix, got shape {a.shape}')
        a.setflags(write=False)
        self._entries = a
        self._hermitian = None
        self._unitary = None

    def __repr__(self):
        return f'Operator(dim={self.dim}, hermitian={self.hermitian})'

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    @property
    def dim(self):
        return self._entries.shape[0]

    @property
    def entries(self):
        return self._entries

    @property
    def hermitian(self):
        if self._hermitian is None:
            a = self._entries
            self._hermitian = bool(np.max(np.abs(a - a.conj().T)) <= HERMITIAN_TOL)
        return self._hermitian

    @property
    def unitary(self):
        if self._unitary is None:
            a = self._entries
            defect = a.conj().T @ a - np.eye(self.dim)
            self._unitary = bool(np.max(np.abs(defect)) <= UNITARY_TOL)
        return self._unitary

    def dagger(self):
        return Operator(self._entries.conj().T)

    def trace(self):
        return complex(np.trace(self._entries))

    def allclose(self, other, atol=1e-12):
        return bool(np.allclose(self._entries, as_array(other), rtol=0, atol=atol))

    def __matmul__(self, other):
        return Operator(self._entries @ as_array(other))

    def __rmatmul__(self, other):
        return Operator(as_array(other) @ self._entries)

    def __add__(self, other):
        return Operator(self._entries + as_array(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self._entries - as_array(other))

    def __rsub__(self, other):
        return Operator(as_array(other) - self._entries)

    def __mul__(self, scalar):
        return Operator(self._entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self._entries / scalar)

    def __neg__(self):
        return Operator(-self._entries)


def as_array(op):
    """Return the entries of an `Operator` or coerce anything else to a complex array."""
    if isinstance(op, Operator):
        return op.entries
    return np.asarray(op, dtype=complex)


@dataclass(frozen=True)
class ModelSpec:
    """The system model.

    kind
        'spin_j' for the two-mode Bose-Hubbard / angular momentum model or
        'two_qubit' for the qubit register.

    dim
        Hilbert space dimension.  Always 4 for 'two_qubit'.

    delta
        The energy scale Delta.

    u
        Interaction strength of the spin model, defaults to 2 Delta / j.

    omega1, omega2
        Qubit frequencies of the register, default Delta and 1.1 Delta.

    """
    kind: str = 'spin_j'
    dim: int = 2
    delta: float = DEFAULT_DELTA
    u: float | None = None
    omega1: float | None = None
    omega2: float | None = None

    def __post_init__(self):
        if self.kind not in ('spin_j', 'two_qubit'):
            raise InvalidModelError(f'Unknown model kind {self.kind!r}')
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 2:
            raise InvalidDimensionError(f'Model dimension must be an integer >= 2, got {self.dim!r}')
        if not self.delta > 0:
            raise InvalidModelError(f'delta must be positive, got {self.delta}')
        if self.kind == 'two_qubit' and self.dim != 4:
            raise InvalidModelError(f'two_qubit model has dim 4, got {self.dim}')

    @property
    def j(self):
        return (self.dim - 1) / 2

    @property
    def u_value(self):
        return 2 * self.delta / self.j if self.u is None else self.u

    @property
    def omega1_value(self):
        return self.delta if self.omega1 is None else self.omega1

    @property
    def omega2_value(self):
        return 1.1 * self.omega1_value if self.omega2 is None else self.omega2

    @property
    def period(self):
        """The natural control time 2 pi / Delta."""
        return 2 * np.pi / self.delta


def identity(dim):
    return Operator(np.eye(dim))


_PAULI = {
    'i': np.eye(2),
    'x': np.array([[0, 1], [1, 0]]),
    'y': np.array([[0, -1j], [1j, 0]]),
    'z': np.array([[1, 0], [0, -1]]),
}


def pauli(axis):
    """Pauli matrix for axis 'x', 'y', 'z' (or 'i' for the identity)."""
    try:
        return Operator(_PAULI[axis])
    except KeyError as e:
        raise ContractError(f'Unknown Pauli axis {axis!r}') from e


def sigma_plus():
    """|0><1| in the sigma_z eigenbasis, raising the sigma_z eigenvalue."""
    return Operator([[0, 1], [0, 0]])


def sigma_minus():
    return Operator([[0, 0], [1, 0]])


def angular_momentum(dim, axis):
    """Spin-j angular momentum matrix with j = (dim - 1) / 2.

        angular_momentum(dim, axis) -> Operator

    Arguments:

        dim     Hilbert space dimension, >= 2
        axis    'x', 'y' or 'z'

    The basis is the J_z eigenbasis ordered m = j, j - 1, ..., -j.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidDimensionError(f'Spin matrices need dim >= 2, got {dim!r}')

    j = (dim - 1) / 2
    m = j - np.arange(dim)
    if axis == 'z':
        return Operator(np.diag(m))

    # <m + 1|J+|m> sits just above the diagonal
    jplus = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1)
    match axis:
        case 'x':
            return Operator((jplus + jplus.T) / 2)
        case 'y':
            return Operator((jplus - jplus.T) / 2j)
        case _:
            raise ContractError(f'Unknown angular momentum axis {axis!r}')


def drift_hamiltonian(spec):
    """The bare system Hamiltonian H_S^0.

    spin_j:     u J_z^2 + Delta J_x
    two_qubit:  diag(-w1 - w2, w1 - w2, -w1 + w2, w1 + w2)
    """
    if spec.kind == 'two_qubit':
        w1, w2 = spec.omega1_value, spec.omega2_value
        return Operator(np.diag([-w1 - w2, w1 - w2, -w1 + w2, w1 + w2]))

    jz = angular_momentum(spec.dim, 'z').entries
    jx = angular_momentum(spec.dim, 'x').entries
    return Operator(spec.u_value * jz @ jz + spec.delta * jx)


def control_operator(spec):
    """The operator multiplied by the control field.

    spin_j:     J_z
    two_qubit:  the exchange term s1+ s2- + s2+ s1-, i.e. |01><10| + |10><01|
    """
    if spec.kind == 'two_qubit':
        v = np.zeros((4, 4))
        v[1, 2] = v[2, 1] = 1
        return Operator(v)

    return angular_momentum(spec.dim, 'z')


def coupling_operator(spec):
    """Default system operator coupling to the bath.

    J_y for spin models.  The register couples through sigma_y of the first
    and sigma_x of the second qubit.
    """
    if spec.kind == 'two_qubit':
        s = np.kron(_PAULI['y'], np.eye(2)) + np.kron(np.eye(2), _PAULI['x'])
        return Operator(s)

    return angular_momentum(spec.dim, 'y')


def gibbs_state(hamiltonian, temperature):
    """Thermal state exp(-H / T) / Z."""
    evals, evecs = hermitian_eigensystem(hamiltonian)
    evals = np.asarray(evals)
    weights = np.exp(-(evals - evals.min()) / temperature)
    weights /= weights.sum()
    v = evecs.entries
    return Operator((v * weights) @ v.conj().T)


def hermitian_eigensystem(a):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian operator.

    Returns
    -------
    (list[float], Operator)
        The eigenvalues and the eigenvectors as columns of an operator.

    Raises
    ------
    ContractError
        If the input is not Hermitian.

    """
    op = a if isinstance(a, Operator) else Operator(a)
    if not op.hermitian:
        raise ContractError('hermitian_eigensystem needs a Hermitian operator')

    m = op.entries
    evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
    return evals.tolist(), Operator(evecs)


def matrix_function(a, f):
    """Apply 'exp' or 'log' to an operator.

    exp works on any input.  Hermitian and anti-Hermitian operators go
    through their eigendecomposition, so the exponential of an anti-Hermitian
    operator is unitary to rounding.  Everything else goes to
    `scipy.linalg.expm`.

    log requires a Hermitian operator.  Eigenvalues below 1e-14 are floored
    before taking the log, so the 0 log 0 = 0 limit of near pure states works.
    Eigenvalues more negative than -1e-8 raise `LogDomainError`.
    """
    op = a if isinstance(a, Operator) else Operator(a)
    m = op.entries

    match f:
        case 'exp':
            if op.hermitian:
                evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
                return Operator((evecs * np.exp(evals)) @ evecs.conj().T)
            k = 1j * m
            if np.max(np.abs(k - k.conj().T)) <= HERMITIAN_TOL:
                # a = -i k with k Hermitian
                evals, evecs = np.linalg.eigh((k + k.conj().T) / 2)
                return Operator((evecs * np.exp(-1j * evals)) @ evecs.conj().T)
            return Operator(scipy.linalg.expm(m))

        case 'log':
            if not op.hermitian:
                raise ContractError('matrix log needs a Hermitian operator')
            evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
            if evals.min() < -LOG_NEGATIVE_TOL:
                raise LogDomainError(f'log of operator with eigenvalue {evals.min():.3e}')
            evals = np.maximum(evals, LOG_FLOOR)
            return Operator((evecs * np.log(evals)) @ evecs.conj().T)

        case _:
            raise ContractError(f'Unknown matrix function {f!r}')
