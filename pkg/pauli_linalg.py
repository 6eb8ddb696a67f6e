"""
Pauli Linear Algebra
Dense complex linear algebra shared by every other module: Pauli strings and
their group algebra, matrix exponentials, density matrices, statevectors,
partial traces and distance measures
"""

import itertools
import math
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from simulation_params import get_simulation_params

logger = logging.getLogger(__name__)

PAULI_LETTERS = 'IXYZ'

_SINGLE_PAULIS = {
    'I': np.array([[1, 0], [0, 1]], dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

# a*b = phase * c for single-qubit Paulis
_LETTER_PRODUCT = {}
for _a in PAULI_LETTERS:
    _LETTER_PRODUCT[('I', _a)] = (1, _a)
    _LETTER_PRODUCT[(_a, 'I')] = (1, _a)
    _LETTER_PRODUCT[(_a, _a)] = (1, 'I')
for _a, _b, _c in (('X', 'Y', 'Z'), ('Y', 'Z', 'X'), ('Z', 'X', 'Y')):
    _LETTER_PRODUCT[(_a, _b)] = (1j, _c)
    _LETTER_PRODUCT[(_b, _a)] = (-1j, _c)

_PHASE_LABELS = {1: '+1', -1: '-1', 1j: '+i', -1j: '-i'}


def _tol(name, tol):
    return get_simulation_params().get(name) if tol is None else tol


# -------------------- ComplexMatrix predicates --------------------
# A ComplexMatrix is a 2-D complex128 numpy array.

def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a 2-D complex array"""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {m.shape}")
    return m


def is_hermitian(a, tol=None) -> bool:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= _tol('hermitian_tol', tol))


def is_unitary(a, tol=None) -> bool:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    eye = np.eye(m.shape[0])
    tol = _tol('unitary_tol', tol)
    return bool(np.max(np.abs(m @ m.conj().T - eye)) <= tol and np.max(np.abs(m.conj().T @ m - eye)) <= tol)


def is_normal(a, tol=None) -> bool:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m @ m.conj().T - m.conj().T @ m)) <= _tol('unitary_tol', tol))


def is_psd(a, tol=None) -> bool:
    """Hermitian with eigenvalues >= -tol"""
    tol = _tol('psd_tol', tol)
    if not is_hermitian(a, tol):
        return False
    m = as_complex_matrix(a)
    return bool(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)) >= -tol)


def trace_norm(a) -> float:
    """Sum of singular values"""
    m = as_complex_matrix(a)
    if is_hermitian(m, 1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def qubit_count(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else -1
    if n < 0 or 2 ** n != dim:
        raise ValueError(f"Dimension {dim} is not a power of two")
    return n


# -------------------- Pauli strings --------------------

@dataclass(frozen=True)
class PauliString:
    """
    Tensor product of single-qubit Paulis with a unit complex phase; letters[0] is qubit 0

    Immutable and hashed by value; letters and phase are normalized once in __post_init__.
    """
    letters: str
    phase: complex = 1

    def __post_init__(self):
        letters = self.letters.upper()
        if not letters:
            raise ValueError("PauliString needs at least one qubit")
        bad = set(letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"Invalid Pauli letter(s) {sorted(bad)} in {self.letters!r}")
        phase = complex(self.phase)
        if abs(abs(phase) - 1.0) > 1e-12:
            raise ValueError(f"Pauli phase must have unit modulus, got {phase}")
        object.__setattr__(self, 'letters', letters)
        object.__setattr__(self, 'phase', _snap_phase(phase))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @classmethod
    def identity(cls, n_qubits: int) -> 'PauliString':
        return cls('I' * n_qubits)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str, phase: complex = 1) -> 'PauliString':
        if not 0 <= qubit < n_qubits:
            raise ValueError(f"Qubit {qubit} out of range for {n_qubits} qubits")
        letters = ['I'] * n_qubits
        letters[qubit] = letter
        return cls(''.join(letters), phase)

    @classmethod
    def from_label(cls, label: str, phase_label: str = '+1') -> 'PauliString':
        """Parse letters plus one of '+1', '-1', '+i', '-i'"""
        return cls(label, parse_phase(phase_label))

    @property
    def phase_label(self) -> str:
        return _PHASE_LABELS.get(self.phase, repr(self.phase))

    def is_identity(self) -> bool:
        return set(self.letters) == {'I'}

    def is_hermitian(self) -> bool:
        return self.phase in (1, -1)

    def weight(self) -> int:
        return sum(1 for c in self.letters if c != 'I')

    def compose(self, other: 'PauliString') -> 'PauliString':
        """Matrix product self @ other, kept inside the Pauli group"""
        if other.n_qubits != self.n_qubits:
            raise ValueError("Cannot compose Pauli strings on different qubit counts")
        phase = self.phase * other.phase
        letters = []
        for a, b in zip(self.letters, other.letters):
            p, c = _LETTER_PRODUCT[(a, b)]
            phase *= p
            letters.append(c)
        return PauliString(''.join(letters), phase)

    def dagger(self) -> 'PauliString':
        return PauliString(self.letters, np.conj(self.phase))

    def commutes_with(self, other: 'PauliString') -> bool:
        anti = sum(1 for a, b in zip(self.letters, other.letters) if a != 'I' and b != 'I' and a != b)
        return anti % 2 == 0

    def masks(self) -> Tuple[int, int, int]:
        """(x_mask, z_mask, number of Y letters) with qubit 0 as the most significant bit"""
        n = self.n_qubits
        x_mask = z_mask = 0
        n_y = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in 'XY':
                x_mask |= bit
            if c in 'ZY':
                z_mask |= bit
            if c == 'Y':
                n_y += 1
        return x_mask, z_mask, n_y

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Apply to a statevector (or to the rows of a matrix) without building the matrix"""
        x_mask, z_mask, n_y = self.masks()
        idx = np.arange(2 ** self.n_qubits)
        signs = _parity_signs(idx & z_mask)
        coeff = self.phase * (1j ** n_y)
        out = np.empty_like(amplitudes, dtype=complex)
        out[idx ^ x_mask] = (coeff * signs).reshape((-1,) + (1,) * (amplitudes.ndim - 1)) * amplitudes[idx]
        return out

    def __str__(self):
        return f"{self.phase_label}{self.letters}"


def _snap_phase(phase: complex) -> complex:
    for p in (1, -1, 1j, -1j):
        if abs(phase - p) < 1e-12:
            return p
    return phase


def parse_phase(label) -> complex:
    table = {'+1': 1, '1': 1, '-1': -1, '+i': 1j, 'i': 1j, '-i': -1j}
    key = str(label).strip().lower()
    if key not in table:
        raise ValueError(f"Phase must be one of '+1', '-1', '+i', '-i', got {label!r}")
    return table[key]


def _parity_signs(bits: np.ndarray) -> np.ndarray:
    parity = np.zeros_like(bits)
    b = bits.copy()
    while np.any(b):
        parity ^= b & 1
        b >>= 1
    return 1 - 2 * parity


def pauli_to_matrix(p: PauliString) -> np.ndarray:
    """phase * (sigma_1 kron ... kron sigma_n)"""
    return p.phase * reduce(np.kron, (_SINGLE_PAULIS[c] for c in p.letters))


def all_pauli_strings(n_qubits: int, include_identity: bool = True) -> List[PauliString]:
    strings = [PauliString(''.join(t)) for t in itertools.product(PAULI_LETTERS, repeat=n_qubits)]
    return strings if include_identity else [p for p in strings if not p.is_identity()]


def compose_paulis(paulis: Sequence[PauliString]) -> PauliString:
    """Product U_k ... U_1 for paulis given in application order [U_1, ..., U_k]"""
    if not paulis:
        raise ValueError("Need at least one Pauli string to compose")
    acc = PauliString.identity(paulis[0].n_qubits)
    for p in paulis:
        acc = p.compose(acc)
    return acc


def pauli_decompose(matrix, tol: float = 1e-12) -> List[Tuple[float, PauliString]]:
    """Terms (beta > 0, phased PauliString) whose weighted sum equals the matrix"""
    m = as_complex_matrix(matrix)
    n = qubit_count(m.shape[0])
    dim = 2 ** n
    idx = np.arange(dim)
    terms = []
    for p in all_pauli_strings(n):
        x_mask, z_mask, n_y = p.masks()
        # tr(P^dagger M) with P[j ^ x, j] = i^ny * sign(j)
        coeff_p = (1j ** n_y) * _parity_signs(idx & z_mask)
        c = np.sum(np.conj(coeff_p) * m[idx ^ x_mask, idx]) / dim
        if abs(c) > tol:
            terms.append((float(abs(c)), PauliString(p.letters, c / abs(c))))
    return terms


# -------------------- Matrix exponential --------------------

_TAYLOR_DEGREE = 16


def matrix_exp(a, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * a) by scaling and squaring around a degree-16 Taylor core"""
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {m.shape}")
    m = scale * m
    dim = m.shape[0]
    norm = np.linalg.norm(m, 1) if dim else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    m = m / (2 ** squarings)

    result = np.eye(dim, dtype=complex)
    for k in range(_TAYLOR_DEGREE, 0, -1):
        result = np.eye(dim, dtype=complex) + (m @ result) / k
    for _ in range(squarings):
        result = result @ result
    return result


# -------------------- States --------------------

class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite 2^n x 2^n matrix"""

    __slots__ = ('n_qubits', 'matrix')

    def __init__(self, matrix, tol=None, validate=True):
        m = as_complex_matrix(matrix).copy()
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {m.shape}")
        self.n_qubits = qubit_count(m.shape[0])
        if validate:
            _check_density(m, tol)
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def from_statevector(cls, psi) -> 'DensityMatrix':
        amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
        return cls(np.outer(amps, amps.conj()))

    @classmethod
    def from_ensemble(cls, ensemble: Iterable[Tuple[float, 'StateVector']]) -> 'DensityMatrix':
        return cls(sum(w * np.outer(s.amplitudes, s.amplitudes.conj()) for w, s in ensemble))

    @classmethod
    def basis(cls, label: str) -> 'DensityMatrix':
        return cls.from_statevector(StateVector.basis(label))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> 'DensityMatrix':
        dim = 2 ** n_qubits
        return cls(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, observable) -> float:
        return float(np.real(np.trace(as_complex_matrix(observable) @ self.matrix)))

    def tensor(self, other: 'DensityMatrix') -> 'DensityMatrix':
        return DensityMatrix(np.kron(self.matrix, other.matrix))


def _check_density(m: np.ndarray, tol=None):
    params = get_simulation_params()
    herm_tol = params.get('hermitian_tol') if tol is None else tol
    trace_tol = params.get('trace_tol') if tol is None else tol
    psd_tol = params.get('psd_tol') if tol is None else tol
    if not is_hermitian(m, herm_tol):
        raise ValueError("Density matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"Density matrix trace is {tr.real:.3e}, expected 1")
    lowest = np.min(np.linalg.eigvalsh((m + m.conj().T) / 2))
    if lowest < -psd_tol:
        raise ValueError(f"Density matrix has negative eigenvalue {lowest:.3e}")


class StateVector:
    """Normalized length-2^n amplitude vector"""

    __slots__ = ('n_qubits', 'amplitudes')

    def __init__(self, amplitudes, tol=None, normalize=False):
        a = np.asarray(amplitudes, dtype=complex).reshape(-1).copy()
        self.n_qubits = qubit_count(a.size)
        norm = np.linalg.norm(a)
        if normalize:
            if norm == 0:
                raise ValueError("Cannot normalize the zero vector")
            a = a / norm
        elif abs(norm ** 2 - 1.0) > _tol('trace_tol', tol):
            raise ValueError(f"State vector squared norm is {norm ** 2:.12f}, expected 1")
        a.setflags(write=False)
        self.amplitudes = a

    @classmethod
    def basis(cls, label: str) -> 'StateVector':
        """Computational basis state from a bit string such as '010'"""
        if not label or set(label) - {'0', '1'}:
            raise ValueError(f"Basis label must be a nonempty bit string, got {label!r}")
        a = np.zeros(2 ** len(label), dtype=complex)
        a[int(label, 2)] = 1.0
        return cls(a)

    def apply_matrix(self, u) -> 'StateVector':
        return StateVector(as_complex_matrix(u) @ self.amplitudes, normalize=True)

    def apply_pauli(self, p: PauliString) -> 'StateVector':
        return StateVector(p.apply(self.amplitudes), normalize=True)

    def expectation(self, observable) -> float:
        a = self.amplitudes
        return float(np.real(np.vdot(a, as_complex_matrix(observable) @ a)))

    def to_density_matrix(self) -> DensityMatrix:
        return DensityMatrix.from_statevector(self)


# -------------------- Reductions and distances --------------------

def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every qubit not in keep; kept qubits stay in ascending order"""
    n = rho.n_qubits
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("partial_trace needs at least one qubit to keep")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"Qubits {keep} out of range for {n} qubits")
    t = rho.matrix.reshape([2] * (2 * n))
    remaining = n
    for q in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=q, axis2=q + remaining)
        remaining -= 1
    dim = 2 ** len(keep)
    return DensityMatrix(t.reshape(dim, dim))


def trace_distance(rho, sigma) -> float:
    """(1/2) * trace norm of rho - sigma"""
    a = rho.matrix if isinstance(rho, DensityMatrix) else as_complex_matrix(rho)
    b = sigma.matrix if isinstance(sigma, DensityMatrix) else as_complex_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, max(0.0, 0.5 * trace_norm(a - b))))


# -------------------- Random instances --------------------

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix"""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (z + z.conj().T) / 2


def random_statevector(n_qubits: int, rng: np.random.Generator) -> StateVector:
    dim = 2 ** n_qubits
    return StateVector(rng.standard_normal(dim) + 1j * rng.standard_normal(dim), normalize=True)


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: int = None) -> DensityMatrix:
    dim = 2 ** n_qubits
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_pauli_string(n_qubits: int, rng: np.random.Generator, with_phase: bool = True) -> PauliString:
    letters = ''.join(rng.choice(list(PAULI_LETTERS), size=n_qubits))
    phase = (1, -1, 1j, -1j)[rng.integers(4)] if with_phase else 1
    return PauliString(letters, phase)
