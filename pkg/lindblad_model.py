"""
Lindblad Model
Lindbladian specifications, exact Liouvillian superoperators (the brute-force
oracle), the Pauli cost norm and Choi-matrix diamond-norm bounds

Vectorization is column stacking: vec(A rho B) = (B^T kron A) vec(rho)
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from pauli_linalg import (
    DensityMatrix,
    PauliString,
    StateVector,
    as_complex_matrix,
    is_hermitian,
    is_unitary,
    matrix_exp,
    pauli_decompose,
    pauli_to_matrix,
    trace_norm,
)
from simulation_params import get_simulation_params

logger = logging.getLogger(__name__)

UnitaryLike = Union[PauliString, np.ndarray]


class CapExceededError(ValueError):
    """Requested qubit count is above the configured size cap"""


def check_superop_cap(n_qubits: int):
    cap = get_simulation_params().get('superop_qubit_cap')
    if n_qubits > cap:
        raise CapExceededError(f"{n_qubits} qubits exceeds the superoperator cap of {cap}")


def unitary_matrix(u: UnitaryLike) -> np.ndarray:
    return pauli_to_matrix(u) if isinstance(u, PauliString) else as_complex_matrix(u)


def unitary_qubits(u: UnitaryLike) -> int:
    if isinstance(u, PauliString):
        return u.n_qubits
    return int(np.log2(as_complex_matrix(u).shape[0]))


# -------------------- Specifications --------------------

@dataclass(frozen=True)
class HamiltonianSpec:
    """H = sum_k beta_0k V_0k with beta_0k > 0 and phases kept in V_0k"""
    n_qubits: int
    terms: Tuple[Tuple[float, PauliString], ...] = ()

    def __post_init__(self):
        terms = tuple((float(beta), p) for beta, p in self.terms)
        object.__setattr__(self, 'terms', terms)
        for beta, p in terms:
            if not beta > 0:
                raise ValueError(f"Hamiltonian coefficients must be strictly positive, got {beta}")
            if p.n_qubits != self.n_qubits:
                raise ValueError(f"Term {p} acts on {p.n_qubits} qubits, Hamiltonian has {self.n_qubits}")
        if terms and not is_hermitian(self.matrix()):
            raise ValueError("Hamiltonian is not Hermitian")

    @classmethod
    def zero(cls, n_qubits: int) -> 'HamiltonianSpec':
        return cls(n_qubits, ())

    @classmethod
    def from_real_terms(cls, n_qubits: int, terms: Sequence[Tuple[float, PauliString]]) -> 'HamiltonianSpec':
        """Accept signed coefficients and absorb the sign into the Pauli phase"""
        folded = []
        for c, p in terms:
            if c == 0:
                continue
            sign = 1 if c > 0 else -1
            folded.append((abs(c), PauliString(p.letters, p.phase * sign)))
        return cls(n_qubits, tuple(folded))

    def matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        h = np.zeros((dim, dim), dtype=complex)
        for beta, p in self.terms:
            h += beta * pauli_to_matrix(p)
        return h

    def pauli_norm(self) -> float:
        return float(sum(beta for beta, _ in self.terms))


@dataclass(frozen=True, eq=False)
class JumpSpec:
    """L = sum_k beta_k V_k; unitary_form = (alpha, U) when L = alpha * U"""
    terms: Tuple[Tuple[float, PauliString], ...]
    unitary_form: Optional[Tuple[complex, UnitaryLike]] = None

    def __post_init__(self):
        terms = tuple((float(beta), p) for beta, p in self.terms)
        object.__setattr__(self, 'terms', terms)
        if not terms:
            raise ValueError("Jump operator needs at least one Pauli term")
        n = terms[0][1].n_qubits
        for beta, p in terms:
            if not beta > 0:
                raise ValueError(f"Jump coefficients must be strictly positive, got {beta}")
            if p.n_qubits != n:
                raise ValueError("Jump operator terms act on different qubit counts")
        if self.unitary_form is not None:
            alpha, u = self.unitary_form
            u_mat = unitary_matrix(u)
            if not is_unitary(u_mat):
                raise ValueError("unitary_form payload is not unitary")
            if np.max(np.abs(self.matrix() - complex(alpha) * u_mat)) > get_simulation_params().get('hermitian_tol'):
                raise ValueError("Jump terms do not match alpha * U")

    @classmethod
    def from_pauli(cls, beta: float, pauli: PauliString) -> 'JumpSpec':
        """Single Pauli term: alpha = beta, U = V"""
        return cls(((beta, pauli),), (beta, pauli))

    @classmethod
    def from_unitary(cls, alpha: complex, u: np.ndarray) -> 'JumpSpec':
        """Explicit unitary; Pauli terms come from decomposing alpha * U"""
        u = as_complex_matrix(u)
        return cls(tuple(pauli_decompose(alpha * u)), (complex(alpha), u))

    @classmethod
    def from_matrix(cls, matrix) -> 'JumpSpec':
        return cls(tuple(pauli_decompose(matrix)))

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @property
    def is_unitary_form(self) -> bool:
        return self.unitary_form is not None

    @property
    def rate(self) -> float:
        """|alpha|^2 for unitary-form jumps"""
        if self.unitary_form is None:
            raise ValueError("Jump has no unitary form")
        return float(abs(self.unitary_form[0]) ** 2)

    def matrix(self) -> np.ndarray:
        return sum(beta * pauli_to_matrix(p) for beta, p in self.terms)

    def pauli_weight(self) -> float:
        return float(sum(beta for beta, _ in self.terms))


@dataclass(frozen=True, eq=False)
class ResetTerm:
    """D(rho) = kappa (rho_f tr(rho) - rho) with rho_f = sum_j w_j |psi_j><psi_j|"""
    rate: float
    ensemble: Tuple[Tuple[float, StateVector], ...]

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"Reset rate must be nonnegative, got {self.rate}")
        ensemble = tuple((float(w), s) for w, s in self.ensemble)
        object.__setattr__(self, 'ensemble', ensemble)
        if not ensemble:
            raise ValueError("Reset ensemble is empty")
        weights = np.array([w for w, _ in ensemble])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("Reset ensemble weights must be nonnegative and sum to 1")
        if len({s.n_qubits for _, s in ensemble}) != 1:
            raise ValueError("Reset ensemble states act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.ensemble[0][1].n_qubits

    def target_state(self) -> DensityMatrix:
        return DensityMatrix.from_ensemble(self.ensemble)

    def jump_specs(self) -> Tuple[JumpSpec, ...]:
        """Jumps sqrt(kappa w_j) |psi_j><k| for every basis state k"""
        if self.rate == 0:
            return ()
        dim = 2 ** self.n_qubits
        jumps = []
        for w, s in self.ensemble:
            if w == 0:
                continue
            for k in range(dim):
                op = np.zeros((dim, dim), dtype=complex)
                op[:, k] = np.sqrt(self.rate * w) * s.amplitudes
                jumps.append(JumpSpec.from_matrix(op))
        return tuple(jumps)


@dataclass(frozen=True, eq=False)
class LindbladSpec:
    """
    L = H + D with D given by jump operators and an optional reset term

    Frozen after validation: plans, cached superoperators and joblib workers share one instance.
    """
    hamiltonian: HamiltonianSpec
    jumps: Tuple[JumpSpec, ...] = ()
    reset: Optional[ResetTerm] = None

    def __post_init__(self):
        object.__setattr__(self, 'jumps', tuple(self.jumps))
        n = self.hamiltonian.n_qubits
        for j in self.jumps:
            if j.n_qubits != n:
                raise ValueError(f"Jump acts on {j.n_qubits} qubits, Hamiltonian on {n}")
        if self.reset is not None and self.reset.n_qubits != n:
            raise ValueError(f"Reset ensemble acts on {self.reset.n_qubits} qubits, Hamiltonian on {n}")

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def m(self) -> int:
        return len(self.all_jumps())

    def all_jumps(self) -> Tuple[JumpSpec, ...]:
        return self.jumps + (self.reset.jump_specs() if self.reset is not None else ())

    def has_dissipator(self) -> bool:
        return bool(self.jumps) or (self.reset is not None and self.reset.rate > 0)

    def hamiltonian_part(self) -> 'LindbladSpec':
        return LindbladSpec(self.hamiltonian)

    def dissipator_part(self) -> 'LindbladSpec':
        return LindbladSpec(HamiltonianSpec.zero(self.n_qubits), self.jumps, self.reset)

    def with_hamiltonian(self, hamiltonian: HamiltonianSpec) -> 'LindbladSpec':
        return LindbladSpec(hamiltonian, self.jumps, self.reset)


# -------------------- Superoperators --------------------

def vec(matrix) -> np.ndarray:
    return as_complex_matrix(matrix).reshape(-1, order='F')


def unvec(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order='F')


@dataclass(frozen=True, eq=False)
class Superoperator:
    """4^n x 4^n matrix acting on column-stacked vec(rho)"""
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        dim = 4 ** self.n_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"Superoperator on {self.n_qubits} qubits must be {dim}x{dim}, got {m.shape}")
        object.__setattr__(self, 'matrix', m)

    @classmethod
    def identity(cls, n_qubits: int) -> 'Superoperator':
        return cls(n_qubits, np.eye(4 ** n_qubits, dtype=complex))

    @classmethod
    def zero(cls, n_qubits: int) -> 'Superoperator':
        return cls(n_qubits, np.zeros((4 ** n_qubits,) * 2, dtype=complex))

    @classmethod
    def from_unitary(cls, u: UnitaryLike) -> 'Superoperator':
        u = unitary_matrix(u)
        return cls(unitary_qubits(u), np.kron(u.conj(), u))

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> 'Superoperator':
        kraus = [as_complex_matrix(k) for k in kraus]
        n = int(np.log2(kraus[0].shape[0]))
        return cls(n, sum(np.kron(k.conj(), k) for k in kraus))

    @classmethod
    def from_channel(cls, n_qubits: int, channel) -> 'Superoperator':
        """Tabulate a callable acting on matrices, one basis element at a time"""
        dim = 2 ** n_qubits
        columns = []
        for col in range(dim * dim):
            e = np.zeros(dim * dim, dtype=complex)
            e[col] = 1.0
            columns.append(vec(channel(unvec(e))))
        return cls(n_qubits, np.stack(columns, axis=1))

    def apply(self, rho: DensityMatrix, tol=None) -> DensityMatrix:
        if rho.n_qubits != self.n_qubits:
            raise ValueError(f"State on {rho.n_qubits} qubits, map on {self.n_qubits}")
        return DensityMatrix(unvec(self.matrix @ vec(rho.matrix)), tol=tol)

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(m))

    def compose(self, other: 'Superoperator') -> 'Superoperator':
        """self after other"""
        return Superoperator(self.n_qubits, self.matrix @ other.matrix)

    def power(self, r: int) -> 'Superoperator':
        return Superoperator(self.n_qubits, np.linalg.matrix_power(self.matrix, r))

    def exp(self, t: float) -> 'Superoperator':
        return Superoperator(self.n_qubits, matrix_exp(self.matrix, t))

    def commutator(self, other: 'Superoperator') -> 'Superoperator':
        return Superoperator(self.n_qubits, self.matrix @ other.matrix - other.matrix @ self.matrix)

    def __add__(self, other: 'Superoperator') -> 'Superoperator':
        return Superoperator(self.n_qubits, self.matrix + other.matrix)

    def __sub__(self, other: 'Superoperator') -> 'Superoperator':
        return Superoperator(self.n_qubits, self.matrix - other.matrix)

    def __mul__(self, scalar) -> 'Superoperator':
        return Superoperator(self.n_qubits, scalar * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: 'Superoperator') -> 'Superoperator':
        return self.compose(other)

    def choi(self) -> np.ndarray:
        return choi_matrix(self)

    def is_cptp(self, tol=None) -> bool:
        return is_cptp(self, tol)


def choi_matrix(superop) -> np.ndarray:
    """Unnormalized Choi matrix C = sum_ij Phi(E_ij) kron E_ij"""
    s = superop.matrix if isinstance(superop, Superoperator) else as_complex_matrix(superop)
    dim = int(round(np.sqrt(s.shape[0])))
    # s[c_out*d + r_out, c_in*d + r_in] under column stacking
    t = s.reshape(dim, dim, dim, dim)
    return t.transpose(1, 3, 0, 2).reshape(dim * dim, dim * dim)


def is_trace_preserving(superop, tol=None) -> bool:
    s = superop.matrix if isinstance(superop, Superoperator) else as_complex_matrix(superop)
    tol = get_simulation_params().get('cptp_tol') if tol is None else tol
    dim = int(round(np.sqrt(s.shape[0])))
    row = vec(np.eye(dim)).conj()
    return bool(np.max(np.abs(row @ s - row)) <= tol)


def is_cptp(superop, tol=None) -> bool:
    """Choi PSD and the trace-preservation row condition"""
    tol = get_simulation_params().get('cptp_tol') if tol is None else tol
    c = choi_matrix(superop)
    if np.max(np.abs(c - c.conj().T)) > tol:
        return False
    if np.min(np.linalg.eigvalsh((c + c.conj().T) / 2)) < -tol:
        return False
    return is_trace_preserving(superop, tol)


# -------------------- Liouvillian construction --------------------

def hamiltonian_superoperator(h: HamiltonianSpec) -> Superoperator:
    """-i (I kron H - H^T kron I)"""
    check_superop_cap(h.n_qubits)
    hm = h.matrix()
    eye = np.eye(hm.shape[0])
    return Superoperator(h.n_qubits, -1j * (np.kron(eye, hm) - np.kron(hm.T, eye)))


def jump_superoperator(jump_matrix: np.ndarray) -> np.ndarray:
    l = as_complex_matrix(jump_matrix)
    ldl = l.conj().T @ l
    eye = np.eye(l.shape[0])
    return np.kron(l.conj(), l) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)


def reset_superoperator(reset: ResetTerm) -> np.ndarray:
    """kappa (vec(rho_f) vec(I)^dagger - I)"""
    dim = 2 ** reset.n_qubits
    rho_f = reset.target_state().matrix
    return reset.rate * (np.outer(vec(rho_f), vec(np.eye(dim)).conj()) - np.eye(dim * dim))


def dissipator_superoperator(spec: LindbladSpec) -> Superoperator:
    check_superop_cap(spec.n_qubits)
    dim2 = 4 ** spec.n_qubits
    d = np.zeros((dim2, dim2), dtype=complex)
    for jump in spec.jumps:
        d += jump_superoperator(jump.matrix())
    if spec.reset is not None:
        d += reset_superoperator(spec.reset)
    return Superoperator(spec.n_qubits, d)


def build_liouvillian(spec: LindbladSpec) -> Superoperator:
    """Dense Liouvillian of H + D under column stacking"""
    check_superop_cap(spec.n_qubits)
    return hamiltonian_superoperator(spec.hamiltonian) + dissipator_superoperator(spec)


def exact_propagator(spec: LindbladSpec, T: float) -> Superoperator:
    if T < 0:
        raise ValueError(f"Propagation time must be nonnegative, got {T}")
    return build_liouvillian(spec).exp(T)


def exact_propagate(spec: LindbladSpec, rho: DensityMatrix, T: float) -> DensityMatrix:
    """unvec(exp(T L) vec(rho))"""
    if rho.n_qubits != spec.n_qubits:
        raise ValueError(f"State on {rho.n_qubits} qubits, model on {spec.n_qubits}")
    if T == 0:
        return rho
    return exact_propagator(spec, T).apply(rho, tol=1e-8)


# -------------------- Norms --------------------

def pauli_norm(spec: LindbladSpec) -> float:
    """sum_k beta_0k + sum_mu (sum_k beta_muk)^2"""
    return spec.hamiltonian.pauli_norm() + dissipator_pauli_norm(spec)


def dissipator_pauli_norm(spec: LindbladSpec) -> float:
    return float(sum(j.pauli_weight() ** 2 for j in spec.all_jumps()))


def diamond_bounds(delta) -> Tuple[float, float]:
    """Choi two-sided estimate: ||C||_1 / 2^n <= ||Phi||_diamond <= ||C||_1"""
    s = delta.matrix if isinstance(delta, Superoperator) else as_complex_matrix(delta)
    c = choi_matrix(s)
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    if np.max(np.abs(c - c.conj().T), initial=0.0) > get_simulation_params().get('choi_hermitian_tol') * scale:
        raise ValueError("Map is not Hermiticity preserving (Choi matrix not Hermitian)")
    upper = trace_norm((c + c.conj().T) / 2)
    dim = int(round(np.sqrt(s.shape[0])))
    return upper / dim, upper


def diamond_upper(delta) -> float:
    return diamond_bounds(delta)[1]


def diamond_lower(delta) -> float:
    return diamond_bounds(delta)[0]
