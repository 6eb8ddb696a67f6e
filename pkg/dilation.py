"""
Local Channel Dilation
Single-qubit Kraus channels applied qubit by qubit, either as Kraus sums or
through a Stinespring unitary on one reusable ancilla register, plus the
unital case written as a stochastic mixture of local unitaries
"""

import math
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from lindblad_model import Superoperator, UnitaryLike, unitary_matrix
from pauli_linalg import DensityMatrix, PauliString, as_complex_matrix, is_unitary, partial_trace, pauli_to_matrix
from stochastic_channel import PrimitiveOperation, StochasticChannel

logger = logging.getLogger(__name__)

KRAUS_TOL = 1e-10


def check_kraus(kraus: Sequence, tol: float = KRAUS_TOL) -> Tuple[np.ndarray, ...]:
    """Validate shapes and completeness sum_j K_j^dagger K_j = I"""
    ks = tuple(as_complex_matrix(k) for k in kraus)
    if not ks:
        raise ValueError("Kraus set is empty")
    d = ks[0].shape[0]
    if any(k.shape != (d, d) for k in ks):
        raise ValueError("Kraus operators must be square and of equal size")
    completeness = sum(k.conj().T @ k for k in ks)
    if np.max(np.abs(completeness - np.eye(d))) > tol:
        raise ValueError("Kraus set is not complete (sum K^dagger K != I)")
    return ks


# -------------------- Named channels --------------------

def amplitude_damping_kraus(p: float) -> Tuple[np.ndarray, np.ndarray]:
    """K0 = diag(1, sqrt(1-p)), K1 = sqrt(p) |0><1|"""
    if not 0 <= p <= 1:
        raise ValueError(f"Damping probability must lie in [0, 1], got {p}")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return k0, k1


def dephasing_kraus(p: float) -> Tuple[np.ndarray, np.ndarray]:
    """sqrt(1-p) I and sqrt(p) Z"""
    if not 0 <= p <= 1:
        raise ValueError(f"Dephasing probability must lie in [0, 1], got {p}")
    return math.sqrt(1 - p) * np.eye(2, dtype=complex), math.sqrt(p) * pauli_to_matrix(PauliString('Z'))


def completely_dephasing_kraus() -> Tuple[np.ndarray, np.ndarray]:
    return np.diag([1, 0]).astype(complex), np.diag([0, 1]).astype(complex)


# -------------------- Local channels --------------------

@dataclass(frozen=True, eq=False)
class LocalChannel:
    """Single-qubit channel with an optional supplied unitary-mixture form [(lambda_i, U_i)]"""
    kraus: Tuple[np.ndarray, ...]
    unitary_mixture: Optional[Tuple[Tuple[float, UnitaryLike], ...]] = None

    def __post_init__(self):
        ks = check_kraus(self.kraus)
        if ks[0].shape != (2, 2):
            raise ValueError(f"Local channels act on one qubit, got Kraus shape {ks[0].shape}")
        object.__setattr__(self, 'kraus', ks)
        if self.unitary_mixture is not None:
            mixture = tuple((float(w), u) for w, u in self.unitary_mixture)
            weights = np.array([w for w, _ in mixture])
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("Mixture weights must be nonnegative and sum to 1")
            for _, u in mixture:
                if not is_unitary(unitary_matrix(u)) or unitary_matrix(u).shape != (2, 2):
                    raise ValueError("Mixture entries must be single-qubit unitaries")
            object.__setattr__(self, 'unitary_mixture', mixture)
            mixed = sum(w * Superoperator.from_unitary(u).matrix for w, u in mixture)
            if np.max(np.abs(mixed - self.superoperator().matrix)) > KRAUS_TOL:
                raise ValueError("Unitary mixture does not reproduce the Kraus channel")

    @classmethod
    def from_unitary_mixture(cls, mixture: Sequence[Tuple[float, UnitaryLike]]) -> 'LocalChannel':
        kraus = tuple(math.sqrt(w) * unitary_matrix(u) for w, u in mixture if w > 0)
        return cls(kraus, tuple(mixture))

    @classmethod
    def amplitude_damping(cls, p: float) -> 'LocalChannel':
        return cls(amplitude_damping_kraus(p))

    @classmethod
    def dephasing(cls, p: float) -> 'LocalChannel':
        return cls(dephasing_kraus(p), ((1 - p, PauliString('I')), (p, PauliString('Z'))))

    @property
    def is_unital(self) -> bool:
        return bool(np.max(np.abs(sum(k @ k.conj().T for k in self.kraus) - np.eye(2))) <= KRAUS_TOL)

    def ancilla_qubits(self) -> int:
        return max(1, math.ceil(math.log2(len(self.kraus))))

    def superoperator(self) -> Superoperator:
        return Superoperator.from_kraus(self.kraus)

    def stinespring(self) -> np.ndarray:
        return stinespring_unitary(self.kraus, 2 ** self.ancilla_qubits())


@dataclass(frozen=True, eq=False)
class LocalNoiseModel:
    """sum_i lambda_i (G_0^(i) kron ... kron G_n^(i)), each component a {qubit: LocalChannel} map"""
    n_qubits: int
    components: Tuple[Tuple[float, Dict[int, LocalChannel]], ...]

    def __post_init__(self):
        comps = tuple((float(w), dict(a)) for w, a in self.components)
        object.__setattr__(self, 'components', comps)
        weights = np.array([w for w, _ in comps])
        if not comps or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("Component weights must be nonnegative and sum to 1")
        for _, assignments in comps:
            _check_assignments(assignments, self.n_qubits)

    def apply(self, rho: DensityMatrix, mode: str = 'kraus') -> DensityMatrix:
        total = sum(w * apply_local_noise(rho, a, mode).matrix for w, a in self.components if w > 0)
        return DensityMatrix(total)


# -------------------- Stinespring --------------------

def stinespring_unitary(kraus: Sequence, ancilla_dim: int) -> np.ndarray:
    """
    Unitary V on ancilla kron system with V (|0> kron |psi>) = sum_j |j> kron K_j |psi>

    The first block column stacks the Kraus operators; the rest is an orthonormal
    completion by Gram-Schmidt against standard basis vectors.
    """
    ks = check_kraus(kraus)
    if len(ks) > ancilla_dim:
        raise ValueError(f"{len(ks)} Kraus operators need an ancilla of dimension >= {len(ks)}, got {ancilla_dim}")
    d = ks[0].shape[0]
    big = d * ancilla_dim
    isometry = np.zeros((big, d), dtype=complex)
    for j, k in enumerate(ks):
        isometry[j * d:(j + 1) * d, :] = k

    columns = [isometry[:, i] for i in range(d)]
    for e in np.eye(big, dtype=complex):
        if len(columns) == big:
            break
        v = e.copy()
        for _ in range(2):
            for c in columns:
                v = v - np.vdot(c, v) * c
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            columns.append(v / norm)
    return np.column_stack(columns)


# -------------------- Application --------------------

def _check_assignments(assignments: Dict[int, LocalChannel], n_qubits: int):
    for q in assignments:
        if not 0 <= q < n_qubits:
            raise ValueError(f"Qubit {q} out of range for {n_qubits} qubits")


def _apply_on_axis(t: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)


def apply_kraus_on_qubit(rho: np.ndarray, kraus: Sequence[np.ndarray], qubit: int, n_qubits: int) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n_qubits))
    out = np.zeros_like(t, dtype=complex)
    for k in kraus:
        out += _apply_on_axis(_apply_on_axis(t, k, qubit), k.conj(), n_qubits + qubit)
    return out.reshape(rho.shape)


def apply_dilation_on_qubit(rho: np.ndarray, channel: LocalChannel, qubit: int, n_qubits: int) -> np.ndarray:
    """Fresh |0> ancilla register, V on (ancilla, qubit), trace the ancilla out"""
    l = channel.ancilla_qubits()
    v = channel.stinespring()
    total = l + n_qubits
    anc = np.zeros((2 ** l, 2 ** l), dtype=complex)
    anc[0, 0] = 1
    ext = np.kron(anc, rho).reshape((2,) * (2 * total))

    # V indexes (ancilla bits..., system qubit); act on those axes of rows then columns
    v_t = v.reshape((2,) * (2 * (l + 1)))
    in_axes = list(range(l)) + [l + qubit]
    for offset, op in ((0, v_t), (total, v_t.conj())):
        axes = [offset + a for a in in_axes]
        ext = np.tensordot(op, ext, axes=(list(range(l + 1, 2 * (l + 1))), axes))
        ext = np.moveaxis(ext, list(range(l + 1)), axes)
    dim = 2 ** total
    out = partial_trace(DensityMatrix(ext.reshape(dim, dim), tol=1e-9), range(l, total))
    return np.array(out.matrix)


def apply_local_noise(rho: DensityMatrix, assignments: Dict[int, LocalChannel], mode: str = 'kraus',
                      order: Iterable[int] = None) -> DensityMatrix:
    """
    Apply one local channel per assigned qubit

    Args:
        rho: input state
        assignments: {qubit: LocalChannel}
        mode: 'kraus' (direct Kraus sums) or 'dilation' (one reset ancilla register per qubit)
        order: qubit processing order (ascending by default)
    """
    n = rho.n_qubits
    _check_assignments(assignments, n)
    if mode not in ('kraus', 'dilation'):
        raise ValueError(f"Unknown local-noise mode: {mode}")
    qubits = sorted(assignments) if order is None else list(order)
    if sorted(qubits) != sorted(assignments):
        raise ValueError("order must list every assigned qubit exactly once")
    m = np.array(rho.matrix)
    for q in qubits:
        if mode == 'kraus':
            m = apply_kraus_on_qubit(m, assignments[q].kraus, q, n)
        else:
            m = apply_dilation_on_qubit(m, assignments[q], q, n)
    return DensityMatrix(m, tol=1e-9)


def local_unitary_mixture_channel(assignments: Dict[int, LocalChannel], n_qubits: int) -> StochasticChannel:
    """Tensor product of per-qubit unitary mixtures as one stochastic channel"""
    _check_assignments(assignments, n_qubits)
    factors = []
    for q in range(n_qubits):
        ch = assignments.get(q)
        if ch is None:
            factors.append(((1.0, PauliString('I')),))
        elif ch.unitary_mixture is None:
            raise ValueError(f"Channel on qubit {q} has no unitary-mixture form")
        else:
            factors.append(tuple((w, u) for w, u in ch.unitary_mixture if w > 0))

    ops, probs = [], []
    for combo in itertools.product(*factors):
        weight = math.prod(w for w, _ in combo)
        units = [u for _, u in combo]
        if all(isinstance(u, PauliString) for u in units):
            phase = math.prod(u.phase for u in units)
            u = PauliString(''.join(u.letters for u in units), phase)
            length = u.weight()
        else:
            matrices = [unitary_matrix(u) for u in units]
            u = matrices[0]
            for mtx in matrices[1:]:
                u = np.kron(u, mtx)
            length = sum(1 for mtx in matrices if not np.allclose(mtx, np.eye(2)))
        ops.append(PrimitiveOperation.from_unitary(u, length=length))
        probs.append(weight)
    total = math.fsum(probs)
    return StochasticChannel(tuple(ops), tuple(p / total for p in probs))
