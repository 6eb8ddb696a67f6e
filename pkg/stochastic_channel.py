"""
Stochastic Channels
Channels that are convex mixtures of unitary conjugations and a fixed-state
preparation: exact mixture application, branch sampling, and the truncated
Poisson/Taylor construction turning unitary-jump dissipators into such channels
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from lindblad_model import (
    HamiltonianSpec,
    JumpSpec,
    LindbladSpec,
    ResetTerm,
    Superoperator,
    UnitaryLike,
    check_superop_cap,
    unitary_matrix,
    unitary_qubits,
)
from pauli_linalg import (
    DensityMatrix,
    PauliString,
    StateVector,
    all_pauli_strings,
    as_complex_matrix,
    is_unitary,
)

logger = logging.getLogger(__name__)


def _conjugate(u: UnitaryLike, rho: np.ndarray) -> np.ndarray:
    if isinstance(u, PauliString):
        # P rho P^dagger using row action twice
        return u.apply(u.apply(rho).conj().T).conj().T
    return u @ rho @ u.conj().T


def _act(u: UnitaryLike, amplitudes: np.ndarray) -> np.ndarray:
    return u.apply(amplitudes) if isinstance(u, PauliString) else u @ amplitudes


# -------------------- Primitive operations --------------------

@dataclass(frozen=True, eq=False)
class PrimitiveOperation:
    """Either a unitary conjugation or a replacement by a sample of a pure-state ensemble"""
    kind: str
    unitary: Optional[UnitaryLike] = None
    ensemble: Tuple[Tuple[float, StateVector], ...] = ()
    length: int = 0

    def __post_init__(self):
        if self.kind == 'unitary':
            if self.unitary is None:
                raise ValueError("Unitary operation needs a payload")
            if not isinstance(self.unitary, PauliString):
                u = as_complex_matrix(self.unitary)
                if not is_unitary(u):
                    raise ValueError("Unitary operation payload is not unitary")
                object.__setattr__(self, 'unitary', u)
        elif self.kind == 'prepare':
            ensemble = tuple((float(w), s) for w, s in self.ensemble)
            weights = np.array([w for w, _ in ensemble])
            if not ensemble or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("Prepare ensemble weights must be nonnegative and sum to 1")
            object.__setattr__(self, 'ensemble', ensemble)
        else:
            raise ValueError(f"Unknown operation kind: {self.kind}")

    @classmethod
    def from_unitary(cls, u: UnitaryLike, length: int = 1) -> 'PrimitiveOperation':
        return cls('unitary', unitary=u, length=length)

    @classmethod
    def identity(cls, n_qubits: int) -> 'PrimitiveOperation':
        return cls('unitary', unitary=PauliString.identity(n_qubits), length=0)

    @classmethod
    def prepare(cls, ensemble: Sequence[Tuple[float, StateVector]]) -> 'PrimitiveOperation':
        return cls('prepare', ensemble=tuple(ensemble))

    @property
    def n_qubits(self) -> int:
        if self.kind == 'prepare':
            return self.ensemble[0][1].n_qubits
        return unitary_qubits(self.unitary)

    @property
    def is_prepare(self) -> bool:
        return self.kind == 'prepare'

    def target_state(self) -> DensityMatrix:
        return DensityMatrix.from_ensemble(self.ensemble)

    def unitary_matrix(self) -> np.ndarray:
        return unitary_matrix(self.unitary)

    def apply_exact(self, rho: np.ndarray) -> np.ndarray:
        if self.is_prepare:
            return self.target_state().matrix * np.trace(rho)
        return _conjugate(self.unitary, rho)

    def sample(self, rng: np.random.Generator) -> 'PrimitiveOperation':
        return self

    def apply_state(self, amplitudes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Trajectory update; prepare branches draw a pure state from the ensemble"""
        if self.is_prepare:
            weights = np.array([w for w, _ in self.ensemble])
            j = rng.choice(len(self.ensemble), p=weights / weights.sum())
            return np.array(self.ensemble[j][1].amplitudes)
        return _act(self.unitary, amplitudes)

    def superoperator(self) -> Superoperator:
        if self.is_prepare:
            dim = 2 ** self.n_qubits
            rho_f = self.target_state().matrix
            return Superoperator(self.n_qubits,
                                 np.outer(rho_f.reshape(-1, order='F'), np.eye(dim).reshape(-1, order='F')))
        return Superoperator.from_unitary(self.unitary)


@dataclass(frozen=True, eq=False)
class UnitaryWalk:
    """Lazy branch: a product of `length` unitaries drawn i.i.d. with the given weights"""
    length: int
    unitaries: Tuple[UnitaryLike, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.length < 1 or len(self.unitaries) != len(w) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("UnitaryWalk needs length >= 1 and a probability vector over its unitaries")

    @property
    def n_qubits(self) -> int:
        return unitary_qubits(self.unitaries[0])

    @property
    def is_prepare(self) -> bool:
        return False

    def _all_pauli(self) -> bool:
        return all(isinstance(u, PauliString) for u in self.unitaries)

    def sample(self, rng: np.random.Generator) -> PrimitiveOperation:
        picks = rng.choice(len(self.unitaries), size=self.length, p=np.asarray(self.weights))
        if self._all_pauli():
            acc = PauliString.identity(self.n_qubits)
            for i in picks:
                acc = self.unitaries[i].compose(acc)
            return PrimitiveOperation.from_unitary(acc, length=self.length)
        acc = np.eye(2 ** self.n_qubits, dtype=complex)
        for i in picks:
            acc = unitary_matrix(self.unitaries[i]) @ acc
        return PrimitiveOperation.from_unitary(acc, length=self.length)

    def _mix_once(self, rho: np.ndarray) -> np.ndarray:
        return sum(w * _conjugate(u, rho) for w, u in zip(self.weights, self.unitaries) if w > 0)

    def apply_exact(self, rho: np.ndarray) -> np.ndarray:
        for _ in range(self.length):
            rho = self._mix_once(rho)
        return rho

    def apply_state(self, amplitudes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.sample(rng).apply_state(amplitudes, rng)

    def superoperator(self) -> Superoperator:
        once = sum(w * Superoperator.from_unitary(u).matrix for w, u in zip(self.weights, self.unitaries))
        return Superoperator(self.n_qubits, np.linalg.matrix_power(once, self.length))


Branch = Union[PrimitiveOperation, UnitaryWalk]


# -------------------- Channels --------------------

@dataclass(frozen=True, eq=False)
class StochasticChannel:
    """
    sum_i p_i A_i with at most one prepare branch

    Frozen: probabilities are checked once, and the same channel is sampled by every
    trajectory and every worker.
    """
    operations: Tuple[Branch, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        ops = tuple(self.operations)
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, 'operations', ops)
        object.__setattr__(self, 'probabilities', probs)
        if not ops or len(ops) != len(probs):
            raise ValueError("Channel needs one probability per operation")
        p = np.array(probs)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"Branch probabilities must be nonnegative and sum to 1 (sum={p.sum():.15f})")
        if sum(1 for op in ops if op.is_prepare) > 1:
            raise ValueError("At most one aggregate prepare branch is allowed")
        if len({op.n_qubits for op in ops}) != 1:
            raise ValueError("Channel branches act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.operations[0].n_qubits

    @property
    def n_branches(self) -> int:
        return len(self.operations)

    def definition_form(self) -> Tuple[float, List[float], Optional[DensityMatrix]]:
        """(q, lambda_i over unitary branches, rho_f or None)"""
        q = math.fsum(p for op, p in zip(self.operations, self.probabilities) if not op.is_prepare)
        lambdas = [p / q for op, p in zip(self.operations, self.probabilities) if not op.is_prepare] if q > 0 else []
        prep = [op for op in self.operations if op.is_prepare]
        return q, lambdas, (prep[0].target_state() if prep else None)

    def superoperator(self) -> Superoperator:
        check_superop_cap(self.n_qubits)
        return Superoperator(self.n_qubits,
                             sum(p * op.superoperator().matrix for op, p in zip(self.operations, self.probabilities)))


def apply_exact(ch: StochasticChannel, rho: DensityMatrix, tol=None) -> DensityMatrix:
    """sum_i p_i A_i(rho)"""
    if rho.n_qubits != ch.n_qubits:
        raise ValueError(f"State on {rho.n_qubits} qubits, channel on {ch.n_qubits}")
    return DensityMatrix(apply_exact_matrix(ch, rho.matrix), tol=tol)


def apply_exact_matrix(ch: StochasticChannel, rho: np.ndarray) -> np.ndarray:
    return sum(p * op.apply_exact(rho) for op, p in zip(ch.operations, ch.probabilities) if p > 0)


def sample_branch_indices(ch: StochasticChannel, rng: np.random.Generator, size=None):
    """i.i.d. branch indices; a scalar when size is None"""
    return rng.choice(ch.n_branches, size=size, p=np.asarray(ch.probabilities))


def sample_branch_index(ch: StochasticChannel, rng: np.random.Generator) -> int:
    return int(sample_branch_indices(ch, rng))


def sample_operation(ch: StochasticChannel, rng: np.random.Generator) -> PrimitiveOperation:
    """Draw branch i with probability p_i, then resolve lazy branches to a concrete operation"""
    return ch.operations[sample_branch_index(ch, rng)].sample(rng)


# -------------------- Dissipator construction --------------------

@dataclass(frozen=True)
class TaylorConfig:
    """Truncation order K, total rate a = sum |alpha_mu|^2 and step dt with a*dt <= 1"""
    truncation_order: int
    a: float
    dt: float

    def __post_init__(self):
        if self.truncation_order < 0:
            raise ValueError(f"Truncation order must be nonnegative, got {self.truncation_order}")
        if self.a < 0 or self.dt < 0:
            raise ValueError("Rate and step must be nonnegative")
        if self.a * self.dt > 1 + 1e-12:
            raise ValueError(f"a*dt = {self.a * self.dt:.6g} exceeds 1")

    @property
    def x(self) -> float:
        return self.a * self.dt

    def poisson_weights(self) -> np.ndarray:
        x = self.x
        return np.array([math.exp(-x) * x ** k / math.factorial(k) for k in range(self.truncation_order + 1)])

    def tail_mass(self) -> float:
        """sum_{k>K} e^-x x^k / k!, summed directly to avoid cancellation"""
        x = self.x
        if x == 0:
            return 0.0
        terms = []
        k = self.truncation_order + 1
        term = math.exp(-x) * x ** k / math.factorial(k)
        while term > 0 and (not terms or term > 1e-30 * terms[0]):
            terms.append(term)
            k += 1
            term *= x / k
        return math.fsum(terms)

    def error_bound(self) -> float:
        return 2.0 * self.tail_mass()

    def coarse_bound(self) -> float:
        """2 x^(K+1) / (K+1)!"""
        k = self.truncation_order + 1
        return 2.0 * self.x ** k / math.factorial(k)


def dissipator_to_stochastic(jumps: Sequence[Tuple[complex, UnitaryLike]], dt: float,
                             K: int) -> Tuple[StochasticChannel, float]:
    """Poisson-weighted random products of the jump unitaries, renormalized over k = 0..K"""
    if not jumps:
        raise ValueError("Need at least one unitary jump")
    rates = np.array([abs(alpha) ** 2 for alpha, _ in jumps], dtype=float)
    a = float(rates.sum())
    config = TaylorConfig(K, a, dt)
    n = unitary_qubits(jumps[0][1])
    unitaries = tuple(u if isinstance(u, PauliString) else as_complex_matrix(u) for _, u in jumps)

    if a == 0:
        return StochasticChannel((PrimitiveOperation.identity(n),), (1.0,)), 0.0

    weights = config.poisson_weights()
    weights = weights / math.fsum(weights)
    lambdas = tuple(rates / a)
    ops = [PrimitiveOperation.identity(n)]
    ops += [UnitaryWalk(k, unitaries, lambdas) for k in range(1, K + 1)]
    err = config.error_bound()
    logger.debug(f"Taylor channel: a*dt={config.x:.4g}, K={K}, err_bound={err:.3e}")
    return StochasticChannel(tuple(ops), tuple(weights)), err


def choose_truncation_order(a: float, dt: float, target: float, max_order: int) -> int:
    """Smallest K whose error bound is at most target"""
    for K in range(max_order + 1):
        if TaylorConfig(K, a, dt).error_bound() <= target:
            return K
    logger.warning(f"Truncation target {target:.3e} not reached by K={max_order}; using K={max_order}")
    return max_order


def reset_channel(q: float, ensemble: Sequence[Tuple[float, StateVector]]) -> StochasticChannel:
    """q * rho + (1 - q) * rho_f"""
    if not 0 <= q <= 1:
        raise ValueError(f"Survival probability q must lie in [0, 1], got {q}")
    prep = PrimitiveOperation.prepare(ensemble)
    return StochasticChannel((PrimitiveOperation.identity(prep.n_qubits), prep), (q, 1.0 - q))


def pauli_mixture_channel(probs: dict) -> StochasticChannel:
    """sum_P p_P P rho P for a {label: probability} table"""
    if not probs:
        raise ValueError("Pauli mixture needs at least one branch")
    ops, ps = [], []
    for label, p in probs.items():
        pauli = label if isinstance(label, PauliString) else PauliString(label)
        ops.append(PrimitiveOperation.from_unitary(pauli, length=0 if pauli.is_identity() else 1))
        ps.append(p)
    return StochasticChannel(tuple(ops), tuple(ps))


def dissipator_step_channel(spec: LindbladSpec, dt: float, K: int) -> Tuple[StochasticChannel, float]:
    """Stochastic step channel approximating exp(dt D) and its error bound"""
    n = spec.n_qubits
    if spec.reset is not None and spec.reset.rate > 0:
        if spec.jumps:
            raise ValueError("A dissipator may combine unitary jumps or a reset term, not both")
        return reset_channel(math.exp(-spec.reset.rate * dt), spec.reset.ensemble), 0.0
    if not spec.jumps:
        return StochasticChannel((PrimitiveOperation.identity(n),), (1.0,)), 0.0
    if not all(j.is_unitary_form for j in spec.jumps):
        raise ValueError("Every jump operator must have the unitary form alpha * U")
    return dissipator_to_stochastic([j.unitary_form for j in spec.jumps], dt, K)


def unitary_jump_rate(spec: LindbladSpec) -> float:
    """a = sum |alpha_mu|^2 over unitary-form jumps"""
    return float(sum(j.rate for j in spec.jumps if j.is_unitary_form))


# -------------------- Example models --------------------

def depolarizing_jumps(n_qubits: int, gamma: float) -> Tuple[JumpSpec, ...]:
    """All 4^n - 1 non-identity Pauli strings with rate gamma / 4^n"""
    if gamma < 0:
        raise ValueError(f"Depolarizing rate must be nonnegative, got {gamma}")
    if gamma == 0:
        return ()
    beta = math.sqrt(gamma / 4 ** n_qubits)
    return tuple(JumpSpec.from_pauli(beta, p) for p in all_pauli_strings(n_qubits, include_identity=False))


def dephasing_jumps(n_qubits: int, Gamma: float) -> Tuple[JumpSpec, ...]:
    """sqrt(Gamma / 2) Z_mu on every qubit"""
    if Gamma < 0:
        raise ValueError(f"Dephasing rate must be nonnegative, got {Gamma}")
    if Gamma == 0:
        return ()
    beta = math.sqrt(Gamma / 2)
    return tuple(JumpSpec.from_pauli(beta, PauliString.single(n_qubits, q, 'Z')) for q in range(n_qubits))


def pauli_rate_jumps(rates: dict) -> Tuple[JumpSpec, ...]:
    """sqrt(rate_P) P for a {label: rate} table"""
    jumps = []
    for label, rate in rates.items():
        if rate < 0:
            raise ValueError(f"Pauli rate for {label} must be nonnegative, got {rate}")
        pauli = label if isinstance(label, PauliString) else PauliString(label)
        if rate > 0 and not pauli.is_identity():
            jumps.append(JumpSpec.from_pauli(math.sqrt(rate), pauli))
    return tuple(jumps)


def make_example_channel(kind: str, hamiltonian: HamiltonianSpec = None, K: int = 12,
                         **params) -> Tuple[Optional[LindbladSpec], StochasticChannel]:
    """
    Build a named noise model and its step channel

    Args:
        kind: 'depolarizing' (n, gamma, dt), 'dephasing' (n, Gamma, dt),
              'pauli' (rates {label: rate}, dt) or 'reset' (q, ensemble, optional dt)
        hamiltonian: Hamiltonian attached to the returned LindbladSpec (zero by default)
        K: truncation order for the Poisson construction

    Returns:
        (LindbladSpec or None, StochasticChannel)
    """
    if kind == 'depolarizing':
        n = params['n']
        jumps = depolarizing_jumps(n, params['gamma'])
    elif kind == 'dephasing':
        n = params['n']
        jumps = dephasing_jumps(n, params['Gamma'])
    elif kind == 'pauli':
        rates = params['rates']
        n = len(next(iter(rates)))
        jumps = pauli_rate_jumps(rates)
    elif kind == 'reset':
        q = params['q']
        ensemble = tuple(params['ensemble'])
        channel = reset_channel(q, ensemble)
        dt = params.get('dt')
        if dt is None or q == 0:
            return None, channel
        n = channel.n_qubits
        h = hamiltonian or HamiltonianSpec.zero(n)
        return LindbladSpec(h, (), ResetTerm(-math.log(q) / dt, ensemble)), channel
    else:
        raise ValueError(f"Unknown example channel kind: {kind}")

    h = hamiltonian or HamiltonianSpec.zero(n)
    spec = LindbladSpec(h, jumps)
    channel, _ = dissipator_step_channel(spec, params['dt'], K)
    return spec, channel
