"""
Simulation Engine
Second-order gadget K o N o K repeated r times: step counting and error
budgeting, exact density-matrix averaging over the sampled dissipation
branches, and Monte Carlo statevector trajectories
"""

import math
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from lindblad_model import (
    CapExceededError,
    HamiltonianSpec,
    LindbladSpec,
    Superoperator,
    check_superop_cap,
    diamond_upper,
    dissipator_pauli_norm,
    dissipator_superoperator,
    hamiltonian_superoperator,
    pauli_norm,
)
from pauli_linalg import (
    DensityMatrix,
    PauliString,
    StateVector,
    as_complex_matrix,
    is_hermitian,
    matrix_exp,
    pauli_to_matrix,
)
from simulation_params import get_simulation_params
from stochastic_channel import (
    StochasticChannel,
    apply_exact_matrix,
    choose_truncation_order,
    dissipator_step_channel,
    sample_branch_index,
    unitary_jump_rate,
)

logger = logging.getLogger(__name__)

InitialState = Union[StateVector, Sequence[Tuple[float, StateVector]]]


# -------------------- Hamiltonian subroutine --------------------

@dataclass(frozen=True, eq=False)
class HamiltonianSubroutine:
    """Approximation K of exp(-i H dt/2) with a certified diamond-norm error"""
    kind: str
    hamiltonian: HamiltonianSpec
    dt: float
    eps_H: float
    inner_steps: int = 1
    certified_bound: float = 0.0

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def half_step(self) -> float:
        return self.dt / 2

    @cached_property
    def factors(self) -> Tuple[Tuple[float, float, PauliString], ...]:
        """(cos, sin, P) of exp(-i beta P tau / N) for one inner Trotter step"""
        theta = self.half_step / self.inner_steps
        return tuple((math.cos(beta * theta), math.sin(beta * theta), p) for beta, p in self.hamiltonian.terms)

    @cached_property
    def unitary(self) -> np.ndarray:
        if self.kind == 'exact':
            return matrix_exp(self.hamiltonian.matrix(), -0.5j * self.dt)
        dim = 2 ** self.n_qubits
        step = np.eye(dim, dtype=complex)
        for c, s, p in self.factors:
            step = (c * np.eye(dim) - 1j * s * pauli_to_matrix(p)) @ step
        return np.linalg.matrix_power(step, self.inner_steps)

    def apply_state(self, amplitudes: np.ndarray) -> np.ndarray:
        if not self.hamiltonian.terms or self.dt == 0:
            return amplitudes
        if self.kind == 'exact':
            return self.unitary @ amplitudes
        for _ in range(self.inner_steps):
            for c, s, p in self.factors:
                amplitudes = c * amplitudes - 1j * s * p.apply(amplitudes)
        return amplitudes

    def apply_density(self, rho: np.ndarray) -> np.ndarray:
        if not self.hamiltonian.terms or self.dt == 0:
            return rho
        u = self.unitary
        return u @ rho @ u.conj().T

    def superoperator(self) -> Superoperator:
        return Superoperator.from_unitary(self.unitary)


def trotter_certified_bound(h: HamiltonianSpec, tau: float, inner_steps: int) -> float:
    """2 * sum_{j<k} ||[A_j, A_k]|| tau^2 / (2N), with ||[beta P, beta' P']|| = 2 beta beta' for anticommuting strings"""
    terms = h.terms
    comm = 0.0
    for j in range(len(terms)):
        for k in range(j + 1, len(terms)):
            if not terms[j][1].commutes_with(terms[k][1]):
                comm += 2 * terms[j][0] * terms[k][0]
    return 2 * comm * tau ** 2 / (2 * inner_steps)


def build_ham_subroutine(h: HamiltonianSpec, dt: float, eps_H_budget: float,
                         kind: str = 'exact') -> HamiltonianSubroutine:
    """Exact half-step exponential, or first-order Pauli Trotter meeting eps_H_budget"""
    if eps_H_budget < 0:
        raise ValueError(f"eps_H budget must be nonnegative, got {eps_H_budget}")
    if kind == 'exact':
        return HamiltonianSubroutine('exact', h, dt, 0.0)
    if kind != 'trotter':
        raise ValueError(f"Unknown Hamiltonian subroutine kind: {kind}")
    if eps_H_budget == 0:
        raise ValueError("Trotter subroutine needs a positive eps_H budget")
    for _, p in h.terms:
        if not p.is_hermitian():
            raise ValueError(f"Trotter factors need Hermitian Pauli terms, got phase {p.phase_label}")
    tau = dt / 2
    if len(h.terms) <= 1:
        inner_steps = 1
    else:
        lam = h.pauli_norm() * tau
        inner_steps = max(1, math.ceil(lam ** 2 / (eps_H_budget / 2)))
    bound = trotter_certified_bound(h, tau, inner_steps)
    logger.debug(f"Trotter subroutine: {inner_steps} inner steps, certified bound {bound:.3e}")
    return HamiltonianSubroutine('trotter', h, dt, eps_H_budget, inner_steps, bound)


def unitary_diamond_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Exact diamond distance between the channels of two unitaries"""
    w = as_complex_matrix(u).conj().T @ as_complex_matrix(v)
    angles = np.sort(np.angle(np.linalg.eigvals(w)))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    width = 2 * np.pi - np.max(gaps)
    if width >= np.pi:
        return 2.0
    return float(2 * math.sin(width / 2))


# -------------------- Plans --------------------

@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    estimate: float
    std_error: float
    n_traj: int
    prep_count: int = 0
    length_histogram: Dict[int, int] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            'estimate': self.estimate,
            'std_error': self.std_error,
            'n_traj': self.n_traj,
            'prep_count': self.prep_count,
            'length_histogram': {str(k): v for k, v in sorted(self.length_histogram.items())},
        }


@dataclass(frozen=True, eq=False)
class SimulationPlan:
    """Everything needed to run r gadgets of length dt = T / r"""
    spec: LindbladSpec
    T: float
    epsilon: float
    c0: float
    r: int
    ham_sub: HamiltonianSubroutine
    taylor_K: int
    taylor_err: float
    step_channels: Tuple[StochasticChannel, ...]
    mode: str = 'dm'
    n_traj: int = 1000
    observable: Optional[np.ndarray] = None
    master_seed: int = 0
    eps_H_budget: float = 0.0
    pauli_norm: float = 0.0
    dissipator_pauli_norm: float = 0.0

    @property
    def dt(self) -> float:
        return self.T / self.r if self.r else 0.0

    @property
    def n_qubits(self) -> int:
        return self.spec.n_qubits

    def channel_at(self, step: int) -> StochasticChannel:
        return self.step_channels[step] if len(self.step_channels) > 1 else self.step_channels[0]


def generator_norms(spec: LindbladSpec) -> Tuple[float, float]:
    """Choi upper bounds on the diamond norms of H and D, or 2 * Pauli norm above the cap"""
    try:
        check_superop_cap(spec.n_qubits)
    except CapExceededError:
        logger.warning(f"{spec.n_qubits} qubits above the superoperator cap; using Pauli-norm surrogates")
        return 2 * spec.hamiltonian.pauli_norm(), 2 * dissipator_pauli_norm(spec)
    h = diamond_upper(hamiltonian_superoperator(spec.hamiltonian)) if spec.hamiltonian.terms else 0.0
    d = diamond_upper(dissipator_superoperator(spec)) if spec.has_dissipator() else 0.0
    return h, d


def steps_from_norms(pn: float, T: float, epsilon: float, c0: float,
                     h_norm: float, d_norm: float, jump_rate: float) -> Tuple[int, float]:
    """Step count with the validity condition and a*dt <= 1 enforced"""
    if not T > 0:
        raise ValueError(f"Total time must be positive, got {T}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if c0 < 0:
        raise ValueError(f"c0 must be nonnegative, got {c0}")
    r = math.ceil(math.sqrt((16 / 3) * (1 + 6 * c0) / epsilon) * (pn * T) ** 1.5)
    r_valid = math.ceil(T * (h_norm / 2 + d_norm))
    r_rate = math.ceil(T * jump_rate)
    r_final = max(1, r, r_valid, r_rate)
    if r_final > r:
        logger.info(f"Step count raised from {r} to {r_final} by the validity condition")
    return r_final, epsilon / (4 * r_final)


def step_count(spec: LindbladSpec, T: float, epsilon: float, c0: float) -> Tuple[int, float]:
    """r = ceil(sqrt((16/3)(1+6c0)/eps) (||L||_pauli T)^1.5) and eps_H budget eps/(4r)"""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    h_norm, d_norm = generator_norms(spec)
    return steps_from_norms(pauli_norm(spec), T, epsilon, c0, h_norm, d_norm, unitary_jump_rate(spec))


def truncation_target(c0: float, dissipator_pn: float, dt: float) -> float:
    """c0 (2 ||D||_pauli dt)^3 floored at the configured attainable error"""
    floor = get_simulation_params().get('taylor_error_floor')
    return max(c0 * (2 * dissipator_pn * dt) ** 3, floor)


def select_taylor_order(spec: LindbladSpec, dt: float, c0: float, dissipator_pn: float = None) -> int:
    a = unitary_jump_rate(spec)
    if a == 0 or dt == 0:
        return 0
    dpn = dissipator_pauli_norm(spec) if dissipator_pn is None else dissipator_pn
    return choose_truncation_order(a, dt, truncation_target(c0, dpn, dt),
                                   get_simulation_params().get('taylor_max_order'))


def check_observable(observable, n_qubits: int) -> Optional[np.ndarray]:
    if observable is None:
        return None
    o = as_complex_matrix(observable)
    if o.shape != (2 ** n_qubits,) * 2:
        raise ValueError(f"Observable shape {o.shape} does not match {n_qubits} qubits")
    if not is_hermitian(o):
        raise ValueError("Observable is not Hermitian")
    return o


def plan_simulation(spec: LindbladSpec, T: float, epsilon: float = 1e-3, c0: float = 0.0,
                    mode: str = 'dm', n_traj: int = 1000, observable=None, master_seed: int = 0,
                    ham_kind: str = 'exact', taylor_K: int = None, r: int = None) -> SimulationPlan:
    """
    Choose r, the Hamiltonian subroutine and the truncation order for a run

    Args:
        spec: Lindbladian to simulate
        T: total time (T = 0 gives an empty plan)
        epsilon: target diamond-norm accuracy
        c0: constant of the dissipator requirement eps_D <= c0 (||D|| dt)^3
        mode: 'dm' (exact averaging) or 'traj' (Monte Carlo trajectories)
        taylor_K: fixed truncation order (chosen from c0 when None)
        r: fixed number of gadgets (chosen by step_count when None)
    """
    if mode not in ('dm', 'traj'):
        raise ValueError(f"Unknown mode: {mode}")
    if T < 0:
        raise ValueError(f"Total time must be nonnegative, got {T}")
    if mode == 'traj' and n_traj < 1:
        raise ValueError(f"n_traj must be positive, got {n_traj}")
    if master_seed < 0 or master_seed >= 2 ** 64:
        raise ValueError("Seed must be a 64-bit unsigned integer")
    observable = check_observable(observable, spec.n_qubits)
    pn = pauli_norm(spec)
    dpn = dissipator_pauli_norm(spec)

    if T == 0:
        r, eps_H = 0, epsilon
        dt = 0.0
    elif r is None:
        r, eps_H = step_count(spec, T, epsilon, c0)
        dt = T / r
    else:
        if r < 1:
            raise ValueError(f"r must be positive, got {r}")
        dt = T / r
        h_norm, d_norm = generator_norms(spec)
        if (h_norm / 2 + d_norm) * dt > 1 + 1e-12:
            raise ValueError(f"Validity condition violated: (|H|/2 + |D|) dt = {(h_norm / 2 + d_norm) * dt:.4g} > 1")
        eps_H = epsilon / (4 * r)

    K = select_taylor_order(spec, dt, c0, dpn) if taylor_K is None else taylor_K
    channel, err = dissipator_step_channel(spec, dt, K)
    ham_sub = build_ham_subroutine(spec.hamiltonian, dt, eps_H, ham_kind)
    logger.info(f"Plan: r={r}, dt={dt:.6g}, K={K}, taylor_err={err:.3e}, ham={ham_sub.kind}")
    return SimulationPlan(spec=spec, T=T, epsilon=epsilon, c0=c0, r=r, ham_sub=ham_sub, taylor_K=K,
                          taylor_err=err, step_channels=(channel,), mode=mode, n_traj=n_traj,
                          observable=observable, master_seed=master_seed, eps_H_budget=eps_H,
                          pauli_norm=pn, dissipator_pauli_norm=dpn)


def schedule_plan(hamiltonian: HamiltonianSpec, channels: Sequence[StochasticChannel], T: float,
                  mode: str = 'dm', n_traj: int = 1000, observable=None, master_seed: int = 0) -> SimulationPlan:
    """One gadget per supplied step channel, exact Hamiltonian half-steps"""
    channels = tuple(channels)
    if not channels:
        raise ValueError("Schedule needs at least one step channel")
    if mode not in ('dm', 'traj'):
        raise ValueError(f"Unknown mode: {mode}")
    if any(ch.n_qubits != hamiltonian.n_qubits for ch in channels):
        raise ValueError("Step channels and Hamiltonian act on different qubit counts")
    r = len(channels)
    spec = LindbladSpec(hamiltonian)
    return SimulationPlan(spec=spec, T=T, epsilon=1.0, c0=0.0, r=r,
                          ham_sub=build_ham_subroutine(hamiltonian, T / r, 0.0, 'exact'), taylor_K=0,
                          taylor_err=0.0, step_channels=channels, mode=mode, n_traj=n_traj,
                          observable=check_observable(observable, hamiltonian.n_qubits),
                          master_seed=master_seed, pauli_norm=hamiltonian.pauli_norm())


# -------------------- Density-matrix mode --------------------

def gadget_superoperator(plan: SimulationPlan, step: int = 0) -> Superoperator:
    """K o N o K for one step"""
    check_superop_cap(plan.n_qubits)
    k_hat = plan.ham_sub.superoperator()
    n_hat = plan.channel_at(step).superoperator()
    return k_hat @ n_hat @ k_hat


def simulated_propagator(plan: SimulationPlan) -> Superoperator:
    """Product of all r gadgets"""
    total = Superoperator.identity(plan.n_qubits)
    for step in range(plan.r):
        total = gadget_superoperator(plan, step) @ total
    return total


def run_density_matrix(plan: SimulationPlan, rho0: DensityMatrix) -> DensityMatrix:
    """Apply the gadget r times, averaging every N block exactly"""
    check_superop_cap(plan.n_qubits)
    if rho0.n_qubits != plan.n_qubits:
        raise ValueError(f"State on {rho0.n_qubits} qubits, plan on {plan.n_qubits}")
    tol = get_simulation_params().get('cptp_tol')
    m = np.array(rho0.matrix)
    for step in range(plan.r):
        m = plan.ham_sub.apply_density(m)
        m = apply_exact_matrix(plan.channel_at(step), m)
        m = plan.ham_sub.apply_density(m)
        DensityMatrix(m, tol=tol)
    return DensityMatrix(m, tol=tol)


# -------------------- Trajectory mode --------------------

def _substream(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def _initial_amplitudes(initial: InitialState, rng: np.random.Generator) -> np.ndarray:
    if isinstance(initial, StateVector):
        return np.array(initial.amplitudes)
    weights = np.array([w for w, _ in initial], dtype=float)
    j = rng.choice(len(initial), p=weights / weights.sum())
    return np.array(initial[j][1].amplitudes)


def _run_trajectory(plan: SimulationPlan, initial: InitialState, index: int, branch_policy=None):
    rng = _substream(plan.master_seed, index)
    amps = _initial_amplitudes(initial, rng)
    preps = 0
    lengths = Counter()
    previous = None
    for step in range(plan.r):
        channel = plan.channel_at(step)
        amps = plan.ham_sub.apply_state(amps)
        if branch_policy is None:
            i = sample_branch_index(channel, rng)
        else:
            i = branch_policy.next_branch(step, previous, channel, rng)
        op = channel.operations[i].sample(rng)
        amps = op.apply_state(amps, rng)
        if op.is_prepare:
            preps += 1
        else:
            lengths[op.length] += 1
        amps = plan.ham_sub.apply_state(amps)
        previous = i
    value = float(np.real(np.vdot(amps, plan.observable @ amps)) / np.real(np.vdot(amps, amps)))
    return value, preps, lengths


def _run_batch(plan: SimulationPlan, initial: InitialState, indices: range, branch_policy=None):
    values, preps, lengths = [], 0, Counter()
    for j in indices:
        v, p, h = _run_trajectory(plan, initial, j, branch_policy)
        values.append(v)
        preps += p
        lengths.update(h)
    return values, preps, lengths


def run_trajectories(plan: SimulationPlan, rho0_pure: InitialState, branch_policy=None) -> TrajectoryResult:
    """
    Monte Carlo estimate of tr(O rho(T)) from independent statevector trajectories

    Trajectory j draws from SeedSequence([master_seed, j]), so the estimate does not
    depend on batch size or on the number of joblib workers.
    """
    params = get_simulation_params()
    cap = params.get('statevector_qubit_cap')
    if plan.n_qubits > cap:
        raise CapExceededError(f"{plan.n_qubits} qubits exceeds the statevector cap of {cap}")
    if plan.observable is None:
        raise ValueError("Trajectory mode needs an observable")
    if isinstance(rho0_pure, DensityMatrix):
        raise ValueError("Trajectory mode takes a pure state or an explicit pure-state ensemble")
    n = plan.n_traj
    batch = max(1, params.get('trajectory_batch_size'))
    batches = [range(s, min(s + batch, n)) for s in range(0, n, batch)]
    results = Parallel(n_jobs=params.get('n_jobs'))(
        delayed(_run_batch)(plan, rho0_pure, idx, branch_policy) for idx in batches
    )
    values, preps, lengths = [], 0, Counter()
    for v, p, h in results:
        values.extend(v)
        preps += p
        lengths.update(h)
    estimate = math.fsum(values) / n
    if n > 1:
        var = math.fsum((v - estimate) ** 2 for v in values) / (n - 1)
        std_error = math.sqrt(var / n)
    else:
        std_error = 0.0
    logger.info(f"Trajectories: n={n}, estimate={estimate:.6g} +/- {std_error:.2g}, preps={preps}")
    return TrajectoryResult(estimate, std_error, n, preps, dict(lengths))


def run_plan(plan: SimulationPlan, initial):
    """Dispatch on plan.mode; density-matrix mode accepts pure states and ensembles too"""
    if plan.mode == 'traj':
        return run_trajectories(plan, initial)
    if isinstance(initial, StateVector):
        initial = initial.to_density_matrix()
    elif not isinstance(initial, DensityMatrix):
        initial = DensityMatrix.from_ensemble(initial)
    return run_density_matrix(plan, initial)


# -------------------- Reports --------------------

def error_budget(plan: SimulationPlan) -> dict:
    """Error-bound terms for this plan, plus any truncation error above the c0 requirement"""
    r, dt, pn = plan.r, plan.dt, plan.pauli_norm
    splitting = (8 / 3) * r * (pn * dt) ** 3
    dissipator = 16 * r * plan.c0 * (pn * dt) ** 3
    hamiltonian = 2 * r * plan.ham_sub.certified_bound
    required = plan.c0 * (2 * plan.dissipator_pauli_norm * dt) ** 3
    excess = r * max(0.0, plan.taylor_err - required)
    return {
        'splitting_term': splitting,
        'dissipator_term': dissipator,
        'hamiltonian_term': hamiltonian,
        'truncation_excess': excess,
        'gadget_error_bound': splitting + dissipator + hamiltonian + excess,
    }


def gadget_error_bound(plan: SimulationPlan) -> float:
    return error_budget(plan)['gadget_error_bound']


def oracle_cost_report(plan: SimulationPlan) -> dict:
    """Oracle call counts and formula-only estimates for a truncated-Taylor K"""
    h = plan.spec.hamiltonian
    s = len(h.terms)
    n = plan.n_qubits
    dt = plan.dt
    weights = np.asarray(plan.channel_at(0).probabilities)
    lengths = [op.length if hasattr(op, 'length') else 0 for op in plan.channel_at(0).operations]
    report = {
        'oracle_calls_A': plan.r,
        'oracle_calls_K': 2 * plan.r,
        'expected_factors_per_A': float(np.dot(weights, lengths)),
        'hamiltonian_terms': s,
        'trotter_exponentials_per_K': plan.ham_sub.inner_steps * s if plan.ham_sub.kind == 'trotter' else 0,
        'taylor_series_gates_per_K': None,
        'taylor_series_ancillas': None,
    }
    eps_H = plan.eps_H_budget
    hdt = dt * h.pauli_norm()
    if s and eps_H > 0 and hdt > 0:
        report['taylor_series_gates_per_K'] = hdt * s * n * max(1.0, math.log(max(hdt / eps_H, 1.0)))
        report['taylor_series_ancillas'] = max(1.0, math.log2(max(s, 2))) * max(1.0, math.log(max(dt / eps_H, 1.0)))
    return report
