"""
Time-Dependent Dissipators
Rate profiles, a Runge-Kutta oracle for time-ordered evolution, the
single-step splitting bound, per-step channel schedules and
time-correlated branch sampling
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lindblad_model import (
    CapExceededError,
    HamiltonianSpec,
    JumpSpec,
    LindbladSpec,
    Superoperator,
    UnitaryLike,
    check_superop_cap,
    choi_matrix,
    diamond_bounds,
    hamiltonian_superoperator,
    jump_superoperator,
    unitary_matrix,
    unitary_qubits,
    vec,
    unvec,
)
from pauli_linalg import DensityMatrix, PauliString, trace_norm
from simulation_engine import (
    SimulationPlan,
    build_ham_subroutine,
    check_observable,
    plan_simulation,
    run_density_matrix,
    run_plan,
    run_trajectories,
    steps_from_norms,
    truncation_target,
)
from simulation_params import get_simulation_params
from stochastic_channel import choose_truncation_order, dissipator_step_channel, sample_branch_index

logger = logging.getLogger(__name__)


class ValidityConditionError(ValueError):
    """(||H||/2 + sup ||D(t)||)(t - s) exceeds 1"""


# -------------------- Rate profiles --------------------

@dataclass(frozen=True)
class ConstantProfile:
    c: float
    kind = 'constant'

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"Rate must be nonnegative, got {self.c}")

    def __call__(self, t):
        return np.full(np.shape(t), self.c, dtype=float) if np.ndim(t) else float(self.c)

    def integral(self, t0: float, t1: float) -> float:
        return self.c * (t1 - t0)

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'c': self.c}


@dataclass(frozen=True)
class SinusoidProfile:
    """c0 + amp * sin(omega t), omega in rad per unit time"""
    c0: float
    amp: float
    omega: float
    kind = 'sinusoid'

    def __post_init__(self):
        if self.c0 < abs(self.amp):
            raise ValueError(f"Sinusoid rate goes negative: c0={self.c0}, amp={self.amp}")

    def __call__(self, t):
        v = self.c0 + self.amp * np.sin(self.omega * np.asarray(t, dtype=float))
        return v if np.ndim(t) else float(v)

    def integral(self, t0: float, t1: float) -> float:
        if self.omega == 0:
            return self.c0 * (t1 - t0)
        return self.c0 * (t1 - t0) - self.amp / self.omega * (math.cos(self.omega * t1) - math.cos(self.omega * t0))

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'c0': self.c0, 'amp': self.amp, 'omega': self.omega}


@dataclass(frozen=True)
class PiecewiseLinearProfile:
    """Linear interpolation between (t, rate) knots, held constant outside them"""
    knots: Tuple[Tuple[float, float], ...]
    kind = 'piecewise_linear'

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        object.__setattr__(self, 'knots', knots)
        if not knots:
            raise ValueError("Piecewise-linear profile needs at least one knot")
        ts = [t for t, _ in knots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("Knot times must be strictly increasing")
        if any(v < 0 for _, v in knots):
            raise ValueError("Knot rates must be nonnegative")

    def __call__(self, t):
        ts, vs = zip(*self.knots)
        v = np.interp(t, ts, vs)
        return v if np.ndim(t) else float(v)

    def integral(self, t0: float, t1: float) -> float:
        inner = [t for t, _ in self.knots if t0 < t < t1]
        pts = [t0] + inner + [t1]
        vals = [self(t) for t in pts]
        return math.fsum((b - a) * (va + vb) / 2 for a, b, va, vb in zip(pts, pts[1:], vals, vals[1:]))

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'knots': [list(k) for k in self.knots]}


def profile_from_dict(data: dict):
    kind = data.get('kind')
    if kind == 'constant':
        return ConstantProfile(float(data['c']))
    if kind == 'sinusoid':
        return SinusoidProfile(float(data['c0']), float(data['amp']), float(data['omega']))
    if kind == 'piecewise_linear':
        return PiecewiseLinearProfile(tuple(tuple(k) for k in data['knots']))
    raise ValueError(f"Unknown profile kind: {kind}")


# -------------------- Dissipator --------------------

@dataclass(frozen=True, eq=False)
class TimeDepDissipator:
    """D(t) with jumps sqrt(rate_mu(t)) U_mu; profiles give the rate |alpha_mu(t)|^2"""
    n_qubits: int
    jumps: Tuple[Tuple[object, UnitaryLike], ...]

    def __post_init__(self):
        object.__setattr__(self, 'jumps', tuple(self.jumps))
        for _, u in self.jumps:
            if unitary_qubits(u) != self.n_qubits:
                raise ValueError(f"Jump unitary acts on {unitary_qubits(u)} qubits, expected {self.n_qubits}")

    def rates(self, t: float) -> np.ndarray:
        return np.array([profile(t) for profile, _ in self.jumps], dtype=float)

    def jumps_at(self, t: float) -> Tuple[JumpSpec, ...]:
        out = []
        for (profile, u), rate in zip(self.jumps, self.rates(t)):
            if rate <= 0:
                continue
            alpha = math.sqrt(rate)
            out.append(JumpSpec.from_pauli(alpha, u) if isinstance(u, PauliString) else JumpSpec.from_unitary(alpha, u))
        return tuple(out)

    def spec_at(self, h: HamiltonianSpec, t: float) -> LindbladSpec:
        return LindbladSpec(h, self.jumps_at(t))

    def unit_weights(self) -> np.ndarray:
        """(sum of Pauli coefficients of U_mu)^2, so ||D(t)||_pauli = sum rate_mu(t) * weight_mu"""
        weights = []
        for _, u in self.jumps:
            if isinstance(u, PauliString):
                weights.append(1.0)
            else:
                weights.append(JumpSpec.from_unitary(1.0, u).pauli_weight() ** 2)
        return np.array(weights)

    def unit_superoperators(self) -> Tuple[np.ndarray, ...]:
        check_superop_cap(self.n_qubits)
        return tuple(jump_superoperator(unitary_matrix(u)) for _, u in self.jumps)

    def superoperator_at(self, t: float) -> np.ndarray:
        dim2 = 4 ** self.n_qubits
        total = np.zeros((dim2, dim2), dtype=complex)
        for rate, d in zip(self.rates(t), self.unit_superoperators()):
            total += rate * d
        return total

    def grid(self, s: float, t: float, points: int = None) -> np.ndarray:
        points = points or get_simulation_params().get('sup_grid_points')
        return np.linspace(s, t, max(points, 2))

    def sup_pauli_norm(self, s: float, t: float, points: int = None) -> float:
        weights = self.unit_weights()
        return float(max(np.dot(self.rates(x), weights) for x in self.grid(s, t, points)))

    def sup_jump_rate(self, s: float, t: float, points: int = None) -> float:
        return float(max(self.rates(x).sum() for x in self.grid(s, t, points)))

    def sup_choi_norm(self, s: float, t: float, points: int = None) -> float:
        """Grid maximum of the Choi upper bound on ||D(t')||_diamond"""
        if not self.jumps:
            return 0.0
        chois = [choi_matrix(d) for d in self.unit_superoperators()]
        best = 0.0
        for x in self.grid(s, t, points):
            c = sum(rate * ch for rate, ch in zip(self.rates(x), chois))
            best = max(best, trace_norm((c + c.conj().T) / 2))
        return best


# -------------------- ODE oracle --------------------

def _rk4(generator, x: np.ndarray, t0: float, t1: float, n_steps: int) -> np.ndarray:
    h = (t1 - t0) / n_steps
    for k in range(n_steps):
        t = t0 + k * h
        k1 = generator(t) @ x
        k2 = generator(t + h / 2) @ (x + h / 2 * k1)
        k3 = generator(t + h / 2) @ (x + h / 2 * k2)
        k4 = generator(t + h) @ (x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def _liouvillian_fn(d: TimeDepDissipator, h: HamiltonianSpec):
    check_superop_cap(d.n_qubits)
    dim2 = 4 ** d.n_qubits
    h_hat = hamiltonian_superoperator(h).matrix if h.terms else np.zeros((dim2, dim2), dtype=complex)
    units = d.unit_superoperators()

    def generator(t):
        total = h_hat.copy()
        for rate, unit in zip(d.rates(t), units):
            total += rate * unit
        return total
    return generator


def _check_interval(t0: float, t1: float, n_steps: Optional[int]) -> int:
    if t1 < t0:
        raise ValueError(f"t1 must not precede t0 ({t1} < {t0})")
    n_steps = n_steps or get_simulation_params().get('ode_default_steps')
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    return n_steps


def ode_propagate(d: TimeDepDissipator, h: HamiltonianSpec, rho: DensityMatrix,
                  t0: float, t1: float, n_steps: int = None) -> DensityMatrix:
    """Classical RK4 on vec(rho) with dvec/dt = L(t) vec"""
    n_steps = _check_interval(t0, t1, n_steps)
    if rho.n_qubits != d.n_qubits:
        raise ValueError(f"State on {rho.n_qubits} qubits, dissipator on {d.n_qubits}")
    if t1 == t0:
        return rho
    out = _rk4(_liouvillian_fn(d, h), vec(rho.matrix), t0, t1, n_steps)
    return DensityMatrix(unvec(out), tol=1e-8)


def ode_propagator(d: TimeDepDissipator, h: HamiltonianSpec, t0: float, t1: float,
                   n_steps: int = None) -> Superoperator:
    n_steps = _check_interval(t0, t1, n_steps)
    dim2 = 4 ** d.n_qubits
    return Superoperator(d.n_qubits, _rk4(_liouvillian_fn(d, h), np.eye(dim2, dtype=complex), t0, t1, n_steps))


# -------------------- Single-step bound --------------------

def splitting_bound_terms(h: HamiltonianSpec, d: TimeDepDissipator, s: float, t: float,
                          grid_points: int = None) -> Tuple[float, float, float]:
    """(||H||, sup ||D(t')||, sup ||[H, D(t')]||) as Choi upper bounds over the grid"""
    check_superop_cap(d.n_qubits)
    h_hat = hamiltonian_superoperator(h).matrix if h.terms else None
    h_norm = diamond_bounds(h_hat)[1] if h_hat is not None else 0.0
    d_sup = d.sup_choi_norm(s, t, grid_points)
    if h_hat is None or not d.jumps:
        return h_norm, d_sup, 0.0
    comm_chois = [choi_matrix(h_hat @ u - u @ h_hat) for u in d.unit_superoperators()]
    comm_sup = 0.0
    for x in d.grid(s, t, grid_points):
        c = sum(rate * ch for rate, ch in zip(d.rates(x), comm_chois))
        comm_sup = max(comm_sup, trace_norm((c + c.conj().T) / 2))
    return h_norm, d_sup, comm_sup


def splitting_step_bound(h: HamiltonianSpec, d: TimeDepDissipator, s: float, t: float,
                   grid_points: int = None, sup_window: Tuple[float, float] = None) -> float:
    """
    Single-step splitting bound (sup||[H, D]|| / 3)(||H||/2 + sup||D||)(t - s)^3

    Args:
        h: Hamiltonian
        d: time-dependent dissipator
        s, t: step window
        grid_points: grid size for the sup surrogates
        sup_window: interval the suprema are taken over (defaults to [s, t])

    Raises:
        ValidityConditionError: if (||H||/2 + sup||D||)(t - s) > 1
    """
    if t < s:
        raise ValueError(f"t must not precede s ({t} < {s})")
    lo, hi = sup_window if sup_window is not None else (s, t)
    h_norm, d_sup, comm_sup = splitting_bound_terms(h, d, lo, hi, grid_points)
    width = t - s
    validity = (h_norm / 2 + d_sup) * width
    if validity > 1 + 1e-12:
        raise ValidityConditionError(f"Validity condition violated: {validity:.4g} > 1")
    return comm_sup / 3 * (h_norm / 2 + d_sup) * width ** 3


def splitting_error(h: HamiltonianSpec, d: TimeDepDissipator, s: float, t: float,
                    n_ode: int = None) -> Tuple[float, float]:
    """Choi bounds on ||T exp(int L) - exp(H dt/2) T exp(int D) exp(H dt/2)||_diamond"""
    check_superop_cap(d.n_qubits)
    dt = t - s
    exact = ode_propagator(d, h, s, t, n_ode)
    dissipative = ode_propagator(d, HamiltonianSpec.zero(d.n_qubits), s, t, n_ode)
    if h.terms:
        half = hamiltonian_superoperator(h).exp(dt / 2)
        split = half @ dissipative @ half
    else:
        split = dissipative
    return diamond_bounds(exact - split)


# -------------------- Per-step schedules --------------------

def timedep_step_count(h: HamiltonianSpec, d: TimeDepDissipator, T: float, epsilon: float, c0: float,
                       grid_points: int = None) -> Tuple[int, float]:
    """Step count with ||L||_pauli replaced by its grid supremum over [0, T]"""
    pn = h.pauli_norm() + d.sup_pauli_norm(0.0, T, grid_points)
    try:
        check_superop_cap(d.n_qubits)
    except CapExceededError:
        logger.warning(f"{d.n_qubits} qubits above the superoperator cap; using Pauli-norm surrogates")
        h_norm, d_sup = 2 * h.pauli_norm(), 2 * d.sup_pauli_norm(0.0, T, grid_points)
    else:
        h_norm = diamond_bounds(hamiltonian_superoperator(h))[1] if h.terms else 0.0
        d_sup = d.sup_choi_norm(0.0, T, grid_points)
    return steps_from_norms(pn, T, epsilon, c0, h_norm, d_sup, d.sup_jump_rate(0.0, T, grid_points))


def plan_timedep(h: HamiltonianSpec, d: TimeDepDissipator, T: float, epsilon: float = 1e-3, c0: float = 0.0,
                 mode: str = 'dm', n_traj: int = 1000, observable=None, master_seed: int = 0,
                 ham_kind: str = 'exact', taylor_K: int = None, r: int = None,
                 grid_points: int = None) -> SimulationPlan:
    """Plan with one step channel per gadget, jump rates taken at each step's midpoint"""
    if mode not in ('dm', 'traj'):
        raise ValueError(f"Unknown mode: {mode}")
    if T == 0:
        return plan_simulation(d.spec_at(h, 0.0), 0.0, epsilon, c0, mode, n_traj, observable, master_seed, ham_kind)
    if not T > 0:
        raise ValueError(f"Total time must be positive, got {T}")
    if r is None:
        r, eps_H = timedep_step_count(h, d, T, epsilon, c0, grid_points)
    else:
        if r < 1:
            raise ValueError(f"r must be positive, got {r}")
        eps_H = epsilon / (4 * r)
    dt = T / r
    sup_pn_d = d.sup_pauli_norm(0.0, T, grid_points)
    if taylor_K is None:
        a_sup = d.sup_jump_rate(0.0, T, grid_points)
        max_order = get_simulation_params().get('taylor_max_order')
        taylor_K = 0 if a_sup == 0 else choose_truncation_order(a_sup, dt, truncation_target(c0, sup_pn_d, dt), max_order)

    channels, worst = [], 0.0
    for k in range(r):
        channel, err = dissipator_step_channel(d.spec_at(h, (k + 0.5) * dt), dt, taylor_K)
        channels.append(channel)
        worst = max(worst, err)
    logger.info(f"Time-dependent plan: r={r}, dt={dt:.6g}, K={taylor_K}, worst step err={worst:.3e}")
    return SimulationPlan(spec=d.spec_at(h, 0.0), T=T, epsilon=epsilon, c0=c0, r=r,
                          ham_sub=build_ham_subroutine(h, dt, eps_H, ham_kind), taylor_K=taylor_K,
                          taylor_err=worst, step_channels=tuple(channels), mode=mode, n_traj=n_traj,
                          observable=check_observable(observable, h.n_qubits), master_seed=master_seed,
                          eps_H_budget=eps_H, pauli_norm=h.pauli_norm() + sup_pn_d,
                          dissipator_pauli_norm=sup_pn_d)


def run_timedep(plan: SimulationPlan, initial):
    """Run a per-step schedule in the plan's mode"""
    return run_plan(plan, initial)


# -------------------- Correlated sampling --------------------

@dataclass(frozen=True, eq=False)
class CorrelationPolicy:
    """How the branch index of step k depends on the branch taken at step k - 1"""
    kind: str
    transition: Optional[np.ndarray] = None
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ('independent', 'fully_correlated', 'markov'):
            raise ValueError(f"Unknown correlation policy: {self.kind}")
        if self.kind == 'markov':
            if self.transition is None:
                raise ValueError("Markov policy needs a transition matrix")
            p = np.asarray(self.transition, dtype=float)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise ValueError(f"Transition matrix must be square, got shape {p.shape}")
            if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError("Transition matrix rows must be nonnegative and sum to 1")
            object.__setattr__(self, 'transition', p)
        if self.initial is not None:
            q = np.asarray(self.initial, dtype=float)
            if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
                raise ValueError("Initial branch distribution must be nonnegative and sum to 1")
            object.__setattr__(self, 'initial', q)

    @classmethod
    def independent(cls) -> 'CorrelationPolicy':
        return cls('independent')

    @classmethod
    def fully_correlated(cls) -> 'CorrelationPolicy':
        return cls('fully_correlated')

    @classmethod
    def markov_chain(cls, transition, initial=None) -> 'CorrelationPolicy':
        return cls('markov', np.asarray(transition, dtype=float), initial)

    def check_channel(self, n_branches: int):
        if self.kind == 'markov' and self.transition.shape[0] != n_branches:
            raise ValueError(f"Transition matrix is {self.transition.shape[0]}-dimensional, channel has {n_branches} branches")
        if self.initial is not None and len(self.initial) != n_branches:
            raise ValueError("Initial branch distribution does not match the channel")

    def first_distribution(self, channel) -> np.ndarray:
        return self.initial if self.initial is not None else np.asarray(channel.probabilities)

    def next_branch(self, step: int, previous: Optional[int], channel, rng: np.random.Generator) -> int:
        if previous is None:
            if self.initial is not None:
                return int(rng.choice(len(self.initial), p=self.initial))
            return sample_branch_index(channel, rng)
        if self.kind == 'independent':
            return sample_branch_index(channel, rng)
        if self.kind == 'fully_correlated':
            return previous
        row = self.transition[previous]
        return int(rng.choice(len(row), p=row))


def _check_schedule(plan: SimulationPlan, policy: CorrelationPolicy):
    sizes = {plan.channel_at(k).n_branches for k in range(max(plan.r, 1))}
    if len(sizes) != 1:
        raise ValueError("Correlated sampling needs the same branch layout at every step")
    policy.check_channel(sizes.pop())


def correlated_run(plan: SimulationPlan, policy: CorrelationPolicy, initial):
    """Trajectories whose branch choices follow the policy across steps"""
    _check_schedule(plan, policy)
    return run_trajectories(plan, initial, branch_policy=policy)


def correlated_density_matrix(plan: SimulationPlan, policy: CorrelationPolicy, rho0: DensityMatrix) -> DensityMatrix:
    """
    Exact average over the joint branch process

    Keeps one unnormalized state per last-taken branch, so the Markov case costs
    one gadget per branch per step.
    """
    _check_schedule(plan, policy)
    check_superop_cap(plan.n_qubits)
    if policy.kind == 'independent' and policy.initial is None:
        return run_density_matrix(plan, rho0)
    if plan.r == 0:
        return rho0
    ham = plan.ham_sub

    def gadget(step, i, m):
        op = plan.channel_at(step).operations[i]
        return ham.apply_density(op.apply_exact(ham.apply_density(m)))

    first = policy.first_distribution(plan.channel_at(0))
    sigma = [p * gadget(0, i, rho0.matrix) if p > 0 else None for i, p in enumerate(first)]
    n_branches = len(sigma)
    for step in range(1, plan.r):
        probs = plan.channel_at(step).probabilities
        new = []
        for j in range(n_branches):
            if policy.kind == 'fully_correlated':
                incoming = sigma[j]
            else:
                weights = [probs[j]] * n_branches if policy.kind == 'independent' else policy.transition[:, j]
                parts = [w * s for w, s in zip(weights, sigma) if s is not None and w > 0]
                incoming = sum(parts) if parts else None
            new.append(gadget(step, j, incoming) if incoming is not None else None)
        sigma = new
    total = sum(s for s in sigma if s is not None)
    return DensityMatrix(total, tol=get_simulation_params().get('cptp_tol'))
