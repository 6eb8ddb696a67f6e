"""
Verification Suites
Property and oracle checks run by `main.py verify`; every suite returns a
table with one row per instance: instance, measured, reference, ratio, pass
"""

import math
import logging
from typing import Callable, Dict, List

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from dilation import LocalChannel, apply_local_noise
from lindblad_model import (
    HamiltonianSpec,
    JumpSpec,
    LindbladSpec,
    diamond_bounds,
    dissipator_pauli_norm,
    dissipator_superoperator,
    exact_propagate,
    exact_propagator,
    pauli_norm,
)
from pauli_linalg import (
    DensityMatrix,
    PauliString,
    StateVector,
    matrix_exp,
    pauli_to_matrix,
    random_density_matrix,
    random_pauli_string,
    trace_distance,
)
from simulation_engine import (
    gadget_error_bound,
    plan_simulation,
    run_density_matrix,
    run_trajectories,
    schedule_plan,
    simulated_propagator,
)
from stochastic_channel import (
    PrimitiveOperation,
    StochasticChannel,
    TaylorConfig,
    dephasing_jumps,
    depolarizing_jumps,
    dissipator_step_channel,
)
from time_dependent import (
    CorrelationPolicy,
    SinusoidProfile,
    TimeDepDissipator,
    correlated_density_matrix,
    correlated_run,
    splitting_error,
    splitting_step_bound,
)

logger = logging.getLogger(__name__)

COLUMNS = ['instance', 'measured', 'reference', 'ratio', 'pass']


def _row(instance: str, measured: float, reference: float, tol: float = 1e-12) -> dict:
    ratio = measured / reference if reference > 0 else float('nan')
    return {
        'instance': instance,
        'measured': float(measured),
        'reference': float(reference),
        'ratio': float(ratio),
        'pass': bool(measured <= reference + tol),
    }


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)"""
    lx = np.log(np.asarray(x, dtype=float)).reshape(-1, 1)
    ly = np.log(np.asarray(y, dtype=float))
    return float(LinearRegression().fit(lx, ly).coef_[0])


def _table(rows: List[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=COLUMNS)


def dephasing_x_spec(Gamma: float = 1.0) -> LindbladSpec:
    """H = 0.7 X + 0.2 Z with Z dephasing on one qubit"""
    h = HamiltonianSpec(1, ((0.7, PauliString('X')), (0.2, PauliString('Z'))))
    return LindbladSpec(h, dephasing_jumps(1, Gamma))


def sinusoid_dephasing(Gamma0: float = 1.0, amp: float = 0.5, omega: float = 3.0) -> TimeDepDissipator:
    """Gamma(t) = Gamma0 + amp sin(omega t), realised by sqrt(Gamma(t) / 2) Z"""
    return TimeDepDissipator(1, ((SinusoidProfile(Gamma0 / 2, amp / 2, omega), PauliString('Z')),))


# -------------------- Suites --------------------

def suite_converge(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Trace-distance error against dt for r = 4 ... 256 and its fitted order"""
    spec = dephasing_x_spec()
    rho0 = DensityMatrix.basis('0')
    exact = exact_propagate(spec, rho0, 1.0)
    rows, dts, errors = [], [], []
    for r in (4, 8, 16, 32, 64, 128, 256):
        plan = plan_simulation(spec, 1.0, epsilon=1e-2, r=r, taylor_K=20)
        err = trace_distance(run_density_matrix(plan, rho0), exact)
        rows.append(_row(f"r={r}", err, gadget_error_bound(plan)))
        dts.append(plan.dt)
        errors.append(err)
    slope = fit_loglog_slope(dts, errors)
    logger.info(f"Convergence order {slope:.4f}")
    rows.append(_row(f"slope={slope:.6f}", abs(slope - 2.0), 0.2))
    return _table(rows)


def random_lindblad_spec(n_qubits: int, rng: np.random.Generator, n_terms: int = 3, n_jumps: int = 2) -> LindbladSpec:
    terms = []
    for _ in range(n_terms):
        p = random_pauli_string(n_qubits, rng, with_phase=False)
        while p.is_identity():
            p = random_pauli_string(n_qubits, rng, with_phase=False)
        terms.append((float(rng.uniform(0.1, 1.0)), PauliString(p.letters, (1, -1)[rng.integers(2)])))
    jumps = []
    for _ in range(n_jumps):
        p = random_pauli_string(n_qubits, rng, with_phase=True)
        jumps.append(JumpSpec.from_pauli(math.sqrt(rng.uniform(0.05, 0.5)), p))
    return LindbladSpec(HamiltonianSpec(n_qubits, tuple(terms)), tuple(jumps))


def suite_bounds(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Choi lower bound of (exact - simulated) against the end-to-end error bound"""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(instances or 20):
        spec = random_lindblad_spec(2, rng)
        c0 = float(rng.choice([0.0, 0.1, 1.0]))
        ham_kind = 'trotter' if i % 2 else 'exact'
        plan = plan_simulation(spec, 1.0, epsilon=1e-2, c0=c0, ham_kind=ham_kind)
        diff = exact_propagator(spec, 1.0) - simulated_propagator(plan)
        measured = diamond_bounds(diff)[0]
        rows.append(_row(f"spec{i:02d}(r={plan.r},c0={c0},{ham_kind})", measured, gadget_error_bound(plan)))
    return _table(rows)


def suite_single_step(seed: int = 0, instances: int = None, commuting: bool = False) -> pd.DataFrame:
    """Single-step splitting error against the time-dependent splitting bound"""
    d = sinusoid_dephasing()
    h = HamiltonianSpec(1, ((1.0, PauliString('Z' if commuting else 'X')),))
    dts = np.logspace(-3, -1, instances or 20)
    rows, errors = [], []
    for dt in dts:
        lower, _ = splitting_error(h, d, 0.0, float(dt))
        bound = splitting_step_bound(h, d, 0.0, float(dt))
        errors.append(lower)
        rows.append(_row(f"dt={dt:.6g}", lower, bound, tol=1e-9 if commuting else 1e-12))
    if not commuting:
        slope = fit_loglog_slope(dts, errors)
        logger.info(f"Single-step order {slope:.4f}")
        rows.append(_row(f"slope={slope:.6f}", abs(slope - 3.0), 0.3))
    return _table(rows)


def suite_taylor(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """
    Truncated Poisson channel against exp(dt D) on a 3 x 3 grid of (a dt, K)

    Both channels are Pauli-diagonal, so the Choi lower bound ||C||_1 / 2^n equals
    the diamond norm of their difference.
    """
    dt = 0.1
    rows = []
    for x in (0.05, 0.2, 0.5):
        spec = LindbladSpec(HamiltonianSpec.zero(1), dephasing_jumps(1, 2 * x / dt))
        exact = dissipator_superoperator(spec).exp(dt)
        for K in (2, 4, 8):
            channel, _ = dissipator_step_channel(spec, dt, K)
            measured = diamond_bounds(exact - channel.superoperator())[0]
            rows.append(_row(f"x={x},K={K}", measured, TaylorConfig(K, x / dt, dt).coarse_bound()))
    return _table(rows)


def suite_modes(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Trajectory estimates against density-matrix mode and the closed-form decay"""
    n_traj = instances or 10_000
    z = pauli_to_matrix(PauliString('Z'))
    psi0 = StateVector.basis('0')
    rows = []

    spec = LindbladSpec(HamiltonianSpec(1, ((0.4, PauliString('X')),)), depolarizing_jumps(1, 0.5))
    plan = plan_simulation(spec, 1.0, epsilon=1e-2, mode='traj', n_traj=n_traj, observable=z, master_seed=seed)
    traj = run_trajectories(plan, psi0)
    dm = run_density_matrix(plan, psi0.to_density_matrix()).expectation(z)
    rows.append(_row("depolarizing+X traj-vs-dm", abs(traj.estimate - dm), 4 * traj.std_error))

    spec = LindbladSpec(HamiltonianSpec.zero(1), depolarizing_jumps(1, 0.5))
    plan = plan_simulation(spec, 1.0, epsilon=1e-2, mode='traj', n_traj=n_traj, observable=z, master_seed=seed)
    traj = run_trajectories(plan, psi0)
    rows.append(_row("depolarizing traj-vs-closed-form", abs(traj.estimate - math.exp(-0.5)), 4 * traj.std_error))
    return _table(rows)


def suite_closedform(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Density-matrix mode against closed-form depolarizing and dephasing decay"""
    rng = np.random.default_rng(seed)
    rows = []
    gamma, T = 0.3, 1.0
    spec = LindbladSpec(HamiltonianSpec.zero(2), depolarizing_jumps(2, gamma))
    rho0 = random_density_matrix(2, rng)
    plan = plan_simulation(spec, T, epsilon=1e-3)
    decay = math.exp(-gamma * T)
    expected = decay * rho0.matrix + (1 - decay) * np.eye(4) / 4
    rows.append(_row(f"depolarizing n=2 (r={plan.r},K={plan.taylor_K})",
                     trace_distance(run_density_matrix(plan, rho0), expected), 1e-6))

    Gamma = 1.0
    spec = LindbladSpec(HamiltonianSpec.zero(1), dephasing_jumps(1, Gamma))
    plus = StateVector(np.array([1, 1]) / math.sqrt(2)).to_density_matrix()
    plan = plan_simulation(spec, T, epsilon=1e-3)
    coherence = abs(run_density_matrix(plan, plus).matrix[0, 1])
    rows.append(_row("dephasing coherence", abs(coherence - math.exp(-Gamma * T) / 2), 1e-6))
    return _table(rows)


def suite_paulinorm(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Pauli norms of depolarizing and dephasing models against their closed forms"""
    rows = []
    gamma, Gamma = 0.3, 0.8
    h_terms = {1: 'X', 2: 'XZ', 3: 'XZY'}
    for n in (1, 2, 3):
        h = HamiltonianSpec(n, ((0.5, PauliString(h_terms[n])),))
        spec = LindbladSpec(h, depolarizing_jumps(n, gamma))
        expected = h.pauli_norm() + (1 - 4.0 ** (-n)) * gamma
        rows.append(_row(f"depolarizing n={n}", abs(pauli_norm(spec) - expected), 1e-12, tol=0.0))
        spec = LindbladSpec(h, dephasing_jumps(n, Gamma))
        rows.append(_row(f"dephasing n={n}", abs(dissipator_pauli_norm(spec) - n * Gamma / 2), 1e-12, tol=0.0))
    return _table(rows)


def suite_dilation(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Kraus sums against the one-ancilla Stinespring path for amplitude damping"""
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(instances or 3):
        rho = random_density_matrix(3, rng)
        for p in (0.0, 0.3, 1.0):
            for q in range(3):
                assignments = {q: LocalChannel.amplitude_damping(p)}
                a = apply_local_noise(rho, assignments, 'kraus')
                b = apply_local_noise(rho, assignments, 'dilation')
                rows.append(_row(f"state{k},p={p},qubit={q}", trace_distance(a, b), 1e-10))
    return _table(rows)


def _rotation(axis: str, angle: float) -> np.ndarray:
    return matrix_exp(pauli_to_matrix(PauliString(axis)), -0.5j * angle)


def suite_correlated(seed: int = 0, instances: int = None) -> pd.DataFrame:
    """Fully correlated two-step sampling against the joint mixture sum_i p_i U_i^2 rho U_i^dagger^2"""
    n_traj = instances or 10_000
    z = pauli_to_matrix(PauliString('Z'))
    psi0 = StateVector.basis('0')
    rho0 = psi0.to_density_matrix().matrix
    mixture = ((0.3, _rotation('X', math.pi / 3)), (0.7, _rotation('Y', math.pi / 5)))
    channel = StochasticChannel(tuple(PrimitiveOperation.from_unitary(u) for _, u in mixture),
                                tuple(p for p, _ in mixture))
    plan = schedule_plan(HamiltonianSpec.zero(1), (channel, channel), 2.0, mode='traj', n_traj=n_traj,
                         observable=z, master_seed=seed)

    joint = sum(p * (u @ u) @ rho0 @ (u @ u).conj().T for p, u in mixture)
    expected = float(np.real(np.trace(z @ joint)))
    result = correlated_run(plan, CorrelationPolicy.fully_correlated(), psi0)
    rows = [_row("fully-correlated vs joint mixture", abs(result.estimate - expected), 4 * result.std_error)]

    independent = correlated_density_matrix(plan, CorrelationPolicy.independent(), psi0.to_density_matrix())
    separation = abs(result.estimate - independent.expectation(z))
    rows.append(_row("independent composition separated by 5 sigma", 5 * result.std_error, separation))
    return _table(rows)


SUITES: Dict[str, Callable[..., pd.DataFrame]] = {
    'converge': suite_converge,
    'bounds': suite_bounds,
    'thm3': suite_single_step,
    'taylor': suite_taylor,
    'modes': suite_modes,
    'closedform': suite_closedform,
    'paulinorm': suite_paulinorm,
    'dilation': suite_dilation,
    'correlated': suite_correlated,
}


def run_suite(name: str, seed: int = 0, instances: int = None, **options) -> pd.DataFrame:
    """Run one named suite; unknown names raise ValueError"""
    if name not in SUITES:
        raise ValueError(f"Unknown verification suite {name!r} (expected one of {sorted(SUITES)})")
    logger.info(f"Running verification suite {name} (seed={seed})")
    table = SUITES[name](seed=seed, instances=instances, **options)
    failed = int((~table['pass']).sum())
    logger.info(f"Suite {name}: {len(table)} rows, {failed} failed")
    return table


def suite_passed(table: pd.DataFrame) -> bool:
    return bool(table['pass'].all())
