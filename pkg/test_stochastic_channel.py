#!/usr/bin/env python3
"""
Tests for stochastic channels and the truncated Taylor dissipator construction
"""

import sys
from dataclasses import FrozenInstanceError

import numpy as np

from lindblad_model import HamiltonianSpec, LindbladSpec, diamond_bounds, dissipator_superoperator
from pauli_linalg import DensityMatrix, PauliString, StateVector, random_density_matrix
from stochastic_channel import (
    PrimitiveOperation, StochasticChannel, TaylorConfig, UnitaryWalk, apply_exact, choose_truncation_order,
    depolarizing_jumps, dephasing_jumps, dissipator_step_channel, dissipator_to_stochastic,
    make_example_channel, pauli_mixture_channel, reset_channel, sample_branch_indices, sample_operation,
    unitary_jump_rate,
)


def test_channel_validation():
    print("\n" + "=" * 70)
    print("TEST: Channel validation")
    print("=" * 70)

    ident = PrimitiveOperation.identity(1)
    prep = PrimitiveOperation.prepare(((1.0, StateVector.basis('0')),))
    cases = [
        lambda: StochasticChannel((ident,), (0.9,)),
        lambda: StochasticChannel((ident, prep), (1.2, -0.2)),
        lambda: StochasticChannel((prep, prep), (0.5, 0.5)),
        lambda: StochasticChannel((ident, PrimitiveOperation.identity(2)), (0.5, 0.5)),
        lambda: PrimitiveOperation.from_unitary(np.array([[1, 1], [0, 1]])),
        lambda: UnitaryWalk(0, (PauliString('X'),), (1.0,)),
    ]
    for build in cases:
        try:
            build()
            raise AssertionError("invalid channel accepted")
        except ValueError:
            pass
    print("✓ Bad probabilities, duplicate prepare branches and non-unitary payloads rejected")

    ch = StochasticChannel((ident, prep), (0.7, 0.3))
    try:
        ch.probabilities = (0.0, 1.0)
        raise AssertionError("channel accepted assignment")
    except FrozenInstanceError:
        pass
    assert ch.probabilities == (0.7, 0.3)
    print("✓ Validated channels cannot be changed afterwards")


def test_pauli_mixture_exact():
    print("\n" + "=" * 70)
    print("TEST: Exact mixture application")
    print("=" * 70)

    ch = pauli_mixture_channel({'I': 0.25, 'X': 0.75})
    out = apply_exact(ch, DensityMatrix.basis('0'))
    assert np.allclose(out.matrix, np.diag([0.25, 0.75]))
    print("✓ {(0.25, I), (0.75, X)} on |0><0| gives diag(0.25, 0.75)")

    assert np.allclose(ch.superoperator().apply(DensityMatrix.basis('0')).matrix, out.matrix)
    print("✓ Superoperator form agrees with exact application")

    q, lambdas, rho_f = ch.definition_form()
    assert q == 1.0 and np.allclose(lambdas, [0.25, 0.75]) and rho_f is None
    print("✓ Unitary-only channel has q = 1 and no target state")


def test_branch_sampling():
    print("\n" + "=" * 70)
    print("TEST: Branch sampling")
    print("=" * 70)

    ch = pauli_mixture_channel({'I': 0.25, 'X': 0.75})
    rng = np.random.default_rng(42)
    n = 20000
    hits = sum(1 for _ in range(n) if sample_operation(ch, rng).unitary.letters == 'X')
    sigma = np.sqrt(0.75 * 0.25 / n)
    assert abs(hits / n - 0.75) < 4 * sigma, f"X frequency {hits / n:.4f}"
    print(f"✓ X branch frequency {hits / n:.4f} within 4 sigma of 0.75")

    walk = UnitaryWalk(3, (PauliString('X'), PauliString('Z')), (0.5, 0.5))
    op = walk.sample(rng)
    assert isinstance(op.unitary, PauliString) and op.length == 3
    print("✓ Pauli walks resolve symbolically")


def test_sampling_matches_exact():
    print("\n" + "=" * 70)
    print("TEST: Sampled branches against exact application")
    print("=" * 70)

    rng = np.random.default_rng(8)
    ch = pauli_mixture_channel({'I': 0.5, 'X': 0.3, 'Y': 0.2})
    rho = random_density_matrix(1, rng)
    n = 100_000
    total = np.zeros((2, 2), dtype=complex)
    for _ in range(n):
        total += sample_operation(ch, rng).apply_exact(rho.matrix)
    empirical = total / n
    exact = apply_exact(ch, rho).matrix
    # entries lie in [-1, 1], so 0.02 exceeds 6 sigma at n = 1e5
    assert np.max(np.abs(empirical - exact)) < 0.02, f"max deviation {np.max(np.abs(empirical - exact)):.4g}"
    print("✓ Mean of 1e5 sampled operations matches apply_exact")

    ops = tuple(PrimitiveOperation.from_unitary(PauliString(p)) for p in ('X', 'Z', 'Y'))
    ch = StochasticChannel(ops, (0.5, 0.0, 0.5))
    draws = sample_branch_indices(ch, np.random.default_rng(9), 1_000_000)
    assert not np.any(draws == 1), "zero-probability branch was drawn"
    assert set(np.unique(draws)) == {0, 2}
    print("✓ Zero-probability branch never drawn in 1e6 samples")


def test_reset_channel():
    print("\n" + "=" * 70)
    print("TEST: Reset channel")
    print("=" * 70)

    plus = StateVector([1, 1], normalize=True)
    ch = reset_channel(0.8, ((1.0, plus),))
    q, lambdas, rho_f = ch.definition_form()
    assert np.isclose(q, 0.8) and lambdas == [1.0]
    assert np.allclose(rho_f.matrix, 0.5 * np.ones((2, 2)))
    print("✓ Definition form (q, lambda, rho_f)")

    rho = random_density_matrix(1, np.random.default_rng(1))
    out = apply_exact(ch, rho)
    assert np.allclose(out.matrix, 0.8 * rho.matrix + 0.2 * rho_f.matrix)
    print("✓ q rho + (1 - q) rho_f")

    spec, ch2 = make_example_channel('reset', q=0.8, ensemble=((1.0, plus),), dt=0.5)
    exact = dissipator_superoperator(spec).exp(0.5)
    assert np.allclose(exact.matrix, ch2.superoperator().matrix, atol=1e-12)
    print("✓ Reset channel equals exp(dt D) with kappa = -ln(q) / dt")

    try:
        reset_channel(1.5, ((1.0, plus),))
        raise AssertionError("expected ValueError")
    except ValueError:
        pass


def test_taylor_config():
    print("\n" + "=" * 70)
    print("TEST: Taylor truncation")
    print("=" * 70)

    cfg = TaylorConfig(4, 2.0, 0.25)
    weights = cfg.poisson_weights()
    assert np.isclose(weights.sum() + cfg.tail_mass(), 1.0, atol=1e-15)
    assert np.isclose(cfg.error_bound(), 2 * cfg.tail_mass())
    assert cfg.tail_mass() <= cfg.coarse_bound() / 2 + 1e-18
    print("✓ Weights plus tail sum to one, error = 2 * tail <= coarse bound")

    assert TaylorConfig(3, 0.0, 0.5).error_bound() == 0.0
    try:
        TaylorConfig(2, 20.0, 0.1)
        raise AssertionError("expected ValueError for a*dt > 1")
    except ValueError:
        pass
    print("✓ a*dt > 1 rejected")

    k_loose = choose_truncation_order(1.0, 0.1, 1e-6, 40)
    k_tight = choose_truncation_order(1.0, 0.1, 1e-12, 40)
    assert k_loose < k_tight
    assert TaylorConfig(k_tight, 1.0, 0.1).error_bound() <= 1e-12
    print(f"✓ Tighter targets need larger K ({k_loose} < {k_tight})")


def test_dissipator_to_stochastic():
    print("\n" + "=" * 70)
    print("TEST: Dissipator to stochastic channel")
    print("=" * 70)

    dt = 0.1
    for K in (0, 1, 2, 3, 5):
        spec = LindbladSpec(HamiltonianSpec.zero(1), dephasing_jumps(1, 2 * 0.5 / dt))
        channel, err = dissipator_step_channel(spec, dt, K)
        assert channel.superoperator().is_cptp()
        delta = dissipator_superoperator(spec).exp(dt) - channel.superoperator()
        lower, upper = diamond_bounds(delta)
        assert lower <= err + 1e-14, f"K={K}: {lower} > {err}"
        assert upper <= 2 * err + 1e-14, f"K={K}: {upper} > 2 * {err}"
    print("✓ Choi bounds of exp(dt D) - N within the truncation error")

    spec = LindbladSpec(HamiltonianSpec.zero(2), depolarizing_jumps(2, 0.3))
    channel, err = dissipator_step_channel(spec, 0.2, 20)
    delta = dissipator_superoperator(spec).exp(0.2) - channel.superoperator()
    assert diamond_bounds(delta)[1] < 1e-12 and err < 1e-15
    print("✓ K = 20 reproduces two-qubit depolarizing to 1e-12")

    assert np.isclose(unitary_jump_rate(spec), 0.3 * 15 / 16)
    q, lambdas, rho_f = channel.definition_form()
    assert np.isclose(q, 1.0) and rho_f is None and np.isclose(sum(lambdas), 1.0)
    print("✓ Jump rate a and definition form")

    u = np.array([[0, 1], [1, 0]], dtype=complex)
    ch, _ = dissipator_to_stochastic([(0.5j, u)], 0.4, 6)
    assert ch.n_branches == 7
    try:
        dissipator_to_stochastic([], 0.1, 3)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
    print("✓ Dense unitary jumps and empty jump sets")


def test_example_channels():
    print("\n" + "=" * 70)
    print("TEST: Example channels")
    print("=" * 70)

    spec, ch = make_example_channel('depolarizing', n=1, gamma=0.4, dt=0.5, K=25)
    rho = DensityMatrix.basis('0')
    out = apply_exact(ch, rho)
    decay = np.exp(-0.4 * 0.5)
    expected = decay * rho.matrix + (1 - decay) * np.eye(2) / 2
    assert np.allclose(out.matrix, expected, atol=1e-12)
    print("✓ Depolarizing step matches e^(-gamma dt) rho + (1 - e^(-gamma dt)) I / 2")

    spec, ch = make_example_channel('pauli', rates={'XI': 0.1, 'ZZ': 0.2, 'II': 0.5}, dt=0.3)
    assert len(spec.jumps) == 2
    print("✓ Identity rates ignored in Pauli-rate models")

    try:
        make_example_channel('amplitude', n=1)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
    print("✓ Unknown kinds rejected")


if __name__ == '__main__':
    print("=" * 70)
    print("STOCHASTIC CHANNEL TESTS")
    print("=" * 70)

    try:
        test_channel_validation()
        test_pauli_mixture_exact()
        test_branch_sampling()
        test_sampling_matches_exact()
        test_reset_channel()
        test_taylor_config()
        test_dissipator_to_stochastic()
        test_example_channels()

        print()
        print("=" * 70)
        print("ALL TESTS PASSED ✓")
        print("=" * 70)
        sys.exit(0)
    except Exception as e:
        print()
        print("=" * 70)
        print(f"TESTS FAILED ✗: {e}")
        print("=" * 70)
        import traceback
        traceback.print_exc()
        sys.exit(1)
