#!/usr/bin/env python3
"""
Tests for local Kraus channels and their Stinespring dilations
"""

import sys
from functools import reduce

import numpy as np

from dilation import (
    LocalChannel, LocalNoiseModel, amplitude_damping_kraus, apply_local_noise, check_kraus,
    completely_dephasing_kraus, local_unitary_mixture_channel, stinespring_unitary,
)
from pauli_linalg import DensityMatrix, PauliString, StateVector, is_unitary, random_density_matrix, random_unitary
from stochastic_channel import apply_exact

PLUS = StateVector([1, 1], normalize=True)


def random_kraus(n_ops, rng):
    """First block column of a Haar unitary is a complete Kraus set"""
    v = random_unitary(2 * n_ops, rng)
    return tuple(v[2 * j:2 * j + 2, :2] for j in range(n_ops))


def embed(op, qubit, n_qubits):
    factors = [op if q == qubit else np.eye(2) for q in range(n_qubits)]
    return reduce(np.kron, factors)


def kraus_by_hand(rho, kraus, qubit, n_qubits):
    out = np.zeros_like(rho, dtype=complex)
    for k in kraus:
        big = embed(k, qubit, n_qubits)
        out += big @ rho @ big.conj().T
    return out


def test_amplitude_damping():
    print("\n" + "=" * 70)
    print("TEST: Amplitude damping")
    print("=" * 70)

    rho = DensityMatrix.from_statevector(PLUS)
    for p in (0.0, 0.3, 1.0):
        ch = LocalChannel.amplitude_damping(p)
        expected = np.array([[(1 + p) / 2, np.sqrt(1 - p) / 2], [np.sqrt(1 - p) / 2, (1 - p) / 2]])
        for mode in ('kraus', 'dilation'):
            out = apply_local_noise(rho, {0: ch}, mode)
            assert np.allclose(out.matrix, expected, atol=1e-12), f"p={p}, mode={mode}"
    print("✓ |+> relaxes towards |0> with coherence sqrt(1-p)/2 in both modes")

    assert not LocalChannel.amplitude_damping(0.3).is_unital
    assert LocalChannel.amplitude_damping(0.0).is_unital
    print("✓ Damping is unital only at p = 0")


def test_stinespring_unitary():
    print("\n" + "=" * 70)
    print("TEST: Stinespring unitary")
    print("=" * 70)

    rng = np.random.default_rng(3)
    for n_ops in (1, 2, 3, 4):
        kraus = random_kraus(n_ops, rng) if n_ops > 1 else (random_unitary(2, rng),)
        ch = LocalChannel(kraus)
        v = ch.stinespring()
        assert is_unitary(v), f"{n_ops} Kraus operators: V is not unitary"
        assert v.shape == (2 * 2 ** ch.ancilla_qubits(),) * 2
        for j, k in enumerate(kraus):
            assert np.allclose(v[2 * j:2 * j + 2, :2], k, atol=1e-12)
    print("✓ V is unitary and its first block column stacks the Kraus operators")

    v = stinespring_unitary(completely_dephasing_kraus(), 2)
    assert is_unitary(v)
    out = apply_local_noise(DensityMatrix.from_statevector(PLUS), {0: LocalChannel(completely_dephasing_kraus())},
                            'dilation')
    assert np.allclose(out.matrix, np.eye(2) / 2, atol=1e-12)
    print("✓ Completely dephasing channel removes all coherence")

    try:
        stinespring_unitary(random_kraus(3, rng), 2)
        raise AssertionError("expected ValueError for a small ancilla")
    except ValueError:
        pass
    print("✓ Undersized ancilla rejected")


def test_kraus_vs_dilation():
    print("\n" + "=" * 70)
    print("TEST: Kraus and dilation modes")
    print("=" * 70)

    rng = np.random.default_rng(9)
    n = 3
    ghz = StateVector([1, 0, 0, 0, 0, 0, 0, 1], normalize=True)
    states = [random_density_matrix(n, rng) for _ in range(3)] + [DensityMatrix.from_statevector(ghz)]
    assignments = {
        0: LocalChannel.amplitude_damping(0.25),
        1: LocalChannel(random_kraus(3, rng)),
        2: LocalChannel.dephasing(0.4),
    }
    for rho in states:
        via_kraus = apply_local_noise(rho, assignments, 'kraus')
        via_dilation = apply_local_noise(rho, assignments, 'dilation')
        assert np.max(np.abs(via_kraus.matrix - via_dilation.matrix)) < 1e-10

        expected = np.array(rho.matrix)
        for q in range(n):
            expected = kraus_by_hand(expected, assignments[q].kraus, q, n)
        assert np.allclose(via_kraus.matrix, expected, atol=1e-12)
    print("✓ Both modes agree with the embedded Kraus sums on random and GHZ states")

    rho = states[0]
    base = apply_local_noise(rho, assignments, 'dilation')
    for order in ([2, 0, 1], [1, 2, 0]):
        other = apply_local_noise(rho, assignments, 'dilation', order=order)
        assert np.allclose(base.matrix, other.matrix, atol=1e-10)
    print("✓ Result does not depend on the qubit order")

    partial = apply_local_noise(rho, {1: assignments[1]}, 'dilation')
    assert np.allclose(partial.matrix, kraus_by_hand(np.array(rho.matrix), assignments[1].kraus, 1, n), atol=1e-10)
    print("✓ Unassigned qubits are left alone")


def test_unital_mixture():
    print("\n" + "=" * 70)
    print("TEST: Unital channels as unitary mixtures")
    print("=" * 70)

    rng = np.random.default_rng(12)
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    assignments = {
        0: LocalChannel.dephasing(0.2),
        2: LocalChannel.from_unitary_mixture(((0.6, PauliString('I')), (0.4, h))),
    }
    ch = local_unitary_mixture_channel(assignments, 3)
    assert ch.n_branches == 4 and np.isclose(sum(ch.probabilities), 1.0)
    rho = random_density_matrix(3, rng)
    assert np.allclose(apply_exact(ch, rho).matrix, apply_local_noise(rho, assignments).matrix, atol=1e-12)
    print("✓ Tensor-product mixture reproduces the local Kraus channels")

    paulis = local_unitary_mixture_channel({0: LocalChannel.dephasing(0.2), 1: LocalChannel.dephasing(0.5)}, 2)
    labels = sorted(op.unitary.letters for op in paulis.operations)
    assert labels == ['II', 'IZ', 'ZI', 'ZZ']
    print("✓ Pauli mixtures stay symbolic")

    try:
        local_unitary_mixture_channel({0: LocalChannel.amplitude_damping(0.1)}, 1)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
    print("✓ Channels without a mixture form rejected")


def test_noise_model():
    print("\n" + "=" * 70)
    print("TEST: Mixtures of local noise components")
    print("=" * 70)

    rng = np.random.default_rng(21)
    a = {0: LocalChannel.amplitude_damping(0.5)}
    b = {1: LocalChannel.dephasing(0.3)}
    model = LocalNoiseModel(2, ((0.3, a), (0.7, b)))
    rho = random_density_matrix(2, rng)
    expected = 0.3 * apply_local_noise(rho, a).matrix + 0.7 * apply_local_noise(rho, b).matrix
    for mode in ('kraus', 'dilation'):
        assert np.allclose(model.apply(rho, mode).matrix, expected, atol=1e-10)
    print("✓ Weighted sum of component channels")

    try:
        LocalNoiseModel(2, ((0.5, a),))
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
    print("✓ Weights must sum to one")


def test_errors():
    print("\n" + "=" * 70)
    print("TEST: Error handling")
    print("=" * 70)

    rho = DensityMatrix.basis('00')
    ch = LocalChannel.amplitude_damping(0.1)
    cases = [
        lambda: check_kraus([]),
        lambda: check_kraus([np.eye(2), np.eye(2)]),
        lambda: LocalChannel((np.eye(4),)),
        lambda: LocalChannel(amplitude_damping_kraus(0.2), ((1.0, PauliString('I')),)),
        lambda: amplitude_damping_kraus(1.5),
        lambda: apply_local_noise(rho, {2: ch}),
        lambda: apply_local_noise(rho, {0: ch}, 'purify'),
        lambda: apply_local_noise(rho, {0: ch, 1: ch}, order=[0]),
    ]
    for build in cases:
        try:
            build()
            raise AssertionError("invalid input accepted")
        except ValueError:
            pass
    print("✓ Incomplete sets, wrong sizes, bad mixtures, bad qubits, modes and orders rejected")


if __name__ == '__main__':
    print("=" * 70)
    print("DILATION TESTS")
    print("=" * 70)

    try:
        test_amplitude_damping()
        test_stinespring_unitary()
        test_kraus_vs_dilation()
        test_unital_mixture()
        test_noise_model()
        test_errors()

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
