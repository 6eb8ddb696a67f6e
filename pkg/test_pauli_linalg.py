#!/usr/bin/env python3
"""
Tests for Pauli strings, matrix exponentials and state containers
"""

import sys
from dataclasses import FrozenInstanceError

import numpy as np
from scipy.linalg import expm

from pauli_linalg import (
    DensityMatrix, PauliString, StateVector, all_pauli_strings, compose_paulis, is_psd, is_unitary,
    matrix_exp, parse_phase, partial_trace, pauli_decompose, pauli_to_matrix, random_density_matrix,
    random_hermitian, random_pauli_string, random_statevector, random_unitary, trace_distance,
)

def test_pauli_products():
    """Symbolic composition agrees with dense matrix products"""
    print("\n" + "=" * 70)
    print("TEST: Pauli products")
    print("=" * 70)

    xy = PauliString('X').compose(PauliString('Y'))
    assert xy.letters == 'Z' and xy.phase == 1j, f"X.Y should be +iZ, got {xy}"
    print("✓ X.Y = iZ")

    rng = np.random.default_rng(7)
    for _ in range(25):
        a = random_pauli_string(3, rng)
        b = random_pauli_string(3, rng)
        dense = pauli_to_matrix(a) @ pauli_to_matrix(b)
        assert np.allclose(pauli_to_matrix(a.compose(b)), dense), f"compose mismatch for {a}, {b}"
    print("✓ Random 3-qubit compositions match matrix products")

    seq = [PauliString('XZ'), PauliString('YY', -1), PauliString('ZI', 1j)]
    dense = pauli_to_matrix(seq[2]) @ pauli_to_matrix(seq[1]) @ pauli_to_matrix(seq[0])
    assert np.allclose(pauli_to_matrix(compose_paulis(seq)), dense)
    print("✓ compose_paulis multiplies in application order")

def test_pauli_commutation():
    print("\n" + "=" * 70)
    print("TEST: Commutation")
    print("=" * 70)

    assert PauliString('XX').commutes_with(PauliString('ZZ'))
    assert not PauliString('XI').commutes_with(PauliString('ZI'))
    rng = np.random.default_rng(11)
    for _ in range(25):
        a = random_pauli_string(2, rng, with_phase=False)
        b = random_pauli_string(2, rng, with_phase=False)
        ma, mb = pauli_to_matrix(a), pauli_to_matrix(b)
        assert a.commutes_with(b) == np.allclose(ma @ mb, mb @ ma)
    print("✓ commutes_with agrees with the matrix commutator")

def test_pauli_apply_and_parsing():
    print("\n" + "=" * 70)
    print("TEST: Pauli application and parsing")
    print("=" * 70)

    rng = np.random.default_rng(3)
    psi = random_statevector(3, rng).amplitudes
    for _ in range(20):
        p = random_pauli_string(3, rng)
        assert np.allclose(p.apply(psi), pauli_to_matrix(p) @ psi), f"apply mismatch for {p}"
    print("✓ Matrix-free application matches the dense operator")

    p = PauliString.from_label('xyz', '-i')
    assert p.letters == 'XYZ' and p.phase == -1j and p.phase_label == '-i'
    assert parse_phase('+1') == 1 and parse_phase('i') == 1j
    for bad in (lambda: PauliString('XQ'), lambda: parse_phase('2'), lambda: PauliString('X', 0.5)):
        try:
            bad()
            raise AssertionError("expected ValueError")
        except ValueError:
            pass
    print("✓ Labels parse and bad letters or phases are rejected")

    assert PauliString.single(3, 1, 'Y').letters == 'IYI'
    assert PauliString('XIZY').weight() == 3
    assert len(all_pauli_strings(2)) == 16 and len(all_pauli_strings(2, include_identity=False)) == 15
    print("✓ Helpers")

def test_pauli_decompose():
    print("\n" + "=" * 70)
    print("TEST: Pauli decomposition")
    print("=" * 70)

    rng = np.random.default_rng(5)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    terms = pauli_decompose(m)
    assert all(beta > 0 for beta, _ in terms)
    rebuilt = sum(beta * pauli_to_matrix(p) for beta, p in terms)
    assert np.allclose(rebuilt, m), "decomposition does not reproduce the matrix"
    print("✓ Random 2-qubit matrix rebuilt from its Pauli terms")

    sigma_minus = np.array([[0, 1], [0, 0]], dtype=complex)
    terms = pauli_decompose(sigma_minus)
    assert len(terms) == 2 and np.isclose(sum(beta for beta, _ in terms), 1.0)
    print("✓ |0><1| has Pauli weight 1")

def test_matrix_exp():
    print("\n" + "=" * 70)
    print("TEST: Matrix exponential")
    print("=" * 70)

    rng = np.random.default_rng(13)
    for scale in (0.01, 1.0, 30.0):
        h = random_hermitian(8, rng)
        ours = matrix_exp(h, -1j * scale)
        ref = expm(-1j * scale * h)
        assert np.max(np.abs(ours - ref)) < 1e-9, f"exp mismatch at scale {scale}"
        assert is_unitary(ours, 1e-9)
    print("✓ exp(-i t H) matches scipy for small and large norms")

    g = rng.standard_normal((6, 6))
    assert np.allclose(matrix_exp(g), expm(g), atol=1e-10)
    print("✓ Non-Hermitian generator")

    try:
        matrix_exp(np.zeros((2, 3)))
        raise AssertionError("expected ValueError for non-square input")
    except ValueError:
        pass
    print("✓ Non-square input rejected")

def test_density_matrix_validation():
    print("\n" + "=" * 70)
    print("TEST: Density matrix validation")
    print("=" * 70)

    for bad in (np.array([[1, 1], [0, 0]]), np.eye(2), np.diag([1.5, -0.5])):
        try:
            DensityMatrix(bad)
            raise AssertionError(f"accepted invalid density matrix {bad.tolist()}")
        except ValueError:
            pass
    print("✓ Non-Hermitian, wrong trace and negative states are rejected")

    rho = DensityMatrix.basis('10')
    assert rho.n_qubits == 2 and rho.matrix[2, 2] == 1
    assert not rho.matrix.flags.writeable
    assert np.isclose(DensityMatrix.maximally_mixed(2).expectation(np.eye(4)), 1.0)
    print("✓ Basis states index qubit 0 as the most significant bit")

    try:
        StateVector([1, 1])
        raise AssertionError("expected ValueError for unnormalized vector")
    except ValueError:
        pass
    psi = StateVector([1, 1], normalize=True).apply_pauli(PauliString('Z'))
    assert np.isclose(psi.expectation(pauli_to_matrix(PauliString('X'))), -1.0)
    print("✓ StateVector normalization and Pauli action")

def test_partial_trace_and_distance():
    print("\n" + "=" * 70)
    print("TEST: Partial trace and trace distance")
    print("=" * 70)

    rng = np.random.default_rng(17)
    a = random_density_matrix(1, rng)
    b = random_density_matrix(2, rng)
    joint = a.tensor(b)
    assert np.allclose(partial_trace(joint, [0]).matrix, a.matrix)
    assert np.allclose(partial_trace(joint, [1, 2]).matrix, b.matrix)
    print("✓ Partial traces of a product state recover the factors")

    try:
        partial_trace(joint, [])
        raise AssertionError("expected ValueError")
    except ValueError:
        pass

    zero, one = DensityMatrix.basis('0'), DensityMatrix.basis('1')
    assert np.isclose(trace_distance(zero, one), 1.0)
    assert trace_distance(a, a) == 0.0
    try:
        trace_distance(zero, b)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass
    print("✓ Trace distance extremes and shape checks")

    u = random_unitary(4, rng)
    assert is_unitary(u) and is_psd(random_density_matrix(2, rng, rank=1).matrix)
    print("✓ Random instances")


def test_random_pauli_unitarity():
    print("\n" + "=" * 70)
    print("TEST: Random Pauli strings are unitary")
    print("=" * 70)

    rng = np.random.default_rng(29)
    for _ in range(1000):
        p = random_pauli_string(int(rng.integers(1, 7)), rng)
        m = pauli_to_matrix(p)
        assert m.shape == (2 ** p.n_qubits,) * 2
        assert is_unitary(m), f"{p} is not unitary"
    print("✓ 1000 random strings on 1 to 6 qubits")

def test_matrix_exp_commuting_sum():
    print("\n" + "=" * 70)
    print("TEST: exp(A + B) = exp(A) exp(B) for commuting A, B")
    print("=" * 70)

    rng = np.random.default_rng(31)
    for _ in range(10):
        a = random_hermitian(8, rng)
        b = 0.3 * a @ a + 0.5 * np.eye(8)
        lhs = matrix_exp(a + b, -1j)
        rhs = matrix_exp(a, -1j) @ matrix_exp(b, -1j)
        assert np.allclose(lhs, rhs, atol=1e-9)
    print("✓ Polynomials in a random Hermitian matrix")

    xx = pauli_to_matrix(PauliString('XX'))
    zz = pauli_to_matrix(PauliString('ZZ'))
    assert np.allclose(matrix_exp(0.7 * xx + 1.3 * zz), matrix_exp(0.7 * xx) @ matrix_exp(1.3 * zz), atol=1e-10)
    print("✓ Commuting Pauli strings XX and ZZ")

def test_trace_distance_triangle():
    print("\n" + "=" * 70)
    print("TEST: Trace distance triangle inequality")
    print("=" * 70)

    rng = np.random.default_rng(37)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        rho, sigma, tau = (random_density_matrix(n, rng, rank=int(rng.integers(1, 2 ** n + 1))) for _ in range(3))
        assert trace_distance(rho, tau) <= trace_distance(rho, sigma) + trace_distance(sigma, tau) + 1e-12
        assert np.isclose(trace_distance(rho, sigma), trace_distance(sigma, rho))
    print("✓ 200 random triples, symmetric")

def test_partial_trace_entangled():
    print("\n" + "=" * 70)
    print("TEST: Partial trace of entangled states")
    print("=" * 70)

    bell = DensityMatrix.from_statevector(np.array([1, 0, 0, 1]) / np.sqrt(2))
    for q in (0, 1):
        assert np.allclose(partial_trace(bell, [q]).matrix, np.eye(2) / 2)
    print("✓ Either half of a Bell pair is maximally mixed")

    rng = np.random.default_rng(41)
    rho = random_density_matrix(3, rng)
    expected = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for c in range(2):
            for a2 in range(2):
                for c2 in range(2):
                    for b in range(2):
                        expected[2 * a + c, 2 * a2 + c2] += rho.matrix[4 * a + 2 * b + c, 4 * a2 + 2 * b + c2]
    assert np.allclose(partial_trace(rho, [0, 2]).matrix, expected)
    print("✓ Tracing out the middle qubit matches the index sum")

def test_value_types_frozen():
    print("\n" + "=" * 70)
    print("TEST: Value types are immutable")
    print("=" * 70)

    p = PauliString('XZ')
    try:
        p.letters = 'ZZ'
        raise AssertionError("PauliString accepted assignment")
    except FrozenInstanceError:
        pass
    assert p.letters == 'XZ' and hash(p) == hash(PauliString('XZ'))
    print("✓ PauliString rejects assignment and hashes by value")

    rho = DensityMatrix.basis('0')
    try:
        rho.matrix[0, 0] = 0.5
        raise AssertionError("density matrix buffer is writeable")
    except ValueError:
        pass
    print("✓ Density matrix storage is read-only")

if __name__ == '__main__':
    print("=" * 70)
    print("PAULI LINEAR ALGEBRA TESTS")
    print("=" * 70)

    try:
        test_pauli_products()
        test_pauli_commutation()
        test_pauli_apply_and_parsing()
        test_pauli_decompose()
        test_matrix_exp()
        test_density_matrix_validation()
        test_partial_trace_and_distance()
        test_random_pauli_unitarity()
        test_matrix_exp_commuting_sum()
        test_trace_distance_triangle()
        test_partial_trace_entangled()
        test_value_types_frozen()

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
