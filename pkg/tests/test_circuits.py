import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtmlab.circuits import (
    CircuitError,
    GateBasis,
    Hypergraph,
    QuantumCircuit,
    RegisterState,
    apply_circuit,
    basis_bits,
    basis_index,
    builtin_gate,
    circuit_from_json,
    circuit_matrix,
    cnot,
    compile_two_level,
    distribution_by_bits,
    embed_apply,
    measure_distribution,
    pauli_x,
)
from qtmlab.linalg import operator_norm, random_unitary

from conftest import dense_embedding, random_state


def kron_embedding(u, site, l):
    """Single-qubit gate via an explicit Kronecker product; site l is the leftmost factor."""
    factors = [u if s == site else np.eye(2) for s in range(l, 0, -1)]
    return reduce(np.kron, factors)


class TestBasisIndex:
    def test_zero(self):
        assert basis_index((0, 0, 0)) == 0

    def test_first_site_is_least_significant(self):
        assert basis_index((1, 0, 0)) == 1
        assert basis_index((0, 0, 1)) == 4

    def test_round_trip_l5(self):
        for a in range(32):
            assert basis_index(basis_bits(a, 5)) == a

    def test_bad_bit(self):
        with pytest.raises(ValueError):
            basis_index((0, 2))


class TestGates:
    def test_cnot_truth_table(self):
        table = {"00": "00", "01": "01", "10": "11", "11": "10"}
        for src, dst in table.items():
            psi = apply_circuit(QuantumCircuit.build(2, [("CNOT", (1, 2))]), RegisterState.basis(src))
            assert distribution_by_bits(measure_distribution(psi), 2) == {dst: 1.0}

    def test_cnot_involution(self):
        np.testing.assert_array_equal(cnot() @ cnot(), np.eye(4))

    def test_reversed_edge_swaps_control(self):
        psi = apply_circuit(QuantumCircuit.build(2, [("CNOT", (2, 1))]), RegisterState.basis("01"))
        assert distribution_by_bits(measure_distribution(psi), 2) == {"11": 1.0}

    def test_parametric_names(self):
        np.testing.assert_allclose(builtin_gate("ROT(pi/2)"), [[0, -1], [1, 0]], atol=1e-16)
        np.testing.assert_allclose(builtin_gate("PHASE(pi)"), np.diag([1, -1]), atol=1e-15)
        with pytest.raises(ValueError):
            builtin_gate("ROT(__import__('os'))")
        with pytest.raises(KeyError):
            builtin_gate("TOFFOLI")


class TestEmbed:
    def test_x_on_site_two(self):
        psi = embed_apply(pauli_x(), (2,), RegisterState.basis("00"))
        assert distribution_by_bits(measure_distribution(psi), 2) == {"01": 1.0}

    def test_identity(self, rng):
        v = random_state(3, rng)
        psi = embed_apply(np.eye(4), (3, 1), RegisterState.from_vector(v))
        np.testing.assert_array_equal(psi.vector(), v)

    def test_against_dense_loop_oracle(self, rng):
        u = random_unitary(4, rng)
        v = random_state(3, rng)
        psi = embed_apply(u, (1, 3), RegisterState.from_vector(v))
        np.testing.assert_allclose(psi.vector(), dense_embedding(u, (1, 3), 3) @ v, atol=1e-13)

    @pytest.mark.parametrize("l", [1, 2, 3, 4])
    def test_single_qubit_against_kron(self, l, rng):
        u = random_unitary(2, rng)
        v = random_state(l, rng)
        for site in range(1, l + 1):
            out = embed_apply(u, (site,), RegisterState.from_vector(v)).vector()
            np.testing.assert_allclose(out, kron_embedding(u, site, l) @ v, atol=1e-13)

    def test_loop_oracle_matches_kron(self):
        u = random_unitary(2, 7)
        np.testing.assert_allclose(dense_embedding(u, (2,), 3), kron_embedding(u, 2, 3), atol=1e-15)

    def test_sparse_equals_dense(self, rng):
        u = random_unitary(8, rng)
        v = random_state(4, rng)
        dense = embed_apply(u, (4, 1, 2), RegisterState.from_vector(v))
        sparse = embed_apply(u, (4, 1, 2), RegisterState(4, {k: v[k] for k in range(16)}))
        assert sparse.is_sparse
        np.testing.assert_allclose(sparse.vector(), dense.vector(), atol=1e-14)

    def test_large_register_is_sparse(self):
        psi = RegisterState.basis((0,) * 30)
        psi = embed_apply(builtin_gate("H"), (30,), psi)
        psi = embed_apply(cnot(), (30, 1), psi)
        assert psi.is_sparse
        assert measure_distribution(psi) == pytest.approx({0: 0.5, (1 << 29) | 1: 0.5})

    def test_errors(self):
        psi = RegisterState.basis("000")
        with pytest.raises(CircuitError):
            embed_apply(cnot(), (1, 1), psi)
        with pytest.raises(CircuitError):
            embed_apply(cnot(), (1,), psi)
        with pytest.raises(CircuitError):
            embed_apply(pauli_x(), (4,), psi)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_disjoint_supports_commute(self, seed):
        rng = np.random.default_rng(seed)
        l = 4
        sites = [int(s) for s in rng.permutation(np.arange(1, l + 1))]
        k = int(rng.integers(1, 3))
        g1, g2 = tuple(sites[:k]), tuple(sites[k:k + int(rng.integers(1, l - k + 1))])
        u, v = random_unitary(1 << len(g1), rng), random_unitary(1 << len(g2), rng)
        psi = RegisterState.from_vector(random_state(l, rng))
        a = embed_apply(u, g1, embed_apply(v, g2, psi)).vector()
        b = embed_apply(v, g2, embed_apply(u, g1, psi)).vector()
        np.testing.assert_allclose(a, b, atol=1e-13)


class TestCircuit:
    def test_empty(self, rng):
        v = random_state(2, rng)
        c = QuantumCircuit(Hypergraph(2, ()), GateBasis({}), ())
        np.testing.assert_array_equal(apply_circuit(c, RegisterState.from_vector(v)).vector(), v)

    def test_xx_is_identity(self, rng):
        v = random_state(2, rng)
        c = QuantumCircuit.build(2, [("X", (1,)), ("X", (1,))])
        np.testing.assert_array_equal(apply_circuit(c, RegisterState.from_vector(v)).vector(), v)

    def test_random_circuit_against_dense_product(self, rng):
        l = 3
        gates, steps, dense = {}, [], np.eye(8)
        for k in range(5):
            r = int(rng.integers(1, 3))
            g = tuple(int(s) for s in rng.choice(np.arange(1, l + 1), r, replace=False))
            u = random_unitary(1 << r, rng)
            gates[f"G{k}"] = u
            steps.append((f"G{k}", g))
            dense = dense_embedding(u, g, l) @ dense
        c = QuantumCircuit.build(l, steps, gates)
        v = random_state(l, rng)
        psi = apply_circuit(c, RegisterState.from_vector(v))
        np.testing.assert_allclose(psi.vector(), dense @ v, atol=1e-13)
        assert abs(psi.norm() - 1) < 1e-12
        np.testing.assert_allclose(circuit_matrix(c), dense, atol=1e-13)

    def test_bell(self, bell_circuit):
        psi = apply_circuit(bell_circuit, RegisterState.basis("00"))
        dist = distribution_by_bits(measure_distribution(psi, cutoff=1e-30), 2)
        assert dist.keys() == {"00", "11"}
        assert dist["00"] == pytest.approx(0.5, abs=1e-12)
        assert dist["11"] == pytest.approx(0.5, abs=1e-12)

    def test_inconsistent_arity(self):
        with pytest.raises(CircuitError, match="arity"):
            QuantumCircuit.build(2, [("CNOT", (1,))])

    def test_edge_out_of_range(self):
        with pytest.raises(CircuitError):
            Hypergraph(2, [(1, 3)])

    def test_non_unitary_gate(self):
        with pytest.raises(CircuitError, match="unitary"):
            GateBasis({"bad": [[1, 1], [0, 1]]})

    def test_wrong_register(self, bell_circuit):
        with pytest.raises(CircuitError):
            apply_circuit(bell_circuit, RegisterState.basis("000"))


class TestMeasure:
    def test_basis_state(self):
        # bits written site 1 first: "10" is index 1, "01" is index 2
        assert measure_distribution(RegisterState.basis("10")) == {1: 1.0}
        assert measure_distribution(RegisterState.basis("01")) == {2: 1.0}

    def test_plus_state(self):
        psi = RegisterState.from_vector([1 / math.sqrt(2), 1 / math.sqrt(2)])
        assert measure_distribution(psi) == pytest.approx({0: 0.5, 1: 0.5}, abs=1e-15)

    def test_sums_to_one(self, rng):
        dist = measure_distribution(RegisterState.from_vector(random_state(5, rng)))
        assert sum(dist.values()) == pytest.approx(1, abs=1e-9)


class TestCompile:
    def test_identity(self):
        assert len(compile_two_level(np.eye(4))) == 0

    def test_cnot(self):
        c = compile_two_level(cnot())
        assert operator_norm(circuit_matrix(c) - cnot()) < 1e-12

    def test_random_two_qubit(self):
        u = random_unitary(4, np.random.default_rng(44))
        c = compile_two_level(u)
        assert len(c) <= 28
        assert operator_norm(circuit_matrix(c) - u) < 1e-9
        for gate, _ in c.steps():
            off = gate - np.eye(4)
            touched = np.flatnonzero(np.abs(off).sum(axis=0) + np.abs(off).sum(axis=1))
            assert len(touched) <= 2

    def test_three_qubit(self):
        u = random_unitary(8, 3)
        c = compile_two_level(u)
        assert len(c) <= 2 * 64 - 8
        assert operator_norm(circuit_matrix(c) - u) < 1e-9

    def test_rejects(self):
        with pytest.raises(CircuitError):
            compile_two_level(np.eye(3))
        with pytest.raises(ValueError):
            compile_two_level([[1, 1], [0, 1]])


class TestJson:
    def test_bell_document(self):
        doc = {
            "l": 2,
            "gates": [{"name": "H"}, {"name": "CNOT"}],
            "edges": [{"sites": [1], "gate": "H"}, {"sites": [1, 2], "gate": "CNOT"}],
        }
        psi = apply_circuit(circuit_from_json(doc), RegisterState.basis("00"))
        assert measure_distribution(psi, 1e-30) == pytest.approx({0: 0.5, 3: 0.5})

    def test_custom_matrix_and_implicit_builtin(self):
        doc = {
            "l": 1,
            "gates": [{"name": "flip", "matrix": [[0, 1], [1, 0]], "arity": 1}],
            "edges": [{"sites": [1], "gate": "flip"}, {"sites": [1], "gate": "ROT(pi)"}],
        }
        psi = apply_circuit(circuit_from_json(doc), RegisterState.basis("0"))
        assert measure_distribution(psi, 1e-20) == pytest.approx({1: 1.0})

    def test_arity_mismatch(self):
        doc = {"l": 2, "gates": [{"name": "CNOT", "arity": 1}], "edges": []}
        with pytest.raises(CircuitError):
            circuit_from_json(doc)

    def test_missing_field(self):
        with pytest.raises(CircuitError):
            circuit_from_json({"gates": []})
