import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtmlab.linalg import random_unitary
from qtmlab.turing import (
    ClassicalTM,
    Configuration,
    HaltedConfigurationError,
    QTMState,
    StepLimitExceeded,
    TransitionAmplitudes,
    UnitarityConditionError,
    check_local_unitarity,
    classical_step,
    diverging_scanner,
    halting_distribution,
    lattice_shift_machine,
    lift_classical,
    one_step_writer,
    qtm_step,
    right_scanner,
    run_classical,
    run_qtm,
    shift_machine,
    state_vector,
    unary_increment,
    window_configurations,
)

from conftest import dense_locality_matrix


def cfg(head, state, tape=None):
    return Configuration.make(head, state, tape or {}, "_")


def quantum_walk(n_dim=2, seed=0):
    """2-D walk: offset k maps coin |u_k> to |k>, u an orthonormal basis."""
    u = random_unitary(4, seed)
    offsets = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    blocks = {}
    for k, off in enumerate(offsets):
        m = np.zeros((4, 4), dtype=complex)
        m[k] = u[:, k].conj()
        blocks[off] = m
    return lattice_shift_machine(blocks, n_dim)


class TestConfiguration:
    def test_blank_elision(self):
        a = Configuration.make(0, "q", {0: "1", 3: "_"}, "_")
        b = Configuration.make(0, "q", {0: "1"}, "_")
        assert a == b and hash(a) == hash(b)

    def test_written(self):
        c = cfg(0, "q", {0: "1", 1: "1"})
        assert c.written((0,), "_", "_") == (((1,), "1"),)
        assert c.symbol((5,), "_") == "_"


class TestClassical:
    def test_one_step_writer(self):
        tm = one_step_writer()
        c = classical_step(tm, cfg(0, "q0"))
        assert c == cfg(0, "q1", {0: "1"})

    def test_scanner_step(self):
        tm = right_scanner()
        c = classical_step(tm, cfg(3, "q0", {3: "1", 4: "1"}))
        assert c == cfg(4, "q0", {3: "1", 4: "1"})

    def test_step_on_halted(self):
        with pytest.raises(HaltedConfigurationError):
            classical_step(one_step_writer(), cfg(0, "q1"))

    def test_run_writer(self):
        r = run_classical(one_step_writer(), "")
        assert (r.output_word, r.t, r.s) == ("1", 1, 1)

    def test_diverging(self):
        with pytest.raises(StepLimitExceeded):
            run_classical(diverging_scanner(), "", step_limit=100)

    def test_increment_hand_trace(self):
        # "11": scan right to cell 2, write 1 and step to 3, turn back at 3,
        # walk left over cells 2..0 to -1, then step right into q1 at 0.
        r = run_classical(unary_increment(), "11")
        heads = [c.head[0] for c in r.trajectory]
        states = [c.state for c in r.trajectory]
        assert heads == [0, 1, 2, 3, 2, 1, 0, -1, 0]
        assert states == ["q0", "q0", "q0", "qr", "qb", "qb", "qb", "qb", "q1"]
        assert (r.output_word, r.t, r.s) == ("111", 8, 5)

    def test_increment_111(self):
        r = run_classical(unary_increment(), "111")
        assert r.output_word == "1111" and r.t == 10

    def test_partial_delta_rejected(self):
        with pytest.raises(ValueError, match="not total"):
            ClassicalTM(("q0", "q1"), ("_", "1"), {("q0", "_"): ("q1", "1", "N")}, "q0", "q1")

    def test_diagonal_move_rejected(self):
        with pytest.raises(ValueError):
            ClassicalTM(("q0", "q1"), ("_",), {("q0", "_"): ("q1", "_", (1, 1))}, "q0", "q1", "_", 2)


class TestLift:
    def test_writer_amplitudes(self):
        rule = lift_classical(one_step_writer())
        assert rule.amplitude(0, "q0", "_", "q1", "1") == 1
        assert rule.amplitude(1, "q0", "_", "q1", "1") == 0
        assert rule.amplitude(0, "q0", "_", "q0", "1") == 0

    def test_scanner_amplitude(self):
        assert lift_classical(right_scanner()).amplitude(1, "q0", "1", "q0", "1") == 1

    @pytest.mark.parametrize("word", ["", "1", "11", "1111"])
    def test_trajectory_matches_classical(self, word):
        tm = unary_increment()
        rule = lift_classical(tm)
        run = run_classical(tm, word)
        psi = QTMState.basis(run.trajectory[0])
        for expected in run.trajectory[1:]:
            psi = qtm_step(rule, psi)
            assert psi.amplitudes == {expected: 1}


class TestStep:
    def test_shift_moves_left(self):
        rule = shift_machine(np.eye(1), np.zeros((1, 1)))
        out = qtm_step(rule, QTMState.basis(cfg(3, 0)))
        assert out.amplitudes == {cfg(2, 0): 1}

    def test_shift_b_moves_right(self):
        rule = shift_machine(np.zeros((1, 1)), np.eye(1))
        out = qtm_step(rule, QTMState.basis(cfg(3, 0)))
        assert out.amplitudes == {cfg(4, 0): 1}

    def test_shift_matches_matrix_element_convention(self):
        # <e(i, a), U e(i', a')> = delta_{i+1, i'} A[a, a'] + delta_{i-1, i'} B[a, a']
        u = random_unitary(2, 1)
        A = np.diag([1, 0]) @ u
        B = np.diag([0, 1]) @ u
        rule = shift_machine(A, B)
        for src_alpha in range(2):
            out = qtm_step(rule, QTMState.basis(cfg(0, src_alpha))).amplitudes
            for alpha in range(2):
                assert out.get(cfg(-1, alpha), 0) == pytest.approx(A[alpha, src_alpha])
                assert out.get(cfg(1, alpha), 0) == pytest.approx(B[alpha, src_alpha])

    def test_writer(self):
        out = qtm_step(lift_classical(one_step_writer()), QTMState.basis(cfg(0, "q0")))
        assert out.amplitudes == {cfg(0, "q1", {0: "1"}): 1}

    def test_superposition_against_dense(self):
        rule = lift_classical(unary_increment())
        configs, _ = window_configurations(rule, (-2, 2))
        m = dense_locality_matrix(rule, configs)
        psi = QTMState.superpose([
            (1 / math.sqrt(2), cfg(0, "q0", {0: "1"})),
            (1 / math.sqrt(2), cfg(0, "q0", {0: "1", 1: "1"})),
        ])
        out = qtm_step(rule, psi)
        np.testing.assert_allclose(state_vector(out, configs), m @ state_vector(psi, configs), atol=1e-15)
        assert abs(out.norm() - 1) < 1e-15
        assert sorted(abs(a) for a in out.amplitudes.values()) == pytest.approx([1 / math.sqrt(2)] * 2)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_locality(self, seed):
        rng = np.random.default_rng(seed)
        rule = quantum_walk(seed=seed)
        src = cfg((int(rng.integers(-3, 3)), int(rng.integers(-3, 3))), int(rng.integers(4)))
        for tgt in qtm_step(rule, QTMState.basis(src)).amplitudes:
            assert max(abs(a - b) for a, b in zip(tgt.head, src.head)) <= 1
            assert sum(abs(a - b) for a, b in zip(tgt.head, src.head)) <= 1
            changed = {p for p, _ in set(tgt.tape) ^ set(src.tape)}
            assert changed <= {src.head}

    def test_sparse_equals_dense_random_amplitudes(self, rng):
        rule = quantum_walk(seed=3)
        configs, interior = window_configurations(rule, (-2, 2))
        m = dense_locality_matrix(rule, configs)
        v = np.zeros(len(configs), dtype=complex)
        v[interior] = rng.standard_normal(len(interior)) + 1j * rng.standard_normal(len(interior))
        psi = QTMState(2, {configs[k]: v[k] for k in interior})
        out = qtm_step(rule, psi)
        np.testing.assert_allclose(state_vector(out, configs), m @ v, atol=1e-14)
        assert abs(out.norm() - np.linalg.norm(v)) < 1e-12


class TestShiftMachine:
    def test_valid(self):
        assert shift_machine(np.eye(2), np.zeros((2, 2))).info["residuals"]["cross"] == 0
        shift_machine(np.zeros((2, 2)), np.eye(2))

    def test_half_and_half_invalid(self):
        with pytest.raises(UnitarityConditionError) as exc:
            shift_machine(np.eye(2) / math.sqrt(2), np.eye(2) / math.sqrt(2))
        # A B* = I/2
        assert exc.value.residuals["cross"] == pytest.approx(0.5)


class TestLocalUnitarity:
    def test_shift(self):
        assert check_local_unitarity(shift_machine(np.eye(1), np.zeros((1, 1))), (-5, 5)) < 1e-14

    def test_walk(self):
        u = random_unitary(2, 9)
        rule = shift_machine(np.diag([1, 0]) @ u, np.diag([0, 1]) @ u)
        assert check_local_unitarity(rule, (-5, 5)) < 1e-14

    def test_lifted_increment(self):
        assert check_local_unitarity(lift_classical(unary_increment()), (-2, 2)) < 1e-14

    def test_non_isometric(self):
        rule = TransitionAmplitudes(
            1, ("q",), ("_", "1"), "_",
            ((0, "q", "_", "q", "_", 1.0), (0, "q", "_", "q", "1", 1.0),
             (0, "q", "1", "q", "1", 1.0)),
        )
        assert check_local_unitarity(rule, (-2, 2)) > 0.5

    def test_tiny_window(self):
        with pytest.raises(ValueError):
            check_local_unitarity(shift_machine(np.eye(1), np.zeros((1, 1))), (0, 1))


class TestRunQTM:
    def test_probability_rule(self):
        f1, f2 = {0: "1"}, {0: "1", 1: "1"}
        psi = QTMState.superpose([(3 / 5, cfg(0, "q1", f1)), (4 / 5, cfg(0, "q1", f2))])
        rule = lift_classical(unary_increment())
        out = run_qtm(rule, psi, 1)
        assert out.halted and out.t == 0
        assert out.word_distribution("_") == pytest.approx({"1": 9 / 25, "11": 16 / 25}, abs=1e-15)

    def test_unnormalised_expansion(self):
        psi = QTMState.superpose([(3.0, cfg(0, "q1", {0: "1"})), (4.0, cfg(0, "q1"))])
        dist, leak = halting_distribution(psi, "q1")
        assert sorted(dist.values()) == pytest.approx([9 / 25, 16 / 25])
        assert leak == 0

    def test_leakage_blocks_halting(self):
        psi = QTMState.superpose([(0.6, cfg(0, "q1")), (0.8, cfg(1, "q1"))])
        dist, leak = halting_distribution(psi, "q1")
        assert dist is None and leak == pytest.approx(0.64)

    def test_writer_halts_at_one(self):
        out = run_qtm(lift_classical(one_step_writer()), "", 10)
        assert out.halted and out.t == 1
        assert out.word_distribution("_") == {"1": 1.0}

    def test_increment(self):
        out = run_qtm(lift_classical(unary_increment()), "11", 50)
        assert out.halted and out.t == run_classical(unary_increment(), "11").t == 8
        assert out.word_distribution("_") == {"111": 1.0}

    def test_budget_is_an_outcome(self):
        out = run_qtm(lift_classical(diverging_scanner()), "", 5)
        assert not out.halted and out.t == 5 and out.distribution == {}

    def test_distribution_sums_to_one_under_superposed_input(self):
        rule = lift_classical(unary_increment())
        a = cfg(0, "q0", {0: "1"})
        b = cfg(0, "q0", {0: "1", 1: "1", 2: "1"})
        # different halting times, so the superposition never lies in the halting span
        out = run_qtm(rule, QTMState.superpose([(0.6, a), (0.8, b)]), 30)
        assert not out.halted
        same = QTMState.superpose([(0.6, a), (0.8j, a)])
        out = run_qtm(rule, same, 30)
        assert out.halted and sum(out.distribution.values()) == pytest.approx(1, abs=1e-9)
