"""
Quantum Turing machines on a tape
=================================

A classical reversible machine, lifted to amplitudes, and a quantum walk
built from the shift-machine construction.
"""

import numpy as np

from qtmlab import turing

# The unary increment machine appends one '1' to its input.  It is built so
# that its step map is a bijection on configurations, which is what makes
# the lifted amplitude rule unitary.
tm = turing.unary_increment()
run = turing.run_classical(tm, "11")
print("classical run on '11':", run.output_word, "after", run.t, "steps,", run.s, "cells scanned")
for cfg in run.trajectory:
    print("   head", cfg.head[0], "state", cfg.state)

rule = turing.lift_classical(tm)
print("\nlocal unitarity residual of the lifted rule:",
      turing.check_local_unitarity(rule, (-3, 3)))
out = turing.run_qtm(rule, "11", t_max=50)
print("quantum run halts at t =", out.t, "with", out.word_distribution("_"))

# Superposed tapes in the final state: probabilities are |c|^2 / N.
cfg = lambda tape: turing.Configuration.make(0, "q1", tape, "_")
psi = turing.QTMState.superpose([(3, cfg({0: "1"})), (4, cfg({0: "1", 1: "1"}))])
print("\nhalting distribution of 3|1> + 4|11>:", turing.run_qtm(rule, psi, 1).word_distribution("_"))

# A two-state walk: A sends the head left, B right.  Splitting a unitary u
# by rows gives A*A + B*B = I and A B* = 0, so the step is unitary.
u = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
walk = turing.shift_machine(np.diag([1, 0]) @ u, np.diag([0, 1]) @ u)
psi = turing.QTMState.basis(turing.Configuration.make(0, 0, {}, walk.blank))
for _ in range(30):
    psi = turing.qtm_step(walk, psi)
pos = {}
for c, a in psi.amplitudes.items():
    pos[c.head[0]] = pos.get(c.head[0], 0) + abs(a) ** 2
x = np.array(sorted(pos))
p = np.array([pos[k] for k in x])
# ballistic spread: the standard deviation grows like t, not sqrt(t)
print(f"\nHadamard walk after 30 steps: norm {psi.norm():.12f}, "
      f"std of head position {np.sqrt(p @ x**2 - (p @ x) ** 2):.2f} (random walk: {np.sqrt(30):.2f})")

# The same with equal halves is not a valid machine.
try:
    turing.shift_machine(np.eye(2) / np.sqrt(2), np.eye(2) / np.sqrt(2))
except turing.UnitarityConditionError as exc:
    print("\nA = B = I/sqrt(2) rejected:", exc)
