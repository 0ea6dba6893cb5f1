"""
Hypergraph circuits
===================

Gates sit on ordered tuples of sites.  Site 1 is the least significant
bit and bit strings are written site 1 first.
"""

import numpy as np

from qtmlab import circuits
from qtmlab.circuits import QuantumCircuit, RegisterState

bell = QuantumCircuit.build(2, [("H", (1,)), ("CNOT", (1, 2))])
psi = circuits.apply_circuit(bell, RegisterState.basis("00"))
print("Bell pair:", circuits.distribution_by_bits(circuits.measure_distribution(psi, 1e-15), 2))

# GHZ on 30 qubits: the register switches to a sparse map above 24 sites.
l = 30
steps = [("H", (1,))] + [("CNOT", (1, k)) for k in range(2, l + 1)]
psi = circuits.apply_circuit(QuantumCircuit.build(l, steps), RegisterState.basis("0" * l))
print(f"GHZ_{l}: sparse={psi.is_sparse}, support={len(psi.amplitudes)}")

# Compile a random two-qubit unitary into two-level gates and check it.
u = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))[0]
c = circuits.compile_two_level(u)
err = np.linalg.norm(circuits.circuit_matrix(c) - u, 2)
print(f"two-level compilation: {len(c)} gates, error {err:.1e}")
