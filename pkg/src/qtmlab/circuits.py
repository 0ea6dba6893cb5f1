"""Hypergraph quantum circuits on an l-qubit register.

Bit order: site ``k`` (1-based) carries weight ``2**(k-1)`` in the basis
index, so ``a = sum_k a_k 2**(k-1)``.  Bit strings are written site 1
first.  A gate on the ordered edge ``(g_1, ..., g_m)`` sees the local index
``sum_k b_{g_k} 2**(k-1)``; for CNOT the first site is the control.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .linalg import as_matrix, check_unitary, decompose_simple_form, matrix_from_json

DENSE_MAX_QUBITS = 24


class CircuitError(ValueError):
    """Inconsistent hypergraph, gate basis or assignment."""


def basis_index(bits) -> int:
    total = 0
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"bit {k + 1} is {b!r}, expected 0 or 1")
        total |= int(b) << k
    return total


def basis_bits(index, l):
    if not 0 <= index < 1 << l:
        raise ValueError(f"index {index} out of range for {l} qubits")
    return tuple((index >> k) & 1 for k in range(l))


def bits_from_string(s):
    return tuple(int(ch) for ch in s)


def bits_to_string(bits):
    return "".join(str(b) for b in bits)


def cnot():
    """|a, b> -> |a, a xor b> with the control on the first edge site."""
    m = np.zeros((4, 4), dtype=complex)
    for a in (0, 1):
        for b in (0, 1):
            m[basis_index((a, a ^ b)), basis_index((a, b))] = 1
    return m


def pauli_x():
    return np.array([[0, 1], [1, 0]], dtype=complex)


def hadamard():
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def phase(theta):
    return np.diag([1, np.exp(1j * theta)])


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(text):
    """Evaluate a small arithmetic expression over numbers and ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported angle expression {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


_PARAM = re.compile(r"^(ROT|PHASE)\((.+)\)$")


def builtin_gate(name):
    """Matrix for a built-in gate name: CNOT, X, H, ROT(theta), PHASE(theta)."""
    if name == "CNOT":
        return cnot()
    if name == "X":
        return pauli_x()
    if name == "H":
        return hadamard()
    m = _PARAM.match(name.replace(" ", ""))
    if m:
        theta = _eval_angle(m.group(2))
        return rot(theta) if m.group(1) == "ROT" else phase(theta)
    raise KeyError(name)


@dataclass(frozen=True)
class Hypergraph:
    l: int
    edges: tuple

    def __post_init__(self):
        if self.l < 1:
            raise CircuitError("need at least one site")
        edges = tuple(tuple(int(s) for s in e) for e in self.edges)
        for k, e in enumerate(edges, 1):
            if not e:
                raise CircuitError(f"edge {k} is empty")
            if len(set(e)) != len(e):
                raise CircuitError(f"edge {k} repeats a site: {e}")
            for s in e:
                if not 1 <= s <= self.l:
                    raise CircuitError(f"edge {k} references site {s} outside 1..{self.l}")
        object.__setattr__(self, "edges", edges)


@dataclass(frozen=True)
class GateBasis:
    gates: Mapping

    def __post_init__(self):
        checked = {}
        for name, m in self.gates.items():
            m = as_matrix(m)
            r = int(round(math.log2(m.shape[0]))) if m.shape[0] > 0 else -1
            if m.shape[0] != m.shape[1] or (1 << r) != m.shape[0] or r < 1:
                raise CircuitError(f"gate {name!r} must be 2^r x 2^r, got {m.shape}")
            ok, res = check_unitary(m, 1e-12)
            if not ok:
                raise CircuitError(f"gate {name!r} is not unitary (residual {res:.3e})")
            checked[name] = m
        object.__setattr__(self, "gates", checked)

    def arity(self, name):
        return int(round(math.log2(self.gates[name].shape[0])))


@dataclass(frozen=True)
class QuantumCircuit:
    """The tuple (hypergraph, basis, assignment); edge i carries gate ``assignment[i]``."""

    hypergraph: Hypergraph
    basis: GateBasis
    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(self.assignment))
        if len(self.assignment) != len(self.hypergraph.edges):
            raise CircuitError("assignment length differs from the number of edges")
        for k, (edge, name) in enumerate(zip(self.hypergraph.edges, self.assignment), 1):
            if name not in self.basis.gates:
                raise CircuitError(f"edge {k} uses unknown gate {name!r}")
            r = self.basis.arity(name)
            if len(edge) != r:
                raise CircuitError(f"edge {k} has {len(edge)} sites but gate {name!r} has arity {r}")

    @classmethod
    def build(cls, l, steps, extra_gates=None):
        """Circuit from ``[(gate_name, sites), ...]``; built-in names are resolved."""
        gates = dict(extra_gates or {})
        for name, _ in steps:
            if name not in gates:
                gates[name] = builtin_gate(name)
        return cls(Hypergraph(l, [s for _, s in steps]), GateBasis(gates), [n for n, _ in steps])

    @property
    def l(self):
        return self.hypergraph.l

    def __len__(self):
        return len(self.assignment)

    def steps(self):
        for edge, name in zip(self.hypergraph.edges, self.assignment):
            yield self.basis.gates[name], edge


@dataclass(frozen=True)
class RegisterState:
    """Amplitudes over the computational basis.

    ``amplitudes`` is a flat array for ``l <= 24`` and a dict
    ``index -> amplitude`` above that.
    """

    l: int
    amplitudes: object = field(repr=False)

    @classmethod
    def basis(cls, bits, sparse=None):
        if isinstance(bits, str):
            bits = bits_from_string(bits)
        l = len(bits)
        idx = basis_index(bits)
        if sparse if sparse is not None else l > DENSE_MAX_QUBITS:
            return cls(l, {idx: 1 + 0j})
        v = np.zeros(1 << l, dtype=complex)
        v[idx] = 1
        return cls(l, v)

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=complex)
        l = int(round(math.log2(v.size)))
        if 1 << l != v.size:
            raise ValueError("vector length must be a power of two")
        return cls(l, v.copy())

    @property
    def is_sparse(self):
        return isinstance(self.amplitudes, dict)

    def vector(self):
        if not self.is_sparse:
            return self.amplitudes
        v = np.zeros(1 << self.l, dtype=complex)
        for k, a in self.amplitudes.items():
            v[k] = a
        return v

    def norm(self):
        if self.is_sparse:
            return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))
        return float(np.linalg.norm(self.amplitudes))


def _check_edge(u, g, l):
    g = tuple(int(s) for s in g)
    if len(set(g)) != len(g):
        raise CircuitError(f"repeated site in {g}")
    for s in g:
        if not 1 <= s <= l:
            raise CircuitError(f"site {s} outside 1..{l}")
    u = as_matrix(u)
    if u.shape != (1 << len(g), 1 << len(g)):
        raise CircuitError(f"gate of shape {u.shape} does not act on {len(g)} qubits")
    return u, g


def _embed_dense(u, g, v, l):
    m = len(g)
    t = v.reshape((2,) * l)
    # C-order axis l - s holds site s; local index puts g_1 least significant
    axes = [l - s for s in reversed(g)]
    t = np.moveaxis(t, axes, range(m))
    shape = t.shape
    t = (u @ t.reshape(1 << m, -1)).reshape(shape)
    return np.moveaxis(t, range(m), axes).reshape(-1)


def _embed_sparse(u, g, amps):
    mask = 0
    for s in g:
        mask |= 1 << (s - 1)
    groups = defaultdict(dict)
    for idx, a in amps.items():
        local = 0
        for k, s in enumerate(g):
            local |= ((idx >> (s - 1)) & 1) << k
        groups[idx & ~mask][local] = a
    out = {}
    for rest in sorted(groups):
        vec = np.zeros(u.shape[0], dtype=complex)
        for local, a in groups[rest].items():
            vec[local] = a
        res = u @ vec
        for local in np.flatnonzero(res):
            idx = rest
            for k, s in enumerate(g):
                idx |= ((int(local) >> k) & 1) << (s - 1)
            out[idx] = complex(res[local])
    return out


def embed_apply(u, g, psi: RegisterState) -> RegisterState:
    """Apply ``U`` on sites ``g`` tensored with the identity elsewhere."""
    u, g = _check_edge(u, g, psi.l)
    if psi.is_sparse:
        return RegisterState(psi.l, _embed_sparse(u, g, psi.amplitudes))
    return RegisterState(psi.l, _embed_dense(u, g, psi.amplitudes, psi.l))


def apply_circuit(c: QuantumCircuit, psi: RegisterState) -> RegisterState:
    """``U_T ... U_1 psi``: edges act in list order."""
    if c.l != psi.l:
        raise CircuitError(f"circuit has {c.l} sites, state has {psi.l}")
    for u, g in c.steps():
        psi = embed_apply(u, g, psi)
    return psi


def circuit_matrix(c: QuantumCircuit):
    """Dense matrix of the whole circuit, column by column."""
    n = 1 << c.l
    cols = [apply_circuit(c, RegisterState.from_vector(np.eye(n)[k])).vector() for k in range(n)]
    return np.column_stack(cols)


def measure_distribution(psi: RegisterState, cutoff=0.0):
    """Born probabilities ``|psi_a|^2`` keyed by basis index."""
    if psi.is_sparse:
        items = psi.amplitudes.items()
    else:
        items = ((int(k), psi.amplitudes[k]) for k in np.flatnonzero(psi.amplitudes))
    return {k: float(abs(a) ** 2) for k, a in sorted(items) if abs(a) ** 2 > cutoff}


def distribution_by_bits(dist, l):
    return {bits_to_string(basis_bits(k, l)): p for k, p in dist.items()}


def compile_two_level(u, tol=1e-10) -> QuantumCircuit:
    """Circuit of two-level gates reproducing ``u`` on ``l`` qubits.

    Each simple-form factor becomes a gate on all ``l`` sites that acts
    nontrivially on at most two basis states.
    """
    u = as_matrix(u)
    l = int(round(math.log2(u.shape[0])))
    if 1 << l != u.shape[0]:
        raise CircuitError("matrix dimension must be a power of two")
    dec = decompose_simple_form(u, tol)
    gates, steps = {}, []
    # U = F_1 ... F_n, so F_n acts first
    for k, f in enumerate(reversed(dec.factors)):
        name = f"{f.kind}{list(f.indices)}#{k}"
        gates[name] = f.matrix()
        steps.append((name, tuple(range(1, l + 1))))
    return QuantumCircuit(Hypergraph(l, [s for _, s in steps]), GateBasis(gates), [n for n, _ in steps])


def circuit_from_json(doc) -> QuantumCircuit:
    """Build a circuit from ``{l, gates: [{name, matrix?, arity}], edges: [{sites, gate}]}``."""
    try:
        l = int(doc["l"])
        gate_specs = doc.get("gates", [])
        edge_specs = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CircuitError(f"malformed circuit document: missing or bad field {exc}") from None
    gates = {}
    for entry in gate_specs:
        name = entry["name"]
        if "matrix" in entry and entry["matrix"] is not None:
            m = matrix_from_json(entry["matrix"])
        else:
            try:
                m = builtin_gate(name)
            except KeyError:
                raise CircuitError(f"gate {name!r} has no matrix and is not built in") from None
        if "arity" in entry and (1 << int(entry["arity"])) != m.shape[0]:
            raise CircuitError(f"gate {name!r}: declared arity {entry['arity']} disagrees with matrix")
        gates[name] = m
    edges, names = [], []
    for entry in edge_specs:
        name = entry["gate"]
        if name not in gates:
            try:
                gates[name] = builtin_gate(name)
            except KeyError:
                raise CircuitError(f"edge uses unknown gate {name!r}") from None
        edges.append(tuple(entry["sites"]))
        names.append(name)
    return QuantumCircuit(Hypergraph(l, edges), GateBasis(gates), names)
