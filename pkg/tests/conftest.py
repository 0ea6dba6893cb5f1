import numpy as np
import pytest

from qtmlab import circuits


def dense_locality_matrix(rule, configs):
    """Step matrix assembled entry by entry from the locality condition.

    ``M[target, source] = u_sigma(q, F(i), q', F'(i))`` when the head moved
    by an admissible ``sigma`` and the tapes agree away from the source
    head ``i``; zero otherwise.  Uses only ``rule.amplitude``.
    """
    n = len(configs)
    m = np.zeros((n, n), dtype=complex)
    blank = rule.blank
    for s, src in enumerate(configs):
        i = src.head
        a = src.symbol(i, blank)
        src_off = {p: x for p, x in src.tape if p != i}
        for t, tgt in enumerate(configs):
            sigma = tuple(h2 - h1 for h2, h1 in zip(tgt.head, i))
            if sum(abs(x) for x in sigma) > 1:
                continue
            if {p: x for p, x in tgt.tape if p != i} != src_off:
                continue
            m[t, s] = rule.amplitude(sigma, src.state, a, tgt.state, tgt.symbol(i, blank))
    return m


def dense_embedding(u, g, l):
    """``Lambda_g(U)`` built by looping over all pairs of basis indices."""
    n = 1 << l
    out = np.zeros((n, n), dtype=complex)
    mask = sum(1 << (s - 1) for s in g)

    def local(idx):
        return sum(((idx >> (s - 1)) & 1) << k for k, s in enumerate(g))

    for a in range(n):
        for b in range(n):
            if a & ~mask == b & ~mask:
                out[a, b] = u[local(a), local(b)]
    return out


def random_state(l, rng):
    v = rng.standard_normal(1 << l) + 1j * rng.standard_normal(1 << l)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def bell_circuit():
    return circuits.QuantumCircuit.build(2, [("ROT(pi/4)", (1,)), ("CNOT", (1, 2))])


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
