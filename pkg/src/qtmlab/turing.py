"""Classical and quantum Turing machines on a d-dimensional tape.

Conventions
-----------
* A configuration is ``(head, state, tape)`` with ``head`` a d-tuple of
  ints and ``tape`` a sorted tuple of ``(position, symbol)`` pairs that
  never lists the blank symbol, so equal configurations hash equally.
* The step operator maps a *source* configuration ``(i, q, F)`` to targets
  ``(i + sigma, q', F[i -> a'])`` with amplitude ``u_sigma(q, F(i), q', a')``.
  For the shift machine this means ``A`` moves the head left and ``B``
  moves it right.
* Moves on a d-dimensional tape are the 2d unit axis steps plus staying
  put; diagonal offsets are rejected.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np
import scipy.sparse as sp

from .linalg import as_matrix, operator_norm

HALT_TOL = 1e-9
_MOVE_NAMES = {"R": 1, "L": -1, "N": 0}


class StepLimitExceeded(RuntimeError):
    """A classical run did not reach the final state within its budget."""


class HaltedConfigurationError(ValueError):
    """A step was requested from a configuration already in the final state."""


class UnitarityConditionError(ValueError):
    """Shift-machine blocks violate the unitarity conditions."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


def _as_pos(p, d=None):
    if isinstance(p, (int, np.integer)):
        p = (int(p),)
    p = tuple(int(x) for x in p)
    if d is not None and len(p) != d:
        raise ValueError(f"position {p} does not have dimension {d}")
    return p


def normalize_move(move, d=1):
    """Turn 'R'/'L'/'N', an int or a d-tuple into an axis offset tuple."""
    if isinstance(move, str):
        if d != 1 or move not in _MOVE_NAMES:
            raise ValueError(f"move {move!r} is only meaningful as R/L/N on a 1-D tape")
        move = _MOVE_NAMES[move]
    sigma = _as_pos(move, d)
    if sum(abs(x) for x in sigma) > 1:
        raise ValueError(f"move {sigma} is not an axis step of length <= 1")
    return sigma


def axis_moves(d):
    """The 2d + 1 admissible head offsets, no-move first."""
    moves = [(0,) * d]
    for k in range(d):
        for s in (-1, 1):
            m = [0] * d
            m[k] = s
            moves.append(tuple(m))
    return moves


def _sym_key(x):
    return repr(x)


def canonical_tape(tape: Mapping, blank, d=1):
    items = []
    for pos, sym in tape.items():
        if sym != blank:
            items.append((_as_pos(pos, d), sym))
    items.sort(key=lambda it: it[0])
    return tuple(items)


@dataclass(frozen=True)
class Configuration:
    head: tuple
    state: Hashable
    tape: tuple = ()

    @classmethod
    def make(cls, head, state, tape: Mapping | None = None, blank="_", d=None):
        head = _as_pos(head, d)
        return cls(head, state, canonical_tape(tape or {}, blank, len(head)))

    @property
    def dimension(self):
        return len(self.head)

    def symbol(self, pos, blank):
        for p, s in self.tape:
            if p == pos:
                return s
        return blank

    def tape_dict(self):
        return dict(self.tape)

    def written(self, pos, sym, blank):
        """Tape tuple with ``pos`` overwritten by ``sym``."""
        items = [(p, s) for p, s in self.tape if p != pos]
        if sym != blank:
            items.append((pos, sym))
            items.sort(key=lambda it: it[0])
        return tuple(items)

    def sort_key(self):
        return (self.head, _sym_key(self.state), tuple((p, _sym_key(s)) for p, s in self.tape))


def read_output(tape, blank):
    """Symbols from cell 0 along the first axis up to the first blank."""
    cells = dict(tape)
    d = len(next(iter(cells))) if cells else 1
    out = []
    k = 0
    while True:
        pos = (k,) + (0,) * (d - 1)
        sym = cells.get(pos, blank)
        if sym == blank:
            return out
        out.append(sym)
        k += 1


def word(symbols):
    return "".join(str(s) for s in symbols)


def input_tape(symbols, blank, d=1):
    """Input placed in cells 0..n-1 along the first axis."""
    return {(k,) + (0,) * (d - 1): s for k, s in enumerate(symbols)}


@dataclass(frozen=True)
class ClassicalTM:
    """Deterministic TM ``(Q, Sigma, delta)``.

    ``delta`` maps ``(q, a)`` to ``(q', a', move)`` and must be total on
    non-final states.  ``final_transitions`` optionally extends the rule
    out of the final state; a classical run never uses it, but it lets the
    lifted QTM be a bijection on configurations.
    """

    states: tuple
    alphabet: tuple
    delta: Mapping
    initial: Hashable
    final: Hashable
    blank: Hashable = "_"
    dimension: int = 1
    final_transitions: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if self.initial not in self.states or self.final not in self.states:
            raise ValueError("initial and final states must belong to Q")
        if self.blank not in self.alphabet:
            raise ValueError("blank symbol must belong to the alphabet")
        table = {}
        for source, rule in (*self.delta.items(), *self.final_transitions.items()):
            q2, a2, move = rule
            if q2 not in self.states or a2 not in self.alphabet:
                raise ValueError(f"transition {source} -> {rule} leaves Q or Sigma")
            table[source] = (q2, a2, normalize_move(move, self.dimension))
        for q in self.states:
            if q == self.final:
                continue
            for a in self.alphabet:
                if (q, a) not in self.delta:
                    raise ValueError(f"delta is not total: missing ({q!r}, {a!r})")
        for q, _ in self.final_transitions:
            if q != self.final:
                raise ValueError("final_transitions may only start in the final state")
        object.__setattr__(self, "_table", table)

    def transition(self, q, a):
        return self._table[(q, a)]


def classical_step(tm: ClassicalTM, c: Configuration) -> Configuration:
    if c.state == tm.final:
        raise HaltedConfigurationError("configuration is already in the final state")
    q2, a2, sigma = tm.transition(c.state, c.symbol(c.head, tm.blank))
    head = tuple(h + s for h, s in zip(c.head, sigma))
    return Configuration(head, q2, c.written(c.head, a2, tm.blank))


@dataclass(frozen=True)
class ClassicalRun:
    output: list
    t: int
    s: int
    final: Configuration
    trajectory: tuple = field(repr=False, default=())

    @property
    def output_word(self):
        return word(self.output)


def run_classical(tm: ClassicalTM, symbols, step_limit=10_000) -> ClassicalRun:
    """Run from head 0 in the initial state with the input in cells 0..n-1."""
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    c = Configuration.make((0,) * tm.dimension, tm.initial, input_tape(symbols, tm.blank, tm.dimension), tm.blank)
    scanned = {c.head}
    traj = [c]
    t = 0
    while c.state != tm.final:
        if t >= step_limit:
            raise StepLimitExceeded(f"no halt within {step_limit} steps")
        c = classical_step(tm, c)
        scanned.add(c.head)
        traj.append(c)
        t += 1
    return ClassicalRun(read_output(c.tape, tm.blank), t, len(scanned), c, tuple(traj))


@dataclass(frozen=True)
class TransitionAmplitudes:
    """The local amplitudes ``u_sigma(q, a, q', a')`` of a QTM.

    ``entries`` is a tuple of ``(sigma, q, a, q', a', amplitude)`` with
    ``sigma`` an axis offset tuple.  Missing entries are zero.
    """

    dimension: int
    states: tuple
    alphabet: tuple
    blank: Hashable
    entries: tuple
    initial: Hashable = None
    final: Hashable = None
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        table = defaultdict(dict)
        for sigma, q, a, q2, a2, amp in self.entries:
            sigma = normalize_move(sigma, self.dimension)
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError("amplitudes must be finite")
            for s in (q, q2):
                if s not in self.states:
                    raise ValueError(f"unknown state {s!r}")
            for s in (a, a2):
                if s not in self.alphabet:
                    raise ValueError(f"unknown symbol {s!r}")
            key = (sigma, q2, a2)
            table[(q, a)][key] = table[(q, a)].get(key, 0j) + amp
        frozen = {}
        for src, targets in table.items():
            items = [(s, q2, a2, amp) for (s, q2, a2), amp in targets.items() if amp != 0]
            items.sort(key=lambda it: (it[0], _sym_key(it[1]), _sym_key(it[2])))
            frozen[src] = tuple(items)
        object.__setattr__(self, "_table", frozen)

    def amplitude(self, sigma, q, a, q2, a2):
        sigma = normalize_move(sigma, self.dimension)
        for s, t_q, t_a, amp in self._table.get((q, a), ()):
            if (s, t_q, t_a) == (sigma, q2, a2):
                return amp
        return 0j

    def targets(self, q, a):
        return self._table.get((q, a), ())

    def transitions(self):
        """Yield ``(q, a, sigma, q', a', amplitude)`` for every nonzero entry."""
        for (q, a), targets in self._table.items():
            for sigma, q2, a2, amp in targets:
                yield q, a, sigma, q2, a2, amp


def lift_classical(tm: ClassicalTM) -> TransitionAmplitudes:
    """QTM whose amplitudes are 1 exactly on the classical transitions."""
    entries = []
    for (q, a), (q2, a2, move) in (*tm.delta.items(), *tm.final_transitions.items()):
        entries.append((normalize_move(move, tm.dimension), q, a, q2, a2, 1.0))
    return TransitionAmplitudes(
        tm.dimension, tm.states, tm.alphabet, tm.blank, tuple(entries), tm.initial, tm.final
    )


@dataclass(frozen=True)
class QTMState:
    """Sparse superposition of configurations."""

    dimension: int
    amplitudes: Mapping

    @classmethod
    def basis(cls, config: Configuration):
        return cls(config.dimension, {config: 1 + 0j})

    @classmethod
    def superpose(cls, terms):
        amps = defaultdict(complex)
        d = None
        for amp, c in terms:
            amps[c] += amp
            d = c.dimension
        return cls(d, dict(amps))

    def norm(self):
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def sorted_items(self):
        return sorted(self.amplitudes.items(), key=lambda kv: kv[0].sort_key())

    def __len__(self):
        return len(self.amplitudes)


def qtm_step(rule: TransitionAmplitudes, psi: QTMState) -> QTMState:
    """Apply the local step operator once; summation follows sorted source order."""
    out = defaultdict(complex)
    blank = rule.blank
    for c, amp in psi.sorted_items():
        a = c.symbol(c.head, blank)
        for sigma, q2, a2, u in rule.targets(c.state, a):
            head = tuple(h + s for h, s in zip(c.head, sigma))
            out[Configuration(head, q2, c.written(c.head, a2, blank))] += amp * u
    return QTMState(psi.dimension, dict(out))


def lattice_shift_machine(blocks: Mapping, dimension=1, tol=1e-12, blank="_") -> TransitionAmplitudes:
    """Walk on an internal index with one matrix per head offset.

    ``blocks[sigma][alpha', alpha]`` is the amplitude of moving the head
    by ``sigma`` while the internal index goes from ``alpha`` to
    ``alpha'``.  The tape content is ignored (single-symbol alphabet).
    Requires ``sum A A* = I``, ``sum A* A = I`` and ``A_s A_t* = 0`` for
    distinct offsets, all to ``tol``.
    """
    mats = {normalize_move(s, dimension): as_matrix(m) for s, m in blocks.items()}
    n = next(iter(mats.values())).shape[0]
    for m in mats.values():
        if m.shape != (n, n):
            raise ValueError("all blocks must be square and of equal size")
    eye = np.eye(n)
    residuals = {
        "sum_AAstar": operator_norm(sum(m @ m.conj().T for m in mats.values()) - eye),
        "sum_AstarA": operator_norm(sum(m.conj().T @ m for m in mats.values()) - eye),
    }
    cross = 0.0
    for s, t in itertools.permutations(mats, 2):
        cross = max(cross, operator_norm(mats[s] @ mats[t].conj().T))
    residuals["cross"] = cross
    bad = {k: v for k, v in residuals.items() if v > tol}
    if bad:
        detail = ", ".join(f"{k}={v:.3g}" for k, v in bad.items())
        raise UnitarityConditionError(f"shift machine violates the unitarity condition: {detail}", residuals)
    entries = []
    for sigma, m in mats.items():
        for a2, a1 in zip(*np.nonzero(m)):
            entries.append((sigma, int(a1), blank, int(a2), blank, m[a2, a1]))
    return TransitionAmplitudes(
        dimension, tuple(range(n)), (blank,), blank, tuple(entries), 0, None, info={"residuals": residuals}
    )


def shift_machine(A, B, tol=1e-12) -> TransitionAmplitudes:
    """1-D shift machine: ``A`` shifts the head left, ``B`` shifts it right.

    Checks ``AA* + BB* = I``, ``A*A + B*B = I`` and ``AB* = 0``.
    """
    return lattice_shift_machine({(-1,): A, (1,): B}, 1, tol)


def _window_ranges(window, d):
    window = tuple(window)
    if len(window) == 2 and all(isinstance(x, (int, np.integer)) for x in window):
        window = (window,) * d
    if len(window) != d:
        raise ValueError(f"window needs {d} axis ranges")
    return [(int(lo), int(hi)) for lo, hi in window]


def window_configurations(rule: TransitionAmplitudes, window):
    """All configurations with head and tape support inside the window box."""
    d = rule.dimension
    ranges = _window_ranges(window, d)
    cells = list(itertools.product(*[range(lo, hi + 1) for lo, hi in ranges]))
    n = len(cells) * len(rule.states) * len(rule.alphabet) ** len(cells)
    if n > 500_000:
        raise ValueError(f"window too large: {n} configurations")
    configs = []
    for contents in itertools.product(rule.alphabet, repeat=len(cells)):
        tape = canonical_tape(dict(zip(cells, contents)), rule.blank, d)
        for head in cells:
            for q in rule.states:
                configs.append(Configuration(head, q, tape))
    configs.sort(key=Configuration.sort_key)
    interior = [
        k for k, c in enumerate(configs)
        if all(lo < h < hi for h, (lo, hi) in zip(c.head, ranges))
    ]
    return configs, interior


def step_matrix(rule: TransitionAmplitudes, configs):
    """Sparse matrix of the step operator on a configuration list.

    Images that leave the list are dropped, so only columns whose images
    stay inside are exact.
    """
    index = {c: k for k, c in enumerate(configs)}
    rows, cols, vals = [], [], []
    for k, c in enumerate(configs):
        for target, amp in qtm_step(rule, QTMState.basis(c)).amplitudes.items():
            r = index.get(target)
            if r is not None:
                rows.append(r)
                cols.append(k)
                vals.append(amp)
    n = len(configs)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)


def _norm2(m):
    m = sp.csr_matrix(m)
    if m.shape[0] <= 2000:
        return operator_norm(m.toarray())
    # Holder bound ||A||_2 <= sqrt(||A||_1 ||A||_inf) for large blocks
    a = abs(m)
    return math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())


def check_local_unitarity(rule: TransitionAmplitudes, window) -> float:
    """Unitarity residual of the step operator on a finite window.

    Assembles the step matrix on every configuration with head and tape in
    the window, then returns ``max(||M*M - I||, ||MM* - I||)`` restricted
    to interior configurations (head at distance >= 1 from the boundary),
    whose images and preimages cannot leave the window.  The 2-norm is
    exact up to 2000 interior configurations and a Holder upper bound
    beyond.
    """
    configs, interior = window_configurations(rule, window)
    if not interior:
        raise ValueError("window has no interior configurations")
    m = step_matrix(rule, configs)
    eye = sp.identity(len(interior), dtype=complex, format="csr")
    cols = m[:, interior]
    rows = m[interior, :]
    iso = _norm2(cols.conj().T @ cols - eye)
    coiso = _norm2(rows @ rows.conj().T - eye)
    return max(iso, coiso)


def state_vector(psi: QTMState, configs):
    index = {c: k for k, c in enumerate(configs)}
    v = np.zeros(len(configs), dtype=complex)
    for c, amp in psi.amplitudes.items():
        v[index[c]] = amp
    return v


@dataclass(frozen=True)
class HaltingOutcome:
    halted: bool
    t: int
    distribution: dict
    leakage: float = 0.0
    state: QTMState | None = field(default=None, repr=False, compare=False)

    def word_distribution(self, blank):
        """Distribution over output words read from cell 0."""
        out = defaultdict(float)
        for tape, p in self.distribution.items():
            out[word(read_output(tape, blank))] += p
        return dict(out)


def halting_distribution(psi: QTMState, final, tol=HALT_TOL):
    """``(distribution, leakage)`` if ``psi`` lies in span{e(0, final, F)}.

    Leakage is the relative squared mass outside that span; the state
    counts as halted when it is below ``tol``.  The distribution is
    ``|c(F)|^2 / N``.
    """
    origin = (0,) * psi.dimension
    inside = defaultdict(complex)
    total = 0.0
    for c, amp in psi.sorted_items():
        w = abs(amp) ** 2
        total += w
        if c.head == origin and c.state == final:
            inside[c.tape] += amp
    if total == 0.0:
        return None, 1.0
    norm = sum(abs(a) ** 2 for a in inside.values())
    leakage = max(total - norm, 0.0) / total
    if leakage >= tol or norm == 0.0:
        return None, leakage
    dist = {tape: abs(a) ** 2 / norm for tape, a in inside.items() if a != 0}
    return dist, leakage


def initial_state(rule: TransitionAmplitudes, symbols=(), tape: Mapping | None = None) -> QTMState:
    d = rule.dimension
    tape = tape if tape is not None else input_tape(symbols, rule.blank, d)
    return QTMState.basis(Configuration.make((0,) * d, rule.initial, tape, rule.blank))


def run_qtm(rule: TransitionAmplitudes, start, t_max, tol=HALT_TOL) -> HaltingOutcome:
    """Iterate the step operator until the state first lies in the halting span.

    ``start`` may be a ``QTMState``, a ``Configuration`` or an input word.
    Budget exhaustion returns ``halted=False`` rather than raising.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if rule.final is None:
        raise ValueError("rule has no final state")
    if isinstance(start, QTMState):
        psi = start
    elif isinstance(start, Configuration):
        psi = QTMState.basis(start)
    else:
        psi = initial_state(rule, start)
    for t in range(t_max + 1):
        if t:
            psi = qtm_step(rule, psi)
        dist, leakage = halting_distribution(psi, rule.final, tol)
        if dist is not None:
            return HaltingOutcome(True, t, dist, leakage, psi)
    return HaltingOutcome(False, t_max, {}, leakage, psi)


# Example machines ---------------------------------------------------------

def one_step_writer():
    """Writes 1 over the blank at cell 0 and halts without moving."""
    return ClassicalTM(
        ("q0", "q1"), ("_", "1"),
        {("q0", "_"): ("q1", "1", "N"), ("q0", "1"): ("q1", "_", "N")},
        "q0", "q1",
    )


def right_scanner():
    """Moves right over 1s forever; halts on the first blank."""
    return ClassicalTM(
        ("q0", "q1"), ("_", "1"),
        {("q0", "1"): ("q0", "1", "R"), ("q0", "_"): ("q1", "_", "N")},
        "q0", "q1",
    )


def diverging_scanner():
    """Moves right over blanks and never halts."""
    return ClassicalTM(
        ("q0", "q1"), ("_", "1"),
        {("q0", "_"): ("q0", "_", "R"), ("q0", "1"): ("q0", "1", "R")},
        "q0", "q1",
    )


def unary_increment():
    """Reversible unary successor: 1^n -> 1^(n+1), halting at cell 0.

    Every state is entered from a single direction and ``(q, a) -> (q', a')``
    is injective, so the step map is a bijection on configurations once
    the final state is given the two missing transitions.  Halts after
    ``2n + 4`` steps.
    """
    delta = {
        ("q0", "1"): ("q0", "1", "R"),
        ("q0", "_"): ("qr", "1", "R"),
        ("qr", "_"): ("qb", "_", "L"),
        ("qr", "1"): ("q0", "_", "R"),
        ("qb", "1"): ("qb", "1", "L"),
        ("qb", "_"): ("q1", "_", "R"),
    }
    completion = {
        ("q1", "_"): ("qr", "_", "R"),
        ("q1", "1"): ("q1", "1", "R"),
    }
    return ClassicalTM(("q0", "qr", "qb", "q1"), ("_", "1"), delta, "q0", "q1", "_", 1, completion)
