"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 step budget exhausted,
3 tuner found no decoherence-free point.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import circuits, linalg, spinboson, turing

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_UNREACHABLE = 0, 1, 2, 3


class ValidationError(Exception):
    pass


def _fmt(x):
    return format(float(x), ".17g")


def _dump(obj, out):
    out.write(json.dumps(obj, sort_keys=False) + "\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def max_workers():
    try:
        return max(1, int(os.environ.get("QTMLAB_THREADS", "1")))
    except ValueError:
        return 1


# Machine files -------------------------------------------------------------------

def _require(doc, key):
    if key not in doc:
        raise ValidationError(f"machine file: missing field '{key}'")
    return doc[key]


def machine_from_json(doc) -> turing.TransitionAmplitudes:
    """Parse a machine file into transition amplitudes.

    General machines list ``transitions`` as ``{q, a, q', a', sigma, re, im}``;
    shift machines give ``{"type": "shift", "A": ..., "B": ...}`` with
    matrices as arrays of ``[re, im]`` pairs.
    """
    if not isinstance(doc, dict):
        raise ValidationError("machine file: top level must be an object")
    if doc.get("type") == "shift":
        try:
            a = linalg.matrix_from_json(_require(doc, "A"))
            b = linalg.matrix_from_json(_require(doc, "B"))
            return turing.shift_machine(a, b)
        except turing.UnitarityConditionError as exc:
            raise ValidationError(f"machine file: {exc}") from None
        except ValueError as exc:
            raise ValidationError(f"machine file: field 'A'/'B': {exc}") from None
    d = int(doc.get("dimension", 1))
    states = _require(doc, "states")
    alphabet = _require(doc, "alphabet")
    entries = []
    for k, tr in enumerate(_require(doc, "transitions")):
        try:
            q2 = tr["q'"] if "q'" in tr else tr["q2"]
            a2 = tr["a'"] if "a'" in tr else tr["a2"]
            sigma = turing.normalize_move(tr["sigma"], d)
            amp = complex(float(tr.get("re", 1.0)), float(tr.get("im", 0.0)))
            entries.append((sigma, tr["q"], tr["a"], q2, a2, amp))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"machine file: transitions[{k}]: bad or missing field {exc}") from None
    try:
        return turing.TransitionAmplitudes(
            d, states, alphabet, _require(doc, "blank"), tuple(entries),
            _require(doc, "initial"), _require(doc, "final"),
        )
    except ValueError as exc:
        raise ValidationError(f"machine file: {exc}") from None


def machine_to_json(rule: turing.TransitionAmplitudes):
    out = {
        "states": list(rule.states),
        "initial": rule.initial,
        "final": rule.final,
        "alphabet": list(rule.alphabet),
        "blank": rule.blank,
        "dimension": rule.dimension,
        "transitions": [],
    }
    for q, a, sigma, q2, a2, amp in rule.transitions():
        out["transitions"].append({
            "q": q, "a": a, "q'": q2, "a'": a2,
            "sigma": sigma[0] if rule.dimension == 1 else list(sigma),
            "re": amp.real, "im": amp.imag,
        })
    return out


# Subcommands ---------------------------------------------------------------------

def cmd_qtm_run(args, out):
    rule = machine_from_json(_load_json(args.machine))
    if rule.final is None or rule.initial is None:
        raise ValidationError("machine file: field 'final' is required to run")
    symbols = list(args.input) if args.input else []
    for s in symbols:
        if s not in rule.alphabet:
            raise ValidationError(f"input symbol {s!r} is not in the alphabet")
    outcome = turing.run_qtm(rule, symbols, args.t_max, tol=args.tol)
    dist = outcome.word_distribution(rule.blank) if outcome.halted else {}
    _dump({"halted": outcome.halted, "t": outcome.t,
           "distribution": {k: round(v, 12) for k, v in sorted(dist.items())}}, out)
    return EXIT_OK if outcome.halted else EXIT_BUDGET


def cmd_circuit_run(args, out):
    try:
        circ = circuits.circuit_from_json(_load_json(args.circuit))
    except circuits.CircuitError as exc:
        raise ValidationError(f"circuit file: {exc}") from None
    init = args.initial if args.initial is not None else "0" * circ.l
    if len(init) != circ.l or set(init) - {"0", "1"}:
        raise ValidationError(f"initial state must be {circ.l} bits, got {init!r}")
    psi = circuits.apply_circuit(circ, circuits.RegisterState.basis(init))
    dist = circuits.measure_distribution(psi, cutoff=1e-15)
    dist = circuits.distribution_by_bits(dist, circ.l)
    _dump({k: round(v, 12) for k, v in dist.items()}, out)
    return EXIT_OK


def _model(args):
    try:
        model = spinboson.model_from_json(_load_json(args.model))
    except ValueError as exc:
        raise ValidationError(f"model file: {exc}") from None
    return model


def cmd_decohere_coefficients(args, out):
    model = _model(args)
    betas = args.beta if args.beta else [model.beta]

    def one(beta):
        m = model.with_beta(beta)
        c = spinboson.coefficients(m)
        row = {"beta": spinboson.ZERO_T if beta is None else beta, "nu": c.nu, "gamma": c.gamma, "sigma": c.sigma}
        if c.phi is not None:
            row["phi"] = c.phi
        return row

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        rows = list(pool.map(one, betas))
    _dump(rows[0] if len(rows) == 1 and not args.beta else rows, out)
    return EXIT_OK


def cmd_decohere_curve(args, out):
    model = _model(args)
    c = spinboson.coefficients(model)
    times = spinboson.default_times(model, args.points, args.span)
    psi0 = spinboson.spin_state(args.psi0)
    closed = spinboson.closed_form_trace(model, c, psi0, times)
    oracle = spinboson.master_equation_evolve(model, c, np.outer(psi0, psi0.conj()), times)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "re_P", "im_P", "offdiag_abs", "gamma", "sigma"])
    for t, p, od in zip(times, closed.p_expect, oracle.offdiag_abs):
        w.writerow([_fmt(t), _fmt(p.real), _fmt(p.imag), _fmt(od), _fmt(c.gamma), _fmt(c.sigma)])
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return EXIT_OK


def cmd_decohere_tune(args, out):
    model = _model(args)
    delta = tuple(args.delta_box) if args.delta_box else model.delta
    res = spinboson.tune_parameters(model.spectral, delta, tuple(args.epsilon_box))
    _dump(res.to_dict(), out)
    if not res.decoherence_free:
        print(f"qtmlab: {res.message} (gamma={res.gamma:.6g})", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


def cmd_decompose(args, out):
    if args.random is not None:
        u = linalg.random_unitary(args.random, np.random.default_rng(args.seed))
    else:
        if args.matrix is None:
            raise ValidationError("give a matrix file or --random D")
        doc = _load_json(args.matrix)
        rows = doc.get("matrix") if isinstance(doc, dict) else doc
        try:
            u = linalg.matrix_from_json(rows)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"matrix file: {exc}") from None
    if u.shape[0] != u.shape[1]:
        raise ValidationError(f"matrix must be square, got {u.shape}")
    try:
        if args.epsilon is None:
            res = linalg.decompose_simple_form(u)
        else:
            res = linalg.approx_unitary(u, args.epsilon, args.theta0, n_max=args.n_max)
    except linalg.NotUnitaryError as exc:
        raise ValidationError(f"{exc} (residual {exc.residual:.3e})") from None
    except linalg.SearchBudgetExceeded as exc:
        print(f"qtmlab: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _dump({"dim": res.dim, "factor_count": res.factor_count, "residual": res.residual,
           "theta0": args.theta0 if args.epsilon is not None else None,
           "factors": [f.to_dict() for f in res.factors]}, out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qtmlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    qtm = sub.add_parser("qtm", help="quantum Turing machines").add_subparsers(dest="action", required=True)
    run = qtm.add_parser("run", help="run a machine file until it halts")
    run.add_argument("machine")
    run.add_argument("--input", default="", help="input word, one character per cell (default: empty)")
    run.add_argument("--t-max", type=int, default=1000, help="step budget (default: 1000)")
    run.add_argument("--tol", type=float, default=turing.HALT_TOL, help="halting leakage tolerance (default: 1e-9)")
    run.set_defaults(func=cmd_qtm_run)

    circ = sub.add_parser("circuit", help="quantum circuits").add_subparsers(dest="action", required=True)
    crun = circ.add_parser("run", help="apply a circuit file to a basis state")
    crun.add_argument("circuit")
    crun.add_argument("--initial", help="initial bit string, site 1 first (default: all zeros)")
    crun.set_defaults(func=cmd_circuit_run)

    dec = sub.add_parser("decohere", help="spin-boson decoherence").add_subparsers(dest="action", required=True)
    co = dec.add_parser("coefficients", help="print nu, gamma, sigma and phi")
    co.add_argument("model")
    co.add_argument("--beta", type=float, action="append",
                    help="inverse temperature; repeat for a sweep (default: from model file)")
    co.set_defaults(func=cmd_decohere_coefficients)
    cu = dec.add_parser("curve", help="write the coherence trace as CSV")
    cu.add_argument("model")
    cu.add_argument("--points", type=int, default=2000, help="grid points (default: 2000)")
    cu.add_argument("--span", type=float, default=50.0, help="time span in units of 1/(nu Delta) (default: 50)")
    cu.add_argument("--psi0", choices=["up", "down", "plus", "minus"], default="up",
                    help="initial spin state (default: up)")
    cu.add_argument("-o", "--output", help="CSV path (default: stdout)")
    cu.set_defaults(func=cmd_decohere_curve)
    tu = dec.add_parser("tune", help="search for J(nu Delta) = 0")
    tu.add_argument("model")
    tu.add_argument("--epsilon-box", type=float, nargs=2, default=[0.0, 10.0], metavar=("LO", "HI"),
                    help="epsilon search range (default: 0 10)")
    tu.add_argument("--delta-box", type=float, nargs=2, metavar=("LO", "HI"),
                    help="free Delta range (default: Delta fixed from the model file)")
    tu.set_defaults(func=cmd_decohere_tune)

    de = sub.add_parser("decompose", help="simple-form decomposition of a unitary")
    de.add_argument("matrix", nargs="?", help="JSON matrix of [re, im] pairs")
    de.add_argument("--random", type=int, metavar="D", help="decompose a seeded random D x D unitary instead")
    de.add_argument("--seed", type=int, default=0, help="seed for --random (default: 0)")
    de.add_argument("--epsilon", type=float, help="rational-angle mode with this total error (default: exact)")
    de.add_argument("--theta0", type=float, default=linalg.UNIVERSAL_THETA,
                    help="base angle for rational-angle mode (default: acos(3/5))")
    de.add_argument("--n-max", type=int, default=linalg.DEFAULT_N_MAX, help="multiplier search budget")
    de.set_defaults(func=cmd_decompose)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except ValidationError as exc:
        print(f"qtmlab: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
