"""Command-line front end.

    qcasm check PROGRAM [--param n=3 ...] [--registry FILE ...]
    qcasm lower PROGRAM [--format json|dot|text]
    qcasm run PROGRAM [--seed N] [--shots N] [--schedule greedy|K]
    qcasm enumerate PROGRAM [--min-prob P] [--schedule greedy|K]
    qcasm schedules PROGRAM [--verify] [--max N]
    qcasm canon PROGRAM [--format text|json]

PROGRAM is a file path or "-" for stdin.  --param NAME=INT binds a
program parameter and may repeat; --registry FILE loads measurement
families and states from JSON and may repeat.  Exit status: 0 on
success, 1 when the program is rejected or execution fails, 2 for
usage and file errors.  Outputs are deterministic: the same inputs and
seed produce identical bytes.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import ast, circuit, sim
from .errors import Diagnostic, ParseError, QcasmError
from .parser import parse
from .qmath import Registry, load_registry


def _build_argparser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="qcasm",
        description="Check, lower, schedule, and simulate measurement-based "
                    "quantum circuit programs.")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("program", help="program file, or - for stdin")
        p.add_argument("--param", action="append", default=[], metavar="NAME=INT",
                       help="bind a program parameter (repeatable)")
        p.add_argument("--registry", action="append", default=[], metavar="FILE",
                       help="load families/states from a JSON registry (repeatable)")
        p.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
        return p

    common(sub.add_parser("check", help="parse and check well-formedness"))

    p = common(sub.add_parser("lower", help="lower to a generalized circuit"))
    p.add_argument("--format", choices=("json", "dot", "text"), default="text")

    p = common(sub.add_parser("run", help="sample an execution"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=1,
                   help="with more than one shot, report outcome counts")
    p.add_argument("--schedule", default="greedy", metavar="greedy|K",
                   help="greedy layering, or index K into the schedule listing")
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = common(sub.add_parser("enumerate", help="enumerate all branches"))
    p.add_argument("--min-prob", type=float, default=0.0,
                   help="prune branches below this probability")
    p.add_argument("--schedule", default="greedy", metavar="greedy|K")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--no-states", action="store_true",
                   help="omit final state vectors from the output")

    p = common(sub.add_parser("schedules", help="list the schedules of the circuit"))
    p.add_argument("--max", type=int, default=1000, metavar="N",
                   help="refuse to list more than N schedules")
    p.add_argument("--verify", action="store_true",
                   help="also check that every schedule yields the same branches")
    p.add_argument("--format", choices=("json", "text"), default="text")

    p = common(sub.add_parser("canon", help="print the canonical decomposition tree"))
    p.add_argument("--format", choices=("json", "text"), default="text")
    return top


def _read_program(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _parse_params(pairs: list[str]) -> dict[str, int]:
    bindings: dict[str, int] = {}
    for pair in pairs:
        name, eq, value = pair.partition("=")
        if not eq or not name:
            raise _UsageError(f"--param wants NAME=INT, got {pair!r}")
        try:
            bindings[name] = int(value)
        except ValueError:
            raise _UsageError(f"--param {name}: {value!r} is not an integer") from None
    return bindings


def _load_registries(paths: list[str]) -> Registry:
    registry = Registry()
    for path in paths:
        if not os.path.exists(path):
            raise _UsageError(f"registry file not found: {path}")
        try:
            load_registry(path, into=registry)
        except json.JSONDecodeError as e:
            raise _UsageError(f"registry {path} is not valid JSON: {e}") from None
    return registry


class _UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _ground(args) -> tuple[ast.Program, Registry]:
    registry = _load_registries(args.registry)
    program = parse(_read_program(args.program))
    ground = ast.elaborate(program, _parse_params(args.param), registry)
    return ground, registry


def _pick_schedule(spec: str, circ, tree):
    if spec == "greedy":
        return circuit.greedy_schedule(circ, tree)
    try:
        index = int(spec)
    except ValueError:
        raise _UsageError(f"--schedule wants 'greedy' or an index, got {spec!r}") from None
    options = circuit.all_schedules(circ)
    if not 0 <= index < len(options):
        raise QcasmError(f"schedule index {index} out of range; "
                         f"the circuit has {len(options)} schedules")
    return options[index]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_check(args) -> int:
    registry = _load_registries(args.registry)
    program = parse(_read_program(args.program))
    ground, diags = ast.check_program(program, _parse_params(args.param), registry)
    for d in diags:
        print(d.render(), file=sys.stderr)
    if ground is None or any(d.severity == "error" for d in diags):
        return 1
    circ = circuit.lower(ground)
    _emit(f"ok: {len(circ.gates)} gates on {circ.width} wires", args.out)
    return 0


def _cmd_lower(args) -> int:
    ground, _ = _ground(args)
    circ, tree = circuit._lower(ground)
    if args.format == "json":
        _emit(sim.emit_json(circ.to_json()), args.out)
    elif args.format == "dot":
        _emit(circuit.to_dot(circ), args.out)
    else:
        lines = [f"width {circ.width}, {len(circ.gates)} gates"]
        for g in circ.gates:
            deps = sorted(circ.prereq[g.gid])
            dep_text = ", ".join(f"{a}.{b}" for a, b in deps) if deps else "-"
            lines.append(f"  {g.gid[0]}.{g.gid[1]}: {g.label}   after: {dep_text}")
        lines.append(f"decomposition: {circuit.tree_text(circuit.canonicalize(tree))}")
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_run(args) -> int:
    ground, registry = _ground(args)
    circ, tree = circuit._lower(ground)
    schedule = _pick_schedule(args.schedule, circ, tree)
    if args.shots < 1:
        raise _UsageError("--shots must be at least 1")
    if args.shots == 1:
        result = sim.run(ground, seed=args.seed, registry=registry, schedule=schedule)
        if args.format == "json":
            _emit(sim.emit_json(sim.run_result_json(result)), args.out)
        else:
            lines = [f"probability {result.probability!r}",
                     "store: " + (", ".join(f"{k}={v}" for k, v in sorted(result.store.items())) or "-")]
            for t in result.trace:
                wires = ", ".join(str(w) for w in t.wq)
                lines.append(f"  bout {t.step}: {t.mq}({wires}) -> {t.answer}")
            _emit("\n".join(lines), args.out)
        return 0
    counts = sim.sample_distribution(ground, args.shots, seed=args.seed,
                                     registry=registry, schedule=schedule)
    rows = [{"outcomes": sim._outcomes_json(key), "count": n}
            for key, n in sorted(counts.items())]
    doc = {"shots": args.shots, "seed": args.seed, "counts": rows}
    if args.format == "json":
        _emit(sim.emit_json(doc), args.out)
    else:
        lines = [f"{args.shots} shots from seed {args.seed}"]
        for key, n in sorted(counts.items()):
            text = " ".join(f"{a}.{b}={v}" for (a, b), v in key)
            lines.append(f"  {n:8d}  {text}")
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_enumerate(args) -> int:
    ground, registry = _ground(args)
    circ, tree = circuit._lower(ground)
    schedule = _pick_schedule(args.schedule, circ, tree)
    enum = sim.enumerate_branches(ground, registry=registry, schedule=schedule,
                                  min_prob=args.min_prob)
    if args.format == "json":
        _emit(sim.emit_json(sim.enumeration_json(enum, with_states=not args.no_states)),
              args.out)
    else:
        lines = [f"{len(enum.branches)} branches, pruned mass {enum.pruned_mass!r}"]
        for b in enum.branches:
            store = ", ".join(f"{k}={v}" for k, v in sorted(b.store.items())) or "-"
            outs = " ".join(f"{a}.{c}={v}" for (a, c), v in b.outcomes)
            lines.append(f"  p={b.probability:.12g}  {store}   [{outs}]")
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_schedules(args) -> int:
    ground, registry = _ground(args)
    circ, tree = circuit._lower(ground)
    options = circuit.all_schedules(circ, max_count=args.max)
    if args.verify:
        sim.check_schedule_independence(ground, registry=registry, schedules=options)
    if args.format == "json":
        doc = {"count": len(options), "verified": bool(args.verify),
               "schedules": [circuit.schedule_json(s) for s in options]}
        _emit(sim.emit_json(doc), args.out)
    else:
        lines = [f"{len(options)} schedules" + (" (verified equivalent)" if args.verify else "")]
        for i, s in enumerate(options):
            bouts = " ".join("[" + " ".join(f"{a}.{b}" for a, b in bout) + "]" for bout in s)
            lines.append(f"  {i}: {bouts}")
        _emit("\n".join(lines), args.out)
    return 0


def _cmd_canon(args) -> int:
    ground, _ = _ground(args)
    tree = circuit.canonicalize(circuit.decomposition(ground))
    if args.format == "json":
        def as_json(t):
            if t is None:
                return None
            if isinstance(t, circuit.DecompLeaf):
                return {"gate": list(t.gid)}
            return {t.kind: [as_json(c) for c in t.children]}
        _emit(sim.emit_json(as_json(tree)), args.out)
    else:
        _emit(circuit.tree_text(tree), args.out)
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "lower": _cmd_lower,
    "run": _cmd_run,
    "enumerate": _cmd_enumerate,
    "schedules": _cmd_schedules,
    "canon": _cmd_canon,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_argparser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as e:
        print(Diagnostic("error", e.message, line=e.line, column=e.column).render(),
              file=sys.stderr)
        return 1
    except QcasmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
