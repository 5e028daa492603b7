"""Program syntax trees, well-formedness checking, and elaboration.

A program is an optional parameter/input prelude plus one rule.  Rules come
in six shapes: gate rules (a guarded assignment of a measurement outcome to
a channel variable), classical assignments, classical conditionals,
parallel and sequential compositions, and skip.  Surface programs may also
contain for-loops, binder-style parallel composition ("forall"), and sugar
(bare gates, "output", guards without else, phase prefixes); ``elaborate``
removes all of these and produces a ground program in which every wire is
a concrete integer and every measurement expression is a resolved family.

``well_formed`` checks ground rules against the language's static rules and
returns diagnostics tagged with the violated clause.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Mapping, Union

from . import qmath
from .errors import Diagnostic, ElaborationError, QmathError, SimulationError
from .qmath import MeasurementFamily, Registry

# Machine-readable tags for the static well-formedness rules.
CLAUSE_GATE_WIRES_DISTINCT = "gate-wires-distinct"
CLAUSE_PARALLEL_DISJOINT_WIRES = "parallel-disjoint-wires"
CLAUSE_PARALLEL_SIBLING_OUTPUT = "parallel-sibling-output"
CLAUSE_UNBOUND_CHANNEL_VARIABLE = "unbound-channel-variable"
CLAUSE_DUPLICATE_OUTPUT_VARIABLE = "duplicate-output-variable"
CLAUSE_MEASUREMENT_OUTSIDE_GATE_RULE = "measurement-outside-gate-rule"
CLAUSE_ASSIGN_TARGET_NOT_CHANNEL = "assign-target-not-channel"


# ---------------------------------------------------------------------------
# classical expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * mod div xor ^ = < and or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str  # - not
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]


Expr = Union[IntLit, Name, BinOp, UnOp, Call]


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _apply_binop(op: str, a, b, err=SimulationError):
    if op in ("+", "-", "*", "mod", "div", "xor", "^", "<"):
        if not (_is_int(a) and _is_int(b)):
            raise err(f"operator {op!r} needs integer operands, got {a!r} and {b!r}")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "mod":
        if b == 0:
            raise err("mod by zero")
        return a % b
    if op == "div":
        if b == 0:
            raise err("div by zero")
        return a // b
    if op == "xor":
        if a not in (0, 1) or b not in (0, 1):
            raise err(f"xor needs operands in {{0, 1}}, got {a} and {b}")
        return a ^ b
    if op == "^":
        if b < 0:
            raise err(f"power needs a non-negative exponent, got {b}")
        return a**b
    if op == "<":
        return a < b
    if op == "=":
        if isinstance(a, bool) != isinstance(b, bool):
            raise err(f"cannot compare {a!r} with {b!r}")
        return a == b
    if op in ("and", "or"):
        if not (isinstance(a, bool) and isinstance(b, bool)):
            raise err(f"operator {op!r} needs boolean operands, got {a!r} and {b!r}")
        return (a and b) if op == "and" else (a or b)
    raise err(f"unknown operator {op!r}")


def _apply_unop(op: str, a, err=SimulationError):
    if op == "-":
        if not _is_int(a):
            raise err(f"unary - needs an integer operand, got {a!r}")
        return -a
    if op == "not":
        if not isinstance(a, bool):
            raise err(f"not needs a boolean operand, got {a!r}")
        return not a
    raise err(f"unknown operator {op!r}")


def _grover_rounds(n_val: int) -> int:
    # floor(pi/4 * sqrt(N)); N must be a power of two.
    if not _is_int(n_val) or n_val < 1 or n_val & (n_val - 1):
        raise ElaborationError(f"grover_rounds needs a power-of-two argument, got {n_val!r}")
    return int(math.floor(math.pi / 4.0 * math.sqrt(n_val)))


STATIC_FUNCTIONS = {"grover_rounds": _grover_rounds}


def expr_names(e: Expr) -> frozenset[str]:
    """All variable names referenced anywhere in an expression."""
    if isinstance(e, Name):
        return frozenset((e.ident,))
    if isinstance(e, BinOp):
        return expr_names(e.left) | expr_names(e.right)
    if isinstance(e, UnOp):
        return expr_names(e.operand)
    if isinstance(e, Call):
        out: frozenset[str] = frozenset()
        for a in e.args:
            out |= expr_names(a)
        return out
    return frozenset()


def expr_calls(e: Expr) -> frozenset[str]:
    if isinstance(e, BinOp):
        return expr_calls(e.left) | expr_calls(e.right)
    if isinstance(e, UnOp):
        return expr_calls(e.operand)
    if isinstance(e, Call):
        out = frozenset((e.fn,))
        for a in e.args:
            out |= expr_calls(a)
        return out
    return frozenset()


def substitute(e: Expr, env: Mapping[str, int]) -> Expr:
    """Replace bound names by integer literals; everything else is kept."""
    if isinstance(e, Name):
        if e.ident in env:
            return IntLit(int(env[e.ident]))
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, env), substitute(e.right, env))
    if isinstance(e, UnOp):
        return UnOp(e.op, substitute(e.operand, env))
    if isinstance(e, Call):
        return Call(e.fn, tuple(substitute(a, env) for a in e.args))
    return e


def eval_static(e: Expr, env: Mapping[str, int], registry: Registry | None = None):
    """Evaluate a compile-time expression over parameter/loop bindings.

    Names outside ``env`` and calls that are not static functions fail; a
    call to a known gate or measurement name is tagged as a measurement
    used outside a gate rule.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Name):
        if e.ident in env:
            return int(env[e.ident])
        raise ElaborationError(f"{e.ident!r} is not a compile-time constant here")
    if isinstance(e, BinOp):
        return _apply_binop(
            e.op,
            eval_static(e.left, env, registry),
            eval_static(e.right, env, registry),
            err=ElaborationError,
        )
    if isinstance(e, UnOp):
        return _apply_unop(e.op, eval_static(e.operand, env, registry), err=ElaborationError)
    if isinstance(e, Call):
        if e.fn in STATIC_FUNCTIONS:
            args = [eval_static(a, env, registry) for a in e.args]
            return STATIC_FUNCTIONS[e.fn](*args)
        if (registry or Registry()).knows_gate(e.fn):
            raise ElaborationError(
                f"measurement expression {e.fn!r} may occur only within a gate rule",
                clause=CLAUSE_MEASUREMENT_OUTSIDE_GATE_RULE,
            )
        raise ElaborationError(f"unknown function {e.fn!r} in compile-time expression")
    raise ElaborationError(f"cannot evaluate {e!r}")


def eval_runtime(e: Expr, store: Mapping[str, int]):
    """Evaluate an expression against the classical store at run time."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Name):
        if e.ident in store:
            return store[e.ident]
        raise SimulationError(f"variable {e.ident!r} has no value")
    if isinstance(e, BinOp):
        return _apply_binop(e.op, eval_runtime(e.left, store), eval_runtime(e.right, store))
    if isinstance(e, UnOp):
        return _apply_unop(e.op, eval_runtime(e.operand, store))
    if isinstance(e, Call):
        if e.fn in STATIC_FUNCTIONS:
            return STATIC_FUNCTIONS[e.fn](*[eval_runtime(a, store) for a in e.args])
        key = dynamic_key(e.fn, tuple(eval_runtime(a, store) for a in e.args))
        if key in store:
            return store[key]
        raise SimulationError(f"dynamic function value {key!r} has no value")
    raise SimulationError(f"cannot evaluate {e!r}")


def dynamic_key(name: str, args: tuple = ()) -> str:
    """Classical-store key for a dynamic function location."""
    if not args:
        return name
    return f"{name}({','.join(str(a) for a in args)})"


# ---------------------------------------------------------------------------
# measurement expressions and rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementExpr:
    """Unresolved gate/measurement reference: name, compile-time parameters,
    optional power-of-two exponent (name_pow(e) applies the base 2**e
    times), optional (-1)**phase prefix."""

    name: str
    params: tuple[Expr, ...] = ()
    power: Expr | None = None
    phase: Expr | None = None


@dataclass(frozen=True)
class WireRange:
    """Inclusive wire range lo..hi inside a wire list."""

    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class GateRule:
    """Guarded assignment of a measurement outcome to a channel variable.

    Guard i selects branch i (first true wins); the final branch is the
    default.  Surface rules may omit the default branch and leave ``out``
    unset; ground rules always satisfy len(branches) == len(guards) + 1,
    integer wires, resolved families, and a named output variable.
    """

    guards: tuple[Expr, ...]
    branches: tuple  # MeasurementExpr (surface) or MeasurementFamily (ground)
    wires: tuple  # Expr / WireRange (surface) or int (ground)
    out: str | None
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ClassicalAssign:
    """target(args) := value, all classical; the target is a dynamic
    function location, never a channel variable."""

    target: str
    target_args: tuple[Expr, ...]
    value: Expr
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ClassicalCond:
    """Guarded choice among classical rules; branch len(guards) is else."""

    guards: tuple[Expr, ...]
    branches: tuple["Rule", ...]
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Range:
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class SetDomain:
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Binder:
    var: str
    domain: Range | SetDomain


@dataclass(frozen=True)
class Parallel:
    bodies: tuple["Rule", ...]
    binder: Binder | None = None
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Sequential:
    parts: tuple["Rule", ...]
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Skip:
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ForLoop:
    """Surface-only counted loop; elaboration unrolls it sequentially."""

    var: str
    start: Expr
    stop: Expr
    body: "Rule"
    pos: tuple[int, int] | None = field(default=None, compare=False)


Rule = Union[GateRule, ClassicalAssign, ClassicalCond, Parallel, Sequential, Skip, ForLoop]


@dataclass(frozen=True)
class KetState:
    bits: str


@dataclass(frozen=True)
class NamedStateRef:
    name: str
    args: tuple = ()


StateDesc = Union[KetState, NamedStateRef]


@dataclass(frozen=True)
class InputConjunct:
    state: StateDesc
    wires: tuple  # Expr / WireRange (surface) or int (ground)
    binder: Binder | None = None
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class InputDecl:
    conjuncts: tuple[InputConjunct, ...]


@dataclass(frozen=True)
class ParamDecl:
    name: str
    default: int | None = None


@dataclass(frozen=True)
class Program:
    params: tuple[ParamDecl, ...]
    input_decl: InputDecl | None
    body: Rule


# ---------------------------------------------------------------------------
# attributes of ground rules
# ---------------------------------------------------------------------------

def wire_set(r: Rule) -> frozenset[int]:
    """Wires a ground rule acts on; classical rules act on none."""
    if isinstance(r, GateRule):
        return frozenset(int(w) for w in r.wires)
    if isinstance(r, (ClassicalAssign, ClassicalCond, Skip)):
        return frozenset()
    if isinstance(r, Parallel):
        out: frozenset[int] = frozenset()
        for b in r.bodies:
            out |= wire_set(b)
        return out
    if isinstance(r, Sequential):
        out = frozenset()
        for p in r.parts:
            out |= wire_set(p)
        return out
    raise ElaborationError(f"wire_set needs a ground rule, got {type(r).__name__}")


def output_vars(r: Rule) -> frozenset[str]:
    """Channel variables a ground rule assigns; classical rules assign none."""
    if isinstance(r, GateRule):
        return frozenset((r.out,)) if r.out else frozenset()
    if isinstance(r, (ClassicalAssign, ClassicalCond, Skip)):
        return frozenset()
    if isinstance(r, Parallel):
        out: frozenset[str] = frozenset()
        for b in r.bodies:
            out |= output_vars(b)
        return out
    if isinstance(r, Sequential):
        out = frozenset()
        for p in r.parts:
            out |= output_vars(p)
        return out
    raise ElaborationError(f"output_vars needs a ground rule, got {type(r).__name__}")


def subrules(r: Rule) -> tuple[Rule, ...]:
    """The rule itself plus, for compositions and conditionals, all
    constituents' subrules."""
    if isinstance(r, (GateRule, ClassicalAssign, Skip)):
        return (r,)
    if isinstance(r, ClassicalCond):
        out: list[Rule] = [r]
        for b in r.branches:
            out.extend(subrules(b))
        return tuple(out)
    if isinstance(r, Parallel):
        out = [r]
        for b in r.bodies:
            out.extend(subrules(b))
        return tuple(out)
    if isinstance(r, Sequential):
        out = [r]
        for p in r.parts:
            out.extend(subrules(p))
        return tuple(out)
    raise ElaborationError(f"subrules needs a ground rule, got {type(r).__name__}")


def is_classical(r: Rule) -> bool:
    """True when the rule contains no gate rule at all."""
    if isinstance(r, GateRule):
        return False
    if isinstance(r, (ClassicalAssign, Skip)):
        return True
    if isinstance(r, ClassicalCond):
        return all(is_classical(b) for b in r.branches)
    if isinstance(r, Parallel):
        return all(is_classical(b) for b in r.bodies)
    if isinstance(r, Sequential):
        return all(is_classical(p) for p in r.parts)
    return False


def is_ground(r: Rule) -> bool:
    if isinstance(r, GateRule):
        return (
            len(r.branches) == len(r.guards) + 1
            and all(isinstance(b, MeasurementFamily) for b in r.branches)
            and all(isinstance(w, int) for w in r.wires)
        )
    if isinstance(r, (ClassicalAssign, Skip)):
        return True
    if isinstance(r, ClassicalCond):
        return len(r.branches) == len(r.guards) + 1 and all(is_ground(b) for b in r.branches)
    if isinstance(r, Parallel):
        return r.binder is None and all(is_ground(b) for b in r.bodies)
    if isinstance(r, Sequential):
        return all(is_ground(p) for p in r.parts)
    return isinstance(r, Skip)


def _occurring_names(r: Rule) -> frozenset[str]:
    """Every variable occurrence in a ground rule: expression reads, gate
    output variables, and classical assignment targets."""
    if isinstance(r, GateRule):
        out: frozenset[str] = frozenset((r.out,)) if r.out else frozenset()
        for g in r.guards:
            out |= expr_names(g)
        return out
    if isinstance(r, ClassicalAssign):
        out = frozenset((r.target,)) | expr_names(r.value)
        for a in r.target_args:
            out |= expr_names(a)
        return out
    if isinstance(r, ClassicalCond):
        out = frozenset()
        for g in r.guards:
            out |= expr_names(g)
        for b in r.branches:
            out |= _occurring_names(b)
        return out
    if isinstance(r, Parallel):
        out = frozenset()
        for b in r.bodies:
            out |= _occurring_names(b)
        return out
    if isinstance(r, Sequential):
        out = frozenset()
        for p in r.parts:
            out |= _occurring_names(p)
        return out
    return frozenset()


def _gate_rules(r: Rule, path: str):
    if isinstance(r, GateRule):
        yield path, r
    elif isinstance(r, ClassicalCond):
        for i, b in enumerate(r.branches):
            yield from _gate_rules(b, f"{path}.branches[{i}]")
    elif isinstance(r, Parallel):
        for i, b in enumerate(r.bodies):
            yield from _gate_rules(b, f"{path}.bodies[{i}]")
    elif isinstance(r, Sequential):
        for i, p in enumerate(r.parts):
            yield from _gate_rules(p, f"{path}.parts[{i}]")


# ---------------------------------------------------------------------------
# well-formedness
# ---------------------------------------------------------------------------

def well_formed(rule: Rule, external: frozenset[str] = frozenset()) -> list[Diagnostic]:
    """Check a ground rule against the static rules; [] means well formed.

    ``external`` is the set of channel variables assumed to be assigned
    before the rule runs.
    """
    diags: list[Diagnostic] = []

    def report(msg, clause, path, pos=None):
        line, col = pos if pos else (None, None)
        diags.append(Diagnostic("error", msg, line=line, column=col, clause=clause, path=path))

    all_gates = list(_gate_rules(rule, "body"))
    out_names: dict[str, str] = {}
    for path, g in all_gates:
        if g.out is None:
            continue
        if g.out in out_names:
            report(
                f"output variable {g.out!r} is assigned by more than one gate rule",
                CLAUSE_DUPLICATE_OUTPUT_VARIABLE, path, g.pos,
            )
        elif g.out in external:
            report(
                f"output variable {g.out!r} is already assigned outside the rule",
                CLAUSE_DUPLICATE_OUTPUT_VARIABLE, path, g.pos,
            )
        out_names.setdefault(g.out, path)

    def check(r: Rule, channels: frozenset[str], dynamics: frozenset[str], path: str):
        """Returns (channel vars, dynamic names) newly defined by r."""
        if isinstance(r, GateRule):
            ws = tuple(int(w) for w in r.wires)
            if len(set(ws)) != len(ws):
                report(f"gate wires must be pairwise distinct, got {ws}",
                       CLAUSE_GATE_WIRES_DISTINCT, path, r.pos)
            for g in r.guards:
                for n in sorted(expr_names(g)):
                    if n not in channels:
                        kind = "a non-channel variable" if n in dynamics else "an unassigned variable"
                        report(f"guard references {kind} {n!r}; guards may only use channel "
                               f"variables assigned earlier",
                               CLAUSE_UNBOUND_CHANNEL_VARIABLE, path, r.pos)
                for fn in sorted(expr_calls(g)):
                    if fn not in STATIC_FUNCTIONS:
                        report(f"guard applies {fn!r}; guards may only use channel variables",
                               CLAUSE_UNBOUND_CHANNEL_VARIABLE, path, r.pos)
            return (frozenset((r.out,)) if r.out else frozenset()), frozenset()
        if isinstance(r, ClassicalAssign):
            if r.target in out_names or r.target in external:
                report(f"classical assignment target {r.target!r} is a channel variable",
                       CLAUSE_ASSIGN_TARGET_NOT_CHANNEL, path, r.pos)
            for e in (r.value, *r.target_args):
                for n in sorted(expr_names(e)):
                    if n not in channels and n not in dynamics:
                        report(f"expression references {n!r}, which has no value here",
                               CLAUSE_UNBOUND_CHANNEL_VARIABLE, path, r.pos)
            return frozenset(), frozenset((r.target,))
        if isinstance(r, ClassicalCond):
            for g in r.guards:
                for n in sorted(expr_names(g)):
                    if n not in channels and n not in dynamics:
                        report(f"guard references {n!r}, which has no value here",
                               CLAUSE_UNBOUND_CHANNEL_VARIABLE, path, r.pos)
            new_dyn: frozenset[str] = frozenset()
            for i, b in enumerate(r.branches):
                if not is_classical(b):
                    report("classical conditional branch contains a measurement or gate rule",
                           CLAUSE_MEASUREMENT_OUTSIDE_GATE_RULE, f"{path}.branches[{i}]", r.pos)
                _, dyn = check(b, channels, dynamics, f"{path}.branches[{i}]")
                new_dyn |= dyn
            return frozenset(), new_dyn
        if isinstance(r, Parallel):
            infos = []
            for i, b in enumerate(r.bodies):
                ch, dyn = check(b, channels, dynamics, f"{path}.bodies[{i}]")
                infos.append((i, b, ch, dyn))
            for i, b, _, _ in infos:
                for j, b2, _, _ in infos:
                    if i < j and wire_set(b) & wire_set(b2):
                        clash = sorted(wire_set(b) & wire_set(b2))
                        report(f"parallel components must have pairwise disjoint wire sets; "
                               f"wires {clash} are shared between components {i} and {j}",
                               CLAUSE_PARALLEL_DISJOINT_WIRES, path, r.pos)
            for i, b, _, _ in infos:
                outs = output_vars(b)
                for j, b2, _, _ in infos:
                    if i != j:
                        used = outs & _occurring_names(b2)
                        for n in sorted(used):
                            report(f"output variable {n!r} of one parallel component occurs "
                                   f"in a sibling component",
                                   CLAUSE_PARALLEL_SIBLING_OUTPUT, path, r.pos)
            new_ch = frozenset().union(*(ch for _, _, ch, _ in infos)) if infos else frozenset()
            new_dyn = frozenset().union(*(dyn for _, _, _, dyn in infos)) if infos else frozenset()
            return new_ch, new_dyn
        if isinstance(r, Sequential):
            acc_ch: frozenset[str] = frozenset()
            acc_dyn: frozenset[str] = frozenset()
            for i, p in enumerate(r.parts):
                ch, dyn = check(p, channels | acc_ch, dynamics | acc_dyn, f"{path}.parts[{i}]")
                acc_ch |= ch
                acc_dyn |= dyn
            return acc_ch, acc_dyn
        if isinstance(r, Skip):
            return frozenset(), frozenset()
        report(f"rule is not ground: {type(r).__name__}", None, path, getattr(r, "pos", None))
        return frozenset(), frozenset()

    check(rule, external, frozenset(), "body")
    return diags


# ---------------------------------------------------------------------------
# elaboration
# ---------------------------------------------------------------------------

def _merge_bindings(params: tuple[ParamDecl, ...], bindings: Mapping[str, int] | None) -> dict[str, int]:
    bound = dict(bindings or {})
    env: dict[str, int] = {}
    for decl in params:
        if decl.name in bound:
            env[decl.name] = int(bound.pop(decl.name))
        elif decl.default is not None:
            env[decl.name] = int(decl.default)
        else:
            raise ElaborationError(f"parameter {decl.name!r} is not bound and has no default")
    if bound:
        raise ElaborationError(f"unknown parameter(s) bound: {sorted(bound)}")
    return env


class _Elaborator:
    def __init__(self, registry: Registry | None):
        self.registry = registry if registry is not None else Registry()

    def eval(self, e: Expr, env) -> int:
        v = eval_static(e, env, self.registry)
        if not _is_int(v):
            raise ElaborationError(f"expected an integer, got {v!r}")
        return v

    def wires(self, items, env) -> tuple[int, ...]:
        out: list[int] = []
        for item in items:
            if isinstance(item, WireRange):
                lo = self.eval(item.lo, env)
                hi = self.eval(item.hi, env)
                out.extend(range(lo, hi + 1))
            elif isinstance(item, int):
                out.append(item)
            else:
                out.append(self.eval(item, env))
        for w in out:
            if w < 1:
                raise ElaborationError(f"wire indices must be >= 1, got {w}")
            if w > qmath.MAX_WIDTH:
                raise ElaborationError(f"wire {w} exceeds the maximum width {qmath.MAX_WIDTH}")
        return tuple(out)

    def runtime_expr(self, e: Expr, env) -> Expr:
        """Substitute compile-time names and vet calls in a run-time expression."""
        e = substitute(e, env)
        for fn in sorted(expr_calls(e)):
            if fn in STATIC_FUNCTIONS:
                continue
            if self.registry.knows_gate(fn):
                raise ElaborationError(
                    f"measurement expression {fn!r} may occur only within a gate rule",
                    clause=CLAUSE_MEASUREMENT_OUTSIDE_GATE_RULE,
                )
        return e

    def family(self, mexpr: MeasurementExpr, env, arity: int) -> MeasurementFamily:
        params = tuple(self.eval(p, env) for p in mexpr.params)
        fam = self.registry.family(mexpr.name, params)
        if mexpr.power is not None:
            e = self.eval(mexpr.power, env)
            if e < 0:
                raise ElaborationError(f"{mexpr.name}: power exponent must be >= 0, got {e}")
            fam = qmath.family_power(fam, 2**e)
        if fam.arity != arity:
            raise ElaborationError(
                f"{fam.name} acts on {fam.arity} wire(s) but is applied to {arity}"
            )
        return fam

    def gate(self, r: GateRule, env) -> GateRule:
        wires = self.wires(r.wires, env)
        arity = len(wires)
        if len(r.branches) not in (len(r.guards), len(r.guards) + 1):
            raise ElaborationError("conditional gate has mismatched guards and branches")
        entries: list[tuple[Expr | None, MeasurementFamily]] = []
        branch_guards = list(r.guards) + [None] * (len(r.branches) - len(r.guards))
        for guard, branch in zip(branch_guards, r.branches):
            guard_expr = self.runtime_expr(guard, env) if guard is not None else None
            if isinstance(branch, MeasurementFamily):
                entries.append((guard_expr, branch))
                continue
            base = self.family(branch, env, arity)
            if branch.phase is not None:
                phase = self.runtime_expr(branch.phase, env)
                even = BinOp("=", BinOp("mod", phase, IntLit(2)), IntLit(0))
                even_guard = even if guard_expr is None else BinOp("and", guard_expr, even)
                entries.append((even_guard, base))
                entries.append((guard_expr, qmath.scaled_family(base, -1.0, name=f"-{base.name}")))
            else:
                entries.append((guard_expr, base))
        if entries[-1][0] is not None:
            entries.append((None, qmath.identity_family(arity)))
        guards = tuple(g for g, _ in entries[:-1])
        if any(g is None for g in guards):
            raise ElaborationError("conditional gate has a non-final default branch")
        return GateRule(guards, tuple(f for _, f in entries), wires, r.out, pos=r.pos)

    def rule(self, r: Rule, env) -> Rule:
        if isinstance(r, GateRule):
            return self.gate(r, env)
        if isinstance(r, ClassicalAssign):
            return ClassicalAssign(
                r.target,
                tuple(self.runtime_expr(a, env) for a in r.target_args),
                self.runtime_expr(r.value, env),
                pos=r.pos,
            )
        if isinstance(r, ClassicalCond):
            guards = tuple(self.runtime_expr(g, env) for g in r.guards)
            branches = [self.rule(b, env) for b in r.branches]
            if len(branches) == len(guards):
                branches.append(Skip())
            if len(branches) != len(guards) + 1:
                raise ElaborationError("conditional has mismatched guards and branches")
            return ClassicalCond(guards, tuple(branches), pos=r.pos)
        if isinstance(r, Parallel):
            if r.binder is not None:
                bodies = []
                for v in self.domain_values(r.binder.domain, env):
                    bodies.append(self.rule(r.bodies[0], {**env, r.binder.var: v}))
                return self.compose(Parallel, "bodies", bodies, r.pos)
            return self.compose(Parallel, "bodies", [self.rule(b, env) for b in r.bodies], r.pos)
        if isinstance(r, Sequential):
            return self.compose(Sequential, "parts", [self.rule(p, env) for p in r.parts], r.pos)
        if isinstance(r, ForLoop):
            lo = self.eval(r.start, env)
            hi = self.eval(r.stop, env)
            parts = [self.rule(r.body, {**env, r.var: i}) for i in range(lo, hi + 1)]
            return self.compose(Sequential, "parts", parts, r.pos)
        if isinstance(r, Skip):
            return r
        raise ElaborationError(f"cannot elaborate {type(r).__name__}")

    @staticmethod
    def compose(cls, field_name, parts, pos):
        # Skip is the unit of both compositions: drop it, collapse singletons.
        kept = [p for p in parts if not isinstance(p, Skip)]
        if not kept:
            return Skip(pos=pos)
        if len(kept) == 1:
            return kept[0]
        return cls(tuple(kept), pos=pos)

    def domain_values(self, domain, env) -> list[int]:
        if isinstance(domain, Range):
            return list(range(self.eval(domain.lo, env), self.eval(domain.hi, env) + 1))
        return [self.eval(item, env) for item in domain.items]

    def state_desc(self, desc: StateDesc, env) -> StateDesc:
        if isinstance(desc, KetState):
            return desc
        args = tuple(a if _is_int(a) else self.eval(a, env) for a in desc.args)
        return NamedStateRef(desc.name, args)

    def state_width(self, desc: StateDesc) -> int | None:
        """Qubit count of a ground descriptor, or None if not resolvable yet."""
        if isinstance(desc, KetState):
            return len(desc.bits)
        if desc.name == "bit":
            if len(desc.args) != 1 or desc.args[0] not in (0, 1):
                raise ElaborationError(f"bit(..) takes a single 0/1 argument, got {desc.args}")
            return 1
        if desc.args:
            raise ElaborationError(f"state {desc.name!r} takes no arguments")
        amps = self.registry.states.get(desc.name)
        if amps is None:
            amps = qmath.BUILTIN_STATES.get(desc.name)
        if amps is None:
            return None
        return int(math.log2(len(amps)))

    def input_decl(self, decl: InputDecl | None, env) -> InputDecl | None:
        if decl is None:
            return None
        conjuncts: list[InputConjunct] = []
        for c in decl.conjuncts:
            if c.binder is not None:
                for v in self.domain_values(c.binder.domain, env):
                    sub = {**env, c.binder.var: v}
                    conjuncts.append(InputConjunct(
                        self.state_desc(c.state, sub), self.wires(c.wires, sub), pos=c.pos))
            else:
                conjuncts.append(InputConjunct(
                    self.state_desc(c.state, env), self.wires(c.wires, env), pos=c.pos))
        used: set[int] = set()
        for c in conjuncts:
            m = self.state_width(c.state)
            if m is not None and m != len(c.wires):
                raise ElaborationError(
                    f"input state covers {m} wire(s) but is declared on {len(c.wires)}"
                )
            if len(set(c.wires)) != len(c.wires):
                raise ElaborationError(f"input declaration repeats wires {c.wires}")
            overlap = used & set(c.wires)
            if overlap:
                raise ElaborationError(f"input declaration wires overlap at {sorted(overlap)}")
            used |= set(c.wires)
        return InputDecl(tuple(conjuncts)) if conjuncts else None


def elaborate(program: Program, bindings: Mapping[str, int] | None = None,
              registry: Registry | None = None) -> Program:
    """Reduce a program to ground form.

    Parameters are substituted from defaults and ``bindings``; loops are
    unrolled (empty ranges become skip); binder parallels and input binders
    are expanded; guard sugar gains an identity default branch; phase
    prefixes become explicit guard branches; measurement expressions are
    resolved against the registry.  Elaborating a ground program is the
    identity.
    """
    env = _merge_bindings(program.params, bindings)
    elab = _Elaborator(registry)
    body = elab.rule(program.body, env)
    decl = elab.input_decl(program.input_decl, env)
    width = 1
    for w in wire_set(body):
        width = max(width, w)
    if decl is not None:
        for c in decl.conjuncts:
            width = max(width, max(c.wires))
    if width > qmath.MAX_WIDTH:
        raise ElaborationError(f"program width {width} exceeds the maximum {qmath.MAX_WIDTH}")
    for _, g in _gate_rules(body, "body"):
        if g.out in env:
            raise ElaborationError(f"output variable {g.out!r} collides with a parameter name")
    return Program((), decl, body)


def program_width(program: Program) -> int:
    """Number of wires: the largest wire index mentioned anywhere (min 1)."""
    width = 1
    for w in wire_set(program.body):
        width = max(width, w)
    if program.input_decl is not None:
        for c in program.input_decl.conjuncts:
            width = max(width, max(c.wires))
    return width


def check_program(program: Program, bindings: Mapping[str, int] | None = None,
                  registry: Registry | None = None) -> tuple[Program | None, list[Diagnostic]]:
    """Elaborate and check; returns the ground program (or None) plus diagnostics."""
    try:
        ground = elaborate(program, bindings, registry)
    except ElaborationError as exc:
        return None, [Diagnostic("error", str(exc), clause=exc.clause)]
    except QmathError as exc:
        return None, [Diagnostic("error", str(exc))]
    return ground, well_formed(ground.body)
