"""Lowering elaborated programs to generalized circuits.

A generalized circuit is a width-w wiring of gates.  Each gate applies a
measurement family to a tuple of wires, optionally guarded by classical
expressions over earlier outcome variables: the first true guard selects
the family to apply, and the trailing family is the default.  Wires
thread through gates in program order; a gate additionally depends on
the producers of every variable its guards read.

Gates are identified by position rather than by where they sat in the
source tree: the id of a gate is (w, k) where w is its lowest wire and k
is how many earlier gates touch that wire.  Programs that differ only in
how independent parts are grouped therefore lower to equal circuits.

The module also extracts the series-parallel decomposition tree of the
gate occurrences, turns it into a partial order, and derives schedules:
partitions of the gates into rounds of mutually independent gates,
ordered consistently with every prerequisite.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import ast
from .errors import CapExceededError, LoweringError, ScheduleError
from .qmath import MeasurementFamily

Gid = tuple[int, int]
Schedule = tuple[tuple[Gid, ...], ...]


@dataclass(frozen=True)
class Gate:
    """One gate occurrence: guarded choice among measurement families.

    ``families`` has one more entry than ``guards``; evaluating the
    guards in order against the classical store selects the family of
    the first true guard, falling back to the last entry.
    """
    gid: Gid
    wires: tuple[int, ...]
    out: str | None
    guards: tuple[ast.Expr, ...]
    families: tuple[MeasurementFamily, ...]

    def __post_init__(self):
        if len(self.families) != len(self.guards) + 1:
            raise LoweringError("a gate needs one more family than guards")

    @property
    def arity(self) -> int:
        return len(self.wires)

    @property
    def label(self) -> str:
        text = self.families[0].name if len(self.families) == 1 else \
            " / ".join(f.name for f in self.families)
        head = f"{self.out} := " if self.out else ""
        wires = ", ".join(str(w) for w in self.wires)
        return f"{head}{text}({wires})"

    def reads(self) -> frozenset[str]:
        names: set[str] = set()
        for g in self.guards:
            names |= ast.expr_names(g)
        return frozenset(names)


@dataclass
class GeneralizedCircuit:
    """Gates plus wiring: quantum links and classical dependencies.

    ``links`` maps each wire endpoint to its successor endpoint.  The
    endpoints of wire w are ("in", w), ("entry", gid, w), ("exit", gid, w)
    and ("out", w); following links from ("in", w) walks the gates on w
    in order.  ``classical_deps`` holds (producer, consumer, variable)
    triples, one per guard variable read.  ``prereq`` gives each gate's
    direct prerequisites (previous gate on each wire, plus producers of
    guard variables).
    """
    width: int
    gates: tuple[Gate, ...]
    links: dict
    classical_deps: tuple[tuple[Gid, Gid, str], ...]
    prereq: dict[Gid, frozenset[Gid]]
    _closure: dict | None = field(default=None, compare=False, repr=False)

    def gate(self, gid: Gid) -> Gate:
        for g in self.gates:
            if g.gid == gid:
                return g
        raise KeyError(gid)

    @property
    def gids(self) -> tuple[Gid, ...]:
        return tuple(g.gid for g in self.gates)

    def closure(self) -> dict[Gid, frozenset[Gid]]:
        """Transitive closure of the prerequisite relation."""
        if self._closure is None:
            closed: dict[Gid, frozenset[Gid]] = {}

            def visit(gid: Gid) -> frozenset[Gid]:
                got = closed.get(gid)
                if got is None:
                    acc: set[Gid] = set()
                    for p in self.prereq[gid]:
                        acc.add(p)
                        acc |= visit(p)
                    got = closed[gid] = frozenset(acc)
                return got

            for gid in self.prereq:
                visit(gid)
            self._closure = closed
        return self._closure

    def independent(self, a: Gid, b: Gid) -> bool:
        closed = self.closure()
        return a != b and a not in closed[b] and b not in closed[a]

    def wire_order(self, w: int) -> tuple[Gid, ...]:
        """The gates on wire w, following the links from ("in", w)."""
        out = []
        node = self.links.get(("in", w))
        while node is not None and node[0] == "entry":
            _, gid, _ = node
            out.append(gid)
            node = self.links.get(("exit", gid, w))
        return tuple(out)

    def to_json(self) -> dict:
        from .parser import pretty_expr
        gates = []
        for g in self.gates:
            gates.append({
                "id": list(g.gid),
                "wires": list(g.wires),
                "out": g.out,
                "guards": [pretty_expr(e) for e in g.guards],
                "families": [f.name for f in g.families],
            })
        deps = [{"producer": list(p), "consumer": list(c), "variable": v}
                for p, c, v in self.classical_deps]
        wiring = {str(w): [list(g) for g in self.wire_order(w)]
                  for w in range(1, self.width + 1)}
        return {"width": self.width, "gates": gates,
                "wiring": wiring, "classical_deps": deps}


@dataclass(frozen=True)
class DecompLeaf:
    gid: Gid


@dataclass(frozen=True)
class DecompNode:
    kind: str  # "seq" or "par"
    children: tuple

    def __post_init__(self):
        if self.kind not in ("seq", "par"):
            raise LoweringError(f"bad decomposition node kind {self.kind!r}")


DecompTree = DecompLeaf | DecompNode


def _require_ground(program: ast.Program) -> ast.Program:
    if not isinstance(program, ast.Program):
        raise LoweringError("lowering needs a Program")
    if program.params or not ast.is_ground(program.body):
        raise LoweringError("lowering needs an elaborated program; call elaborate() first")
    diags = ast.well_formed(program.body, external=set())
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise LoweringError("program is not well formed: "
                            + "; ".join(d.render() for d in errors))
    return program


class _Lowerer:
    def __init__(self, width: int):
        self.width = width
        self.last: dict[int, tuple] = {w: ("in", w) for w in range(1, width + 1)}
        self.last_gate: dict[int, Gid | None] = {w: None for w in range(1, width + 1)}
        self.chain_len: dict[int, int] = {w: 0 for w in range(1, width + 1)}
        self.links: dict = {}
        self.producers: dict[str, Gid] = {}
        self.gates: list[Gate] = []
        self.deps: list[tuple[Gid, Gid, str]] = []
        self.prereq: dict[Gid, set[Gid]] = {}

    def rule(self, r: ast.Rule) -> DecompTree | None:
        if isinstance(r, ast.GateRule):
            return DecompLeaf(self.gate(r))
        if isinstance(r, ast.Sequential):
            return self.compose("seq", r.parts)
        if isinstance(r, ast.Parallel):
            return self.compose("par", r.bodies)
        if isinstance(r, (ast.ClassicalAssign, ast.ClassicalCond, ast.Skip)):
            return None
        raise LoweringError(f"cannot lower rule {type(r).__name__}")

    def compose(self, kind: str, parts) -> DecompTree | None:
        children = [t for t in (self.rule(p) for p in parts) if t is not None]
        if not children:
            return None
        if len(children) == 1:
            return children[0]
        return DecompNode(kind, tuple(children))

    def gate(self, r: ast.GateRule) -> Gid:
        wires = tuple(r.wires)
        anchor = min(wires)
        gid: Gid = (anchor, self.chain_len[anchor])
        direct: set[Gid] = set()
        for w in wires:
            self.links[self.last[w]] = ("entry", gid, w)
            self.last[w] = ("exit", gid, w)
            if self.last_gate[w] is not None:
                direct.add(self.last_gate[w])
            self.last_gate[w] = gid
            self.chain_len[w] += 1
        for var in sorted(set().union(*(ast.expr_names(g) for g in r.guards)) if r.guards else set()):
            producer = self.producers.get(var)
            if producer is None:
                raise LoweringError(f"guard reads {var!r} before any gate outputs it")
            direct.add(producer)
            self.deps.append((producer, gid, var))
        if r.out is not None:
            self.producers[r.out] = gid
        self.gates.append(Gate(gid, wires, r.out, tuple(r.guards), tuple(r.branches)))
        self.prereq[gid] = direct
        return gid


def _lower(program: ast.Program) -> tuple[GeneralizedCircuit, DecompTree | None]:
    _require_ground(program)
    width = ast.program_width(program)
    low = _Lowerer(width)
    tree = low.rule(program.body)
    for w in range(1, width + 1):
        low.links[low.last[w]] = ("out", w)
    gates = tuple(sorted(low.gates, key=lambda g: g.gid))
    circuit = GeneralizedCircuit(
        width=width,
        gates=gates,
        links=low.links,
        classical_deps=tuple(sorted(low.deps)),
        prereq={gid: frozenset(s) for gid, s in sorted(low.prereq.items())},
    )
    return circuit, tree


def lower(program: ast.Program) -> GeneralizedCircuit:
    """Lower an elaborated, well formed program to its circuit."""
    return _lower(program)[0]


def decomposition(program: ast.Program) -> DecompTree | None:
    """The series-parallel tree of gate occurrences (None if gate-free)."""
    return _lower(program)[1]


# ---------------------------------------------------------------------------
# decomposition trees and orders
# ---------------------------------------------------------------------------

def decomp_leaves(tree: DecompTree | None) -> tuple[Gid, ...]:
    if tree is None:
        return ()
    if isinstance(tree, DecompLeaf):
        return (tree.gid,)
    out: list[Gid] = []
    for c in tree.children:
        out.extend(decomp_leaves(c))
    return tuple(out)


def canonicalize(tree: DecompTree | None) -> DecompTree | None:
    """Flatten nested nodes of the same kind, collapsing singletons.

    Two trees that impose the same order relation through different
    grouping canonicalize to the same tree.
    """
    if tree is None or isinstance(tree, DecompLeaf):
        return tree
    children: list[DecompTree] = []
    for c in tree.children:
        c = canonicalize(c)
        if isinstance(c, DecompNode) and c.kind == tree.kind:
            children.extend(c.children)
        else:
            children.append(c)
    if len(children) == 1:
        return children[0]
    return DecompNode(tree.kind, tuple(children))


def sp_pairs(tree: DecompTree | None) -> frozenset[tuple[Gid, Gid]]:
    """The strict order induced by the tree: a < b for a left of b
    under a "seq" node."""
    pairs: set[tuple[Gid, Gid]] = set()

    def walk(t: DecompTree) -> tuple[Gid, ...]:
        if isinstance(t, DecompLeaf):
            return (t.gid,)
        groups = [walk(c) for c in t.children]
        if t.kind == "seq":
            for i, left in enumerate(groups):
                for right in groups[i + 1:]:
                    pairs.update(itertools.product(left, right))
        return tuple(g for group in groups for g in group)

    if tree is not None:
        walk(tree)
    return frozenset(pairs)


def schedule_from_order(pairs: frozenset[tuple[Gid, Gid]],
                        gids: tuple[Gid, ...]) -> Schedule:
    """Greedy layering of a strict partial order: each round takes every
    gate all of whose predecessors have already fired."""
    preds: dict[Gid, set[Gid]] = {g: set() for g in gids}
    for a, b in pairs:
        if a in preds and b in preds:
            preds[b].add(a)
    remaining = set(gids)
    bouts: list[tuple[Gid, ...]] = []
    while remaining:
        ready = tuple(sorted(g for g in remaining if not (preds[g] & remaining)))
        if not ready:
            raise ScheduleError("order relation has a cycle")
        bouts.append(ready)
        remaining -= set(ready)
    return tuple(bouts)


def greedy_schedule(program_or_circuit, tree: DecompTree | None = None) -> Schedule:
    """The canonical schedule: greedy layering of the program's own
    series-parallel order (falling back to the prerequisite relation
    when only a circuit is given)."""
    if isinstance(program_or_circuit, ast.Program):
        circuit, tree = _lower(program_or_circuit)
    else:
        circuit = program_or_circuit
    if tree is not None:
        return schedule_from_order(sp_pairs(tree), decomp_leaves(tree))
    pairs = frozenset((p, gid) for gid, ps in circuit.closure().items() for p in ps)
    return schedule_from_order(pairs, circuit.gids)


def check_schedule(circuit: GeneralizedCircuit, schedule: Schedule) -> None:
    """Raise ScheduleError unless the bouts partition the gates, each
    bout is mutually independent, and prerequisites fire strictly
    earlier."""
    seen: dict[Gid, int] = {}
    for i, bout in enumerate(schedule):
        for gid in bout:
            if gid in seen:
                raise ScheduleError(f"gate {gid} appears twice")
            seen[gid] = i
    missing = set(circuit.gids) - set(seen)
    extra = set(seen) - set(circuit.gids)
    if missing or extra:
        raise ScheduleError(f"schedule does not partition the gates "
                            f"(missing {sorted(missing)}, extra {sorted(extra)})")
    closed = circuit.closure()
    for i, bout in enumerate(schedule):
        for a, b in itertools.combinations(bout, 2):
            if not circuit.independent(a, b):
                raise ScheduleError(f"gates {a} and {b} in bout {i + 1} are not independent")
    for gid, i in seen.items():
        for p in closed[gid]:
            if seen[p] >= i:
                raise ScheduleError(f"gate {gid} fires in bout {i + 1} but its "
                                    f"prerequisite {p} has not fired")


def all_schedules(circuit: GeneralizedCircuit,
                  max_count: int | None = None) -> list[Schedule]:
    """Every schedule of the circuit: all ways to split the gates into
    successive rounds of ready, mutually independent gates.

    Bouts must be antichains of the prerequisite order whose members are
    all ready when the bout fires, so each step chooses a nonempty
    subset of the currently minimal gates.  Raises CapExceededError when
    more than max_count schedules exist.
    """
    closed = circuit.closure()
    results: list[Schedule] = []

    def extend(remaining: frozenset[Gid], prefix: tuple):
        if not remaining:
            results.append(prefix)
            if max_count is not None and len(results) > max_count:
                raise CapExceededError(f"more than {max_count} schedules")
            return
        ready = sorted(g for g in remaining if not (closed[g] & remaining))
        for r in range(1, len(ready) + 1):
            for bout in itertools.combinations(ready, r):
                extend(remaining - set(bout), prefix + (tuple(bout),))

    extend(frozenset(circuit.gids), ())
    return results


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_name(gid: Gid) -> str:
    return f"g_{gid[0]}_{gid[1]}"


def to_dot(circuit: GeneralizedCircuit) -> str:
    """Graphviz rendering: solid edges carry wires, dashed edges carry
    classical outcome variables."""
    lines = ["digraph circuit {", "  rankdir=LR;", "  node [shape=box];"]
    for w in range(1, circuit.width + 1):
        lines.append(f"  in_{w} [shape=plaintext, label={_dot_quote(f'in {w}')}];")
        lines.append(f"  out_{w} [shape=plaintext, label={_dot_quote(f'out {w}')}];")
    for g in circuit.gates:
        lines.append(f"  {_node_name(g.gid)} [label={_dot_quote(g.label)}];")
    for w in range(1, circuit.width + 1):
        prev = f"in_{w}"
        for gid in circuit.wire_order(w):
            lines.append(f"  {prev} -> {_node_name(gid)} [label={_dot_quote(str(w))}];")
            prev = _node_name(gid)
        lines.append(f"  {prev} -> out_{w} [label={_dot_quote(str(w))}];")
    for producer, consumer, var in circuit.classical_deps:
        lines.append(f"  {_node_name(producer)} -> {_node_name(consumer)} "
                     f"[style=dashed, label={_dot_quote(var)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_text(tree: DecompTree | None) -> str:
    if tree is None:
        return "empty"
    if isinstance(tree, DecompLeaf):
        return f"{tree.gid[0]}.{tree.gid[1]}"
    return f"{tree.kind}({', '.join(tree_text(c) for c in tree.children)})"


def schedule_json(schedule: Schedule) -> list:
    return [[list(g) for g in bout] for bout in schedule]
