"""Executing programs on a dense state-vector simulator.

A prepared program pairs the lowered circuit with a schedule and the
declared input state.  Execution walks the schedule bout by bout; inside
a bout gates fire in ascending id order.  Firing a gate evaluates its
guards against the classical store, selects a measurement family, picks
an outcome (by sampling in ``run``, or branching over every outcome in
``enumerate_branches``), collapses the state, and records a trace entry.
After the last bout the classical rules of the program run: sequential
parts apply in order, parallel parts all read the same snapshot and
their writes must agree.

Sampling draws one uniform variate per gate from ``random.Random(seed)``
(a fixed, platform-independent generator) and inverts the outcome CDF in
label order, so runs are reproducible byte for byte.  Enumeration prunes
branches of probability below 1e-12 (or the caller's ``min_prob``) and
reports the pruned mass alongside the surviving branches.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import ast
from . import circuit as circuit_mod
from .circuit import Gate, GeneralizedCircuit, Gid, Schedule
from .errors import ImpossibleBranchError, SimulationError
from .qmath import (ATOL, PRUNE_EPS, MAX_WIDTH, MeasurementFamily, QuantumState,
                    Registry, apply_operator, collapse, make_state,
                    outcome_probability)

DEFAULT_MAX_BRANCHES = 2**20
UNITARY_MAX_WIDTH = 12


@dataclass(frozen=True)
class QueryTraceEntry:
    """One fired gate: bout number, family applied, wires, outcome label."""
    step: int
    mq: str
    wq: tuple[int, ...]
    answer: int


@dataclass
class RunResult:
    state: QuantumState
    store: dict[str, int]
    outcomes: tuple[tuple[Gid, int], ...]
    trace: tuple[QueryTraceEntry, ...]
    probability: float
    schedule: Schedule


@dataclass
class Branch:
    outcomes: tuple[tuple[Gid, int], ...]
    store: dict[str, int]
    probability: float
    state: QuantumState
    trace: tuple[QueryTraceEntry, ...]


@dataclass
class Enumeration:
    branches: tuple[Branch, ...]
    pruned_mass: float

    @property
    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches)

    def named(self) -> dict[tuple[tuple[str, int], ...], float]:
        """Probability of each assignment to the named outcome variables."""
        acc: dict[tuple[tuple[str, int], ...], float] = {}
        for b in self.branches:
            key = tuple(sorted((k, v) for k, v in b.store.items()))
            acc[key] = acc.get(key, 0.0) + b.probability
        return acc


@dataclass
class PreparedProgram:
    program: ast.Program
    registry: Registry
    circuit: GeneralizedCircuit
    tree: object
    schedule: Schedule
    initial: QuantumState
    firing: tuple[tuple[int, Gate], ...] = field(default=())

    def __post_init__(self):
        order = []
        for step, bout in enumerate(self.schedule, start=1):
            for gid in bout:
                order.append((step, self.circuit.gate(gid)))
        self.firing = tuple(order)


def initial_state(program: ast.Program, registry: Registry | None = None,
                  width: int | None = None) -> QuantumState:
    """Tensor the declared conjunct states together (undeclared wires
    start in |0>) and permute to wire order."""
    registry = registry if registry is not None else Registry()
    if width is None:
        width = ast.program_width(program)
    if width > MAX_WIDTH:
        raise SimulationError(f"width {width} exceeds the {MAX_WIDTH}-wire limit")
    seq: list[int] = []
    amps = np.ones(1, dtype=np.complex128)
    conjuncts = program.input_decl.conjuncts if program.input_decl else ()
    for c in conjuncts:
        block = _conjunct_state(c, registry)
        for w in c.wires:
            if not isinstance(w, int):
                raise SimulationError("input declaration is not ground")
            if w in seq:
                raise SimulationError(f"wire {w} declared twice in the input")
            if not 1 <= w <= width:
                raise SimulationError(f"declared wire {w} outside 1..{width}")
            seq.append(w)
        amps = np.kron(amps, block.amplitudes)
    for w in range(1, width + 1):
        if w not in seq:
            seq.append(w)
            amps = np.kron(amps, np.array([1.0, 0.0], dtype=np.complex128))
    tensor = amps.reshape((2,) * width)
    axes = [seq.index(w) for w in range(1, width + 1)]
    return QuantumState(width, tensor.transpose(axes).reshape(-1))


def _conjunct_state(c: ast.InputConjunct, registry: Registry) -> QuantumState:
    s = c.state
    if isinstance(s, ast.KetState):
        return make_state(s.bits, len(s.bits))
    if isinstance(s, ast.NamedStateRef):
        if s.name == "bit":
            if len(s.args) != 1 or s.args[0] not in (0, 1):
                raise SimulationError("bit(e) takes a single 0/1 argument")
            return make_state(str(s.args[0]), 1)
        if s.args:
            raise SimulationError(f"state {s.name!r} takes no arguments")
        return make_state(s.name, len(c.wires), registry)
    raise SimulationError(f"cannot build state from {s!r}")


def prepare(program: ast.Program, bindings: dict | None = None,
            registry: Registry | None = None,
            schedule: Schedule | None = None) -> PreparedProgram:
    """Elaborate (if needed), lower, schedule, and build the input state."""
    registry = registry if registry is not None else Registry()
    if program.params or not ast.is_ground(program.body):
        program = ast.elaborate(program, bindings or {}, registry)
    circ, tree = circuit_mod._lower(program)
    if schedule is None:
        schedule = circuit_mod.greedy_schedule(circ, tree)
    circuit_mod.check_schedule(circ, schedule)
    state = initial_state(program, registry, circ.width)
    return PreparedProgram(program, registry, circ, tree, schedule, state)


# ---------------------------------------------------------------------------
# firing gates
# ---------------------------------------------------------------------------

def _guard_value(e: ast.Expr, store) -> bool:
    v = ast.eval_runtime(e, store)
    if not isinstance(v, bool):
        raise SimulationError(f"guard value must be a truth value, got {v!r}")
    return v


def select_family(gate: Gate, store) -> MeasurementFamily:
    """First family whose guard holds; the last family is the default."""
    for g, fam in zip(gate.guards, gate.families):
        if _guard_value(g, store):
            return fam
    return gate.families[-1]


def _outcome_table(state: QuantumState, fam: MeasurementFamily,
                   wires: tuple[int, ...]) -> tuple[tuple[int, float], ...]:
    return tuple((out.label, outcome_probability(state, fam, wires, out.label))
                 for out in fam.outcomes)


def _pick(pairs: tuple[tuple[int, float], ...], u: float) -> tuple[int, float]:
    """Invert the outcome CDF at u, skipping effectively-impossible labels."""
    cum = 0.0
    last_positive = None
    for label, p in pairs:
        if p > PRUNE_EPS:
            last_positive = (label, p)
        cum += p
        if u < cum:
            if p <= PRUNE_EPS and last_positive is not None:
                return last_positive
            return label, p
    if last_positive is None:
        raise ImpossibleBranchError("every outcome of the family has zero probability")
    return last_positive


def _sample_outcome(state: QuantumState, fam: MeasurementFamily,
                    wires: tuple[int, ...], u: float):
    return _pick(_outcome_table(state, fam, wires), u)


# ---------------------------------------------------------------------------
# the classical pass
# ---------------------------------------------------------------------------

def _classical_updates(r: ast.Rule, store: dict) -> dict:
    if isinstance(r, (ast.GateRule, ast.Skip)):
        return {}
    if isinstance(r, ast.ClassicalAssign):
        args = []
        for a in r.target_args:
            v = ast.eval_runtime(a, store)
            if isinstance(v, bool) or not isinstance(v, int):
                raise SimulationError("dynamic function arguments must be integers")
            args.append(v)
        key = ast.dynamic_key(r.target, tuple(args))
        return {key: ast.eval_runtime(r.value, store)}
    if isinstance(r, ast.ClassicalCond):
        for g, b in zip(r.guards, r.branches):
            if _guard_value(g, store):
                return _classical_updates(b, store)
        if len(r.branches) > len(r.guards):
            return _classical_updates(r.branches[-1], store)
        return {}
    if isinstance(r, ast.Sequential):
        current = dict(store)
        acc: dict = {}
        for p in r.parts:
            up = _classical_updates(p, current)
            current.update(up)
            acc.update(up)
        return acc
    if isinstance(r, ast.Parallel):
        acc = {}
        for b in r.bodies:
            up = _classical_updates(b, store)
            for k, v in up.items():
                if k in acc and acc[k] != v:
                    raise SimulationError(f"parallel rules write different values to {k!r}")
            acc.update(up)
        return acc
    raise SimulationError(f"cannot execute rule {type(r).__name__}")


def _run_classical(program: ast.Program, store: dict) -> dict:
    out = dict(store)
    out.update(_classical_updates(program.body, out))
    return out


# ---------------------------------------------------------------------------
# run / enumerate / sample
# ---------------------------------------------------------------------------

def _execute(prep: PreparedProgram, rng: random.Random) -> RunResult:
    state = prep.initial
    store: dict[str, int] = {}
    outcomes: list[tuple[Gid, int]] = []
    trace: list[QueryTraceEntry] = []
    probability = 1.0
    for step, gate in prep.firing:
        fam = select_family(gate, store)
        u = rng.random()
        label, p = _sample_outcome(state, fam, gate.wires, u)
        state = collapse(state, fam, gate.wires, label)
        probability *= p
        outcomes.append((gate.gid, label))
        if gate.out is not None:
            store[gate.out] = label
        trace.append(QueryTraceEntry(step, fam.name, gate.wires, label))
    store = _run_classical(prep.program, store)
    return RunResult(state, store, tuple(sorted(outcomes)), tuple(trace),
                     min(probability, 1.0), prep.schedule)


def run(program: ast.Program, seed: int = 0, bindings: dict | None = None,
        registry: Registry | None = None,
        schedule: Schedule | None = None) -> RunResult:
    """One seeded sampling run."""
    prep = prepare(program, bindings, registry, schedule)
    return _execute(prep, random.Random(seed))


def enumerate_branches(program: ast.Program, bindings: dict | None = None,
                       registry: Registry | None = None,
                       schedule: Schedule | None = None,
                       min_prob: float = 0.0,
                       max_branches: int = DEFAULT_MAX_BRANCHES) -> Enumeration:
    """Every outcome assignment of positive probability, in firing order.

    A branch is pruned (its mass accumulated, not explored) when its
    probability falls below max(min_prob, 1e-12).
    """
    prep = prepare(program, bindings, registry, schedule)
    return _enumerate(prep, min_prob, max_branches)


def _enumerate(prep: PreparedProgram, min_prob: float = 0.0,
               max_branches: int = DEFAULT_MAX_BRANCHES) -> Enumeration:
    floor = max(min_prob, 0.0)
    branches: list[Branch] = []
    pruned = 0.0
    firing = prep.firing

    def walk(k: int, state: QuantumState, store: dict,
             outcomes: tuple, trace: tuple, prob: float):
        nonlocal pruned
        if k == len(firing):
            final = _run_classical(prep.program, store)
            branches.append(Branch(tuple(sorted(outcomes)), final, prob, state, trace))
            if len(branches) > max_branches:
                raise SimulationError(f"more than {max_branches} branches; "
                                      f"raise min_prob or max_branches")
            return
        step, gate = firing[k]
        fam = select_family(gate, store)
        for out in fam.outcomes:
            p = outcome_probability(state, fam, gate.wires, out.label)
            new_prob = prob * p
            if p <= PRUNE_EPS or new_prob < floor:
                pruned += new_prob
                continue
            new_state = collapse(state, fam, gate.wires, out.label)
            new_store = store if gate.out is None else {**store, gate.out: out.label}
            walk(k + 1, new_state, new_store,
                 outcomes + ((gate.gid, out.label),),
                 trace + (QueryTraceEntry(step, fam.name, gate.wires, out.label),),
                 new_prob)

    walk(0, prep.initial, {}, (), (), 1.0)
    branches.sort(key=lambda b: b.outcomes)
    return Enumeration(tuple(branches), pruned)


def _prefix_table(prep: PreparedProgram,
                  labels: list[int]) -> tuple[tuple[int, float], ...]:
    """Outcome probabilities for the gate at depth len(labels), computed
    by replaying the collapses along the outcome prefix."""
    state = prep.initial
    store: dict[str, int] = {}
    for (_step, gate), label in zip(prep.firing, labels):
        fam = select_family(gate, store)
        state = collapse(state, fam, gate.wires, label)
        if gate.out is not None:
            store[gate.out] = label
    _step, gate = prep.firing[len(labels)]
    return _outcome_table(state, select_family(gate, store), gate.wires)


def sample_distribution(program: ast.Program, shots: int, seed: int = 0,
                        bindings: dict | None = None,
                        registry: Registry | None = None,
                        schedule: Schedule | None = None) -> dict:
    """Outcome-assignment counts over ``shots`` runs; shot k uses seed
    ``seed + k``, so a single shot reproduces ``run(program, seed)``.

    Shots sharing an outcome prefix share its amplitudes, so each
    prefix's outcome probabilities are computed once; a repeat shot
    costs one random draw per gate and no linear algebra."""
    prep = prepare(program, bindings, registry, schedule)
    root: dict = {}
    counts: dict[tuple[tuple[Gid, int], ...], int] = {}
    for k in range(shots):
        rng = random.Random(seed + k)
        node = root
        labels: list[int] = []
        for _depth in range(len(prep.firing)):
            if "pairs" not in node:
                node["pairs"] = _prefix_table(prep, labels)
                node["children"] = {}
            label, _p = _pick(node["pairs"], rng.random())
            labels.append(label)
            node = node["children"].setdefault(label, {})
        if "key" not in node:
            node["key"] = tuple(sorted(
                (gate.gid, label)
                for (_step, gate), label in zip(prep.firing, labels)))
        counts[node["key"]] = counts.get(node["key"], 0) + 1
    return counts


def check_schedule_independence(program: ast.Program,
                                bindings: dict | None = None,
                                registry: Registry | None = None,
                                schedules: list[Schedule] | None = None,
                                min_prob: float = 0.0,
                                atol: float = ATOL) -> int:
    """Enumerate under every schedule and require identical branch sets:
    same outcome assignments, probabilities within atol, equal stores,
    and amplitude-wise equal final states.  Returns the number of
    schedules checked; raises SimulationError on any disagreement."""
    registry = registry if registry is not None else Registry()
    if program.params or not ast.is_ground(program.body):
        program = ast.elaborate(program, bindings or {}, registry)
    circ, tree = circuit_mod._lower(program)
    if schedules is None:
        schedules = circuit_mod.all_schedules(circ)
    if not schedules:
        raise SimulationError("no schedules to compare")
    reference: dict | None = None
    for schedule in schedules:
        prep = prepare(program, None, registry, schedule)
        enum = _enumerate(prep, min_prob)
        table = {b.outcomes: b for b in enum.branches}
        if len(table) != len(enum.branches):
            raise SimulationError("duplicate outcome assignment within one schedule")
        if reference is None:
            reference = table
            continue
        if set(table) != set(reference):
            raise SimulationError(
                f"schedule {schedule} produces a different set of outcome assignments")
        for key, b in table.items():
            r = reference[key]
            if abs(b.probability - r.probability) > atol:
                raise SimulationError(
                    f"branch {key}: probability {b.probability} != {r.probability}")
            if b.store != r.store:
                raise SimulationError(f"branch {key}: classical stores differ")
            if not np.allclose(b.state.amplitudes, r.state.amplitudes, atol=atol):
                raise SimulationError(f"branch {key}: final states differ")
    return len(schedules)


def program_unitary(program: ast.Program, bindings: dict | None = None,
                    registry: Registry | None = None) -> np.ndarray:
    """The composite operator of a measurement-free program, as a dense
    matrix over all 2**width basis states (width at most 12).  The input
    declaration is ignored; guards are evaluated against the outcomes of
    earlier (necessarily single-outcome) gates."""
    registry = registry if registry is not None else Registry()
    if program.params or not ast.is_ground(program.body):
        program = ast.elaborate(program, bindings or {}, registry)
    circ, tree = circuit_mod._lower(program)
    width = circ.width
    if width > UNITARY_MAX_WIDTH:
        raise SimulationError(
            f"composite operator needs width <= {UNITARY_MAX_WIDTH}, got {width}")
    schedule = circuit_mod.greedy_schedule(circ, tree)
    prep = PreparedProgram(program, registry, circ, tree, schedule,
                           make_state("0" * width, width))
    dim = 2**width
    columns = []
    for j in range(dim):
        amps = np.zeros(dim, dtype=np.complex128)
        amps[j] = 1.0
        state = QuantumState(width, amps)
        store: dict[str, int] = {}
        for _step, gate in prep.firing:
            fam = select_family(gate, store)
            if len(fam.outcomes) != 1:
                raise SimulationError(
                    f"gate {gate.label} measures ({fam.name} has "
                    f"{len(fam.outcomes)} outcomes); the program has no composite operator")
            label = fam.outcomes[0].label
            amps2 = apply_operator(state.amplitudes, fam.outcomes[0].operator,
                                   gate.wires, width)
            state = QuantumState(width, amps2)
            if gate.out is not None:
                store[gate.out] = label
        columns.append(state.amplitudes)
    return np.stack(columns, axis=1)


# ---------------------------------------------------------------------------
# JSON rendering (floats carry 17 significant digits)
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise SimulationError("cannot serialize a non-finite number")
    return format(float(x), ".17g")


def emit_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {emit_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [emit_json(v, indent + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple)) for v in obj) and \
                sum(len(s) for s in parts) < 72:
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(inner + s for s in parts) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise SimulationError(f"cannot serialize {type(obj).__name__}")


def _state_json(state: QuantumState) -> dict:
    return {
        "width": state.width,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def _trace_json(trace) -> list:
    return [{"step": t.step, "mq": t.mq, "wq": list(t.wq), "answer": t.answer}
            for t in trace]


def _outcomes_json(outcomes) -> list:
    return [{"gate": list(gid), "answer": label} for gid, label in outcomes]


def run_result_json(result: RunResult) -> dict:
    return {
        "schedule": circuit_mod.schedule_json(result.schedule),
        "probability": result.probability,
        "outcomes": _outcomes_json(result.outcomes),
        "store": dict(sorted(result.store.items())),
        "trace": _trace_json(result.trace),
        "state": _state_json(result.state),
    }


def enumeration_json(enum: Enumeration, with_states: bool = True) -> dict:
    branches = []
    for b in enum.branches:
        doc = {
            "probability": b.probability,
            "outcomes": _outcomes_json(b.outcomes),
            "store": dict(sorted(b.store.items())),
        }
        if with_states:
            doc["state"] = _state_json(b.state)
        branches.append(doc)
    return {
        "branches": branches,
        "pruned_mass": enum.pruned_mass,
        "total_probability": sum(b.probability for b in enum.branches),
    }
