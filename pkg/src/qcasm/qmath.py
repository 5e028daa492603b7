"""Dense state vectors, general measurement families, and the gate library.

Conventions used throughout the package:

* A state on w wires is a vector of 2**w complex amplitudes.  Wire 1 is the
  most significant bit, so the basis vector |b1 b2 .. bw> sits at index
  sum(b_i * 2**(w-i)).
* A measurement family is an ordered list of labelled operators {A_i} on k
  qubits satisfying the completeness condition sum_i A_i^dagger A_i = I.
  Outcome i occurs with probability ||A_i |s>||**2 and collapses the state
  to A_i |s> / ||A_i |s>||.  A unitary gate is the one-outcome special case.
* Gates act on arbitrary distinct wires.  Application reshapes the
  amplitude vector and contracts the k-qubit operator against the selected
  axes; the full 2**w x 2**w matrix is never materialized.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ImpossibleBranchError,
    InvalidFamilyError,
    InvalidStateError,
    QmathError,
    RegistryError,
    UnknownNameError,
)

# Numeric contract shared by the whole package.
ATOL = 1e-9              # completeness / unitarity / normalization tolerance
PRUNE_EPS = 1e-12        # below this, an outcome is an impossible branch
INPUT_STATE_ATOL = 1e-6  # accepted norm slack for user amplitude lists
MAX_WIDTH = 24           # hard cap on circuit width (2**24 amplitudes)

_COMPLEX = np.complex128


def _as_operator(matrix, context: str) -> np.ndarray:
    """Coerce to a finite, square, complex, read-only array."""
    op = np.asarray(matrix, dtype=_COMPLEX)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise InvalidFamilyError(f"{context}: operator must be square, got shape {op.shape}")
    if not np.isfinite(op).all():
        raise InvalidFamilyError(f"{context}: operator has non-finite entries")
    op = op.copy()
    op.setflags(write=False)
    return op


def check_wires(wires: Sequence[int], width: int | None = None) -> tuple[int, ...]:
    """Validate a wire tuple: positive, pairwise distinct, within width."""
    ws = tuple(int(w) for w in wires)
    if any(w < 1 for w in ws):
        raise InvalidStateError(f"wire indices must be >= 1, got {ws}")
    if len(set(ws)) != len(ws):
        raise InvalidStateError(f"wire indices must be pairwise distinct, got {ws}")
    if width is not None and any(w > width for w in ws):
        raise InvalidStateError(f"wire index out of range for width {width}: {ws}")
    return ws


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalized pure state on ``width`` wires (2**width amplitudes)."""

    width: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not (1 <= self.width <= MAX_WIDTH):
            raise InvalidStateError(f"width must be in 1..{MAX_WIDTH}, got {self.width}")
        amps = np.asarray(self.amplitudes, dtype=_COMPLEX)
        if amps.shape != (2**self.width,):
            raise InvalidStateError(
                f"state of width {self.width} needs {2**self.width} amplitudes, got {amps.shape}"
            )
        if not np.isfinite(amps).all():
            raise InvalidStateError("state has non-finite amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > ATOL:
            raise InvalidStateError(f"state is not normalized: |norm - 1| = {abs(np.linalg.norm(amps) - 1.0):.3e}")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class Outcome:
    """One labelled operator of a measurement family."""

    label: int
    operator: np.ndarray


@dataclass(frozen=True)
class FamilyDiagnostic:
    """Completeness defect report: worst entry of |sum A_i^+ A_i - I|."""

    message: str
    max_deviation: float
    entry: tuple[int, int]


@dataclass(frozen=True, eq=False)
class MeasurementFamily:
    """Ordered family of labelled k-qubit operators.

    Structural invariants (square operators of one dimension, distinct
    integer labels, finite entries) are enforced here; completeness is the
    job of validate_family / make_family so that defective candidates can
    still be inspected.
    """

    name: str
    arity: int
    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise InvalidFamilyError(f"arity must be >= 1, got {self.arity}")
        if not self.outcomes:
            raise InvalidFamilyError("family needs at least one outcome")
        dim = 2**self.arity
        fixed = []
        for oc in self.outcomes:
            label = int(oc.label)
            if label < 0:
                raise InvalidFamilyError(f"{self.name}: outcome labels must be non-negative, got {label}")
            op = _as_operator(oc.operator, self.name)
            if op.shape != (dim, dim):
                raise InvalidFamilyError(
                    f"{self.name}: dimension mismatch, arity {self.arity} needs {dim}x{dim} operators"
                )
            fixed.append(Outcome(label, op))
        labels = [oc.label for oc in fixed]
        if len(set(labels)) != len(labels):
            raise InvalidFamilyError(f"{self.name}: outcome labels must be distinct, got {labels}")
        object.__setattr__(self, "outcomes", tuple(fixed))

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(oc.label for oc in self.outcomes)

    @property
    def is_unitary(self) -> bool:
        """True for the degenerate single-outcome (plain gate) case."""
        return len(self.outcomes) == 1

    def operator(self, label: int) -> np.ndarray:
        for oc in self.outcomes:
            if oc.label == label:
                return oc.operator
        raise InvalidFamilyError(f"{self.name}: unknown outcome label {label}")

    def __eq__(self, other):
        if not isinstance(other, MeasurementFamily):
            return NotImplemented
        return (
            self.name == other.name
            and self.arity == other.arity
            and self.labels == other.labels
            and all(np.array_equal(a.operator, b.operator) for a, b in zip(self.outcomes, other.outcomes))
        )

    def __hash__(self):
        return hash((self.name, self.arity, self.labels))


def validate_family(f: MeasurementFamily) -> FamilyDiagnostic | None:
    """Return None when sum_i A_i^+ A_i = I within tolerance, else a defect report."""
    dim = 2**f.arity
    total = np.zeros((dim, dim), dtype=_COMPLEX)
    for oc in f.outcomes:
        total += oc.operator.conj().T @ oc.operator
    deviation = np.abs(total - np.eye(dim))
    worst = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
    worst_val = float(deviation[worst])
    if worst_val <= ATOL:
        return None
    return FamilyDiagnostic(
        message=f"{f.name}: operators do not sum to identity "
        f"(deviation {worst_val:.6g} at entry {tuple(int(i) for i in worst)})",
        max_deviation=worst_val,
        entry=(int(worst[0]), int(worst[1])),
    )


def make_family(name: str, arity: int, outcomes: Iterable[tuple[int, object]]) -> MeasurementFamily:
    """Construct a family and reject it unless completeness holds."""
    fam = MeasurementFamily(name, arity, tuple(Outcome(int(l), op) for l, op in outcomes))
    defect = validate_family(fam)
    if defect is not None:
        raise InvalidFamilyError(defect.message)
    return fam


def unitary_family(name: str, matrix) -> MeasurementFamily:
    """Wrap a unitary matrix as the degenerate one-outcome family (label 0)."""
    op = _as_operator(matrix, name)
    k = int(op.shape[0]).bit_length() - 1
    if 2**k != op.shape[0]:
        raise InvalidFamilyError(f"{name}: operator dimension {op.shape[0]} is not a power of two")
    return make_family(name, k, [(0, op)])


def scaled_family(f: MeasurementFamily, scalar: complex, name: str | None = None) -> MeasurementFamily:
    """Multiply every operator by a unit-modulus scalar (completeness is kept)."""
    if abs(abs(scalar) - 1.0) > ATOL:
        raise InvalidFamilyError(f"family scalars must have modulus 1, got |{scalar}| = {abs(scalar)}")
    return MeasurementFamily(
        name if name is not None else f"({scalar})*{f.name}",
        f.arity,
        tuple(Outcome(oc.label, scalar * oc.operator) for oc in f.outcomes),
    )


def family_power(f: MeasurementFamily, exponent: int, name: str | None = None) -> MeasurementFamily:
    """Matrix power of a one-outcome family (used for gates raised to 2**i)."""
    if not f.is_unitary:
        raise InvalidFamilyError(f"{f.name}: only single-outcome families can be raised to a power")
    if exponent < 0:
        raise InvalidFamilyError(f"{f.name}: negative gate power {exponent}")
    op = np.linalg.matrix_power(f.outcomes[0].operator, exponent)
    return unitary_family(name if name is not None else f"{f.name}^{exponent}", op)


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------

BUILTIN_STATES: dict[str, np.ndarray] = {
    "bell00": np.array([1, 0, 0, 1], dtype=_COMPLEX) / math.sqrt(2),
    "plus": np.array([1, 1], dtype=_COMPLEX) / math.sqrt(2),
    "minus": np.array([1, -1], dtype=_COMPLEX) / math.sqrt(2),
}

StateDescriptor = Union[str, Sequence[complex]]


def basis_index(bits: Sequence[int]) -> int:
    """Index of |b1 .. bw> with wire 1 as the most significant bit."""
    idx = 0
    for b in bits:
        idx = idx * 2 + int(b)
    return idx


def index_bits(index: int, width: int) -> tuple[int, ...]:
    return tuple((index >> (width - 1 - i)) & 1 for i in range(width))


def basis_state(bits: Sequence[int]) -> np.ndarray:
    vec = np.zeros(2 ** len(bits), dtype=_COMPLEX)
    vec[basis_index(bits)] = 1.0
    return vec


def make_state(spec: StateDescriptor, width: int, registry: "Registry | None" = None) -> QuantumState:
    """Build a normalized state of the given width from a descriptor.

    Descriptors: a bitstring ("0", "1", "011", ...) selecting a basis ket, a
    registered name (builtins bell00/plus/minus plus user registry entries),
    or an explicit amplitude list of length 2**width whose norm is within
    1e-6 of 1 (it is renormalized exactly).
    """
    if isinstance(spec, str):
        if spec and all(c in "01" for c in spec):
            if len(spec) != width:
                raise InvalidStateError(f"ket {spec!r} has width {len(spec)}, expected {width}")
            return QuantumState(width, basis_state([int(c) for c in spec]))
        amps = None
        if registry is not None:
            amps = registry.states.get(spec)
        if amps is None:
            amps = BUILTIN_STATES.get(spec)
        if amps is None:
            raise UnknownNameError(f"unknown state name {spec!r}")
        got = int(math.log2(len(amps)))
        if got != width:
            raise InvalidStateError(f"state {spec!r} has width {got}, expected {width}")
        return QuantumState(width, amps)
    amps = np.asarray(list(spec), dtype=_COMPLEX)
    if amps.shape != (2**width,):
        raise InvalidStateError(f"amplitude list of length {amps.size} does not fit width {width}")
    if not np.isfinite(amps).all():
        raise InvalidStateError("amplitude list has non-finite entries")
    norm = float(np.linalg.norm(amps))
    if abs(norm - 1.0) > INPUT_STATE_ATOL:
        raise InvalidStateError(f"amplitude list norm {norm} is not within {INPUT_STATE_ATOL} of 1")
    return QuantumState(width, amps / norm)


# ---------------------------------------------------------------------------
# applying operators to selected wires
# ---------------------------------------------------------------------------

def _wire_block(amps: np.ndarray, wires: tuple[int, ...], width: int):
    """View the amplitudes as a (2**k, 2**(width-k)) block, gate wires first.

    Returns the block together with the inverse axis permutation needed to
    undo the reordering.  Works on strides only; nothing of size 4**width
    is ever built.
    """
    k = len(wires)
    axes = [w - 1 for w in wires]
    rest = [a for a in range(width) if a not in axes]
    perm = axes + rest
    inv = np.argsort(perm)
    block = amps.reshape((2,) * width).transpose(perm).reshape(2**k, -1)
    return block, inv


def _block_to_amps(block: np.ndarray, inv: np.ndarray, width: int) -> np.ndarray:
    return block.reshape((2,) * width).transpose(inv).reshape(-1)


def apply_operator(amps: np.ndarray, op: np.ndarray, wires: Sequence[int], width: int) -> np.ndarray:
    """Apply a k-qubit operator to the named wires of a raw amplitude vector."""
    ws = check_wires(wires, width)
    k = len(ws)
    if op.shape != (2**k, 2**k):
        raise InvalidFamilyError(f"operator of shape {op.shape} does not act on {k} wires")
    block, inv = _wire_block(amps, ws, width)
    return _block_to_amps(op @ block, inv, width)


def is_unitary_matrix(op: np.ndarray, atol: float = ATOL) -> bool:
    op = np.asarray(op, dtype=_COMPLEX)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        return False
    return bool(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0]))) <= atol)


def apply_unitary(s: QuantumState, u, wires: Sequence[int]) -> QuantumState:
    """Apply a unitary matrix to the named wires."""
    op = _as_operator(u, "apply_unitary")
    if not is_unitary_matrix(op):
        raise InvalidFamilyError("apply_unitary: matrix is not unitary within tolerance")
    return QuantumState(s.width, apply_operator(s.amplitudes, op, wires, s.width))


def outcome_probability(s: QuantumState, f: MeasurementFamily, wires: Sequence[int], label: int) -> float:
    """Probability ||A_label |s>||**2 of observing the labelled outcome."""
    ws = check_wires(wires, s.width)
    if len(ws) != f.arity:
        raise InvalidFamilyError(f"{f.name}: family of arity {f.arity} applied to {len(ws)} wires")
    vec = apply_operator(s.amplitudes, f.operator(label), ws, s.width)
    p = float(np.real(np.vdot(vec, vec)))
    if p > 1.0 + ATOL:
        raise InvalidFamilyError(f"{f.name}: outcome probability {p} exceeds 1")
    return min(max(p, 0.0), 1.0)


def collapse(s: QuantumState, f: MeasurementFamily, wires: Sequence[int], label: int) -> QuantumState:
    """Post-measurement state A_label |s> / ||A_label |s>|| for the outcome."""
    ws = check_wires(wires, s.width)
    if len(ws) != f.arity:
        raise InvalidFamilyError(f"{f.name}: family of arity {f.arity} applied to {len(ws)} wires")
    vec = apply_operator(s.amplitudes, f.operator(label), ws, s.width)
    norm2 = float(np.real(np.vdot(vec, vec)))
    if norm2 < PRUNE_EPS:
        raise ImpossibleBranchError(
            f"{f.name}: outcome {label} has probability {norm2:.3e} below {PRUNE_EPS}"
        )
    return QuantumState(s.width, vec / math.sqrt(norm2))


def fidelity_up_to_phase(a: QuantumState, b: QuantumState) -> float:
    """|<a|b>|, which ignores any global phase difference."""
    if a.width != b.width:
        raise InvalidStateError(f"fidelity of states with widths {a.width} and {b.width}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)))


# ---------------------------------------------------------------------------
# gate library
# ---------------------------------------------------------------------------

_SQ2 = 1.0 / math.sqrt(2.0)

_I2 = np.eye(2, dtype=_COMPLEX)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=_COMPLEX)
_X = np.array([[0, 1], [1, 0]], dtype=_COMPLEX)
_Y = np.array([[0, -1j], [1j, 0]], dtype=_COMPLEX)
_Z = np.array([[1, 0], [0, -1]], dtype=_COMPLEX)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=_COMPLEX
)


def controlled(u) -> np.ndarray:
    """Controlled version of a unitary: block diag(I, U), first qubit controls."""
    op = _as_operator(u, "controlled")
    if not is_unitary_matrix(op):
        raise InvalidFamilyError("controlled: matrix is not unitary within tolerance")
    d = op.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=_COMPLEX)
    out[:d, :d] = np.eye(d)
    out[d:, d:] = op
    return out


def _rotation(k: int) -> np.ndarray:
    # diag(1, e^{2 pi i / 2^k}); k = 1 gives Z.
    if k < 1:
        raise InvalidFamilyError(f"R_k needs k >= 1, got {k}")
    return np.array([[1, 0], [0, np.exp(2j * np.pi / 2**k)]], dtype=_COMPLEX)


def fourier_matrix(n: int) -> np.ndarray:
    """The 2**n-dimensional Fourier matrix, entries w^(jk)/sqrt(2**n)."""
    if not (1 <= n <= 12):
        raise InvalidFamilyError(f"QFT_n supports n in 1..12, got {n}")
    dim = 2**n
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    return np.exp(2j * np.pi * j * k / dim) / math.sqrt(dim)


def _mark_matrix(n: int, m: int) -> np.ndarray:
    # Flip the last wire exactly on the marked n-bit basis string:
    # |x>|q> -> |x>|q xor [x = m]>.
    if n < 1:
        raise InvalidFamilyError(f"mark needs n >= 1, got {n}")
    if not (0 <= m < 2**n):
        raise InvalidFamilyError(f"mark: marked index {m} out of range for {n} wires")
    dim = 2 ** (n + 1)
    op = np.eye(dim, dtype=_COMPLEX)
    op[[2 * m, 2 * m + 1]] = op[[2 * m + 1, 2 * m]]
    return op


def _reflect0_matrix(n: int) -> np.ndarray:
    # 2|0..0><0..0| - I on n wires.
    if n < 1:
        raise InvalidFamilyError(f"reflect0 needs n >= 1, got {n}")
    diag = -np.ones(2**n, dtype=_COMPLEX)
    diag[0] = 1.0
    return np.diag(diag)


_SM = MeasurementFamily(
    "SM", 1, (Outcome(0, np.diag([1.0, 0.0]).astype(_COMPLEX)), Outcome(1, np.diag([0.0, 1.0]).astype(_COMPLEX)))
)
_PM_EVEN = np.diag([1.0, 0.0, 0.0, 1.0]).astype(_COMPLEX)
_PM_ODD = np.diag([0.0, 1.0, 1.0, 0.0]).astype(_COMPLEX)
_PM = MeasurementFamily("PM", 2, (Outcome(0, _PM_EVEN), Outcome(1, _PM_ODD)))

# name -> number of integer parameters expected by std_gate
STD_GATE_PARAMS: dict[str, int] = {
    "I": 0, "H": 0, "X": 0, "Y": 0, "Z": 0, "SWAP": 0, "CNOT": 0,
    "SM": 0, "PM": 0, "R": 1, "QFT": 1, "QFTdg": 1, "mark": 2, "reflect0": 1,
}


def identity_family(arity: int) -> MeasurementFamily:
    """Identity gate on ``arity`` wires (the implicit else branch of guards)."""
    return unitary_family("I" if arity == 1 else f"I_{arity}", np.eye(2**arity, dtype=_COMPLEX))


def std_gate(name: str, params: Sequence[int] = ()) -> MeasurementFamily:
    """Look up a library gate or measurement by name and integer parameters.

    Single-outcome entries: I, H, X, Y, Z, SWAP, CNOT, R_k, QFT_n, QFTdg_n,
    mark_(n, m) (flip wire n+1 on the marked basis string) and reflect0_n
    (2|0..0><0..0| - I).  Measurements: SM (basis read-out) and PM (parity).
    """
    params = tuple(int(p) for p in params)
    if name not in STD_GATE_PARAMS:
        raise UnknownNameError(f"unknown gate or measurement {name!r}")
    want = STD_GATE_PARAMS[name]
    if len(params) != want:
        raise InvalidFamilyError(f"{name} takes {want} parameter(s), got {len(params)}")
    if name == "I":
        return identity_family(1)
    if name == "H":
        return unitary_family("H", _H)
    if name == "X":
        return unitary_family("X", _X)
    if name == "Y":
        return unitary_family("Y", _Y)
    if name == "Z":
        return unitary_family("Z", _Z)
    if name == "SWAP":
        return unitary_family("SWAP", _SWAP)
    if name == "CNOT":
        return unitary_family("CNOT", controlled(_X))
    if name == "SM":
        return _SM
    if name == "PM":
        return _PM
    if name == "R":
        return unitary_family(f"R_{params[0]}", _rotation(params[0]))
    if name == "QFT":
        return unitary_family(f"QFT_{params[0]}", fourier_matrix(params[0]))
    if name == "QFTdg":
        return unitary_family(f"QFTdg_{params[0]}", fourier_matrix(params[0]).conj().T)
    if name == "mark":
        return unitary_family(f"mark_({params[0]},{params[1]})", _mark_matrix(params[0], params[1]))
    if name == "reflect0":
        return unitary_family(f"reflect0_{params[0]}", _reflect0_matrix(params[0]))
    raise UnknownNameError(f"unknown gate or measurement {name!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# registry of user families and states
# ---------------------------------------------------------------------------

@dataclass
class Registry:
    """User-registered measurement families and named states.

    Resolution order for gate names: user family, then library gate, then a
    single leading "c" is stripped and the rest resolved as a controlled
    unitary.  User names must not contain underscores (the underscore
    separates a gate name from its parameter subscript in program text).
    """

    families: dict[str, MeasurementFamily] = field(default_factory=dict)
    states: dict[str, np.ndarray] = field(default_factory=dict)

    def register_family(self, fam: MeasurementFamily) -> None:
        defect = validate_family(fam)
        if defect is not None:
            raise InvalidFamilyError(defect.message)
        if "_" in fam.name:
            raise RegistryError(f"family name {fam.name!r} must not contain underscores")
        self.families[fam.name] = fam

    def register_state(self, name: str, amplitudes) -> None:
        amps = np.asarray(list(amplitudes), dtype=_COMPLEX)
        width = int(math.log2(amps.size)) if amps.size else 0
        if amps.size == 0 or 2**width != amps.size:
            raise RegistryError(f"state {name!r}: amplitude count {amps.size} is not a power of two")
        self.states[name] = make_state(amps, width).amplitudes

    def family(self, name: str, params: Sequence[int] = ()) -> MeasurementFamily:
        """Resolve a gate/measurement name, recursing through "c" prefixes."""
        if name in self.families:
            if params:
                raise RegistryError(f"registered family {name!r} takes no parameters")
            return self.families[name]
        if name in STD_GATE_PARAMS:
            return std_gate(name, params)
        if name.startswith("c") and len(name) > 1:
            base = self.family(name[1:], params)
            if not base.is_unitary:
                raise InvalidFamilyError(f"cannot control the multi-outcome family {base.name!r}")
            return unitary_family("c" + base.name, controlled(base.outcomes[0].operator))
        raise UnknownNameError(f"unknown gate or measurement {name!r}")

    def knows_gate(self, name: str) -> bool:
        try:
            base = name
            while base.startswith("c") and base not in self.families and base not in STD_GATE_PARAMS:
                base = base[1:]
            return bool(base) and (base in self.families or base in STD_GATE_PARAMS)
        except Exception:  # pragma: no cover
            return False


DEFAULT_REGISTRY = Registry()


def _complex_from_pair(pair, context: str) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise RegistryError(f"{context}: expected [re, im], got {pair!r}")
    re, im = pair
    return complex(float(re), float(im))


def load_registry(source, into: Registry | None = None) -> Registry:
    """Load user gates/families and states from a JSON document.

    A document is one entry or a list of entries.  A family entry is
    {"name": str, "arity": int, "outcomes": [{"label": int, "matrix":
    [[[re, im], ...], ...]}, ...]} with row-major matrices; a state entry is
    {"name": str, "qubits": int, "amplitudes": [[re, im], ...]}.
    ``source`` may be a path, a JSON string, or an already-parsed object.
    """
    reg = into if into is not None else Registry()
    if isinstance(source, (str, os.PathLike)) and os.path.exists(os.fspath(source)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    entries = doc if isinstance(doc, list) else [doc]
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry:
            raise RegistryError(f"registry entry must be an object with a name: {entry!r}")
        name = entry["name"]
        if "outcomes" in entry:
            arity = int(entry.get("arity", 0))
            outcomes = []
            for oc in entry["outcomes"]:
                rows = oc["matrix"]
                mat = [[_complex_from_pair(cell, name) for cell in row] for row in rows]
                outcomes.append((int(oc["label"]), np.array(mat, dtype=_COMPLEX)))
            fam = make_family(name, arity, outcomes)
            reg.register_family(fam)
        elif "amplitudes" in entry:
            amps = [_complex_from_pair(pair, name) for pair in entry["amplitudes"]]
            if "qubits" in entry and 2 ** int(entry["qubits"]) != len(amps):
                raise RegistryError(f"state {name!r}: qubits field does not match amplitude count")
            reg.register_state(name, amps)
        else:
            raise RegistryError(f"registry entry {name!r} has neither outcomes nor amplitudes")
    return reg
