"""
States, gates, and general measurements
=======================================

A tour of the math layer: dense state vectors, the standard gate
library, and measurement families {A_i} that need not be projective —
the only requirement is completeness, sum_i A_i^dag A_i = I.
"""
import numpy as np

import qcasm
from qcasm import qmath

# ---------------------------------------------------------------------------
# States: wire 1 is the most significant bit of the basis index.
# ---------------------------------------------------------------------------

plus = qcasm.make_state("plus", 1)
print("|+> amplitudes:", np.round(plus.amplitudes, 6))

# A two-wire basis state written as a bitstring.  "10" puts wire 1 in
# |1> and wire 2 in |0>, which is basis index 2.
ten = qcasm.make_state("10", 2)
print("|10> has amplitude 1 at index", int(np.argmax(np.abs(ten.amplitudes))))

# ---------------------------------------------------------------------------
# Unitaries are the one-outcome measurement families.
# ---------------------------------------------------------------------------

H = qcasm.std_gate("H")
CNOT = qcasm.std_gate("CNOT")
print("\nH has", len(H.outcomes), "outcome; its label is", H.outcomes[0].label)

# Build a Bell pair by applying H to wire 1 and CNOT to wires (1, 2).
state = qcasm.make_state("00", 2)
state = qmath.apply_unitary(state, H.operator(0), [1])
state = qmath.apply_unitary(state, CNOT.operator(0), [1, 2])
print("Bell state amplitudes:", np.round(state.amplitudes, 6))

# ---------------------------------------------------------------------------
# The standard single-qubit measurement SM and the parity measurement PM.
# ---------------------------------------------------------------------------

SM = qcasm.std_gate("SM")
for label in (0, 1):
    p = qmath.outcome_probability(state, SM, [1], label)
    print(f"P(SM on wire 1 reads {label}) = {p:.3f}")

post = qmath.collapse(state, SM, [1], 0)
print("state after reading 0:", np.round(post.amplitudes, 6))

PM = qcasm.std_gate("PM")
print("P(PM reads even parity) =",
      round(qmath.outcome_probability(state, PM, [1, 2], 0), 3))

# ---------------------------------------------------------------------------
# A custom non-projective family: amplitude damping with rate g.
# Completeness A0^dag A0 + A1^dag A1 = I holds, yet neither operator is
# a projector.  validate_family checks the completeness sum for us.
# ---------------------------------------------------------------------------

g = 0.3
damp = qcasm.make_family("damp", 1, [
    (0, [[1, 0], [0, np.sqrt(1 - g)]]),
    (1, [[0, np.sqrt(g)], [0, 0]]),
])
print("\ndamp is complete:", qcasm.validate_family(damp) is None)

one = qcasm.make_state("1", 1)
print("P(damp decays |1>) =", round(qmath.outcome_probability(one, damp, [1], 1), 3))
print("state after no-decay outcome:",
      np.round(qmath.collapse(one, damp, [1], 0).amplitudes, 6))

# An incomplete family is rejected outright, naming the offending entry.
try:
    qcasm.make_family("lossy", 1, [(0, [[1, 0], [0, 0.5]])])
except qcasm.QcasmError as exc:
    print("incomplete family rejected:", exc)

# ---------------------------------------------------------------------------
# Registries hold user families and named input states for programs.
# ---------------------------------------------------------------------------

registry = qcasm.Registry()
registry.register_family(qcasm.unitary_family("T", np.diag([1, np.exp(1j * np.pi / 4)])))
registry.register_state("psi", np.array([0.6, 0.8]))
print("\nregistry resolves T:", registry.family("T").name)
print("registry resolves cT (controlled build):", registry.family("cT").arity, "wires")
