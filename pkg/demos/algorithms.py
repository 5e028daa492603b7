"""
The shipped algorithm programs, checked against closed forms
============================================================

Four textbook algorithms ship as programs: a measurement-based CNOT,
the quantum Fourier transform, phase estimation, and Grover search.
This script runs each one and compares the result with the formula it
is supposed to realize.
"""
import math
from importlib import resources

import numpy as np

import qcasm

programs = resources.files("qcasm") / "programs"


def load(name):
    return qcasm.parse((programs / f"{name}.qcasm").read_text())


# ---------------------------------------------------------------------------
# Measurement-based CNOT: parity and single-qubit measurements plus
# classical corrections act as CNOT on wires 1 and 3; the middle wire
# ends in a random bit r.
# ---------------------------------------------------------------------------

cnot = load("cnot_mb")
print("measurement-based CNOT, all four inputs:")
for c in (0, 1):
    for t in (0, 1):
        enum = qcasm.enumerate_branches(cnot, bindings={"c": c, "t": t})
        outs = set()
        for b in enum.branches:
            bits = np.argmax(np.abs(b.state.amplitudes))
            outs.add(tuple(int(x) for x in format(bits, "03b")))
        got = sorted(outs)
        assert all(w1 == c and w3 == c ^ t for w1, _r, w3 in got)
        print(f"  |{c}0{t}> -> {len(enum.branches)} branches, "
              f"final kets {got}")

# ---------------------------------------------------------------------------
# QFT: the composite unitary of the program equals the DFT matrix
# exp(2 pi i jk / 2^n) / sqrt(2^n).
# ---------------------------------------------------------------------------

qft = load("qft")
print("\nQFT vs the DFT matrix:")
for n in range(1, 5):
    u = qcasm.program_unitary(qft, bindings={"n": n})
    dim = 2**n
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    dft = np.exp(2j * np.pi * j * k / dim) / math.sqrt(dim)
    print(f"  n={n}: max |entry error| = {np.abs(u - dft).max():.2e}")

# ---------------------------------------------------------------------------
# Phase estimation: with U = diag(1, e^{2 pi i j / 2^n}) and its
# eigenstate |1>, the n readout wires spell j in binary, exactly.
# ---------------------------------------------------------------------------

phase_est = load("phase_est")
n, j = 4, 11
registry = qcasm.Registry()
registry.register_family(qcasm.unitary_family(
    "U", np.diag([1.0, np.exp(2j * np.pi * j / 2**n)])))
registry.register_state("psi", np.array([0.0, 1.0]))
enum = qcasm.enumerate_branches(phase_est, bindings={"n": n, "m": 1},
                                registry=registry)
(branch,) = enum.branches          # the exact phase leaves one branch
readings = [e.answer for e in sorted(branch.trace, key=lambda e: e.wq)
            if e.mq == "SM"]
value = int("".join(map(str, readings)), 2)
print(f"\nphase estimation, true phase {j}/2^{n}: "
      f"read {readings} = {value}, probability {branch.probability:.6f}")

# ---------------------------------------------------------------------------
# Grover search: after floor(pi/4 * sqrt(N)) rounds the marked item is
# read with probability sin^2((2k+1) asin(1/sqrt N)).
# ---------------------------------------------------------------------------

grover = load("grover")
print("\nGrover search:")
for n, marked in ((2, 3), (3, 5), (4, 9)):
    N = 2**n
    enum = qcasm.enumerate_branches(grover,
                                    bindings={"n": n, "N": N, "m": marked})
    want = tuple(int(b) for b in format(marked, f"0{n}b"))
    hit = 0.0
    for b in enum.branches:
        readings = tuple(e.answer for e in sorted(b.trace, key=lambda e: e.wq)
                         if e.mq == "SM")
        if readings == want:
            hit += b.probability
    rounds = int(math.pi / 4 * math.sqrt(N))
    analytic = math.sin((2 * rounds + 1) * math.asin(1 / math.sqrt(N))) ** 2
    print(f"  n={n}, item {marked}: {rounds} round(s), "
          f"P(success) = {hit:.7f} (formula {analytic:.7f})")
