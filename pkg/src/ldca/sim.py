"""Dense statevector simulation of the gate vocabulary.

Every rotation gate is exp(i * sign * theta * P) for a Pauli word P, and a
Pauli word acts on the computational basis as a signed bit-flip permutation,
so gate application is a gather plus two axpy-style vector updates. Kernels
(permutation and phase arrays) are cached per (qubit count, word).

Qubit 0 is the most significant bit of the amplitude index. The ancilla used
by the Hadamard-test gradient protocol is appended as the least significant
bit so the register amplitudes stay contiguous per ancilla branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .circuits import Gate, GateSequence
from .fermion_ops import PauliTerm, QubitOperator, Word, word_action

_KERNELS: dict = {}


def _kernel(word: Word, num_qubits: int) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Cached (perm, phase, diagonal) arrays for a Pauli word."""
    key = (num_qubits, word)
    hit = _KERNELS.get(key)
    if hit is None:
        perm, phase = word_action(word, num_qubits)
        diagonal = all(a == "Z" for _, a in word)
        hit = (perm, phase, diagonal)
        _KERNELS[key] = hit
    return hit


@dataclass(frozen=True)
class Statevector:
    """Amplitudes over the computational basis of `num_qubits` qubits.

    Treated as immutable: operations return new instances. Basis index j
    assigns bit (j >> (num_qubits - 1 - p)) & 1 to qubit p.
    """

    num_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=np.complex128)
        if a.shape != (1 << self.num_qubits,):
            raise ValueError("amplitude length must be 2**num_qubits")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "Statevector":
        a = np.zeros(1 << num_qubits, dtype=np.complex128)
        a[index] = 1.0
        return cls(num_qubits, a)

    @classmethod
    def zero_state(cls, num_qubits: int) -> "Statevector":
        return cls.basis(num_qubits, 0)

    @classmethod
    def fock_vacuum(cls, num_qubits: int) -> "Statevector":
        """All modes empty: with occupied = |0>, this is the all-ones string."""
        return cls.basis(num_qubits, (1 << num_qubits) - 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def overlap(self, other: "Statevector") -> complex:
        if other.num_qubits != self.num_qubits:
            raise ValueError("qubit count mismatch")
        return complex(np.vdot(self.amps, other.amps))


def apply_gate_inplace(amps: np.ndarray, gate: Gate, num_qubits: int) -> None:
    """Apply one gate to a writable amplitude array."""
    if gate.kind == "x":
        q = gate.qubits[0]
        perm, _, _ = _kernel(((q, "X"),), num_qubits)
        amps[:] = amps[perm]
        return
    sign, word = gate.generator
    perm, phase, diagonal = _kernel(word, num_qubits)
    theta = sign * gate.theta
    c, s = np.cos(theta), np.sin(theta)
    if diagonal:
        # phase is real +-1 here; exp(i theta P) is elementwise
        amps *= c + 1j * s * phase
    else:
        tmp = amps[perm]
        tmp *= phase
        amps *= c
        amps += (1j * s) * tmp


def apply_gates_inplace(
    amps: np.ndarray, gates: Iterable[Gate], num_qubits: int
) -> None:
    for g in gates:
        apply_gate_inplace(amps, g, num_qubits)


def apply(seq: GateSequence, psi: Statevector) -> Statevector:
    """Run a circuit on a state, layer by layer in time order."""
    if seq.num_qubits != psi.num_qubits:
        raise ValueError("qubit count mismatch")
    amps = psi.amps.copy()
    apply_gates_inplace(amps, seq.gates(), psi.num_qubits)
    return Statevector(psi.num_qubits, amps)


def word_matvec(word: Word, amps: np.ndarray, num_qubits: int) -> np.ndarray:
    """Apply a Pauli word to an amplitude array, returning a new array."""
    perm, phase, _ = _kernel(word, num_qubits)
    out = amps[perm] * phase
    return out


def expectation(op: QubitOperator, psi: Statevector) -> float:
    """Real expectation value of a Hermitian operator."""
    if not op.is_hermitian():
        raise ValueError("operator must be Hermitian")
    total = 0.0 + 0.0j
    for word, coeff in op.terms.items():
        total += coeff * np.vdot(psi.amps, word_matvec(word, psi.amps, psi.num_qubits))
    scale = max(1.0, abs(total))
    if abs(total.imag) > 1e-8 * scale:
        raise ValueError(f"expectation has imaginary residue {total.imag:.3e}")
    return float(total.real)


def fidelity(psi: Statevector, phi: Statevector) -> float:
    """Squared overlap of two (normalized) states."""
    return float(abs(psi.overlap(phi)) ** 2)


def dump_statevector(psi: Statevector, path: str) -> None:
    """Write amplitudes as little-endian float64 (re, im) pairs."""
    inter = np.empty(2 * psi.amps.size, dtype="<f8")
    inter[0::2] = psi.amps.real
    inter[1::2] = psi.amps.imag
    inter.tofile(path)


def load_statevector(path: str) -> Statevector:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size == 0 or raw.size % 2:
        raise ValueError("truncated statevector file")
    n = raw.size // 2
    num_qubits = int(n).bit_length() - 1
    if 1 << num_qubits != n:
        raise ValueError("amplitude count is not a power of two")
    return Statevector(num_qubits, raw[0::2] + 1j * raw[1::2])


# ---------------------------------------------------------------------------
# Hadamard-test gradient protocol

@dataclass(frozen=True)
class Insertion:
    """A signed Pauli word inserted after `after_gate` gates of a circuit.

    `after_gate` counts gates in time order; sign is +1 or -1.
    """

    after_gate: int
    sign: int
    word: Word

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")


def _controlled_word(cols: np.ndarray, word: Word, num_qubits: int, sign: int) -> None:
    """Apply a signed Pauli word to the ancilla-1 branch only.

    Realized as a chain of controlled single-qubit Paulis over the word's
    support; `cols` has shape (2**num_qubits, 2) with the ancilla as the
    trailing axis.
    """
    branch = cols[:, 1]
    for q, axis in word:
        branch[:] = word_matvec(((q, axis),), branch, num_qubits)
    if sign < 0:
        branch *= -1.0


def gradient_hadamard_test(
    base: GateSequence,
    insertion: Insertion,
    obs: PauliTerm,
    psi0: Statevector,
) -> float:
    """Ancilla-based evaluation of 2 Im <psi0| V^dag O U |psi0>.

    U is the full circuit, V the circuit with the insertion's signed Pauli
    word applied after its first `after_gate` gates. The ancilla starts in
    |+>, controls both the inserted word and the observable word, and is
    read out in Y; the observable coefficient must be real and scales the
    result. This matches the derivative of <U psi0|O coeff|U psi0> with
    respect to the angle of the gate exp(i sign theta P) preceding the
    insertion point.
    """
    if abs(complex(obs.coeff).imag) > 1e-12 * max(1.0, abs(obs.coeff)):
        raise ValueError("observable coefficient must be real")
    n = base.num_qubits
    if psi0.num_qubits != n:
        raise ValueError("qubit count mismatch")
    gates = list(base.gates())
    if not 0 <= insertion.after_gate <= len(gates):
        raise ValueError("insertion point out of range")
    cols = np.empty((1 << n, 2), dtype=np.complex128)
    cols[:, 0] = psi0.amps / np.sqrt(2.0)
    cols[:, 1] = psi0.amps / np.sqrt(2.0)
    for i, g in enumerate(gates):
        if i == insertion.after_gate:
            _controlled_word(cols, insertion.word, n, insertion.sign)
        # register gates act on both ancilla branches
        apply_gate_inplace(cols[:, 0], g, n)
        apply_gate_inplace(cols[:, 1], g, n)
    if insertion.after_gate == len(gates):
        _controlled_word(cols, insertion.word, n, insertion.sign)
    _controlled_word(cols, obs.word, n, 1)
    # <Y> on the ancilla; the state is already normalized
    y_exp = 2.0 * float(np.imag(np.vdot(cols[:, 0], cols[:, 1])))
    return -y_exp * float(np.real(obs.coeff))
