"""Gate and circuit containers shared by the compiler, simulator, and ansatzes.

The gate vocabulary is deliberately small: an X flip plus single- and
two-qubit Pauli-exponential rotations. Every rotation is of the form
exp(i * sign * theta * P) for a fixed Pauli word P and a fixed sign baked
into the gate kind, so circuits serialize to plain angle lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

from .errors import ConfigError

# kind -> (arity, generator sign, Pauli axes). The unitary applied is
# exp(i * sign * theta * P) with P the tensor product of the listed axes on
# the gate's qubits; "x" is the bare Pauli X flip and has no angle.
GATE_KINDS = {
    "x": (1, None, None),
    "rz": (1, +1, ("Z",)),
    "rzz": (2, +1, ("Z", "Z")),
    "rxx": (2, +1, ("X", "X")),
    "ryy_minus": (2, -1, ("Y", "Y")),
    "rxy": (2, +1, ("X", "Y")),
    "ryx_minus": (2, -1, ("Y", "X")),
}


@dataclass(frozen=True)
class Gate:
    """One gate application: a kind, target qubits, and an optional angle.

    `tag` is free-form provenance used to locate gates inside a larger
    sequence (for gradient insertions); it is never serialized.
    """

    kind: str
    qubits: Tuple[int, ...]
    theta: Optional[float] = None
    tag: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity, sign, _ = GATE_KINDS[self.kind]
        qs = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qs)
        if len(qs) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {qs}")
        if len(set(qs)) != len(qs):
            raise ValueError(f"repeated qubit in {qs}")
        if arity == 2 and abs(qs[0] - qs[1]) != 1:
            raise ValueError(f"two-qubit gates are nearest-neighbor only, got {qs}")
        if sign is None:
            if self.theta is not None:
                raise ValueError(f"{self.kind} takes no angle")
        else:
            if self.theta is None:
                raise ValueError(f"{self.kind} requires an angle")
            object.__setattr__(self, "theta", float(self.theta))

    @property
    def generator(self) -> Tuple[int, Tuple[Tuple[int, str], ...]]:
        """Signed Pauli word P such that the gate is exp(i * sign * theta * P).

        Returns (sign, ((qubit, axis), ...)). Raises for "x".
        """
        arity, sign, axes = GATE_KINDS[self.kind]
        if sign is None:
            raise ValueError("x gate has no rotation generator")
        return sign, tuple(zip(self.qubits, axes))

    def inverse(self) -> "Gate":
        if self.kind == "x":
            return self
        return Gate(self.kind, self.qubits, -self.theta, self.tag)


@dataclass(frozen=True)
class GateSequence:
    """A layered circuit on `num_qubits` qubits.

    Gates within one layer act on disjoint qubits, so the layer count is the
    circuit depth. Layers are never empty.
    """

    num_qubits: int
    layers: Tuple[Tuple[Gate, ...], ...]

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("need at least one qubit")
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        for layer in layers:
            if not layer:
                raise ValueError("empty layer")
            seen = set()
            for g in layer:
                for q in g.qubits:
                    if not 0 <= q < self.num_qubits:
                        raise ValueError(f"qubit {q} out of range for {self.num_qubits}")
                    if q in seen:
                        raise ValueError(f"qubit {q} used twice in one layer")
                    seen.add(q)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> Iterator[Gate]:
        for layer in self.layers:
            yield from layer

    @property
    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates() if len(g.qubits) == 2)

    def inverse(self) -> "GateSequence":
        inv = tuple(tuple(g.inverse() for g in layer) for layer in reversed(self.layers))
        return GateSequence(self.num_qubits, inv)

    def then(self, other: "GateSequence") -> "GateSequence":
        if other.num_qubits != self.num_qubits:
            raise ValueError("qubit count mismatch")
        return GateSequence(self.num_qubits, self.layers + other.layers)

    def to_json_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            row = []
            for g in layer:
                entry = {"kind": g.kind, "q": list(g.qubits)}
                if g.theta is not None:
                    entry["theta"] = g.theta
                row.append(entry)
            layers.append(row)
        return {"qubits": self.num_qubits, "layers": layers}

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    @classmethod
    def from_json_dict(cls, data: dict) -> "GateSequence":
        try:
            n = int(data["qubits"])
            layers = tuple(
                tuple(
                    Gate(entry["kind"], tuple(entry["q"]), entry.get("theta"))
                    for entry in layer
                )
                for layer in data["layers"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed circuit JSON: {exc}") from exc
        return cls(n, layers)

    @classmethod
    def from_json(cls, text: str) -> "GateSequence":
        return cls.from_json_dict(json.loads(text))


def layers_from_gates(num_qubits: int, gates: Sequence[Gate]) -> GateSequence:
    """Greedily pack a gate list (in time order) into disjoint layers."""
    layers: list[list[Gate]] = []
    busy: list[set] = []
    for g in gates:
        placed = False
        # a gate can only slide left past layers it does not touch
        for i in range(len(layers) - 1, -1, -1):
            if busy[i] & set(g.qubits):
                if i + 1 == len(layers):
                    break
                layers[i + 1].append(g)
                busy[i + 1] |= set(g.qubits)
                placed = True
                break
        else:
            if layers:
                layers[0].append(g)
                busy[0] |= set(g.qubits)
                placed = True
        if not placed:
            layers.append([g])
            busy.append(set(g.qubits))
    return GateSequence(num_qubits, tuple(tuple(l) for l in layers))
