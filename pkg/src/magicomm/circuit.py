"""Clifford+magic circuit IR, its text format, and a reversible bit simulator.

Qubits are numbered ``0 .. n_input + n_advice - 1``; the first ``n_input``
qubits are initialised to the input bits and the rest hold the advice state
(``|0...0>`` unless given). Gates are stored flat; :attr:`LayeredCircuit.layers`
derives the alternating Clifford / event view on demand.

Text format::

    inputs 2
    advice 1
    output 2
    h 0
    cnot 0 1
    t 0
    toffoli 0 1 2
    magic U 0 1
    measure 2
    postselect 0=1 2=0
    @json
    {"matrices": {"U": {"re": [[..]], "im": [[..]]}}, "advice_state": {"re": [..], "im": [..]}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "CLIFFORD_KINDS",
    "MAGIC_KINDS",
    "Gate",
    "Layer",
    "LayeredCircuit",
    "AdaptiveCircuit",
    "MixedCircuit",
    "CircuitSyntaxError",
    "parse_circuit",
    "serialize_circuit",
    "load_circuit",
    "simulate_reversible",
    "T_MATRIX",
]

CLIFFORD_KINDS = frozenset({"h", "s", "sdg", "x", "y", "z", "cnot", "cz", "swap"})
MAGIC_KINDS = frozenset({"t", "tdg", "magic", "toffoli"})
EVENT_KINDS = MAGIC_KINDS | {"measure", "postselect"}
_ARITY = {
    "h": 1, "s": 1, "sdg": 1, "x": 1, "y": 1, "z": 1, "t": 1, "tdg": 1,
    "cnot": 2, "cz": 2, "swap": 2,
}
_ARG_NAMES = {1: "qubit", 2: "control and target"}
_UNITARY_ATOL = 1e-10

T_MATRIX = np.diag([1.0, np.exp(1j * np.pi / 4)])


class CircuitSyntaxError(ValueError):
    """Malformed circuit text. ``lineno`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    name: str | None = None
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)
    values: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        kind = self.kind
        if kind in _ARITY and len(self.qubits) != _ARITY[kind]:
            raise ValueError(f"{kind} takes {_ARITY[kind]} qubit(s), got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{kind} acts on repeated qubits {self.qubits}")
        if kind == "toffoli" and len(self.qubits) < 2:
            raise ValueError("toffoli needs at least one control and a target")
        if kind in ("measure", "postselect", "magic") and not self.qubits:
            raise ValueError(f"{kind} needs at least one qubit")
        if kind == "postselect":
            if len(self.values) != len(self.qubits) or any(v not in (0, 1) for v in self.values):
                raise ValueError("postselect needs one 0/1 value per qubit")
        if kind == "magic":
            if self.matrix is None:
                raise ValueError("magic gate needs a matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 2 ** len(self.qubits)
            if m.shape != (dim, dim):
                raise ValueError(f"magic matrix must be {dim}x{dim}, got {m.shape}")
            if not np.allclose(m @ m.conj().T, np.eye(dim), atol=_UNITARY_ATOL):
                raise ValueError(f"magic matrix {self.name!r} is not unitary")
            m = m.copy()
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        elif kind not in _ARITY and kind not in ("toffoli", "measure", "postselect"):
            raise ValueError(f"unknown gate kind {kind!r}")

    @property
    def is_clifford(self) -> bool:
        return self.kind in CLIFFORD_KINDS

    @property
    def is_magic(self) -> bool:
        return self.kind in MAGIC_KINDS

    @property
    def is_event(self) -> bool:
        return self.kind in EVENT_KINDS

    @property
    def weight(self) -> int:
        return len(self.qubits)

    @property
    def is_diagonal(self) -> bool:
        """Magic gates that commute with Z on every wire."""
        if self.kind in ("t", "tdg"):
            return True
        if self.kind == "magic":
            m = self.matrix
            return bool(np.allclose(m, np.diag(np.diag(m)), atol=_UNITARY_ATOL))
        return False

    def unitary(self) -> np.ndarray:
        """Local matrix of a unitary gate, qubit order as in ``qubits``."""
        if self.kind == "magic":
            return np.asarray(self.matrix)
        if self.kind == "t":
            return T_MATRIX
        if self.kind == "tdg":
            return T_MATRIX.conj()
        if self.kind == "toffoli":
            dim = 2 ** len(self.qubits)
            m = np.eye(dim, dtype=complex)
            m[[dim - 2, dim - 1]] = m[[dim - 1, dim - 2]]
            return m
        if self.kind in _CLIFFORD_MATS:
            return _CLIFFORD_MATS[self.kind]
        raise ValueError(f"{self.kind} is not unitary")

    def to_line(self) -> str:
        if self.kind == "magic":
            return "magic " + self.name + " " + " ".join(map(str, self.qubits))
        if self.kind == "postselect":
            return "postselect " + " ".join(f"{q}={v}" for q, v in zip(self.qubits, self.values))
        return self.kind + " " + " ".join(map(str, self.qubits))


_S2 = 1 / np.sqrt(2)
_CLIFFORD_MATS = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1.0 + 0j, -1.0]),
    "cnot": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "cz": np.diag([1.0 + 0j, 1, 1, -1]),
    "swap": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


@dataclass(frozen=True)
class Layer:
    """A Clifford layer (``kind == "clifford"``) or a single event."""

    kind: str
    gates: tuple[Gate, ...]

    @property
    def event(self) -> Gate | None:
        return self.gates[0] if self.kind == "event" else None


class LayeredCircuit:
    """A Clifford+magic circuit on ``n_input`` input and ``n_advice`` advice qubits."""

    def __init__(
        self,
        n_input: int,
        n_advice: int,
        gates: Iterable[Gate],
        output_qubit: int = 0,
        advice_state=None,
    ):
        self.n_input = int(n_input)
        self.n_advice = int(n_advice)
        if self.n_input < 0 or self.n_advice < 0:
            raise ValueError("qubit counts must be non-negative")
        self.gates = tuple(gates)
        self.output_qubit = int(output_qubit)
        n = self.n_qubits
        if n == 0:
            raise ValueError("circuit needs at least one qubit")
        if not 0 <= self.output_qubit < n:
            raise ValueError(f"output qubit {self.output_qubit} out of range for {n} qubits")
        for g in self.gates:
            bad = [q for q in g.qubits if q < 0 or q >= n]
            if bad:
                raise ValueError(f"{g.kind} qubit {bad[0]} out of range for {n} qubits")
        if advice_state is not None:
            advice_state = np.asarray(advice_state, dtype=complex).reshape(-1)
            if advice_state.size != 2**self.n_advice:
                raise ValueError(
                    f"advice state needs {2 ** self.n_advice} amplitudes, got {advice_state.size}"
                )
            if abs(np.linalg.norm(advice_state) - 1) > 1e-10:
                raise ValueError("advice state is not unit norm")
            advice_state = advice_state.copy()
            advice_state.setflags(write=False)
        self.advice_state = advice_state

    @property
    def n_qubits(self) -> int:
        return self.n_input + self.n_advice

    @property
    def layers(self) -> tuple[Layer, ...]:
        out: list[Layer] = []
        block: list[Gate] = []
        for g in self.gates:
            if g.is_event:
                out.append(Layer("clifford", tuple(block)))
                out.append(Layer("event", (g,)))
                block = []
            else:
                block.append(g)
        out.append(Layer("clifford", tuple(block)))
        return tuple(out)

    @property
    def events(self) -> tuple[Gate, ...]:
        return tuple(g for g in self.gates if g.is_event)

    @property
    def magic_count(self) -> int:
        return sum(1 for g in self.gates if g.is_magic)

    @property
    def measurement_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "measure")

    @property
    def c_m(self) -> int:
        """Largest event weight (0 for Clifford-only circuits)."""
        return max((g.weight for g in self.gates if g.is_event), default=0)

    @property
    def is_t_only(self) -> bool:
        return all(g.kind in ("t", "tdg") for g in self.gates if g.is_magic)

    @property
    def t_depth(self) -> int:
        """ASAP count of T/Tdg layers; fails on other magic gates."""
        level = [0] * self.n_qubits
        for g in self.gates:
            if g.kind in ("t", "tdg"):
                level[g.qubits[0]] += 1
            elif g.is_magic:
                raise ValueError(f"T-depth undefined for {g.kind} gates")
            else:
                top = max(level[q] for q in g.qubits)
                for q in g.qubits:
                    level[q] = top
        return max(level)

    @property
    def matrices(self) -> dict[str, np.ndarray]:
        return {g.name: g.matrix for g in self.gates if g.kind == "magic"}

    def initial_advice(self) -> np.ndarray:
        if self.advice_state is not None:
            return np.asarray(self.advice_state)
        v = np.zeros(2**self.n_advice, dtype=complex)
        v[0] = 1
        return v

    def replace(self, **kw) -> "LayeredCircuit":
        args = dict(
            n_input=self.n_input,
            n_advice=self.n_advice,
            gates=self.gates,
            output_qubit=self.output_qubit,
            advice_state=self.advice_state,
        )
        args.update(kw)
        return LayeredCircuit(**args)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayeredCircuit):
            return NotImplemented
        if (self.n_input, self.n_advice, self.output_qubit, self.gates) != (
            other.n_input, other.n_advice, other.output_qubit, other.gates
        ):
            return False
        for a, b in zip(self.gates, other.gates):
            if a.kind == "magic" and not np.array_equal(a.matrix, b.matrix):
                return False
        sa, sb = self.advice_state, other.advice_state
        if (sa is None) != (sb is None):
            return False
        return sa is None or np.array_equal(sa, sb)

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"LayeredCircuit(n_input={self.n_input}, n_advice={self.n_advice}, "
            f"gates={len(self.gates)}, magic={self.magic_count}, output={self.output_qubit})"
        )


# -- adaptive and mixed circuits --------------------------------------------


@dataclass
class AdaptiveCircuit:
    """Decision tree of circuit segments.

    A node with ``branches`` ends in a ``measure`` gate; the branch taken is
    keyed by the tuple of outcomes on the measured qubits. Qubit counts,
    advice and the output qubit are read from the root.
    """

    segment: tuple[Gate, ...]
    branches: dict = field(default_factory=dict)
    n_input: int = 0
    n_advice: int = 0
    output_qubit: int = 0
    advice_state: np.ndarray | None = None

    def __post_init__(self):
        self.segment = tuple(self.segment)
        if self.branches:
            if not self.segment or self.segment[-1].kind != "measure":
                raise ValueError("a branching segment must end with a measurement")
            width = len(self.segment[-1].qubits)
            for key in self.branches:
                if len(key) != width or any(b not in (0, 1) for b in key):
                    raise ValueError(f"branch key {key} does not match {width} outcome bits")

    @property
    def measured(self) -> tuple[int, ...]:
        return self.segment[-1].qubits if self.branches else ()

    def paths(self) -> Iterator[tuple[tuple, tuple[Gate, ...]]]:
        """Yield ``(outcome keys, concatenated gates)`` for each root-to-leaf path."""
        if not self.branches:
            yield (), self.segment
            return
        for key in sorted(self.branches):
            for keys, gates in self.branches[key].paths():
                yield (key,) + keys, self.segment + gates

    def path_circuits(self) -> Iterator[tuple[tuple, LayeredCircuit]]:
        for keys, gates in self.paths():
            yield keys, LayeredCircuit(
                self.n_input, self.n_advice, gates, self.output_qubit, self.advice_state
            )

    @property
    def cost(self) -> int:
        """Worst case over paths of magic gates plus measurements."""
        best = 0
        for _, gates in self.paths():
            best = max(best, sum(1 for g in gates if g.is_magic or g.kind == "measure"))
        return best

    @property
    def c_m(self) -> int:
        return max(
            (g.weight for _, gates in self.paths() for g in gates if g.is_event), default=0
        )

    @property
    def n_qubits(self) -> int:
        return self.n_input + self.n_advice

    def initial_advice(self) -> np.ndarray:
        return LayeredCircuit(
            self.n_input, self.n_advice, (), self.output_qubit, self.advice_state
        ).initial_advice()


class MixedCircuit:
    """Probabilistic mixture of unitary circuits on the same register."""

    def __init__(self, branches: Sequence[tuple[float, LayeredCircuit]]):
        branches = [(float(p), c) for p, c in branches]
        if not branches:
            raise ValueError("mixture needs at least one branch")
        if any(p < 0 for p, _ in branches):
            raise ValueError("branch probabilities must be non-negative")
        total = sum(p for p, _ in branches)
        if abs(total - 1) > 1e-10:
            raise ValueError(f"branch probabilities sum to {total}, not 1")
        shapes = {(c.n_input, c.n_advice, c.output_qubit) for _, c in branches}
        if len(shapes) != 1:
            raise ValueError("mixture branches disagree on register layout")
        self.branches = tuple(branches)

    @property
    def magic_count(self) -> int:
        return max(c.magic_count for _, c in self.branches)

    @property
    def c_m(self) -> int:
        return max(c.c_m for _, c in self.branches)

    @property
    def n_input(self) -> int:
        return self.branches[0][1].n_input


# -- text format ------------------------------------------------------------


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise CircuitSyntaxError(f"expected integer {what}, got {tok!r}", lineno) from None
    if v < 0:
        raise CircuitSyntaxError(f"{what} must be non-negative, got {v}", lineno)
    return v


def _complex_array(blob, where: str) -> np.ndarray:
    try:
        return np.asarray(blob["re"], dtype=float) + 1j * np.asarray(blob["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CircuitSyntaxError(f"{where}: expected {{'re': .., 'im': ..}} ({exc})") from None


def _complex_blob(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def parse_circuit(text: str) -> LayeredCircuit:
    lines = text.splitlines()
    header: dict[str, int] = {}
    pending: list[tuple[int, str, list[str]]] = []
    meta: dict = {}
    for idx, raw in enumerate(lines):
        lineno = idx + 1
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "@json":
            try:
                meta = json.loads("\n".join(lines[idx + 1 :]))
            except json.JSONDecodeError as exc:
                raise CircuitSyntaxError(f"bad JSON block: {exc.msg}", lineno + exc.lineno) from None
            break
        op, *args = line.split()
        op = op.lower()
        if op in ("inputs", "advice", "output"):
            if len(args) != 1:
                raise CircuitSyntaxError(f"{op} takes one integer", lineno)
            if op in header:
                raise CircuitSyntaxError(f"duplicate {op} header", lineno)
            header[op] = _parse_int(args[0], lineno, op)
        else:
            pending.append((lineno, op, args))

    matrices = {
        name: _complex_array(blob, f"matrix {name!r}")
        for name, blob in meta.get("matrices", {}).items()
    }
    gates = []
    for lineno, op, args in pending:
        gates.append(_parse_gate(op, args, lineno, matrices))
    if "inputs" not in header:
        raise CircuitSyntaxError("missing 'inputs' header")
    advice = None
    if "advice_state" in meta:
        advice = _complex_array(meta["advice_state"], "advice_state")
    n_input, n_advice = header["inputs"], header.get("advice", 0)
    n = n_input + n_advice
    for (lineno, _, _), g in zip(pending, gates):
        for q in g.qubits:
            if q >= n:
                raise CircuitSyntaxError(f"qubit {q} out of range for {n} qubits", lineno)
    try:
        return LayeredCircuit(n_input, n_advice, gates, header.get("output", 0), advice)
    except ValueError as exc:
        raise CircuitSyntaxError(str(exc)) from None


def _parse_gate(op: str, args: list[str], lineno: int, matrices: Mapping) -> Gate:
    try:
        if op in _ARITY:
            k = _ARITY[op]
            if len(args) < k:
                missing = "target" if k == 2 and len(args) == 1 else _ARG_NAMES[k]
                raise CircuitSyntaxError(f"{op} is missing its {missing}", lineno)
            if len(args) > k:
                raise CircuitSyntaxError(f"{op} takes {k} qubit(s), got {len(args)}", lineno)
            return Gate(op, tuple(_parse_int(a, lineno, "qubit") for a in args))
        if op == "toffoli":
            if len(args) < 2:
                raise CircuitSyntaxError("toffoli needs controls and a target", lineno)
            return Gate(op, tuple(_parse_int(a, lineno, "qubit") for a in args))
        if op == "measure":
            if not args:
                raise CircuitSyntaxError("measure needs at least one qubit", lineno)
            return Gate(op, tuple(_parse_int(a, lineno, "qubit") for a in args))
        if op == "postselect":
            if not args:
                raise CircuitSyntaxError("postselect needs q=v pairs", lineno)
            qs, vs = [], []
            for a in args:
                q, sep, v = a.partition("=")
                if not sep or v not in ("0", "1"):
                    raise CircuitSyntaxError(f"postselect expects q=v with v in 0/1, got {a!r}", lineno)
                qs.append(_parse_int(q, lineno, "qubit"))
                vs.append(int(v))
            return Gate(op, tuple(qs), values=tuple(vs))
        if op == "magic":
            if len(args) < 2:
                raise CircuitSyntaxError("magic needs a matrix name and qubits", lineno)
            name = args[0]
            if name not in matrices:
                raise CircuitSyntaxError(f"no matrix named {name!r} in the JSON block", lineno)
            qs = tuple(_parse_int(a, lineno, "qubit") for a in args[1:])
            return Gate(op, qs, name=name, matrix=matrices[name])
    except CircuitSyntaxError:
        raise
    except ValueError as exc:
        raise CircuitSyntaxError(str(exc), lineno) from None
    raise CircuitSyntaxError(f"unknown gate {op!r}", lineno)


def serialize_circuit(c: LayeredCircuit) -> str:
    lines = [f"inputs {c.n_input}", f"advice {c.n_advice}", f"output {c.output_qubit}"]
    lines += [g.to_line() for g in c.gates]
    meta: dict = {}
    mats = c.matrices
    if mats:
        meta["matrices"] = {name: _complex_blob(m) for name, m in sorted(mats.items())}
    if c.advice_state is not None:
        meta["advice_state"] = _complex_blob(c.advice_state)
    if meta:
        lines.append("@json")
        lines.append(json.dumps(meta, sort_keys=True))
    return "\n".join(lines) + "\n"


def load_circuit(path) -> LayeredCircuit:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# -- reversible simulation --------------------------------------------------


def simulate_reversible(gates: Iterable[Gate], bits: Sequence[int]) -> tuple[int, ...]:
    """Run a classical-reversible gate list (x, cnot, swap, toffoli) on a bit tuple."""
    b = [int(v) & 1 for v in bits]
    for g in gates:
        q = g.qubits
        if g.kind == "x":
            b[q[0]] ^= 1
        elif g.kind == "cnot":
            b[q[1]] ^= b[q[0]]
        elif g.kind == "swap":
            b[q[0]], b[q[1]] = b[q[1]], b[q[0]]
        elif g.kind == "toffoli":
            if all(b[c] for c in q[:-1]):
                b[q[-1]] ^= 1
        else:
            raise ValueError(f"{g.kind} is not a classical reversible gate")
    return tuple(b)
