"""Compile Clifford+magic circuits into parity decision trees and classical protocols.

The referee simulates the circuit on the all-zero input. Input bits enter the
real circuit as ``X`` operators, so the real state differs from the simulated
one by a Pauli frame whose X/Z exponents are parities of the inputs. Before a
magic gate the referee needs the frame on the acted qubits: those parities are
the queries. Diagonal magic gates (T, Tdg, diagonal matrices) commute with Z,
so only the X parity is queried and Z stays in the frame. The final output
needs only the X parity of the output qubit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import AdaptiveCircuit, Gate, LayeredCircuit, MixedCircuit
from .pauli import AffineForm, SymbolicPauliFrame
from .statevector import (
    OutputDistribution,
    PostselectionError,
    apply_gate,
    initial_state,
    run,
    run_adaptive,
    _slice,
)
from .validation import all_bitstrings, check_bit_matrix, check_bits, parallel_map

__all__ = [
    "InputSplit",
    "ParityQuery",
    "Correction",
    "CompiledPDT",
    "SmpProtocol",
    "RandomizedPDT",
    "TwoWayTranscript",
    "AmbiguousOutputError",
    "compile_unitary",
    "compile_with_postselection",
    "compile_mixed",
    "compile_adaptive",
    "adaptive_protocol_distribution",
    "verify_exhaustive",
    "VerificationReport",
    "PDTCompiler",
]

_TABLE_MAX_DEPTH = 16


class AmbiguousOutputError(ValueError):
    """Output probability exactly 1/2: no majority answer."""


@dataclass(frozen=True)
class InputSplit:
    """Which input qubits belong to Alice (x) and which to Bob (y)."""

    alice: tuple[int, ...]
    bob: tuple[int, ...]

    @classmethod
    def default(cls, n_input: int) -> "InputSplit":
        half = (n_input + 1) // 2
        return cls(tuple(range(half)), tuple(range(half, n_input)))

    @classmethod
    def from_counts(cls, n_alice: int, n_bob: int) -> "InputSplit":
        return cls(tuple(range(n_alice)), tuple(range(n_alice, n_alice + n_bob)))

    @classmethod
    def parse(cls, text: str, n_input: int) -> "InputSplit":
        """``"a,b"``: the first a inputs are Alice's, the next b Bob's."""
        try:
            a, b = (int(t) for t in text.split(","))
        except ValueError:
            raise ValueError(f"split must look like 'a,b', got {text!r}") from None
        if a < 0 or b < 0 or a + b != n_input:
            raise ValueError(f"split {a},{b} does not cover {n_input} inputs")
        return cls.from_counts(a, b)

    @classmethod
    def coerce(cls, split, n_input: int) -> "InputSplit":
        if split is None:
            return cls.default(n_input)
        if isinstance(split, InputSplit):
            out = split
        elif isinstance(split, str):
            return cls.parse(split, n_input)
        else:
            a, b = split
            out = cls.from_counts(a, b) if isinstance(a, int) else cls(tuple(a), tuple(b))
        if sorted(out.alice + out.bob) != list(range(n_input)):
            raise ValueError(f"split {out} is not a partition of {n_input} inputs")
        return out

    def variables(self) -> dict[int, str]:
        names = {q: f"x{j}" for j, q in enumerate(self.alice)}
        names.update({q: f"y{j}" for j, q in enumerate(self.bob)})
        return names

    def join(self, x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
        bits = [0] * (len(self.alice) + len(self.bob))
        for q, b in zip(self.alice, x):
            bits[q] = b
        for q, b in zip(self.bob, y):
            bits[q] = b
        return tuple(bits)

    def separate(self, bits: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(bits[q] for q in self.alice), tuple(bits[q] for q in self.bob)


def _mask_of(bits: Sequence[int]) -> int:
    return sum(int(b) << j for j, b in enumerate(bits))


def _parity(mask: int, word: int) -> int:
    return (mask & word).bit_count() & 1


@dataclass(frozen=True)
class ParityQuery:
    """``<alice_mask, x> + <bob_mask, y> + constant`` over GF(2); bit j of a mask is input j."""

    alice_mask: int
    bob_mask: int
    constant: int = 0

    @classmethod
    def from_form(cls, form: AffineForm) -> "ParityQuery":
        a = b = 0
        for name in form.mask:
            if name[0] == "x":
                a |= 1 << int(name[1:])
            elif name[0] == "y":
                b |= 1 << int(name[1:])
            else:
                raise ValueError(f"query depends on non-input variable {name!r}")
        return cls(a, b, form.constant)

    def alice_share(self, x: Sequence[int]) -> int:
        return _parity(self.alice_mask, _mask_of(x))

    def bob_share(self, y: Sequence[int]) -> int:
        return _parity(self.bob_mask, _mask_of(y))

    def value(self, x: Sequence[int], y: Sequence[int]) -> int:
        return self.alice_share(x) ^ self.bob_share(y) ^ self.constant

    @property
    def is_constant(self) -> bool:
        return self.alice_mask == 0 and self.bob_mask == 0

    def to_dict(self, n_alice: int, n_bob: int) -> dict:
        return {
            "alice_mask": "".join(str((self.alice_mask >> j) & 1) for j in range(n_alice)),
            "bob_mask": "".join(str((self.bob_mask >> j) & 1) for j in range(n_bob)),
            "const": self.constant,
        }


@dataclass(frozen=True)
class Correction:
    """Apply ``X`` or ``Z`` on ``qubit`` before event ``event``, controlled by a query.

    ``query`` indexes the query list; ``None`` means the exponent is the fixed
    bit ``constant`` (a query dropped by ``minimize``).
    """

    event: int
    qubit: int
    pauli: str
    query: int | None
    constant: int = 0


@dataclass
class CompiledPDT:
    """Non-adaptive parity decision tree with a simulating referee."""

    circuit: LayeredCircuit
    split: InputSplit
    queries: tuple[ParityQuery, ...]
    schedule: tuple[Correction, ...]
    output_query: int | None
    output_constant: int = 0
    minimized: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def depth(self) -> int:
        return len(self.queries)

    @property
    def magic_count(self) -> int:
        return self.circuit.magic_count

    @property
    def c_m(self) -> int:
        return self.circuit.c_m

    @property
    def postselected_qubits(self) -> int:
        return sum(g.weight for g in self.circuit.gates if g.kind == "postselect")

    @property
    def depth_bound(self) -> int:
        """Generic depth bound, plus two queries per post-selected qubit."""
        magic_weight = max((g.weight for g in self.circuit.gates if g.is_magic), default=0)
        return 2 * magic_weight * self.magic_count + 1 + 2 * self.postselected_qubits

    @property
    def t_bound(self) -> int | None:
        """``#T + 1`` for circuits whose only magic gates are T/Tdg."""
        if not self.circuit.is_t_only or self.postselected_qubits:
            return None
        return self.magic_count + 1

    @property
    def smp_cost(self) -> int:
        return 2 * self.depth

    @property
    def smp_bound(self) -> int:
        return 2 * self.depth_bound

    def bounds_hold(self) -> bool:
        ok = self.depth <= self.depth_bound and self.smp_cost <= self.smp_bound
        if self.t_bound is not None:
            ok = ok and self.depth <= self.t_bound
        return ok

    def parities(self, x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
        return tuple(q.value(x, y) for q in self.queries)

    def _value(self, parities: Sequence[int], query: int | None, constant: int) -> int:
        return parities[query] if query is not None else constant

    def evaluate(self, parities: Sequence[int]) -> float:
        """Probability of output 1 given the query answers (the referee's g)."""
        key = tuple(int(p) & 1 for p in parities)
        if len(key) != self.depth:
            raise ValueError(f"expected {self.depth} parities, got {len(key)}")
        if key in self._cache:
            return self._cache[key]
        c = self.circuit
        psi = initial_state(c, (0,) * c.n_input)
        by_event: dict[int, list[Correction]] = {}
        for corr in self.schedule:
            by_event.setdefault(corr.event, []).append(corr)
        norm = 1.0
        for idx, g in enumerate(c.gates):
            for corr in by_event.get(idx, ()):
                if self._value(key, corr.query, corr.constant):
                    psi = apply_gate(psi, Gate(corr.pauli, (corr.qubit,)))
            if g.kind == "postselect":
                sel = _slice(psi.ndim, dict(zip(g.qubits, g.values)))
                proj = np.zeros_like(psi)
                proj[sel] = psi[sel]
                p = float(np.sum(np.abs(proj) ** 2))
                if p <= 1e-15:
                    raise PostselectionError("post-selection onto a probability-zero branch")
                psi = proj / np.sqrt(p)
            else:
                psi = apply_gate(psi, g)
        q = c.output_qubit
        p1 = float(np.sum(np.abs(psi[_slice(psi.ndim, {q: 1})]) ** 2)) / norm
        if self._value(key, self.output_query, self.output_constant):
            p1 = 1.0 - p1
        p1 = min(1.0, max(0.0, p1))
        self._cache[key] = p1
        return p1

    def output_probability(self, x: Sequence[int], y: Sequence[int]) -> float:
        return self.evaluate(self.parities(x, y))

    def output_distribution(self, bits: Sequence[int]) -> OutputDistribution:
        x, y = self.split.separate(bits)
        p1 = self.output_probability(x, y)
        return OutputDistribution({"0": 1.0 - p1, "1": p1})

    def predict_one(self, x: Sequence[int], y: Sequence[int]) -> int:
        p1 = self.output_probability(x, y)
        if abs(p1 - 0.5) < 1e-12:
            raise AmbiguousOutputError(f"output probability is exactly 1/2 on x={x}, y={y}")
        return int(p1 > 0.5)

    def probability_table(self) -> np.ndarray:
        """``g`` as a table of output-1 probabilities, indexed by parity bits (query 0 = LSB)."""
        if self.depth > _TABLE_MAX_DEPTH:
            raise ValueError(f"depth {self.depth} too large for an explicit table")
        return np.array(
            [
                self.evaluate(tuple((idx >> j) & 1 for j in range(self.depth)))
                for idx in range(2**self.depth)
            ]
        )

    def truth_table(self) -> np.ndarray:
        """Majority answer per parity pattern; exact ties map to 0.

        Ties can only occur on patterns no input produces or when the circuit
        has error 1/2 on some input.
        """
        return (self.probability_table() > 0.5 + 1e-12).astype(np.uint8)

    def smp(self) -> "SmpProtocol":
        return SmpProtocol(self)

    def to_dict(self) -> dict:
        na, nb = len(self.split.alice), len(self.split.bob)
        return {
            "queries": [q.to_dict(na, nb) for q in self.queries],
            "depth": self.depth,
            "smp_cost_bits": self.smp_cost,
            "bound": self.smp_bound,
            "depth_bound": self.depth_bound,
            "t_bound": self.t_bound,
            "c_M": self.c_m,
            "magic_count": self.magic_count,
            "minimized": self.minimized,
            "bounds_hold": self.bounds_hold(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class SmpProtocol:
    """Simultaneous-message protocol: each player sends its share of every query."""

    def __init__(self, pdt: CompiledPDT):
        self.pdt = pdt

    def alice_message(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(q.alice_share(x) for q in self.pdt.queries)

    def bob_message(self, y: Sequence[int]) -> tuple[int, ...]:
        return tuple(q.bob_share(y) for q in self.pdt.queries)

    def referee(self, alice_msg: Sequence[int], bob_msg: Sequence[int]) -> float:
        """Output-1 probability from the two messages."""
        parities = tuple(
            a ^ b ^ q.constant for a, b, q in zip(alice_msg, bob_msg, self.pdt.queries)
        )
        return self.pdt.evaluate(parities)

    def run(self, x: Sequence[int], y: Sequence[int]) -> float:
        return self.referee(self.alice_message(x), self.bob_message(y))

    @property
    def cost(self) -> int:
        return 2 * self.pdt.depth

    @property
    def bound(self) -> int:
        return self.pdt.smp_bound


def _propagate(circuit: LayeredCircuit, split: InputSplit, *, allow_postselect: bool, minimize: bool) -> CompiledPDT:
    names = split.variables()
    n = circuit.n_qubits
    frame = SymbolicPauliFrame.zero(n)
    for q, name in names.items():
        frame = frame.with_forms(q, x=AffineForm.var(name))
    queries: list[ParityQuery] = []
    schedule: list[Correction] = []

    def query_for(form: AffineForm) -> tuple[int | None, int]:
        pq = ParityQuery.from_form(form)
        if minimize and pq.is_constant:
            return None, pq.constant
        queries.append(pq)
        return len(queries) - 1, 0

    for idx, g in enumerate(circuit.gates):
        if g.is_clifford:
            frame = frame.apply_gate(g.kind, g.qubits)
            continue
        if g.kind == "measure":
            raise ValueError("mid-circuit measurement present; use compile_adaptive")
        if g.kind == "postselect" and not allow_postselect:
            raise ValueError("post-selection present; use compile_with_postselection")
        z_needed = not g.is_diagonal
        for q in g.qubits:
            xf, zf = frame.xs[q], frame.zs[q]
            if not isinstance(xf, AffineForm) or not isinstance(zf, AffineForm):
                raise AssertionError("frame left the affine class")
            qi, c = query_for(xf)
            schedule.append(Correction(idx, q, "x", qi, c))
            if z_needed:
                qi, c = query_for(zf)
                schedule.append(Correction(idx, q, "z", qi, c))
                frame = frame.with_forms(q, x=AffineForm(), z=AffineForm())
            else:
                frame = frame.with_forms(q, x=AffineForm())
    out_q, out_c = query_for(frame.xs[circuit.output_qubit])
    return CompiledPDT(circuit, split, tuple(queries), tuple(schedule), out_q, out_c, minimize)


def compile_unitary(circuit: LayeredCircuit, split=None, minimize: bool = False) -> CompiledPDT:
    """Compile a measurement-free, post-selection-free circuit."""
    split = InputSplit.coerce(split, circuit.n_input)
    return _propagate(circuit, split, allow_postselect=False, minimize=minimize)


def compile_with_postselection(circuit: LayeredCircuit, split=None, minimize: bool = False) -> CompiledPDT:
    """Like :func:`compile_unitary`; post-selected qubits get an X and a Z query each."""
    split = InputSplit.coerce(split, circuit.n_input)
    return _propagate(circuit, split, allow_postselect=True, minimize=minimize)


# -- verification -----------------------------------------------------------


@dataclass
class VerificationReport:
    n_inputs: int
    max_deviation: float
    undefined: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)
    tolerance: float = 1e-9

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "inputs_checked": self.n_inputs,
            "max_deviation": self.max_deviation,
            "undefined_inputs": ["".join(map(str, b)) for b in self.undefined],
            "mismatches": ["".join(map(str, b)) for b in self.mismatches],
            "ok": self.ok,
        }


def verify_exhaustive(
    circuit: LayeredCircuit,
    pdt: CompiledPDT,
    inputs: Iterable[Sequence[int]] | None = None,
    tolerance: float = 1e-9,
) -> VerificationReport:
    """Compare the compiled referee with the statevector oracle input by input."""
    items = list(inputs) if inputs is not None else list(all_bitstrings(circuit.n_input))

    def check(bits):
        try:
            want = run(circuit, bits).p1
        except PostselectionError:
            return bits, None
        return bits, abs(pdt.output_distribution(bits).p1 - want)

    report = VerificationReport(0, 0.0, tolerance=tolerance)
    for bits, dev in parallel_map(check, items):
        if dev is None:
            report.undefined.append(tuple(bits))
            continue
        report.n_inputs += 1
        report.max_deviation = max(report.max_deviation, dev)
        if dev > tolerance:
            report.mismatches.append(tuple(bits))
    return report


# -- mixtures ---------------------------------------------------------------


class RandomizedPDT:
    """Distribution over compiled PDTs, sampled with public randomness."""

    def __init__(self, branches: Sequence[tuple[float, CompiledPDT]]):
        self.branches = tuple(branches)

    def output_probability(self, x: Sequence[int], y: Sequence[int]) -> float:
        return sum(p * b.output_probability(x, y) for p, b in self.branches)

    def success_probability(self, x: Sequence[int], y: Sequence[int], value: int) -> float:
        p1 = self.output_probability(x, y)
        return p1 if value else 1.0 - p1

    def epsilon(self, x: Sequence[int], y: Sequence[int], value: int) -> float:
        return 1.0 - self.success_probability(x, y, value)

    def sample(self, rng: np.random.Generator) -> CompiledPDT:
        probs = np.array([p for p, _ in self.branches])
        return self.branches[int(rng.choice(len(probs), p=probs / probs.sum()))][1]

    @property
    def depth(self) -> int:
        return max(b.depth for _, b in self.branches)

    @property
    def worst_cost(self) -> int:
        return max(b.smp_cost for _, b in self.branches)

    def cost_bound(self, mixed_magic: int, c_m: int) -> int:
        return 4 * c_m * mixed_magic + 2


def compile_mixed(mixed: MixedCircuit, split=None, minimize: bool = False) -> RandomizedPDT:
    return RandomizedPDT(
        [(p, compile_unitary(c, split, minimize)) for p, c in mixed.branches]
    )


# -- adaptive circuits ------------------------------------------------------


@dataclass
class TwoWayTranscript:
    """Messages ``(sender, bits)`` in order; ``sender`` is ``"alice"`` or ``"bob"``."""

    messages: list = field(default_factory=list)
    outcomes: tuple = ()

    def send(self, sender: str, bits: Sequence[int]) -> None:
        self.messages.append((sender, tuple(int(b) for b in bits)))

    @property
    def cost(self) -> int:
        return sum(len(bits) for _, bits in self.messages)

    def to_dict(self) -> dict:
        return {
            "messages": [{"from": s, "bits": "".join(map(str, b))} for s, b in self.messages],
            "cost_bits": self.cost,
        }


def _y_frame(n_qubits: int, split: InputSplit) -> SymbolicPauliFrame:
    frame = SymbolicPauliFrame.zero(n_qubits)
    for j, q in enumerate(split.bob):
        frame = frame.with_forms(q, x=AffineForm.var(f"y{j}"))
    return frame


def _adaptive_protocol(
    adaptive: AdaptiveCircuit,
    split: InputSplit,
    x: Sequence[int],
    y: Sequence[int],
    choose,
):
    """Shared driver. ``choose(probs)`` picks a measurement outcome tuple.

    Alice simulates the circuit with Bob's inputs set to 0; Bob tracks the
    frame in his variables and sends its value before each event.
    """
    assign = {f"y{j}": int(b) for j, b in enumerate(y)}
    bits = split.join(x, (0,) * len(split.bob))
    psi = initial_state(adaptive, bits)
    frame = _y_frame(adaptive.n_qubits, split)
    transcript = TwoWayTranscript()
    node = adaptive
    weight = 1.0
    outcomes = []
    while True:
        for g in node.segment:
            if g.is_clifford:
                frame = frame.apply_gate(g.kind, g.qubits)
                psi = apply_gate(psi, g)
            elif g.is_magic:
                sent = []
                for q in g.qubits:
                    xb = frame.xs[q].evaluate(assign)
                    sent.append(xb)
                    if xb:
                        psi = apply_gate(psi, Gate("x", (q,)))
                    if not g.is_diagonal:
                        zb = frame.zs[q].evaluate(assign)
                        sent.append(zb)
                        if zb:
                            psi = apply_gate(psi, Gate("z", (q,)))
                        frame = frame.with_forms(q, x=AffineForm(), z=AffineForm())
                    else:
                        frame = frame.with_forms(q, x=AffineForm())
                transcript.send("bob", sent)
                psi = apply_gate(psi, g)
            elif g.kind == "measure":
                sent = []
                for q in g.qubits:
                    xb = frame.xs[q].evaluate(assign)
                    sent.append(xb)
                    if xb:
                        psi = apply_gate(psi, Gate("x", (q,)))
                transcript.send("bob", sent)
                probs = {}
                for vals in all_bitstrings(len(g.qubits)):
                    sel = _slice(psi.ndim, dict(zip(g.qubits, vals)))
                    probs[vals] = float(np.sum(np.abs(psi[sel]) ** 2))
                vals, p = choose(probs)
                sel = _slice(psi.ndim, dict(zip(g.qubits, vals)))
                proj = np.zeros_like(psi)
                proj[sel] = psi[sel]
                psi = proj / np.sqrt(p)
                weight *= p
                outcomes.append(vals)
                transcript.send("alice", vals)
                for q in g.qubits:
                    frame = frame.with_forms(q, x=AffineForm(), z=AffineForm())
            else:
                raise ValueError(f"{g.kind} is not supported in adaptive circuits")
        if not node.branches:
            break
        key = outcomes[-1]
        if key not in node.branches:
            raise KeyError(f"no branch for measurement outcome {key}")
        node = node.branches[key]
    out_q = adaptive.output_qubit
    flip = frame.xs[out_q].evaluate(assign)
    transcript.send("bob", (flip,))
    p1 = float(np.sum(np.abs(psi[_slice(psi.ndim, {out_q: 1})]) ** 2))
    if flip:
        p1 = 1.0 - p1
    transcript.outcomes = tuple(outcomes)
    return transcript, p1, weight


def compile_adaptive(
    adaptive: AdaptiveCircuit,
    split=None,
    x: Sequence[int] = (),
    y: Sequence[int] = (),
    seed: int | np.random.Generator | None = None,
) -> tuple[TwoWayTranscript, int]:
    """Run the two-way protocol once; returns the transcript and Alice's output bit."""
    split = InputSplit.coerce(split, adaptive.n_input)
    x = check_bits(x, len(split.alice), "x")
    y = check_bits(y, len(split.bob), "y")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def choose(probs):
        keys = list(probs)
        p = np.array([probs[k] for k in keys])
        i = int(rng.choice(len(keys), p=p / p.sum()))
        return keys[i], probs[keys[i]]

    transcript, p1, _ = _adaptive_protocol(adaptive, split, x, y, choose)
    return transcript, int(rng.random() < p1)


def adaptive_protocol_distribution(adaptive: AdaptiveCircuit, split, x, y) -> tuple[OutputDistribution, int]:
    """Exact output distribution of the two-way protocol, and its worst transcript cost."""
    split = InputSplit.coerce(split, adaptive.n_input)
    total = {"0": 0.0, "1": 0.0}
    worst = 0

    def explore(prefix: tuple):
        nonlocal worst
        pos = [0]
        forced = list(prefix)
        seen: list = []

        def choose(probs):
            i = pos[0]
            pos[0] += 1
            if i < len(forced):
                vals = forced[i]
            else:
                live = [k for k, p in probs.items() if p > 1e-15]
                seen.append(live)
                vals = live[0]
                forced.append(vals)
            return vals, probs[vals]

        tr, p1, w = _adaptive_protocol(adaptive, split, x, y, choose)
        return tr, p1, w, forced, seen

    stack = [()]
    while stack:
        prefix = stack.pop()
        tr, p1, w, taken, seen = explore(prefix)
        worst = max(worst, tr.cost)
        total["1"] += w * p1
        total["0"] += w * (1 - p1)
        # schedule siblings of every freshly chosen outcome
        base = len(prefix)
        for depth, live in enumerate(seen):
            for alt in live[1:]:
                stack.append(tuple(taken[: base + depth]) + (alt,))
    return OutputDistribution(total), worst


def adaptive_cost_bound(adaptive: AdaptiveCircuit) -> int:
    return 2 * adaptive.c_m * adaptive.cost + 1


__all__.append("adaptive_cost_bound")


# -- estimator wrapper ------------------------------------------------------


class PDTCompiler(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Estimator view of the compiler.

    ``fit(circuit)`` compiles; ``transform`` maps input rows to parity rows;
    ``predict``/``predict_proba`` run the referee.
    """

    def __init__(self, split=None, minimize: bool = False, postselection: bool = False):
        self.split = split
        self.minimize = minimize
        self.postselection = postselection

    def fit(self, X: LayeredCircuit, y=None):
        if not isinstance(X, LayeredCircuit):
            raise TypeError("PDTCompiler.fit expects a LayeredCircuit")
        compile_fn = compile_with_postselection if self.postselection else compile_unitary
        self.pdt_ = compile_fn(X, self.split, self.minimize)
        self.n_features_in_ = X.n_input
        self.classes_ = np.array([0, 1])
        return self

    def _rows(self, X) -> np.ndarray:
        check_is_fitted(self, "pdt_")
        return check_bit_matrix(X, self.n_features_in_)

    def transform(self, X) -> np.ndarray:
        rows = self._rows(X)
        out = np.zeros((rows.shape[0], self.pdt_.depth), dtype=np.uint8)
        for i, bits in enumerate(rows):
            x, y = self.pdt_.split.separate(tuple(bits))
            out[i] = self.pdt_.parities(x, y)
        return out

    def predict_proba(self, X) -> np.ndarray:
        par = self.transform(X)
        p1 = np.array([self.pdt_.evaluate(tuple(r)) for r in par])
        return np.column_stack([1 - p1, p1])

    def predict(self, X) -> np.ndarray:
        p1 = self.predict_proba(X)[:, 1]
        if np.any(np.abs(p1 - 0.5) < 1e-12):
            raise AmbiguousOutputError("output probability exactly 1/2 on some input")
        return (p1 > 0.5).astype(np.uint8)
