"""Turn a quantum simultaneous-message protocol into a private classical one.

Setting: Alice and Bob prepare message registers from their inputs and shared
EPR pairs; the referee applies a Clifford+T circuit and measures one qubit.

Transformed protocol: Bob teleports his message to Alice. Alice runs the
referee circuit herself while a symbolic Pauli frame, written as GF(2)
polynomials of the Bell outcomes, records the corrections she cannot apply.
A T gate on a qubit with X-exponent ``a`` leaves an ``S^a`` error
(``T X = S X T`` up to phase); the players remove it with a no-communication
gadget that consumes fresh EPR pairs. Finally Alice measures the output qubit
and sends the bit ``s``; both send all their Bell outcomes ``r``. The referee
outputs ``s + p(r)`` where ``p`` is the frame's X-exponent on the output qubit.

Teleportations are simulated lazily: a Bell outcome is uniform whatever the
state, and the teleported qubit differs from the input by ``X^u Z^v``, so the
simulator draws ``(u, v)`` and applies the Pauli to a dense logical register.
EPR pairs that end up in closed loops of a garden-hose gadget are sampled from
their exact joint law with a small dense simulation of the loop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import CircuitSyntaxError, Gate, LayeredCircuit, parse_circuit, serialize_circuit
from .gardenhose import MAX_SEARCH_BITS, TAP, GardenHoseProtocol, _walk, brute_force_gh, tabular_gh
from .gardenhose import evaluate as gh_evaluate
from .pauli import BoolFun, GF2Poly, SymbolicPauliFrame, as_poly
from .statevector import BELL_STATES, _slice, apply_gate, apply_pauli
from .validation import all_bitstrings, check_bit_matrix, check_bits

__all__ = [
    "QSmpSpec",
    "VarPool",
    "TeleportEvent",
    "PGadget",
    "BellMeasurement",
    "GadgetNetwork",
    "xor_pgadget",
    "gh_pgadget",
    "local_pgadget",
    "PsmProtocol",
    "TranscriptRecord",
    "PrivacyReport",
    "InputAudit",
    "transform",
    "run_transcript",
    "run_many",
    "exact_transcript_distribution",
    "audit_privacy",
    "bit_uniformity_pvalues",
    "parse_spec",
    "serialize_spec",
    "load_spec",
    "PsmTransformer",
    "MAX_T_DEPTH",
    "MAX_LOGICAL_QUBITS",
]

MAX_T_DEPTH = 2
MAX_LOGICAL_QUBITS = 12
_MAX_REGISTER = 22
_CHUNK = 10_000
_MAX_RING = 8
_MAX_CONDITION_VARS = 12

_PDAG = {"t": "sdg", "tdg": "s"}


# -- the quantum protocol ------------------------------------------------------


@dataclass
class QSmpSpec:
    """Quantum simultaneous-message protocol with shared EPR pairs.

    Each player's local register is ``inputs + ancillas + EPR halves``: the
    prep circuit has ``n_input`` input bits and ``n_advice = ancillas + n_epr``
    advice qubits, the last ``n_epr`` of which are halves of the shared pairs
    (pair j joins Alice's j-th half with Bob's j-th half). ``*_message`` lists
    the local qubits sent to the referee. The referee circuit's inputs are
    Alice's message followed by Bob's; its advice qubits are ancillas in |0>.
    """

    alice_prep: LayeredCircuit
    bob_prep: LayeredCircuit
    alice_message: tuple[int, ...]
    bob_message: tuple[int, ...]
    referee: LayeredCircuit
    n_epr: int = 0
    epsilon: float = 0.0
    target: np.ndarray | None = None

    def __post_init__(self):
        self.alice_message = tuple(int(q) for q in self.alice_message)
        self.bob_message = tuple(int(q) for q in self.bob_message)
        for who, prep, msg in (("alice", self.alice_prep, self.alice_message), ("bob", self.bob_prep, self.bob_message)):
            if prep.n_advice < self.n_epr:
                raise ValueError(f"{who} register has fewer advice qubits than EPR halves")
            if prep.advice_state is not None:
                raise ValueError(f"{who} ancillas must start in |0>; declare EPR pairs instead")
            if len(set(msg)) != len(msg) or any(q < 0 or q >= prep.n_qubits for q in msg):
                raise ValueError(f"{who} message qubits are invalid: {msg}")
            for g in prep.gates:
                if g.kind in ("measure", "postselect"):
                    raise ValueError(f"{who} preparation may not measure")
        if self.referee.n_input != self.m:
            raise ValueError(
                f"referee expects {self.referee.n_input} message qubits, players send {self.m}"
            )
        if self.referee.advice_state is not None:
            raise ValueError("referee ancillas must start in |0>")
        for g in self.referee.gates:
            if not (g.is_clifford or g.kind in ("t", "tdg")):
                raise ValueError(f"referee gate {g.kind} is not Clifford+T")
        if self.target is not None:
            t = np.asarray(self.target, dtype=np.uint8)
            if t.shape != (2**self.n_x, 2**self.n_y):
                raise ValueError(f"target table must have shape {(2 ** self.n_x, 2 ** self.n_y)}")
            self.target = t
        if self.n_qubits > _MAX_REGISTER:
            raise ValueError(f"{self.n_qubits} qubits exceeds the dense cap of {_MAX_REGISTER}")

    @property
    def n_x(self) -> int:
        return self.alice_prep.n_input

    @property
    def n_y(self) -> int:
        return self.bob_prep.n_input

    @property
    def m_a(self) -> int:
        return len(self.alice_message)

    @property
    def m_b(self) -> int:
        return len(self.bob_message)

    @property
    def m(self) -> int:
        return self.m_a + self.m_b

    @property
    def a(self) -> int:
        return self.referee.n_advice

    @property
    def t_depth(self) -> int:
        return self.referee.t_depth

    @property
    def n_alice_local(self) -> int:
        return self.alice_prep.n_qubits

    @property
    def n_bob_local(self) -> int:
        return self.bob_prep.n_qubits

    @property
    def n_qubits(self) -> int:
        return self.n_alice_local + self.n_bob_local + self.a

    def referee_to_global(self, q: int) -> int:
        if q < self.m_a:
            return self.alice_message[q]
        if q < self.m:
            return self.n_alice_local + self.bob_message[q - self.m_a]
        return self.n_alice_local + self.n_bob_local + (q - self.m)

    def global_referee_gates(self) -> list[Gate]:
        return [
            Gate(g.kind, tuple(self.referee_to_global(q) for q in g.qubits)) for g in self.referee.gates
        ]

    @property
    def output_global(self) -> int:
        return self.referee_to_global(self.referee.output_qubit)

    def prepared_state(self, x: Sequence[int], y: Sequence[int]) -> np.ndarray:
        """Dense tensor of all qubits after both preparations."""
        x = check_bits(x, self.n_x, "x")
        y = check_bits(y, self.n_y, "y")
        n = self.n_qubits
        psi = np.zeros((2,) * n, dtype=complex)
        idx = [0] * n
        for j, b in enumerate(x):
            idx[j] = b
        for j, b in enumerate(y):
            idx[self.n_alice_local + j] = b
        psi[tuple(idx)] = 1
        a0 = self.n_alice_local - self.n_epr
        b0 = self.n_alice_local + self.n_bob_local - self.n_epr
        for j in range(self.n_epr):
            psi = apply_gate(psi, Gate("h", (a0 + j,)))
            psi = apply_gate(psi, Gate("cnot", (a0 + j, b0 + j)))
        for g in self.alice_prep.gates:
            psi = apply_gate(psi, g)
        off = self.n_alice_local
        for g in self.bob_prep.gates:
            psi = apply_gate(
                psi, Gate(g.kind, tuple(q + off for q in g.qubits), name=g.name, matrix=g.matrix)
            )
        return psi

    def output_probability(self, x: Sequence[int], y: Sequence[int]) -> float:
        """Exact probability that the referee outputs 1."""
        psi = self.prepared_state(x, y)
        for g in self.global_referee_gates():
            psi = apply_gate(psi, g)
        return float(np.sum(np.abs(psi[_slice(psi.ndim, {self.output_global: 1})]) ** 2))

    def target_value(self, x: Sequence[int], y: Sequence[int]) -> int:
        if self.target is not None:
            return int(self.target[_bits_to_int(x), _bits_to_int(y)])
        return int(self.output_probability(x, y) > 0.5)

    def error(self, x: Sequence[int], y: Sequence[int]) -> float:
        p1 = self.output_probability(x, y)
        return 1.0 - p1 if self.target_value(x, y) else p1

    def inputs(self):
        for x in all_bitstrings(self.n_x):
            for y in all_bitstrings(self.n_y):
                yield x, y


def _bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


# -- outcome variables -------------------------------------------------------


class VarPool:
    """Allocates Bell-outcome variables ``r0, r1, ..`` and records who holds them."""

    def __init__(self):
        self.names: list[str] = []
        self.owner: dict[str, str] = {}

    def new(self, owner: str) -> str:
        if owner not in ("alice", "bob"):
            raise ValueError(f"unknown owner {owner!r}")
        name = f"r{len(self.names)}"
        self.names.append(name)
        self.owner[name] = owner
        return name

    def pair(self, owner: str) -> tuple[str, str]:
        return self.new(owner), self.new(owner)

    def __len__(self) -> int:
        return len(self.names)

    def split(self, form) -> tuple[tuple[str, ...], tuple[str, ...]]:
        names = as_poly(form).variables
        return (
            tuple(v for v in names if self.owner[v] == "alice"),
            tuple(v for v in names if self.owner[v] == "bob"),
        )


@dataclass(frozen=True)
class TeleportEvent:
    """Teleport ``qubit``; the new frame gains ``X^u Z^v``."""

    qubit: int
    u: str
    v: str
    owner: str


# -- gadgets -----------------------------------------------------------------


@dataclass(frozen=True)
class BellMeasurement:
    party: str
    ends: tuple[str, str]
    u: str
    v: str


@dataclass
class GadgetNetwork:
    """Physical layout of a garden-hose gadget for one assignment of its inputs.

    Ends are ``t`` (the target qubit), ``A<j>``/``B<j>`` (forward copy) and
    ``C<j>``/``D<j>`` (mirror copy; C on Alice's side). ``pdag_ends`` receive
    the correction before measurement; the qubit finishes at ``final``.
    """

    measurements: list[BellMeasurement]
    pdag_ends: tuple[str, ...]
    final: str
    output: int
    pdag_gate: str = "sdg"


@dataclass
class _Ring:
    bms: list  # BellMeasurement in ring order; the last one is sampled from `table`
    table: np.ndarray  # (4**(L-1), 4) law of the last outcome given the others


@dataclass
class _GhCase:
    path: list  # ("pauli", u, v) or ("pdag",)
    rings: list
    gx: GF2Poly
    hz: GF2Poly


@dataclass
class PGadget:
    """Removes ``P^c`` from a qubit without communication, where ``c`` is the condition.

    Afterwards the qubit's frame gains ``X^g Z^h`` (phase dropped).
    """

    kind: str  # "skip", "local", "xor" or "gh"
    target: int
    condition: GF2Poly
    pdag: str  # the gate applied to undo P ("sdg" removes S, "s" removes Sdg)
    g: GF2Poly
    h: GF2Poly
    epr_pairs: int
    variables: tuple[str, ...] = ()
    alice_part: GF2Poly | None = None
    bob_part: GF2Poly | None = None
    gh: GardenHoseProtocol | None = None
    alice_vars: tuple[str, ...] = ()
    bob_vars: tuple[str, ...] = ()
    cases: dict = field(default_factory=dict, repr=False)
    networks: dict = field(default_factory=dict, repr=False)

    @property
    def bits(self) -> int:
        return 2 * self.epr_pairs

    @property
    def communication(self) -> int:
        """Messages exchanged between the players inside the gadget (always 0)."""
        return 0


def _zero() -> GF2Poly:
    return GF2Poly()


def local_pgadget(target: int, condition, pdag: str = "sdg") -> PGadget:
    """Alice knows the condition and applies the correction herself."""
    cond = as_poly(condition)
    return PGadget("local" if not cond.is_zero() else "skip", target, cond, pdag, _zero(), _zero(), 0)


def xor_pgadget(target: int, a_part, b_part, pool: VarPool, pdag: str = "sdg") -> PGadget:
    """Ping-pong gadget for a condition ``a_part + b_part``.

    Alice applies ``Pdag^a`` and teleports to Bob (outcome u1, v1); Bob
    applies ``Pdag^b`` and teleports back (u2, v2). Commuting the corrections
    through the teleportation Paulis gives

        g = u1 + u2,    h = v1 + v2 + b*u1 + a*b.
    """
    a = as_poly(a_part)
    b = as_poly(b_part)
    own_a, own_b = pool.split(a), pool.split(b)
    if own_a[1] or own_b[0]:
        raise ValueError("condition is not XOR-separable between the players")
    u1, v1 = pool.pair("alice")
    u2, v2 = pool.pair("bob")
    U1, V1, U2, V2 = (GF2Poly.var(n) for n in (u1, v1, u2, v2))
    g = U1 ^ U2
    h = V1 ^ V2 ^ (b & U1) ^ (a & b)
    return PGadget(
        "xor", target, a ^ b, pdag, g, h, 2, (u1, v1, u2, v2), alice_part=a, bob_part=b
    )


def _pipe_partner(end: str) -> str:
    return {"A": "B", "B": "A", "C": "D", "D": "C"}[end[0]] + end[1:]


def _network(gh: GardenHoseProtocol, a_in, b_in, a_slots, b_slots, pdag: str) -> GadgetNetwork:
    ma = gh.alice_matching(a_in)
    mb = gh.bob_matching(b_in)
    s = gh.pipes
    alice_pairs, bob_pairs = [], []
    tap_end = ma.get(TAP)
    for x1, x2 in gh.alice[tuple(a_in)]:
        if TAP in (x1, x2):
            alice_pairs.append(("t", x2 if x1 == TAP else x1))
        else:
            alice_pairs.append((x1, x2))
            alice_pairs.append(("C" + x1[1:], "C" + x2[1:]))
    for j in range(s):
        if f"A{j}" not in ma:
            alice_pairs.append((f"A{j}", f"C{j}"))
    pdag_ends = []
    for x1, x2 in gh.bob[tuple(b_in)]:
        bob_pairs.append((x1, x2))
        bob_pairs.append(("D" + x1[1:], "D" + x2[1:]))
    for j in range(s):
        if f"B{j}" not in mb:
            pdag_ends.append(f"B{j}")
            bob_pairs.append((f"B{j}", f"D{j}"))
    if len(alice_pairs) != s or len(bob_pairs) != s:
        raise AssertionError("gadget network does not use exactly s measurements per player")
    bms = []
    for party, pairs, slots in (("alice", alice_pairs, a_slots), ("bob", bob_pairs, b_slots)):
        for k, pair in enumerate(sorted(pairs)):
            bms.append(BellMeasurement(party, pair, slots[2 * k], slots[2 * k + 1]))
    final = "t" if tap_end is None else "C" + tap_end[1:]
    return GadgetNetwork(bms, tuple(pdag_ends), final, _walk(ma, mb, s).output, pdag)


def _trace(net: GadgetNetwork) -> _GhCase:
    """Follow the target qubit through the network, then group the rest into loops."""
    bm_of = {}
    for bm in net.measurements:
        bm_of[bm.ends[0]] = bm
        bm_of[bm.ends[1]] = bm
    pdag = set(net.pdag_ends)
    path = []
    gx, hz = _zero(), _zero()
    used = set()
    cur = "t"
    while cur in bm_of:
        bm = bm_of[cur]
        used.add(bm)
        other = bm.ends[1] if bm.ends[0] == cur else bm.ends[0]
        path.append(("pauli", bm.u, bm.v))
        gx ^= GF2Poly.var(bm.u)
        hz ^= GF2Poly.var(bm.v)
        cur = _pipe_partner(other)
        if cur in pdag:
            path.append(("pdag",))
            hz ^= gx
    if cur != net.final:
        raise AssertionError(f"qubit finished at {cur}, expected {net.final}")
    rings = []
    for start in net.measurements:
        if start in used:
            continue
        ring = []
        bm, end = start, start.ends[1]
        while True:
            ring.append(bm)
            used.add(bm)
            entry = _pipe_partner(end)
            bm = bm_of[entry]
            if bm is start:
                break
            end = bm.ends[1] if bm.ends[0] == entry else bm.ends[0]
        rings.append(_ring_law(ring, pdag, net.pdag_gate))
    return _GhCase(path, rings, gx, hz)


def _ring_law(ring: list, pdag_ends, pdag_gate: str) -> _Ring:
    """Exact joint law of the Bell outcomes on a closed loop of EPR pairs.

    All but the last outcome are uniform; the table holds the law of the
    last one given the others (index ``sum d_k 4^k``, ``d = 2u + v``).
    """
    L = len(ring)
    if L > _MAX_RING:
        raise ValueError(f"loop of {L} pairs exceeds the sampling cap of {_MAX_RING}")
    ends = [e for bm in ring for e in bm.ends]
    axis = {e: k for k, e in enumerate(ends)}
    done = set()
    # product of |Phi+> over the pipes
    psi = np.array(1.0 + 0j)
    order = []
    for e in ends:
        if e in done:
            continue
        f = _pipe_partner(e)
        done |= {e, f}
        order += [e, f]
        psi = np.multiply.outer(psi, np.eye(2, dtype=complex) / np.sqrt(2))
    psi = np.moveaxis(psi, list(range(len(order))), [axis[e] for e in order])
    for e in ends:
        if e in pdag_ends:
            psi = apply_gate(psi, Gate(pdag_gate, (axis[e],)))
    bras = np.stack([BELL_STATES[(u, v)].conj().reshape(2, 2) for u in (0, 1) for v in (0, 1)])
    amp = psi
    # ends are laid out measurement by measurement, so each contraction eats
    # the two leading axes and appends an outcome axis at the back
    for _ in ring:
        amp = np.tensordot(amp, bras, axes=([0, 1], [1, 2]))
    joint = np.abs(amp) ** 2
    marg = joint.sum(axis=-1)
    if not np.allclose(marg, 4.0 ** -(L - 1)):
        raise AssertionError("loop outcomes before the last are not uniform")
    table = np.transpose(joint, list(range(L - 2, -1, -1)) + [L - 1]).reshape(-1, 4)
    table = table / table.sum(axis=1, keepdims=True)
    return _Ring(list(ring), table)


def gh_pgadget(
    target: int,
    condition,
    gh: GardenHoseProtocol,
    alice_vars: Sequence[str],
    bob_vars: Sequence[str],
    pool: VarPool,
    pdag: str = "sdg",
) -> PGadget:
    """Garden-hose gadget: the qubit follows the water through EPR pipes.

    Two copies of the protocol's pipes are used. In the forward copy the
    qubit is teleported along the water path; Bob applies the correction at
    each of his open ends, so it acts exactly when the water spills on his
    side. Every open end of the forward copy is measured together with the
    same end of the mirror copy, which walks the qubit back along the
    reversed path to Alice's tap end. Each player makes ``s`` Bell
    measurements on ``2s`` pairs, whatever the inputs.
    """
    cond = as_poly(condition)
    alice_vars, bob_vars = tuple(alice_vars), tuple(bob_vars)
    if set(cond.variables) - set(alice_vars) - set(bob_vars):
        raise ValueError("condition uses variables outside the declared split")
    if len(alice_vars) + len(bob_vars) > _MAX_CONDITION_VARS:
        raise ValueError("too many condition variables for a garden-hose gadget")
    if (gh.n_alice_bits, gh.n_bob_bits) != (len(alice_vars), len(bob_vars)):
        raise ValueError("garden-hose protocol does not match the condition's inputs")
    for a_in in all_bitstrings(len(alice_vars)):
        for b_in in all_bitstrings(len(bob_vars)):
            assign = dict(zip(alice_vars, a_in)) | dict(zip(bob_vars, b_in))
            if gh_evaluate(gh, a_in, b_in).output != cond.evaluate(assign):
                raise ValueError(f"garden-hose protocol disagrees with the condition at {assign}")
    s = gh.pipes
    a_slots = [pool.new("alice") for _ in range(2 * s)]
    b_slots = [pool.new("bob") for _ in range(2 * s)]
    g, h = _zero(), _zero()
    cases, networks = {}, {}
    for a_in in all_bitstrings(len(alice_vars)):
        for b_in in all_bitstrings(len(bob_vars)):
            net = _network(gh, a_in, b_in, a_slots, b_slots, pdag)
            case = _trace(net)
            key = tuple(a_in) + tuple(b_in)
            cases[key] = case
            networks[key] = net
            ind = GF2Poly.indicator(dict(zip(alice_vars + bob_vars, key)))
            g ^= ind & case.gx
            h ^= ind & case.hz
    return PGadget(
        "gh", target, cond, pdag, g, h, 2 * s, tuple(a_slots + b_slots),
        gh=gh, alice_vars=alice_vars, bob_vars=bob_vars, cases=cases, networks=networks,
    )


def _condition_protocol(cond: GF2Poly, alice_vars, bob_vars) -> GardenHoseProtocol:
    def f(a_in, b_in):
        return cond.evaluate(dict(zip(alice_vars, a_in)) | dict(zip(bob_vars, b_in)))

    if len(alice_vars) <= MAX_SEARCH_BITS and len(bob_vars) <= MAX_SEARCH_BITS:
        found = brute_force_gh(f, len(alice_vars), len(bob_vars), max_pipes=3)
        if found is not None:
            return found
    return tabular_gh(f, len(alice_vars), len(bob_vars))


# -- the transformed protocol -------------------------------------------------


@dataclass
class PsmProtocol:
    spec: QSmpSpec
    pool: VarPool
    ops: list
    decoder: GF2Poly
    gadgets: list
    teleports: list

    @property
    def n_vars(self) -> int:
        return len(self.pool)

    @property
    def epr_pairs(self) -> int:
        """Fresh pairs used by the transformation (pairs declared by the QSmpSpec not included)."""
        return len(self.teleports) + sum(g.epr_pairs for g in self.gadgets)

    @property
    def bits_sent(self) -> int:
        return self.n_vars + 1

    @property
    def alice_bits(self) -> int:
        return sum(1 for v in self.pool.names if self.pool.owner[v] == "alice") + 1

    @property
    def bob_bits(self) -> int:
        return sum(1 for v in self.pool.names if self.pool.owner[v] == "bob")

    @property
    def quantum_messages_to_referee(self) -> int:
        return 0

    @property
    def logical_qubits(self) -> int:
        return self.spec.m + self.spec.a

    @property
    def t_depth(self) -> int:
        return self.spec.t_depth

    @property
    def bound_constant(self) -> int:
        return 2 * self.logical_qubits + 1

    @property
    def bound_value(self) -> float:
        return self.bound_constant * float(68 * self.logical_qubits) ** self.t_depth

    @property
    def within_68_bound(self) -> bool:
        return self.bits_sent <= self.bound_value

    @property
    def decoder_is_affine(self) -> bool:
        return self.decoder.is_affine()

    def decoder_boolfun(self) -> BoolFun:
        return BoolFun.from_form(self.decoder, self.decoder.variables)

    def cost_report(self) -> dict:
        return {
            "bits_sent": self.bits_sent,
            "alice_bits": self.alice_bits,
            "bob_bits": self.bob_bits,
            "epr_pairs": self.epr_pairs,
            "spec_epr_pairs": self.spec.n_epr,
            "t_depth": self.t_depth,
            "logical_qubits": self.logical_qubits,
            "gadgets": {k: sum(1 for g in self.gadgets if g.kind == k) for k in ("skip", "local", "xor", "gh")},
            "bound_constant": self.bound_constant,
            "ratio_to_68_bound": self.bits_sent / float(68 * self.logical_qubits) ** self.t_depth,
            "within_68_bound": self.within_68_bound,
            "decoder_affine": self.decoder_is_affine,
            "quantum_messages_to_referee": 0,
        }


def transform(spec: QSmpSpec) -> PsmProtocol:
    d = spec.t_depth
    if d > MAX_T_DEPTH:
        raise ValueError(f"referee T-depth {d} exceeds the cap of {MAX_T_DEPTH}")
    if spec.m + spec.a > MAX_LOGICAL_QUBITS:
        raise ValueError(
            f"referee uses {spec.m + spec.a} logical qubits, cap is {MAX_LOGICAL_QUBITS}"
        )
    pool = VarPool()
    n = spec.n_qubits
    frame = SymbolicPauliFrame((_zero(),) * n, (_zero(),) * n)
    ops: list = []
    teleports = []
    for j in spec.bob_message:
        q = spec.n_alice_local + j
        u, v = pool.pair("bob")
        ev = TeleportEvent(q, u, v, "bob")
        teleports.append(ev)
        ops.append(("teleport", ev))
        frame = frame.xor_at(q, x=GF2Poly.var(u), z=GF2Poly.var(v))
    gadgets = []
    for g in spec.global_referee_gates():
        ops.append(("gate", g))
        if g.is_clifford:
            frame = frame.apply_gate(g.kind, g.qubits)
            continue
        (q,) = g.qubits
        cond = as_poly(frame.xs[q])
        pdag = _PDAG[g.kind]
        a_vars, b_vars = pool.split(cond)
        if not b_vars:
            gad = local_pgadget(q, cond, pdag)
            gadgets.append(gad)
            ops.append(("gadget", gad))
            continue
        owner = pool.owner
        sides = [{owner[v] for v in m} for m in cond.monomials]
        mixed = GF2Poly(frozenset(m for m, sd in zip(cond.monomials, sides) if len(sd) == 2))
        a_part = GF2Poly(frozenset(m for m, sd in zip(cond.monomials, sides) if sd <= {"alice"}))
        b_part = GF2Poly(frozenset(m for m, sd in zip(cond.monomials, sides) if sd == {"bob"}))
        g_mix = _zero()
        if not mixed.is_zero():
            ma, mb = pool.split(mixed)
            gh = _condition_protocol(mixed, ma, mb)
            gad = gh_pgadget(q, mixed, gh, ma, mb, pool, pdag)
            gadgets.append(gad)
            ops.append(("gadget", gad))
            frame = frame.xor_at(q, x=gad.g, z=gad.h)
            g_mix = gad.g
        sep = a_part ^ b_part
        if sep.is_zero():
            continue
        if b_part.is_zero():
            gad = local_pgadget(q, a_part, pdag)
        else:
            gad = xor_pgadget(q, a_part, b_part, pool, pdag)
        gadgets.append(gad)
        ops.append(("gadget", gad))
        # P^(m+c) = P^m P^c Z^(mc), and the separable gadget's corrections
        # pass the X^g_mix left in front by the mixed one
        frame = frame.xor_at(q, x=gad.g, z=gad.h ^ (g_mix & sep) ^ (mixed & sep))
    decoder = as_poly(frame.xs[spec.output_global])
    return PsmProtocol(spec, pool, ops, decoder, gadgets, teleports)


# -- lazy simulation -----------------------------------------------------------


def _columns(protocol: PsmProtocol, r: np.ndarray) -> dict[str, np.ndarray]:
    return {name: r[:, k] for k, name in enumerate(protocol.pool.names)}


def _apply_masked(psi: np.ndarray, mask: np.ndarray, gate: Gate) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return psi
    psi = psi.copy()
    psi[mask] = apply_gate(psi[mask], gate, batched=True)
    return psi


def _simulate(protocol: PsmProtocol, x, y, r: np.ndarray, rng: np.random.Generator | None):
    """Run a batch with Bell outcomes ``r`` (modified in place for loop outcomes when sampling).

    Returns ``(p1, weight)``: probability that Alice's measured bit is 1 given
    ``r``, and ``P(r) * 2^|r|`` (1 except for loop-constrained outcomes).
    """
    spec = protocol.spec
    batch = r.shape[0]
    base = spec.prepared_state(x, y)
    psi = np.broadcast_to(base, (batch,) + base.shape).copy()
    weight = np.ones(batch)
    cols = _columns(protocol, r)
    for kind, op in protocol.ops:
        if kind == "teleport":
            psi = apply_pauli(psi, op.qubit, cols[op.u], cols[op.v])
        elif kind == "gate":
            psi = apply_gate(psi, op, batched=True)
        else:
            psi = _run_gadget(psi, op, cols, r, protocol, rng, weight)
    out = spec.output_global
    p1 = np.sum(np.abs(psi[(slice(None),) + _slice(psi.ndim - 1, {out: 1})]) ** 2,
                axis=tuple(range(1, psi.ndim - 1)))
    return np.clip(p1, 0.0, 1.0), weight


def _run_gadget(psi, gad: PGadget, cols, r, protocol, rng, weight):
    q = gad.target
    pd = Gate(gad.pdag, (q,))
    batch = psi.shape[0]
    if gad.kind == "skip":
        return psi
    if gad.kind == "local":
        return _apply_masked(psi, gad.condition.evaluate_batch(cols, batch), pd)
    if gad.kind == "xor":
        u1, v1, u2, v2 = gad.variables
        psi = _apply_masked(psi, gad.alice_part.evaluate_batch(cols, batch), pd)
        psi = apply_pauli(psi, q, cols[u1], cols[v1])
        psi = _apply_masked(psi, gad.bob_part.evaluate_batch(cols, batch), pd)
        return apply_pauli(psi, q, cols[u2], cols[v2])
    names = gad.alice_vars + gad.bob_vars
    key_idx = np.zeros(batch, dtype=np.int64)
    for name in names:
        key_idx = (key_idx << 1) | cols[name]
    col_of = {name: k for k, name in enumerate(protocol.pool.names)}
    for key, case in gad.cases.items():
        sel = key_idx == _bits_to_int(key)
        if not sel.any():
            continue
        sub = psi[sel]
        for step in case.path:
            if step[0] == "pauli":
                sub = apply_pauli(sub, q, cols[step[1]][sel], cols[step[2]][sel])
            else:
                sub = apply_gate(sub, pd, batched=True)
        psi[sel] = sub
        rows = np.flatnonzero(sel)
        for ring in case.rings:
            idx = np.zeros(rows.size, dtype=np.int64)
            for k, bm in enumerate(ring.bms[:-1]):
                digit = 2 * r[rows, col_of[bm.u]] + r[rows, col_of[bm.v]]
                idx += digit.astype(np.int64) * (4**k)
            law = ring.table[idx]
            last = ring.bms[-1]
            if rng is not None:
                cum = np.cumsum(law, axis=1)
                pick = (rng.random(rows.size)[:, None] > cum).sum(axis=1).clip(0, 3)
                r[rows, col_of[last.u]] = pick // 2
                r[rows, col_of[last.v]] = pick % 2
                weight[rows] *= 1.0
            else:
                cur = 2 * r[rows, col_of[last.u]] + r[rows, col_of[last.v]]
                weight[rows] *= 4 * law[np.arange(rows.size), cur]
    return psi


@dataclass
class TranscriptRecord:
    """Everything the referee receives: Bell outcomes ``r`` and Alice's bit ``s``."""

    r: tuple[int, ...]
    s: int
    output: int
    alice_outcomes: tuple[int, ...]
    bob_outcomes: tuple[int, ...]

    @property
    def bits_sent(self) -> int:
        return len(self.r) + 1

    def to_dict(self) -> dict:
        return {
            "r": "".join(map(str, self.r)),
            "s": self.s,
            "output": self.output,
            "bits_sent": self.bits_sent,
        }


def run_many(protocol: PsmProtocol, x, y, n_runs: int, seed=None) -> dict:
    """``n_runs`` seeded executions; returns arrays ``r``, ``s``, ``output``, ``p1``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    R = protocol.n_vars
    rs, ss, outs, p1s = [], [], [], []
    done = 0
    while done < n_runs:
        b = min(_CHUNK, n_runs - done)
        r = rng.integers(0, 2, size=(b, R), dtype=np.uint8)
        p1, _ = _simulate(protocol, x, y, r, rng)
        s = (rng.random(b) < p1).astype(np.uint8)
        dec = protocol.decoder.evaluate_batch(_columns(protocol, r), b)
        rs.append(r)
        ss.append(s)
        outs.append(s ^ dec)
        p1s.append(np.where(dec == 1, 1 - p1, p1))
        done += b
    return {
        "r": np.concatenate(rs) if rs else np.zeros((0, R), np.uint8),
        "s": np.concatenate(ss) if ss else np.zeros(0, np.uint8),
        "output": np.concatenate(outs) if outs else np.zeros(0, np.uint8),
        "accept_given_r": np.concatenate(p1s) if p1s else np.zeros(0),
    }


def run_transcript(protocol: PsmProtocol, x, y, seed=None) -> TranscriptRecord:
    res = run_many(protocol, x, y, 1, seed)
    r = tuple(int(b) for b in res["r"][0])
    owner = protocol.pool.owner
    names = protocol.pool.names
    return TranscriptRecord(
        r=r,
        s=int(res["s"][0]),
        output=int(res["output"][0]),
        alice_outcomes=tuple(b for b, n in zip(r, names) if owner[n] == "alice"),
        bob_outcomes=tuple(b for b, n in zip(r, names) if owner[n] == "bob"),
    )


def _exact_work(protocol: PsmProtocol) -> int:
    return 2 ** protocol.n_vars * 2 ** protocol.spec.n_qubits


def exact_transcript_distribution(protocol: PsmProtocol, x, y, max_bits: int = 24) -> dict:
    """``{(r, s): probability}`` by enumerating every outcome string."""
    R = protocol.n_vars
    if R > max_bits:
        raise ValueError(f"{R} outcome bits is too many to enumerate (cap {max_bits})")
    out: dict = {}
    for start in range(0, 2**R, _CHUNK):
        idx = np.arange(start, min(2**R, start + _CHUNK))
        r = ((idx[:, None] >> np.arange(R - 1, -1, -1)) & 1).astype(np.uint8)
        p1, w = _simulate(protocol, x, y, r, None)
        pr = w / 2.0**R
        for row, p, wt in zip(r, p1, pr):
            if wt <= 0:
                continue
            key = tuple(int(b) for b in row)
            if p < 1:
                out[(key, 0)] = wt * (1 - p)
            if p > 0:
                out[(key, 1)] = wt * p
    return out


# -- privacy audit -------------------------------------------------------------


@dataclass
class InputAudit:
    x: tuple[int, ...]
    y: tuple[int, ...]
    value: int
    tv_distance: float
    epsilon_measured: float
    epsilon_empirical: float | None
    slack: float
    method: str
    samples: int

    @property
    def passes(self) -> bool:
        return self.tv_distance <= 2 * self.epsilon_measured + self.slack + 1e-12


@dataclass
class PrivacyReport:
    """Per input: TV distance between the transcript and the simulator's output."""

    audits: list
    bits_sent: int
    epr_pairs: int
    within_68_bound: bool

    @property
    def passes(self) -> bool:
        return all(a.passes for a in self.audits)

    def to_dict(self) -> dict:
        return {
            "inputs": [
                {
                    "input": {"x": "".join(map(str, a.x)), "y": "".join(map(str, a.y))},
                    "value": a.value,
                    "tv_distance": a.tv_distance,
                    "epsilon_measured": a.epsilon_measured,
                    "epsilon_empirical": a.epsilon_empirical,
                    "slack": a.slack,
                    "method": a.method,
                    "samples": a.samples,
                    "passes": a.passes,
                    "bits_sent": self.bits_sent,
                    "epr_pairs": self.epr_pairs,
                    "within_68_bound": self.within_68_bound,
                }
                for a in self.audits
            ],
            "passes": self.passes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _simulator_tv_exact(protocol: PsmProtocol, x, y, value: int) -> float:
    """Half-L1 distance to Sim(value): r from its (input-free) law, s = value + p(r)."""
    R = protocol.n_vars
    tv = 0.0
    for start in range(0, 2**R, _CHUNK):
        idx = np.arange(start, min(2**R, start + _CHUNK))
        r = ((idx[:, None] >> np.arange(R - 1, -1, -1)) & 1).astype(np.uint8)
        p1, w = _simulate(protocol, x, y, r, None)
        dec = protocol.decoder.evaluate_batch(_columns(protocol, r), r.shape[0])
        s_sim = (value ^ dec).astype(bool)
        p_match = np.where(s_sim, p1, 1 - p1)
        tv += float(np.sum(w / 2.0**R * (1 - p_match)))
    return tv


def audit_privacy(
    protocol: PsmProtocol,
    inputs=None,
    seeds: int = 10_000,
    seed=0,
    exact_max_bits: int = 24,
    exact_max_work: int = 2**26,
) -> PrivacyReport:
    """Compare each input's transcript law with the simulator given only f(x, y).

    Exact when the outcome strings can be enumerated; otherwise Monte Carlo
    over ``seeds`` runs with Pr[s | r] computed exactly for each sampled r,
    and a 3-sigma slack.
    """
    spec = protocol.spec
    items = list(inputs) if inputs is not None else list(spec.inputs())
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(items))
    audits = []
    exact = protocol.n_vars <= exact_max_bits and _exact_work(protocol) <= exact_max_work
    for (x, y), child in zip(items, children):
        x, y = tuple(x), tuple(y)
        value = spec.target_value(x, y)
        eps = spec.error(x, y)
        if exact:
            tv = _simulator_tv_exact(protocol, x, y, value)
            audits.append(InputAudit(x, y, value, tv, eps, None, 0.0, "exact", 2**protocol.n_vars))
            continue
        res = run_many(protocol, x, y, seeds, np.random.default_rng(child))
        p_out1 = res["accept_given_r"]
        miss = p_out1 if value == 0 else 1 - p_out1
        tv = float(np.mean(miss))
        sigma = float(np.std(miss, ddof=1) / math.sqrt(seeds)) if seeds > 1 else 0.0
        emp = float(np.mean(res["output"] != value))
        audits.append(InputAudit(x, y, value, tv, eps, emp, 3 * sigma, "monte_carlo", seeds))
    return PrivacyReport(audits, protocol.bits_sent, protocol.epr_pairs, protocol.within_68_bound)


def bit_uniformity_pvalues(r: np.ndarray) -> np.ndarray:
    """Chi-square p-value per column for a fair-coin hypothesis."""
    r = np.asarray(r, dtype=np.int64)
    n = r.shape[0]
    ones = r.sum(axis=0)
    obs = np.stack([n - ones, ones], axis=1)
    return np.array([stats.chisquare(o).pvalue for o in obs])


# -- spec file format ------------------------------------------------------------


def parse_spec(text: str) -> QSmpSpec:
    """Sections ``[alice]``, ``[bob]``, ``[referee]`` after header lines.

    Header: ``epr k``, ``epsilon e``, ``target <bits>`` (row-major over x then y)
    or ``target const b``. Player sections hold a circuit whose advice count
    includes the EPR halves, plus a ``message q ..`` line.
    """
    sections: dict[str, list[tuple[int, str]]] = {"": []}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
            if current not in ("alice", "bob", "referee"):
                raise CircuitSyntaxError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise CircuitSyntaxError(f"duplicate section [{current}]", lineno)
            sections[current] = []
            continue
        sections[current].append((lineno, raw))
    for name in ("alice", "bob", "referee"):
        if name not in sections:
            raise CircuitSyntaxError(f"missing section [{name}]")
    n_epr, eps, target_spec = 0, 0.0, None
    for lineno, raw in sections[""]:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *args = line.split()
        try:
            if op == "epr":
                (n_epr,) = (int(a) for a in args)
            elif op == "epsilon":
                (eps,) = (float(a) for a in args)
            elif op == "target":
                target_spec = args
            else:
                raise CircuitSyntaxError(f"unknown header line {op!r}", lineno)
        except CircuitSyntaxError:
            raise
        except ValueError:
            raise CircuitSyntaxError(f"bad arguments to {op}", lineno) from None

    def circuit_and_message(name):
        lines = sections[name]
        message = None
        kept = []
        for lineno, raw in lines:
            body = raw.split("#", 1)[0].strip()
            if body.startswith("message"):
                try:
                    message = tuple(int(t) for t in body.split()[1:])
                except ValueError:
                    raise CircuitSyntaxError("message takes qubit indices", lineno) from None
                kept.append("")
            else:
                kept.append(raw)
        first = lines[0][0] if lines else 1
        text = "\n" * (first - 1) + "\n".join(kept)
        return parse_circuit(text), message

    alice, a_msg = circuit_and_message("alice")
    bob, b_msg = circuit_and_message("bob")
    referee, _ = circuit_and_message("referee")
    if a_msg is None or b_msg is None:
        raise CircuitSyntaxError("each player section needs a 'message' line")
    target = None
    if target_spec:
        n_cells = 2 ** (alice.n_input + bob.n_input)
        if target_spec[0] == "const" and len(target_spec) == 2:
            target = np.full(n_cells, int(target_spec[1]) & 1, dtype=np.uint8)
        elif len(target_spec) == 1 and len(target_spec[0]) == n_cells and set(target_spec[0]) <= {"0", "1"}:
            target = np.array([int(c) for c in target_spec[0]], dtype=np.uint8)
        else:
            raise CircuitSyntaxError(f"target needs {n_cells} bits or 'const b'")
        target = target.reshape(2**alice.n_input, 2**bob.n_input)
    try:
        return QSmpSpec(alice, bob, a_msg, b_msg, referee, n_epr, eps, target)
    except ValueError as exc:
        raise CircuitSyntaxError(str(exc)) from None


def serialize_spec(spec: QSmpSpec) -> str:
    head = [f"epr {spec.n_epr}", f"epsilon {spec.epsilon!r}"]
    if spec.target is not None:
        head.append("target " + "".join(str(int(b)) for b in spec.target.reshape(-1)))
    parts = ["\n".join(head)]
    for name, circ, msg in (
        ("alice", spec.alice_prep, spec.alice_message),
        ("bob", spec.bob_prep, spec.bob_message),
        ("referee", spec.referee, None),
    ):
        body = serialize_circuit(circ)
        if msg is not None:
            lines = body.splitlines()
            # message line goes before any JSON block
            cut = lines.index("@json") if "@json" in lines else len(lines)
            lines.insert(cut, "message " + " ".join(map(str, msg)))
            body = "\n".join(lines) + "\n"
        parts.append(f"[{name}]\n{body.rstrip()}")
    return "\n".join(parts) + "\n"


def load_spec(path) -> QSmpSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


class PsmTransformer(TransformerMixin, BaseEstimator):
    """``fit(spec)`` builds the private protocol; ``transform`` samples transcripts.

    Rows of ``X`` are ``x`` bits followed by ``y`` bits; each row yields
    ``r`` followed by ``s``.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, X: QSmpSpec, y=None):
        if not isinstance(X, QSmpSpec):
            raise TypeError("PsmTransformer.fit expects a QSmpSpec")
        self.protocol_ = transform(X)
        self.n_features_in_ = X.n_x + X.n_y
        return self

    def _split(self, rows):
        nx = self.protocol_.spec.n_x
        return [(tuple(r[:nx]), tuple(r[nx:])) for r in rows]

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "protocol_")
        rows = check_bit_matrix(X, self.n_features_in_)
        seeds = np.random.SeedSequence(self.seed).spawn(len(rows))
        out = []
        for (x, y), s in zip(self._split(rows), seeds):
            rec = run_transcript(self.protocol_, x, y, np.random.default_rng(s))
            out.append(list(rec.r) + [rec.s])
        return np.array(out, dtype=np.uint8).reshape(len(rows), self.protocol_.bits_sent)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "protocol_")
        rows = check_bit_matrix(X, self.n_features_in_)
        seeds = np.random.SeedSequence(self.seed).spawn(len(rows))
        return np.array(
            [run_transcript(self.protocol_, x, y, np.random.default_rng(s)).output
             for (x, y), s in zip(self._split(rows), seeds)],
            dtype=np.uint8,
        )
