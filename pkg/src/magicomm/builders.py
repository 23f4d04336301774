"""Named circuits: equality, controlled multiplexer, CSWAP, Toffoli decompositions, ABCD referee."""

from __future__ import annotations

import math
from typing import Sequence

from .circuit import Gate, LayeredCircuit

__all__ = [
    "build_equality_circuit",
    "multiplexer_gates",
    "build_controlled_multiplexer",
    "multiplexer_magic_count",
    "MultiplexerLayout",
    "build_cswap_from_toffoli",
    "toffoli_seven_t",
    "ccz_t_depth_one",
    "toffoli_t_depth_one",
    "build_abcd_referee",
    "AbcdLayout",
]


def _g(kind: str, *qubits: int) -> Gate:
    return Gate(kind, qubits)


def build_equality_circuit(n: int) -> LayeredCircuit:
    """``[x == y]`` for n-bit x, y using one ``toffoli`` over n controls.

    Qubits: x on 0..n-1, y on n..2n-1, output ancilla 2n (advice, starts at 0).
    """
    if n < 1:
        raise ValueError("equality needs n >= 1")
    gates = []
    for i in range(n):
        gates.append(_g("cnot", i, n + i))
        gates.append(_g("x", n + i))
    gates.append(Gate("toffoli", tuple(range(n, 2 * n)) + (2 * n,)))
    return LayeredCircuit(2 * n, 1, gates, output_qubit=2 * n)


def build_cswap_from_toffoli(control: int = 0, a: int = 1, b: int = 2) -> list[Gate]:
    """Controlled swap of ``a`` and ``b`` with a single Toffoli between two CNOTs."""
    return [_g("cnot", b, a), _g("toffoli", control, a, b), _g("cnot", b, a)]


def multiplexer_gates(
    control: int,
    index: Sequence[int],
    array: Sequence[int],
    target: int,
    ancillas: Sequence[int],
) -> list[Gate]:
    """Swap ``array[i]`` with ``target`` when ``control`` is set, i read MSB-first from ``index``.

    Each level computes ``control AND NOT i1`` and ``control AND i1`` into an
    ancilla pair, recurses on both halves, and uncomputes, so the Toffoli count
    satisfies ``g(k+1) = 2 g(k) + 4`` with ``g(0) = 1``. Ancillas are reused
    across sibling calls: ``2k`` suffice.
    """
    k = len(index)
    if len(array) != 2**k:
        raise ValueError(f"array of {len(array)} bits does not match a {k}-bit index")
    if len(ancillas) < 2 * k:
        raise ValueError(f"need {2 * k} ancillas, got {len(ancillas)}")
    if k == 0:
        return build_cswap_from_toffoli(control, array[0], target)
    i1, rest = index[0], index[1:]
    a_lo, a_hi = ancillas[0], ancillas[1]
    half = len(array) // 2
    compute = [
        _g("x", i1),
        _g("toffoli", control, i1, a_lo),
        _g("x", i1),
        _g("toffoli", control, i1, a_hi),
    ]
    body = multiplexer_gates(a_lo, rest, array[:half], target, ancillas[2:])
    body += multiplexer_gates(a_hi, rest, array[half:], target, ancillas[2:])
    return compute + body + compute[::-1]


class MultiplexerLayout:
    """Qubit positions used by :func:`build_controlled_multiplexer`."""

    def __init__(self, k: int):
        self.k = k
        self.control = 0
        self.index = tuple(range(1, 1 + k))
        self.array = tuple(range(1 + k, 1 + k + 2**k))
        self.target = 1 + k + 2**k
        self.ancillas = tuple(range(self.target + 1, self.target + 1 + 2 * k))
        self.n_input = self.target + 1
        self.n_qubits = self.n_input + 2 * k


def build_controlled_multiplexer(k: int) -> LayeredCircuit:
    """Controlled multiplexer on a 2^k-bit array.

    Inputs (in order): control, k index bits (MSB first), 2^k array bits, target.
    The 2k ancillas are advice qubits starting in ``|0>`` and are returned clean.
    """
    if k < 1:
        raise ValueError("multiplexer needs k >= 1")
    lay = MultiplexerLayout(k)
    gates = multiplexer_gates(lay.control, lay.index, lay.array, lay.target, lay.ancillas)
    return LayeredCircuit(lay.n_input, 2 * k, gates, output_qubit=lay.target)


def multiplexer_magic_count(k: int) -> int:
    return 1 if k == 0 else 2 * multiplexer_magic_count(k - 1) + 4


def toffoli_seven_t(a: int, b: int, c: int) -> list[Gate]:
    """Standard Clifford+T Toffoli (controls a, b; target c): 7 T/Tdg gates."""
    return [
        _g("h", c),
        _g("cnot", b, c), _g("tdg", c),
        _g("cnot", a, c), _g("t", c),
        _g("cnot", b, c), _g("tdg", c),
        _g("cnot", a, c), _g("t", b), _g("t", c),
        _g("h", c),
        _g("cnot", a, b), _g("t", a), _g("tdg", b),
        _g("cnot", a, b),
    ]


def ccz_t_depth_one(a: int, b: int, c: int, anc: Sequence[int]) -> list[Gate]:
    """CCZ with all seven T/Tdg gates in one layer, using four zeroed ancillas.

    ``(-1)^{abc} = w^{a+b+c-(a^b)-(a^c)-(b^c)+(a^b^c)}`` with ``w = e^{i pi/4}``.
    """
    if len(anc) != 4:
        raise ValueError("CCZ needs four ancillas")
    ab, ac, bc, abc = anc
    compute = [
        _g("cnot", a, ab), _g("cnot", b, ab),
        _g("cnot", a, ac), _g("cnot", c, ac),
        _g("cnot", b, bc), _g("cnot", c, bc),
        _g("cnot", a, abc), _g("cnot", b, abc), _g("cnot", c, abc),
    ]
    phases = [
        _g("t", a), _g("t", b), _g("t", c), _g("t", abc),
        _g("tdg", ab), _g("tdg", ac), _g("tdg", bc),
    ]
    return compute + phases + compute[::-1]


def toffoli_t_depth_one(a: int, b: int, c: int, anc: Sequence[int]) -> list[Gate]:
    return [_g("h", c)] + ccz_t_depth_one(a, b, c, anc) + [_g("h", c)]


class AbcdLayout:
    """Register layout of the ABCD referee for array size ``n``.

    Alice's message is ``a_sel`` plus ``a_data``, Bob's is ``b_sel`` plus
    ``b_data``; fan-out copies of the selector and Toffoli ancillas follow.
    """

    def __init__(self, n: int):
        if n < 2 or n & (n - 1):
            raise ValueError(f"n must be a power of 2 and at least 2, got {n}")
        self.n = n
        self.log_n = log_n = int(math.log2(n))
        self.a_sel = 0
        self.a_data = tuple(range(1, 1 + log_n))
        self.b_sel = 1 + log_n
        self.b_data = tuple(range(2 + log_n, 2 + 2 * log_n))
        self.n_messages = 2 + 2 * log_n
        start = self.n_messages
        self.copies = tuple(range(start, start + log_n - 1))
        start += log_n - 1
        self.toffoli_ancillas = tuple(
            tuple(range(start + 4 * j, start + 4 * j + 4)) for j in range(log_n)
        )
        self.n_qubits = start + 4 * log_n
        self.n_ancillas = self.n_qubits - self.n_messages

    @property
    def alice_message(self) -> tuple[int, ...]:
        return (self.a_sel,) + self.a_data

    @property
    def bob_message(self) -> tuple[int, ...]:
        return (self.b_sel,) + self.b_data


def build_abcd_referee(n: int) -> LayeredCircuit:
    """Referee of the ABCD protocol: a controlled-swap test with T-depth 1.

    Output 1 means accept.
    """
    lay = AbcdLayout(n)
    controls = (lay.a_sel,) + lay.copies
    gates = [_g("cnot", lay.a_sel, lay.b_sel)]
    fan_out = [_g("cnot", lay.a_sel, q) for q in lay.copies]
    gates += fan_out
    for ctrl, qa, qb, anc in zip(controls, lay.a_data, lay.b_data, lay.toffoli_ancillas):
        gates.append(_g("cnot", qb, qa))
        gates += toffoli_t_depth_one(ctrl, qa, qb, anc)
        gates.append(_g("cnot", qb, qa))
    gates += fan_out[::-1]
    gates += [_g("h", lay.a_sel), _g("x", lay.a_sel)]
    return LayeredCircuit(lay.n_messages, lay.n_ancillas, gates, output_qubit=lay.a_sel)
