"""Garden-hose protocols: evaluation, XOR composition and exhaustive minimal search.

Ends are named ``"tap"``, ``"A<i>"`` (Alice's end of pipe i) and ``"B<i>"``.
Alice's matching pairs up ends from ``{tap, A0, ..}`` and Bob's from
``{B0, ..}``; water leaves the tap, runs through pipes and along matched
pairs, and spills at the first unmatched end. A spill on Alice's side means
output 0, on Bob's side output 1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .validation import all_bitstrings, check_bit_matrix

__all__ = [
    "TAP",
    "GardenHoseProtocol",
    "GhEvaluation",
    "GardenHoseError",
    "evaluate",
    "xor_compose",
    "brute_force_gh",
    "tabular_gh",
    "truth_table_of",
    "render_protocol",
    "render_path",
    "GardenHoseSearch",
    "MAX_SEARCH_BITS",
    "MAX_SEARCH_PIPES",
]

TAP = "tap"
MAX_SEARCH_BITS = 2
MAX_SEARCH_PIPES = 4

Matching = tuple  # tuple of sorted (end, end) pairs, itself sorted


class GardenHoseError(ValueError):
    pass


def _end_side(end: str) -> str:
    return "alice" if end == TAP or end[0] == "A" else "bob"


def _pipe_of(end: str) -> int:
    return int(end[1:])


def _partner_across(end: str) -> str:
    return ("B" if end[0] == "A" else "A") + end[1:]


def _canon(pairs: Iterable[Sequence[str]]) -> Matching:
    return tuple(sorted(tuple(sorted(p, key=_end_key)) for p in pairs))


def _end_key(end: str) -> tuple:
    return (-1, 0) if end == TAP else (0 if end[0] == "A" else 1, int(end[1:]))


def _as_dict(matching: Matching) -> dict[str, str]:
    out = {}
    for a, b in matching:
        out[a] = b
        out[b] = a
    return out


def _key(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        return tuple(int(c) for c in bits)
    if isinstance(bits, int):
        raise TypeError("input keys must be bit tuples or strings")
    return tuple(int(b) for b in bits)


@dataclass(frozen=True)
class GhEvaluation:
    output: int
    path: tuple[str, ...]


class GardenHoseProtocol:
    """``pipes`` pipes and explicit per-input matchings for both players."""

    def __init__(
        self,
        pipes: int,
        alice: Mapping,
        bob: Mapping,
        n_alice_bits: int | None = None,
        n_bob_bits: int | None = None,
    ):
        self.pipes = int(pipes)
        if self.pipes < 0:
            raise GardenHoseError("pipe count must be non-negative")
        self.alice = {_key(k): _canon(v) for k, v in alice.items()}
        self.bob = {_key(k): _canon(v) for k, v in bob.items()}
        self.n_alice_bits = n_alice_bits if n_alice_bits is not None else _width(self.alice)
        self.n_bob_bits = n_bob_bits if n_bob_bits is not None else _width(self.bob)
        a_ends = {TAP} | {f"A{i}" for i in range(self.pipes)}
        b_ends = {f"B{i}" for i in range(self.pipes)}
        for who, table, allowed, width in (
            ("alice", self.alice, a_ends, self.n_alice_bits),
            ("bob", self.bob, b_ends, self.n_bob_bits),
        ):
            for k, m in table.items():
                if len(k) != width:
                    raise GardenHoseError(f"{who} input {k} does not have {width} bits")
                used = [e for pair in m for e in pair]
                if len(used) != len(set(used)):
                    raise GardenHoseError(f"{who} matching for {k} uses an end twice")
                bad = [e for e in used if e not in allowed]
                if bad:
                    raise GardenHoseError(f"{who} matching for {k} uses foreign end {bad[0]}")

    def alice_matching(self, x) -> dict[str, str]:
        k = _key(x)
        if k not in self.alice:
            raise GardenHoseError(f"no Alice strategy for input {k}")
        return _as_dict(self.alice[k])

    def bob_matching(self, y) -> dict[str, str]:
        k = _key(y)
        if k not in self.bob:
            raise GardenHoseError(f"no Bob strategy for input {k}")
        return _as_dict(self.bob[k])

    def truth_table(self) -> np.ndarray:
        out = np.zeros((2**self.n_alice_bits, 2**self.n_bob_bits), dtype=np.uint8)
        for i, x in enumerate(all_bitstrings(self.n_alice_bits)):
            for j, y in enumerate(all_bitstrings(self.n_bob_bits)):
                out[i, j] = evaluate(self, x, y).output
        return out

    def computes(self, f) -> bool:
        return bool(np.array_equal(self.truth_table(), truth_table_of(f, self.n_alice_bits, self.n_bob_bits)))

    def to_dict(self) -> dict:
        def enc(table):
            return {
                "".join(map(str, k)): [list(p) for p in m] for k, m in sorted(table.items())
            }

        return {"pipes": self.pipes, "alice": enc(self.alice), "bob": enc(self.bob)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GardenHoseProtocol":
        try:
            alice = {k: [tuple(p) for p in v] for k, v in d["alice"].items()}
            bob = {k: [tuple(p) for p in v] for k, v in d["bob"].items()}
            return cls(int(d["pipes"]), alice, bob)
        except (KeyError, TypeError, AttributeError) as exc:
            raise GardenHoseError(f"malformed protocol JSON: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "GardenHoseProtocol":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise GardenHoseError(f"malformed protocol JSON: {exc.msg}") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, GardenHoseProtocol) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"GardenHoseProtocol(pipes={self.pipes}, alice_bits={self.n_alice_bits}, "
            f"bob_bits={self.n_bob_bits})"
        )


def _width(table: Mapping) -> int:
    widths = {len(k) for k in table}
    if len(widths) > 1:
        raise GardenHoseError("strategy keys have mixed lengths")
    return widths.pop() if widths else 0


def _walk(alice: Mapping[str, str], bob: Mapping[str, str], pipes: int) -> GhEvaluation:
    if TAP not in alice:
        return GhEvaluation(0, ())
    path: list[str] = []
    end = alice[TAP]
    # every pipe is crossed at most once, so the walk ends within `pipes` steps
    for _ in range(pipes):
        far = _partner_across(end)
        path += [end, far]
        nxt = (bob if far[0] == "B" else alice).get(far)
        if nxt is None:
            return GhEvaluation(1 if far[0] == "B" else 0, tuple(path))
        end = nxt
    raise GardenHoseError("water path did not terminate")


def evaluate(p: GardenHoseProtocol, x, y) -> GhEvaluation:
    """Follow the water for inputs ``(x, y)``."""
    return _walk(p.alice_matching(x), p.bob_matching(y), p.pipes)


def truth_table_of(f, n_alice_bits: int, n_bob_bits: int) -> np.ndarray:
    """Normalise a callable ``f(x, y)`` or a 2-D table into a ``(2^a, 2^b)`` uint8 array."""
    if callable(f):
        return np.array(
            [
                [int(f(x, y)) & 1 for y in all_bitstrings(n_bob_bits)]
                for x in all_bitstrings(n_alice_bits)
            ],
            dtype=np.uint8,
        )
    arr = np.asarray(f, dtype=np.uint8)
    if arr.shape != (2**n_alice_bits, 2**n_bob_bits):
        raise GardenHoseError(
            f"truth table shape {arr.shape} does not match {n_alice_bits}+{n_bob_bits} input bits"
        )
    return arr


# -- XOR composition ---------------------------------------------------------


def xor_compose(protocols: Sequence[GardenHoseProtocol], c: int = 0) -> GardenHoseProtocol:
    """Protocol for ``f_1 + .. + f_m + c`` with ``4 * sum(pipes) + 1`` pipes.

    Each component is copied four times: two forward copies entered from the
    tap position when the running parity is 0 or 1, and two reversed copies
    whose tap positions are the component's exits for parity 0 and 1. Open
    ends of a forward copy are joined to the same end of the reversed copy
    that leads to the right exit, so the water runs back along its own path.
    Exits of one component are entries of the next; the final parity-1 exit
    feeds an extra pipe that Bob leaves open.
    """
    if not protocols:
        raise GardenHoseError("xor_compose needs at least one protocol")
    na = {p.n_alice_bits for p in protocols}
    nb = {p.n_bob_bits for p in protocols}
    if len(na) != 1 or len(nb) != 1:
        raise GardenHoseError("component protocols have incompatible input spaces")
    na, nb = na.pop(), nb.pop()
    xs = sorted({k for p in protocols for k in p.alice})
    ys = sorted({k for p in protocols for k in p.bob})
    for p in protocols:
        if set(p.alice) != set(xs) or set(p.bob) != set(ys):
            raise GardenHoseError("component protocols are defined on different inputs")
    c &= 1
    m = len(protocols)
    offsets = []
    total = 0
    for p in protocols:
        offsets.append(total)
        total += 4 * p.pipes
    extra = total  # index of the extra pipe
    n_pipes = total + 1

    def rename(i: int, copy: int, end: str) -> str:
        base = offsets[i] + copy * protocols[i].pipes
        return f"{end[0]}{base + _pipe_of(end)}"

    alice_out = {}
    for x in xs:
        pairs: list[tuple[str, str]] = []
        # virtual node (boundary j, parity b) -> attached real ends
        attach: dict[tuple[int, int], list[str]] = {}
        parent: dict[tuple[int, int], tuple[int, int]] = {}

        def find(v):
            while parent.get(v, v) != v:
                v = parent[v]
            return v

        for i, p in enumerate(protocols):
            mt = p.alice_matching(x)
            tap_end = mt.get(TAP)
            s = p.pipes
            for copy in range(4):
                for a, b in p.alice[x]:
                    if TAP not in (a, b):
                        pairs.append((rename(i, copy, a), rename(i, copy, b)))
            for j in range(s):
                end = f"A{j}"
                if end not in mt:
                    pairs.append((rename(i, 0, end), rename(i, 2, end)))
                    pairs.append((rename(i, 1, end), rename(i, 3, end)))
            for b in (0, 1):
                v_in, v_out = (i, b), (i + 1, b)
                if tap_end is None:
                    parent[find(v_out)] = find(v_in)
                else:
                    attach.setdefault(v_in, []).append(rename(i, b, tap_end))
                    attach.setdefault(v_out, []).append(rename(i, 2 + b, tap_end))
        attach.setdefault((0, c), []).append(TAP)
        attach.setdefault((m, 1), []).append(f"A{extra}")
        classes: dict[tuple[int, int], list[str]] = {}
        for v, ends in attach.items():
            classes.setdefault(find(v), []).extend(ends)
        for ends in classes.values():
            if len(ends) == 2:
                pairs.append((ends[0], ends[1]))
            elif len(ends) > 2:
                raise AssertionError("virtual node class with more than two ends")
        alice_out[x] = pairs

    bob_out = {}
    for y in ys:
        pairs = []
        for i, p in enumerate(protocols):
            mt = p.bob_matching(y)
            for copy in range(4):
                for a, b in p.bob[y]:
                    pairs.append((rename(i, copy, a), rename(i, copy, b)))
            for j in range(p.pipes):
                end = f"B{j}"
                if end not in mt:
                    pairs.append((rename(i, 0, end), rename(i, 3, end)))
                    pairs.append((rename(i, 1, end), rename(i, 2, end)))
        bob_out[y] = pairs

    return GardenHoseProtocol(n_pipes, alice_out, bob_out, na, nb)


# -- construction from a truth table -----------------------------------------


def tabular_gh(f, n_alice_bits: int, n_bob_bits: int) -> GardenHoseProtocol:
    """Generic protocol: one pipe per Alice input with non-constant row, plus a return pipe.

    Rows that are constantly 0 need no pipe (Alice leaves the tap open); rows
    constantly 1 need a single pipe that Bob leaves open.
    """
    table = truth_table_of(f, n_alice_bits, n_bob_bits)
    xs = list(all_bitstrings(n_alice_bits))
    ys = list(all_bitstrings(n_bob_bits))
    pipe_of: dict[int, tuple[int, int | None]] = {}
    nxt = 0
    for i in range(len(xs)):
        row = table[i]
        if not row.any():
            continue
        if row.all():
            pipe_of[i] = (nxt, None)
            nxt += 1
        else:
            pipe_of[i] = (nxt, nxt + 1)
            nxt += 2
    alice = {}
    for i, x in enumerate(xs):
        alice[x] = [(TAP, f"A{pipe_of[i][0]}")] if i in pipe_of else []
    bob = {}
    for j, y in enumerate(ys):
        pairs = []
        for i, (fwd, ret) in pipe_of.items():
            if ret is not None and not table[i, j]:
                pairs.append((f"B{fwd}", f"B{ret}"))
        bob[y] = pairs
    return GardenHoseProtocol(nxt, alice, bob, n_alice_bits, n_bob_bits)


# -- exhaustive search --------------------------------------------------------


@lru_cache(maxsize=None)
def _matchings(ends: tuple[str, ...]) -> tuple[Matching, ...]:
    """All partial matchings of ``ends`` in a fixed canonical order."""
    if not ends:
        return ((),)
    first, rest = ends[0], ends[1:]
    out = list(_matchings(rest))  # first left open
    for k, other in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for m in _matchings(remaining):
            out.append(_canon(((first, other),) + m))
    return tuple(out)


def brute_force_gh(f, n_alice_bits: int = 1, n_bob_bits: int = 1, max_pipes: int = MAX_SEARCH_PIPES) -> GardenHoseProtocol | None:
    """Fewest-pipe protocol computing ``f`` exactly, or ``None`` within ``max_pipes``.

    Among minimal protocols the one whose Alice strategy tuple comes first in
    enumeration order wins; Bob then takes the first matching that works.
    """
    if n_alice_bits > MAX_SEARCH_BITS or n_bob_bits > MAX_SEARCH_BITS:
        raise GardenHoseError(f"search limited to {MAX_SEARCH_BITS} input bits per side")
    if max_pipes > MAX_SEARCH_PIPES:
        raise GardenHoseError(f"search limited to {MAX_SEARCH_PIPES} pipes")
    table = truth_table_of(f, n_alice_bits, n_bob_bits)
    xs = list(all_bitstrings(n_alice_bits))
    ys = list(all_bitstrings(n_bob_bits))
    n_x = len(xs)
    targets = [sum(int(table[i, j]) << i for i in range(n_x)) for j in range(len(ys))]
    for s in range(max_pipes + 1):
        a_ms = _matchings((TAP,) + tuple(f"A{i}" for i in range(s)))
        b_ms = _matchings(tuple(f"B{i}" for i in range(s)))
        out = np.array(
            [[_walk(_as_dict(a), _as_dict(b), s).output for b in b_ms] for a in a_ms],
            dtype=np.int64,
        )
        n_a = len(a_ms)
        # codes[t, b]: output column over x for Alice tuple t and Bob matching b
        idx = np.indices((n_a,) * n_x).reshape(n_x, -1)
        codes = np.zeros((idx.shape[1], len(b_ms)), dtype=np.int64)
        for i in range(n_x):
            codes |= out[idx[i]] << i
        ok = np.ones(idx.shape[1], dtype=bool)
        for t in set(targets):
            ok &= (codes == t).any(axis=1)
        hits = np.flatnonzero(ok)
        if hits.size:
            t = hits[0]
            alice = {x: a_ms[idx[i, t]] for i, x in enumerate(xs)}
            bob = {}
            for j, y in enumerate(ys):
                b = int(np.flatnonzero(codes[t] == targets[j])[0])
                bob[y] = b_ms[b]
            return GardenHoseProtocol(s, alice, bob, n_alice_bits, n_bob_bits)
    return None


# -- rendering ----------------------------------------------------------------


def _fmt_bits(k) -> str:
    return "".join(map(str, k)) or "-"


def render_protocol(p: GardenHoseProtocol) -> str:
    lines = [f"pipes: {p.pipes}"]
    for who, table in (("alice", p.alice), ("bob", p.bob)):
        for k, m in sorted(table.items()):
            conn = " ".join(f"{a}-{b}" for a, b in m) or "(none)"
            lines.append(f"{who} {_fmt_bits(k)}: {conn}")
    return "\n".join(lines)


def render_path(p: GardenHoseProtocol, x, y) -> str:
    ev = evaluate(p, x, y)
    side = "bob" if ev.output else "alice"
    return " -> ".join((TAP,) + ev.path) + f"  [spills on {side} side, output {ev.output}]"


class GardenHoseSearch(ClassifierMixin, BaseEstimator):
    """Fit a minimal protocol to a truth table; predict on rows of ``x`` bits then ``y`` bits."""

    def __init__(self, n_alice_bits: int = 1, n_bob_bits: int = 1, max_pipes: int = MAX_SEARCH_PIPES):
        self.n_alice_bits = n_alice_bits
        self.n_bob_bits = n_bob_bits
        self.max_pipes = max_pipes

    def fit(self, X, y=None):
        proto = brute_force_gh(X, self.n_alice_bits, self.n_bob_bits, self.max_pipes)
        if proto is None:
            raise GardenHoseError(f"no protocol with at most {self.max_pipes} pipes")
        self.protocol_ = proto
        self.pipes_ = proto.pipes
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = self.n_alice_bits + self.n_bob_bits
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "protocol_")
        rows = check_bit_matrix(X, self.n_features_in_)
        a = self.n_alice_bits
        return np.array(
            [evaluate(self.protocol_, tuple(r[:a]), tuple(r[a:])).output for r in rows],
            dtype=np.uint8,
        )
