"""Reference problems: ABCD instances, the Forrelation value, equality and index pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .builders import (
    AbcdLayout,
    MultiplexerLayout,
    build_abcd_referee,
    build_controlled_multiplexer,
    build_equality_circuit,
    multiplexer_gates,
    multiplexer_magic_count,
)
from .circuit import Gate, LayeredCircuit, simulate_reversible
from .pdt import InputSplit, compile_unitary, verify_exhaustive
from .psm import QSmpSpec
from .validation import all_bitstrings

__all__ = [
    "AbcdInstance",
    "random_special_unitary",
    "abcd_qsmp_spec",
    "abcd_accept_probability",
    "ForrelationInstance",
    "fwht",
    "forr",
    "forr_naive",
    "build_index_circuit",
    "equality_pipeline",
    "index_pipeline",
    "multiplexer_table",
    "ABCD_HIGH",
    "ABCD_LOW",
]

ABCD_HIGH = 0.9
ABCD_LOW = 0.1
_MAX_ABCD_N = 4
_EXHAUSTIVE_INPUT_BITS = 8
_SAMPLED_INPUTS = 64


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def random_special_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    u = unitary_group.rvs(n, random_state=rng)
    return u / np.linalg.det(u) ** (1.0 / n)


# -- ABCD --------------------------------------------------------------------


@dataclass
class AbcdInstance:
    """Alice holds ``A, C``; Bob holds ``B, D``; all in SU(n).

    ``promise`` is ``"high"`` (Re Tr(ABCD) >= 0.9n), ``"low"`` (<= 0.1n) or
    ``"none"``, and is checked against the actual trace.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    promise: str = "none"

    def __post_init__(self):
        n = self.A.shape[0]
        if not _is_power_of_two(n) or n < 2:
            raise ValueError(f"n must be a power of 2 and at least 2, got {n}")
        for name in "ABCD":
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if not np.allclose(m.conj().T @ m, np.eye(n), atol=1e-10):
                raise ValueError(f"{name} is not unitary")
            setattr(self, name, m)
        if self.promise not in ("high", "low", "none"):
            raise ValueError(f"unknown promise {self.promise!r}")
        if self.promise == "high" and self.trace.real < ABCD_HIGH * n:
            raise ValueError(f"trace {self.trace.real:.4f} below the high promise")
        if self.promise == "low" and self.trace.real > ABCD_LOW * n:
            raise ValueError(f"trace {self.trace.real:.4f} above the low promise")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.A @ self.B @ self.C @ self.D))

    @property
    def target(self) -> int:
        """1 (accept) on the high side, 0 otherwise."""
        return int(self.promise == "high")

    @classmethod
    def random(cls, n: int, case: str = "none", seed=None) -> "AbcdInstance":
        rng = np.random.default_rng(seed)
        A, B, C = (random_special_unitary(n, rng) for _ in range(3))
        abc_inv = (A @ B @ C).conj().T
        if case == "none":
            return cls(A, B, C, random_special_unitary(n, rng), "none")
        if case == "high":
            while True:
                phases = rng.uniform(-0.3, 0.3, size=n)
                phases -= phases.mean()
                if np.mean(np.cos(phases)) >= ABCD_HIGH:
                    break
            v = _with_spectrum(np.exp(1j * phases), rng)
            return cls(A, B, C, abc_inv @ v, "high")
        if case == "low":
            # rotated n-th roots of unity: trace 0 and determinant 1
            k = np.arange(n)
            v = _with_spectrum(np.exp(1j * (2 * np.pi * k / n - np.pi * (n - 1) / n)), rng)
            return cls(A, B, C, abc_inv @ v, "low")
        raise ValueError(f"case must be high, low or none, got {case!r}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "promise": self.promise,
            "trace_over_n": {"re": self.trace.real / self.n, "im": self.trace.imag / self.n},
        }


def _with_spectrum(eigs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = unitary_group.rvs(len(eigs), random_state=rng)
    return u @ np.diag(eigs) @ u.conj().T


def _block_diag(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    n = p.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = p
    out[n:, n:] = q
    return out


def abcd_qsmp_spec(instance: AbcdInstance) -> QSmpSpec:
    """Swap-test protocol for ABCD with ``log n + 1`` shared pairs.

    Each player's local register is ``selector half, data halves``. Alice
    applies ``diag(C^dag, A^T)`` and Bob ``diag(conj B, D)``, which makes the
    referee output 1 with probability ``(1 + Re Tr(ABCD)/n) / 2``.
    """
    n = instance.n
    if n > _MAX_ABCD_N:
        raise ValueError(f"n={n} exceeds the dense cap of {_MAX_ABCD_N}")
    lay = AbcdLayout(n)
    width = 1 + lay.log_n
    qubits = tuple(range(width))
    ua = _block_diag(instance.C.conj().T, instance.A.T)
    ub = _block_diag(instance.B.conj(), instance.D)
    alice = LayeredCircuit(0, width, [Gate("magic", qubits, name="alice_u", matrix=ua)])
    bob = LayeredCircuit(0, width, [Gate("magic", qubits, name="bob_u", matrix=ub)])
    target = np.array([[instance.target]], dtype=np.uint8) if instance.promise != "none" else None
    return QSmpSpec(
        alice, bob, qubits, qubits, build_abcd_referee(n), n_epr=width, epsilon=0.05, target=target
    )


def abcd_accept_probability(instance: AbcdInstance) -> float:
    return abcd_qsmp_spec(instance).output_probability((), ())


# -- Forrelation ---------------------------------------------------------------


def fwht(v: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis."""
    a = np.array(v, dtype=float)
    n = a.shape[-1]
    if not _is_power_of_two(n):
        raise ValueError(f"length must be a power of 2, got {n}")
    h = 1
    while h < n:
        a = a.reshape(a.shape[:-1] + (n // (2 * h), 2, h))
        lo, hi = a[..., 0, :], a[..., 1, :]
        a = np.stack([lo + hi, lo - hi], axis=-2).reshape(a.shape[:-3] + (n,))
        h *= 2
    return a


def _check_pm1(x, name="x") -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[-1]
    if not _is_power_of_two(n) or n < 4:
        raise ValueError(f"{name} length must be a power of 2 and at least 4, got {n}")
    if not np.isin(x, (-1, 1)).all():
        raise ValueError(f"{name} entries must be +1 or -1")
    return x.astype(float)


def forr(x) -> float:
    """``<x1| H |x2> / n`` with H the normalized Walsh-Hadamard on n/2 points."""
    x = _check_pm1(x)
    n = x.shape[-1]
    half = n // 2
    x1, x2 = x[:half], x[half:]
    return float(x1 @ fwht(x2)) / math.sqrt(half) / n


def forr_naive(x) -> float:
    x = _check_pm1(x)
    n = x.shape[-1]
    half = n // 2
    total = 0.0
    for i in range(half):
        for j in range(half):
            sign = -1.0 if bin(i & j).count("1") % 2 else 1.0
            total += x[i] * sign * x[half + j]
    return total / math.sqrt(half) / n


@dataclass
class ForrelationInstance:
    """Alice holds ``x``, Bob holds ``y``, both in {-1, 1}^n."""

    x: np.ndarray
    y: np.ndarray
    alpha: float = 0.1

    def __post_init__(self):
        self.x = _check_pm1(self.x, "x").astype(int)
        self.y = _check_pm1(self.y, "y").astype(int)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same length")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def value(self) -> float:
        return forr(self.x * self.y)

    @property
    def promise(self) -> str:
        """``high`` when forr >= alpha, ``low`` when forr <= alpha/2, else ``none``."""
        v = self.value
        if v >= self.alpha:
            return "high"
        if v <= self.alpha / 2:
            return "low"
        return "none"

    @classmethod
    def random(cls, n: int, alpha: float = 0.1, seed=None) -> "ForrelationInstance":
        rng = np.random.default_rng(seed)
        return cls(rng.choice((-1, 1), n), rng.choice((-1, 1), n), alpha)

    def to_dict(self) -> dict:
        return {"n": int(self.x.size), "forr": self.value, "alpha": self.alpha, "promise": self.promise}


# -- pipelines -------------------------------------------------------------------


def build_index_circuit(n: int) -> LayeredCircuit:
    """``x[i]`` with Alice's n-bit array x (inputs 0..n-1) and Bob's index i (MSB first).

    Advice qubits: the multiplexer control (set to 1 by an X), the target and
    the multiplexer's ancillas.
    """
    if not _is_power_of_two(n) or n < 2:
        raise ValueError(f"array size must be a power of 2 and at least 2, got {n}")
    k = int(math.log2(n))
    array = tuple(range(n))
    index = tuple(range(n, n + k))
    control = n + k
    target = control + 1
    ancillas = tuple(range(target + 1, target + 1 + 2 * k))
    gates = [Gate("x", (control,))] + multiplexer_gates(control, index, array, target, ancillas)
    return LayeredCircuit(n + k, 2 + 2 * k, gates, output_qubit=target)


def _pipeline(circuit, split, reference, seed) -> dict:
    pdt = compile_unitary(circuit, split)
    if circuit.n_input <= _EXHAUSTIVE_INPUT_BITS:
        inputs = list(all_bitstrings(circuit.n_input))
        method = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        inputs = [tuple(int(b) for b in row) for row in rng.integers(0, 2, (_SAMPLED_INPUTS, circuit.n_input))]
        method = "sampled"
    report = verify_exhaustive(circuit, pdt, inputs)
    wrong = [
        "".join(map(str, bits))
        for bits in inputs
        if abs(pdt.output_distribution(bits).p1 - reference(bits)) > 1e-9
    ]
    return {
        "magic_count": circuit.magic_count,
        "c_M": circuit.c_m,
        "pdt_depth": pdt.depth,
        "smp_cost": pdt.smp_cost,
        "smp_bound": pdt.smp_bound,
        "bound_check": pdt.bounds_hold(),
        "verification": dict(report.to_dict(), method=method),
        "function_mismatches": wrong,
        "correct": report.ok and not wrong,
    }


def equality_pipeline(n: int, seed: int = 0) -> dict:
    if not 1 <= n <= 8:
        raise ValueError(f"equality pipeline supports 1 <= n <= 8, got {n}")
    circuit = build_equality_circuit(n)
    out = _pipeline(
        circuit,
        InputSplit.from_counts(n, n),
        lambda bits: float(tuple(bits[:n]) == tuple(bits[n:])),
        seed,
    )
    return dict(out, problem="equality", n=n)


def index_pipeline(n: int, seed: int = 0) -> dict:
    if not 2 <= n <= 8:
        raise ValueError(f"index pipeline supports 2 <= n <= 8 array bits, got {n}")
    k = int(math.log2(n))
    circuit = build_index_circuit(n)

    def reference(bits):
        i = 0
        for b in bits[n:]:
            i = (i << 1) | b
        return float(bits[i])

    out = _pipeline(circuit, InputSplit.from_counts(n, k), reference, seed)
    return dict(out, problem="index", n=n)


def _multiplexer_permutation_ok(k: int) -> bool:
    """The builder swaps ``array[i]`` and the target iff control, and cleans its ancillas."""
    lay = MultiplexerLayout(k)
    circuit = build_controlled_multiplexer(k)
    for bits in all_bitstrings(lay.n_input):
        full = tuple(bits) + (0,) * (2 * k)
        got = simulate_reversible(circuit.gates, full)
        want = list(full)
        if bits[lay.control]:
            i = 0
            for q in lay.index:
                i = (i << 1) | bits[q]
            a = lay.array[i]
            want[a], want[lay.target] = want[lay.target], want[a]
        if list(got) != want:
            return False
    return True


def multiplexer_table(k_max: int = 3) -> list[dict]:
    """Magic counts ``g(k)`` from the builder and the recursion check per row."""
    if not 1 <= k_max <= 4:
        raise ValueError(f"k must lie in 1..4, got {k_max}")
    rows = []
    for k in range(1, k_max + 1):
        g = build_controlled_multiplexer(k).magic_count
        g_next = build_controlled_multiplexer(k + 1).magic_count
        rows.append(
            {
                "k": k,
                "g_k": g,
                "g_k_plus_1": g_next,
                "recursion_bound": 2 * g + 4,
                "recursion_ok": g_next <= 2 * g + 4,
                "closed_form": multiplexer_magic_count(k),
                "permutation_ok": _multiplexer_permutation_ok(k) if k <= 3 else None,
            }
        )
    return rows
