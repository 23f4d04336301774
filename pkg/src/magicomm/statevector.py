"""Dense statevector simulation, the reference every compiled artifact is checked against.

Qubit 0 is the most significant bit of a basis index and the first tensor axis.
Batched helpers take arrays of shape ``(batch, 2, ..., 2)``.
"""

from __future__ import annotations

import itertools
import json
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import AdaptiveCircuit, Gate, LayeredCircuit

__all__ = [
    "MAX_QUBITS",
    "MAX_UNITARY_QUBITS",
    "PostselectionError",
    "StateVector",
    "OutputDistribution",
    "apply_gate",
    "apply_matrix",
    "apply_pauli",
    "initial_state",
    "run",
    "run_adaptive",
    "unitary_of",
    "matrix_distance",
    "bell_project",
    "BELL_STATES",
]

MAX_QUBITS = 22
MAX_UNITARY_QUBITS = 11
_NORM_ATOL = 1e-9


class PostselectionError(ValueError):
    """Post-selection onto a branch of probability zero."""


def _check_size(n: int, cap: int = MAX_QUBITS) -> None:
    if n > cap:
        raise ValueError(f"{n} qubits exceeds the dense simulation cap of {cap}")


def apply_matrix(psi: np.ndarray, mat: np.ndarray, qubits: Sequence[int], batched: bool = False) -> np.ndarray:
    """Apply a ``2^k x 2^k`` matrix to the listed qubits of a state tensor."""
    k = len(qubits)
    off = 1 if batched else 0
    axes = [q + off for q in qubits]
    m = np.asarray(mat, dtype=complex).reshape((2,) * (2 * k))
    out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_gate(psi: np.ndarray, gate: Gate, batched: bool = False) -> np.ndarray:
    """Apply a unitary gate; Paulis and Toffoli use index arithmetic."""
    off = 1 if batched else 0
    kind, qs = gate.kind, gate.qubits
    if kind == "x":
        return np.flip(psi, axis=qs[0] + off)
    if kind == "z":
        psi = psi.copy()
        psi[_slice(psi.ndim, {qs[0] + off: 1})] *= -1
        return psi
    if kind == "cnot" or kind == "toffoli":
        psi = psi.copy()
        sel = _slice(psi.ndim, {q + off: 1 for q in qs[:-1]})
        tgt = qs[-1] + off
        # the target axis index shifts down by the number of fixed axes before it
        shift = sum(1 for q in qs[:-1] if q + off < tgt)
        psi[sel] = np.flip(psi[sel], axis=tgt - shift)
        return psi
    if kind == "cz":
        psi = psi.copy()
        psi[_slice(psi.ndim, {qs[0] + off: 1, qs[1] + off: 1})] *= -1
        return psi
    if kind == "swap":
        return np.swapaxes(psi, qs[0] + off, qs[1] + off).copy()
    if kind in ("measure", "postselect"):
        raise ValueError(f"{kind} is not a unitary gate")
    return apply_matrix(psi, gate.unitary(), qs, batched)


def _slice(ndim: int, fixed: Mapping[int, int]) -> tuple:
    return tuple(fixed.get(ax, slice(None)) for ax in range(ndim))


def apply_pauli(psi: np.ndarray, qubit: int, xbits, zbits, batched: bool = True) -> np.ndarray:
    """Apply ``X^x Z^z`` (Z first) on one qubit, per sample when batched."""
    off = 1 if batched else 0
    ax = qubit + off
    psi = psi.copy()
    if batched:
        xbits = np.asarray(xbits, dtype=bool).reshape(-1)
        zbits = np.asarray(zbits, dtype=bool).reshape(-1)
        if zbits.any():
            sub = psi[zbits]
            sub[_slice(sub.ndim, {ax: 1})] *= -1
            psi[zbits] = sub
        if xbits.any():
            psi[xbits] = np.flip(psi[xbits], axis=ax)
        return psi
    if zbits:
        psi[_slice(psi.ndim, {ax: 1})] *= -1
    if xbits:
        psi = np.flip(psi, axis=ax).copy()
    return psi


def initial_state(circuit, input_bits: Sequence[int]) -> np.ndarray:
    """Tensor for ``|input> (x) advice``."""
    bits = tuple(int(b) & 1 for b in input_bits)
    if len(bits) != circuit.n_input:
        raise ValueError(f"expected {circuit.n_input} input bits, got {len(bits)}")
    _check_size(circuit.n_qubits)
    inp = np.zeros(2**circuit.n_input, dtype=complex)
    inp[int("".join(map(str, bits)) or "0", 2)] = 1
    vec = np.kron(inp, circuit.initial_advice())
    return vec.reshape((2,) * circuit.n_qubits)


class StateVector:
    """Mutable dense state with post-selection bookkeeping."""

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex)
        n = n_qubits if n_qubits is not None else int(round(np.log2(amps.size)))
        if amps.size != 2**n:
            raise ValueError("amplitude count is not 2^n")
        _check_size(n)
        self.n = n
        self.tensor = amps.reshape((2,) * n).copy()
        self.postselection_probability = 1.0

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "StateVector":
        v = np.zeros(2 ** len(bits), dtype=complex)
        v[int("".join(str(int(b)) for b in bits) or "0", 2)] = 1
        return cls(v, len(bits))

    @property
    def amplitudes(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))

    def apply(self, gate: Gate) -> "StateVector":
        if gate.kind == "postselect":
            self.postselect(gate.qubits, gate.values)
        else:
            self.tensor = apply_gate(self.tensor, gate)
        return self

    def probabilities(self, qubits: Sequence[int]) -> dict[tuple[int, ...], float]:
        probs = np.abs(self.tensor) ** 2
        others = tuple(ax for ax in range(self.n) if ax not in qubits)
        marg = probs.sum(axis=others) if others else probs
        # summed array keeps remaining axes in increasing order; reorder to `qubits`
        order = sorted(qubits)
        marg = np.transpose(marg, [order.index(q) for q in qubits])
        return {
            key: float(marg[key]) for key in itertools.product((0, 1), repeat=len(qubits))
        }

    def project(self, qubits: Sequence[int], values: Sequence[int]) -> float:
        """Project onto fixed values and renormalise; returns the branch probability."""
        mask = np.zeros_like(self.tensor, dtype=bool)
        mask[_slice(self.n, dict(zip(qubits, values)))] = True
        proj = np.where(mask, self.tensor, 0)
        p = float(np.sum(np.abs(proj) ** 2))
        if p <= 1e-15:
            raise PostselectionError(f"branch {dict(zip(qubits, values))} has probability 0")
        self.tensor = proj / np.sqrt(p)
        return p

    def postselect(self, qubits: Sequence[int], values: Sequence[int]) -> float:
        p = self.project(qubits, values)
        self.postselection_probability *= p
        return p

    def copy(self) -> "StateVector":
        out = StateVector.__new__(StateVector)
        out.n = self.n
        out.tensor = self.tensor.copy()
        out.postselection_probability = self.postselection_probability
        return out


class OutputDistribution(Mapping):
    """Exact distribution over outcome bitstrings (keys like ``"01"``)."""

    def __init__(self, probs: Mapping[str, float], postselection_probability: float = 1.0):
        clean = {k: float(v) for k, v in probs.items()}
        if any(v < -_NORM_ATOL for v in clean.values()):
            raise ValueError("negative probability")
        total = sum(clean.values())
        if abs(total - 1) > _NORM_ATOL:
            raise ValueError(f"probabilities sum to {total}")
        self._probs = dict(sorted(clean.items()))
        self.postselection_probability = float(postselection_probability)

    def __getitem__(self, key: str) -> float:
        return self._probs.get(key, 0.0)

    def __iter__(self):
        return iter(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    @property
    def p1(self) -> float:
        """Probability that the (single) measured bit is 1."""
        return sum(p for k, p in self._probs.items() if k.endswith("1"))

    def allclose(self, other: Mapping[str, float], atol: float = 1e-9) -> bool:
        keys = set(self) | set(other)
        return all(abs(self[k] - other.get(k, 0.0)) <= atol for k in keys)

    def to_json(self) -> str:
        return json.dumps(self._probs, sort_keys=True)

    def __repr__(self) -> str:
        return f"OutputDistribution({self._probs})"


def _bits_key(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def run(circuit: LayeredCircuit, input_bits: Sequence[int], measure: Sequence[int] | None = None) -> OutputDistribution:
    """Exact outcome distribution.

    Measured bits are the outcomes of the circuit's ``measure`` gates in order
    (collapsing the state), followed by ``measure`` if given. With neither, the
    output qubit is measured at the end.
    """
    psi = initial_state(circuit, input_bits)
    has_measure = any(g.kind == "measure" for g in circuit.gates)
    final = tuple(measure) if measure is not None else (() if has_measure else (circuit.output_qubit,))
    branches = [(psi, (), 1.0)]  # (unnormalised tensor, outcomes so far, weight=1)
    post_p = 1.0
    for g in circuit.gates:
        if g.kind == "postselect":
            new = []
            total = 0.0
            for t, out, _ in branches:
                sel = _slice(t.ndim, dict(zip(g.qubits, g.values)))
                proj = np.zeros_like(t)
                proj[sel] = t[sel]
                total += float(np.sum(np.abs(proj) ** 2))
                new.append((proj, out, 1.0))
            if total <= 1e-15:
                raise PostselectionError("post-selection onto a probability-zero branch")
            norm_before = sum(float(np.sum(np.abs(t) ** 2)) for t, _, _ in branches)
            post_p *= total / norm_before
            branches = [(t / np.sqrt(total / norm_before), o, w) for t, o, w in new]
        elif g.kind == "measure":
            new = []
            for t, out, _ in branches:
                for vals in itertools.product((0, 1), repeat=len(g.qubits)):
                    sel = _slice(t.ndim, dict(zip(g.qubits, vals)))
                    proj = np.zeros_like(t)
                    proj[sel] = t[sel]
                    if np.any(proj):
                        new.append((proj, out + vals, 1.0))
            branches = new
        else:
            branches = [(apply_gate(t, g), o, w) for t, o, w in branches]
    probs: dict[str, float] = {}
    for t, out, _ in branches:
        p = np.abs(t) ** 2
        if final:
            others = tuple(ax for ax in range(t.ndim) if ax not in final)
            marg = p.sum(axis=others) if others else p
            order = sorted(final)
            marg = np.transpose(marg, [order.index(q) for q in final])
            for vals in itertools.product((0, 1), repeat=len(final)):
                key = _bits_key(out + vals)
                probs[key] = probs.get(key, 0.0) + float(marg[vals])
        else:
            key = _bits_key(out)
            probs[key] = probs.get(key, 0.0) + float(p.sum())
    return OutputDistribution(probs, post_p)


def run_adaptive(circuit: AdaptiveCircuit, input_bits: Sequence[int]) -> OutputDistribution:
    """Distribution of the output qubit at the end of an adaptive circuit."""
    psi = initial_state(circuit, input_bits)
    probs = {"0": 0.0, "1": 0.0}

    def walk(node: AdaptiveCircuit, t: np.ndarray, weight: float) -> None:
        for g in node.segment:
            if g.kind == "measure":
                continue
            if g.kind == "postselect":
                raise ValueError("post-selection is not supported in adaptive circuits")
            t = apply_gate(t, g)
        if not node.branches:
            sv = np.abs(t) ** 2
            q = circuit.output_qubit
            for b in (0, 1):
                probs[str(b)] += weight * float(sv[_slice(t.ndim, {q: b})].sum())
            return
        for vals in itertools.product((0, 1), repeat=len(node.measured)):
            sel = _slice(t.ndim, dict(zip(node.measured, vals)))
            proj = np.zeros_like(t)
            proj[sel] = t[sel]
            p = float(np.sum(np.abs(proj) ** 2))
            if p <= 1e-15:
                continue
            if vals not in node.branches:
                raise KeyError(f"no branch for measurement outcome {vals}")
            walk(node.branches[vals], proj / np.sqrt(p), weight * p)

    walk(circuit, psi, 1.0)
    return OutputDistribution(probs)


def unitary_of(circuit: LayeredCircuit | Sequence[Gate], n_qubits: int | None = None) -> np.ndarray:
    """Full matrix of a measurement-free circuit (or gate list) on at most 11 qubits."""
    if isinstance(circuit, LayeredCircuit):
        gates, n = circuit.gates, circuit.n_qubits
    else:
        gates, n = tuple(circuit), n_qubits
        if n is None:
            raise ValueError("n_qubits is required for a bare gate list")
    _check_size(n, MAX_UNITARY_QUBITS)
    dim = 2**n
    psi = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * n)
    for g in gates:
        if g.kind in ("measure", "postselect"):
            raise ValueError(f"unitary_of: circuit contains {g.kind}")
        psi = apply_gate(psi, g, batched=True)
    return psi.reshape(dim, dim).T


def matrix_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min over theta of ||a - e^{i theta} b||`` in operator norm."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")

    def cost(theta: float) -> float:
        return float(np.linalg.norm(a - np.exp(1j * theta) * b, ord=2))

    grid = np.linspace(-np.pi, np.pi, 65)
    overlap = np.trace(b.conj().T @ a)
    seeds = list(grid) + ([float(np.angle(overlap))] if abs(overlap) > 1e-12 else [])
    best = min(seeds, key=cost)
    step = 2 * np.pi / 64
    res = minimize_scalar(cost, bounds=(best - step, best + step), method="bounded",
                          options={"xatol": 1e-12})
    d = min(cost(best), float(res.fun))
    return 0.0 if d < 1e-12 else d


# |beta_uv> = (Z^v X^u (x) I)|Phi+>; projecting a qubit holding psi together
# with half of |Phi+> onto beta_uv leaves X^u Z^v psi on the other half.
_PHI = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])
BELL_STATES = {
    (u, v): np.kron(np.linalg.matrix_power(_Z, v) @ np.linalg.matrix_power(_X, u), np.eye(2)) @ _PHI
    for u in (0, 1)
    for v in (0, 1)
}


def bell_project(psi: np.ndarray, p: int, q: int, u: int, v: int) -> np.ndarray:
    """Contract qubits ``p, q`` of a state tensor with ``<beta_uv|``; those axes are removed."""
    bra = BELL_STATES[(u, v)].conj().reshape(2, 2)
    return np.tensordot(bra, psi, axes=([0, 1], [p, q]))
