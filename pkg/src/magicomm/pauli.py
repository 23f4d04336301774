"""Pauli strings, Clifford tableaus and symbolic Pauli frames.

Conventions
-----------
A :class:`PauliString` is ``i**phase`` times a tensor product of single-qubit
operators from {I, X, Y, Z}; qubit 0 is the leftmost factor. The bit pair
``(x, z)`` selects the operator with ``(1, 1) -> Y`` and ``Y = iXZ``.

Frames drop global phase. A frame stores, per qubit, two Boolean forms
``(x_form, z_form)`` and stands for ``prod_q X_q**x_form Z_q**z_form``.
Forms are :class:`AffineForm` (GF(2)-affine), :class:`GF2Poly` (algebraic
normal form) or :class:`BoolFun` (truth table). Variables are strings with a
namespace prefix: ``x3`` for Alice's input bit 3, ``y0`` for Bob's, ``r12``
for a measurement outcome.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "PauliString",
    "CliffordTableau",
    "AffineForm",
    "GF2Poly",
    "BoolFun",
    "SymbolicPauliFrame",
    "conjugate_pauli",
    "conjugate_frame",
    "compose_tableaus",
    "xor_forms",
    "and_forms",
    "as_poly",
    "form_is_zero",
    "MAX_BOOLFUN_VARS",
]

MAX_BOOLFUN_VARS = 20

_PAULI_MATS = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
}
_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTER.items()}
_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LITERAL_RE = re.compile(r"^([+-]?)(i?)([IXYZ]*)$")


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of i in sigma(x1, z1) * sigma(x2, z2) = i**g * sigma(x1^x2, z1^z2)."""
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of I/X/Y/Z."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    phase: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z bit vectors must have equal length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        x = [0] * n
        z = [0] * n
        x[qubit], z[qubit] = _BITS[letter]
        return cls(tuple(x), tuple(z))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse literals like ``"+XIZ"``, ``"-iYY"`` or ``"XZ"``."""
        m = _LITERAL_RE.match(label.strip())
        if m is None:
            raise ValueError(f"not a Pauli literal: {label!r}")
        sign, imag, letters = m.groups()
        phase = (2 if sign == "-" else 0) + (1 if imag else 0)
        bits = [_BITS[c] for c in letters]
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @property
    def label(self) -> str:
        return _PHASE_PREFIX[self.phase] + "".join(
            _LETTER[(a, b)] for a, b in zip(self.x, self.z)
        )

    def __str__(self) -> str:
        return self.label

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        k = self.phase + other.phase
        for a, b, c, d in zip(self.x, self.z, other.x, other.z):
            k += _g(a, b, c, d)
        x = tuple(a ^ c for a, c in zip(self.x, other.x))
        z = tuple(b ^ d for b, d in zip(self.z, other.z))
        return PauliString(x, z, k)

    def commutes(self, other: "PauliString") -> bool:
        s = sum(a * d + b * c for a, b, c, d in zip(self.x, self.z, other.x, other.z))
        return s % 2 == 0

    def equal_up_to_phase(self, other: "PauliString") -> bool:
        return self.x == other.x and self.z == other.z

    @property
    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    def to_matrix(self) -> np.ndarray:
        mat = np.array([[1j**self.phase]], dtype=complex)
        for a, b in zip(self.x, self.z):
            mat = np.kron(mat, _PAULI_MATS[(a, b)])
        return mat


# -- Clifford tableaus -------------------------------------------------------

# Images of the local generators (X_0, .., X_{k-1}, Z_0, .., Z_{k-1}) under
# U P U^dagger, for the Clifford gate library.
_GATE_IMAGES = {
    "i": ("+X", "+Z"),
    "h": ("+Z", "+X"),
    "s": ("+Y", "+Z"),
    "sdg": ("-Y", "+Z"),
    "x": ("+X", "-Z"),
    "y": ("-X", "-Z"),
    "z": ("-X", "+Z"),
    "cnot": ("+XX", "+IX", "+ZI", "+ZZ"),
    "cz": ("+XZ", "+ZX", "+ZI", "+IZ"),
    "swap": ("+IX", "+XI", "+IZ", "+ZI"),
}


def _embed(local: PauliString, qubits: Sequence[int], n: int) -> PauliString:
    x = [0] * n
    z = [0] * n
    for q, a, b in zip(qubits, local.x, local.z):
        x[q], z[q] = a, b
    return PauliString(tuple(x), tuple(z), local.phase)


class CliffordTableau:
    """A Clifford unitary ``U`` stored through ``U X_i U^dag`` and ``U Z_i U^dag``."""

    __slots__ = ("n", "images")

    def __init__(self, images: Sequence[PauliString]):
        images = tuple(images)
        if len(images) % 2:
            raise ValueError("tableau needs 2n generator images")
        self.n = len(images) // 2
        if any(p.n != self.n for p in images):
            raise ValueError("generator image dimension mismatch")
        self.images = images

    @classmethod
    def identity(cls, n: int) -> "CliffordTableau":
        return cls(
            [PauliString.single(n, q, "X") for q in range(n)]
            + [PauliString.single(n, q, "Z") for q in range(n)]
        )

    @classmethod
    def from_gate(cls, kind: str, qubits: Sequence[int], n: int) -> "CliffordTableau":
        kind = kind.lower()
        if kind not in _GATE_IMAGES:
            raise ValueError(f"{kind!r} is not a Clifford gate")
        labels = _GATE_IMAGES[kind]
        k = len(labels) // 2
        if len(qubits) != k or len(set(qubits)) != k:
            raise ValueError(f"{kind} acts on {k} distinct qubit(s), got {tuple(qubits)}")
        if any(q < 0 or q >= n for q in qubits):
            raise ValueError(f"qubit out of range for {n} qubits: {tuple(qubits)}")
        images = list(cls.identity(n).images)
        for j, q in enumerate(qubits):
            images[q] = _embed(PauliString.from_label(labels[j]), qubits, n)
            images[n + q] = _embed(PauliString.from_label(labels[k + j]), qubits, n)
        return cls(images)

    @classmethod
    def from_gates(cls, gates: Iterable, n: int) -> "CliffordTableau":
        """Tableau of a gate sequence (first gate applied first).

        Items are ``(kind, qubits)`` pairs or objects with ``kind``/``qubits``.
        """
        t = cls.identity(n)
        for g in gates:
            kind, qubits = (g.kind, g.qubits) if hasattr(g, "kind") else g
            t = compose_tableaus(cls.from_gate(kind, qubits, n), t)
        return t

    @classmethod
    def from_unitary(cls, u: np.ndarray, atol: float = 1e-9) -> "CliffordTableau":
        """Extract the tableau of a Clifford matrix by brute-force Pauli decomposition."""
        dim = u.shape[0]
        n = int(round(np.log2(dim)))
        if 2**n != dim:
            raise ValueError("matrix dimension is not a power of two")
        images = []
        for letter in "XZ":
            for q in range(n):
                conj = u @ PauliString.single(n, q, letter).to_matrix() @ u.conj().T
                images.append(_decompose_pauli(conj, n, atol))
        return cls(images[:n] + images[n:])

    def __eq__(self, other) -> bool:
        return isinstance(other, CliffordTableau) and self.images == other.images

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        xs = ", ".join(p.label for p in self.images[: self.n])
        zs = ", ".join(p.label for p in self.images[self.n :])
        return f"CliffordTableau(X->[{xs}], Z->[{zs}])"

    def image_x(self, q: int) -> PauliString:
        return self.images[q]

    def image_z(self, q: int) -> PauliString:
        return self.images[self.n + q]

    def is_symplectic(self) -> bool:
        n = self.n
        for i in range(n):
            for j in range(n):
                xi, zi = self.image_x(i), self.image_z(i)
                xj, zj = self.image_x(j), self.image_z(j)
                if not xi.commutes(xj) or not zi.commutes(zj):
                    return False
                if xi.commutes(zj) != (i != j):
                    return False
        return all(p.phase % 2 == 0 for p in self.images)

    def to_symplectic(self) -> np.ndarray:
        """2n x 2n GF(2) matrix whose row k is the (x|z) image of generator k."""
        return np.array([list(p.x) + list(p.z) for p in self.images], dtype=np.uint8)


def _decompose_pauli(mat: np.ndarray, n: int, atol: float) -> PauliString:
    dim = 2**n
    for bits in itertools.product((0, 1), repeat=2 * n):
        p = PauliString(bits[:n], bits[n:])
        c = np.trace(p.to_matrix().conj().T @ mat) / dim
        if abs(c) > 0.5:
            for k in range(4):
                if abs(c - 1j**k) < atol:
                    return PauliString(p.x, p.z, k)
            raise ValueError("conjugated operator has a non-Pauli phase; not Clifford")
    raise ValueError("matrix does not conjugate Paulis to Paulis; not Clifford")


def conjugate_pauli(t: CliffordTableau, p: PauliString) -> PauliString:
    """Return ``U p U^dag`` with exact phase."""
    if t.n != p.n:
        raise ValueError(f"dimension mismatch: tableau on {t.n} qubits, Pauli on {p.n}")
    n_y = sum(1 for a, b in zip(p.x, p.z) if a and b)
    out = PauliString((0,) * p.n, (0,) * p.n, p.phase + n_y)
    for q in range(p.n):
        if p.x[q]:
            out = out * t.image_x(q)
        if p.z[q]:
            out = out * t.image_z(q)
    return out


def compose_tableaus(a: CliffordTableau, b: CliffordTableau) -> CliffordTableau:
    """Tableau of ``A B`` (``b`` applied first)."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    return CliffordTableau([conjugate_pauli(a, img) for img in b.images])


# -- Boolean forms -----------------------------------------------------------


@dataclass(frozen=True)
class AffineForm:
    """XOR of a set of variables and a constant bit."""

    mask: frozenset = frozenset()
    constant: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mask", frozenset(self.mask))
        object.__setattr__(self, "constant", int(self.constant) & 1)

    @classmethod
    def var(cls, name: str) -> "AffineForm":
        return cls(frozenset([name]))

    @classmethod
    def const(cls, bit: int) -> "AffineForm":
        return cls(frozenset(), bit)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted(self.mask))

    def is_zero(self) -> bool:
        return not self.mask and not self.constant

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        v = self.constant
        for name in self.mask:
            v ^= int(assignment[name]) & 1
        return v

    def __xor__(self, other):
        if isinstance(other, AffineForm):
            return AffineForm(self.mask ^ other.mask, self.constant ^ other.constant)
        return xor_forms(self, other)

    def __str__(self) -> str:
        terms = list(self.variables) + (["1"] if self.constant else [])
        return " + ".join(terms) if terms else "0"


def _monomial_key(m: frozenset) -> tuple:
    return (len(m), tuple(sorted(m)))


@dataclass(frozen=True)
class GF2Poly:
    """Boolean function in algebraic normal form: XOR of AND-monomials.

    The empty monomial is the constant 1.
    """

    monomials: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self, "monomials", frozenset(frozenset(m) for m in self.monomials)
        )

    @classmethod
    def var(cls, name: str) -> "GF2Poly":
        return cls(frozenset([frozenset([name])]))

    @classmethod
    def const(cls, bit: int) -> "GF2Poly":
        return cls(frozenset([frozenset()]) if bit & 1 else frozenset())

    @classmethod
    def from_affine(cls, form: AffineForm) -> "GF2Poly":
        monos = {frozenset([v]) for v in form.mask}
        if form.constant:
            monos.add(frozenset())
        return cls(frozenset(monos))

    @classmethod
    def indicator(cls, assignment: Mapping[str, int]) -> "GF2Poly":
        """Polynomial equal to 1 exactly at ``assignment``."""
        out = cls.const(1)
        for name, bit in assignment.items():
            lit = cls.var(name) if bit else cls.var(name) ^ cls.const(1)
            out = out & lit
        return out

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted(set().union(*self.monomials))) if self.monomials else ()

    @property
    def degree(self) -> int:
        return max((len(m) for m in self.monomials), default=0)

    def is_zero(self) -> bool:
        return not self.monomials

    def is_affine(self) -> bool:
        return self.degree <= 1

    def to_affine(self) -> AffineForm:
        if not self.is_affine():
            raise ValueError(f"polynomial of degree {self.degree} is not affine")
        const = int(frozenset() in self.monomials)
        return AffineForm(frozenset(next(iter(m)) for m in self.monomials if m), const)

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        v = 0
        for m in self.monomials:
            if all(int(assignment[name]) & 1 for name in m):
                v ^= 1
        return v

    def evaluate_batch(self, columns: Mapping[str, np.ndarray], size: int) -> np.ndarray:
        """Vectorised evaluation; ``columns[name]`` is a uint8 array of length ``size``."""
        out = np.zeros(size, dtype=np.uint8)
        for m in self.monomials:
            term = np.ones(size, dtype=np.uint8)
            for name in m:
                term &= columns[name]
            out ^= term
        return out

    def restrict(self, assignment: Mapping[str, int]) -> "GF2Poly":
        """Substitute constants for some variables."""
        acc: set = set()
        for m in self.monomials:
            if any(name in assignment and not assignment[name] & 1 for name in m):
                continue
            reduced = frozenset(name for name in m if name not in assignment)
            acc ^= {reduced}
        return GF2Poly(frozenset(acc))

    def __xor__(self, other) -> "GF2Poly":
        return GF2Poly(self.monomials ^ as_poly(other).monomials)

    def __and__(self, other) -> "GF2Poly":
        other = as_poly(other)
        acc: set = set()
        for a in self.monomials:
            for b in other.monomials:
                acc ^= {a | b}
        return GF2Poly(frozenset(acc))

    def __str__(self) -> str:
        if not self.monomials:
            return "0"
        parts = []
        for m in sorted(self.monomials, key=_monomial_key):
            parts.append("*".join(sorted(m)) if m else "1")
        return " + ".join(parts)


class BoolFun:
    """Truth-table Boolean function of at most 20 named variables.

    Bit ``i`` of a table index is the value of ``variables[i]``.
    """

    __slots__ = ("variables", "table")

    def __init__(self, variables: Sequence[str], table):
        variables = tuple(variables)
        if len(variables) > MAX_BOOLFUN_VARS:
            raise ValueError(
                f"BoolFun limited to {MAX_BOOLFUN_VARS} variables, got {len(variables)}"
            )
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate variable names")
        table = np.asarray(table, dtype=np.uint8) & 1
        if table.shape != (2 ** len(variables),):
            raise ValueError(
                f"truth table needs {2 ** len(variables)} entries, got {table.shape}"
            )
        table.setflags(write=False)
        self.variables = variables
        self.table = table

    @classmethod
    def from_callable(cls, variables: Sequence[str], fn) -> "BoolFun":
        variables = tuple(variables)
        table = [
            fn({v: (idx >> i) & 1 for i, v in enumerate(variables)})
            for idx in range(2 ** len(variables))
        ]
        return cls(variables, table)

    @classmethod
    def from_form(cls, form, variables: Sequence[str] | None = None) -> "BoolFun":
        if isinstance(form, BoolFun) and variables is None:
            return form
        variables = tuple(variables) if variables is not None else form.variables
        return cls.from_callable(variables, form.evaluate)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def index_of(self, assignment: Mapping[str, int]) -> int:
        return sum((int(assignment[v]) & 1) << i for i, v in enumerate(self.variables))

    def evaluate(self, assignment: Mapping[str, int]) -> int:
        return int(self.table[self.index_of(assignment)])

    def is_zero(self) -> bool:
        return not self.table.any()

    def to_poly(self) -> GF2Poly:
        """Moebius transform to algebraic normal form."""
        coeffs = self.table.astype(np.uint8).copy()
        k = self.n_vars
        for i in range(k):
            step = 1 << i
            idx = np.arange(coeffs.size)
            hi = idx[(idx & step) != 0]
            coeffs[hi] ^= coeffs[hi ^ step]
        monos = [
            frozenset(v for i, v in enumerate(self.variables) if (idx >> i) & 1)
            for idx in np.flatnonzero(coeffs)
        ]
        return GF2Poly(frozenset(monos))

    def is_affine(self) -> bool:
        return self.to_poly().is_affine()

    def to_affine(self) -> AffineForm:
        return self.to_poly().to_affine()

    def __xor__(self, other):
        if isinstance(other, (BoolFun, AffineForm)):
            names = tuple(dict.fromkeys(self.variables + other.variables))
            if len(names) <= MAX_BOOLFUN_VARS:
                return BoolFun.from_callable(
                    names, lambda a: self.evaluate(a) ^ other.evaluate(a)
                )
        return xor_forms(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoolFun):
            return NotImplemented
        return self.variables == other.variables and np.array_equal(self.table, other.table)

    def __hash__(self) -> int:
        return hash((self.variables, self.table.tobytes()))

    def __repr__(self) -> str:
        return f"BoolFun({self.variables}, {''.join(map(str, self.table))})"


Form = Union[AffineForm, GF2Poly, BoolFun]
ZERO = AffineForm()


def as_poly(form) -> GF2Poly:
    if isinstance(form, GF2Poly):
        return form
    if isinstance(form, AffineForm):
        return GF2Poly.from_affine(form)
    if isinstance(form, BoolFun):
        return form.to_poly()
    if isinstance(form, int):
        return GF2Poly.const(form)
    raise TypeError(f"not a Boolean form: {form!r}")


def xor_forms(a, b):
    if isinstance(a, AffineForm) and isinstance(b, AffineForm):
        return a ^ b
    if isinstance(a, GF2Poly) or isinstance(b, GF2Poly):
        return as_poly(a) ^ as_poly(b)
    return a ^ b  # BoolFun with BoolFun/AffineForm


def and_forms(a, b) -> GF2Poly:
    return as_poly(a) & as_poly(b)


def form_is_zero(form) -> bool:
    return form.is_zero()


def _xor_all(forms: Iterable):
    return reduce(xor_forms, forms, ZERO)


class SymbolicPauliFrame:
    """Per-qubit ``(x_form, z_form)``: the frame ``prod X^x_form Z^z_form``.

    Immutable; every update returns a new frame.
    """

    __slots__ = ("xs", "zs")

    def __init__(self, xs: Sequence, zs: Sequence):
        if len(xs) != len(zs):
            raise ValueError("x and z form lists differ in length")
        self.xs = tuple(xs)
        self.zs = tuple(zs)

    @classmethod
    def zero(cls, n: int) -> "SymbolicPauliFrame":
        return cls((ZERO,) * n, (ZERO,) * n)

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def variables(self) -> tuple[str, ...]:
        names: set = set()
        for f in self.xs + self.zs:
            names.update(f.variables)
        return tuple(sorted(names))

    def evaluate(self, assignment: Mapping[str, int]) -> PauliString:
        """Concrete Pauli ``X^a Z^b`` per qubit (phase dropped)."""
        return PauliString(
            tuple(f.evaluate(assignment) for f in self.xs),
            tuple(f.evaluate(assignment) for f in self.zs),
        )

    def with_forms(self, qubit: int, x=None, z=None) -> "SymbolicPauliFrame":
        xs, zs = list(self.xs), list(self.zs)
        if x is not None:
            xs[qubit] = x
        if z is not None:
            zs[qubit] = z
        return SymbolicPauliFrame(xs, zs)

    def xor_at(self, qubit: int, x=None, z=None) -> "SymbolicPauliFrame":
        xs, zs = list(self.xs), list(self.zs)
        if x is not None:
            xs[qubit] = xor_forms(xs[qubit], x)
        if z is not None:
            zs[qubit] = xor_forms(zs[qubit], z)
        return SymbolicPauliFrame(xs, zs)

    def apply_gate(self, kind: str, qubits: Sequence[int]) -> "SymbolicPauliFrame":
        """Conjugate through one Clifford gate (fast path, phase-free)."""
        xs, zs = list(self.xs), list(self.zs)
        if kind in ("x", "y", "z", "i"):
            pass
        elif kind == "h":
            (q,) = qubits
            xs[q], zs[q] = zs[q], xs[q]
        elif kind in ("s", "sdg"):
            (q,) = qubits
            zs[q] = xor_forms(zs[q], xs[q])
        elif kind == "cnot":
            c, t = qubits
            xs[t] = xor_forms(xs[t], xs[c])
            zs[c] = xor_forms(zs[c], zs[t])
        elif kind == "cz":
            a, b = qubits
            za = xor_forms(zs[a], xs[b])
            zs[b] = xor_forms(zs[b], xs[a])
            zs[a] = za
        elif kind == "swap":
            a, b = qubits
            xs[a], xs[b] = xs[b], xs[a]
            zs[a], zs[b] = zs[b], zs[a]
        else:
            raise ValueError(f"{kind!r} is not a Clifford gate")
        return SymbolicPauliFrame(xs, zs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SymbolicPauliFrame)
            and self.xs == other.xs
            and self.zs == other.zs
        )

    def __repr__(self) -> str:
        cells = [f"q{q}:(x={x}, z={z})" for q, (x, z) in enumerate(zip(self.xs, self.zs))]
        return "SymbolicPauliFrame(" + ", ".join(cells) + ")"


def conjugate_frame(t: CliffordTableau, f: SymbolicPauliFrame) -> SymbolicPauliFrame:
    """Push a symbolic frame through a Clifford given by its tableau."""
    if t.n != f.n:
        raise ValueError(f"dimension mismatch: tableau on {t.n} qubits, frame on {f.n}")
    n = t.n
    new_x, new_z = [], []
    for k in range(n):
        new_x.append(
            _xor_all(
                [f.xs[j] for j in range(n) if t.image_x(j).x[k]]
                + [f.zs[j] for j in range(n) if t.image_z(j).x[k]]
            )
        )
        new_z.append(
            _xor_all(
                [f.xs[j] for j in range(n) if t.image_x(j).z[k]]
                + [f.zs[j] for j in range(n) if t.image_z(j).z[k]]
            )
        )
    return SymbolicPauliFrame(new_x, new_z)
