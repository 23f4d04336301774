import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magicomm.circuit import Gate
from magicomm.pauli import (
    AffineForm,
    BoolFun,
    CliffordTableau,
    GF2Poly,
    PauliString,
    SymbolicPauliFrame,
    compose_tableaus,
    conjugate_frame,
    conjugate_pauli,
)
from magicomm.statevector import unitary_of

ONE_QUBIT = ["h", "s", "sdg", "x", "y", "z"]
TWO_QUBIT = ["cnot", "cz", "swap"]


@st.composite
def clifford_words(draw, max_qubits=6, max_len=50):
    n = draw(st.integers(1, max_qubits))
    length = draw(st.integers(0, max_len))
    gates = []
    for _ in range(length):
        if n > 1 and draw(st.booleans()):
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            gates.append((draw(st.sampled_from(TWO_QUBIT)), (a, b)))
        else:
            gates.append((draw(st.sampled_from(ONE_QUBIT)), (draw(st.integers(0, n - 1)),)))
    return n, gates


@st.composite
def paulis(draw, n):
    letters = draw(st.text(alphabet="IXYZ", min_size=n, max_size=n))
    sign = draw(st.sampled_from(["+", "-", "+i", "-i"]))
    return PauliString.from_label(sign + letters)


def _matrix(n, gates):
    return unitary_of([Gate(k, q) for k, q in gates], n)


# -- PauliString ------------------------------------------------------------------


@pytest.mark.parametrize("label", ["+XIZ", "-iYY", "+I", "-Z", "+iX", "+"])
def test_label_round_trip(label):
    assert PauliString.from_label(label).label == label


def test_y_is_i_x_z():
    x, z = PauliString.from_label("+X"), PauliString.from_label("+Z")
    assert (x * z).label == "-iY"
    y = PauliString.from_label("+Y").to_matrix()
    assert np.allclose(y, 1j * x.to_matrix() @ z.to_matrix())


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(paulis(n), paulis(n))))
def test_product_matches_matrices(pair):
    a, b = pair
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())
    anti = np.allclose(a.to_matrix() @ b.to_matrix(), -b.to_matrix() @ a.to_matrix())
    assert a.commutes(b) != anti


# -- tableaus ---------------------------------------------------------------------


def test_s_maps_x_to_y():
    t = CliffordTableau.from_gate("s", (0,), 1)
    assert conjugate_pauli(t, PauliString.from_label("+X")).label == "+Y"


def test_compose_examples():
    h = CliffordTableau.from_gate("h", (0,), 1)
    s = CliffordTableau.from_gate("s", (0,), 1)
    ident = CliffordTableau.identity(1)
    assert compose_tableaus(ident, h) == h
    assert compose_tableaus(h, h) == ident
    assert compose_tableaus(s, s) == CliffordTableau.from_gate("z", (0,), 1)


@given(clifford_words())
def test_random_words_stay_symplectic(word):
    n, gates = word
    t = CliffordTableau.identity(n)
    for kind, qs in gates:
        t = compose_tableaus(CliffordTableau.from_gate(kind, qs, n), t)
        assert t.is_symplectic()


@given(clifford_words(max_qubits=3, max_len=12).flatmap(
    lambda w: st.tuples(st.just(w), paulis(w[0]), paulis(w[0]))
))
def test_conjugation_is_a_homomorphism_and_matches_matrices(args):
    (n, gates), p, q = args
    t = CliffordTableau.from_gates([Gate(k, qs) for k, qs in gates], n)
    lhs = conjugate_pauli(t, p * q)
    rhs = conjugate_pauli(t, p) * conjugate_pauli(t, q)
    assert lhs == rhs
    u = _matrix(n, gates)
    assert np.allclose(conjugate_pauli(t, p).to_matrix(), u @ p.to_matrix() @ u.conj().T)


@given(clifford_words(max_qubits=3, max_len=10), clifford_words(max_qubits=3, max_len=10))
def test_compose_agrees_with_sequential_conjugation(w1, w2):
    n = max(w1[0], w2[0])
    a = CliffordTableau.from_gates([Gate(k, q) for k, q in w1[1]], n)
    b = CliffordTableau.from_gates([Gate(k, q) for k, q in w2[1]], n)
    ab = compose_tableaus(a, b)
    for j in range(n):
        for gen in (PauliString.single(n, j, "X"), PauliString.single(n, j, "Z")):
            assert conjugate_pauli(ab, gen) == conjugate_pauli(a, conjugate_pauli(b, gen))


def test_from_unitary_recovers_gate_tableau():
    for kind, qs, n in [("h", (0,), 1), ("s", (0,), 1), ("cnot", (0, 1), 2), ("cz", (1, 0), 2)]:
        u = unitary_of([Gate(kind, qs)], n)
        assert CliffordTableau.from_unitary(u) == CliffordTableau.from_gate(kind, qs, n)


# -- forms ------------------------------------------------------------------------


def test_affine_form_algebra():
    f = AffineForm.var("x0") ^ AffineForm.var("y1") ^ AffineForm.const(1)
    assert f.evaluate({"x0": 1, "y1": 1}) == 1
    assert (f ^ f).is_zero()
    assert f.variables == ("x0", "y1")


def test_poly_product_and_restrict():
    a, b = GF2Poly.var("a"), GF2Poly.var("b")
    p = (a & b) ^ a
    assert p.degree == 2 and not p.is_affine()
    assert p.restrict({"b": 1}).is_zero()
    assert p.restrict({"b": 0}) == a
    for va, vb in itertools.product((0, 1), repeat=2):
        assert p.evaluate({"a": va, "b": vb}) == (va & (1 - vb))


def test_indicator_poly():
    ind = GF2Poly.indicator({"a": 1, "b": 0})
    for va, vb in itertools.product((0, 1), repeat=2):
        assert ind.evaluate({"a": va, "b": vb}) == int((va, vb) == (1, 0))


@given(st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_boolfun_moebius_round_trip(table):
    f = BoolFun(["a", "b", "c"], table)
    assert BoolFun.from_form(f.to_poly(), ["a", "b", "c"]) == f


def test_evaluate_batch_matches_scalar():
    p = (GF2Poly.var("r0") & GF2Poly.var("r2")) ^ GF2Poly.var("r1") ^ GF2Poly.const(1)
    rng = np.random.default_rng(0)
    cols = {n: rng.integers(0, 2, 50).astype(np.uint8) for n in ("r0", "r1", "r2")}
    batch = p.evaluate_batch(cols, 50)
    for i in range(50):
        assert batch[i] == p.evaluate({n: int(c[i]) for n, c in cols.items()})


def test_boolfun_cap():
    with pytest.raises(ValueError):
        BoolFun([f"v{i}" for i in range(21)], np.zeros(2**21, dtype=np.uint8))


# -- frames -----------------------------------------------------------------------


def test_identity_tableau_keeps_frame():
    f = SymbolicPauliFrame.zero(2).xor_at(0, x=AffineForm.var("x1"), z=AffineForm.var("y0"))
    assert conjugate_frame(CliffordTableau.identity(2), f) == f


def test_cnot_spreads_x():
    f = SymbolicPauliFrame.zero(2).xor_at(0, x=AffineForm.var("x1"))
    g = conjugate_frame(CliffordTableau.from_gate("cnot", (0, 1), 2), f)
    assert g.xs == (AffineForm.var("x1"), AffineForm.var("x1"))
    assert all(z.is_zero() for z in g.zs)


@st.composite
def frames(draw, n, names):
    def form():
        chosen = draw(st.lists(st.sampled_from(names), unique=True, max_size=len(names)))
        out = AffineForm.const(draw(st.integers(0, 1)))
        for v in chosen:
            out = out ^ AffineForm.var(v)
        return out

    return SymbolicPauliFrame([form() for _ in range(n)], [form() for _ in range(n)])


@given(
    clifford_words(max_qubits=4, max_len=20).flatmap(
        lambda w: st.tuples(
            st.just(w),
            st.integers(1, 10).flatmap(
                lambda k: frames(w[0], [f"v{i}" for i in range(k)])
            ),
        )
    )
)
def test_frame_commuting_diagram(args):
    (n, gates), frame = args
    t = CliffordTableau.from_gates([Gate(k, q) for k, q in gates], n)
    symbolic = conjugate_frame(t, frame)
    fast = frame
    for kind, qs in gates:
        fast = fast.apply_gate(kind, qs)
    names = frame.variables
    for bits in itertools.product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        concrete = conjugate_pauli(t, frame.evaluate(env))
        assert symbolic.evaluate(env).equal_up_to_phase(concrete)
        assert fast.evaluate(env).equal_up_to_phase(concrete)


def test_frame_evaluation_matches_statevector_conjugation():
    gates = [("h", (0,)), ("cnot", (0, 1)), ("s", (2,)), ("cz", (1, 2)), ("swap", (0, 2))]
    t = CliffordTableau.from_gates([Gate(k, q) for k, q in gates], 3)
    u = _matrix(3, gates)
    frame = SymbolicPauliFrame(
        [AffineForm.var("a"), AffineForm(), AffineForm.var("b")],
        [AffineForm(), AffineForm.var("a") ^ AffineForm.var("b"), AffineForm()],
    )
    out = conjugate_frame(t, frame)
    for a, b in itertools.product((0, 1), repeat=2):
        env = {"a": a, "b": b}
        want = u @ frame.evaluate(env).to_matrix() @ u.conj().T
        got = out.evaluate(env).to_matrix()
        phase = np.vdot(got.ravel(), want.ravel()) / 8
        assert abs(abs(phase) - 1) < 1e-9
        assert np.allclose(want, phase * got)
