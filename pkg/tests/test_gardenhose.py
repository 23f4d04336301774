import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magicomm.gardenhose import (
    TAP,
    GardenHoseError,
    GardenHoseProtocol,
    GardenHoseSearch,
    brute_force_gh,
    evaluate,
    render_path,
    render_protocol,
    tabular_gh,
    truth_table_of,
    xor_compose,
)

X_PROTO = GardenHoseProtocol(1, {"0": [], "1": [(TAP, "A0")]}, {"0": [], "1": []})
Y_PROTO = GardenHoseProtocol(2, {"0": [(TAP, "A0")], "1": [(TAP, "A0")]}, {"0": [("B0", "B1")], "1": []})


def _all(n):
    return list(itertools.product((0, 1), repeat=n))


def test_constant_zero_protocol():
    p = GardenHoseProtocol(0, {"0": [], "1": []}, {"0": [], "1": []})
    ev = evaluate(p, "1", "0")
    assert ev.output == 0 and ev.path == ()


def test_f_equals_x():
    for x, y in _all(2):
        assert evaluate(X_PROTO, (x,), (y,)).output == x


def test_f_equals_y():
    for x, y in _all(2):
        ev = evaluate(Y_PROTO, (x,), (y,))
        assert ev.output == y
    assert evaluate(Y_PROTO, "0", "0").path == ("A0", "B0", "B1", "A1")


def test_path_alternates_sides():
    ev = evaluate(Y_PROTO, "1", "0")
    sides = [e[0] for e in ev.path]
    assert sides == ["A", "B", "B", "A"]


def test_invalid_matchings_are_rejected():
    with pytest.raises(GardenHoseError):
        GardenHoseProtocol(2, {"0": [(TAP, "A0"), ("A0", "A1")]}, {"0": []})
    with pytest.raises(GardenHoseError):
        GardenHoseProtocol(1, {"0": [(TAP, "B0")]}, {"0": []})
    with pytest.raises(GardenHoseError):
        evaluate(X_PROTO, "11", "0")


def test_json_round_trip(data_dir):
    for name in ("gh_and.json", "gh_or.json", "gh_xor.json"):
        text = (data_dir / name).read_text()
        p = GardenHoseProtocol.from_json(text)
        assert GardenHoseProtocol.from_json(p.to_json()) == p
        assert json.loads(p.to_json()) == json.loads(text)
    with pytest.raises(GardenHoseError):
        GardenHoseProtocol.from_json("{\"pipes\": 1}")


def test_fixture_protocols_compute_their_functions(data_dir):
    funcs = {
        "gh_and.json": lambda x, y: x[0] & y[0],
        "gh_or.json": lambda x, y: x[0] | y[0],
        "gh_xor.json": lambda x, y: x[0] ^ y[0],
    }
    for name, f in funcs.items():
        assert GardenHoseProtocol.from_json((data_dir / name).read_text()).computes(f)


# -- composition -----------------------------------------------------------------


def test_compose_single_protocol():
    for c in (0, 1):
        p = xor_compose([Y_PROTO], c)
        assert p.pipes <= 4 * Y_PROTO.pipes + 1
        assert p.computes(lambda x, y: y[0] ^ c)


def test_compose_x_and_y():
    p = xor_compose([X_PROTO, Y_PROTO])
    assert p.pipes <= 13
    assert p.computes(lambda x, y: x[0] ^ y[0])


def test_compose_rejects_mismatched_inputs():
    two_bit = tabular_gh(lambda x, y: x[0], 2, 1)
    with pytest.raises(GardenHoseError):
        xor_compose([X_PROTO, two_bit])
    with pytest.raises(GardenHoseError):
        xor_compose([])


@st.composite
def tables(draw, max_bits=3):
    na = draw(st.integers(1, max_bits))
    nb = draw(st.integers(1, max_bits))
    cells = draw(st.lists(st.integers(0, 1), min_size=2 ** (na + nb), max_size=2 ** (na + nb)))
    return np.array(cells, dtype=np.uint8).reshape(2**na, 2**nb), na, nb


@given(st.lists(tables(), min_size=1, max_size=3), st.integers(0, 1))
def test_compose_is_exact_and_within_bound(parts, c):
    na, nb = parts[0][1], parts[0][2]
    parts = [p for p in parts if (p[1], p[2]) == (na, nb)]
    protos = [tabular_gh(t, na, nb) for t, _, _ in parts]
    out = xor_compose(protos, c)
    want = np.bitwise_xor.reduce([t for t, _, _ in parts]) ^ c
    assert np.array_equal(out.truth_table(), want)
    assert out.pipes == 4 * sum(p.pipes for p in protos) + 1


@given(tables())
def test_tabular_protocol_is_exact(args):
    table, na, nb = args
    assert np.array_equal(tabular_gh(table, na, nb).truth_table(), table)


# -- termination property --------------------------------------------------------


@st.composite
def random_protocols(draw):
    s = draw(st.integers(0, 6))
    na, nb = draw(st.integers(0, 2)), draw(st.integers(0, 2))

    def matching(ends):
        ends = list(ends)
        perm = draw(st.permutations(ends))
        k = draw(st.integers(0, len(perm) // 2))
        return [(perm[2 * i], perm[2 * i + 1]) for i in range(k)]

    a_ends = [TAP] + [f"A{i}" for i in range(s)]
    b_ends = [f"B{i}" for i in range(s)]
    alice = {x: matching(a_ends) for x in itertools.product((0, 1), repeat=na)}
    bob = {y: matching(b_ends) for y in itertools.product((0, 1), repeat=nb)}
    return GardenHoseProtocol(s, alice, bob, na, nb)


@given(random_protocols())
def test_water_path_terminates_and_is_simple(p):
    for x in p.alice:
        for y in p.bob:
            ev = evaluate(p, x, y)
            assert len(ev.path) <= 2 * p.pipes + 1
            assert len(set(ev.path)) == len(ev.path)
            if ev.path:
                assert ev.output == (ev.path[-1][0] == "B")
                am, bm = p.alice_matching(x), p.bob_matching(y)
                assert ev.path[-1] not in (bm if ev.output else am)


# -- search ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "f, na, nb, pipes",
    [
        (lambda x, y: 0, 1, 1, 0),
        (lambda x, y: x[0], 1, 1, 1),
        (lambda x, y: y[0], 1, 1, 2),
        (lambda x, y: x[0] & y[0], 1, 1, 2),
        (lambda x, y: x[0] | y[0], 1, 1, 3),
        (lambda x, y: x[0] ^ y[0], 1, 1, 3),
        (lambda x, y: (x[0] & y[0]) ^ (x[1] & y[1]), 2, 2, 4),
    ],
)
def test_search_minimal_pipes(f, na, nb, pipes):
    p = brute_force_gh(f, na, nb)
    assert p.pipes == pipes and p.computes(f)
    if pipes:
        assert brute_force_gh(f, na, nb, max_pipes=pipes - 1) is None


def test_search_beats_hand_written_protocols():
    for proto, f in ((X_PROTO, lambda x, y: x[0]), (Y_PROTO, lambda x, y: y[0])):
        assert brute_force_gh(f).pipes <= proto.pipes
    xor = xor_compose([X_PROTO, Y_PROTO])
    assert brute_force_gh(lambda x, y: x[0] ^ y[0]).pipes <= xor.pipes


def test_search_caps():
    with pytest.raises(GardenHoseError):
        brute_force_gh(lambda x, y: 0, 3, 1)
    with pytest.raises(GardenHoseError):
        brute_force_gh(lambda x, y: 0, 1, 1, max_pipes=5)


def test_truth_table_shape_check():
    with pytest.raises(GardenHoseError):
        truth_table_of(np.zeros((2, 3)), 1, 1)


def test_rendering():
    text = render_protocol(Y_PROTO)
    assert text.splitlines()[0] == "pipes: 2"
    assert render_path(Y_PROTO, "0", "0").startswith("tap -> A0 -> B0 -> B1 -> A1")


def test_search_estimator():
    table = np.array([[0, 1], [1, 0]])
    est = GardenHoseSearch().fit(table)
    assert est.pipes_ == 3
    rows = np.array(_all(2))
    assert list(est.predict(rows)) == [0, 1, 1, 0]
