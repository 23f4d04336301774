import itertools

import numpy as np
import pytest

from magicomm.circuit import CircuitSyntaxError, Gate, LayeredCircuit
from magicomm.gardenhose import brute_force_gh, tabular_gh
from magicomm.pauli import GF2Poly
from magicomm.psm import (
    MAX_T_DEPTH,
    PsmTransformer,
    QSmpSpec,
    VarPool,
    audit_privacy,
    bit_uniformity_pvalues,
    exact_transcript_distribution,
    gh_pgadget,
    load_spec,
    parse_spec,
    run_many,
    run_transcript,
    serialize_spec,
    transform,
    xor_pgadget,
)
from magicomm.statevector import BELL_STATES, apply_gate

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0 + 0j, -1.0])
P_OF = {"sdg": "s", "s": "sdg"}


def _random_qubit(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def _proportional(out, want):
    """``out = c * want`` for some scalar c (``want`` has unit norm)."""
    return abs(abs(np.vdot(want, out)) ** 2 - np.vdot(out, out).real) < 1e-10


def _output_probability(protocol, x, y):
    dist = exact_transcript_distribution(protocol, x, y)
    names = protocol.pool.names
    total = p1 = 0.0
    for (r, s), p in dist.items():
        total += p
        if s ^ protocol.decoder.evaluate(dict(zip(names, r))):
            p1 += p
    return p1, total


def _random_spec(seed):
    rng = np.random.default_rng(seed)
    alice = LayeredCircuit(1, 1, [Gate("h", (1,)), Gate("cz", (0, 1)), Gate("t", (1,)), Gate("h", (1,))])
    bob = LayeredCircuit(1, 1, [Gate("cnot", (0, 1)), Gate("h", (1,)), Gate("tdg", (1,))])
    kinds = ["h", "s", "cnot", "cz", "sdg", "h", "h"]
    while True:
        n = 2 + int(rng.integers(0, 2))
        gates = []
        for _ in range(2):
            for _ in range(int(rng.integers(2, 6))):
                k = kinds[rng.integers(len(kinds))]
                if k in ("cnot", "cz"):
                    gates.append(Gate(k, tuple(int(v) for v in rng.choice(n, 2, replace=False))))
                else:
                    gates.append(Gate(k, (int(rng.integers(n)),)))
            for q in rng.choice(n, int(rng.integers(1, 3)), replace=False):
                gates.append(Gate(["t", "tdg"][rng.integers(2)], (int(q),)))
        gates.append(Gate("h", (0,)))
        spec = QSmpSpec(alice, bob, (1,), (1,), LayeredCircuit(2, n - 2, gates, 0), n_epr=1)
        if spec.t_depth <= MAX_T_DEPTH and transform(spec).n_vars <= 18:
            return spec


# -- gadgets against dense oracles ----------------------------------------------


@pytest.mark.parametrize("pdag", ["sdg", "s"])
def test_xor_gadget_dense_oracle(pdag):
    pool = VarPool()
    a_name, b_name = pool.new("alice"), pool.new("bob")
    gad = xor_pgadget(0, GF2Poly.var(a_name), GF2Poly.var(b_name), pool, pdag)
    u1, v1, u2, v2 = gad.variables
    psi = _random_qubit(1)
    phi = BELL_STATES[(0, 0)].reshape(2, 2)
    for a, b in itertools.product((0, 1), repeat=2):
        # qubits: 0 target, (1, 2) and (3, 4) EPR pairs
        state = np.einsum("a,bc,de->abcde", psi, phi, phi)
        if a ^ b:
            state = apply_gate(state, Gate(P_OF[pdag], (0,)))
        if a:
            state = apply_gate(state, Gate(pdag, (0,)))
        total = 0.0
        for o1, o2 in itertools.product(itertools.product((0, 1), repeat=2), repeat=2):
            s1 = np.tensordot(BELL_STATES[o1].conj().reshape(2, 2), state, axes=([0, 1], [0, 1]))
            if b:
                s1 = apply_gate(s1, Gate(pdag, (0,)))
            out = np.tensordot(BELL_STATES[o2].conj().reshape(2, 2), s1, axes=([0, 1], [0, 1]))
            env = {a_name: a, b_name: b, u1: o1[0], v1: o1[1], u2: o2[0], v2: o2[1]}
            g, h = gad.g.evaluate(env), gad.h.evaluate(env)
            want = np.linalg.matrix_power(X, g) @ np.linalg.matrix_power(Z, h) @ psi
            assert _proportional(out.reshape(2), want)
            assert np.vdot(out, out).real == pytest.approx(1 / 16)
            total += np.vdot(out, out).real
        assert total == pytest.approx(1.0)


def _dense_network_check(gad, key, psi):
    """Contract the full EPR network for one input assignment and check every outcome."""
    net = gad.networks[key]
    case = gad.cases[key]
    s = gad.gh.pipes
    ends = ["t"] + [f"{side}{j}" for side in "ABCD" for j in range(s)]
    axis = {e: k for k, e in enumerate(ends)}
    state = psi.copy()
    for _ in range(2 * s):
        state = np.multiply.outer(state, np.eye(2, dtype=complex) / np.sqrt(2))
    # built as t, (A0 B0), (A1 B1), .., (C0 D0), ..; move to the ``ends`` layout
    built = ["t"] + [e for j in range(s) for e in (f"A{j}", f"B{j}")]
    built += [e for j in range(s) for e in (f"C{j}", f"D{j}")]
    state = np.moveaxis(state, list(range(len(built))), [axis[e] for e in built])
    names = gad.alice_vars + gad.bob_vars
    cond = gad.condition.evaluate(dict(zip(names, key)))
    if cond:
        state = apply_gate(state, Gate(P_OF[gad.pdag], (axis["t"],)))
    for e in net.pdag_ends:
        state = apply_gate(state, Gate(gad.pdag, (axis[e],)))
    labels = list(ends)
    bras = np.stack([BELL_STATES[o].conj().reshape(2, 2) for o in itertools.product((0, 1), repeat=2)])
    for k, bm in enumerate(net.measurements):
        i, j = labels.index(bm.ends[0]), labels.index(bm.ends[1])
        state = np.tensordot(bras, state, axes=([1, 2], [i, j]))
        labels = [f"bm{k}"] + [lab for lab in labels if lab not in bm.ends]
    order = [labels.index(net.final)] + [labels.index(f"bm{k}") for k in range(len(net.measurements))]
    state = np.transpose(state, order)
    total = 0.0
    n_path = sum(1 for step in case.path if step[0] == "pauli")
    for digits in itertools.product(range(4), repeat=len(net.measurements)):
        out = state[(slice(None),) + digits]
        env = dict(zip(names, key))
        by_bm = {}
        for bm, d in zip(net.measurements, digits):
            env[bm.u], env[bm.v] = d >> 1, d & 1
            by_bm[bm] = d
        weight = np.vdot(out, out).real
        total += weight
        law = 4.0**-n_path
        for ring in case.rings:
            idx = sum(by_bm[bm] * 4**k for k, bm in enumerate(ring.bms[:-1]))
            law *= 4.0 ** -(len(ring.bms) - 1) * ring.table[idx, by_bm[ring.bms[-1]]]
        assert weight == pytest.approx(law, abs=1e-12)
        if weight > 1e-14:
            g, h = gad.g.evaluate(env), gad.h.evaluate(env)
            want = np.linalg.matrix_power(X, g) @ np.linalg.matrix_power(Z, h) @ psi
            assert _proportional(out, want)
    assert total == pytest.approx(1.0)


@pytest.mark.parametrize(
    "fname, f",
    [("and", lambda a, b: a & b), ("or", lambda a, b: a | b), ("xor", lambda a, b: a ^ b)],
)
@pytest.mark.parametrize("pdag", ["sdg", "s"])
def test_gh_gadget_dense_oracle(fname, f, pdag):
    pool = VarPool()
    a, b = pool.new("alice"), pool.new("bob")
    cond = {"and": GF2Poly.var(a) & GF2Poly.var(b),
            "or": GF2Poly.var(a) ^ GF2Poly.var(b) ^ (GF2Poly.var(a) & GF2Poly.var(b)),
            "xor": GF2Poly.var(a) ^ GF2Poly.var(b)}[fname]
    gh = brute_force_gh(lambda x, y: f(x[0], y[0]))
    gad = gh_pgadget(0, cond, gh, (a,), (b,), pool, pdag)
    assert gad.epr_pairs == 2 * gh.pipes and gad.communication == 0
    for key in itertools.product((0, 1), repeat=2):
        _dense_network_check(gad, key, _random_qubit(sum(key)))


def test_gh_gadget_on_tabular_protocol():
    pool = VarPool()
    a, b = pool.new("alice"), pool.new("bob")
    cond = (GF2Poly.var(a) & GF2Poly.var(b)) ^ GF2Poly.var(a)
    gh = tabular_gh(lambda x, y: cond.evaluate({a: x[0], b: y[0]}), 1, 1)
    gad = gh_pgadget(0, cond, gh, (a,), (b,), pool)
    for key in itertools.product((0, 1), repeat=2):
        _dense_network_check(gad, key, _random_qubit(7))


def test_gh_gadget_rejects_wrong_protocol():
    pool = VarPool()
    a, b = pool.new("alice"), pool.new("bob")
    wrong = brute_force_gh(lambda x, y: x[0] | y[0])
    with pytest.raises(ValueError):
        gh_pgadget(0, GF2Poly.var(a) & GF2Poly.var(b), wrong, (a,), (b,), pool)


# -- the full transformation ----------------------------------------------------


def test_t_depth_zero_is_exact_and_perfectly_private(data_dir):
    spec = load_spec(data_dir / "xor_d0.spec")
    proto = transform(spec)
    assert not proto.gadgets
    assert proto.decoder_is_affine
    dists = {}
    for x, y in spec.inputs():
        p1, total = _output_probability(proto, x, y)
        assert total == pytest.approx(1.0)
        assert p1 == pytest.approx(spec.output_probability(x, y), abs=1e-12)
        assert p1 == pytest.approx(x[0] ^ y[0], abs=1e-12)
        dists[(x, y)] = exact_transcript_distribution(proto, x, y)
    for same in (((0,), (0,)), ((1,), (1,))), (((0,), (1,)), ((1,), (0,))):
        d1, d2 = dists[same[0]], dists[same[1]]
        assert set(d1) == set(d2)
        assert all(abs(d1[k] - d2[k]) < 1e-12 for k in d1)


def test_t_depth_two_fixture_is_exact(data_dir):
    spec = load_spec(data_dir / "tdepth2.spec")
    proto = transform(spec)
    assert proto.t_depth == 2
    assert any(g.kind == "gh" for g in proto.gadgets)
    for x, y in spec.inputs():
        p1, total = _output_probability(proto, x, y)
        assert total == pytest.approx(1.0)
        assert p1 == pytest.approx(spec.output_probability(x, y), abs=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_random_referees_are_exact(seed):
    spec = _random_spec(seed)
    proto = transform(spec)
    for x, y in spec.inputs():
        p1, total = _output_probability(proto, x, y)
        assert total == pytest.approx(1.0)
        assert p1 == pytest.approx(spec.output_probability(x, y), abs=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_random_referees_are_private(seed):
    spec = _random_spec(seed)
    report = audit_privacy(transform(spec))
    assert report.passes
    assert all(a.method == "exact" for a in report.audits)


def test_sampled_output_matches_exact(data_dir):
    spec = load_spec(data_dir / "tdepth2.spec")
    proto = transform(spec)
    res = run_many(proto, (1,), (0,), 20_000, seed=5)
    want = spec.output_probability((1,), (0,))
    assert res["output"].mean() == pytest.approx(want, abs=0.02)
    assert res["accept_given_r"].mean() == pytest.approx(want, abs=0.02)


def test_runs_are_deterministic(data_dir):
    proto = transform(load_spec(data_dir / "tdepth2.spec"))
    a = run_many(proto, (0,), (1,), 500, seed=3)
    b = run_many(proto, (0,), (1,), 500, seed=3)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert run_transcript(proto, (0,), (1,), seed=9) == run_transcript(proto, (0,), (1,), seed=9)


def test_outcome_bits_look_uniform(data_dir):
    proto = transform(load_spec(data_dir / "tdepth2.spec"))
    r = run_many(proto, (1,), (1,), 10_000, seed=0)["r"]
    means = r.mean(axis=0)
    assert np.all((means > 0.47) & (means < 0.53))
    assert bit_uniformity_pvalues(r).min() > 1e-4 / r.shape[1]


def test_transcript_record(data_dir):
    proto = transform(load_spec(data_dir / "tdepth2.spec"))
    rec = run_transcript(proto, (1,), (0,), seed=1)
    assert rec.bits_sent == proto.bits_sent
    assert len(rec.alice_outcomes) + len(rec.bob_outcomes) == proto.n_vars
    assert rec.to_dict()["bits_sent"] == proto.bits_sent


def test_cost_report(data_dir):
    proto = transform(load_spec(data_dir / "tdepth2.spec"))
    rep = proto.cost_report()
    assert rep["bits_sent"] == proto.n_vars + 1
    assert rep["alice_bits"] + rep["bob_bits"] == rep["bits_sent"]
    assert rep["quantum_messages_to_referee"] == 0
    assert rep["within_68_bound"] is True
    assert rep["bound_constant"] == 2 * proto.logical_qubits + 1


# -- spec files and estimator ---------------------------------------------------


def test_spec_round_trip(data_dir):
    for name in ("xor_d0.spec", "tdepth2.spec", "abcd2.spec"):
        spec = load_spec(data_dir / name)
        again = parse_spec(serialize_spec(spec))
        assert again.referee == spec.referee
        assert again.alice_prep == spec.alice_prep and again.bob_prep == spec.bob_prep
        assert again.alice_message == spec.alice_message
        for x, y in itertools.islice(spec.inputs(), 4):
            assert again.output_probability(x, y) == pytest.approx(spec.output_probability(x, y))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[alice]\ninputs 1\nmessage 0\n[bob]\ninputs 1\nmessage 0\n", "missing section"),
        ("bogus 1\n[alice]\n[bob]\n[referee]\n", "unknown header"),
        ("[alice]\ninputs 1\n[bob]\ninputs 1\nmessage 0\n[referee]\ninputs 2\n", "message"),
        ("[alice]\ninputs 1\nmessage 0\n[bob]\ninputs 1\nmessage 0\n[referee]\ninputs 1\n", "referee"),
        ("[alice]\ninputs 1\nmessage 0\n[bob]\ninputs 1\nmessage 0\n[referee]\ninputs 2\ncnott 0 1\n", "line 9"),
        ("[alice]\n[alice]\n", "duplicate"),
    ],
)
def test_spec_parse_errors(text, fragment):
    with pytest.raises(CircuitSyntaxError) as exc:
        parse_spec(text)
    assert fragment in str(exc.value)


def test_transform_rejects_deep_referee():
    gates = [Gate("t", (0,)), Gate("h", (0,))] * 3
    alice = LayeredCircuit(1, 0, [])
    bob = LayeredCircuit(1, 0, [])
    spec = QSmpSpec(alice, bob, (0,), (0,), LayeredCircuit(2, 0, gates), 0)
    with pytest.raises(ValueError, match="T-depth"):
        transform(spec)


def test_transformer_estimator(data_dir):
    spec = load_spec(data_dir / "xor_d0.spec")
    est = PsmTransformer(seed=4).fit(spec)
    rows = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    out = est.transform(rows)
    assert out.shape == (4, est.protocol_.bits_sent)
    assert list(est.predict(rows)) == [0, 1, 1, 0]
    assert np.array_equal(out, PsmTransformer(seed=4).fit(spec).transform(rows))
