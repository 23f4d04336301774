import itertools

import numpy as np
import pytest

from magicomm.problems import (
    AbcdInstance,
    ForrelationInstance,
    abcd_accept_probability,
    abcd_qsmp_spec,
    build_index_circuit,
    equality_pipeline,
    forr,
    forr_naive,
    fwht,
    index_pipeline,
    multiplexer_table,
    random_special_unitary,
)
from magicomm.statevector import run

# -- Forrelation ------------------------------------------------------------------


def test_forr_all_ones_n8():
    assert forr(np.ones(8)) == pytest.approx(0.25, abs=1e-15)


def test_forr_sign_flip():
    rng = np.random.default_rng(0)
    x = rng.choice((-1, 1), 16)
    flipped = x.copy()
    flipped[8:] *= -1
    assert forr(flipped) == pytest.approx(-forr(x), abs=1e-15)


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_forr_matches_naive(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        x = rng.choice((-1, 1), n)
        v = forr(x)
        assert abs(v - forr_naive(x)) < 1e-12
        assert abs(v) <= 1


def test_fwht_is_hadamard_matrix():
    h = np.array([[1, 1], [1, -1]])
    h4 = np.kron(h, h)
    v = np.arange(4.0)
    assert np.allclose(fwht(v), h4 @ v)
    with pytest.raises(ValueError):
        fwht(np.ones(6))


def test_forr_validation():
    with pytest.raises(ValueError):
        forr(np.ones(6))
    with pytest.raises(ValueError):
        forr(np.array([1, 0, 1, 1]))


def test_forrelation_instance_promise():
    ones = ForrelationInstance(np.ones(8), np.ones(8), alpha=0.2)
    assert ones.value == pytest.approx(0.25) and ones.promise == "high"
    assert ForrelationInstance(np.ones(8), np.ones(8), alpha=0.6).promise == "low"
    assert ForrelationInstance(np.ones(8), np.ones(8), alpha=0.3).promise == "none"
    r = ForrelationInstance.random(16, seed=3)
    assert r.to_dict()["n"] == 16
    with pytest.raises(ValueError):
        ForrelationInstance(np.ones(8), np.ones(4))


# -- ABCD ---------------------------------------------------------------------------


def test_special_unitary():
    u = random_special_unitary(4, np.random.default_rng(1))
    assert np.allclose(u.conj().T @ u, np.eye(4))
    assert np.linalg.det(u) == pytest.approx(1.0)


def test_identity_accepts():
    eye = np.eye(2, dtype=complex)
    assert abcd_accept_probability(AbcdInstance(eye, eye, eye, eye, "high")) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [2, 4])
def test_accept_probability_formula(n):
    inst = AbcdInstance.random(n, "none", seed=n)
    want = (1 + inst.trace.real / n) / 2
    assert abcd_accept_probability(inst) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("n", [2, 4])
def test_promise_thresholds(n):
    for seed in range(3):
        assert abcd_accept_probability(AbcdInstance.random(n, "high", seed)) >= 0.95
        assert abcd_accept_probability(AbcdInstance.random(n, "low", seed)) <= 0.55


def test_low_instance_has_zero_trace():
    inst = AbcdInstance.random(4, "low", seed=5)
    assert abs(inst.trace) < 1e-10
    for m in (inst.A, inst.B, inst.C, inst.D):
        assert np.linalg.det(m) == pytest.approx(1.0)


def test_promise_checked_at_construction():
    eye = np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        AbcdInstance(eye, eye, eye, eye, "low")
    with pytest.raises(ValueError):
        AbcdInstance(eye, eye, eye, 2 * eye)
    with pytest.raises(ValueError):
        AbcdInstance.random(2, "medium", seed=0)


def test_accept_is_monotone_in_trace():
    rng = np.random.default_rng(0)
    rows = []
    for seed in range(12):
        inst = AbcdInstance.random(2, "none", seed=int(rng.integers(1 << 30)))
        rows.append((inst.trace.real / 2, abcd_accept_probability(inst)))
    rows.sort()
    accepts = [a for _, a in rows]
    assert accepts == sorted(accepts)


def test_abcd_spec_shape():
    spec = abcd_qsmp_spec(AbcdInstance.random(2, "high", seed=1))
    assert spec.n_epr == 2
    assert spec.t_depth == 1
    assert spec.target_value((), ()) == 1


def test_abcd_size_cap():
    with pytest.raises(ValueError):
        abcd_qsmp_spec(AbcdInstance.random(8, "none", seed=0))


# -- pipelines ------------------------------------------------------------------------


def test_equality_pipeline_n2():
    rep = equality_pipeline(2)
    assert rep["correct"] and rep["bound_check"]
    assert rep["verification"]["inputs_checked"] == 16
    assert rep["smp_cost"] <= 4 * 3 * 1 + 2


def test_equality_pipeline_samples_large_inputs():
    rep = equality_pipeline(5, seed=1)
    assert rep["verification"]["method"] == "sampled"
    assert rep["correct"] and rep["bound_check"]


def test_index_with_zero_pointer_returns_first_bit():
    c = build_index_circuit(4)
    for x in itertools.product((0, 1), repeat=4):
        assert run(c, x + (0, 0)).p1 == pytest.approx(x[0])


@pytest.mark.parametrize("n", [2, 4])
def test_index_pipeline(n):
    rep = index_pipeline(n)
    assert rep["correct"] and rep["bound_check"]
    assert rep["function_mismatches"] == []


def test_pipeline_caps():
    with pytest.raises(ValueError):
        equality_pipeline(9)
    with pytest.raises(ValueError):
        index_pipeline(3)


def test_multiplexer_table():
    rows = multiplexer_table(3)
    assert [r["g_k"] for r in rows] == [6, 16, 36]
    assert all(r["recursion_ok"] and r["permutation_ok"] for r in rows)
    assert all(r["g_k"] == r["closed_form"] for r in rows)
