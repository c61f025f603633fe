import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causal_ic import _kernels
from causal_ic.engine import (
    ObservedDistribution,
    activation_probability,
    empirical_distribution,
    exact_joint,
    live_edge_exact,
    make_rng,
    sample_cascade,
)
from causal_ic.errors import SizeGuardExceeded, UnassignedParent, ZeroConditioningEvent
from causal_ic.generators import random_cyclic_model, random_dag_model
from causal_ic.model import (
    CausalICModel,
    HiddenNode,
    UVEdge,
    VVEdge,
    chain_model,
    compile_model,
    global_model,
    markovian_model,
)

import oracle

# hand-checked values, frozen from the brute-force oracle
TWO_NODE = [0.25, 0.25, 0.125, 0.375]
ALL_HALF_CHAIN = [
    0.390625,
    0.078125,
    0.0859375,
    0.1953125,
    0.0390625,
    0.0078125,
    0.07421875,
    0.12890625,
]
ISOLATED_GLOBAL = [0.526, 0.126, 0.084, 0.084, 0.054, 0.054, 0.036, 0.036]


def two_node():
    return markovian_model([0.5, 0.5], {(0, 1): 0.5})


def half_chain():
    return chain_model([0.5] * 2, [0.5] * 2, [0.5] * 2, [0.5] * 2)


class TestExactJoint:
    def test_two_node_values(self):
        np.testing.assert_allclose(exact_joint(two_node()).probs, TWO_NODE, atol=1e-15)

    def test_chain_values(self):
        np.testing.assert_allclose(exact_joint(half_chain()).probs, ALL_HALF_CHAIN, atol=1e-15)

    def test_isolated_global_values(self):
        d = exact_joint(global_model(0.6, [0.3, 0.4, 0.5]))
        np.testing.assert_allclose(d.probs, ISOLATED_GLOBAL, atol=1e-15)
        assert d.marginal({"V1": 1}) == pytest.approx(0.18, abs=1e-15)
        assert d.marginal({"V1": 1, "V2": 0}) == pytest.approx(0.108, abs=1e-15)

    def test_oracle_agrees_with_frozen_values(self):
        np.testing.assert_allclose(oracle.observed_joint(half_chain()), ALL_HALF_CHAIN, atol=1e-15)

    def test_no_hidden_nodes(self):
        m = CausalICModel(("V1", "V2"), (), (VVEdge("V1", "V2", 0.7),), ())
        np.testing.assert_array_equal(exact_joint(m).probs, [1.0, 0.0, 0.0, 0.0])

    def test_size_guard(self):
        m = markovian_model([0.5] * 13)  # 13 observed + 13 hidden
        with pytest.raises(SizeGuardExceeded):
            exact_joint(m)
        assert exact_joint(m, max_size=26).total() == pytest.approx(1.0)

    @given(st.integers(0, 2**32 - 1))
    def test_matches_oracle_and_live_edge(self, seed):
        rng = np.random.default_rng(seed)
        m = random_dag_model(rng, int(rng.integers(1, 5)), int(rng.integers(0, 3)), density=0.5)
        exact = exact_joint(m).probs
        assert exact.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(exact, oracle.observed_joint(m), atol=1e-12)
        if m.m + len(m.vv_edges) + len(m.uv_edges) <= 14:
            np.testing.assert_allclose(exact, live_edge_exact(m).probs, atol=1e-12)


class TestLiveEdge:
    @given(st.integers(0, 2**32 - 1))
    def test_cyclic_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        m = random_cyclic_model(rng, int(rng.integers(1, 4)), 5, int(rng.integers(0, 2)))
        np.testing.assert_allclose(live_edge_exact(m).probs, oracle.live_edge_joint(m), atol=1e-12)

    def test_seeds(self):
        m = CausalICModel(("V1", "V2"), (), (VVEdge("V1", "V2", 0.3),), ())
        d = live_edge_exact(m, seeds=["V1"])
        np.testing.assert_allclose(d.probs, [0, 0, 0.7, 0.3], atol=1e-15)
        np.testing.assert_allclose(d.probs, oracle.live_edge_joint(m, {"V1"}), atol=1e-15)

    def test_unknown_seed(self):
        with pytest.raises(KeyError):
            live_edge_exact(two_node(), seeds=["V9"])

    def test_guard(self):
        m = markovian_model([0.5] * 10, {(i, i + 1): 0.5 for i in range(9)})
        with pytest.raises(SizeGuardExceeded):
            live_edge_exact(m)


class TestQueries:
    def test_marginal_and_conditional(self):
        d = exact_joint(two_node())
        assert d.marginal({"V2": 1}) == pytest.approx(0.625)
        assert d.conditional({"V2": 0}, {"V1": 0}) == pytest.approx(0.5)
        assert d.marginal({}) == pytest.approx(1.0)

    def test_contradictory_target_is_zero(self):
        d = exact_joint(two_node())
        assert d.conditional({"V1": 1}, {"V1": 0}) == 0.0

    def test_zero_conditioning(self):
        m = CausalICModel(("V1", "V2"), (), (VVEdge("V1", "V2", 0.5),), ())
        with pytest.raises(ZeroConditioningEvent):
            exact_joint(m).conditional({"V2": 1}, {"V1": 1})

    def test_unknown_node(self):
        with pytest.raises(KeyError):
            exact_joint(two_node()).marginal({"V7": 1})

    def test_reorder(self):
        d = exact_joint(half_chain())
        back = d.reorder(("V3", "V1", "V2")).reorder(d.nodes)
        np.testing.assert_array_equal(back.probs, d.probs)
        flipped = d.reorder(("V3", "V2", "V1"))
        assert flipped.prob("100") == d.prob("001")

    def test_csv_round_trip(self):
        d = exact_joint(half_chain())
        back = ObservedDistribution.from_csv(d.to_csv(), source="exact")
        np.testing.assert_array_equal(back.probs, d.probs)
        assert d.to_csv().splitlines()[0] == "assignment,probability"

    def test_csv_rejects_bad_header(self):
        with pytest.raises(ValueError):
            ObservedDistribution.from_csv("x,y\n0,1\n")


class TestActivation:
    def test_formula(self):
        m = half_chain()
        got = activation_probability(m, "V2", {"V1": 1}, {"U1": 1, "U2": 1})
        assert got == pytest.approx(1 - 0.5**3)
        assert activation_probability(m, "V2", {"V1": 0}, {"U1": 0, "U2": 0}) == 0.0

    def test_unassigned_parent(self):
        with pytest.raises(UnassignedParent):
            activation_probability(half_chain(), "V2", {}, {"U1": 1, "U2": 1})


class TestSampling:
    def test_deterministic_for_fixed_seed(self):
        m = half_chain()
        a = empirical_distribution(m, 5000, rng_seed=7)
        b = empirical_distribution(m, 5000, rng_seed=7)
        c = empirical_distribution(m, 5000, rng_seed=8)
        np.testing.assert_array_equal(a.probs, b.probs)
        assert not np.array_equal(a.probs, c.probs)
        assert a.source == "empirical" and a.num_samples == 5000

    def test_within_four_sigma(self):
        m = half_chain()
        n = 200_000
        emp = empirical_distribution(m, n, rng_seed=3).probs
        exact = np.asarray(ALL_HALF_CHAIN)
        sigma = np.sqrt(exact * (1 - exact) / n)
        assert np.all(np.abs(emp - exact) <= 4 * sigma)

    def test_rejects_zero_samples(self):
        with pytest.raises(ValueError):
            empirical_distribution(two_node(), 0)

    def test_cascade_rounds(self):
        m = chain_model([1.0] * 3, [0.0] * 3, [0.0] * 3, [0.0] * 3)
        c = sample_cascade(m, seeds=["V1"], rng_seed=0)
        assert c.final == "1111"
        assert len(c.rounds) <= m.n + 1
        assert [len(s) for s in c.rounds] == [1, 2, 3, 4]

    def test_cascade_with_no_activity(self):
        m = global_model(0.0, [0.5, 0.5, 0.5])
        c = sample_cascade(m, rng_seed=1)
        assert c.final == "000" and c.rounds == (frozenset(),)

    @given(st.integers(0, 2**32 - 1))
    def test_rounds_are_monotone(self, seed):
        rng = np.random.default_rng(seed)
        m = random_cyclic_model(rng, 4, 8, 2)
        c = sample_cascade(m, seeds=["V1"], rng_seed=seed)
        for before, after in zip(c.rounds, c.rounds[1:]):
            assert before < after
        assert len(c.rounds) <= m.n + 1
        assert c.final == "".join("1" if v in c.rounds[-1] else "0" for v in m.observed)


@given(st.integers(0, 2**32 - 1))
def test_adding_an_edge_never_lowers_activation(seed):
    rng = np.random.default_rng(seed)
    m = random_dag_model(rng, 4, 1, density=0.3)
    present = {(e.source, e.target) for e in m.vv_edges}
    missing = [
        (m.observed[i], m.observed[j])
        for i in range(4)
        for j in range(i + 1, 4)
        if (m.observed[i], m.observed[j]) not in present
    ]
    if not missing:
        return
    s, t = missing[0]
    more = CausalICModel(m.observed, m.hidden, m.vv_edges + (VVEdge(s, t, 0.4),), m.uv_edges)
    before, after = exact_joint(m), exact_joint(more)
    for v in m.observed:
        assert after.marginal({v: 1}) >= before.marginal({v: 1}) - 1e-12


class TestBackendParity:
    @pytest.fixture(autouse=True)
    def _need_numba(self):
        if not _kernels.HAVE_NUMBA:
            pytest.skip("numba not installed")

    @given(st.integers(0, 2**32 - 1))
    def test_joint(self, seed):
        rng = np.random.default_rng(seed)
        c = compile_model(random_dag_model(rng, int(rng.integers(1, 7)), int(rng.integers(0, 4))))
        args = (c.indptr, c.parents, c.one_minus_p, c.one_minus_q, c.r)
        np.testing.assert_allclose(_kernels.joint_numba(*args), _kernels.joint_numpy(*args), atol=1e-14)

    @given(st.integers(0, 2**32 - 1))
    def test_live_edge(self, seed):
        rng = np.random.default_rng(seed)
        c = compile_model(random_cyclic_model(rng, 3, 6, 2))
        args = (c.n, c.r, c.uv_src, c.uv_dst, c.uv_q, c.vv_src, c.vv_dst, c.vv_p, np.int64(1))
        np.testing.assert_allclose(
            _kernels.live_edge_numba(*args), _kernels.live_edge_numpy(*args), atol=1e-14
        )

    @given(st.integers(0, 2**32 - 1))
    def test_propagate(self, seed):
        rng = np.random.default_rng(seed)
        c = compile_model(random_cyclic_model(rng, 5, 10, 2))
        draws = make_rng(seed)
        rows = 500
        hidden = draws.random((rows, c.m)) < c.r[None, :]
        uv = draws.random((rows, len(c.uv_q))) < c.uv_q[None, :]
        vv = draws.random((rows, len(c.vv_p))) < c.vv_p[None, :]
        seeds = np.asarray([0], dtype=np.int64)
        args = (c.n, hidden, uv, vv, c.uv_src, c.uv_dst, c.vv_src, c.vv_dst, seeds)
        np.testing.assert_array_equal(_kernels.propagate_numba(*args), _kernels.propagate_numpy(*args))


def test_disable_flag_selects_numpy(monkeypatch):
    monkeypatch.setattr(_kernels, "USE_NUMBA", False)
    assert _kernels.backend() == "numpy"
    d = exact_joint(half_chain())
    np.testing.assert_allclose(d.probs, ALL_HALF_CHAIN, atol=1e-15)


def test_hidden_only_model():
    m = CausalICModel(("V1",), (HiddenNode("U1", 0.4),), (), (UVEdge("U1", "V1", 0.5),))
    np.testing.assert_allclose(exact_joint(m).probs, [0.8, 0.2])
