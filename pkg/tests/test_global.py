import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causal_ic.engine import ObservedDistribution, empirical_distribution, exact_joint
from causal_ic.errors import ClassMismatch, DegenerateDenominator, PreconditionViolated
from causal_ic.generators import random_global, random_mixed
from causal_ic.global_hidden import (
    UNRESOLVED,
    _eight_masses,
    detect_nonzero_q,
    find_disconnected_triple,
    identify_global,
    identify_mixed,
    nonzero_threshold,
    solve_eight,
)
from causal_ic.markovian import UNIDENTIFIABLE
from causal_ic.model import chain_model, global_model, mixed_model
from causal_ic.solvers import estimated_parameters, recovery_error, true_parameters

import oracle


def isolated():
    return global_model(0.6, [0.3, 0.4, 0.5])


class TestNonzero:
    def test_isolated_nodes(self):
        d = exact_joint(isolated())
        assert d.marginal({"V1": 1}) == pytest.approx(0.18, abs=1e-15)
        assert d.marginal({"V1": 1, "V2": 0}) == pytest.approx(0.108, abs=1e-15)
        assert detect_nonzero_q(d) == {1, 2, 3}

    def test_zero_weight_detected(self):
        m = global_model(0.5, [0.4, 0.0, 0.3, 0.6], {(0, 1): 0.5})
        assert detect_nonzero_q(exact_joint(m)) == {1, 3, 4}

    def test_threshold_depends_on_source(self):
        m = isolated()
        assert nonzero_threshold(exact_joint(m)) == 1e-12
        emp = empirical_distribution(m, 10_000, rng_seed=0)
        assert nonzero_threshold(emp) == pytest.approx(0.05)


class TestGlobal:
    def test_isolated_recovery(self):
        got = identify_global(exact_joint(isolated()), isolated())
        assert got.r == pytest.approx(0.6, abs=1e-12)
        np.testing.assert_allclose(got.q, [0.3, 0.4, 0.5], atol=1e-12)
        assert got.case == 1

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
    def test_round_trip(self, seed, case):
        rng = np.random.default_rng(seed)
        m = random_global(rng, int(rng.integers(3, 7)), case=case)
        got = identify_global(exact_joint(m), m)
        assert got.case == case
        linf, _ = recovery_error(true_parameters(m), estimated_parameters(got))
        assert linf <= 1e-8

    def test_zero_weight_parent_edges(self):
        # V2 has q = 0 but is driven by V1, so its out-edge is still visible
        m = global_model(0.5, [0.4, 0.0, 0.3, 0.6], {(0, 1): 0.7, (1, 2): 0.45, (1, 3): 0.2})
        got = identify_global(exact_joint(m), m)
        assert got.p[("V2", "V3")] == pytest.approx(0.45, abs=1e-8)
        assert got.p[("V2", "V4")] == pytest.approx(0.2, abs=1e-8)

    def test_unreachable_parent_is_unidentifiable(self):
        m = global_model(0.5, [0.4, 0.0, 0.3, 0.6], {(1, 2): 0.45})
        got = identify_global(exact_joint(m), m)
        assert got.p[("V2", "V3")] == UNIDENTIFIABLE
        assert "V2->V3" in got.to_json()["unidentifiable"]

    def test_too_few_nonzero(self):
        m = global_model(0.5, [0.4, 0.0, 0.3, 0.0])
        with pytest.raises(PreconditionViolated):
            identify_global(exact_joint(m), m)

    def test_rejects_chain_skeleton(self):
        m = chain_model([0.5], [0.5], [0.5], [0.5])
        with pytest.raises(ClassMismatch):
            identify_global(exact_joint(m), m)

    def test_result_rebuilds_distribution(self, rng):
        m = random_global(rng, 5, case=2)
        got = identify_global(exact_joint(m), m)
        assert exact_joint(got.to_model()).max_gap(exact_joint(m)) <= 1e-10


class TestTriple:
    def test_empty_graph(self):
        assert find_disconnected_triple(global_model(0.5, [0.5] * 4), {1, 2, 3, 4}) == (1, 2, 3, True)

    def test_complete_graph(self):
        edges = {(i, j): 0.5 for i in range(4) for j in range(i + 1, 4)}
        assert find_disconnected_triple(global_model(0.5, [0.5] * 4, edges), {1, 2, 3, 4}) is None

    def test_star(self):
        edges = {(0, 1): 0.5, (0, 2): 0.5, (0, 3): 0.5}
        assert find_disconnected_triple(global_model(0.5, [0.5] * 4, edges), {1, 2, 3, 4}) == (
            2,
            3,
            4,
            True,
        )

    def test_respects_nonzero_set(self):
        assert find_disconnected_triple(global_model(0.5, [0.5] * 4), {1, 2}) is None

    def test_non_adjacent(self):
        # V2 sits on the path V1 -> V2 -> V3 and every later node is fully linked
        edges = {(0, 1): 0.5, (1, 2): 0.5, (1, 3): 0.5}
        edges.update({(i, 4): 0.5 for i in range(4)})
        got = find_disconnected_triple(global_model(0.5, [0.5] * 5, edges), set(range(1, 6)))
        assert got == (1, 3, 4, False)


class TestSolveEight:
    @given(st.integers(0, 2**32 - 1))
    def test_against_hidden_state_oracle(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mixed(rng, 4)
        choice = find_disconnected_triple(m, {1, 2, 3, 4})
        triple = [choice.i - 1, choice.j - 1, choice.k - 1]
        masses = _eight_masses(exact_joint(m), triple, choice.k)
        sol = solve_eight(masses)
        off, on = oracle.prefix_with_hidden(m, "0" * choice.k, "U0")
        assert sol.a == pytest.approx(on, rel=1e-7, abs=1e-14)
        assert sol.b == pytest.approx(off, rel=1e-7, abs=1e-14)
        assert all(x > y > 0 for x, y in zip(sol.x, sol.y))

    @given(st.integers(0, 2**32 - 1))
    def test_sign_and_numerator_identities(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mixed(rng, int(rng.integers(3, 7)))
        choice = find_disconnected_triple(m, set(range(1, m.n + 1)))
        masses = _eight_masses(exact_joint(m), [choice.i - 1, choice.j - 1, choice.k - 1], choice.k)
        sol = solve_eight(masses)
        assert sol.sign_product < 0
        assert sol.numerator1 == pytest.approx(0.5 * masses[0] * sol.denominator, rel=1e-8)

    def test_product_masses_are_degenerate(self):
        # independent pivots: no hidden mixture to separate
        probs = [1.0]
        x = (0.5, 0.25, 2.0)
        for pat in ((0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)):
            probs.append(float(np.prod([x[s] for s in pat])))
        with pytest.raises(DegenerateDenominator):
            solve_eight(probs)


class TestMixed:
    def test_all_half(self):
        m = mixed_model(0.5, [0.5] * 3, [0.5] * 3)
        got = identify_mixed(exact_joint(m), m)
        assert got.complete and got.adjacent
        linf, _ = recovery_error(true_parameters(m), estimated_parameters(got))
        assert linf <= 1e-9

    @given(st.integers(0, 2**32 - 1))
    def test_adjacent_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mixed(rng, int(rng.integers(3, 7)))
        got = identify_mixed(exact_joint(m), m)
        assert got.complete
        linf, _ = recovery_error(true_parameters(m), estimated_parameters(got))
        assert linf <= 1e-6
        for state in got.states:
            assert state.sign_product < 0

    @given(st.integers(0, 2**32 - 1))
    def test_non_adjacent(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mixed(rng, int(rng.integers(5, 7)), adjacent=False)
        got = identify_mixed(exact_joint(m), m)
        assert not got.adjacent
        k = got.nodes.index(got.triple[2]) + 1
        assert got.r0 == UNRESOLVED and "r0" in got.unresolved
        for t, v in enumerate(got.nodes, start=1):
            assert (got.q0[t - 1] == UNRESOLVED) == (t <= k)
            assert (got.q[t - 1] == UNRESOLVED) == (t <= k)
        truth = true_parameters(m)
        est = estimated_parameters(got)
        assert est
        linf, _ = recovery_error(truth, est)
        assert linf <= 1e-6
        with pytest.raises(ValueError):
            got.to_model()

    def test_no_triple(self):
        edges = {(i, j): 0.5 for i in range(3) for j in range(i + 1, 3)}
        m = mixed_model(0.5, [0.5] * 3, [0.5] * 3, edges)
        from causal_ic.errors import NoQualifyingTriple

        with pytest.raises(NoQualifyingTriple):
            identify_mixed(exact_joint(m), m)

    def test_json_lists_unresolved(self, rng):
        m = random_mixed(rng, 5, adjacent=False)
        body = identify_mixed(exact_joint(m), m).to_json()
        assert "r0" not in body and "r0" in body["unresolved"]


def test_empirical_global_is_close():
    m = global_model(0.6, [0.3, 0.4, 0.5], {(0, 2): 0.5})
    d = empirical_distribution(m, 1_000_000, rng_seed=11)
    got = identify_global(d, m)
    linf, _ = recovery_error(true_parameters(m), estimated_parameters(got))
    assert linf < 0.05
    assert isinstance(d, ObservedDistribution)
