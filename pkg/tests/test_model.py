import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from causal_ic.errors import ModelError, ModelSyntaxError
from causal_ic.generators import random_cyclic_model, random_dag_model
from causal_ic.model import (
    CausalICModel,
    HiddenNode,
    ModelClass,
    UVEdge,
    VVEdge,
    chain_model,
    check,
    classify,
    global_model,
    markovian_model,
    mixed_model,
    model_to_dict,
    parse_model,
    serialize_model,
    topological_order,
    validate,
    witness_structure,
)

WITNESS_FILE = """
{ "allow_cycles": false,
  "observed": ["V1","V2","V3"],
  "hidden":   [ {"name":"U1","r":0.5}, {"name":"U2","r":0.5} ],
  "vv_edges": [ {"from":"V1","to":"V2","p":0.5}, {"from":"V2","to":"V3","p":0.5} ],
  "uv_edges": [ {"from":"U1","to":"V1","q":0.5}, {"from":"U1","to":"V2","q":0.5},
                {"from":"U2","to":"V2","q":0.5}, {"from":"U2","to":"V3","q":0.5} ] }
"""


def witness():
    return parse_model(WITNESS_FILE)


class TestParse:
    def test_smallest_legal_model(self):
        m = parse_model(
            '{"observed": ["V1"], "hidden": [{"name": "U1", "r": 1.0}],'
            ' "uv_edges": [{"from": "U1", "to": "V1", "q": 0.5}]}'
        )
        assert (m.n, m.m) == (1, 1)

    def test_witness_file_has_six_edges(self):
        m = witness()
        assert len(m.vv_edges) + len(m.uv_edges) == 6

    def test_two_cycle_is_rejected(self):
        text = json.dumps(
            {
                "observed": ["V1", "V2"],
                "vv_edges": [
                    {"from": "V1", "to": "V2", "p": 0.5},
                    {"from": "V2", "to": "V1", "p": 0.5},
                ],
            }
        )
        with pytest.raises(ModelError, match="cycle detected"):
            parse_model(text)

    def test_syntax_error_reports_position(self):
        with pytest.raises(ModelSyntaxError) as info:
            parse_model('{"observed": ["V1",\n  ]')
        assert info.value.line == 2
        assert info.value.column is not None

    def test_missing_field(self):
        with pytest.raises(ModelSyntaxError):
            parse_model('{"hidden": []}')

    @pytest.mark.parametrize(
        "doc, rule",
        [
            ({"observed": ["V1", "V1"]}, "duplicate-name"),
            ({"observed": ["V1"], "vv_edges": [{"from": "V1", "to": "V9", "p": 0.5}]}, "unknown-node"),
            (
                {"observed": ["V1"], "hidden": [{"name": "U1", "r": 1.5}]},
                "probability-out-of-range",
            ),
        ],
    )
    def test_semantic_errors(self, doc, rule):
        with pytest.raises(ModelError) as info:
            parse_model(json.dumps(doc))
        assert rule in {v.rule for v in info.value.violations}


class TestValidate:
    def test_witness_ok(self):
        report = validate(witness())
        assert report.ok and report.violations == ()

    def test_probability_out_of_range(self):
        m = markovian_model([0.5, 0.5], {(0, 1): 1.3})
        report = validate(m)
        assert not report.ok
        assert any("probability out of range" in v.message for v in report.violations)

    def test_hidden_node_with_parent(self):
        m = CausalICModel(
            ("V1",),
            (HiddenNode("U1", 0.5),),
            (VVEdge("V1", "U1", 0.5),),
            (),
        )
        report = validate(m)
        assert any("hidden node has parent" in v.message for v in report.violations)

    def test_order_violation_without_cycle_flag(self):
        m = CausalICModel(("V1", "V2"), (), (VVEdge("V2", "V1", 0.5),), ())
        assert "order-violation" in validate(m).rules()

    def test_cycles_allowed_with_flag(self):
        m = CausalICModel(
            ("V1", "V2"), (), (VVEdge("V1", "V2", 0.5), VVEdge("V2", "V1", 0.5)), (), True
        )
        assert validate(m).ok

    def test_report_ok_iff_empty(self):
        for m in (witness(), markovian_model([2.0])):
            report = validate(m)
            assert report.ok == (len(report.violations) == 0)


def _mutations(m: CausalICModel):
    """Each mutation breaks exactly one declared invariant."""
    h0 = m.hidden[0]
    yield "probability-out-of-range", CausalICModel(
        m.observed, (HiddenNode(h0.name, -0.1),) + m.hidden[1:], m.vv_edges, m.uv_edges
    )
    yield "duplicate-name", CausalICModel(m.observed + (m.observed[0],), m.hidden, m.vv_edges, m.uv_edges)
    yield "unknown-node", CausalICModel(
        m.observed, m.hidden, m.vv_edges, m.uv_edges + (UVEdge(h0.name, "ZZ", 0.5),)
    )
    yield "hidden-has-parent", CausalICModel(
        m.observed, m.hidden, m.vv_edges + (VVEdge(m.observed[0], h0.name, 0.5),), m.uv_edges
    )
    yield "cycle-detected", CausalICModel(
        m.observed,
        m.hidden,
        m.vv_edges + (VVEdge(m.observed[-1], m.observed[0], 0.5),),
        m.uv_edges,
    )


@given(st.integers(0, 2**32 - 1))
def test_validate_rejects_each_mutation(seed):
    rng = np.random.default_rng(seed)
    m = random_dag_model(rng, 4, 2, density=0.6)
    # guarantee a path from first to last so the back edge closes a cycle
    if not any(e.source == m.observed[0] and e.target == m.observed[-1] for e in m.vv_edges):
        m = CausalICModel(
            m.observed, m.hidden, m.vv_edges + (VVEdge(m.observed[0], m.observed[-1], 0.3),), m.uv_edges
        )
    assert validate(m).ok
    for rule, bad in _mutations(m):
        assert rule in validate(bad).rules(), rule


class TestClassify:
    def test_five_nodes_with_private_parents_is_markovian(self):
        edges = {(0, 1): 0.5, (0, 2): 0.5, (1, 3): 0.5, (2, 3): 0.5, (3, 4): 0.5}
        assert classify(markovian_model([0.5] * 5, edges)) is ModelClass.MARKOVIAN

    def test_chain_shape(self):
        m = chain_model([0.5] * 4, [0.5] * 4, [0.5] * 4, [0.5] * 4)
        assert classify(m) is ModelClass.SEMI_MARKOVIAN_CHAIN
        assert classify(witness()) is ModelClass.SEMI_MARKOVIAN_CHAIN

    def test_global_plus_private_is_mixed(self):
        m = mixed_model(0.5, [0.5] * 4, [0.5] * 4, {(0, 1): 0.5, (2, 3): 0.5})
        assert classify(m) is ModelClass.MIXED_GLOBAL_MARKOVIAN

    def test_global(self):
        assert classify(global_model(0.5, [0.5] * 3)) is ModelClass.GLOBAL_HIDDEN

    def test_general(self):
        m = CausalICModel(
            ("V1", "V2", "V3"),
            (HiddenNode("U1", 0.5),),
            (),
            (UVEdge("U1", "V1", 0.5), UVEdge("U1", "V3", 0.5)),
        )
        assert classify(m) is ModelClass.GENERAL

    def test_chain_with_extra_hidden_node_is_general(self):
        m = witness()
        extra = CausalICModel(
            m.observed,
            m.hidden + (HiddenNode("U9", 0.5),),
            m.vv_edges,
            m.uv_edges + (UVEdge("U9", "V3", 0.5),),
        )
        assert classify(extra) is ModelClass.GENERAL

    @given(st.integers(0, 2**32 - 1), st.sampled_from(["markovian", "chain", "global", "mixed"]))
    def test_stable_under_order_preserving_rename(self, seed, kind):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 6))
        builders = {
            "markovian": lambda: markovian_model([0.5] * n, {(0, 1): 0.4}),
            "chain": lambda: chain_model(*([[0.5] * (n - 1)] * 4)),
            "global": lambda: global_model(0.5, [0.5] * n),
            "mixed": lambda: mixed_model(0.5, [0.5] * n, [0.5] * n),
        }
        m = builders[kind]()
        names = {v: f"node_{i}_{seed % 97}" for i, v in enumerate(m.observed)}
        names.update({h.name: f"hid_{h.name}" for h in m.hidden})
        renamed = CausalICModel(
            tuple(names[v] for v in m.observed),
            tuple(HiddenNode(names[h.name], h.r) for h in m.hidden),
            tuple(VVEdge(names[e.source], names[e.target], e.p) for e in m.vv_edges),
            tuple(UVEdge(names[e.source], names[e.target], e.q) for e in m.uv_edges),
        )
        assert classify(renamed) is classify(m)


class TestTopologicalOrder:
    def test_chain(self):
        m = chain_model([0.5] * 3, [0.5] * 3, [0.5] * 3, [0.5] * 3)
        assert topological_order(m) == ["V1", "V2", "V3", "V4"]

    def test_single_node(self):
        assert topological_order(markovian_model([0.3])) == ["V1"]

    def test_witness(self):
        assert topological_order(witness()) == ["V1", "V2", "V3"]

    def test_inconsistent_order_rejected(self):
        m = CausalICModel(("V1", "V2"), (), (VVEdge("V2", "V1", 0.5),), ())
        with pytest.raises(ModelError):
            topological_order(m)


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_serialize_round_trip(seed, cyclic):
    rng = np.random.default_rng(seed)
    if cyclic:
        m = random_cyclic_model(rng, int(rng.integers(1, 5)), 6, int(rng.integers(0, 3)))
    else:
        m = random_dag_model(rng, int(rng.integers(1, 6)), int(rng.integers(0, 4)))
    back = parse_model(serialize_model(m))
    assert back == m
    assert model_to_dict(back) == model_to_dict(m)


def test_witness_structure_mapping():
    params = dict(p1=0.1, p2=0.2, r1=0.3, r2=0.4, q11=0.5, q12=0.6, q21=0.7, q22=0.8)
    m = witness_structure(params)
    assert m.q("U1", "V1") == 0.5 and m.q("U1", "V2") == 0.6
    assert m.q("U2", "V2") == 0.7 and m.q("U2", "V3") == 0.8
    assert check(m) is m
