"""Causal IC model: data types, validation, classification and file format."""

from __future__ import annotations

import enum
import functools
import graphlib
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ModelError, ModelSyntaxError


@dataclass(frozen=True)
class HiddenNode:
    name: str
    r: float


@dataclass(frozen=True)
class VVEdge:
    source: str
    target: str
    p: float


@dataclass(frozen=True)
class UVEdge:
    source: str
    target: str
    q: float


@dataclass(frozen=True)
class CausalICModel:
    """Observed nodes in topological order, hidden roots and weighted edges.

    The model is a plain value: constructing one does not validate it. Use
    :func:`validate` or :func:`parse_model` for checked construction.
    """

    observed: tuple[str, ...]
    hidden: tuple[HiddenNode, ...] = ()
    vv_edges: tuple[VVEdge, ...] = ()
    uv_edges: tuple[UVEdge, ...] = ()
    allow_cycles: bool = False

    @property
    def n(self) -> int:
        return len(self.observed)

    @property
    def m(self) -> int:
        return len(self.hidden)

    def index(self, name: str) -> int:
        return self.observed.index(name)

    def observed_parents(self, name: str) -> list[str]:
        """Observed parents of ``name`` in topological order."""
        parents = {e.source for e in self.vv_edges if e.target == name}
        return [v for v in self.observed if v in parents]

    def hidden_parents(self, name: str) -> list[str]:
        return [e.source for e in self.uv_edges if e.target == name]

    def children(self, name: str) -> list[str]:
        kids = {e.target for e in self.vv_edges if e.source == name}
        return [v for v in self.observed if v in kids]

    def hidden_children(self, name: str) -> list[str]:
        return [e.target for e in self.uv_edges if e.source == name]

    def p(self, source: str, target: str) -> float:
        for e in self.vv_edges:
            if e.source == source and e.target == target:
                return e.p
        raise KeyError((source, target))

    def q(self, source: str, target: str) -> float:
        for e in self.uv_edges:
            if e.source == source and e.target == target:
                return e.q
        raise KeyError((source, target))

    def r(self, name: str) -> float:
        for h in self.hidden:
            if h.name == name:
                return h.r
        raise KeyError(name)


class ModelClass(str, enum.Enum):
    MARKOVIAN = "Markovian"
    SEMI_MARKOVIAN_CHAIN = "SemiMarkovianChain"
    GLOBAL_HIDDEN = "GlobalHidden"
    MIXED_GLOBAL_MARKOVIAN = "MixedGlobalMarkovian"
    GENERAL = "General"


class Violation(NamedTuple):
    rule: str
    message: str
    element: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}


def _in_unit(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and 0.0 <= x <= 1.0


def validate(model: CausalICModel) -> ValidationReport:
    """Check every structural invariant and collect violations."""
    out: list[Violation] = []

    def bad(rule, message, element):
        out.append(Violation(rule, message, str(element)))

    observed = set(model.observed)
    hidden = {h.name for h in model.hidden}
    names = list(model.observed) + [h.name for h in model.hidden]
    seen = set()
    for name in names:
        if name in seen:
            bad("duplicate-name", "duplicate node name", name)
        seen.add(name)

    for h in model.hidden:
        if not _in_unit(h.r):
            bad("probability-out-of-range", "probability out of range", f"{h.name}.r={h.r}")

    pairs = set()
    for e in model.vv_edges:
        label = f"{e.source}->{e.target}"
        if e.target in hidden:
            bad("hidden-has-parent", "hidden node has parent", label)
        elif e.target not in observed:
            bad("unknown-node", "unknown node", e.target)
        if e.source in hidden:
            bad("edge-kind", "observed edge starts at a hidden node", label)
        elif e.source not in observed:
            bad("unknown-node", "unknown node", e.source)
        if not _in_unit(e.p):
            bad("probability-out-of-range", "probability out of range", f"{label} p={e.p}")
        if (e.source, e.target) in pairs:
            bad("duplicate-edge", "duplicate edge", label)
        pairs.add((e.source, e.target))

    for e in model.uv_edges:
        label = f"{e.source}->{e.target}"
        if e.source in observed:
            bad("edge-kind", "hidden edge starts at an observed node", label)
        elif e.source not in hidden:
            bad("unknown-node", "unknown node", e.source)
        if e.target in hidden:
            bad("hidden-has-parent", "hidden node has parent", label)
        elif e.target not in observed:
            bad("unknown-node", "unknown node", e.target)
        if not _in_unit(e.q):
            bad("probability-out-of-range", "probability out of range", f"{label} q={e.q}")
        if (e.source, e.target) in pairs:
            bad("duplicate-edge", "duplicate edge", label)
        pairs.add((e.source, e.target))

    if not model.allow_cycles:
        graph = {v: set() for v in model.observed}
        for e in model.vv_edges:
            if e.source in observed and e.target in observed:
                graph[e.target].add(e.source)
        try:
            tuple(graphlib.TopologicalSorter(graph).static_order())
        except graphlib.CycleError as exc:
            bad("cycle-detected", "cycle detected", "->".join(exc.args[1]))
        else:
            pos = {v: i for i, v in enumerate(model.observed)}
            for e in model.vv_edges:
                if e.source in pos and e.target in pos and pos[e.source] >= pos[e.target]:
                    bad(
                        "order-violation",
                        "edge points backwards in the stored observed order",
                        f"{e.source}->{e.target}",
                    )
    return ValidationReport(tuple(out))


def check(model: CausalICModel) -> CausalICModel:
    """Return ``model`` or raise :class:`ModelError` listing its violations."""
    report = validate(model)
    if not report.ok:
        first = report.violations[0]
        raise ModelError(f"{first.message}: {first.element}", report.violations)
    return model


def topological_order(model: CausalICModel) -> list[str]:
    check(model)
    if model.allow_cycles and any(
        model.index(e.source) >= model.index(e.target) for e in model.vv_edges
    ):
        raise ModelError("model has cycles or backward edges; no topological order")
    return list(model.observed)


def is_dag(model: CausalICModel) -> bool:
    pos = {v: i for i, v in enumerate(model.observed)}
    return all(pos[e.source] < pos[e.target] for e in model.vv_edges)


def classify(model: CausalICModel) -> ModelClass:
    """Assign the model to one of the special structural classes.

    Chain is tested before Markovian and global so that the two-node chain
    (one hidden node pointing at both nodes) is reported as a chain.
    """
    obs = model.observed
    n = len(obs)
    out_edges = {h.name: model.hidden_children(h.name) for h in model.hidden}
    hidden_in = {v: model.hidden_parents(v) for v in obs}

    if n >= 2 and not model.allow_cycles:
        path = {(obs[i], obs[i + 1]) for i in range(n - 1)}
        vv = {(e.source, e.target) for e in model.vv_edges}
        if vv == path and len(model.hidden) == n - 1:
            wanted = {frozenset((obs[i], obs[i + 1])) for i in range(n - 1)}
            got = {frozenset(kids) for kids in out_edges.values() if len(kids) == 2}
            if len(got) == n - 1 and got == wanted:
                return ModelClass.SEMI_MARKOVIAN_CHAIN

    if all(len(k) == 1 for k in out_edges.values()) and all(
        len(p) <= 1 for p in hidden_in.values()
    ):
        return ModelClass.MARKOVIAN

    global_nodes = [h for h, kids in out_edges.items() if set(kids) == set(obs) and len(kids) == n]
    if len(model.hidden) == 1 and global_nodes:
        return ModelClass.GLOBAL_HIDDEN

    for g in global_nodes:
        private = [h for h in out_edges if h != g]
        if all(len(out_edges[h]) == 1 for h in private):
            targets = sorted(out_edges[h][0] for h in private)
            if targets == sorted(obs):
                return ModelClass.MIXED_GLOBAL_MARKOVIAN
    return ModelClass.GENERAL


def global_hidden_node(model: CausalICModel) -> str:
    """Name of the hidden node pointing at every observed node."""
    for h in model.hidden:
        if set(model.hidden_children(h.name)) == set(model.observed):
            return h.name
    raise ModelError("model has no global hidden node")


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def _require(obj, key, kind, where):
    if key not in obj:
        raise ModelSyntaxError(f"missing field {key!r} in {where}")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelSyntaxError(f"field {key!r} in {where} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise ModelSyntaxError(f"field {key!r} in {where} must be {kind.__name__}")
    return value


def model_from_dict(doc) -> CausalICModel:
    if not isinstance(doc, dict):
        raise ModelSyntaxError("model document must be a JSON object")
    observed = _require(doc, "observed", list, "model")
    if not all(isinstance(v, str) for v in observed):
        raise ModelSyntaxError("observed node names must be strings")
    hidden = tuple(
        HiddenNode(_require(h, "name", str, "hidden node"), _require(h, "r", float, "hidden node"))
        for h in doc.get("hidden", [])
    )
    vv = tuple(
        VVEdge(
            _require(e, "from", str, "vv_edge"),
            _require(e, "to", str, "vv_edge"),
            _require(e, "p", float, "vv_edge"),
        )
        for e in doc.get("vv_edges", [])
    )
    uv = tuple(
        UVEdge(
            _require(e, "from", str, "uv_edge"),
            _require(e, "to", str, "uv_edge"),
            _require(e, "q", float, "uv_edge"),
        )
        for e in doc.get("uv_edges", [])
    )
    allow = doc.get("allow_cycles", False)
    if not isinstance(allow, bool):
        raise ModelSyntaxError("field 'allow_cycles' must be a boolean")
    return CausalICModel(tuple(observed), hidden, vv, uv, allow)


def parse_model(text: str) -> CausalICModel:
    """Parse and validate a model file."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return check(model_from_dict(doc))


def model_to_dict(model: CausalICModel) -> dict:
    return {
        "allow_cycles": model.allow_cycles,
        "observed": list(model.observed),
        "hidden": [{"name": h.name, "r": h.r} for h in model.hidden],
        "vv_edges": [{"from": e.source, "to": e.target, "p": e.p} for e in model.vv_edges],
        "uv_edges": [{"from": e.source, "to": e.target, "q": e.q} for e in model.uv_edges],
    }


def serialize_model(model: CausalICModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def load_model(path) -> CausalICModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


# ---------------------------------------------------------------------------
# array view used by the kernels
# ---------------------------------------------------------------------------


class Compiled(NamedTuple):
    n: int
    m: int
    indptr: np.ndarray
    parents: np.ndarray
    one_minus_p: np.ndarray
    one_minus_q: np.ndarray
    r: np.ndarray
    uv_src: np.ndarray
    uv_dst: np.ndarray
    uv_q: np.ndarray
    vv_src: np.ndarray
    vv_dst: np.ndarray
    vv_p: np.ndarray


@functools.lru_cache(maxsize=256)
def compile_model(model: CausalICModel) -> Compiled:
    obs = {v: i for i, v in enumerate(model.observed)}
    hid = {h.name: k for k, h in enumerate(model.hidden)}
    n, m = len(obs), len(hid)
    incoming = [[] for _ in range(n)]
    for e in model.vv_edges:
        incoming[obs[e.target]].append((obs[e.source], e.p))
    indptr = np.zeros(n + 1, dtype=np.int64)
    parents, omp = [], []
    for i, inc in enumerate(incoming):
        inc.sort()
        parents += [j for j, _ in inc]
        omp += [1.0 - p for _, p in inc]
        indptr[i + 1] = len(parents)
    omq = np.ones((m, n))
    for e in model.uv_edges:
        omq[hid[e.source], obs[e.target]] *= 1.0 - e.q
    return Compiled(
        n,
        m,
        indptr,
        np.asarray(parents, dtype=np.int64),
        np.asarray(omp, dtype=np.float64),
        omq,
        np.asarray([h.r for h in model.hidden], dtype=np.float64),
        np.asarray([hid[e.source] for e in model.uv_edges], dtype=np.int64),
        np.asarray([obs[e.target] for e in model.uv_edges], dtype=np.int64),
        np.asarray([e.q for e in model.uv_edges], dtype=np.float64),
        np.asarray([obs[e.source] for e in model.vv_edges], dtype=np.int64),
        np.asarray([obs[e.target] for e in model.vv_edges], dtype=np.int64),
        np.asarray([e.p for e in model.vv_edges], dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# builders for the special classes
# ---------------------------------------------------------------------------


def _names(n, prefix="V"):
    return tuple(f"{prefix}{i + 1}" for i in range(n))


def _vv(obs, p_edges):
    return tuple(VVEdge(obs[i], obs[j], float(p)) for (i, j), p in sorted(p_edges.items()))


def markovian_model(q, p_edges=None, r=None) -> CausalICModel:
    """Markovian model; ``p_edges`` maps 0-based ``(i, j)`` to ``p_{i,j}``.

    Every observed node gets its private hidden parent ``U{i}`` with ``r=1``
    unless ``r`` is given.
    """
    n = len(q)
    obs = _names(n)
    hid = _names(n, "U")
    r = [1.0] * n if r is None else r
    return CausalICModel(
        obs,
        tuple(HiddenNode(hid[i], float(r[i])) for i in range(n)),
        _vv(obs, p_edges or {}),
        tuple(UVEdge(hid[i], obs[i], float(q[i])) for i in range(n)),
    )


def chain_model(p, r, q1, q2) -> CausalICModel:
    """Semi-Markovian chain with ``U_i -> {V_i, V_{i+1}}``."""
    k = len(p)
    if not (len(r) == len(q1) == len(q2) == k):
        raise ValueError("chain parameter sequences must share one length")
    obs = _names(k + 1)
    hid = _names(k, "U")
    uv = []
    for i in range(k):
        uv.append(UVEdge(hid[i], obs[i], float(q1[i])))
        uv.append(UVEdge(hid[i], obs[i + 1], float(q2[i])))
    return CausalICModel(
        obs,
        tuple(HiddenNode(hid[i], float(r[i])) for i in range(k)),
        tuple(VVEdge(obs[i], obs[i + 1], float(p[i])) for i in range(k)),
        tuple(uv),
    )


def global_model(r, q, p_edges=None) -> CausalICModel:
    n = len(q)
    obs = _names(n)
    return CausalICModel(
        obs,
        (HiddenNode("U0", float(r)),),
        _vv(obs, p_edges or {}),
        tuple(UVEdge("U0", obs[i], float(q[i])) for i in range(n)),
    )


def mixed_model(r0, q0, q, p_edges=None, r=None) -> CausalICModel:
    n = len(q)
    obs = _names(n)
    hid = _names(n, "U")
    r = [1.0] * n if r is None else r
    uv = [UVEdge("U0", obs[i], float(q0[i])) for i in range(n)]
    uv += [UVEdge(hid[i], obs[i], float(q[i])) for i in range(n)]
    return CausalICModel(
        obs,
        (HiddenNode("U0", float(r0)),) + tuple(HiddenNode(hid[i], float(r[i])) for i in range(n)),
        _vv(obs, p_edges or {}),
        tuple(uv),
    )


def witness_structure(params: dict) -> CausalICModel:
    """The three-node structure ``V1->V2->V3`` with ``U1->{V1,V2}``, ``U2->{V2,V3}``.

    ``params`` uses chain indexing: ``q11`` is ``U1->V1``, ``q12`` is
    ``U1->V2``, ``q21`` is ``U2->V2`` and ``q22`` is ``U2->V3``.
    """
    return chain_model(
        [params["p1"], params["p2"]],
        [params["r1"], params["r2"]],
        [params["q11"], params["q21"]],
        [params["q12"], params["q22"]],
    )
