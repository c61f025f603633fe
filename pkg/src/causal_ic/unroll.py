"""Time-unrolled three-state network for possibly cyclic IC models.

Each observed node ``V`` gets one copy ``V@t`` per round ``t = 0..horizon``
with states 0 (idle), 1 (activated in the previous round) and 2 (active and
already spent). Hidden nodes appear once, as binary roots ``U@0`` feeding
round 1. Only parents in state 1 may activate a node, so every active node
tries each out-edge exactly once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .engine import DEFAULT_MAX_SIZE, ObservedDistribution, live_edge_exact
from .errors import OutOfRange, SizeGuardExceeded
from .model import CausalICModel, check

IDLE, FRESH, SPENT = 0, 1, 2


@dataclass(frozen=True)
class BNNode:
    """One variable of the unrolled network.

    ``cpt`` has shape ``parent arities + (arity,)``; the last axis is the
    node's own state.
    """

    name: str
    arity: int
    parents: tuple[str, ...]
    cpt: np.ndarray

    def to_json(self) -> dict:
        rows = self.cpt.reshape(-1, self.arity)
        return {
            "name": self.name,
            "arity": self.arity,
            "parents": list(self.parents),
            "cpt": [[float(x) for x in row] for row in rows],
        }


@dataclass(frozen=True)
class UnrolledBN:
    observed: tuple[str, ...]
    hidden: tuple[str, ...]
    horizon: int
    nodes: dict[str, BNNode]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, v.name) for v in self.nodes.values() for p in v.parents]

    def layer(self, t: int) -> list[str]:
        return [f"{v}@{t}" for v in self.observed]

    def to_json(self) -> dict:
        return {
            "observed": list(self.observed),
            "hidden": list(self.hidden),
            "horizon": self.horizon,
            "nodes": [node.to_json() for node in self.nodes.values()],
            "edges": [list(e) for e in self.edges],
        }


def _step_table(weights: list[float], hidden_weights: list[float]) -> np.ndarray:
    """Table for ``V@t`` given its own previous state and its parents' states."""
    shape = (3,) + (3,) * len(weights) + (2,) * len(hidden_weights) + (3,)
    cpt = np.zeros(shape)
    for own in range(3):
        for obs in itertools.product(range(3), repeat=len(weights)):
            for hid in itertools.product(range(2), repeat=len(hidden_weights)):
                row = cpt[(own, *obs, *hid)]
                if own != IDLE:
                    row[SPENT] = 1.0
                    continue
                stay = math.prod(1.0 - w for w, s in zip(weights, obs) if s == FRESH)
                stay *= math.prod(1.0 - w for w, s in zip(hidden_weights, hid) if s == 1)
                row[IDLE], row[FRESH] = stay, 1.0 - stay
    return cpt


def unroll(model: CausalICModel, horizon: int | None = None) -> UnrolledBN:
    """Build the layered network; ``horizon`` defaults to the node count."""
    check(model)
    horizon = model.n if horizon is None else horizon
    if horizon < 1:
        raise OutOfRange("horizon must be at least 1")
    nodes: dict[str, BNNode] = {}
    for h in model.hidden:
        nodes[f"{h.name}@0"] = BNNode(f"{h.name}@0", 2, (), np.array([1.0 - h.r, h.r]))
    for v in model.observed:
        nodes[f"{v}@0"] = BNNode(f"{v}@0", 3, (), np.array([1.0, 0.0, 0.0]))

    incoming = {v: [(e.source, e.p) for e in model.vv_edges if e.target == v] for v in model.observed}
    hidden_in = {v: [(e.source, e.q) for e in model.uv_edges if e.target == v] for v in model.observed}
    for t in range(1, horizon + 1):
        for v in model.observed:
            obs = incoming[v]
            hid = hidden_in[v] if t == 1 else []
            parents = (
                (f"{v}@{t - 1}",)
                + tuple(f"{s}@{t - 1}" for s, _ in obs)
                + tuple(f"{h}@0" for h, _ in hid)
            )
            cpt = _step_table([w for _, w in obs], [w for _, w in hid])
            nodes[f"{v}@{t}"] = BNNode(f"{v}@{t}", 3, parents, cpt)
    return UnrolledBN(model.observed, tuple(h.name for h in model.hidden), horizon, nodes)


def unrolled_final_distribution(
    bn: UnrolledBN, seeds=(), max_size: int = DEFAULT_MAX_SIZE
) -> ObservedDistribution:
    """Exact distribution of "active by the last round" for every observed node.

    Seeds start in state 1 at round 0, everything else idle. Rounds are
    evaluated forward, keeping the (sparse) distribution of the current
    round's joint state for each hidden assignment.
    """
    seeds = set(seeds)
    unknown = seeds - set(bn.observed)
    if unknown:
        raise KeyError(f"seeds {sorted(unknown)} are not observed nodes")
    n, m = len(bn.observed), len(bn.hidden)
    if n * math.log2(3) + m > max_size:
        raise SizeGuardExceeded(f"3^{n} * 2^{m} states exceed the guard 2^{max_size}")

    start = tuple(FRESH if v in seeds else IDLE for v in bn.observed)
    final = np.zeros(1 << n)
    for hid in itertools.product((0, 1), repeat=m):
        weight = math.prod(float(bn.nodes[f"{h}@0"].cpt[s]) for h, s in zip(bn.hidden, hid))
        if weight == 0.0:
            continue
        hidden_state = {f"{h}@0": s for h, s in zip(bn.hidden, hid)}
        layer = {start: weight}
        for t in range(1, bn.horizon + 1):
            layer = _advance(bn, t, layer, hidden_state)
        for state, prob in layer.items():
            idx = 0
            for s in state:
                idx = (idx << 1) | (s != IDLE)
            final[idx] += prob
    return ObservedDistribution(bn.observed, final, "unrolled")


def _advance(bn: UnrolledBN, t: int, layer: dict, hidden_state: dict) -> dict:
    prev_names = {f"{v}@{t - 1}": i for i, v in enumerate(bn.observed)}
    out: dict[tuple, float] = {}
    for state, prob in layer.items():
        per_node = []
        for v in bn.observed:
            node = bn.nodes[f"{v}@{t}"]
            idx = tuple(
                state[prev_names[p]] if p in prev_names else hidden_state[p] for p in node.parents
            )
            row = node.cpt[idx]
            per_node.append([(s, float(row[s])) for s in range(3) if row[s] > 0.0])
        for combo in itertools.product(*per_node):
            nxt = tuple(s for s, _ in combo)
            out[nxt] = out.get(nxt, 0.0) + prob * math.prod(w for _, w in combo)
    return out


def check_unroll_equivalence(model: CausalICModel, seeds=(), horizon: int | None = None) -> float:
    """Largest atom gap between the unrolled network and live-edge enumeration."""
    got = unrolled_final_distribution(unroll(model, horizon), seeds)
    return got.max_gap(live_edge_exact(model, seeds))
