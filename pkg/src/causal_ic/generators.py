"""Random instances of each model class, for tests and benchmarks.

Every generator takes a ``numpy.random.Generator`` so callers control
reproducibility. Edge dictionaries use 0-based ``(source, target)`` keys
with ``source < target``.
"""

from __future__ import annotations

from .model import (
    CausalICModel,
    HiddenNode,
    UVEdge,
    VVEdge,
    chain_model,
    global_model,
    markovian_model,
    mixed_model,
)


def _u(rng, lo, hi, size=None):
    return rng.uniform(lo, hi, size)


def random_dag_edges(rng, n, density=0.4, max_indegree=None, lo=0.1, hi=0.9) -> dict:
    """Forward edges chosen independently with probability ``density``."""
    edges = {}
    for j in range(1, n):
        sources = [i for i in range(j) if rng.random() < density]
        if max_indegree is not None and len(sources) > max_indegree:
            sources = sorted(rng.choice(sources, size=max_indegree, replace=False).tolist())
        for i in sources:
            edges[(i, j)] = float(_u(rng, lo, hi))
    return edges


def random_markovian(rng, n, max_indegree=3, lo=0.05, hi=0.95, q_one=()) -> CausalICModel:
    """Markovian model; nodes listed in ``q_one`` (0-based) get ``q = 1``."""
    q = [float(x) for x in _u(rng, lo, hi, n)]
    for i in q_one:
        q[i] = 1.0
    return markovian_model(q, random_dag_edges(rng, n, 0.5, max_indegree, lo, hi))


def random_chain(rng, n, lo=0.1, hi=0.9) -> CausalICModel:
    k = n - 1
    return chain_model(*(list(map(float, _u(rng, lo, hi, k))) for _ in range(4)))


def random_global(rng, n, case=None, lo=0.1, hi=0.9, zero_q=0.2) -> CausalICModel:
    """Global-hidden model with at least three nonzero ``q``.

    ``case=2`` makes the graph complete so no two nonzero-``q`` nodes are
    unconnected; ``case=1`` redraws until such a pair exists.
    """
    while True:
        q = [0.0 if rng.random() < zero_q else float(_u(rng, lo, hi)) for _ in range(n)]
        nz = [i for i, x in enumerate(q) if x > 0]
        if len(nz) < 3:
            continue
        if case == 2:
            edges = {(i, j): float(_u(rng, lo, hi)) for i in range(n) for j in range(i + 1, n)}
        else:
            edges = random_dag_edges(rng, n, 0.4, None, lo, hi)
            if case == 1 and all((i, j) in edges for i in nz for j in nz if i < j):
                continue
        return global_model(float(_u(rng, lo, hi)), q, edges)


def random_mixed(rng, n, adjacent=True, lo=0.1, hi=0.9) -> CausalICModel:
    """Mixed model whose best pivot triple is (or is not) placeable consecutively.

    Non-adjacent instances need ``n >= 5``: nodes 1, 3, 4 are unlinked
    but node 2 sits on a path from 1 to 3, and every later node is linked
    to all earlier ones so no other unlinked triple exists.
    """
    from .global_hidden import find_disconnected_triple

    everyone = set(range(1, n + 1))
    while True:
        if adjacent:
            edges = random_dag_edges(rng, n, 0.35, None, lo, hi)
        else:
            if n < 5:
                raise ValueError("non-adjacent mixed instances need at least 5 nodes")
            pairs = [(0, 1), (1, 2), (1, 3)] + [(i, j) for j in range(4, n) for i in range(j)]
            edges = {e: float(_u(rng, lo, hi)) for e in pairs}
        model = mixed_model(
            float(_u(rng, lo, hi)),
            list(map(float, _u(rng, lo, hi, n))),
            list(map(float, _u(rng, lo, hi, n))),
            edges,
        )
        choice = find_disconnected_triple(model, everyone)
        if choice is not None and choice.adjacent == adjacent:
            return model


def random_dag_model(rng, n, m, density=0.4, lo=0.0, hi=1.0) -> CausalICModel:
    """General acyclic model with ``m`` hidden nodes of random fan-out."""
    obs = tuple(f"V{i + 1}" for i in range(n))
    edges = random_dag_edges(rng, n, density, None, lo, hi)
    hidden, uv = [], []
    for k in range(m):
        name = f"U{k + 1}"
        hidden.append(HiddenNode(name, float(_u(rng, lo, hi))))
        kids = [i for i in range(n) if rng.random() < 0.5] or [int(rng.integers(n))]
        uv += [UVEdge(name, obs[i], float(_u(rng, lo, hi))) for i in kids]
    vv = tuple(VVEdge(obs[i], obs[j], p) for (i, j), p in sorted(edges.items()))
    return CausalICModel(obs, tuple(hidden), vv, tuple(uv))


def random_cyclic_model(rng, n, max_edges=8, m=1, lo=0.0, hi=1.0) -> CausalICModel:
    """Model with arbitrary directed edges between distinct observed nodes."""
    obs = tuple(f"V{i + 1}" for i in range(n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    count = int(rng.integers(1, min(max_edges, len(pairs)) + 1)) if pairs else 0
    chosen = rng.choice(len(pairs), size=count, replace=False) if pairs else []
    vv = tuple(
        VVEdge(obs[pairs[c][0]], obs[pairs[c][1]], float(_u(rng, lo, hi))) for c in sorted(chosen)
    )
    hidden = tuple(HiddenNode(f"U{k + 1}", float(_u(rng, lo, hi))) for k in range(m))
    uv = tuple(
        UVEdge(h.name, obs[int(rng.integers(n))], float(_u(rng, lo, hi))) for h in hidden
    )
    return CausalICModel(obs, hidden, vv, uv, allow_cycles=True)

