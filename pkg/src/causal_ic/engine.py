"""Exact and sampled observed distributions of causal IC models."""

from __future__ import annotations

import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    ModelError,
    SizeGuardExceeded,
    UnassignedParent,
    ZeroConditioningEvent,
)
from .model import CausalICModel, check, compile_model, is_dag

DEFAULT_MAX_SIZE = 24
ZERO_EVENT = 1e-300
EXACT_SOURCES = ("exact", "live-edge", "unrolled")

# rows drawn per batch when sampling; part of the reproducibility contract
SAMPLE_BLOCK = 1 << 16


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n else ""


@dataclass(frozen=True, eq=False)
class ObservedDistribution:
    """Probabilities of full observed assignments.

    ``probs[k]`` is the probability of the bit string ``format(k, "0nb")``,
    whose i-th character is the state of ``nodes[i]``.
    """

    nodes: tuple[str, ...]
    probs: np.ndarray
    source: str = "exact"
    num_samples: int | None = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def is_exact(self) -> bool:
        return self.source in EXACT_SOURCES

    def prob(self, bits: str) -> float:
        return float(self.probs[int(bits, 2)]) if bits else float(self.probs[0])

    def atoms(self) -> list[tuple[str, float]]:
        return [(bitstring(k, self.n), float(p)) for k, p in enumerate(self.probs)]

    def total(self) -> float:
        return float(np.sum(self.probs))

    def _index(self, partial: Mapping[str, int]):
        idx = [slice(None)] * self.n
        for name, bit in partial.items():
            try:
                pos = self.nodes.index(name)
            except ValueError:
                raise KeyError(f"unknown node {name!r}") from None
            if bit not in (0, 1):
                raise ValueError(f"state of {name!r} must be 0 or 1")
            idx[pos] = int(bit)
        return tuple(idx)

    def marginal(self, partial: Mapping[str, int]) -> float:
        """Total probability of the assignments consistent with ``partial``."""
        if self.n == 0:
            return float(self.probs[0])
        cube = self.probs.reshape((2,) * self.n)
        return float(np.sum(cube[self._index(partial)]))

    def conditional(self, target: Mapping[str, int], given: Mapping[str, int]) -> float:
        denom = self.marginal(given)
        if denom <= ZERO_EVENT:
            raise ZeroConditioningEvent(f"P({dict(given)}) = {denom:.3g}")
        joint = dict(given)
        for name, bit in target.items():
            if joint.get(name, bit) != bit:
                return 0.0
            joint[name] = bit
        return self.marginal(joint) / denom

    def reorder(self, nodes: Iterable[str]) -> ObservedDistribution:
        """Same distribution with bit positions following ``nodes``."""
        nodes = tuple(nodes)
        perm = [self.nodes.index(v) for v in nodes]
        cube = self.probs.reshape((2,) * self.n).transpose(perm)
        return ObservedDistribution(nodes, cube.reshape(-1).copy(), self.source, self.num_samples)

    def max_gap(self, other: ObservedDistribution) -> float:
        if other.nodes != self.nodes:
            other = other.reorder(self.nodes)
        return float(np.max(np.abs(self.probs - other.probs)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("assignment,probability\n")
        for bits, p in self.atoms():
            buf.write(f"{bits},{p:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, nodes=None, source="empirical", num_samples=None):
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].replace(" ", "") != "assignment,probability":
            raise ValueError("distribution CSV must start with 'assignment,probability'")
        rows = [ln.split(",") for ln in lines[1:]]
        n = len(rows[0][0]) if rows else 0
        probs = np.zeros(1 << n)
        for bits, p in rows:
            if len(bits) != n or set(bits) - {"0", "1"}:
                raise ValueError(f"bad assignment {bits!r}")
            probs[int(bits, 2) if n else 0] = float(p)
        nodes = tuple(nodes) if nodes is not None else tuple(f"V{i + 1}" for i in range(n))
        if len(nodes) != n:
            raise ValueError("node list does not match assignment width")
        return cls(nodes, probs, source, num_samples)


def activation_probability(
    model: CausalICModel,
    node: str,
    observed_parent_states: Mapping[str, int],
    hidden_parent_states: Mapping[str, int],
) -> float:
    """``1 - prod (1 - weight)`` over the active parents of ``node``."""
    stay = 1.0
    for e in model.vv_edges:
        if e.target == node:
            if e.source not in observed_parent_states:
                raise UnassignedParent(f"observed parent {e.source} of {node} is unassigned")
            if observed_parent_states[e.source]:
                stay *= 1.0 - e.p
    for e in model.uv_edges:
        if e.target == node:
            if e.source not in hidden_parent_states:
                raise UnassignedParent(f"hidden parent {e.source} of {node} is unassigned")
            if hidden_parent_states[e.source]:
                stay *= 1.0 - e.q
    return 1.0 - stay


def exact_joint(model: CausalICModel, max_size: int = DEFAULT_MAX_SIZE) -> ObservedDistribution:
    """Exact observed distribution by summing over every hidden state.

    Requires a DAG whose stored observed order is topological. Cost is
    ``2**(m + n)`` terms, so models with ``m + n > max_size`` are refused.
    """
    check(model)
    if not is_dag(model):
        raise ModelError("exact_joint needs an acyclic model in topological order")
    if model.n + model.m > max_size:
        raise SizeGuardExceeded(
            f"|U|+|V| = {model.n + model.m} exceeds the guard {max_size}; sample instead"
        )
    c = compile_model(model)
    probs = _kernels.joint(c.indptr, c.parents, c.one_minus_p, c.one_minus_q, c.r)
    return ObservedDistribution(model.observed, probs, "exact")


def _seed_indices(model, seeds):
    seeds = list(seeds or ())
    for s in seeds:
        if s not in model.observed:
            raise KeyError(f"seed {s!r} is not an observed node")
    return np.asarray(sorted(model.index(s) for s in seeds), dtype=np.int64)


def live_edge_exact(
    model: CausalICModel, seeds=None, max_size: int = DEFAULT_MAX_SIZE
) -> ObservedDistribution:
    """Exact distribution of the final active set via live-edge enumeration.

    Every hidden activation and every edge liveness outcome is enumerated;
    the final active set is whatever is reachable from the seeds and the
    active hidden nodes through live edges. Cycles are allowed.
    """
    check(model)
    size = model.m + len(model.vv_edges) + len(model.uv_edges)
    if size > max_size:
        raise SizeGuardExceeded(f"|U|+|E| = {size} exceeds the guard {max_size}")
    c = compile_model(model)
    seed_mask = 0
    for i in _seed_indices(model, seeds):
        seed_mask |= 1 << (c.n - 1 - int(i))
    probs = _kernels.live_edge(
        c.n, c.r, c.uv_src, c.uv_dst, c.uv_q, c.vv_src, c.vv_dst, c.vv_p, np.int64(seed_mask)
    )
    return ObservedDistribution(model.observed, probs, "live-edge")


def marginal(dist: ObservedDistribution, partial: Mapping[str, int]) -> float:
    return dist.marginal(partial)


def conditional(
    dist: ObservedDistribution, target: Mapping[str, int], given: Mapping[str, int]
) -> float:
    return dist.conditional(target, given)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def make_rng(rng_seed: int) -> np.random.Generator:
    """Philox4x64 keyed by the 64-bit seed, counter starting at zero."""
    return np.random.Generator(np.random.Philox(key=int(rng_seed) & 0xFFFFFFFFFFFFFFFF))


def _draw(rng, rows, c):
    hidden = rng.random((rows, c.m)) < c.r[None, :]
    uv_live = rng.random((rows, len(c.uv_q))) < c.uv_q[None, :]
    vv_live = rng.random((rows, len(c.vv_p))) < c.vv_p[None, :]
    return hidden, uv_live, vv_live


@dataclass(frozen=True)
class Cascade:
    """Observed active sets after each round, starting with the seed set."""

    rounds: tuple[frozenset[str], ...]
    final: str


def sample_cascade(model: CausalICModel, seeds=(), rng_seed: int = 0) -> Cascade:
    """One round-based IC run.

    Hidden nodes switch on with probability ``r`` at round 0; every node
    that became active in round ``t - 1`` tries each of its out-edges once
    in round ``t``.
    """
    check(model)
    c = compile_model(model)
    hidden, uv_live, vv_live = _draw(make_rng(rng_seed), 1, c)
    hidden, uv_live, vv_live = hidden[0], uv_live[0], vv_live[0]
    active = set(int(i) for i in _seed_indices(model, seeds))
    rounds = [frozenset(model.observed[i] for i in active)]
    new_obs = set(active)
    new_hidden = {k for k in range(c.m) if hidden[k]}
    while new_obs or new_hidden:
        reached = set()
        for e in range(len(c.uv_q)):
            if c.uv_src[e] in new_hidden and uv_live[e]:
                reached.add(int(c.uv_dst[e]))
        for e in range(len(c.vv_p)):
            if c.vv_src[e] in new_obs and vv_live[e]:
                reached.add(int(c.vv_dst[e]))
        new_obs = reached - active
        new_hidden = set()
        if new_obs:
            active |= new_obs
            rounds.append(frozenset(model.observed[i] for i in active))
    final = "".join("1" if i in active else "0" for i in range(c.n))
    return Cascade(tuple(rounds), final)


def empirical_distribution(
    model: CausalICModel, num_samples: int, rng_seed: int = 0, seeds=()
) -> ObservedDistribution:
    """Frequencies of final assignments over ``num_samples`` independent runs."""
    if num_samples < 1:
        raise ValueError("num_samples must be at least 1")
    check(model)
    c = compile_model(model)
    seed_idx = _seed_indices(model, seeds)
    rng = make_rng(rng_seed)
    counts = np.zeros(1 << c.n, dtype=np.int64)
    done = 0
    while done < num_samples:
        rows = min(SAMPLE_BLOCK, num_samples - done)
        hidden, uv_live, vv_live = _draw(rng, rows, c)
        masks = _kernels.propagate(
            c.n, hidden, uv_live, vv_live, c.uv_src, c.uv_dst, c.vv_src, c.vv_dst, seed_idx
        )
        counts += np.bincount(masks, minlength=1 << c.n)
        done += rows
    return ObservedDistribution(
        model.observed, counts / float(num_samples), "empirical", num_samples
    )
