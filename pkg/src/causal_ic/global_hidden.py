"""Recovery for models with one hidden node that points at every observed node.

Two classes are handled:

* global: the shared hidden node ``U0`` (activation ``r``, weights ``q``) is
  the only hidden node;
* mixed: ``U0`` (``r0``, weights ``q0``) plus one private hidden parent per
  observed node (effective weight ``q``).

Public indices (``detect_nonzero_q``, ``find_disconnected_triple``) are
1-based positions in the stored observed order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._checks import Checks
from .engine import DEFAULT_MAX_SIZE, ObservedDistribution, exact_joint
from .errors import (
    ClassMismatch,
    DegenerateDenominator,
    InconsistentInput,
    NoQualifyingTriple,
    PreconditionViolated,
)
from .markovian import UNIDENTIFIABLE, edge_key
from .model import (
    CausalICModel,
    ModelClass,
    UVEdge,
    VVEdge,
    classify,
    global_hidden_node,
    global_model,
    mixed_model,
)

UNRESOLVED = "unresolved"
ZERO_TOL = 1e-12
RESIM_TOL = 1e-8
MIXED_RESIM_TOL = 1e-6


def nonzero_threshold(dist: ObservedDistribution) -> float:
    """Mass below which a prefix event counts as impossible."""
    if dist.is_exact or not dist.num_samples:
        return ZERO_TOL
    return 5.0 / math.sqrt(dist.num_samples)


def _pattern(dist: ObservedDistribution, count: int, ones=(), fixed=None) -> float:
    """Mass of: first ``count`` nodes zero except ``ones`` (0-based) set to 1.

    ``fixed`` optionally pins leading nodes to given bits instead.
    """
    partial = {dist.nodes[t]: 0 for t in range(count)}
    for t, bit in (fixed or {}).items():
        partial[dist.nodes[t]] = bit
    for t in ones:
        partial[dist.nodes[t]] = 1
    return dist.marginal(partial)


def detect_nonzero_q(dist: ObservedDistribution, n: int | None = None, threshold: float | None = None) -> set[int]:
    """1-based indices ``t`` with ``P(V_1..V_{t-1} = 0, V_t = 1)`` above threshold.

    With all earlier nodes off, ``V_t`` can only fire through the shared
    hidden node, so the event has positive mass exactly when ``q_t > 0``.
    """
    n = dist.n if n is None else n
    thr = nonzero_threshold(dist) if threshold is None else threshold
    return {t + 1 for t in range(n) if _pattern(dist, t + 1, ones=(t,)) > thr}


# ---------------------------------------------------------------------------
# global model
# ---------------------------------------------------------------------------


@dataclass
class GlobalParams:
    nodes: tuple[str, ...]
    r: float
    q: list[float]
    p: dict[tuple[str, str], float | str]
    case: int = 1
    warnings: list[str] = field(default_factory=list)

    def to_model(self) -> CausalICModel:
        pos = {v: i for i, v in enumerate(self.nodes)}
        edges = {
            (pos[s], pos[t]): (0.0 if v == UNIDENTIFIABLE else v) for (s, t), v in self.p.items()
        }
        return _rename(global_model(self.r, self.q, edges), self.nodes)

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "q": dict(zip(self.nodes, self.q)),
            "p": {edge_key(*k): v for k, v in self.p.items() if v != UNIDENTIFIABLE},
            "unidentifiable": [edge_key(*k) for k, v in self.p.items() if v == UNIDENTIFIABLE],
            "case": self.case,
            "warnings": list(self.warnings),
        }


def _rename(model: CausalICModel, nodes) -> CausalICModel:
    """Rename observed nodes ``V1..Vn`` of a builder output to ``nodes``."""
    mapping = dict(zip(model.observed, nodes))
    return CausalICModel(
        tuple(nodes),
        model.hidden,
        tuple(VVEdge(mapping[e.source], mapping[e.target], e.p) for e in model.vv_edges),
        tuple(UVEdge(e.source, mapping[e.target], e.q) for e in model.uv_edges),
    )


def _edges_by_index(skeleton: CausalICModel) -> dict[int, list[int]]:
    """0-based parent indices of every node, ascending."""
    pos = {v: i for i, v in enumerate(skeleton.observed)}
    parents: dict[int, list[int]] = {i: [] for i in range(skeleton.n)}
    for e in skeleton.vv_edges:
        parents[pos[e.target]].append(pos[e.source])
    for v in parents.values():
        v.sort()
    return parents


def _one_hot_ratio(dist, i: int, j: int) -> float:
    """``P(V_i=1, rest of V_1..V_j = 0) / P(V_i=1, rest of V_1..V_{j-1} = 0)``."""
    den = _pattern(dist, j, ones=(i,))
    if den <= 0.0:
        raise PreconditionViolated(f"P({dist.nodes[i]} alone active) is zero")
    return _pattern(dist, j + 1, ones=(i,)) / den


def identify_global(
    dist: ObservedDistribution, skeleton: CausalICModel, strict: bool = False, verify: bool = True
) -> GlobalParams:
    """Recover ``r``, every ``q`` and every edge weight of a global-hidden model.

    If two nonzero-``q`` nodes are unconnected, the later one's ``q`` comes
    straight from a one-hot prefix ratio. Otherwise three pairwise
    connected nonzero-``q`` nodes give it through two one-hot ratios and a
    two-hot ratio. Either way ``r`` follows from two zero-prefix masses, the
    remaining ``q`` values from the first-activation masses, and edge
    weights from one-hot ratios (or, for parents with ``q = 0``, from the
    most likely pattern that activates the parent).
    """
    cls = classify(skeleton)
    if cls is not ModelClass.GLOBAL_HIDDEN:
        raise ClassMismatch(f"skeleton is {cls.value}, not GlobalHidden")
    if dist.nodes != skeleton.observed:
        dist = dist.reorder(skeleton.observed)
    n = dist.n
    checks = Checks(strict or dist.is_exact)
    thr = nonzero_threshold(dist)
    nz = sorted(t - 1 for t in detect_nonzero_q(dist, n, thr))
    if len(nz) < 3:
        raise PreconditionViolated(f"need at least 3 nonzero q, found {len(nz)}")
    parents = _edges_by_index(skeleton)
    linked = {(s, t) for t, ps in parents.items() for s in ps}

    zeros = [_pattern(dist, t) for t in range(n + 1)]
    pair = next(
        ((i, j) for i, j in itertools.combinations(nz, 2) if (i, j) not in linked), None
    )
    if pair is not None:
        case = 1
        i, anchor = pair
        q_anchor = 1.0 - _one_hot_ratio(dist, i, anchor)
    else:
        case = 2
        i, j, anchor = nz[:3]
        both = _pattern(dist, anchor, ones=(i, j))
        if both <= 0.0:
            raise PreconditionViolated("two-hot prefix event has zero mass")
        r4 = _pattern(dist, anchor + 1, ones=(i, j)) / both
        r2 = _one_hot_ratio(dist, i, anchor)
        r3 = _one_hot_ratio(dist, j, anchor)
        q_anchor = 1.0 - r2 * r3 / r4
    if q_anchor <= thr:
        raise PreconditionViolated(f"recovered q of {dist.nodes[anchor]} is zero")

    active_mass = (zeros[anchor] - zeros[anchor + 1]) / q_anchor  # r * prod_{s<anchor}(1 - q_s)
    r = checks.unit(1.0 - (zeros[anchor] - active_mass), "r")
    if r <= 0.0:
        raise PreconditionViolated("shared hidden node never activates")
    q: list[float] = []
    reach = r
    for t in range(n):
        q.append(checks.unit((zeros[t] - zeros[t + 1]) / reach, f"q[{dist.nodes[t]}]"))
        reach *= 1.0 - q[t]

    nzset = set(nz)
    p: dict[tuple[str, str], float | str] = {}
    known: dict[tuple[int, int], float] = {}
    for j in range(n):
        for i in parents[j]:
            key = (dist.nodes[i], dist.nodes[j])
            if i in nzset:
                value = _one_hot_ratio(dist, i, j) / (1.0 - q[j])
            else:
                value = _stay_via_pattern(dist, r, q, known, parents, i, j, thr)
            if value is None:
                p[key] = UNIDENTIFIABLE
                known[(i, j)] = 0.0
                continue
            p[key] = checks.unit(1.0 - value, f"p[{edge_key(*key)}]")
            known[(i, j)] = p[key]

    params = GlobalParams(dist.nodes, r, q, p, case, checks.warnings)
    if verify and n + 1 <= DEFAULT_MAX_SIZE:
        gap = exact_joint(params.to_model()).max_gap(dist)
        if gap > RESIM_TOL:
            checks.fail(InconsistentInput(f"recovered model misses the data by {gap:.3g}"))
    return params


def _stay_via_pattern(dist, r, q, known, parents, i, j, thr):
    """``1 - p_{i,j}`` for a parent ``V_i`` that the shared node cannot reach.

    Picks the most likely assignment of ``V_1..V_{j-1}`` with ``V_i`` on
    and every not-yet-solved parent of ``V_j`` off, and divides the
    observed chance of ``V_j`` staying off by the chance predicted from
    the parameters already known. Returns ``None`` when ``V_i`` is never
    active.
    """
    pending = [k for k in parents[j] if k != i and (k, j) not in known]
    best, best_mass = None, thr
    for bits in itertools.product((0, 1), repeat=j):
        if bits[i] != 1 or any(bits[k] for k in pending):
            continue
        mass = dist.marginal({dist.nodes[t]: b for t, b in enumerate(bits)})
        if mass > best_mass:
            best, best_mass = bits, mass
    if best is None:
        if dist.marginal({dist.nodes[i]: 1}) <= thr:
            return None
        raise PreconditionViolated(
            f"no usable activation pattern for edge {dist.nodes[i]}->{dist.nodes[j]}"
        )

    # P(pattern | U0 = u) from the prefix model with the known parameters
    prefix_edges = {(s, t): known[(s, t)] for (s, t) in known if t < j}
    pattern = "".join(map(str, best))
    mass_on = exact_joint(global_model(1.0, q[:j], prefix_edges)).prob(pattern) * r
    mass_off = exact_joint(global_model(0.0, q[:j], prefix_edges)).prob(pattern) * (1.0 - r)
    other = 1.0
    for k in parents[j]:
        if k != i and best[k]:
            other *= 1.0 - known[(k, j)]
    observed = dist.marginal({**{dist.nodes[t]: b for t, b in enumerate(best)}, dist.nodes[j]: 0})
    return observed / (other * (mass_off + (1.0 - q[j]) * mass_on))


# ---------------------------------------------------------------------------
# mixed model
# ---------------------------------------------------------------------------


class TripleChoice(NamedTuple):
    i: int
    j: int
    k: int
    adjacent: bool


def _ancestors(parents: dict[int, list[int]], t: int) -> set[int]:
    seen: set[int] = set()
    stack = list(parents[t])
    while stack:
        s = stack.pop()
        if s not in seen:
            seen.add(s)
            stack.extend(parents[s])
    return seen


def _can_be_consecutive(parents, triple) -> bool:
    """True when no outside node lies on a directed path between triple members."""
    anc = {t: _ancestors(parents, t) for t in parents}
    for z in parents:
        if z in triple:
            continue
        below = any(a in anc[z] for a in triple)
        above = any(z in anc[b] for b in triple)
        if below and above:
            return False
    return True


def find_disconnected_triple(graph: CausalICModel, nonzero) -> TripleChoice | None:
    """First triple ``i < j < k`` from ``nonzero`` with no edge between any pair.

    Triples that can sit consecutively in some topological order are
    preferred; ``adjacent`` reports whether the returned one can.
    """
    parents = _edges_by_index(graph)
    linked = {frozenset((s, t)) for t, ps in parents.items() for s in ps}
    fallback = None
    for trip in itertools.combinations(sorted(t - 1 for t in nonzero), 3):
        if any(frozenset(pr) in linked for pr in itertools.combinations(trip, 2)):
            continue
        if _can_be_consecutive(parents, set(trip)):
            return TripleChoice(*(t + 1 for t in trip), True)
        if fallback is None:
            fallback = TripleChoice(*(t + 1 for t in trip), False)
    return fallback


def _consecutive_order(parents, triple) -> list[int]:
    """A topological order placing the triple's ancestors first, then the triple."""
    anc = set().union(*(_ancestors(parents, t) for t in triple)) - set(triple)
    head = sorted(anc)
    rest = [t for t in range(len(parents)) if t not in anc and t not in triple]
    return head + sorted(triple) + rest


@dataclass
class MixedSolverState:
    """One solve of the eight pattern masses over the pivot triple."""

    l: int
    a_l: float
    b_l: float
    x: dict[str, float]
    y: dict[str, float]
    probs: tuple[float, ...]
    numerator1: float = 0.0
    numerator2: float = 0.0
    denominator: float = 0.0
    sign_product: float = 0.0


class EightSolution(NamedTuple):
    a: float
    b: float
    x: tuple[float, float, float]
    y: tuple[float, float, float]
    numerator1: float
    numerator2: float
    denominator: float
    sign_product: float


def solve_eight(probs) -> EightSolution:
    """Solve the two-component system behind the eight triple-pattern masses.

    ``probs`` lists the masses of the triple patterns 000, 100, 010, 001,
    110, 101, 011, 111 (with everything else in the prefix off). The model
    behind them is ``a * prod x^v + b * prod y^v`` where ``a``/``b`` are the
    all-off masses with the shared node on/off and ``x``/``y`` are each
    pivot's on/off odds times its outgoing edge factors. The root with
    ``x > y`` is returned, which is the one consistent with a positive
    shared weight.
    """
    p1, p2, p3, p4, p5, p6, p7, p8 = (float(v) for v in probs)
    # Closed form: a = (num1 + num2) / den with num1 = p1 den / 2. Expanded
    # into monomials the discriminant cancels catastrophically when one
    # hidden state carries little mass, so a and b are evaluated through
    # factored forms; num1, num2 and den are kept for reporting.
    d_ij, d_ik, d_jk = p1 * p5 - p2 * p3, p1 * p6 - p2 * p4, p1 * p7 - p3 * p4
    # det(A0 + t A1) for the slices with the first pivot off / on
    c0, c2 = d_jk, p2 * p8 - p5 * p6
    c1 = p1 * p8 + p2 * p7 - p3 * p6 - p4 * p5
    inner = c1 * c1 - 4.0 * c0 * c2
    lead = p1**2 * p8 - p1 * p2 * p7 - p1 * p3 * p6 - p1 * p4 * p5 + 2 * p2 * p3 * p4
    sign = (p2 * p3 - p1 * p5) * (p2 * p4 - p1 * p6) * (p3 * p4 - p1 * p7)
    noise = 1e-12
    separated = all(
        abs(d) > noise * (u + v)
        for d, u, v in ((d_ij, p1 * p5, p2 * p3), (d_ik, p1 * p6, p2 * p4), (d_jk, p1 * p7, p3 * p4))
    )
    if not separated or inner <= noise * c1 * c1:
        raise DegenerateDenominator("pivot nodes do not separate the two hidden states")
    root = math.sqrt(inner)
    den = -2.0 * inner
    num1 = (
        2 * p1**2 * p2 * p7 * p8 + 2 * p1**2 * p3 * p6 * p8 + 2 * p1**2 * p4 * p5 * p8
        - 4 * p1**2 * p5 * p6 * p7 - p1 * p2**2 * p7**2 - 4 * p1 * p2 * p3 * p4 * p8
        + 2 * p1 * p2 * p3 * p6 * p7 + 2 * p1 * p2 * p4 * p5 * p7 - p1 * p3**2 * p6**2
        + 2 * p1 * p3 * p4 * p5 * p6 - p1 * p4**2 * p5**2 - p1**3 * p8**2
    )
    num2 = lead * root
    # a + b = p1 and a b = d_ij d_ik d_jk / inner; take the larger of the two
    # from the sum so the smaller one comes from the product without cancellation
    ab = d_ij * d_ik * d_jk / inner
    half_gap = 0.5 * lead / root
    if ab <= 0.0:
        raise DegenerateDenominator("eight-pattern system has no admissible root")
    if half_gap >= 0.0:
        b = 0.5 * p1 + half_gap
        a = ab / b
    else:
        a = 0.5 * p1 - half_gap
        b = ab / a
    gaps = (
        math.sqrt(d_ij * d_ik / (ab * d_jk)),
        math.sqrt(d_ij * d_jk / (ab * d_ik)),
        math.sqrt(d_ik * d_jk / (ab * d_ij)),
    )
    ys = tuple((pt - a * g) / p1 for pt, g in zip((p2, p3, p4), gaps))
    xs = tuple(y + g for y, g in zip(ys, gaps))
    return EightSolution(a, b, xs, ys, num1, num2, den, sign)


_TRIPLE_PATTERNS = ((), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2))


@dataclass
class MixedParams:
    nodes: tuple[str, ...]
    r0: float | str
    q0: list
    q: list
    p: dict[tuple[str, str], float | str]
    triple: tuple[str, str, str]
    adjacent: bool
    states: list[MixedSolverState] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def unresolved(self) -> list[str]:
        out = ["r0"] if self.r0 == UNRESOLVED else []
        out += [f"q0[{v}]" for v, x in zip(self.nodes, self.q0) if x == UNRESOLVED]
        out += [f"q[{v}]" for v, x in zip(self.nodes, self.q) if x == UNRESOLVED]
        out += [edge_key(*k) for k, v in self.p.items() if v == UNRESOLVED]
        return out

    @property
    def complete(self) -> bool:
        return not self.unresolved

    def to_model(self) -> CausalICModel:
        if not self.complete:
            raise ValueError("cannot build a model from a partial result")
        pos = {v: i for i, v in enumerate(self.nodes)}
        edges = {(pos[s], pos[t]): v for (s, t), v in self.p.items()}
        return _rename(mixed_model(self.r0, self.q0, self.q, edges), self.nodes)

    def to_json(self) -> dict:
        def known(seq):
            return {v: x for v, x in zip(self.nodes, seq) if x != UNRESOLVED}

        body = {
            "q0": known(self.q0),
            "q": known(self.q),
            "p": {edge_key(*k): v for k, v in self.p.items() if v != UNRESOLVED},
            "triple": list(self.triple),
            "adjacent": self.adjacent,
            "unresolved": self.unresolved,
            "warnings": list(self.warnings),
        }
        if self.r0 != UNRESOLVED:
            body = {"r0": self.r0, **body}
        return body


def _eight_masses(dist, triple, count, fixed=None):
    return [_pattern(dist, count, ones=[triple[s] for s in pat], fixed=fixed) for pat in _TRIPLE_PATTERNS]


def _odds(q0: float, q: float) -> tuple[float, float]:
    """On/off odds of a node with all parents off, shared node on and off."""
    off_on = (1.0 - q) * (1.0 - q0)
    return (1.0 - off_on) / off_on, q / (1.0 - q)


def identify_mixed(
    dist: ObservedDistribution, skeleton: CausalICModel, strict: bool = False, verify: bool = True
) -> MixedParams:
    """Recover a mixed model from three mutually unlinked pivot nodes.

    For every prefix length ``l`` from the last pivot on, the eight pivot
    patterns (all other prefix nodes off) give the masses ``a_l``, ``b_l``
    of the all-off prefix with the shared node on and off. Their ratios
    yield ``q`` and ``q0`` past the pivots, and one-hot ratios give the
    edge weights there. When the pivots can be placed consecutively the
    same system is solved once per assignment of the nodes before them,
    which exposes the joint of the leading nodes with the shared node and
    hence every remaining parameter. Otherwise the leading parameters are
    returned as ``unresolved``.

    Nodes with a zero-weight shared edge in ``skeleton`` are not eligible
    as pivots.
    """
    cls = classify(skeleton)
    if cls is not ModelClass.MIXED_GLOBAL_MARKOVIAN:
        raise ClassMismatch(f"skeleton is {cls.value}, not MixedGlobalMarkovian")
    g = global_hidden_node(skeleton)
    nonzero = {i + 1 for i, v in enumerate(skeleton.observed) if skeleton.q(g, v) != 0.0}
    choice = find_disconnected_triple(skeleton, nonzero)
    if choice is None:
        raise NoQualifyingTriple("no three unlinked nodes with a shared hidden edge")
    checks = Checks(strict or dist.is_exact)

    parents = _edges_by_index(skeleton)
    trip0 = (choice.i - 1, choice.j - 1, choice.k - 1)
    order = _consecutive_order(parents, trip0) if choice.adjacent else list(range(skeleton.n))
    nodes = tuple(skeleton.observed[t] for t in order)
    work = dist.reorder(nodes)
    pos = {v: i for i, v in enumerate(nodes)}
    triple = tuple(sorted(pos[skeleton.observed[t]] for t in trip0))
    n, k = len(nodes), triple[2]
    edges = sorted((pos[e.source], pos[e.target]) for e in skeleton.vv_edges)

    states: list[MixedSolverState] = []
    ab: dict[int, tuple[float, float]] = {}
    for count in range(k + 1, n + 1):
        probs = _eight_masses(work, triple, count)
        sol = solve_eight(probs)
        if sol.sign_product >= -1e-300:
            checks.fail(InconsistentInput(f"pivot sign product is {sol.sign_product:.3g}"))
        ab[count] = (sol.a, sol.b)
        states.append(
            MixedSolverState(
                count, sol.a, sol.b,
                {nodes[t]: x for t, x in zip(triple, sol.x)},
                {nodes[t]: y for t, y in zip(triple, sol.y)},
                tuple(probs), sol.numerator1, sol.numerator2, sol.denominator, sol.sign_product,
            )
        )

    r0: float | str = UNRESOLVED
    q0: list = [UNRESOLVED] * n
    q: list = [UNRESOLVED] * n
    p: dict[tuple[int, int], float | str] = {e: UNRESOLVED for e in edges}

    for t in range(k + 1, n):
        (a1, b1), (a0, b0) = ab[t + 1], ab[t]
        q[t] = checks.unit(1.0 - b1 / b0, f"q[{nodes[t]}]")
        stay = (a1 / a0) / (1.0 - q[t])
        q0[t] = checks.unit(1.0 - stay, f"q0[{nodes[t]}]")

    if choice.adjacent:
        r0, head_q0, head_q, head_p = _solve_head(work, triple, edges, checks)
        q0[: k + 1] = head_q0
        q[: k + 1] = head_q
        p.update(head_p)

    # edges into nodes past the pivots, from any source whose own weights are known
    for s, t in edges:
        if t <= k or q[s] == UNRESOLVED:
            continue
        p[(s, t)] = checks.unit(
            1.0 - _edge_product(work, ab, s, t + 1, q0[s], q[s])
            / _edge_product(work, ab, s, t, q0[s], q[s]),
            f"p[{nodes[s]}->{nodes[t]}]",
        )

    named_p = {(nodes[s], nodes[t]): v for (s, t), v in p.items()}
    back = [pos[v] for v in skeleton.observed]
    params = MixedParams(
        skeleton.observed,
        r0,
        [q0[i] for i in back],
        [q[i] for i in back],
        {(e.source, e.target): named_p[(e.source, e.target)] for e in skeleton.vv_edges},
        tuple(nodes[t] for t in triple),
        choice.adjacent,
        states,
        checks.warnings,
    )
    if verify and params.complete and 2 * n + 1 <= DEFAULT_MAX_SIZE:
        gap = exact_joint(params.to_model()).max_gap(dist)
        if gap > MIXED_RESIM_TOL:
            checks.fail(InconsistentInput(f"recovered model misses the data by {gap:.3g}"))
    return params


def _edge_product(dist, ab, s, count, q0_s, q_s) -> float:
    """Product of ``1 - p_{s,t}`` over edges from ``V_s`` into the first ``count`` nodes."""
    a, b = ab[count]
    x_odds, y_odds = _odds(q0_s, q_s)
    ratio = _pattern(dist, count, ones=(s,)) / _pattern(dist, count)
    return ratio * (a + b) / (a * x_odds + b * y_odds)


def _solve_head(dist, triple, edges, checks):
    """Parameters of the leading nodes when the pivots are consecutive.

    For each assignment ``gamma`` of the nodes before the pivots the eight
    pivot patterns are solved separately, giving the joint of the first
    ``k + 1`` nodes together with the shared node. Every leading parameter
    is then a conditional of that joint, as in a Markovian model with the
    shared node observed.
    """
    i, _, k = triple
    width = k + 1
    joint = np.zeros((2,) + (2,) * width)
    for gamma in itertools.product((0, 1), repeat=i):
        fixed = dict(enumerate(gamma))
        probs = _eight_masses(dist, triple, width, fixed)
        if probs[0] <= ZERO_TOL:
            continue
        sol = solve_eight(probs)
        for pat in _TRIPLE_PATTERNS:
            bits = list(gamma) + [1 if s in pat else 0 for s in range(3)]
            on = sol.a * math.prod(sol.x[s] for s in pat)
            off = sol.b * math.prod(sol.y[s] for s in pat)
            joint[(1, *bits)] = on
            joint[(0, *bits)] = off

    r0 = checks.unit(float(joint[1].sum()), "r0")
    parents_of: dict[int, list[int]] = {t: [] for t in range(width)}
    for s, t in edges:
        if t < width:
            parents_of[t].append(s)

    def stay(u, t, on=()):
        cube = joint[u].sum(axis=tuple(range(t + 1, width))) if t + 1 < width else joint[u]
        idx = [slice(None)] * (t + 1)
        for s in parents_of[t]:
            idx[s] = 1 if s in on else 0
        sel = cube[tuple(idx)]
        # remaining free axes are non-parents (summed); last axis is node t
        sel = sel.reshape(-1, 2).sum(axis=0)
        if sel.sum() <= ZERO_TOL:
            raise PreconditionViolated(f"conditioning event for node {t} has zero mass")
        return sel[0] / sel.sum()

    q0, q, p = [], [], {}
    for t in range(width):
        base = stay(0, t)
        q.append(checks.unit(1.0 - base, f"q[{dist.nodes[t]}]"))
        q0.append(checks.unit(1.0 - stay(1, t) / base, f"q0[{dist.nodes[t]}]"))
        for s in parents_of[t]:
            p[(s, t)] = checks.unit(1.0 - stay(0, t, (s,)) / base, f"p[{dist.nodes[s]}->{dist.nodes[t]}]")
    return r0, q0, q, p
