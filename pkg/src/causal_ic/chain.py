"""Semi-Markovian chain models: unidentifiability witness and recovery.

Chain indexing: ``U_i`` points at ``V_i`` with ``q1[i]`` and at ``V_{i+1}``
with ``q2[i]``; ``p[i]`` weighs ``V_i -> V_{i+1}``. Python lists are
0-based, so ``p[0]`` is ``p_1``.

For a bit string ``g`` over ``V_1..V_t`` the solver tracks::

    a(g) = P(V_1..V_t = g)              (observed)
    b(g) = P(V_1..V_t = g, U_t = 0)     (latent)
    c(g) = P(V_1..V_t = g, U_t = 1)     (latent)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._checks import Checks
from .engine import DEFAULT_MAX_SIZE, ObservedDistribution, exact_joint
from .errors import (
    BoundaryParameter,
    InconsistentInput,
    InconsistentPrior,
    OutOfRange,
    SingularSystem,
)
from .model import (
    CausalICModel,
    HiddenNode,
    UVEdge,
    VVEdge,
    chain_model,
    witness_structure,
)

ABC_TOL = 1e-8
CO_TOL = 1e-10
DET_TOL = 1e-10
RESIM_TOL = 1e-8
PRIOR_TOL = 1e-6


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass
class ChainParams:
    n: int
    p: list[float]
    r: list[float]
    q1: list[float]
    q2: list[float]
    warnings: list[str] = field(default_factory=list)

    def to_model(self) -> CausalICModel:
        return chain_model(self.p, self.r, self.q1, self.q2)

    def vector(self) -> np.ndarray:
        return np.array(self.p + self.r + self.q1 + self.q2, dtype=float)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": list(self.p),
            "r": list(self.r),
            "q1": list(self.q1),
            "q2": list(self.q2),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_model(cls, model: CausalICModel) -> ChainParams:
        obs = model.observed
        k = len(obs) - 1
        hid = [h.name for h in model.hidden]
        return cls(
            k + 1,
            [model.p(obs[i], obs[i + 1]) for i in range(k)],
            [model.r(h) for h in hid],
            [model.q(hid[i], obs[i]) for i in range(k)],
            [model.q(hid[i], obs[i + 1]) for i in range(k)],
        )


@dataclass(frozen=True)
class PriorKnowledge:
    """``p_1`` plus either the full ``q2`` sequence or the full ``r`` sequence."""

    p1: float
    kind: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("q2", "r"):
            raise ValueError("prior kind must be 'q2' or 'r'")

    @classmethod
    def from_json(cls, doc: dict) -> PriorKnowledge:
        if ("q2" in doc) == ("r" in doc):
            raise ValueError("prior must give exactly one of 'q2' and 'r'")
        kind = "q2" if "q2" in doc else "r"
        return cls(float(doc["p1"]), kind, tuple(float(x) for x in doc[kind]))

    @classmethod
    def from_params(cls, params: ChainParams, kind: str = "q2") -> PriorKnowledge:
        return cls(params.p[0], kind, tuple(params.q2 if kind == "q2" else params.r))

    def to_json(self) -> dict:
        return {"p1": self.p1, self.kind: list(self.values)}


@dataclass
class ChainState:
    """Parameters known so far; ``None`` marks an unknown entry.

    ``s[i]`` holds the product ``r_{i+1} q_{i+1,1}``, which the induction
    learns one step before the two factors.
    """

    n: int
    p: list = field(default_factory=list)
    r: list = field(default_factory=list)
    q1: list = field(default_factory=list)
    q2: list = field(default_factory=list)
    s: list = field(default_factory=list)

    def __post_init__(self):
        k = self.n - 1
        for name in ("p", "r", "q1", "q2", "s"):
            seq = list(getattr(self, name)) or [None] * k
            if len(seq) != k:
                raise ValueError(f"{name} must have {k} entries")
            setattr(self, name, seq)
        for i in range(k):
            if self.s[i] is None and self.r[i] is not None and self.q1[i] is not None:
                self.s[i] = self.r[i] * self.q1[i]

    @classmethod
    def from_params(cls, params: ChainParams) -> ChainState:
        return cls(params.n, params.p, params.r, params.q1, params.q2)

    def need(self, name: str, index: int) -> float:
        """Value of ``name`` at 1-based ``index``; raises if unknown."""
        value = getattr(self, name)[index - 1]
        if value is None:
            raise ValueError(f"{name}_{index} is not known yet")
        return value


class AbcTriple(NamedTuple):
    gamma: str
    a: float
    b: float
    c: float


class CoPair(NamedTuple):
    beta: str
    co1: float
    co2: float


def _a(dist: ObservedDistribution, gamma: str) -> float:
    return dist.marginal({dist.nodes[i]: int(ch) for i, ch in enumerate(gamma)})


# ---------------------------------------------------------------------------
# witness for unidentifiability of the three-node structure
# ---------------------------------------------------------------------------

R2_LOW, R2_HIGH = 0.25, 9.0 / 14.0
WITNESS_KEYS = ("p1", "p2", "r1", "r2", "q11", "q12", "q21", "q22")


class WitnessPair(NamedTuple):
    base: dict
    alt: dict
    r2: float

    def param_gap(self) -> float:
        return max(abs(self.base[k] - self.alt[k]) for k in WITNESS_KEYS)


class WitnessCheck(NamedTuple):
    ok: bool
    max_gap: float
    param_gap: float


def witness_pair(r2: float) -> WitnessPair:
    """Two parameter settings of the three-node structure with equal observations.

    The base setting has every parameter at 1/2; the alternative moves
    ``r1, r2, q11, q12, q21, q22`` along a one-parameter family in ``r2``.
    """
    if not R2_LOW < r2 < R2_HIGH:
        raise OutOfRange(f"r2={r2} must lie strictly between 1/4 and 9/14")
    base = {k: 0.5 for k in WITNESS_KEYS}
    r1 = (10 * r2 - 7) / (12 * r2 - 10)
    alt = dict(base)
    alt.update(
        r1=r1,
        r2=r2,
        q11=1 / (4 * r1),
        q12=(6 * r2 - 5) / (8 * r2 - 8),
        q21=1 / (3 - 2 * r2),
        q22=1 / (4 * r2),
    )
    for k, v in alt.items():
        if not 0.0 < v < 1.0:
            raise OutOfRange(f"witness parameter {k}={v} left (0, 1)")
    return WitnessPair(base, alt, r2)


SURROGATE_GRID = (0.0, 0.25, 0.5, 1.0)


def _with_external_parents(model: CausalICModel, strengths) -> CausalICModel:
    """Prepend one observed root per node, firing into it with the given weight.

    Each root ``R_i`` is switched on by its own hidden parent with
    probability 1/2, so the joint over roots and nodes covers both the
    "no external push" and "push of strength x_i" situations.
    """
    roots = tuple(f"R{i + 1}" for i in range(len(strengths)))
    hidden = tuple(HiddenNode(f"H{i + 1}", 1.0) for i in range(len(strengths)))
    uv = tuple(UVEdge(f"H{i + 1}", roots[i], 0.5) for i in range(len(strengths)))
    vv = tuple(
        VVEdge(roots[i], model.observed[i], float(x)) for i, x in enumerate(strengths)
    )
    return CausalICModel(
        roots + model.observed,
        hidden + model.hidden,
        vv + model.vv_edges,
        uv + model.uv_edges,
    )


def verify_witness(pair: WitnessPair, tol: float = 1e-9, grid=SURROGATE_GRID) -> WitnessCheck:
    """Compare the exact observed distributions of the two settings.

    Besides the bare structure, every combination of external push
    strengths from ``grid`` on ``V1, V2, V3`` is checked on the joint of the
    pushing roots and the structure.
    """
    base = witness_structure(pair.base)
    alt = witness_structure(pair.alt)
    gap = exact_joint(base).max_gap(exact_joint(alt))
    for strengths in itertools.product(grid, repeat=3):
        d0 = exact_joint(_with_external_parents(base, strengths))
        d1 = exact_joint(_with_external_parents(alt, strengths))
        gap = max(gap, d0.max_gap(d1))
    return WitnessCheck(gap <= tol, gap, pair.param_gap())


class ConfoundedTriple(NamedTuple):
    va: str
    vb: str
    vc: str
    ux: str
    uy: str


def _reach(model: CausalICModel, start: str, forward: bool = True) -> set[str]:
    nxt: dict[str, list[str]] = {v: [] for v in model.observed}
    for e in model.vv_edges:
        if forward:
            nxt[e.source].append(e.target)
        else:
            nxt[e.target].append(e.source)
    seen: set[str] = set()
    stack = list(nxt[start])
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(nxt[v])
    return seen


def find_theorem2_structure(model: CausalICModel) -> ConfoundedTriple | None:
    """Locate ``V_a -> V_b -> V_c`` with two-edge confounders on both links.

    The three nodes must be placeable consecutively in a topological order,
    i.e. no node other than ``V_b`` sits on a directed path from ``V_a`` to
    ``V_c``. Returns the first match in stored node order, or ``None``.
    """
    vv = {(e.source, e.target) for e in model.vv_edges}
    pairs: dict[frozenset, list[str]] = {}
    for h in model.hidden:
        kids = model.hidden_children(h.name)
        if len(kids) == 2:
            pairs.setdefault(frozenset(kids), []).append(h.name)
    for a in model.observed:
        for b in model.observed:
            if (a, b) not in vv or frozenset((a, b)) not in pairs:
                continue
            for c in model.observed:
                if (b, c) not in vv or frozenset((b, c)) not in pairs:
                    continue
                between = _reach(model, a) & _reach(model, c, forward=False)
                if between - {b}:
                    continue
                ux = pairs[frozenset((a, b))][0]
                uy = next((u for u in pairs[frozenset((b, c))] if u != ux), None)
                if uy is not None:
                    return ConfoundedTriple(a, b, c, ux, uy)
    return None


def min_known_bound(n: int) -> int:
    """Largest number of known parameters that still leaves a chain unidentifiable."""
    if n < 2:
        raise OutOfRange("a chain needs at least two observed nodes")
    return (n - 1) // 2


# ---------------------------------------------------------------------------
# a/b/c recurrences and the linear-system coefficients
# ---------------------------------------------------------------------------


def chain_abc(
    dist: ObservedDistribution, known: ChainState, gamma: str, _checks: Checks | None = None
) -> AbcTriple:
    """Split ``a(gamma)`` by the state of ``U_t`` where ``t = len(gamma)``.

    Needs ``r_i, q1_i`` for ``i <= t`` and ``p_i, q2_i`` for ``i < t``.
    """
    t = len(gamma)
    if t < 1:
        raise ValueError("gamma must be non-empty")
    checks = _checks or Checks(dist.is_exact)
    r1, q11 = known.need("r", 1), known.need("q1", 1)
    if gamma[0] == "0":
        b, c = 1.0 - r1, r1 * (1.0 - q11)
    else:
        b, c = 0.0, r1 * q11
    for s in range(2, t + 1):
        a_prev = _a(dist, gamma[: s - 1])
        stay = b + (1.0 - known.need("q2", s - 1)) * c
        if gamma[s - 2] == "1":
            stay *= 1.0 - known.need("p", s - 1)
        r_s, q_s1 = known.need("r", s), known.need("q1", s)
        if gamma[s - 1] == "0":
            b, c = (1.0 - r_s) * stay, r_s * (1.0 - q_s1) * stay
        else:
            b, c = (1.0 - r_s) * (a_prev - stay), r_s * (a_prev - (1.0 - q_s1) * stay)
    a = _a(dist, gamma)
    if abs(a - (b + c)) > ABC_TOL:
        checks.fail(InconsistentInput(f"a({gamma})={a:.12g} but b+c={b + c:.12g}"))
    return AbcTriple(gamma, a, b, c)


def co_coefficients(
    dist: ObservedDistribution, known: ChainState, beta: str, _checks: Checks | None = None
) -> CoPair:
    """Coefficients of ``q2 r`` and ``q2`` (index ``t-1``) for ``a(beta 1 0)``.

    With ``t = len(beta) + 2``::

        a(beta 1 0) = K * (Co1 * (q2_{t-1} r_{t-1} - 1) + Co2 * (q2_{t-1} - 1))

    where ``K = (1 - r_t q1_t)(1 - p_{t-1})``.
    """
    checks = _checks or Checks(dist.is_exact)
    k = len(beta)
    abc = chain_abc(dist, known, beta, checks)
    stay = abc.a - known.need("q2", k) * abc.c
    if beta[-1] == "1":
        stay *= 1.0 - known.need("p", k)
    co1 = -abc.a + stay
    co2 = -known.need("s", k + 1) * stay
    a_b1 = _a(dist, beta + "1")
    if abs(co1 + co2 + a_b1) > CO_TOL:
        checks.fail(InconsistentInput(f"Co1+Co2 != -a({beta}1) for beta={beta}"))
    return CoPair(beta, co1, co2)


# ---------------------------------------------------------------------------
# identification
# ---------------------------------------------------------------------------


def _base_case(dist, state: ChainState, prior: PriorKnowledge, checks: Checks):
    a00, a01, a10 = (_a(dist, g) for g in ("00", "01", "10"))
    p1 = state.need("p", 1)
    s1 = 1.0 - a00 - a01
    if prior.kind == "r":
        r1 = state.need("r", 1)
        z = a10 * (1.0 - r1) / (a00 * (1.0 - p1) * s1 - a10 * (r1 - s1))
        state.q2[0] = checks.unit(1.0 - z, "q2_1")
    else:
        q12 = state.need("q2", 1)
        z = 1.0 - q12
        r1 = (a10 * (1.0 - z * s1) - a00 * (1.0 - p1) * s1 * z) / (a10 * q12)
        state.r[0] = checks.unit(r1, "r_1")
    state.q1[0] = checks.unit(s1 / state.r[0], "q1_1")
    state.s[0] = s1
    s2 = 1.0 - a10 / ((1.0 - p1) * s1 * z)
    if state.n > 2:
        state.s[1] = checks.unit(s2, "r_2 q1_2")
    elif abs(s2) > PRIOR_TOL:
        checks.fail(InconsistentPrior(f"two-node chain leaves residual {s2:.3g}"))


def _pick_betas(dist, state, length, checks):
    cache: dict[str, CoPair] = {}

    def co(beta):
        if beta not in cache:
            cache[beta] = co_coefficients(dist, state, beta, checks)
        return cache[beta]

    strings = ["".join(bits) for bits in itertools.product("01", repeat=length)]
    for i, b1 in enumerate(strings):
        for b2 in strings[i + 1 :]:
            m = np.array([[co(b1).co1, co(b1).co2], [co(b2).co1, co(b2).co2]])
            det = np.linalg.det(m)
            if abs(det) > DET_TOL * np.linalg.norm(m[0]) * np.linalg.norm(m[1]):
                return m, (b1, b2)
    raise SingularSystem(f"no pair of length-{length} prefixes gives an independent system")


def _step(dist, state: ChainState, prior: PriorKnowledge, t: int, checks: Checks):
    n = state.n
    m, (b1, b2) = _pick_betas(dist, state, t - 2, checks)
    rhs = np.array([_a(dist, b1 + "10"), _a(dist, b2 + "10")])
    sol = np.linalg.solve(m, rhs)
    if np.max(np.abs(m @ sol - rhs)) > CO_TOL:
        checks.fail(SingularSystem(f"linear solve residual too large at t={t}"))
    big_a, big_b = sol
    rho = big_b / big_a  # (q2 - 1) / (q2 r - 1)
    s_prev = state.need("s", t - 1)
    g = _a(dist, "0" * t) / _a(dist, "0" * (t - 1))

    if t < n:
        if prior.kind == "q2":
            y = state.need("q2", t - 1)
            x = 1.0 + (y - 1.0) / rho
        else:
            r = state.need("r", t - 1)
            y = (rho - 1.0) / (rho * r - 1.0)
            x = r * y
        keep = 1.0 - (x - y * s_prev) / (1.0 - s_prev)
        s_t = 1.0 - g / keep
        state.s[t - 1] = checks.unit(s_t, f"r_{t} q1_{t}")
    else:
        x = ((1.0 - g) * (1.0 - s_prev) + s_prev * (1.0 - rho)) / (1.0 - s_prev * rho)
        y = 1.0 + rho * (x - 1.0)
        s_t = 0.0
        if prior.kind == "q2":
            implied, given = y, state.q2[t - 2]
        else:
            implied, given = (x / y if y else float("nan")), state.r[t - 2]
        if given is not None and not abs(implied - given) <= PRIOR_TOL:
            checks.fail(
                InconsistentPrior(
                    f"prior {prior.kind}_{t - 1}={given:.10g} but the data imply {implied:.10g}"
                )
            )

    k_factor = big_a / (x - 1.0)
    state.p[t - 2] = checks.unit(1.0 - k_factor / (1.0 - s_t), f"p_{t - 1}")
    state.q2[t - 2] = checks.unit(y, f"q2_{t - 1}")
    state.r[t - 2] = checks.unit(x / y, f"r_{t - 1}")
    state.q1[t - 2] = checks.unit(s_prev / state.r[t - 2], f"q1_{t - 1}")


def identify_chain(
    dist: ObservedDistribution,
    n: int,
    prior: PriorKnowledge,
    strict: bool = False,
    verify: bool = True,
) -> ChainParams:
    """Recover a chain's parameters from its observed distribution.

    ``prior`` supplies ``p_1`` and either every ``q2`` or every ``r``. The
    base case solves the first link from ``a(00), a(01), a(10)``; each
    later step builds a 2x2 linear system from two prefixes, extracts
    ``r_{t-1}, q2_{t-1}, p_{t-1}, q1_{t-1}`` and the product
    ``r_t q1_t``. The last step needs no prior value; when one is present
    it is checked against the data.

    Exact inputs fail fast on any violated identity; sampled inputs record
    warnings instead unless ``strict`` is set.
    """
    if dist.n != n:
        raise ValueError(f"distribution covers {dist.n} nodes, expected {n}")
    if n < 2:
        raise OutOfRange("a chain needs at least two observed nodes")
    if len(prior.values) != n - 1:
        raise InconsistentPrior(f"prior {prior.kind} needs {n - 1} values")
    checks = Checks(strict or dist.is_exact)
    state = ChainState(n)
    state.p[0] = prior.p1
    if prior.kind == "q2":
        state.q2 = list(prior.values)
    else:
        state.r = list(prior.values)

    try:
        _base_case(dist, state, prior, checks)
        for t in range(3, n + 1):
            _step(dist, state, prior, t, checks)
    except ZeroDivisionError:
        raise SingularSystem("a prefix event the solver divides by has zero mass") from None
    except BoundaryParameter as exc:
        # exact data from a chain with parameters in (0, 1) cannot push an
        # extracted value out of range, so the prior is what disagrees
        if not dist.is_exact:
            raise
        raise InconsistentPrior(f"prior does not fit the data: {exc}") from exc

    params = ChainParams(n, state.p, state.r, state.q1, state.q2, checks.warnings)
    if verify and 2 * n - 1 <= DEFAULT_MAX_SIZE:
        gap = exact_joint(params.to_model()).max_gap(dist)
        if gap > RESIM_TOL:
            checks.fail(InconsistentPrior(f"recovered chain misses the data by {gap:.3g}"))
    return params
