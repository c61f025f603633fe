"""Parameter recovery for Markovian IC models (one private hidden parent each)."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import ObservedDistribution
from .errors import ClassMismatch, ZeroConditioningEvent
from .model import CausalICModel, ModelClass, classify

UNIDENTIFIABLE = "unidentifiable"

# q_i >= 1 - Q_ONE_EPS is treated as q_i = 1
Q_ONE_EPS = 1e-9
CLIP_WARN = 1e-7


def edge_key(source: str, target: str) -> str:
    return f"{source}->{target}"


def clip_unit(value: float, label: str, warnings: list[str]) -> float:
    """Clip into [0, 1], noting clips larger than ``CLIP_WARN``."""
    clipped = min(1.0, max(0.0, value))
    if abs(clipped - value) > CLIP_WARN:
        warnings.append(f"{label}={value:.6g} clipped to {clipped:g}")
    return clipped


@dataclass
class MarkovianParams:
    """Recovered parameters.

    ``q`` holds the effective activation ``r_i * q_i`` of each node's private
    hidden parent (the two are not separable, so ``r_i = 1`` is the usual
    convention). ``p`` maps ``(parent, child)`` to a probability or to
    :data:`UNIDENTIFIABLE`.
    """

    q: dict[str, float | str]
    p: dict[tuple[str, str], float | str]
    warnings: list[str] = field(default_factory=list)

    @property
    def unidentifiable(self) -> list[tuple[str, str]]:
        return [k for k, v in self.p.items() if v == UNIDENTIFIABLE]

    def to_json(self) -> dict:
        return {
            "q": {k: v for k, v in self.q.items() if v != UNIDENTIFIABLE},
            "p": {edge_key(*k): v for k, v in self.p.items() if v != UNIDENTIFIABLE},
            "unidentifiable": [k for k, v in self.q.items() if v == UNIDENTIFIABLE]
            + [edge_key(*k) for k in self.unidentifiable],
            "warnings": list(self.warnings),
        }


def identify_markovian(
    dist: ObservedDistribution, skeleton: CausalICModel, strict: bool = False
) -> MarkovianParams:
    """Recover every ``q_i`` and ``p_{j,i}`` from the observed distribution.

    For node ``V_i`` with observed parents ``pa``::

        1 - q_i             = P(V_i = 0 | pa = 0)
        (1-q_i)(1-p_{j,i})  = P(V_i = 0 | V_j = 1, pa \\ {V_j} = 0)

    Incoming ``p`` values of a node with ``q_i = 1`` carry no information and
    are reported as unidentifiable. A zero-probability conditioning event
    marks the affected parameters unidentifiable unless ``strict`` is set.
    """
    cls = classify(skeleton)
    if cls is not ModelClass.MARKOVIAN:
        raise ClassMismatch(f"skeleton is {cls.value}, not Markovian")

    warnings: list[str] = []
    q: dict[str, float] = {}
    p: dict[tuple[str, str], float | str] = {}
    failures = []

    for node in skeleton.observed:
        parents = skeleton.observed_parents(node)
        zeros = {v: 0 for v in parents}
        try:
            stay = dist.conditional({node: 0}, zeros)
        except ZeroConditioningEvent as exc:
            if strict:
                raise
            failures.append(exc)
            q[node] = UNIDENTIFIABLE
            for j in parents:
                p[(j, node)] = UNIDENTIFIABLE
            warnings.append(f"q[{node}] unidentifiable: {exc}")
            continue
        q[node] = clip_unit(1.0 - stay, f"q[{node}]", warnings)

        for j in parents:
            if q[node] >= 1.0 - Q_ONE_EPS:
                p[(j, node)] = UNIDENTIFIABLE
                continue
            given = dict(zeros)
            given[j] = 1
            try:
                both = dist.conditional({node: 0}, given)
            except ZeroConditioningEvent as exc:
                if strict:
                    raise
                failures.append(exc)
                p[(j, node)] = UNIDENTIFIABLE
                warnings.append(f"p[{edge_key(j, node)}] unidentifiable: {exc}")
                continue
            p[(j, node)] = clip_unit(1.0 - both / (1.0 - q[node]), f"p[{edge_key(j, node)}]", warnings)

    recovered = sum(v != UNIDENTIFIABLE for v in (*q.values(), *p.values()))
    if failures and recovered == 0:
        raise failures[0]
    return MarkovianParams(q, p, warnings)
