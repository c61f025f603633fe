"""Uniform entry point over the class-specific solvers.

Parameters are flattened into ``{name: value}`` dictionaries such as
``{"r": 0.6, "q[V1]": 0.3, "p[V1->V2]": 0.5}`` so results from different
classes can be compared against a known model the same way.
"""

from __future__ import annotations

import math

from .chain import ChainParams, PriorKnowledge, identify_chain
from .engine import ObservedDistribution
from .errors import ClassMismatch
from .global_hidden import UNRESOLVED, GlobalParams, MixedParams, identify_global, identify_mixed
from .markovian import UNIDENTIFIABLE, MarkovianParams, identify_markovian
from .model import CausalICModel, ModelClass, classify, global_hidden_node

CLASS_NAMES = {
    "markovian": ModelClass.MARKOVIAN,
    "chain": ModelClass.SEMI_MARKOVIAN_CHAIN,
    "global": ModelClass.GLOBAL_HIDDEN,
    "mixed": ModelClass.MIXED_GLOBAL_MARKOVIAN,
}


def resolve_class(skeleton: CausalICModel, name: str = "auto") -> ModelClass:
    if name == "auto":
        cls = classify(skeleton)
        if cls is ModelClass.GENERAL:
            raise ClassMismatch("model is General; no identification procedure applies")
        return cls
    try:
        return CLASS_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown class {name!r}") from None


def identify(
    dist: ObservedDistribution,
    skeleton: CausalICModel,
    model_class: str = "auto",
    prior: PriorKnowledge | None = None,
    strict: bool = False,
):
    """Run the solver matching ``model_class`` (or the skeleton's own class)."""
    cls = resolve_class(skeleton, model_class)
    if cls is ModelClass.MARKOVIAN:
        return identify_markovian(dist, skeleton, strict=strict)
    if cls is ModelClass.SEMI_MARKOVIAN_CHAIN:
        if classify(skeleton) is not cls:
            raise ClassMismatch("skeleton is not a chain")
        if prior is None:
            prior = PriorKnowledge.from_params(ChainParams.from_model(skeleton), "q2")
        return identify_chain(dist.reorder(skeleton.observed), skeleton.n, prior, strict=strict)
    if cls is ModelClass.GLOBAL_HIDDEN:
        return identify_global(dist, skeleton, strict=strict)
    if cls is ModelClass.MIXED_GLOBAL_MARKOVIAN:
        return identify_mixed(dist, skeleton, strict=strict)
    raise ClassMismatch(f"no solver for class {cls.value}")


def _edge(s, t):
    return f"p[{s}->{t}]"


def true_parameters(model: CausalICModel, model_class: str = "auto") -> dict[str, float]:
    """Flattened parameters of a known model, in the solver's conventions."""
    cls = resolve_class(model, model_class)
    out: dict[str, float] = {}
    if cls is ModelClass.MARKOVIAN:
        for v in model.observed:
            hid = model.hidden_parents(v)
            out[f"q[{v}]"] = model.r(hid[0]) * model.q(hid[0], v) if hid else 0.0
    elif cls is ModelClass.SEMI_MARKOVIAN_CHAIN:
        params = ChainParams.from_model(model)
        for name in ("p", "r", "q1", "q2"):
            for i, x in enumerate(getattr(params, name)):
                out[f"{name}[{i + 1}]"] = x
        return out
    elif cls is ModelClass.GLOBAL_HIDDEN:
        g = global_hidden_node(model)
        out["r"] = model.r(g)
        for v in model.observed:
            out[f"q[{v}]"] = model.q(g, v)
    else:
        g = global_hidden_node(model)
        out["r0"] = model.r(g)
        for v in model.observed:
            out[f"q0[{v}]"] = model.q(g, v)
        for v in model.observed:
            private = [h for h in model.hidden_parents(v) if h != g]
            out[f"q[{v}]"] = model.r(private[0]) * model.q(private[0], v)
    for e in model.vv_edges:
        out[_edge(e.source, e.target)] = e.p
    return out


def _usable(x) -> bool:
    return x not in (UNIDENTIFIABLE, UNRESOLVED, None)


def estimated_parameters(result) -> dict[str, float]:
    """Flattened solver output; unidentifiable or unresolved entries are left out."""
    out: dict[str, float] = {}
    if isinstance(result, MarkovianParams):
        out.update({f"q[{v}]": x for v, x in result.q.items() if _usable(x)})
    elif isinstance(result, ChainParams):
        for name in ("p", "r", "q1", "q2"):
            for i, x in enumerate(getattr(result, name)):
                out[f"{name}[{i + 1}]"] = x
        return out
    elif isinstance(result, GlobalParams):
        out["r"] = result.r
        out.update({f"q[{v}]": x for v, x in zip(result.nodes, result.q)})
    elif isinstance(result, MixedParams):
        if _usable(result.r0):
            out["r0"] = result.r0
        out.update({f"q0[{v}]": x for v, x in zip(result.nodes, result.q0) if _usable(x)})
        out.update({f"q[{v}]": x for v, x in zip(result.nodes, result.q) if _usable(x)})
    else:
        raise TypeError(f"unsupported result type {type(result).__name__}")
    out.update({_edge(*k): x for k, x in result.p.items() if _usable(x)})
    return out


def recovery_error(truth: dict[str, float], estimate: dict[str, float]) -> tuple[float, float]:
    """L-infinity and L2 distance over the parameters present in ``estimate``."""
    diffs = [abs(estimate[k] - truth[k]) for k in estimate]
    if not diffs:
        return 0.0, 0.0
    return max(diffs), math.sqrt(sum(d * d for d in diffs))
