"""Command-line front end: ``causal-ic <subcommand> ...``.

Exit codes: 0 success, 1 domain error (JSON body on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import generators
from .chain import ChainParams, PriorKnowledge, verify_witness, witness_pair
from .engine import ObservedDistribution, empirical_distribution, exact_joint, live_edge_exact
from .errors import ICError, ModelError, ModelSyntaxError
from .global_hidden import GlobalParams, MixedParams
from .markovian import MarkovianParams
from .model import ModelClass, classify, load_model, model_from_dict, validate
from .solvers import estimated_parameters, identify, recovery_error, true_parameters
from .unroll import check_unroll_equivalence, unroll


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written to 17 significant digits."""

    def enc(x, depth):
        pad = "" if indent is None else "\n" + " " * (indent * (depth + 1))
        end = "" if indent is None else "\n" + " " * (indent * depth)
        sep = ", " if indent is None else ","
        if isinstance(x, bool) or x is None or isinstance(x, str):
            return json.dumps(x)
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            return format(x, ".17g") if math.isfinite(x) else json.dumps(str(x))
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, depth + 1)}" for k, v in x.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(x, (list, tuple)):
            if not x:
                return "[]"
            return "[" + sep.join(f"{pad}{enc(v, depth + 1)}" for v in x) + end + "]"
        raise TypeError(f"cannot serialise {type(x).__name__}")

    return enc(obj, 0)


DEFAULT_SAMPLES = 100000


class UsageError(Exception):
    pass


def _parse_seeds(text):
    return tuple(s for s in (text or "").split(",") if s)


def _distribution(args, model) -> ObservedDistribution:
    mode = args.dist
    if mode == "exact":
        return exact_joint(model)
    if mode == "live-edge":
        return live_edge_exact(model)
    if mode == "sample":
        return empirical_distribution(model, args.samples or DEFAULT_SAMPLES, args.seed)
    text = Path(mode).read_text(encoding="utf-8")
    return ObservedDistribution.from_csv(text, model.observed, "empirical", args.samples)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args, out):
    text = Path(args.model).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    model = model_from_dict(doc)
    report = validate(model)
    body = {
        "ok": report.ok,
        "class": classify(model).value if report.ok else None,
        "violations": [v._asdict() for v in report.violations],
    }
    out.write(dumps(body) + "\n")
    if not report.ok:
        raise ModelError(f"{len(report.violations)} rule violation(s)", report.violations)
    return 0


def cmd_dist(args, out):
    model = load_model(args.model)
    seeds = _parse_seeds(args.seeds)
    if args.mode == "exact":
        if seeds:
            raise UsageError("--seeds needs --mode live-edge or sample")
        dist = exact_joint(model)
    elif args.mode == "live-edge":
        dist = live_edge_exact(model, seeds)
    else:
        dist = empirical_distribution(model, args.samples, args.seed, seeds)
    out.write(dist.to_csv())
    return 0


def cmd_identify(args, out):
    model = load_model(args.model)
    dist = _distribution(args, model)
    prior = None
    if args.known:
        prior = PriorKnowledge.from_json(json.loads(Path(args.known).read_text(encoding="utf-8")))
    result = identify(dist, model, args.model_class, prior, args.strict)
    body = {"class": _class_of(result), **result.to_json()}
    out.write(dumps(body) + "\n")
    return 0


def _class_of(result) -> str:
    return {
        MarkovianParams: ModelClass.MARKOVIAN,
        ChainParams: ModelClass.SEMI_MARKOVIAN_CHAIN,
        GlobalParams: ModelClass.GLOBAL_HIDDEN,
        MixedParams: ModelClass.MIXED_GLOBAL_MARKOVIAN,
    }[type(result)].value


def cmd_witness(args, out):
    pair = witness_pair(args.r2)
    body = {"r2": pair.r2, "base": pair.base, "alt": pair.alt, "param_gap": pair.param_gap()}
    code = 0
    if args.verify:
        check = verify_witness(pair, args.tol)
        body.update(verified=check.ok, max_gap=check.max_gap)
        code = 0 if check.ok else 1
    out.write(dumps(body) + "\n")
    return code


def cmd_unroll(args, out):
    model = load_model(args.model)
    bn = unroll(model, args.horizon)
    if args.check:
        gap = check_unroll_equivalence(model, _parse_seeds(args.seeds), args.horizon)
        out.write(dumps({"horizon": bn.horizon, "max_gap": gap}) + "\n")
    else:
        out.write(dumps(bn.to_json()) + "\n")
    return 0


# ---------------------------------------------------------------------------
# round-trip benchmark
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ["instance", "class", "n", "mode", "linf_error", "l2_error", "status", "ms_total"]


@dataclass(frozen=True)
class BenchConfig:
    model_class: str
    n_range: tuple[int, int]
    param_range: tuple[float, float]
    instances: int
    mode: str = "exact"
    num_samples: int | None = None
    rng_seed: int = 0
    output: str | None = None
    prior: str = "q2"

    @classmethod
    def from_json(cls, doc: dict) -> BenchConfig:
        n = doc.get("n", [3, 6])
        n_range = (int(n), int(n)) if isinstance(n, (int, float)) else (int(n[0]), int(n[1]))
        cfg = cls(
            model_class=doc["model_class"],
            n_range=n_range,
            param_range=tuple(float(x) for x in doc.get("param_range", [0.1, 0.9])),
            instances=int(doc.get("instances", 10)),
            mode=doc.get("mode", "exact"),
            num_samples=doc.get("num_samples"),
            rng_seed=int(doc.get("rng_seed", 0)),
            output=doc.get("output"),
            prior=doc.get("prior", "q2"),
        )
        cfg.check()
        return cfg

    def check(self):
        lo, hi = self.n_range
        if lo > hi or lo < 2:
            raise ValueError("n range must be nonempty and start at 2 or more")
        if not 0.0 <= self.param_range[0] <= self.param_range[1] <= 1.0:
            raise ValueError("parameter range must be a nonempty sub-interval of [0, 1]")
        if self.mode not in ("exact", "sampled"):
            raise ValueError("mode must be 'exact' or 'sampled'")
        if self.mode == "sampled" and (self.num_samples is None or self.num_samples < 1):
            raise ValueError("sampled mode needs num_samples >= 1")
        if self.model_class not in ("markovian", "chain", "global", "mixed"):
            raise ValueError(f"unknown model class {self.model_class!r}")
        if self.instances < 0:
            raise ValueError("instance count must be non-negative")


def _bench_instance(cfg: BenchConfig, idx: int):
    rng = np.random.default_rng([cfg.rng_seed, idx])
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    lo, hi = cfg.param_range
    if cfg.model_class == "markovian":
        model = generators.random_markovian(rng, n, 3, lo, hi)
    elif cfg.model_class == "chain":
        model = generators.random_chain(rng, n, lo, hi)
    elif cfg.model_class == "global":
        model = generators.random_global(rng, max(n, 3), None, lo, hi)
    else:
        model = generators.random_mixed(rng, max(n, 3), True, lo, hi)
    return model, int(rng.integers(2**63))


def roundtrip_benchmark(cfg: BenchConfig) -> list[dict]:
    """Generate, observe and re-identify ``cfg.instances`` random models.

    Failures are recorded per row with the error kind as status; the batch
    never aborts. All columns except ``ms_total`` depend only on the config.
    """
    rows = []
    for idx in range(cfg.instances):
        start = time.perf_counter()
        model, sample_seed = _bench_instance(cfg, idx)
        row = {"instance": idx, "class": cfg.model_class, "n": model.n, "mode": cfg.mode}
        try:
            if cfg.mode == "exact":
                dist = exact_joint(model)
            else:
                dist = empirical_distribution(model, cfg.num_samples, sample_seed)
            prior = None
            if cfg.model_class == "chain":
                prior = PriorKnowledge.from_params(ChainParams.from_model(model), cfg.prior)
            result = identify(dist, model, cfg.model_class, prior)
            linf, l2 = recovery_error(true_parameters(model), estimated_parameters(result))
            row.update(linf_error=linf, l2_error=l2, status="ok")
        except ICError as exc:
            row.update(linf_error=float("nan"), l2_error=float("nan"), status=exc.kind)
        except (ArithmeticError, ValueError) as exc:
            row.update(linf_error=float("nan"), l2_error=float("nan"), status=type(exc).__name__)
        row["ms_total"] = 1000.0 * (time.perf_counter() - start)
        rows.append(row)
    return rows


def write_report(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row["instance"], row["class"], row["n"], row["mode"],
                format(row["linf_error"], ".17g"), format(row["l2_error"], ".17g"),
                row["status"], format(row["ms_total"], ".3f"),
            ]
        )


def cmd_bench(args, out):
    cfg = BenchConfig.from_json(json.loads(Path(args.config).read_text(encoding="utf-8")))
    rows = roundtrip_benchmark(cfg)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            write_report(rows, fh)
    else:
        write_report(rows, out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causal-ic", description="Causal IC models with hidden confounders.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dist", help="print an observed distribution as CSV")
    p.add_argument("model")
    p.add_argument("--mode", choices=("exact", "live-edge", "sample"), default="exact")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma-separated observed seed nodes")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("identify", help="recover parameters from a distribution")
    p.add_argument("model", help="model file; its parameters are only used as a skeleton")
    p.add_argument(
        "--class", dest="model_class", default="auto",
        choices=("auto", "markovian", "chain", "global", "mixed"),
    )
    p.add_argument("--dist", default="exact", help="exact, live-edge, sample, or a CSV path")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--known", help="prior-knowledge JSON for chains")
    p.add_argument("--strict", action="store_true", help="identity violations are errors")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("witness", help="two chains with equal observations")
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("unroll", help="time-unrolled three-state network")
    p.add_argument("model")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--check", action="store_true", help="compare with live-edge enumeration")
    p.add_argument("--seeds", help="comma-separated observed seed nodes")
    p.set_defaults(func=cmd_unroll)

    p = sub.add_parser("bench", help="round-trip benchmark from a JSON config")
    p.add_argument("config")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return 2
    except ICError as exc:
        err.write(dumps(exc.to_json(), indent=None) + "\n")
        return 1
    except (OSError, ValueError, KeyError, ArithmeticError) as exc:
        body = {"error": type(exc).__name__, "message": str(exc)}
        err.write(dumps(body, indent=None) + "\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
