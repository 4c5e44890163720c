"""Command-line frontend: counting, width analysis, instance generation.

One command is one batch process. The report is a single JSON document on
standard output; logs go to standard error. Exit codes: 0 success, 2 parse
error, 3 validation error, 4 budget or limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import automata, reduction, widths
from .errors import (
    BudgetExceededError,
    DatabaseParseError,
    DatabaseValidationError,
    DecompositionError,
    LimitExceededError,
    PairValidationError,
    QueryParseError,
    QueryValidationError,
    UncoverableVertexError,
    UnsupportedQueryError,
)
from .homsolver import count_answers_bruteforce
from .qmodel import (
    Query,
    build_hypergraph,
    dump_database,
    dump_query,
    gen_hampath,
    gen_li_hom,
    gen_random,
    load_database,
    load_graph,
    load_query,
    normalize_equalities,
    validate_pair,
)

log = logging.getLogger("cqcount")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_BUDGET = 4

LIMITS_ENV_VAR = "CQCOUNT_LIMITS"

# Documented defaults for every budget knob; override via --limit key=value
# (repeatable) or a JSON file named by the CQCOUNT_LIMITS environment variable.
DEFAULT_LIMITS: dict[str, int | None] = {
    "enum_budget": 10_000_000,
    "probe_budget": 20_000,
    "oracle_cap": 50_000,
    "state_limit": 14,
    "node_limit": 10_000,
    "frontier_limit": 2_000_000,
    "tw_vertex_limit": 16,
    "fhw_vertex_limit": 8,
    "fhw_limit": None,
}

REPORT_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cqcount count report",
    "type": "object",
    "properties": {
        "method": {"enum": ["exact", "fptras", "fhw"]},
        "query": {"type": "string"},
        "count": {"type": "integer", "minimum": 0},
        "estimate": {"type": "integer", "minimum": 0},
        "epsilon": {"type": ["number", "null"]},
        "delta": {"type": ["number", "null"]},
        "seed": {"type": ["integer", "null"]},
        "hom_backend": {"enum": ["bruteforce", "td-dp", None]},
        "oracle_stats": {"type": ["object", "null"]},
        "widths": {"type": ["object", "null"]},
        "duration_seconds": {"type": "number", "minimum": 0},
    },
    "required": ["method", "query", "duration_seconds"],
    "oneOf": [
        {"required": ["count"], "not": {"required": ["estimate"]}},
        {"required": ["estimate", "epsilon", "delta", "seed"]},
    ],
}


@dataclass
class RunConfig:
    """Resolved configuration of one counting run."""

    method: str
    epsilon: float | None = None
    delta: float | None = None
    seed: int | None = None
    hom_backend: str = "bruteforce"
    limits: dict = field(default_factory=dict)

    def limit(self, key: str):
        if key in self.limits:
            return self.limits[key]
        return DEFAULT_LIMITS[key]


def _load_limits(pairs: list[str] | None) -> dict:
    limits: dict = {}
    env_path = os.environ.get(LIMITS_ENV_VAR)
    if env_path:
        try:
            limits.update(json.loads(Path(env_path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatabaseParseError(f"cannot read limits file {env_path}: {exc}") from exc
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise QueryValidationError(f"--limit expects key=value, got {pair!r}")
        if key not in DEFAULT_LIMITS:
            raise QueryValidationError(
                f"unknown limit {key!r}; known: {', '.join(sorted(DEFAULT_LIMITS))}"
            )
        limits[key] = None if value.lower() in ("none", "null") else int(value)
    for key in limits:
        if key not in DEFAULT_LIMITS:
            raise QueryValidationError(f"unknown limit {key!r} in limits file")
    return limits


def _emit(doc: dict, out_format: str) -> None:
    if out_format != "json":
        raise QueryValidationError(f"unknown output format {out_format!r}")
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


# ---------------------------------------------------------------------------
# count
# ---------------------------------------------------------------------------

def cmd_count(query_path: str, db_path: str, cfg: RunConfig) -> dict:
    """Count or estimate the answers; returns the report document."""
    start = time.monotonic()
    q = load_query(query_path)
    d = load_database(db_path)
    q, _ = normalize_equalities(q)
    validate_pair(q, d)
    report: dict = {"method": cfg.method, "query": q.name}

    if cfg.method == "exact":
        report["count"] = count_answers_bruteforce(
            q, d, budget=cfg.limit("enum_budget")
        )
    elif cfg.method == "fptras":
        if cfg.epsilon is None or cfg.delta is None or cfg.seed is None:
            raise QueryValidationError(
                "method fptras needs --epsilon, --delta and --seed"
            )
        if not (0 < cfg.epsilon < 1) or not (0 < cfg.delta < 1):
            raise QueryValidationError("epsilon and delta must lie in (0, 1)")
        stats = reduction.OracleStats()
        estimate = reduction.approx_count_answers(
            q,
            d,
            cfg.epsilon,
            cfg.delta,
            cfg.seed,
            backend=cfg.hom_backend,
            stats=stats,
            probe_budget=cfg.limit("probe_budget"),
            initial_cap=cfg.limit("oracle_cap"),
        )
        report.update(
            estimate=estimate,
            epsilon=cfg.epsilon,
            delta=cfg.delta,
            seed=cfg.seed,
            hom_backend=cfg.hom_backend,
            oracle_stats=stats.as_dict(),
        )
    elif cfg.method == "fhw":
        fhw_limit = cfg.limit("fhw_limit")
        h = build_hypergraph(q)
        report["count"] = automata.count_answers_fhw_pipeline(
            q,
            d,
            fhw_limit=Fraction(fhw_limit) if fhw_limit is not None else None,
            state_limit=cfg.limit("state_limit"),
            exact_width_vertex_limit=cfg.limit("fhw_vertex_limit"),
            node_limit=cfg.limit("node_limit"),
            frontier_limit=cfg.limit("frontier_limit"),
        )
        if len(h.vertices) <= cfg.limit("fhw_vertex_limit"):
            width, _ = widths.fhw_exact_small(h, cfg.limit("fhw_vertex_limit"))
            report["widths"] = {"fhw": _frac_str(width), "exact": True}
        else:
            w, td = widths.treewidth_heuristic(h)
            report["widths"] = {
                "fhw": _frac_str(widths.fhw_of_td(h, td)),
                "exact": False,
            }
    else:
        raise QueryValidationError(f"unknown method {cfg.method!r}")

    report["duration_seconds"] = time.monotonic() - start
    return report


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

ALL_MEASURES = ("tw", "fhw", "rho")


def cmd_analyze(query_path: str, measures: list[str], limits: dict) -> dict:
    """Width measures of the query hypergraph, with witness decompositions."""
    start = time.monotonic()
    q = load_query(query_path)
    q, _ = normalize_equalities(q)
    h = build_hypergraph(q)

    def get(key):
        return limits[key] if key in limits else DEFAULT_LIMITS[key]

    out: dict = {"query": q.name, "measures": {}}
    for measure in measures:
        entry: dict = {}
        try:
            if measure == "tw":
                if len(h.vertices) <= get("tw_vertex_limit"):
                    value, td = widths.treewidth_exact(h, get("tw_vertex_limit"))
                    entry = {
                        "value": value,
                        "exact": True,
                        "decomposition": td.to_doc(),
                    }
                else:
                    value, td = widths.treewidth_heuristic(h)
                    entry = {
                        "value": value,
                        "exact": False,
                        "decomposition": td.to_doc(),
                    }
            elif measure == "fhw":
                if len(h.vertices) <= get("fhw_vertex_limit"):
                    value, td = widths.fhw_exact_small(h, get("fhw_vertex_limit"))
                    entry = {
                        "value": _frac_str(value),
                        "exact": True,
                        "decomposition": td.to_doc(),
                    }
                else:
                    _, td = widths.treewidth_heuristic(h)
                    entry = {
                        "value": _frac_str(widths.fhw_of_td(h, td)),
                        "exact": False,
                        "decomposition": td.to_doc(),
                    }
            elif measure == "rho":
                value, weights = widths.fractional_edge_cover_number(h)
                entry = {
                    "value": _frac_str(value),
                    "weights": {
                        "/".join(str(v) for v in sorted(e, key=repr)): _frac_str(w)
                        for e, w in weights.items()
                    },
                }
            else:
                raise QueryValidationError(
                    f"unknown measure {measure!r}; known: {', '.join(ALL_MEASURES)}"
                )
        except LimitExceededError as exc:
            entry = {"error": "limit-exceeded", "detail": str(exc)}
        except UncoverableVertexError as exc:
            entry = {"error": "uncoverable-vertex", "detail": str(exc)}
        out["measures"][measure] = entry
    out["duration_seconds"] = time.monotonic() - start
    return out


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(kind: str, args: argparse.Namespace, out_dir: str) -> dict:
    """Write a query/database pair into out_dir; returns the file paths."""
    if kind == "hampath":
        edges = load_graph(args.graph)
        q, d = gen_hampath(edges, args.n)
    elif kind == "lihom":
        q, d = gen_li_hom(load_graph(args.pattern), load_graph(args.target))
    elif kind == "random":
        q, d = gen_random(
            args.vars, args.atoms, args.domain, args.p_neg, args.p_diseq, args.seed
        )
    else:  # pragma: no cover - argparse restricts choices
        raise QueryValidationError(f"unknown generator {kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    query_path = out / f"{kind}_query.txt"
    db_path = out / f"{kind}_db.json"
    dump_query(q, query_path)
    dump_database(d, db_path)
    log.info("wrote %s and %s", query_path, db_path)
    return {"query": str(query_path), "db": str(db_path)}


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqcount",
        description="Count answers of conjunctive queries with disequalities "
        "and negation, exactly or approximately.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_count = sub.add_parser("count", help="count or estimate answers")
    p_count.add_argument("--query", required=True, help="query file")
    p_count.add_argument("--db", required=True, help="database JSON file")
    p_count.add_argument(
        "--method", required=True, choices=["exact", "fptras", "fhw"]
    )
    p_count.add_argument("--epsilon", type=float, help="relative error (fptras)")
    p_count.add_argument("--delta", type=float, help="failure probability (fptras)")
    p_count.add_argument("--seed", type=int, help="random seed (fptras)")
    p_count.add_argument(
        "--hom-backend", choices=list(reduction.HOM_BACKENDS), default="bruteforce"
    )
    p_count.add_argument("--out", default="json", help="output format (json)")
    p_count.add_argument(
        "--limit",
        action="append",
        metavar="KEY=VALUE",
        help=f"override a budget (known: {', '.join(sorted(DEFAULT_LIMITS))})",
    )

    p_an = sub.add_parser("analyze", help="width measures of the query hypergraph")
    p_an.add_argument("--query", required=True)
    p_an.add_argument(
        "--measures",
        default=",".join(ALL_MEASURES),
        help="comma-separated subset of tw,fhw,rho (default: all)",
    )
    p_an.add_argument("--out", default="json")
    p_an.add_argument("--limit", action="append", metavar="KEY=VALUE")

    p_gen = sub.add_parser("gen", help="generate instance files")
    gsub = p_gen.add_subparsers(dest="kind", required=True)
    g_ham = gsub.add_parser("hampath")
    g_ham.add_argument("--n", type=int, required=True, help="path length (variables)")
    g_ham.add_argument("--graph", required=True, help="edge list file")
    g_ham.add_argument("--out-dir", required=True)
    g_li = gsub.add_parser("lihom")
    g_li.add_argument("--pattern", required=True, help="pattern edge list file")
    g_li.add_argument("--target", required=True, help="target edge list file")
    g_li.add_argument("--out-dir", required=True)
    g_rand = gsub.add_parser("random")
    g_rand.add_argument("--vars", type=int, required=True)
    g_rand.add_argument("--atoms", type=int, required=True)
    g_rand.add_argument("--domain", type=int, required=True)
    g_rand.add_argument("--p-neg", type=float, default=0.0)
    g_rand.add_argument("--p-diseq", type=float, default=0.0)
    g_rand.add_argument("--seed", type=int, required=True)
    g_rand.add_argument("--out-dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "count":
            cfg = RunConfig(
                method=args.method,
                epsilon=args.epsilon,
                delta=args.delta,
                seed=args.seed,
                hom_backend=args.hom_backend,
                limits=_load_limits(args.limit),
            )
            _emit(cmd_count(args.query, args.db, cfg), args.out)
        elif args.command == "analyze":
            measures = [m for m in args.measures.split(",") if m]
            _emit(
                cmd_analyze(args.query, measures, _load_limits(args.limit)),
                args.out,
            )
        elif args.command == "gen":
            _emit(cmd_gen(args.kind, args, args.out_dir), "json")
    except (QueryParseError, DatabaseParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (
        QueryValidationError,
        DatabaseValidationError,
        PairValidationError,
        UnsupportedQueryError,
        DecompositionError,
        UncoverableVertexError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BudgetExceededError, LimitExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
