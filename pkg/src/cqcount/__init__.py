"""Counting answers to conjunctive queries with disequalities and negation.

The package provides exact counting by enumeration, a randomized
approximation scheme built on colour-coding and a homomorphism oracle, and an
exact pipeline via tree decompositions and tree automata for queries of small
fractional hypertree width.
"""

from .automata import (
    LabeledTree,
    TreeAutomaton,
    accepts,
    build_automaton,
    count_answers_fhw_pipeline,
    count_slice_exact,
)
from .errors import (
    BudgetExceededError,
    ContradictionError,
    CqcountError,
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
from .homsolver import (
    Structure,
    build_A,
    build_B,
    count_answers_bruteforce,
    enumerate_answers_bruteforce,
    hom_exists_bruteforce,
    hom_exists_td,
    sol_bag,
    structure_size,
)
from .qmodel import (
    Database,
    Query,
    RelationSymbol,
    build_hypergraph,
    database_size,
    dump_database,
    dump_query,
    format_query,
    gen_hampath,
    gen_li_hom,
    gen_random,
    load_database,
    load_graph,
    load_query,
    normalize_equalities,
    parse_query,
    query_size,
    validate_pair,
)
from .reduction import (
    ImplicitAnswerHypergraph,
    OracleStats,
    approx_count_answers,
    build_hat_A,
    build_hat_B,
    count_edges_exact_oracle,
    derive_rng,
    edgefree_bruteforce,
    edgefree_general,
    edgefree_restricted,
    estimate_edges,
    repetitions,
)
from .widths import (
    Hypergraph,
    TreeDecomposition,
    fhw_exact_small,
    fhw_of_td,
    fractional_edge_cover_number,
    fractional_independent_set_number,
    is_valid_td,
    make_nice,
    mu_width,
    td_width,
    treewidth_exact,
    treewidth_heuristic,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "ContradictionError",
    "CqcountError",
    "Database",
    "DatabaseParseError",
    "DatabaseValidationError",
    "DecompositionError",
    "Hypergraph",
    "ImplicitAnswerHypergraph",
    "LabeledTree",
    "LimitExceededError",
    "OracleStats",
    "PairValidationError",
    "Query",
    "QueryParseError",
    "QueryValidationError",
    "RelationSymbol",
    "Structure",
    "TreeAutomaton",
    "TreeDecomposition",
    "UncoverableVertexError",
    "UnsupportedQueryError",
    "accepts",
    "approx_count_answers",
    "build_A",
    "build_B",
    "build_automaton",
    "build_hat_A",
    "build_hat_B",
    "build_hypergraph",
    "count_answers_bruteforce",
    "count_answers_fhw_pipeline",
    "count_edges_exact_oracle",
    "count_slice_exact",
    "database_size",
    "derive_rng",
    "dump_database",
    "dump_query",
    "edgefree_bruteforce",
    "edgefree_general",
    "edgefree_restricted",
    "enumerate_answers_bruteforce",
    "estimate_edges",
    "fhw_exact_small",
    "fhw_of_td",
    "format_query",
    "fractional_edge_cover_number",
    "fractional_independent_set_number",
    "gen_hampath",
    "gen_li_hom",
    "gen_random",
    "hom_exists_bruteforce",
    "hom_exists_td",
    "is_valid_td",
    "load_database",
    "load_graph",
    "load_query",
    "make_nice",
    "mu_width",
    "normalize_equalities",
    "parse_query",
    "query_size",
    "repetitions",
    "sol_bag",
    "structure_size",
    "td_width",
    "treewidth_exact",
    "treewidth_heuristic",
    "validate_pair",
    "__version__",
]
