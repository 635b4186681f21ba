"""Semantic distance metrics for text-conditioned generation (C++ core)."""

from ._semdist import (
    Dataset,
    Error,
    Lexicon,
    MetricConfig,
    conditional_covariance,
    dsv_term,
    evaluate,
    hard_negative,
    load_lexicon,
    matrix_sqrt_psd,
    mix_seed,
    normalize_rows,
    project,
    project_onto_constraints,
    r_precision,
    read_emb,
    replacement_count,
    ss_term,
    stability_sweep,
    tokenize,
    trsv_term,
    write_emb,
)

# Error.args is (kind, message); kind matches the CLI's error JSON.
Error.kind = property(lambda self: self.args[0])

__all__ = [
    "Dataset",
    "Error",
    "Lexicon",
    "MetricConfig",
    "conditional_covariance",
    "dsv_term",
    "evaluate",
    "hard_negative",
    "load_lexicon",
    "matrix_sqrt_psd",
    "mix_seed",
    "normalize_rows",
    "project",
    "project_onto_constraints",
    "r_precision",
    "read_emb",
    "replacement_count",
    "ss_term",
    "stability_sweep",
    "tokenize",
    "trsv_term",
    "write_emb",
]
