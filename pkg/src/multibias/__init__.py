"""Multiclass word-embedding debiasing: subspace identification, hard and
soft debiasing, MAC bias evaluation, and cluster diagnostics."""

__version__ = "0.1.0"

from .debias import DebiasResult
from .diagnostics import (
    AnalogyCandidate,
    ClusterBiasReport,
    bias_direction,
    cluster_bias_report,
    generate_analogies,
    top_biased_words,
)
from .errors import DataError, UsageError
from .hard import equalize, hard_debias, neutralize
from .lexicon import Lexicon, ResolvedLexicon, parse_lexicon, resolve
from .metrics import MacReport, compare, cosine_distance, mac, s_value
from .soft import (
    ObjectiveBreakdown,
    SoftDebiasConfig,
    apply_transform,
    gradient,
    objective,
    optimize,
    soft_debias,
)
from .stats import TTestResult, paired_t_test, pearson_r, spearman_rho
from .store import EmbeddingStore, WordVector, load_text, nearest_neighbors, normalize_all, save_text
from .subspace import BiasSubspace, deviation_matrix, identify_bias_subspace, project

__all__ = [
    "AnalogyCandidate",
    "BiasSubspace",
    "ClusterBiasReport",
    "DataError",
    "DebiasResult",
    "EmbeddingStore",
    "Lexicon",
    "MacReport",
    "ObjectiveBreakdown",
    "ResolvedLexicon",
    "SoftDebiasConfig",
    "TTestResult",
    "UsageError",
    "WordVector",
    "apply_transform",
    "bias_direction",
    "cluster_bias_report",
    "compare",
    "cosine_distance",
    "deviation_matrix",
    "equalize",
    "generate_analogies",
    "gradient",
    "hard_debias",
    "identify_bias_subspace",
    "load_text",
    "mac",
    "nearest_neighbors",
    "neutralize",
    "normalize_all",
    "objective",
    "optimize",
    "paired_t_test",
    "parse_lexicon",
    "pearson_r",
    "project",
    "resolve",
    "s_value",
    "save_text",
    "soft_debias",
    "spearman_rho",
    "top_biased_words",
]
