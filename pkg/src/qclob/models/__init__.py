from .distance import ECDF, EmptySampleError, cvm_distance, ks_distance
from .fit import FitError, FitResult, fit_gent, qq_table
from .gent import DomainError, GenTParams, gent_cdf, gent_pdf, gent_ppf, gent_sample
from .semiparam import (
    CollapseError,
    CollapseReport,
    PairRatio,
    SemiParamModel,
    TrimError,
    apply_semiparam,
    build_semiparam,
    collapse_ratio,
    rescaled_rest_ecdf,
    trimmed_moments,
)

__all__ = [
    "ECDF", "EmptySampleError", "cvm_distance", "ks_distance",
    "FitError", "FitResult", "fit_gent", "qq_table",
    "DomainError", "GenTParams", "gent_cdf", "gent_pdf", "gent_ppf", "gent_sample",
    "CollapseError", "CollapseReport", "PairRatio", "SemiParamModel", "TrimError",
    "apply_semiparam", "build_semiparam", "collapse_ratio", "rescaled_rest_ecdf",
    "trimmed_moments",
]
