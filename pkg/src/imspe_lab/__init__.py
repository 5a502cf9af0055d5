"""Closed-form, arbitrary-precision IMSPE for Gaussian-process designs on
[-1, 1]^D, coordinate-descent search for optimal designs, and the twin-point
experiments built on them."""

__version__ = "0.1.0"

from .errors import (DegenerateDesignError, DesignParseError, DomainError, IllConditionedError,
                     ImspeLabError, SingularMatrixError, UnsupportedDesignError)
from .highprec import DEFAULT_CONTEXT, BigReal, PrecisionContext
from .imspe import ImspeResult, IncrementalEvaluator, imspe, imspe_gap
from .kernel import CovarianceParams, Design, TwinSpec, build_L, build_matrices, build_R, I1, I2, S_l
from .search import (SearchConfig, SearchResult, canonicalize, ccd_minimize, multistart,
                     random_baseline, random_design)
from .studies import (PhaseLabel, PhaseRecord, ProfilePoint, classify, hue_grid, phase_sweep,
                      tornado_data, twin_profile)

__all__ = [
    "imspe",
    "DegenerateDesignError",
    "DesignParseError",
    "DomainError",
    "IllConditionedError",
    "ImspeLabError",
    "SingularMatrixError",
    "UnsupportedDesignError",
    "DEFAULT_CONTEXT",
    "BigReal",
    "PrecisionContext",
    "ImspeResult",
    "IncrementalEvaluator",
    "imspe_gap",
    "CovarianceParams",
    "Design",
    "TwinSpec",
    "build_L",
    "build_matrices",
    "build_R",
    "I1",
    "I2",
    "S_l",
    "SearchConfig",
    "SearchResult",
    "canonicalize",
    "ccd_minimize",
    "multistart",
    "random_baseline",
    "random_design",
    "PhaseLabel",
    "PhaseRecord",
    "ProfilePoint",
    "classify",
    "hue_grid",
    "phase_sweep",
    "tornado_data",
    "twin_profile",
]
