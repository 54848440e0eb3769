"""Max-formula solutions of ``u_t + H(Du) = 0``: maximizer sets, characteristics,
differentiability strips and singular paths."""

__version__ = "0.1.0"

from .characteristics import (CurveType, characteristic_from, classify, persistence_check,
                              reachable_gradients, through_point)
from .conjugate import ConjugateView, view_for
from .errors import (CatalogError, ConfigurationError, DomainError, EvaluationError, HopfError,
                     InfeasibleError, PreconditionError, SearchWindowError)
from .hopf import DEFAULT_OPTIONS, MaximizerSet, SolveOptions, evaluate, field, phi, value
from .problem import ProblemSpec, catalog_lookup, catalog_names, validate
from .regularity import estimate_theta, strip_bound, viscosity_audit
from .singularity import arc_direction_hint, trace

__all__ = [
    "CatalogError", "ConfigurationError", "ConjugateView", "CurveType", "DEFAULT_OPTIONS",
    "DomainError", "EvaluationError", "HopfError", "InfeasibleError", "MaximizerSet",
    "PreconditionError", "ProblemSpec", "SearchWindowError", "SolveOptions",
    "arc_direction_hint", "catalog_lookup", "catalog_names", "characteristic_from", "classify",
    "estimate_theta", "evaluate", "field", "persistence_check", "phi", "reachable_gradients",
    "strip_bound", "through_point", "trace", "validate", "value", "view_for",
    "viscosity_audit",
]
