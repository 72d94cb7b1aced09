"""Closed geodesics on flat quotient geometries.

Exact distance and minimizing-geodesic enumeration on flat tori, doubled
rectangles, and products; the discrete loop energy with its one-sided
directional calculus at cut configurations; minimizing-index analysis of
closed geodesics; and a restartable negative-gradient flow.
"""

__version__ = "0.1.0"

from .energy import (
    CandidateGradient,
    ConfigTangent,
    Configuration,
    HessianReport,
    LoopEnergy,
    associated_geodesic,
    candidate_gradients,
    configuration,
    dplus_distance,
    dplus_uniform_energy,
    exp_config,
    gradient_like,
    gradient_like_all,
    has_associated_geodesic,
    hessian_index_nullity,
    loop_energy,
    segment_geodesics,
    uniform_energy,
)
from .errors import (
    ClosureError,
    CoincidentPointsError,
    DegenerateTrajectoryError,
    DimensionMismatchError,
    GeometryError,
    NonGeodesicLimitError,
    NotSmoothCriticalError,
    ResourceLimitError,
    SpaceSupportError,
    ValidationError,
)
from .flow import (
    FlowParams,
    FlowTrace,
    RestartReport,
    birkhoff_shorten,
    classify_limit,
    descend,
    restart_step,
    restart_until_stable,
)
from .geodesics import (
    ClosedGeodesic,
    CutPair,
    VariationProfile,
    VariationSpec,
    is_k_geodesic,
    is_openly_k_geodesic,
    max_cut_pair,
    minimizing_index,
    point_at,
    segment_loop_geodesic,
    torus_class_geodesic,
    torus_class_minind,
    variation_geodesic,
    variation_minind_profile,
    velocity_at,
)
from .spaces import (
    DoubledRectangle,
    FlatTorus,
    MinGeodesic,
    Point,
    Product,
    Space,
    Tangent,
    distance,
    effective_periods,
    exp_map,
    is_cut_pair,
    minimizing_geodesics,
    point_from_dict,
    point_to_dict,
    space_from_dict,
)

__all__ = [name for name in dir() if not name.startswith("_")]
