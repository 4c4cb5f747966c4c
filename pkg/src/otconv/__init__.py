"""Discrete optimal transport and Wasserstein convexity certification."""

from .convexity import (
    ConvexityReport,
    SamplerConfig,
    Verdict,
    check_convex_along_curve,
    check_displacement_monotonicity,
    check_equivalence_suite,
    derivative_along_curve,
    gradient_consistency,
    second_derivative_fd,
)
from .curves import (
    AccelerationFreeCurve,
    CurveKind,
    crossing_times,
    curve_from_plan,
    evaluate,
    generalized_geodesic,
    geodesic,
    local_geodesic_radius,
    make_curve,
    restriction_is_geodesic,
)
from .functionals import (
    Functional,
    Kernel,
    interaction_energy,
    potential_energy,
    second_moment_functional,
    shift_lambda,
    w_epsilon_kernel,
)
from .measures import DiscreteMeasure, new_discrete, second_moment
from .transport import (
    ThreePlan,
    TransportPlan,
    glue_plans,
    is_cyclically_monotone,
    make_plan,
    solve_w2,
    transport_cost,
)

__version__ = "0.1.0"
