"""Conservative solutions of the periodic Camassa-Holm equation.

Lagrangian-coordinate evolution through wave breaking, conversions between
Eulerian and Lagrangian descriptions, and a relabeling-invariant metric
under which the flow is Lipschitz stable on sets of bounded energy.
"""

from .state import (
    DimensionError,
    DomainError,
    LagrangianState,
    MembershipReport,
    Relabeling,
    Tolerances,
    apply_relabeling,
    check_membership,
    compose_relabelings,
    constant_state,
    enorm_diff,
    random_relabeling,
    random_state,
    rest_state,
    xi_grid,
)
from .nonlocal_ops import QPResult, qp_fast, qp_reference
from .evolution import (
    EvolveConfig,
    IntegrationError,
    SpaceTimeBump,
    Trajectory,
    check_equivariance,
    detect_umax_minimum,
    evolve,
    rhs,
    weak_residual,
)
from .projection import bar_s_t, canonical_relabeling, invert_relabeling, pi, pi1, pi2
from .transforms import (
    CumulativeMeasure,
    EulerianState,
    blend_eulerian,
    cumulative_measure,
    h1_to_eulerian,
    to_eulerian,
    to_lagrangian,
)
from .metric import (
    MetricReport,
    SearchConfig,
    d_upper,
    j_upper,
    lipschitz_experiment,
    write_experiment_csv,
)
from . import peakons, toymetric

__version__ = "0.1.0"
