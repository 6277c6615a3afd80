"""Simulation and exact analysis of the kinetically constrained Ising
process and its reference chains on finite graphs."""

__version__ = "0.1.0"

from .graph import (
    Graph,
    ball,
    check_regular_triangle_free,
    graph_distance,
    make_cycle,
    make_torus,
    parse_graph_spec,
)
from .kcip import (
    Density,
    Observer,
    SpinConfig,
    TrajectoryRecord,
    UpdateDraw,
    kcip_step,
    simulate,
    stationary_prob,
)
from .components import (
    CollisionObserver,
    ComponentView,
    component_stats,
    corrected_count_exact,
    corrected_count_mc,
    corrected_total,
    is_separated,
    min_pair_distance,
)
from .exact_analysis import (
    StateSpace,
    TransitionKernel,
    build_kernel,
    functional_forms,
    log_sobolev_estimate,
    mixing_profile,
    spectral_gap,
    stationary_solve,
    trace_kernel,
    tv_distance,
)
from .reference_chains import (
    CoalescenceState,
    ColoredConfig,
    ExclusionState,
    coalescence_step,
    colored_kcip_step,
    mh_sep_step,
    sep_step,
    triple_time_exact,
    triple_time_mc,
)
