"""Excitable spiking control of a one-segment soft crawler."""

from .model import (
    REFERENCE_GROUPS,
    REFERENCE_INITIAL_STATE,
    ComStrainState,
    DimensionalParams,
    DimensionlessGroups,
    ParameterError,
    State,
    TwoMassState,
    apply_phi,
    friction_sigma_dimensional,
    friction_sigma_dimensionless,
    rhs_dimensional_comstrain,
    rhs_dimensional_two_mass,
    rhs_dimensionless,
    rhs_fast,
    rhs_slow,
    sigma_shape,
)
from .scales import (
    CharacteristicScales,
    characteristic_scales,
    dimensional_from_groups,
    groups_from_dimensional,
    nondimensionalize_state,
    nondimensionalize_trajectory,
    redimensionalize_state,
    split_timescales,
)
from .integrate import IntegratorConfig, Trajectory, dense_eval, integrate, simulate
from .analysis import (
    LimitCycleSummary,
    NoLimitCycleError,
    SwitchingPoints,
    detect_limit_cycle,
    displacement_speed,
    hysteresis_loop,
    segment_phases,
    slow_manifold_roots,
    switching_points,
)

__version__ = "0.1.0"
