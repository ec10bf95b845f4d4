"""Model-free (iP) control of oxygen stoichiometry on a PEM fuel-cell air-feed model."""

from .mfc import ControllerConfig, IntelligentP, estimate_f, ip_control
from .params import (
    REFERENCE_UNCERTAINTIES,
    DerivedConstants,
    PhysicalParams,
    UncertaintySet,
    apply_uncertainties,
    derive_constants,
)
from .plant import Measurement, NoiseConfig, PlantState, equilibrium, measure, plant_dynamics
from .scenario import (
    CurrentProfile,
    ReferenceSpec,
    compute_stoichiometry,
    current_at,
    desired_stoichiometry,
)
from .sim import RunMetrics, SimConfig, Trace, restoration_times, rk4_step, run_closed_loop

__version__ = "0.1.0"
