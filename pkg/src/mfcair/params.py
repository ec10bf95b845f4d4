"""Physical parameters of the air-feed system and the lumped constants c1..c21.

The plant equations are written in terms of twenty-one lumped constants. They
are derived here from a flat set of physical parameters, and the robustness
experiments perturb a subset of those parameters multiplicatively before the
derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace


class ParameterError(ValueError):
    """Raised when a parameter set or a derived constant is invalid."""


_EFFICIENCIES = ("eta_cm", "eta_cp", "eta_vc")


@dataclass(frozen=True)
class PhysicalParams:
    """Raw fuel-cell and compressor parameters (SI units, temperatures in K)."""

    R: float  # J/(mol K)
    T_fc: float  # K
    T_atm: float  # K
    p_atm: float  # Pa
    p_sat: float  # Pa
    V_ca: float  # m^3
    V_sm: float  # m^3
    M_O2: float  # kg/mol
    M_N2: float  # kg/mol
    M_v: float  # kg/mol
    M_a: float  # kg/mol
    x_O2: float  # oxygen mass fraction of dry air
    omega_atm: float  # humidity ratio
    k_ca_in: float  # kg/(s Pa)
    k_ca_out: float  # kg/(s sqrt(Pa))
    F: float  # C/mol
    n_cells: int
    f_motor: float  # N m s
    J_cp: float  # kg m^2
    k_t: float  # N m / A
    eta_cm: float
    eta_cp: float
    eta_vc: float
    V_cpr_tr: float  # m^3 per revolution
    rho_a: float  # kg/m^3
    C_p: float  # J/(kg K)
    gamma: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v <= 0:
                raise ParameterError(f"{f.name} must be finite and > 0, got {v!r}")
        for name in _EFFICIENCIES:
            if getattr(self, name) > 1:
                raise ParameterError(f"{name} must lie in (0, 1], got {getattr(self, name)!r}")
        if self.gamma <= 1:
            raise ParameterError(f"gamma must be > 1, got {self.gamma!r}")
        if self.x_O2 >= 1:
            raise ParameterError(f"x_O2 must lie in (0, 1), got {self.x_O2!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ParameterError(f"n_cells must be a positive integer, got {self.n_cells!r}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DerivedConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    c10: float
    c11: float
    c12: float
    c13: float
    c14: float
    c15: float
    c16: float
    c17: float
    c18: float
    c19: float
    c20: float
    c21: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Which physical parameters each constant reads. Kept next to the formulas so
# the dependency tests can compare against it.
CONSTANT_DEPENDENCIES = {
    "c1": {"R", "T_fc", "k_ca_in", "x_O2", "V_ca", "M_O2", "omega_atm"},
    "c2": {"p_sat"},
    "c3": {"R", "T_fc", "V_ca"},
    "c4": {"M_O2"},
    "c5": {"M_N2"},
    "c6": {"M_v", "p_sat"},
    "c7": {"R", "T_fc", "k_ca_in", "V_ca", "F"},
    "c8": {"R", "T_fc", "k_ca_in", "x_O2", "V_ca", "M_N2", "omega_atm"},
    "c9": {"f_motor", "J_cp"},
    "c10": {"eta_vc", "V_cpr_tr", "rho_a", "C_p", "T_atm", "J_cp", "eta_cp"},
    "c11": {"p_atm"},
    "c12": {"gamma"},
    "c13": {"eta_cm", "k_t", "J_cp"},
    "c14": {"R", "T_atm", "M_a", "V_sm"},
    "c15": {"eta_cp"},
    "c16": {"k_ca_in"},
    "c17": {"k_ca_out"},
    "c18": {"eta_cm", "k_t"},
    "c19": {"k_ca_in", "x_O2", "omega_atm"},
    "c20": {"n_cells", "M_O2", "F"},
    "c21": {"eta_vc", "V_cpr_tr", "rho_a"},
}


def derive_constants(p: PhysicalParams) -> DerivedConstants:
    """Evaluate the twenty-one lumped plant constants from ``p``.

    c7 carries ``k_ca_in`` in its numerator rather than the cell count, which
    makes the oxygen consumption term small. Raises :class:`ParameterError` naming the first constant that
    comes out non-finite or non-positive.
    """
    two_pi = 2.0 * math.pi
    rt_fc = p.R * p.T_fc
    c = {
        "c1": rt_fc * p.k_ca_in * p.x_O2 / (p.V_ca * p.M_O2 * (1.0 + p.omega_atm)),
        "c2": p.p_sat,
        "c3": rt_fc / p.V_ca,
        "c4": p.M_O2,
        "c5": p.M_N2,
        "c6": p.M_v * p.p_sat,
        "c7": rt_fc * p.k_ca_in / (p.V_ca * 4.0 * p.F),
        "c8": rt_fc * p.k_ca_in * (1.0 - p.x_O2) / (p.V_ca * p.M_N2 * (1.0 + p.omega_atm)),
        "c9": p.f_motor / p.J_cp,
        "c10": p.eta_vc * p.V_cpr_tr * p.rho_a * p.C_p * p.T_atm / (two_pi * p.J_cp * p.eta_cp),
        "c11": p.p_atm,
        "c12": (p.gamma - 1.0) / p.gamma,
        "c13": p.eta_cm * p.k_t / p.J_cp,
        "c14": p.R * p.T_atm / (p.M_a * p.V_sm),
        "c15": 1.0 / p.eta_cp,
        "c16": p.k_ca_in,
        "c17": p.k_ca_out,
        "c18": p.eta_cm * p.k_t,
        "c19": p.k_ca_in * p.x_O2 / (1.0 + p.omega_atm),
        "c20": p.n_cells * p.M_O2 / (4.0 * p.F),
        "c21": p.eta_vc * p.V_cpr_tr * p.rho_a / two_pi,
    }
    for name, value in c.items():
        if not math.isfinite(value) or value <= 0:
            raise ParameterError(f"derived constant {name} = {value!r} is not finite and positive")
    return DerivedConstants(**c)


UNCERTAIN_PARAMETERS = (
    "f_motor", "k_t", "eta_cp", "eta_cm", "k_ca_out", "T_atm", "V_ca", "V_sm", "T_fc",
)


@dataclass(frozen=True)
class UncertaintySet:
    """Signed relative deviations, e.g. ``f_motor=0.2`` means +20 %."""

    f_motor: float = 0.0
    k_t: float = 0.0
    eta_cp: float = 0.0
    eta_cm: float = 0.0
    k_ca_out: float = 0.0
    T_atm: float = 0.0
    V_ca: float = 0.0
    V_sm: float = 0.0
    T_fc: float = 0.0

    def __post_init__(self):
        for name in UNCERTAIN_PARAMETERS:
            d = getattr(self, name)
            if not math.isfinite(d) or not -1.0 < d < 1.0:
                raise ParameterError(f"uncertainty on {name} must lie in (-1, 1), got {d!r}")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in UNCERTAIN_PARAMETERS}

    @property
    def is_identity(self) -> bool:
        return all(getattr(self, name) == 0.0 for name in UNCERTAIN_PARAMETERS)


# Deviations used for the "uncertain" robustness runs.
REFERENCE_UNCERTAINTIES = UncertaintySet(
    f_motor=0.20,
    k_t=-0.05,
    eta_cp=-0.10,
    eta_cm=-0.20,
    k_ca_out=0.10,
    T_atm=0.10,
    V_ca=0.10,
    V_sm=-0.10,
    T_fc=0.12,
)


def apply_uncertainties(p: PhysicalParams, u: UncertaintySet) -> PhysicalParams:
    """Scale each perturbed parameter by ``1 + delta``; everything else is copied.

    Temperatures are scaled in kelvin. A perturbed efficiency that leaves
    (0, 1] is rejected by the :class:`PhysicalParams` validation.
    """
    if u.is_identity:
        return p
    changes = {}
    for name in UNCERTAIN_PARAMETERS:
        d = getattr(u, name)
        if d != 0.0:
            changes[name] = getattr(p, name) * (1.0 + d)
    return replace(p, **changes)
