"""Collective strong coupling of ion Coulomb crystals with an optical cavity.

Semiclassical steady-state and transient cavity response, crystal overlap
integrals, thermal broadening, Zeeman-sublevel precession, synthetic
measurements with photon-counting noise, and the estimators that turn scans
back into physical parameters. All rates are angular (rad/s) internally.
"""

__version__ = "0.1.0"

from .cavity import (
    CavityParams,
    CavityRates,
    CoupledSystem,
    TransitionParams,
    cooperativity,
    derive_cavity_rates,
    effective_response,
    reflectivity,
)
from .crystal import CrystalSpec, ModeGeometry, TrapParams, effective_ion_count
from .errors import (
    DataError,
    DomainError,
    EstimationError,
    IonCavityError,
    NumericError,
)
from .motion import ThermalConfig, effective_gamma, thermal_response, validity_check
from .larmor import DecayModel, FieldConfig, SpinState, TwoTransitionConfig
from .trace import ScanTrace
from .units import KHZ, MHZ
