"""Reference parameter sets for the 40Ca+ / 866 nm ion-cavity system.

``REFERENCE`` collects the published measured values that the pipelines
compare against; they are targets, never inputs to an estimator.
"""

import math

from .cavity import CavityParams, CoupledSystem, derive_cavity_rates
from .crystal import CrystalSpec, ModeGeometry, TrapParams
from .larmor import TwoTransitionConfig
from .units import CA40_866_WAVELENGTH, CA40_MASS, KHZ, MHZ

CAVITY = CavityParams(
    length=11.8e-3, t1=1500e-6, t2=5e-6, losses=650e-6, waist=37e-6,
    wavelength=CA40_866_WAVELENGTH,
)
MODE = ModeGeometry.from_cavity(CAVITY)

GAMMA = 11.2 * MHZ          # natural dipole decay rate of the probe transition
GAMMA_EFF = 11.9 * MHZ      # motion-broadened value used for the N ~ 500 crystal
G_SINGLE = 0.53 * MHZ       # single-ion coupling at an antinode of the mode centre
N_EFF = 520.0

TRAP = TrapParams(r0=2.35e-3, omega_rf=2 * math.pi * 4.0e6, u_rf=300.0, ion_mass=CA40_MASS,
                  density_coefficient=6.01e3 * 1e6)

CRYSTAL = CrystalSpec(half_length=511e-6, radius=75e-6, density=5.4e8 * 1e6,
                      pump_efficiency=0.97, offset_x=3.9e-6, offset_y=15.7e-6)
#: relative uncertainties: density, pumping efficiency; imaging resolution (m)
CRYSTAL_UNCERTAINTY = {"rel_drho": 0.1 / 5.4, "rel_deta": 0.04, "imaging_dx": 1e-6}

OMEGA_Z = 150.0 * KHZ            # longitudinal Larmor rate during the coherence runs
LARMOR_SLOPE = 5.5 * KHZ / 1e-3  # transverse Larmor rate per coil current (rad/s per A)
B_FIELD_9A = 0.15e-4             # B_x = B_z = 0.15 G
TEMPERATURE = 24e-3

#: single-ion coupling of the weaker m = +1/2 -> -1/2 sigma- line relative to
#: m = +3/2 -> +1/2 (Clebsch-Gordan ratio 1/sqrt(3))
G_HALF_RATIO = 1.0 / math.sqrt(3.0)


def rates():
    return derive_cavity_rates(CAVITY)


def coupled_system(n_eff=N_EFF, gamma_eff=GAMMA_EFF, g=G_SINGLE):
    return CoupledSystem(g=g, n_eff=n_eff, gamma_eff=gamma_eff, rates=rates())


def two_transition(g=G_SINGLE):
    return TwoTransitionConfig(g_half=g * G_HALF_RATIO, g_threehalf=g)


# published values: (value, minus, plus) in SI units
REFERENCE = {
    "kappa_measured": (2.1 * MHZ, 0.1 * MHZ, 0.1 * MHZ),
    "finesse": (3000.0, 200.0, 200.0),
    "fsr": (12.7e9, 0.05e9, 0.05e9),
    "n_eff": (520.0, 32.0, 24.0),
    "n_total": (6500.0, 200.0, 200.0),
    "g_n_theory": (12.1 * MHZ, 0.5 * MHZ, 0.4 * MHZ),
    "g_n_absorption": (12.2 * MHZ, 0.2 * MHZ, 0.2 * MHZ),
    "gamma_absorption": (11.9 * MHZ, 0.4 * MHZ, 0.4 * MHZ),
    "kappa_absorption": (2.2 * MHZ, 0.1 * MHZ, 0.1 * MHZ),
    "g_n_dispersion": (12.0 * MHZ, 0.3 * MHZ, 0.3 * MHZ),
    "gamma_dispersion": (12.7 * MHZ, 0.8 * MHZ, 0.8 * MHZ),
    "g_n_rabi": (12.2 * MHZ, 0.2 * MHZ, 0.2 * MHZ),
    "g_single": (0.53 * MHZ, 0.01 * MHZ, 0.01 * MHZ),
    "c_per_n": (5.1e-3, 0.2e-3, 0.4e-3),
    "c_largest": (7.9, 0.3, 0.3),
    "n_largest": (1523.0, 93.0, 69.0),
    "omega_z": (150.0 * KHZ, 2.0 * KHZ, 2.0 * KHZ),
    "larmor_slope": (5.5 * KHZ / 1e-3, 0.1 * KHZ / 1e-3, 0.1 * KHZ / 1e-3),
    "b_z": (0.134e-4, 0.002e-4, 0.002e-4),
    "b_x_per_amp": (4.91e-4, 0.09e-4, 0.09e-4),
    "tau_e": (1.7e-3, 0.8e-3, 100e-3),
    "mean_cooperativity_9b": (1.43, 0.02, 0.02),
}

RABI_FAMILY_N = (0.0, 243.0, 601.0, 914.0)
CALIBRATION_CURRENTS = (10e-3, 16e-3, 20e-3, 26e-3, 30e-3, 36e-3)
