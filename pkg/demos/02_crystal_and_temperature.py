"""
How many ions does the cavity see?
==================================

The crystal is a uniform spheroid and the mode a Gaussian standing wave. The
effective ion number weights each ion by the local mode intensity; finite
temperature then smears the atomic response.
"""

import math

import numpy as np

from ioncavity import presets
from ioncavity.crystal import (
    count_uncertainty,
    effective_ion_count,
    effective_ion_count_thin,
    ion_density,
    total_ion_count,
)
from ioncavity.motion import ThermalConfig, effective_gamma, thermal_response, validity_check
from ioncavity.units import CA40_MASS, MHZ

c, m = presets.CRYSTAL, presets.MODE
print(f"density from the trap calibration: {ion_density(presets.TRAP) / 1e6:.3e} cm^-3")

# %%
# Overlap integral
# ----------------
# Quadrature over the spheroid against the closed form that treats the
# crystal as an infinitely wide slab.
n = effective_ion_count(c, m)
thin = c.pump_efficiency * effective_ion_count_thin(c.density, c.half_length, m.waist)
u = presets.CRYSTAL_UNCERTAINTY
rel = count_uncertainty(u["rel_drho"], u["imaging_dx"], c, u["rel_deta"])
print(f"effective N      = {n:.0f} ± {n * rel:.0f}")
print(f"slab formula     = {thin:.0f}")
print(f"ions in crystal  = {total_ion_count(c):.0f}")

# %%
# Moving the crystal off axis costs coupling quickly once the offset is
# comparable to the waist.
for dx in (0, 10e-6, 20e-6, 40e-6):
    shifted = type(c)(c.half_length, c.radius, c.density, c.pump_efficiency, dx, 0.0)
    print(f"offset {dx * 1e6:4.0f} um -> N = {effective_ion_count(shifted, m):.0f}")

# %%
# Temperature
# -----------
# Doppler shifts of the two running waves broaden the absorption line. At a
# few tens of mK the line stays close to Lorentzian with a slightly larger
# width.
k = 2 * math.pi / presets.CAVITY.wavelength
s = presets.coupled_system(gamma_eff=presets.GAMMA)
for t in (0.0, 0.01, 0.024, 0.1):
    th = ThermalConfig(t, CA40_MASS, k)
    eg = effective_gamma(s, th)
    v = validity_check(s, th)
    print(f"T = {t * 1e3:5.1f} mK: k v_D = 2π × {eg.doppler_rate / MHZ:.2f} MHz, "
          f"gamma' = 2π × {eg.fitted / MHZ:.2f} MHz, margin {v.margin:.1f}")

th = ThermalConfig(presets.TEMPERATURE, CA40_MASS, k)
d = np.array([0.0, 10.0, 30.0]) * MHZ
warm = thermal_response(s, d, 0.0, th).kappa_prime / MHZ
print("kappa' at 0, 10, 30 MHz detuning (24 mK):", np.round(warm, 3))
