"""
Collective coupling of an ion crystal to an optical cavity
==========================================================

Start from mirror transmissions and geometry, derive the cavity decay rates,
then put a few hundred ions into the mode and watch the reflection spectrum
split into two normal modes.
"""

import numpy as np

from ioncavity import presets
from ioncavity.cavity import (
    cooperativity,
    derive_cavity_rates,
    effective_response,
    intracavity_amplitude,
    is_strongly_coupled,
    rabi_spectrum,
    transient_buildup,
)
from ioncavity.units import MHZ

# %%
# The cavity
# ----------
# Rates are stored in rad/s; dividing by MHZ prints them in "2π × MHz".
rates = derive_cavity_rates(presets.CAVITY)
print(f"kappa  = 2π × {rates.kappa / MHZ:.3f} MHz (coupling mirror {rates.kappa1 / MHZ:.3f})")
print(f"FSR    = {rates.fsr / 1e9:.2f} GHz, finesse {rates.finesse:.0f}")

# %%
# Adding ions
# -----------
# The single-ion coupling g is small compared to both decay rates, but the
# collective rate g sqrt(N) is not.
for n in (0, 100, 520, 1500):
    s = presets.coupled_system(n_eff=n)
    tag = "strong" if is_strongly_coupled(s) else "weak"
    print(f"N = {n:5d}: g_N = 2π × {s.g_n / MHZ:6.2f} MHz, C = {cooperativity(s):6.3f} ({tag})")

# %%
# Vacuum Rabi splitting
# ---------------------
# Scanning probe and cavity together (Delta = Delta_c) the single empty-cavity
# dip turns into two dips near +-g_N.
grid = np.linspace(-40, 40, 4001) * MHZ
for n in (0, 520):
    r = rabi_spectrum(presets.coupled_system(n_eff=n), grid).y
    mins = np.flatnonzero((r[1:-1] < r[:-2]) & (r[1:-1] < r[2:])) + 1
    where = ", ".join(f"{grid[i] / MHZ:+.2f}" for i in mins)
    print(f"N = {n}: reflectivity minima at {where} (2π × MHz)")

# %%
# How fast does the field settle?
# -------------------------------
# The photon counter opens 0.1 us after the probe is switched on. With ions
# present the field is already stationary by then.
s = presets.coupled_system()
ss = intracavity_amplitude(effective_response(s, 0.0, 0.0), s.rates, 1.0)
tr = transient_buildup(s, 0.0, 0.0, 1.0, 0.3e-6, 1e-11)
for t in (0.02e-6, 0.05e-6, 0.1e-6, 0.2e-6):
    i = int(round(t / 1e-11))
    print(f"t = {t * 1e6:.2f} us: |a| / |a_ss| = {abs(tr.a[i]) / abs(ss):.4f}")
