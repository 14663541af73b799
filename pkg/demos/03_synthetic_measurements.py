"""
Measuring the coupling from photon counts
=========================================

Simulate the two kinds of measurement (cavity-length scans at fixed probe
detuning and spectra with the cavity locked to the probe) and recover the
coupling from the counts alone.
"""

import numpy as np

from ioncavity import presets
from ioncavity.estimate import fit_absorption, fit_empty_cavity, fit_lorentzian_dip, fit_rabi
from ioncavity.expsim import NoiseModel, ScanConfig, simulate_locked, simulate_scan
from ioncavity.units import MHZ

s = presets.coupled_system()
noise = NoiseModel(rng_seed=1)
scan = ScanConfig(n_average=500)

# %%
# Scans at fixed probe detuning
# -----------------------------
# Each scan gives a Lorentzian dip whose half width is kappa'(Delta).
deltas = np.linspace(-60, 60, 13) * MHZ
widths, errs = [], []
for i, d in enumerate(deltas):
    tr = simulate_scan(s, d, scan, noise.with_seed(100 + i))
    est = fit_lorentzian_dip(tr)
    widths.append(est["hwhm"])
    errs.append(est.error("hwhm"))
    print(f"Delta = {d / MHZ:+6.1f} MHz: kappa' = {est['hwhm'] / MHZ:6.3f} ± {est.error('hwhm') / MHZ:.3f}")

fit = fit_absorption(deltas, widths, errs)
print(f"absorption fit: g_N = {fit['g_n'] / MHZ:.2f} ± {fit.error('g_n') / MHZ:.2f}, "
      f"gamma' = {fit['gamma'] / MHZ:.2f} ± {fit.error('gamma') / MHZ:.2f} (2π × MHz)")
print(f"injected:       g_N = {s.g_n / MHZ:.2f}, gamma' = {s.gamma_eff / MHZ:.2f}")

# %%
# Locked spectra
# --------------
# An empty-cavity spectrum fixes kappa and kappa1, after which a single
# parameter (g_N) describes the coupled spectrum.
grid = np.linspace(-40, 40, 161) * MHZ
empty = fit_empty_cavity(simulate_locked(presets.coupled_system(n_eff=0), grid, noise=noise))
coupled = simulate_locked(s, grid, noise=noise.with_seed(2))
rabi = fit_rabi(coupled, s.gamma_eff, empty["kappa"], empty["kappa1"])
print(f"empty cavity: kappa = {empty['kappa'] / MHZ:.3f}, kappa1 = {empty['kappa1'] / MHZ:.3f}")
print(f"Rabi fit:     g_N = {rabi['g_n'] / MHZ:.3f} ± {rabi.error('g_n') / MHZ:.3f}")
