"""
Watching the Zeeman populations precess
=======================================

With a field tilted away from the quantization axis the sublevel populations
oscillate, and the cavity sees it because only two sublevels couple to the
probe. A slow loss of coherence damps the oscillation.
"""

import numpy as np

from ioncavity import presets
from ioncavity.estimate import fit_larmor
from ioncavity.expsim import simulate_larmor
from ioncavity.larmor import (
    DecayModel,
    FieldConfig,
    SpinState,
    larmor_frequency,
    population_harmonics,
    symmetric_outer_mixture,
)
from ioncavity.units import KHZ, MHZ

f = FieldConfig.from_field(presets.B_FIELD_9A, presets.B_FIELD_9A)
print(f"Larmor frequency: 2π × {larmor_frequency(f) / KHZ:.1f} kHz")

# %%
# Harmonic content
# ----------------
# A balanced mixture of m = +-3/2 gives populations with only the first and
# second harmonic. A pure m = +3/2 state also has a third one.
for label, prep in (("mixture", symmetric_outer_mixture()), ("pure +3/2", SpinState.basis(1.5))):
    cos, _ = population_harmonics(prep, f)
    print(f"{label:10s} P(+3/2) harmonics 0..3:", np.round(cos[3], 4))

# %%
# A cooperativity trace
# ---------------------
taus = np.arange(0, 120.5e-6, 0.5e-6)
tr = simulate_larmor(symmetric_outer_mixture(), f, presets.two_transition(),
                     DecayModel("exponential", 1.7e-3), taus, presets.GAMMA_EFF,
                     presets.rates().kappa, presets.N_EFF, sigma=0.03, seed=3)
print(f"time-averaged cooperativity {tr.meta['mean_cooperativity']:.3f}")

# %%
# Fitting both envelopes
# ----------------------
# Over a 120 us window a millisecond decay only bends the trace slightly, so
# the data constrain a short coherence time much better than a long one.
for kind, est in fit_larmor(taus, tr.y, sigma=0.03).items():
    lo, hi = est.extra["timescale_bounds"]
    print(f"{kind:11s}: omega_L = 2π × {est['omega_l'] / KHZ:.2f} kHz, "
          f"timescale {est['timescale'] * 1e3:.2f} ms in [{lo * 1e3:.2f}, {hi * 1e3:.2f}] ms, "
          f"chi2 {est.extra['chi2']:.1f}")

print(f"(probe coupling g = 2π × {presets.G_SINGLE / MHZ:.2f} MHz on the stronger line)")
