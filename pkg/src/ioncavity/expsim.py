"""Synthetic experiments: cavity scans, locked spectra and Larmor traces.

Photon counting is Poisson. Averaged traces use the fact that a sum of
independent Poisson variables is Poisson with the summed mean, so one draw
per sample reproduces the statistics of ``n_average`` separate scans;
individual scans are only drawn when ``keep_raw`` asks for them. All
randomness comes from a :class:`numpy.random.SeedSequence` tree rooted at
``NoiseModel.rng_seed``, with one child stream per purpose.
"""

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np

from .cavity import effective_response, mean_photon_number, reflectivity
from .errors import DegenerateTraceError, DomainError, EmptyTraceError
from .larmor import (
    TwoTransitionConfig,
    envelope,
    kappa_prime_two_transition,
    population_harmonics,
    populations_trace,
)
from .trace import ScanTrace
from .units import TWO_PI


class SaturationWarning(UserWarning):
    """Configured probe power puts about one photon or more in the cavity."""


@dataclass(frozen=True)
class SequenceTiming:
    cool: float = 5e-6
    pump: float = 12e-6
    probe: float = 1.4e-6
    apd_delay: float = 0.1e-6
    total: float = 20e-6

    def __post_init__(self):
        if min(self.cool, self.pump, self.probe, self.total) <= 0 or self.apd_delay < 0:
            raise DomainError("sequence durations must be positive")
        if self.cool + self.pump + self.probe > self.total * (1 + 1e-12):
            raise DomainError("cool + pump + probe exceeds the sequence length")
        if not self.apd_delay < self.probe:
            raise DomainError("APD delay must be shorter than the probe pulse")

    @property
    def detection_window(self):
        return self.probe - self.apd_delay


@dataclass(frozen=True)
class ScanConfig:
    """Cavity-length scan. ``span`` and ``rate`` are in Hz (not angular)."""

    span: float = 1.3e9
    rate: float = 30.0
    n_average: int = 100
    samples_per_scan: int = 1667

    def __post_init__(self):
        if not (self.span > 0 and self.rate > 0 and self.n_average > 0 and self.samples_per_scan > 1):
            raise DomainError("scan parameters must be positive")

    def grid(self):
        """Cavity detunings Delta_c (rad/s) of one scan, centred on zero."""
        half = 0.5 * TWO_PI * self.span
        return np.linspace(-half, half, self.samples_per_scan)


@dataclass(frozen=True)
class NoiseModel:
    """Detection and drift model.

    ``mean_photon_rate`` is the probe photon flux (1/s) that would reach the
    detector at unit reflectivity; it is a free knob, not a measured value.
    ``drift`` is the rms per-scan step (rad/s) of a random walk of the bare
    cavity resonance. With ``compensate`` the reference channel removes the
    walk up to a residual of rms ``compensation_floor + compensation_slope
    |Delta|``. ``lock_error`` is the rms cavity detuning error (rad/s) of a
    locked sequence, and ``reference_noise`` the rms fluctuation of the
    normalized reference transmission used for postselection.
    """

    mean_photon_rate: float = 5e6
    detection_efficiency: float = 0.16
    drift: float = 0.0
    reference_threshold: float = 0.0
    rng_seed: int = 0
    compensate: bool = True
    compensation_floor: float = 0.0
    compensation_slope: float = 0.0
    lock_error: float = 0.0
    reference_noise: float = 0.05

    def __post_init__(self):
        if not 0 < self.detection_efficiency <= 1:
            raise DomainError("detection efficiency must lie in (0, 1]")
        if self.mean_photon_rate < 0:
            raise DomainError("photon rate must be nonnegative")
        for name in ("drift", "compensation_floor", "compensation_slope", "lock_error",
                     "reference_noise"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")

    def with_seed(self, seed):
        return replace(self, rng_seed=seed)


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _saturation_guard(sys, delta, delta_c, noise, timing):
    flux = noise.mean_photon_rate
    n = mean_photon_number(effective_response(sys, delta, delta_c), sys.rates, flux)
    n_max = float(np.max(n)) if np.size(n) else 0.0
    if n_max >= 1.0:
        warnings.warn(
            f"mean intracavity photon number reaches {n_max:.2f} (>= 1); the linear response "
            "assumed by the model no longer holds",
            SaturationWarning,
            stacklevel=3,
        )
    return n_max


def counts_per_window(noise, timing):
    """Mean detected counts of one probe window at unit reflectivity."""
    return noise.mean_photon_rate * timing.detection_window * noise.detection_efficiency


def simulate_scan(sys, delta, scan=None, noise=None, timing=None, noiseless=False,
                  keep_raw=False):
    """Averaged reflection counts while the cavity length is scanned.

    The probe detuning ``delta`` is fixed and the bare cavity detuning runs
    over ``scan.grid()``. Each scan sees the cavity resonance displaced by
    the drift walk (or, with compensation, by the residual alignment error);
    counts of ``scan.n_average`` scans are averaged. ``noiseless`` returns
    the exact mean. The returned trace carries ``n_average`` and
    ``counts_per_unit_reflectivity`` in ``meta`` and the estimated one-sigma
    errors in ``yerr``.
    """
    scan = scan or ScanConfig()
    noise = noise or NoiseModel()
    timing = timing or SequenceTiming()
    base = counts_per_window(noise, timing)
    if not base > 0:
        raise DegenerateTraceError("zero photon rate: the scan carries no information")
    x = scan.grid()
    n = scan.n_average
    rng_walk, rng_comp, rng_counts, rng_raw = _streams(noise.rng_seed, 4)
    if noise.compensate:
        sd = noise.compensation_floor + noise.compensation_slope * abs(delta)
        offsets = rng_comp.normal(0.0, sd, n) if sd > 0 else np.zeros(n)
    else:
        steps = rng_walk.normal(0.0, noise.drift, n) if noise.drift > 0 else np.zeros(n)
        offsets = np.cumsum(steps)
    if np.all(offsets == 0):
        r = reflectivity(sys.rates, effective_response(sys, delta, x))
        mean_total = n * base * r
    else:
        r_scans = reflectivity(sys.rates, effective_response(sys, delta, x[None, :] + offsets[:, None]))
        mean_total = base * r_scans.sum(axis=0)
    n_photon = _saturation_guard(sys, delta, x, noise, timing)
    meta = {
        "n_average": n,
        "counts_per_unit_reflectivity": base,
        "delta": float(delta),
        "mean_intracavity_photons": n_photon,
        "offsets": offsets,
    }
    if noiseless:
        total = mean_total
    else:
        total = rng_counts.poisson(mean_total).astype(float)
    if keep_raw:
        if np.all(offsets == 0):
            per_scan = np.broadcast_to(base * r, (n, x.size))
        else:
            per_scan = base * r_scans
        meta["raw"] = rng_raw.poisson(per_scan)
    y = total / n
    yerr = np.sqrt(np.maximum(total, 1.0)) / n
    return ScanTrace(x, y, kind="counts", seed=noise.rng_seed,
                     provenance=f"simulate_scan delta={delta:.6g} rad/s", yerr=yerr, meta=meta)


def normalize_counts(trace):
    """Counts divided by the analytic off-resonant (unit reflectivity) level."""
    base = trace.meta["counts_per_unit_reflectivity"]
    yerr = None if trace.yerr is None else trace.yerr / base
    return ScanTrace(trace.x, trace.y / base, kind="normalized", seed=trace.seed,
                     provenance=trace.provenance + " | normalized", yerr=yerr,
                     meta=dict(trace.meta))


def simulate_locked(sys, grid, timing=None, noise=None, n_sequences=20000, noiseless=False):
    """Normalized reflectivity with the cavity locked on atomic resonance.

    For every probe detuning in ``grid`` (Delta = Delta_c) ``n_sequences``
    probe windows are simulated. Each sequence carries a cavity detuning
    error from the lock and an independent reference-transmission reading;
    sequences whose reference reading falls below
    ``noise.reference_threshold`` are discarded (a threshold of zero keeps
    everything). The retained counts are
    divided by the unit-reflectivity level.
    """
    timing = timing or SequenceTiming()
    noise = noise or NoiseModel()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("empty detuning grid")
    base = counts_per_window(noise, timing)
    if not base > 0:
        raise DegenerateTraceError("zero photon rate: the trace carries no information")
    n_photon = _saturation_guard(sys, grid, grid, noise, timing)
    meta = {"n_sequences": n_sequences, "mean_intracavity_photons": n_photon,
            "counts_per_unit_reflectivity": base}
    if noiseless:
        r = reflectivity(sys.rates, effective_response(sys, grid, grid))
        yerr = np.sqrt(r / (n_sequences * base))
        meta["kept"] = np.full(grid.size, n_sequences)
        return ScanTrace(grid, r, kind="normalized", seed=noise.rng_seed,
                         provenance="simulate_locked (noiseless)", yerr=np.maximum(yerr, 1e-12),
                         meta=meta)
    streams = _streams(noise.rng_seed, grid.size)
    y = np.empty(grid.size)
    yerr = np.empty(grid.size)
    kept = np.empty(grid.size, dtype=int)
    kappa = sys.rates.kappa
    for i, (d, rng) in enumerate(zip(grid, streams)):
        err = rng.normal(0.0, noise.lock_error, n_sequences) if noise.lock_error > 0 else np.zeros(n_sequences)
        if noise.reference_threshold > 0:
            ref = 1.0 / (1.0 + (err / kappa) ** 2)
            if noise.reference_noise > 0:
                ref = ref + rng.normal(0.0, noise.reference_noise, n_sequences)
            keep = ref >= noise.reference_threshold
        else:
            keep = np.ones(n_sequences, dtype=bool)
        k = int(keep.sum())
        if k == 0:
            raise EmptyTraceError(
                f"postselection kept no sequence at Delta = {d:.6g} rad/s "
                f"(threshold {noise.reference_threshold})"
            )
        if noise.lock_error > 0:
            r = reflectivity(sys.rates, effective_response(sys, d, d + err[keep]))
            mu = base * float(np.sum(r))
        else:
            mu = base * k * float(reflectivity(sys.rates, effective_response(sys, d, d)))
        counts = float(rng.poisson(mu))
        y[i] = counts / (k * base)
        yerr[i] = math.sqrt(max(counts, 1.0)) / (k * base)
        kept[i] = k
    meta["kept"] = kept
    return ScanTrace(grid, y, kind="normalized", seed=noise.rng_seed,
                     provenance="simulate_locked", yerr=yerr, meta=meta)


def larmor_cooperativity(initial, f, cfg, gamma, kappa, n_total, taus):
    """Noise-free C(tau) = (kappa'(tau)/kappa - 1)/2 and its time average.

    N_{m}(tau) = n_total P_m(tau) for the two sublevels addressed by the
    sigma- probe (m = +1/2 and +3/2).
    """
    tr = populations_trace(initial, f, taus, fit=False)
    n_half = n_total * tr.of(0.5)
    n_3half = n_total * tr.of(1.5)
    kp = kappa_prime_two_transition(cfg.with_populations(n_half, n_3half), gamma, kappa)
    coop = 0.5 * (kp / kappa - 1.0)
    cos, _ = population_harmonics(initial, f)
    kp0 = kappa_prime_two_transition(
        cfg.with_populations(n_total * cos[2, 0], n_total * cos[3, 0]), gamma, kappa)
    return coop, 0.5 * (kp0 / kappa - 1.0)


def simulate_larmor(initial, f, cfg, decay, taus, gamma, kappa, n_total, sigma=0.0, seed=0):
    """Cooperativity versus free-precession delay.

    The oscillating part of C(tau) around its time average is multiplied by
    the decay envelope; Gaussian measurement noise of rms ``sigma`` (in
    units of C) is added.
    """
    if not isinstance(cfg, TwoTransitionConfig):
        raise DomainError("cfg must be a TwoTransitionConfig")
    taus = np.asarray(taus, dtype=float)
    coop, mean = larmor_cooperativity(initial, f, cfg, gamma, kappa, n_total, taus)
    y = mean + (coop - mean) * envelope(decay, taus)
    if sigma > 0:
        y = y + np.random.default_rng(np.random.SeedSequence(seed)).normal(0.0, sigma, taus.size)
        yerr = np.full(taus.size, sigma)
    else:
        yerr = None
    return ScanTrace(taus, y, kind="normalized", seed=seed,
                     provenance=f"simulate_larmor decay={decay.kind}", yerr=yerr,
                     meta={"mean_cooperativity": float(mean)})
