import math
import warnings

import numpy as np
import pytest

from ioncavity import presets
from ioncavity.cavity import effective_response, reflectivity
from ioncavity.errors import DegenerateTraceError, DomainError, EmptyTraceError
from ioncavity.expsim import (
    NoiseModel,
    SaturationWarning,
    ScanConfig,
    SequenceTiming,
    counts_per_window,
    normalize_counts,
    simulate_larmor,
    simulate_locked,
    simulate_scan,
)
from ioncavity.larmor import (
    DecayModel,
    FieldConfig,
    fit_two_harmonic,
    kappa_prime_two_transition,
    symmetric_outer_mixture,
)
from ioncavity.units import KHZ, MHZ

SMALL = ScanConfig(span=80e6, rate=30.0, n_average=100, samples_per_scan=201)


def test_timing_and_window():
    t = SequenceTiming()
    assert t.detection_window == pytest.approx(1.3e-6)
    assert counts_per_window(NoiseModel(), t) == pytest.approx(5e6 * 1.3e-6 * 0.16)
    with pytest.raises(DomainError):
        SequenceTiming(cool=10e-6, pump=12e-6, probe=1.4e-6, total=20e-6)
    with pytest.raises(DomainError):
        SequenceTiming(apd_delay=2e-6)
    with pytest.raises(DomainError):
        NoiseModel(detection_efficiency=0.0)


def test_scan_mean_matches_reflectivity():
    s = presets.coupled_system(n_eff=0)
    scan = ScanConfig(span=40e6, n_average=1_000_000, samples_per_scan=81)
    tr = normalize_counts(simulate_scan(s, 0.0, scan, NoiseModel(rng_seed=3)))
    r = reflectivity(s.rates, effective_response(s, 0.0, tr.x))
    assert np.max(np.abs(tr.y - r) / r) < 5e-3


def test_scan_noiseless_exact_and_empty_dip():
    s = presets.coupled_system(n_eff=0)
    tr = simulate_scan(s, 0.0, SMALL, noiseless=True)
    r = reflectivity(s.rates, effective_response(s, 0.0, tr.x))
    np.testing.assert_allclose(tr.y / tr.meta["counts_per_unit_reflectivity"], r, rtol=1e-12)
    i = int(np.argmin(tr.y))
    assert tr.x[i] == pytest.approx(0.0, abs=tr.x[1] - tr.x[0])


def test_determinism():
    s = presets.coupled_system()
    a = simulate_scan(s, 0.0, SMALL, NoiseModel(rng_seed=9))
    b = simulate_scan(s, 0.0, SMALL, NoiseModel(rng_seed=9))
    c = simulate_scan(s, 0.0, SMALL, NoiseModel(rng_seed=10))
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)
    grid = np.linspace(-30, 30, 31) * MHZ
    noise = NoiseModel(rng_seed=4, lock_error=0.2 * MHZ, reference_threshold=0.8)
    la = simulate_locked(s, grid, noise=noise, n_sequences=2000)
    lb = simulate_locked(s, grid, noise=noise, n_sequences=2000)
    assert np.array_equal(la.y, lb.y)


def test_poisson_statistics_of_single_scans():
    s = presets.coupled_system(n_eff=0)
    scan = ScanConfig(span=40e6, n_average=10_000, samples_per_scan=21)
    tr = simulate_scan(s, 0.0, scan, NoiseModel(rng_seed=1), keep_raw=True)
    raw = tr.meta["raw"]
    assert raw.shape == (10_000, 21)
    mean = raw.mean(axis=0)
    var = raw.var(axis=0, ddof=1)
    assert np.mean(var / mean) == pytest.approx(1.0, rel=0.05)


def test_zero_rate_rejected():
    with pytest.raises(DegenerateTraceError):
        simulate_scan(presets.coupled_system(), 0.0, SMALL, NoiseModel(mean_photon_rate=0.0))


def test_saturation_warning():
    s = presets.coupled_system(n_eff=0)
    with pytest.warns(SaturationWarning):
        simulate_scan(s, 0.0, SMALL, NoiseModel(mean_photon_rate=1e10))
    with warnings.catch_warnings():
        warnings.simplefilter("error", SaturationWarning)
        tr = simulate_scan(s, 0.0, SMALL, NoiseModel())
    assert tr.meta["mean_intracavity_photons"] < 1


def _local_minima(y):
    return np.flatnonzero((y[1:-1] < y[:-2]) & (y[1:-1] < y[2:])) + 1


def test_locked_spectrum_shapes():
    grid = np.linspace(-40, 40, 401) * MHZ
    full = simulate_locked(presets.coupled_system(), grid, noiseless=True)
    assert len(_local_minima(full.y)) == 2
    empty = simulate_locked(presets.coupled_system(n_eff=0), grid, noiseless=True)
    mins = _local_minima(empty.y)
    assert len(mins) == 1 and grid[mins[0]] == 0.0


def test_threshold_zero_keeps_everything():
    grid = np.linspace(-20, 20, 11) * MHZ
    tr = simulate_locked(presets.coupled_system(), grid, n_sequences=500,
                         noise=NoiseModel(lock_error=0.3 * MHZ))
    assert np.all(tr.meta["kept"] == 500)


def test_postselection_does_not_bias_without_drift():
    s = presets.coupled_system()
    grid = np.linspace(-30, 30, 61) * MHZ
    r = reflectivity(s.rates, effective_response(s, grid, grid))
    noise = NoiseModel(rng_seed=2, reference_threshold=0.95, reference_noise=0.05)
    tr = simulate_locked(s, grid, noise=noise, n_sequences=20000)
    assert np.all(tr.meta["kept"] < 20000)
    z = (tr.y - r) / tr.yerr
    assert abs(np.mean(z)) < 4 / math.sqrt(grid.size)
    assert np.std(z) == pytest.approx(1.0, abs=0.3)


def test_postselection_can_empty_a_point():
    with pytest.raises(EmptyTraceError):
        simulate_locked(presets.coupled_system(), [0.0], n_sequences=50,
                        noise=NoiseModel(reference_threshold=2.0))


def _larmor(f, decay=DecayModel(), sigma=0.0, taus=None):
    taus = np.arange(0, 120.5e-6, 0.5e-6) if taus is None else taus
    return simulate_larmor(symmetric_outer_mixture(), f, presets.two_transition(), decay, taus,
                           presets.GAMMA_EFF, presets.rates().kappa, presets.N_EFF, sigma=sigma,
                           seed=5)


def test_larmor_static_without_transverse_field():
    tr = _larmor(FieldConfig(0.0, 150 * KHZ))
    assert np.ptp(tr.y) < 1e-12
    kappa = presets.rates().kappa
    cfg = presets.two_transition().with_populations(0.0, 0.5 * presets.N_EFF)
    static = 0.5 * (kappa_prime_two_transition(cfg, presets.GAMMA_EFF, kappa) / kappa - 1)
    assert tr.y[0] == pytest.approx(static, rel=1e-12)


def test_larmor_trace_is_two_harmonic():
    f = FieldConfig(150 * KHZ, 150 * KHZ)
    tr = _larmor(f)
    res = fit_two_harmonic(tr.x, tr.y)
    assert math.sqrt(res.cost / tr.y.size) < 1e-9
    assert abs(res["omega"]) == pytest.approx(math.sqrt(2) * 150 * KHZ, rel=1e-8)
    # at tau = 0 the populations are the prepared ones
    assert tr.y[0] == pytest.approx(_larmor(FieldConfig(0.0, 150 * KHZ)).y[0], rel=1e-12)


def test_larmor_decay_and_noise():
    f = FieldConfig(150 * KHZ, 150 * KHZ)
    clean = _larmor(f)
    mean = clean.meta["mean_cooperativity"]
    damped = _larmor(f, DecayModel("exponential", 50e-6))
    late = damped.x > 100e-6
    assert np.max(np.abs(damped.y[late] - mean)) < np.max(np.abs(clean.y - mean)) * math.exp(-2)
    noisy = _larmor(f, sigma=0.03)
    assert np.std(noisy.y - clean.y) == pytest.approx(0.03, rel=0.15)
    assert np.array_equal(noisy.y, _larmor(f, sigma=0.03).y)
