"""End-to-end synthetic reproductions of the measurement campaigns.

Each pipeline simulates data with known ("injected") parameters, runs the
matching estimators and reports the recovered values next to the injected
ones and to the published measurement. Products are plain CSV text; all
frequencies in CSV files are in units of 2π·MHz (or 2π·kHz where the
column name says so).
"""

from dataclasses import dataclass, field, replace
import io
import csv
import math

import numpy as np

from . import presets
from .cavity import cooperativity
from .estimate import (
    fit_absorption,
    fit_calibration,
    fit_cooperativity_slope,
    fit_dispersion,
    fit_empty_cavity,
    fit_larmor,
    fit_lorentzian_dip,
    fit_rabi,
    fit_sqrtN,
    normalize_period_mean,
)
from .errors import DomainError
from .fitting import dominant_frequency
from .expsim import NoiseModel, ScanConfig, SequenceTiming, simulate_larmor, simulate_locked, simulate_scan
from .larmor import (
    DecayModel,
    FieldConfig,
    cooperativity_weights,
    larmor_frequency,
    population_harmonics,
    symmetric_outer_mixture,
)
from .units import KHZ, MHZ

MA = 1e-3
US = 1e-6


@dataclass(frozen=True)
class PipelineParams:
    """Injected physics and measurement settings shared by all pipelines."""

    g: float = presets.G_SINGLE
    n_eff: float = presets.N_EFF
    gamma_eff: float = presets.GAMMA_EFF
    noise: NoiseModel = NoiseModel()
    scan: ScanConfig = ScanConfig()
    timing: SequenceTiming = SequenceTiming()
    n_sequences: int = 20000
    locked_grid: tuple = (-40 * MHZ, 40 * MHZ, 161)
    detunings: tuple = tuple(np.linspace(-60, 60, 17) * MHZ)
    repeats: int = 5
    coop_n: tuple = (150.0, 300.0, 450.0, 600.0, 800.0, 1000.0, 1250.0, 1523.0)
    sqrtn_n: tuple = (243.0, 400.0, 601.0, 750.0, 914.0, 1200.0, 1523.0)
    rabi_family_n: tuple = presets.RABI_FAMILY_N
    larmor_taus: tuple = (0.0, 120e-6, 0.5e-6)
    larmor_sigma: float = 0.03
    larmor_n_total: float = presets.N_EFF
    tau_e: float = 1.7e-3
    b_field: float = presets.B_FIELD_9A
    currents: tuple = presets.CALIBRATION_CURRENTS
    omega_z: float = presets.OMEGA_Z
    larmor_slope: float = presets.LARMOR_SLOPE
    normalize_period: bool = False
    profile: bool = True
    kinds: tuple = ("exponential", "gaussian")

    def system(self, n_eff=None):
        return presets.coupled_system(self.n_eff if n_eff is None else n_eff, self.gamma_eff, self.g)

    def grid(self):
        lo, hi, n = self.locked_grid
        return np.linspace(lo, hi, int(n))

    def taus(self):
        lo, hi, step = self.larmor_taus
        return np.arange(int(round((hi - lo) / step)) + 1) * step + lo

    def fast(self):
        """Settings for repeated round-trip trials (no profiles, one envelope)."""
        return replace(self, profile=False, kinds=("exponential",))


@dataclass
class Recovered:
    name: str
    value: float
    error: float
    injected: float | None = None
    unit: str = ""
    scale: float = 1.0
    reference: str | None = None

    def within(self, k=3.0, rtol=1e-6):
        """Injected value inside k standard errors (or rtol when error is zero)."""
        if self.injected is None:
            return True
        diff = abs(self.value - self.injected)
        return diff <= k * self.error + rtol * abs(self.injected)

    def relative_error(self):
        return abs(self.value / self.injected - 1.0) if self.injected else math.nan


@dataclass
class PipelineResult:
    name: str
    seed: int
    noiseless: bool
    recovered: dict = field(default_factory=dict)
    products: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, name, value, error, injected=None, unit="", scale=1.0, reference=None):
        self.recovered[name] = Recovered(name, float(value), float(error),
                                         None if injected is None else float(injected),
                                         unit, scale, reference)

    def round_trip(self, k=3.0):
        """True when every injected parameter lies within k standard errors."""
        return all(r.within(k) for r in self.recovered.values() if r.injected is not None)

    def summary_rows(self):
        rows = []
        for r in self.recovered.values():
            ref = presets.REFERENCE.get(r.reference) if r.reference else None
            rows.append({
                "parameter": r.name,
                "unit": r.unit,
                "injected": "" if r.injected is None else _fmt(r.injected / r.scale),
                "recovered": _fmt(r.value / r.scale),
                "error": _fmt(r.error / r.scale),
                "reference": "" if ref is None else _fmt(ref[0] / r.scale),
                "reference_minus": "" if ref is None else _fmt(ref[1] / r.scale),
                "reference_plus": "" if ref is None else _fmt(ref[2] / r.scale),
            })
        return rows

    def summary_csv(self):
        rows = self.summary_rows()
        cols = ["parameter", "unit", "injected", "recovered", "error", "reference",
                "reference_minus", "reference_plus"]
        return _csv(cols, [[r[c] for c in cols] for r in rows])

    def summary_text(self):
        lines = [f"pipeline {self.name} (seed {self.seed}{', noiseless' if self.noiseless else ''})"]
        for r in self.summary_rows():
            ref = f"  published {r['reference']} -{r['reference_minus']} +{r['reference_plus']}" if r["reference"] else ""
            inj = f"  injected {r['injected']}" if r["injected"] else ""
            lines.append(f"  {r['parameter']:<18s} {r['recovered']} ± {r['error']} {r['unit']}{inj}{ref}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _fmt(v):
    return f"{v:.10g}"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    return buf.getvalue()


def _seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------------------
# cavity-scan campaigns
# ---------------------------------------------------------------------------

def _scan_point(sys, delta, p, seed, noiseless):
    scan = replace(p.scan, n_average=p.scan.n_average * p.repeats)
    tr = simulate_scan(sys, delta, scan, p.noise.with_seed(seed), p.timing, noiseless=noiseless)
    return fit_lorentzian_dip(tr)


def _absorption_scans(p, seed, noiseless):
    sys = p.system()
    deltas = np.asarray(p.detunings, dtype=float)
    fits = [_scan_point(sys, d, p, s, noiseless) for d, s in zip(deltas, _seeds(seed, deltas.size))]
    return sys, deltas, fits


def run_fig5a(p, seed, noiseless=False):
    """kappa' versus probe detuning from averaged cavity scans; absorption fit."""
    sys, deltas, fits = _absorption_scans(p, seed, noiseless)
    kp = np.array([f["hwhm"] for f in fits])
    kp_err = np.array([f.error("hwhm") for f in fits])
    sigma = None if noiseless else kp_err
    est = fit_absorption(deltas, kp, sigma)
    res = PipelineResult("fig5a", seed, noiseless)
    res.estimates["absorption"] = est
    res.add("g_n", est["g_n"], est.error("g_n"), sys.g_n, "MHz", MHZ, "g_n_absorption")
    res.add("gamma_eff", est["gamma"], est.error("gamma"), sys.gamma_eff, "MHz", MHZ, "gamma_absorption")
    res.add("kappa", est["kappa"], est.error("kappa"), sys.rates.kappa, "MHz", MHZ, "kappa_absorption")
    res.products["kappa_prime.csv"] = _csv(
        ["detuning_mhz", "kappa_prime_mhz", "kappa_prime_err_mhz"],
        zip(deltas / MHZ, kp / MHZ, kp_err / MHZ))
    return res


def run_fig5b(p, seed, noiseless=False):
    """Resonance shift versus probe detuning; dispersion fit."""
    sys, deltas, fits = _absorption_scans(p, seed, noiseless)
    shift = -np.array([f["center"] for f in fits])
    err = np.array([f.error("center") for f in fits])
    est = fit_dispersion(deltas, shift, None if noiseless else err)
    res = PipelineResult("fig5b", seed, noiseless)
    res.estimates["dispersion"] = est
    res.add("g_n", est["g_n"], est.error("g_n"), sys.g_n, "MHz", MHZ, "g_n_dispersion")
    res.add("gamma_eff", est["gamma"], est.error("gamma"), sys.gamma_eff, "MHz", MHZ, "gamma_dispersion")
    res.products["shift.csv"] = _csv(["detuning_mhz", "shift_mhz", "shift_err_mhz"],
                                     zip(deltas / MHZ, shift / MHZ, err / MHZ))
    return res


def run_fig6(p, seed, noiseless=False):
    """Cooperativity from kappa'(0) = kappa(1 + 2C) for several ion numbers."""
    ns = np.asarray(p.coop_n, dtype=float)
    seeds = _seeds(seed, ns.size + 1)
    empty = _scan_point(p.system(0.0), 0.0, p, seeds[0], noiseless)
    kap, kap_err = empty["hwhm"], empty.error("hwhm")
    coop, coop_err = [], []
    for n, s in zip(ns, seeds[1:]):
        f = _scan_point(p.system(n), 0.0, p, s, noiseless)
        c = 0.5 * (f["hwhm"] / kap - 1.0)
        dc = 0.5 * math.hypot(f.error("hwhm") / kap, f["hwhm"] * kap_err / kap**2)
        coop.append(c)
        coop_err.append(dc)
    coop, coop_err = np.array(coop), np.array(coop_err)
    est = fit_cooperativity_slope(ns, coop, None if noiseless else coop_err)
    sys = p.system(1.0)
    res = PipelineResult("fig6", seed, noiseless)
    res.estimates["slope"] = est
    res.add("c_per_n", est["slope"], est.error("slope"), cooperativity(sys), "1", 1.0, "c_per_n")
    res.add("kappa", kap, kap_err, sys.rates.kappa, "MHz", MHZ, "kappa_measured")
    res.products["cooperativity.csv"] = _csv(["n_eff", "cooperativity", "cooperativity_err"],
                                             zip(ns, coop, coop_err))
    return res


# ---------------------------------------------------------------------------
# locked-cavity spectra
# ---------------------------------------------------------------------------

def _locked(p, n, seed, noiseless):
    return simulate_locked(p.system(n), p.grid(), p.timing, p.noise.with_seed(seed),
                           p.n_sequences, noiseless=noiseless)


def _rabi_family(p, ns, seed, noiseless):
    seeds = _seeds(seed, len(ns) + 1)
    empty_tr = _locked(p, 0.0, seeds[0], noiseless)
    empty = fit_empty_cavity(empty_tr)
    traces, fits = [], []
    for n, s in zip(ns, seeds[1:]):
        tr = _locked(p, n, s, noiseless)
        traces.append(tr)
        fits.append(fit_rabi(tr, p.gamma_eff, empty["kappa"], empty["kappa1"]))
    return empty_tr, empty, traces, fits


def run_fig4(p, seed, noiseless=False):
    """Empty and coupled spectra along Delta = Delta_c."""
    empty_tr, empty, (tr,), (fit,) = _rabi_family(p, [p.n_eff], seed, noiseless)
    sys = p.system()
    res = PipelineResult("fig4", seed, noiseless)
    res.estimates.update(empty=empty, rabi=fit)
    res.add("kappa", empty["kappa"], empty.error("kappa"), sys.rates.kappa, "MHz", MHZ, "kappa_measured")
    res.add("kappa1", empty["kappa1"], empty.error("kappa1"), sys.rates.kappa1, "MHz", MHZ)
    res.add("g_n", fit["g_n"], fit.error("g_n"), sys.g_n, "MHz", MHZ, "g_n_rabi")
    res.products["spectra.csv"] = _csv(
        ["detuning_mhz", "reflectivity_empty", "reflectivity_empty_err",
         "reflectivity_coupled", "reflectivity_coupled_err"],
        zip(empty_tr.x / MHZ, empty_tr.y, empty_tr.yerr, tr.y, tr.yerr))
    return res


def run_fig7(p, seed, noiseless=False):
    """Rabi spectra for a family of ion numbers."""
    ns = [n for n in p.rabi_family_n if n > 0]
    empty_tr, empty, traces, fits = _rabi_family(p, ns, seed, noiseless)
    res = PipelineResult("fig7", seed, noiseless)
    rates = p.system().rates
    res.add("kappa", empty["kappa"], empty.error("kappa"), rates.kappa, "MHz", MHZ)
    for n, f in zip(ns, fits):
        res.estimates[f"rabi_n{int(n)}"] = f
        res.add(f"g_n[{int(n)}]", f["g_n"], f.error("g_n"), p.system(n).g_n, "MHz", MHZ)
    cols = ["detuning_mhz", "reflectivity_n0"] + [f"reflectivity_n{int(n)}" for n in ns]
    res.products["spectra.csv"] = _csv(cols, zip(empty_tr.x / MHZ, empty_tr.y, *[t.y for t in traces]))
    return res


def run_fig8(p, seed, noiseless=False):
    """g_N versus N from Rabi spectra and the square-root fit."""
    ns = list(p.sqrtn_n)
    _, empty, _, fits = _rabi_family(p, ns, seed, noiseless)
    g_n = np.array([f["g_n"] for f in fits])
    err = np.array([f.error("g_n") for f in fits])
    est = fit_sqrtN(ns, g_n, None if noiseless else err)
    res = PipelineResult("fig8", seed, noiseless)
    res.estimates["sqrtN"] = est
    res.add("g", est["g"], est.error("g"), p.g, "MHz", MHZ, "g_single")
    res.products["coupling.csv"] = _csv(["n_eff", "g_n_mhz", "g_n_err_mhz"],
                                        zip(ns, g_n / MHZ, err / MHZ))
    return res


# ---------------------------------------------------------------------------
# Larmor campaigns
# ---------------------------------------------------------------------------

def _larmor_injected(p, f):
    cfg = presets.two_transition(p.g)
    w_half, w_3half = cooperativity_weights(cfg, p.gamma_eff, p.system().rates.kappa, p.larmor_n_total)
    cos, _ = population_harmonics(symmetric_outer_mixture(), f)
    a = w_half * cos[2, 1] + w_3half * cos[3, 1]
    b = w_half * cos[2, 2] + w_3half * cos[3, 2]
    c = w_half * cos[2, 0] + w_3half * cos[3, 0]
    return cfg, a, b, c


def _larmor_trace(p, f, decay, seed, noiseless):
    cfg = presets.two_transition(p.g)
    return simulate_larmor(symmetric_outer_mixture(), f, cfg, decay, p.taus(), p.gamma_eff,
                           p.system().rates.kappa, p.larmor_n_total,
                           sigma=0.0 if noiseless else p.larmor_sigma, seed=seed)


def run_fig9a(p, seed, noiseless=False):
    """Damped Larmor oscillation of the cooperativity (B_x = B_z)."""
    f = FieldConfig.from_field(p.b_field, p.b_field)
    decay = DecayModel("exponential", p.tau_e)
    tr = _larmor_trace(p, f, decay, seed, noiseless)
    y = tr.y
    sigma = None if noiseless else p.larmor_sigma
    res = PipelineResult("fig9a", seed, noiseless)
    if p.normalize_period:
        w = dominant_frequency(tr.x, y)
        y = normalize_period_mean(tr.x, y, w)
        sigma = None
        res.notes.append("trace normalized to the mean of each oscillation period; "
                         "a, b, c refer to the normalized trace")
    fits = fit_larmor(tr.x, y, sigma, kinds=p.kinds, profile=p.profile and not noiseless)
    res.estimates.update(fits)
    _, a, b, c = _larmor_injected(p, f)
    wl = larmor_frequency(f)
    ex = fits["exponential"]
    res.add("omega_l", ex["omega_l"], ex.error("omega_l"), wl, "kHz", KHZ)
    if not p.normalize_period:
        res.add("a", ex["a"], ex.error("a"), a)
        res.add("b", ex["b"], ex.error("b"), b)
        res.add("c", ex["c"], ex.error("c"), c)
    res.add("decay_rate", ex["decay_rate"], ex.error("decay_rate"), 1.0 / p.tau_e, "1/ms", 1e3)
    res.add("tau_e", ex["timescale"], ex.error("timescale"), None, "ms", 1e-3, "tau_e")
    for kind, est in fits.items():
        if "timescale_bounds" in est.extra:
            lo, hi = est.extra["timescale_bounds"]
            res.notes.append(f"{kind}: timescale {est['timescale'] * 1e3:.4g} ms, "
                             f"profile interval [{lo * 1e3:.4g}, {hi * 1e3:.4g}] ms, "
                             f"chi2 {est.extra['chi2']:.4g}")
    cols = ["tau_us", "cooperativity"] + ([] if noiseless else ["cooperativity_err"])
    rows = zip(tr.x / US, y) if noiseless else zip(tr.x / US, y, np.full(y.size, p.larmor_sigma))
    res.products["larmor.csv"] = _csv(cols, rows)
    return res


def run_fig9b(p, seed, noiseless=False):
    """Cooperativity with the field along the quantization axis only."""
    f = FieldConfig.from_field(0.0, p.b_field)
    tr = _larmor_trace(p, f, DecayModel(), seed, noiseless)
    mean = float(np.mean(tr.y))
    sem = 0.0 if noiseless else p.larmor_sigma / math.sqrt(tr.y.size)
    res = PipelineResult("fig9b", seed, noiseless)
    res.add("mean_cooperativity", mean, sem, tr.meta["mean_cooperativity"], "1", 1.0,
            "mean_cooperativity_9b")
    res.products["larmor.csv"] = _csv(["tau_us", "cooperativity", "normalized"],
                                      zip(tr.x / US, tr.y, tr.y / mean))
    return res


def run_fig10(p, seed, noiseless=False):
    """Larmor frequency versus transverse coil current; calibration fit."""
    currents = np.asarray(p.currents, dtype=float)
    seeds = _seeds(seed, currents.size)
    decay = DecayModel("exponential", p.tau_e)
    wl, wl_err, rows = [], [], []
    for cur, s in zip(currents, seeds):
        f = FieldConfig(p.larmor_slope * cur, p.omega_z)
        tr = _larmor_trace(p, f, decay, s, noiseless)
        fit = fit_larmor(tr.x, tr.y, None if noiseless else p.larmor_sigma,
                         kinds=("exponential",), profile=False)["exponential"]
        wl.append(fit["omega_l"])
        wl_err.append(fit.error("omega_l"))
        rows.extend((cur / MA, t / US, c) for t, c in zip(tr.x, tr.y))
    wl, wl_err = np.array(wl), np.array(wl_err)
    est = fit_calibration(currents, wl, None if noiseless else wl_err)
    res = PipelineResult("fig10", seed, noiseless)
    res.estimates["calibration"] = est
    res.add("omega_z", est["omega_z"], est.error("omega_z"), p.omega_z, "kHz", KHZ, "omega_z")
    res.add("slope", est["a"], est.error("a"), p.larmor_slope, "kHz/mA", KHZ / MA, "larmor_slope")
    res.add("b_z", est["b_z"], est.error("b_z"), None, "G", 1e-4, "b_z")
    res.add("b_x_per_amp", est["b_x_per_amp"], est.error("b_x_per_amp"), None, "G/A", 1e-4,
            "b_x_per_amp")
    res.products["traces.csv"] = _csv(["current_ma", "tau_us", "cooperativity"], rows)
    res.products["calibration.csv"] = _csv(["current_ma", "omega_l_khz", "omega_l_err_khz"],
                                           zip(currents / MA, wl / KHZ, wl_err / KHZ))
    return res


PIPELINES = {
    "fig4": run_fig4,
    "fig5a": run_fig5a,
    "fig5b": run_fig5b,
    "fig6": run_fig6,
    "fig7": run_fig7,
    "fig8": run_fig8,
    "fig9a": run_fig9a,
    "fig9b": run_fig9b,
    "fig10": run_fig10,
}


def run_pipeline(name, params=None, seed=0, noiseless=False):
    try:
        fn = PIPELINES[name]
    except KeyError:
        raise DomainError(f"unknown pipeline {name!r}; choose from {', '.join(PIPELINES)}") from None
    return fn(params or PipelineParams(), seed, noiseless)
