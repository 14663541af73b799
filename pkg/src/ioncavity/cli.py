"""Command-line front end.

Every command prints a short human-readable summary and writes CSV tables
plus a JSON manifest into the output directory (``--output-dir``, the
``[run] output_dir`` config key, ``$IONCAVITY_OUTPUT_DIR`` or the working
directory, in that order). Frequencies on the command line follow the
``2π ×`` convention: ``--g 0.53MHz`` means g = 2π × 0.53 MHz. Pass
``--angular`` to read them as angular rates instead. CSV columns ending in
``_mhz`` or ``_khz`` hold values in units of 2π·MHz or 2π·kHz (ordinary
frequencies).

Exit status: 0 success, 2 usage error, 3 bad input data or configuration,
4 numerical failure (non-convergence, unphysical fit).
"""

from dataclasses import replace
import argparse
import csv
import datetime
import hashlib
import io
import json
import logging
import math
import os
import platform
import sys
import warnings

import numpy as np
import scipy

from . import __version__
from .cavity import (
    CoupledSystem,
    cooperativity,
    effective_response,
    is_strongly_coupled,
    rates_from_kappa,
    reflectivity,
)
from .config import OUTPUT_ENV, RunConfig, load_config
from .crystal import count_uncertainty, effective_ion_count, effective_ion_count_thin, total_ion_count
from .errors import DataError, DomainError, IonCavityError, NumericError, UnsupportedInputError
from .estimate import (
    fit_absorption,
    fit_calibration,
    fit_dispersion,
    fit_empty_cavity,
    fit_larmor,
    fit_lorentzian_dip,
    fit_rabi,
)
from .expsim import simulate_larmor, simulate_locked, simulate_scan
from .larmor import SpinState, larmor_frequency, populations_trace, symmetric_outer_mixture
from .motion import effective_gamma, thermal_response, validity_check
from .pipelines import PIPELINES, run_pipeline
from .presets import two_transition
from .trace import ScanTrace, read_csv_columns
from .units import KHZ, MHZ, parse_quantity

log = logging.getLogger("ioncavity")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
US = 1e-6


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return f"{float(v):.10g}"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer, int, bool, str)) or obj is None:
        return obj.item() if isinstance(obj, np.generic) else obj
    return str(obj)


class Run:
    """Collects the tables of one command and writes them with a manifest."""

    def __init__(self, command, args, cfg):
        self.command = command
        self.stem = command
        self.args = args
        self.cfg = cfg
        self.files = {}
        self.results = {}
        self.lines = []

    def table(self, name, header, rows):
        self.files[name] = csv_text(header, rows)

    def text(self, name, body):
        self.files[name] = body

    def say(self, line=""):
        self.lines.append(line)

    def write(self):
        out = self.cfg.output_dir(self.args.output_dir)
        os.makedirs(out, exist_ok=True)
        written = {}
        for name, body in self.files.items():
            path = os.path.join(out, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(body)
            written[name] = hashlib.sha256(body.encode()).hexdigest()
        manifest = {
            "command": self.command,
            "argv": list(self.args.argv),
            "seed": self.args.seed if self.args.seed is not None else self.cfg.seed,
            "config_source": self.cfg.source,
            "config": self.cfg.as_dict(),
            "angular_input": bool(self.args.angular or self.cfg.angular),
            "results": self.results,
            "files": written,
            "versions": {
                "ioncavity": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
        mpath = os.path.join(out, f"{self.stem}.manifest.json")
        with open(mpath, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name in self.files:
            self.say(f"wrote {os.path.join(out, name)}")
        self.say(f"wrote {mpath}")


def _mhz(v):
    return f"2π × {v / MHZ:.4g} MHz"


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _freq(args, text, cfg):
    return parse_quantity(text, "frequency", angular=bool(args.angular or cfg.angular))


def _optional(args, name, kind, cfg, default):
    text = getattr(args, name)
    if text is None:
        return default
    if kind == "frequency":
        return _freq(args, text, cfg)
    return parse_quantity(text, kind)


def _seed(args, cfg):
    return cfg.seed if args.seed is None else args.seed


def _grid(args, cfg):
    span = _freq(args, args.span, cfg)
    if not span > 0 or args.points < 3:
        raise UsageError("--span must be positive and --points at least 3")
    return np.linspace(-span, span, args.points)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_rates(args, cfg, run):
    r = cfg.rates()
    rows = [
        ("round_trip_time", r.tau / 1e-9, "ns"),
        ("kappa1", r.kappa1 / MHZ, "2pi*MHz"),
        ("kappa2", r.kappa2 / MHZ, "2pi*MHz"),
        ("kappa_loss", r.kappa_loss / MHZ, "2pi*MHz"),
        ("kappa", r.kappa / MHZ, "2pi*MHz"),
        ("fsr", r.fsr / 1e9, "GHz"),
        ("finesse", r.finesse, "1"),
        ("rayleigh_range", r.rayleigh_z0 / 1e-3, "mm"),
    ]
    run.table("rates.csv", ["quantity", "value", "unit"], rows)
    run.results.update({k: v for k, v, _ in rows})
    run.say(f"kappa = {_mhz(r.kappa)}  (kappa1 {_mhz(r.kappa1)}, kappa2 {_mhz(r.kappa2)}, "
            f"losses {_mhz(r.kappa_loss)})")
    run.say(f"FSR = {r.fsr / 1e9:.4g} GHz, finesse = {r.finesse:.0f}")


def cmd_coupling(args, cfg, run):
    t = cfg.values["transition"]
    g = _optional(args, "g", "frequency", cfg, t["g"])
    n = t["n_eff"] if args.n is None else args.n
    gamma = _optional(args, "gamma_eff", "frequency", cfg, t["gamma_eff"])
    sys_ = cfg.system(n_eff=n, gamma_eff=gamma)
    rates = sys_.rates
    if args.kappa is not None:
        kap = _freq(args, args.kappa, cfg)
        rates = rates_from_kappa(kap, min(rates.kappa1, kap))
    sys_ = CoupledSystem(g, n, gamma, rates)
    kap = sys_.rates.kappa
    c = cooperativity(sys_)
    strong = is_strongly_coupled(sys_)
    n_star = max(kap, gamma) ** 2 / g**2 if g > 0 else math.inf
    rows = [
        ("g", g / MHZ, "2pi*MHz"),
        ("n_eff", n, "1"),
        ("g_n", sys_.g_n / MHZ, "2pi*MHz"),
        ("kappa", kap / MHZ, "2pi*MHz"),
        ("gamma_eff", gamma / MHZ, "2pi*MHz"),
        ("cooperativity", c, "1"),
        ("strong_coupling", strong, "bool"),
        ("threshold_n", n_star, "1"),
    ]
    run.table("coupling.csv", ["quantity", "value", "unit"], rows)
    run.results.update({k: v for k, v, _ in rows})
    run.say(f"g_N = g sqrt(N) = {_mhz(sys_.g_n)}  (g = {_mhz(g)}, N = {n:g})")
    run.say(f"C = g_N^2 / (2 kappa gamma') = {c:.4g}  (kappa = {_mhz(kap)}, gamma' = {_mhz(gamma)})")
    verdict = "strongly coupled" if strong else "not strongly coupled"
    run.say(f"{verdict}: g_N {'>' if strong else '<='} max(kappa, gamma'); "
            f"threshold reached for N >= {n_star:.0f}")


def cmd_effn(args, cfg, run):
    c = cfg.crystal()
    m = cfg.mode()
    v = cfg.values["crystal"]
    n = effective_ion_count(c, m)
    rel = count_uncertainty(v["rel_density_error"], v["imaging_resolution"], c, v["rel_pump_error"])
    n_tot = total_ion_count(c)
    n_thin = c.pump_efficiency * effective_ion_count_thin(c.density, c.half_length, m.waist)
    rows = [
        ("n_eff", n, n * rel),
        ("n_total", n_tot, ""),
        ("n_eff_thin_formula", n_thin, ""),
        ("relative_uncertainty", rel, ""),
    ]
    run.table("effn.csv", ["quantity", "value", "error"], rows)
    run.results.update(n_eff=n, n_eff_error=n * rel, n_total=n_tot, relative_uncertainty=rel)
    run.say(f"N = {n:.0f} ± {n * rel:.0f}  (δN/N = {100 * rel:.2f} %)")
    run.say(f"ions in crystal: {n_tot:.0f}; thin-crystal estimate rho pi w0^2 L / 4 = {n_thin:.0f}")


def cmd_spectrum(args, cfg, run):
    sys_ = cfg.system(n_eff=args.n)
    x = _grid(args, cfg)
    if args.mode == "rabi":
        delta, delta_c = x, x
    else:
        delta, delta_c = _freq(args, args.delta, cfg), x
    if args.thermal:
        resp = thermal_response(sys_, delta, delta_c, cfg.thermal())
    else:
        resp = effective_response(sys_, delta, delta_c)
    r = reflectivity(sys_.rates, resp)
    kp = np.broadcast_to(resp.kappa_prime, x.shape)
    shift = np.broadcast_to(np.asarray(delta_c) - resp.delta_c_prime, x.shape)
    run.table("spectrum.csv", ["detuning_mhz", "reflectivity", "kappa_prime_mhz", "shift_mhz"],
              zip(x / MHZ, r, kp / MHZ, shift / MHZ))
    i = int(np.argmin(r))
    run.results.update(minimum_detuning_mhz=x[i] / MHZ, minimum_reflectivity=r[i])
    what = "Delta = Delta_c" if args.mode == "rabi" else f"cavity scan at Delta = {_mhz(delta)}"
    run.say(f"{what}: N = {sys_.n_eff:g}, g_N = {_mhz(sys_.g_n)}, {x.size} points")
    run.say(f"deepest reflectivity {r[i]:.4g} at detuning {_mhz(x[i])}")


def cmd_thermal(args, cfg, run):
    th = cfg.thermal()
    if args.temperature is not None:
        th = replace(th, temperature=parse_quantity(args.temperature, "temperature"))
    # broaden the natural linewidth, not the already effective one
    sys_ = cfg.system(gamma_eff=cfg.values["transition"]["gamma"])
    eg = effective_gamma(sys_, th)
    val = validity_check(sys_, th)
    x = np.linspace(-3 * sys_.gamma_eff, 3 * sys_.gamma_eff, 121)
    hot = thermal_response(sys_, x, 0.0, th)
    cold = effective_response(sys_, x, 0.0)
    run.table("thermal.csv",
              ["detuning_mhz", "kappa_prime_mhz", "kappa_prime_rest_mhz", "shift_mhz", "shift_rest_mhz"],
              zip(x / MHZ, hot.kappa_prime / MHZ, cold.kappa_prime / MHZ,
                  -hot.delta_c_prime / MHZ, -cold.delta_c_prime / MHZ))
    run.results.update(temperature=th.temperature, doppler_rate_mhz=th.doppler_rate / MHZ,
                       gamma_fitted_mhz=eg.fitted / MHZ, gamma_closed_form_mhz=eg.closed_form / MHZ,
                       validity_margin=val.margin, valid=val.valid)
    run.say(f"T = {th.temperature * 1e3:.4g} mK: k v_D = {_mhz(th.doppler_rate)}")
    run.say(f"gamma' fitted {_mhz(eg.fitted)}, closed form {_mhz(eg.closed_form)} "
            f"(rest frame {_mhz(sys_.gamma_eff)})")
    run.say(f"Doppler shift is {'small' if val.valid else 'NOT small'} against the coupled rates "
            f"(margin {val.margin:.3g}, required {val.threshold:g})")


def _initial(name):
    if name == "symmetric":
        return symmetric_outer_mixture()
    m = {"plus32": 1.5, "plus12": 0.5, "minus12": -0.5, "minus32": -1.5}[name]
    return SpinState.basis(m)


def cmd_larmor(args, cfg, run):
    f = cfg.field()
    taus = cfg.taus()
    initial = _initial(args.initial)
    lv = cfg.values["larmor"]
    sys_ = cfg.system()
    cfg2 = two_transition(cfg.values["transition"]["g"])
    tr = simulate_larmor(initial, f, cfg2, cfg.decay(), taus, sys_.gamma_eff, sys_.rates.kappa,
                         lv["n_total"])
    pops = populations_trace(initial, f, taus, fit=False).populations
    run.table("larmor.csv",
              ["tau_us", "cooperativity", "p_minus_3_2", "p_minus_1_2", "p_plus_1_2", "p_plus_3_2"],
              zip(taus / US, tr.y, *pops.T))
    wl = larmor_frequency(f)
    run.results.update(omega_l_khz=wl / KHZ, mean_cooperativity=tr.meta["mean_cooperativity"])
    run.say(f"omega_L = 2π × {wl / KHZ:.5g} kHz  (omega_x = 2π × {f.omega_x / KHZ:.4g} kHz, "
            f"omega_z = 2π × {f.omega_z / KHZ:.4g} kHz)")
    run.say(f"time-averaged cooperativity {tr.meta['mean_cooperativity']:.4g}")
    try:
        fitted = populations_trace(initial, f, taus, fit=True).fits
        for m, h in zip((-1.5, -0.5, 0.5, 1.5), fitted):
            run.say(f"  P({m:+.1f}) = {h.a:+.4f} cos(wt) {h.b:+.4f} cos(2wt) {h.c:+.4f}")
    except IonCavityError as exc:
        run.say(f"populations are not of the two-harmonic form: {exc}")


def cmd_simulate(args, cfg, run):
    seed = _seed(args, cfg)
    run.stem = f"simulate_{args.kind}"
    noise = cfg.noise().with_seed(seed)
    sys_ = cfg.system(n_eff=args.n)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.kind == "scan":
            delta = _freq(args, args.delta, cfg)
            tr = simulate_scan(sys_, delta, cfg.scan(), noise, noiseless=args.noiseless)
            run.table("simulate_scan.csv", ["detuning_mhz", "counts", "counts_err"],
                      zip(tr.x / MHZ, tr.y, tr.yerr))
            run.results.update(counts_per_unit_reflectivity=tr.meta["counts_per_unit_reflectivity"],
                               n_average=tr.meta["n_average"])
        elif args.kind == "locked":
            tr = simulate_locked(sys_, _grid(args, cfg), noise=noise, n_sequences=args.sequences,
                                 noiseless=args.noiseless)
            run.table("simulate_locked.csv", ["detuning_mhz", "reflectivity", "reflectivity_err"],
                      zip(tr.x / MHZ, tr.y, tr.yerr))
        else:
            lv = cfg.values["larmor"]
            sigma = 0.0 if args.noiseless else lv["sigma"]
            cfg2 = two_transition(cfg.values["transition"]["g"])
            tr = simulate_larmor(_initial(args.initial), cfg.field(), cfg2, cfg.decay(), cfg.taus(),
                                 sys_.gamma_eff, sys_.rates.kappa, lv["n_total"], sigma=sigma,
                                 seed=seed)
            err = tr.yerr if tr.yerr is not None else np.zeros(tr.y.size)
            run.table("simulate_larmor.csv", ["tau_us", "cooperativity", "cooperativity_err"],
                      zip(tr.x / US, tr.y, err))
    for w in caught:
        run.say(f"warning: {w.message}")
    photons = tr.meta.get("mean_intracavity_photons")
    run.results.update(seed=seed, points=len(tr))
    if photons is not None:
        run.results["mean_intracavity_photons"] = photons
    run.say(f"simulated {args.kind} trace: {len(tr)} points, seed {seed}"
            + ("" if photons is None else f", peak intracavity photons {photons:.3g}"))


# input column schemas of `fit` (x column, y column, optional error column)
FIT_SCHEMAS = {
    "dip": ("detuning_mhz", "counts", MHZ),
    "empty": ("detuning_mhz", "reflectivity", MHZ),
    "rabi": ("detuning_mhz", "reflectivity", MHZ),
    "absorption": ("detuning_mhz", "kappa_prime_mhz", MHZ),
    "dispersion": ("detuning_mhz", "shift_mhz", MHZ),
    "larmor": ("tau_us", "cooperativity", US),
    "calibration": ("current_ma", "omega_l_khz", 1e-3),
}
_Y_SCALE = {"kappa_prime_mhz": MHZ, "shift_mhz": MHZ, "omega_l_khz": KHZ}


def _err_name(y_col):
    # kappa_prime_mhz -> kappa_prime_err_mhz, cooperativity -> cooperativity_err
    if y_col.endswith(("_mhz", "_khz")):
        return y_col[:-4] + "_err" + y_col[-4:]
    return y_col + "_err"


def _read_input(args):
    if args.input == "-":
        return sys.stdin.read(), "<stdin>"
    try:
        with open(args.input, encoding="utf-8") as fh:
            return fh.read(), args.input
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror}") from None


def _rows(est, units):
    out = []
    for name, value in est.values.items():
        unit, scale = units.get(name, ("1", 1.0))
        out.append((name, value / scale, est.errors.get(name, math.nan) / scale, unit))
    return out


def cmd_fit(args, cfg, run):
    run.stem = f"fit_{args.model}"
    x_col, y_col, x_scale = FIT_SCHEMAS[args.model]
    y_col = args.y_column or y_col
    err_col = args.err_column or _err_name(y_col)
    text, source = _read_input(args)
    cols = read_csv_columns(text, [x_col, y_col], source)
    x = cols[x_col] * x_scale
    y = cols[y_col] * _Y_SCALE.get(y_col, 1.0)
    err = cols.get(err_col)
    if err is not None:
        if np.all(err == 0):
            err = None  # noiseless export
        elif np.any(err <= 0):
            raise DataError(f"{source}: column {err_col!r} must be positive")
        else:
            err = err * _Y_SCALE.get(y_col, 1.0)
    mhz = ("2pi*MHz", MHZ)
    if args.model in ("dip", "empty", "rabi"):
        kind = "counts" if args.model == "dip" and y_col.startswith("counts") else "normalized"
        tr = ScanTrace(x, y, kind=kind, yerr=err, meta={"n_average": args.n_average})
        if args.model == "dip":
            est = fit_lorentzian_dip(tr)
            units = {"center": mhz, "hwhm": mhz}
        elif args.model == "empty":
            est = fit_empty_cavity(tr)
            units = {"kappa": mhz, "u": mhz, "kappa1": mhz}
        else:
            r = cfg.rates()
            kap = _optional(args, "kappa", "frequency", cfg, r.kappa)
            kap1 = _optional(args, "kappa1", "frequency", cfg, r.kappa1)
            gam = _optional(args, "gamma_eff", "frequency", cfg, cfg.values["transition"]["gamma_eff"])
            est = fit_rabi(tr, gam, kap, kap1)
            units = {"g_n": mhz, "g_n_squared": ("(2pi*MHz)^2", MHZ**2)}
    elif args.model == "absorption":
        est = fit_absorption(x, y, err)
        units = {"g_n": mhz, "gamma": mhz, "kappa": mhz}
    elif args.model == "dispersion":
        est = fit_dispersion(x, y, err)
        units = {"g_n": mhz, "gamma": mhz}
    elif args.model == "larmor":
        kinds = ("exponential", "gaussian") if args.envelope == "both" else (args.envelope,)
        fits = fit_larmor(x, y, err, kinds=kinds, profile=True)
        rows = []
        for kind, est in fits.items():
            units = {"omega_l": ("2pi*kHz", KHZ), "decay_rate": ("1/ms", 1e3), "timescale": ("ms", 1e-3)}
            for name, v, e, u in _rows(est, units):
                rows.append((kind, name, v, e, u))
            lo, hi = est.extra.get("timescale_bounds", (math.nan, math.nan))
            rows.append((kind, "timescale_lower", lo / 1e-3, "", "ms"))
            rows.append((kind, "timescale_upper", hi / 1e-3, "", "ms"))
            rows.append((kind, "chi2_reduced", est.extra["chi2_reduced"], "", "1"))
            run.say(f"{kind}: omega_L = 2π × {est['omega_l'] / KHZ:.5g} ± {est.error('omega_l') / KHZ:.2g} kHz, "
                    f"timescale {est['timescale'] * 1e3:.4g} ms in [{lo * 1e3:.4g}, {hi * 1e3:.4g}] ms")
        run.table("fit_larmor.csv", ["envelope", "parameter", "value", "error", "unit"], rows)
        run.results.update({f"{r[0]}.{r[1]}": r[2] for r in rows})
        return
    else:
        est = fit_calibration(x, y, err)
        units = {"omega_z": ("2pi*kHz", KHZ), "a": ("2pi*kHz/mA", KHZ / 1e-3),
                 "b_z": ("G", 1e-4), "b_x_per_amp": ("G/A", 1e-4)}
    rows = _rows(est, units)
    run.table(f"fit_{args.model}.csv", ["parameter", "value", "error", "unit"], rows)
    run.results.update({r[0]: r[1] for r in rows})
    for name, v, e, u in rows:
        run.say(f"{name:<14s} {v:.6g} ± {e:.2g} {u}")


def cmd_pipeline(args, cfg, run):
    seed = _seed(args, cfg)
    run.stem = args.name
    params = cfg.pipeline_params()
    if args.fast:
        params = params.fast()
    res = run_pipeline(args.name, params, seed=seed, noiseless=args.noiseless)
    for name, body in res.products.items():
        run.text(f"{args.name}_{name}", body)
    run.text(f"{args.name}_summary.csv", res.summary_csv())
    run.results.update({r.name: r.value / r.scale for r in res.recovered.values()})
    run.results["round_trip"] = res.round_trip()
    run.say(res.summary_text())
    run.say(f"round trip (injected within 3 sigma): {'pass' if res.round_trip() else 'FAIL'}")


COMMANDS = {
    "rates": cmd_rates,
    "coupling": cmd_coupling,
    "effn": cmd_effn,
    "spectrum": cmd_spectrum,
    "thermal": cmd_thermal,
    "larmor": cmd_larmor,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "pipeline": cmd_pipeline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value configuration file")
    common.add_argument("--output-dir", help=f"where to write CSV/JSON (default ${OUTPUT_ENV} or .)")
    common.add_argument("--angular", action="store_true",
                        help="read frequency arguments as angular rates (no 2π factor)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress the summary")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = _Parser(prog="ioncavity", description="Ion Coulomb crystal / cavity QED toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("rates", parents=[common], help="cavity decay rates, FSR and finesse")

    s = sub.add_parser("coupling", parents=[common], help="collective coupling and cooperativity")
    s.add_argument("--g", help="single-ion coupling, e.g. 0.53MHz")
    s.add_argument("--n", type=float, help="effective ion number")
    s.add_argument("--gamma-eff", help="effective dipole decay rate, e.g. 11.9MHz")
    s.add_argument("--kappa", help="override the cavity field decay rate")

    sub.add_parser("effn", parents=[common], help="effective ion number of the configured crystal")

    s = sub.add_parser("spectrum", parents=[common], help="model reflectivity spectrum")
    s.add_argument("--mode", choices=("rabi", "scan"), default="rabi",
                   help="rabi: Delta = Delta_c; scan: cavity scan at fixed --delta")
    s.add_argument("--delta", default="0MHz", help="probe detuning for --mode scan")
    s.add_argument("--n", type=float, help="effective ion number")
    s.add_argument("--span", default="60MHz", help="half-width of the detuning grid")
    s.add_argument("--points", type=int, default=601)
    s.add_argument("--thermal", action="store_true", help="average over the thermal velocity distribution")

    s = sub.add_parser("thermal", parents=[common], help="motion-broadened dipole decay rate")
    s.add_argument("--temperature", help="e.g. 24mK (overrides the config)")

    s = sub.add_parser("larmor", parents=[common], help="Larmor precession and cooperativity trace")
    s.add_argument("--initial", choices=("symmetric", "plus32", "plus12", "minus12", "minus32"),
                   default="symmetric", help="initial Zeeman preparation")

    s = sub.add_parser("simulate", parents=[common], help="synthetic measurement with noise")
    s.add_argument("kind", choices=("scan", "locked", "larmor"))
    s.add_argument("--n", type=float, help="effective ion number")
    s.add_argument("--delta", default="0MHz", help="probe detuning for scan")
    s.add_argument("--span", default="40MHz", help="half-width of the locked grid")
    s.add_argument("--points", type=int, default=161)
    s.add_argument("--sequences", type=int, default=20000, help="sequences per locked point")
    s.add_argument("--initial", choices=("symmetric", "plus32", "plus12", "minus12", "minus32"),
                   default="symmetric")
    s.add_argument("--noiseless", action="store_true", help="exact mean instead of a noisy draw")

    s = sub.add_parser("fit", parents=[common], help="fit a model to CSV data")
    s.add_argument("model", choices=tuple(FIT_SCHEMAS))
    s.add_argument("input", help="CSV file with a header row, or - for stdin")
    s.add_argument("--y-column", help="name of the data column (default per model)")
    s.add_argument("--err-column", help="name of the one-sigma error column")
    s.add_argument("--n-average", type=int, default=1, help="scans averaged into a counts trace")
    s.add_argument("--kappa", help="rabi: fixed kappa (default from the cavity config)")
    s.add_argument("--kappa1", help="rabi: fixed kappa1")
    s.add_argument("--gamma-eff", help="rabi: fixed gamma'")
    s.add_argument("--envelope", choices=("exponential", "gaussian", "both"), default="both")

    s = sub.add_parser("pipeline", parents=[common], help="simulate and re-estimate a campaign")
    s.add_argument("name", choices=tuple(PIPELINES))
    s.add_argument("--noiseless", action="store_true")
    s.add_argument("--fast", action="store_true", help="skip likelihood profiles")
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ioncavity: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        run = Run(args.command, args, cfg)
        COMMANDS[args.command](args, cfg, run)
        run.write()
    except UsageError as exc:
        print(f"ioncavity {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, UnsupportedInputError) as exc:
        print(f"ioncavity {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"ioncavity {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not args.quiet:
        print("\n".join(run.lines))
    return 0


if __name__ == "__main__":
    sys.exit(main())
