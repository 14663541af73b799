"""Parameter estimation from scan data.

Every estimator converts its inputs to conditioned internal units (detunings
and rates in 2π·MHz, delays in µs, currents in mA), runs :func:`fit_nls` and
returns an :class:`Estimate` whose ``values``/``errors`` are back in SI
(rad/s, s, A).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize

from .errors import DataError, DegenerateFitError, DomainError, EstimationError, FlatSignalError
from .fitting import FitProblem, dominant_frequency, fit_nls
from .trace import ScanTrace
from .units import KHZ, LANDE_D32, MHZ, gyromagnetic_ratio

US = 1e-6
MA = 1e-3


@dataclass
class Estimate:
    """Recovered parameters (SI) with one-sigma errors."""

    values: dict
    errors: dict
    fit: object = None
    unidentifiable: tuple = ()
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def error(self, name):
        return self.errors[name]


def _estimate(res, scales, **kw):
    values = {n: float(res[n]) * scales.get(n, 1.0) for n in res.names}
    errors = {n: float(res.error(n)) * scales.get(n, 1.0) for n in res.names}
    return Estimate(values, errors, res, **kw)


def _arrays(x, y, sigma=None, min_points=1):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DataError("x and y must be 1-D arrays of equal length")
    if x.size < min_points:
        raise DegenerateFitError(f"need at least {min_points} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("data contain non-finite values")
    w = None
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
        if np.any(sigma <= 0):
            raise DataError("uncertainties must be positive")
        w = 1.0 / sigma**2
    return x, y, w


def _check(res, what):
    if not res.converged:
        raise EstimationError(f"{what}: fit did not converge ({res.message})")
    return res


# ---------------------------------------------------------------------------
# cavity scans
# ---------------------------------------------------------------------------

def lorentzian_dip(x, p):
    c, h, depth, offset = p
    return offset - depth * h * h / (h * h + (x - c) ** 2)


def _smooth(y, n=5):
    if y.size < n:
        return y
    k = np.ones(n) / n
    return np.convolve(np.pad(y, n // 2, mode="edge"), k, mode="valid")


def _dip_guess(x, y):
    offset = float(np.median(y))
    ys = _smooth(y)
    i = int(np.argmin(ys))
    depth = offset - ys[i]
    if not depth > 0:
        raise FlatSignalError("no dip below the baseline")
    below = ys < offset - 0.5 * depth
    lo = i
    while lo > 0 and below[lo - 1]:
        lo -= 1
    hi = i
    while hi < x.size - 1 and below[hi + 1]:
        hi += 1
    dx = float(np.median(np.abs(np.diff(x)))) if x.size > 1 else 1.0
    hwhm = max(0.5 * (x[hi] - x[lo]), dx)
    return float(x[i]), hwhm, depth, offset


def fit_lorentzian_dip(trace, window=8.0):
    """Centre, HWHM, depth and baseline of a reflection dip.

    The fit is restricted to ``window`` estimated half-widths around the
    deepest point. Count traces are refitted once with weights from the
    fitted mean (Poisson variance mean/n for an average of n scans), which
    removes the bias of data-derived Poisson weights. Raises
    :class:`FlatSignalError` when the dip depth is within three standard
    errors of zero.
    """
    if not isinstance(trace, ScanTrace):
        raise DataError("fit_lorentzian_dip expects a ScanTrace")
    order = np.argsort(trace.x)
    x = trace.x[order] / MHZ
    y = trace.y[order]
    w = trace.weights()[order]
    if x.size < 5:
        raise DegenerateFitError("a dip fit needs at least 5 samples")
    scale = float(np.median(y))
    if not scale > 0:
        raise FlatSignalError("trace has no baseline signal")
    ys = y / scale
    c0, h0, d0, o0 = _dip_guess(x, ys)
    sel = np.abs(x - c0) <= window * h0
    if sel.sum() < 12:
        sel = np.argsort(np.abs(x - c0))[:12]
        sel = np.isin(np.arange(x.size), sel)
    xs, yw = x[sel], ys[sel]
    names = ("center", "hwhm", "depth", "offset")
    bounds = ([-np.inf, 1e-9, 0.0, 0.0], [np.inf, np.inf, np.inf, np.inf])
    prob = FitProblem(lorentzian_dip, xs, yw, [c0, h0, d0, o0], weights=w[sel] * scale**2,
                      bounds=bounds, names=names, name="lorentzian_dip")
    res = _check(fit_nls(prob), "lorentzian_dip")
    if trace.kind == "counts":
        n_avg = float(trace.meta.get("n_average", 1))
        mu = np.maximum(lorentzian_dip(xs, res.params), 1e-12)
        prob.weights = n_avg * scale / mu
        prob.p0 = res.params.copy()
        res = _check(fit_nls(prob), "lorentzian_dip")
    if not res["depth"] > 3.0 * res.error("depth"):
        raise FlatSignalError(
            f"dip depth {res['depth']:.3g} is not significant (error {res.error('depth'):.3g})"
        )
    return _estimate(res, {"center": MHZ, "hwhm": MHZ, "depth": scale, "offset": scale},
                     extra={"n_points": int(sel.sum())})


def absorption_model(x, p):
    g_n, gam, kap = p
    return kap + g_n * g_n * gam / (gam * gam + x * x)


def fit_absorption(delta, kappa_prime, sigma=None, fixed=None):
    """g_N, gamma' and kappa from kappa'(Delta) = kappa + g_N^2 gamma'/(gamma'^2 + Delta^2).

    ``fixed`` maps parameter names (``g_n``, ``gamma``, ``kappa``) to values
    in rad/s that are held. With ``g_n`` fixed to zero gamma' does not enter
    the model; it is then held at its starting value and reported in
    ``unidentifiable``.
    """
    x, y, w = _arrays(delta, kappa_prime, sigma)
    x, y = x / MHZ, y / MHZ
    if w is not None:
        w = w * MHZ**2
    fixed = dict(fixed or {})
    kap0 = float(np.min(y))
    peak = float(np.max(y)) - kap0
    half = x[y - kap0 >= 0.5 * peak] if peak > 0 else x
    gam0 = max(0.5 * (half.max() - half.min()), 1e-3) if half.size else 1.0
    g0 = math.sqrt(max(peak, 1e-6) * gam0)
    p0 = {"g_n": g0, "gamma": gam0, "kappa": max(kap0, 1e-6)}
    for k, v in fixed.items():
        if k not in p0:
            raise DomainError(f"unknown parameter {k!r}")
        p0[k] = v / MHZ
    unident = ()
    if "g_n" in fixed and fixed["g_n"] == 0:
        fixed.setdefault("gamma", p0["gamma"] * MHZ)
        unident = ("gamma",)
        p0["kappa"] = float(np.mean(y)) if "kappa" not in fixed else p0["kappa"]
    names = ("g_n", "gamma", "kappa")
    mask = [n in fixed for n in names]
    free = len(names) - sum(mask)
    prob = FitProblem(absorption_model, x, y, [p0[n] for n in names], weights=w,
                      absolute_weights=w is not None,
                      bounds=([0.0, 1e-9, 0.0], [np.inf] * 3), fixed=mask, names=names,
                      name="absorption")
    if x.size < free:
        raise DegenerateFitError(f"{x.size} points cannot determine {free} parameters")
    res = _check(fit_nls(prob), "absorption")
    return _estimate(res, {n: MHZ for n in names}, unidentifiable=unident)


def dispersion_model(x, p):
    g_n, gam = p
    return -g_n * g_n * x / (gam * gam + x * x)


def fit_dispersion(delta, shift, sigma=None):
    """g_N and gamma' from Delta_c' - Delta_c = -g_N^2 Delta/(gamma'^2 + Delta^2)."""
    x, y, w = _arrays(delta, shift, sigma, min_points=2)
    x, y = x / MHZ, y / MHZ
    if w is not None:
        w = w * MHZ**2
    if np.all(x == 0):
        raise DegenerateFitError("dispersion data need nonzero detunings")
    i = int(np.argmax(np.abs(y)))
    gam0 = max(abs(x[i]), 1e-3)
    g0 = math.sqrt(max(2.0 * gam0 * abs(y[i]), 1e-6))
    names = ("g_n", "gamma")
    prob = FitProblem(dispersion_model, x, y, [g0, gam0], weights=w,
                      absolute_weights=w is not None,
                      bounds=([0.0, 1e-9], [np.inf, np.inf]), names=names, name="dispersion")
    res = _check(fit_nls(prob), "dispersion")
    return _estimate(res, {n: MHZ for n in names})


def _normalized(trace):
    if trace.kind == "normalized":
        return trace.y, trace.weights()
    base = trace.meta.get("counts_per_unit_reflectivity")
    if not base:
        raise DataError("count trace carries no normalization; pass a normalized trace")
    n_avg = float(trace.meta.get("n_average", 1))
    y = trace.y / base
    return y, n_avg * base / np.maximum(y, 1.0 / base)


def _diag_reflectivity(x, s, gam, kap, kap1):
    # reflectivity along Delta = Delta_c with g_N^2 = s (MHz units)
    den = gam * gam + x * x
    kp = kap + s * gam / den
    dc = x - s * x / den
    return ((2.0 * kap1 - kp) ** 2 + dc * dc) / (kp * kp + dc * dc)


def empty_cavity_model(x, p):
    kap, u = p
    return (u * u + x * x) / (kap * kap + x * x)


def fit_empty_cavity(trace):
    """kappa and kappa1 from an empty-cavity reflection spectrum.

    The spectrum only fixes |2 kappa1 - kappa|; the overcoupled branch
    kappa1 > kappa/2 (transmission of the coupling mirror dominating the
    losses) is returned.
    """
    y, w = _normalized(trace)
    x = trace.x / MHZ
    order = np.argsort(x)
    x, y, w = x[order], y[order], w[order]
    i = int(np.argmin(y))
    half = x[y <= 0.5 * (1.0 + y[i])]
    kap0 = max(0.5 * (half.max() - half.min()), 1e-3) if half.size else 1.0
    u0 = kap0 * math.sqrt(max(float(y[i]), 0.0))
    names = ("kappa", "u")
    prob = FitProblem(empty_cavity_model, x, y, [kap0, u0], weights=w,
                      bounds=([1e-9, 0.0], [np.inf, np.inf]), names=names, name="empty_cavity")
    res = _check(fit_nls(prob), "empty_cavity")
    kap, u = res.params
    cov = res.covariance
    k1 = 0.5 * (kap + u)
    k1_err = 0.5 * math.sqrt(max(cov[0, 0] + cov[1, 1] + 2 * cov[0, 1], 0.0))
    est = _estimate(res, {"kappa": MHZ, "u": MHZ})
    est.values["kappa1"] = k1 * MHZ
    est.errors["kappa1"] = k1_err * MHZ
    return est


def fit_rabi(trace, gamma_eff, kappa, kappa1):
    """Collective coupling from a spectrum taken along Delta = Delta_c.

    gamma', kappa and kappa1 are held fixed. The fitted parameter is
    g_N^2 >= 0, so an empty-cavity trace gives g_N consistent with zero
    instead of a singular curvature; the g_N error is propagated from it.
    """
    y, w = _normalized(trace)
    x = trace.x / MHZ
    gam, kap, kap1 = gamma_eff / MHZ, kappa / MHZ, kappa1 / MHZ
    if not (gam > 0 and kap > 0 and 0 < kap1 <= kap):
        raise DomainError("need gamma' > 0 and 0 < kappa1 <= kappa")

    def model(x, p):
        return _diag_reflectivity(x, p[0], gam, kap, kap1)

    grid = np.concatenate([[0.0], np.logspace(-2, 4, 61)])
    costs = [float(np.sum(w * (model(x, [s]) - y) ** 2)) for s in grid]
    s0 = float(grid[int(np.argmin(costs))])
    prob = FitProblem(model, x, y, [s0], weights=w, bounds=([0.0], [np.inf]),
                      names=("g_n_squared",), name="rabi")
    res = _check(fit_nls(prob), "rabi")
    s, ds = float(res.params[0]), float(res.std_errors[0])
    g = math.sqrt(s)
    g_err = 0.5 * (math.sqrt(s + ds) - math.sqrt(max(s - ds, 0.0)))
    return Estimate({"g_n": g * MHZ, "g_n_squared": s * MHZ**2},
                    {"g_n": g_err * MHZ, "g_n_squared": ds * MHZ**2}, res)


# ---------------------------------------------------------------------------
# scaling laws
# ---------------------------------------------------------------------------

def fit_sqrtN(n_eff, g_n, sigma=None):
    """Single-ion coupling g from g_N = g sqrt(N)."""
    n, y, w = _arrays(n_eff, g_n, sigma)
    if np.any(n < 0):
        raise DomainError("ion numbers must be nonnegative")
    y = y / MHZ
    if w is not None:
        w = w * MHZ**2
    root = np.sqrt(n)
    if not np.any(root > 0):
        raise DegenerateFitError("all ion numbers are zero")
    g0 = float(np.sum(y * root) / np.sum(root * root))
    prob = FitProblem(lambda x, p: p[0] * np.sqrt(x), n, y, [g0], weights=w,
                      absolute_weights=w is not None, names=("g",),
                      name="sqrtN")
    return _estimate(_check(fit_nls(prob), "sqrtN"), {"g": MHZ})


def fit_cooperativity_slope(n_eff, coop, sigma=None):
    """Slope C/N of a straight line through the origin."""
    n, y, w = _arrays(n_eff, coop, sigma)
    s0 = float(np.sum(y * n) / max(np.sum(n * n), 1e-300)) * 1e3
    prob = FitProblem(lambda x, p: 1e-3 * p[0] * x, n, y, [s0], weights=w,
                      absolute_weights=w is not None, names=("slope",),
                      name="cooperativity_slope")
    return _estimate(_check(fit_nls(prob), "cooperativity_slope"), {"slope": 1e-3})


def calibration_model(x, p):
    wz, a = p
    return np.sqrt(wz * wz + a * a * x * x)


def fit_calibration(current, omega_l, sigma=None, g_factor=LANDE_D32):
    """omega_z and slope a of omega_L(I) = sqrt(omega_z^2 + a^2 I^2).

    Values come back in rad/s and rad/(s A), together with the fields
    B_z (T) and B_x per ampere (T/A) through gamma_GM = mu_B g / hbar.
    """
    i_ma, y, w = _arrays(current, omega_l, sigma)
    i_ma = i_ma / MA
    y = y / KHZ
    if w is not None:
        w = w * KHZ**2
    zero = i_ma == 0
    wz0 = float(np.mean(y[zero])) if zero.any() else float(np.min(y))
    nz = ~zero
    a0 = float(np.median(np.sqrt(np.maximum(y[nz] ** 2 - wz0**2, 0.0)) / np.abs(i_ma[nz]))) if nz.any() else 0.0
    names = ("omega_z", "a")
    fixed = [False, not nz.any()]
    prob = FitProblem(calibration_model, i_ma, y, [max(wz0, 1e-9), max(a0, 1e-6)], weights=w,
                      absolute_weights=w is not None,
                      bounds=([0.0, 0.0], [np.inf, np.inf]), fixed=fixed, names=names,
                      name="calibration")
    res = _check(fit_nls(prob), "calibration")
    est = _estimate(res, {"omega_z": KHZ, "a": KHZ / MA},
                    unidentifiable=("a",) if fixed[1] else ())
    gm = gyromagnetic_ratio(g_factor)
    est.values["b_z"] = est.values["omega_z"] / gm
    est.errors["b_z"] = est.errors["omega_z"] / gm
    est.values["b_x_per_amp"] = est.values["a"] / gm
    est.errors["b_x_per_amp"] = est.errors["a"] / gm
    return est


# ---------------------------------------------------------------------------
# Larmor traces
# ---------------------------------------------------------------------------

def larmor_model(kind):
    """C(t) = [a cos(w t) + b cos(2 w t)] env(t) + c with a rate parameter.

    The fifth parameter is the decay rate 1/tau_e (exponential) or its
    square 1/tau_g^2 (Gaussian); both are zero for an undamped trace.
    """
    if kind == "exponential":
        def env(t, th):
            return np.exp(-th * t)
    elif kind == "gaussian":
        def env(t, th):
            return np.exp(-th * t * t)
    else:
        raise DomainError(f"unknown decay kind {kind!r}")

    def model(t, p):
        a, b, c, w, th = p
        return (a * np.cos(w * t) + b * np.cos(2.0 * w * t)) * env(t, th) + c

    return model


def _timescale(kind, theta):
    if theta <= 0:
        return math.inf
    return 1.0 / theta if kind == "exponential" else 1.0 / math.sqrt(theta)


def _profile_bounds(prob, res, idx, delta_cost):
    """Interval of parameter ``idx`` where the profiled cost stays within delta_cost."""
    best = res.params.copy()
    c_min = res.cost
    mask = prob.fixed.copy()
    mask[idx] = True

    def excess(th):
        p0 = best.copy()
        p0[idx] = th
        sub = FitProblem(prob.model, prob.x, prob.y, p0, weights=prob.weights,
                         absolute_weights=prob.absolute_weights,
                         bounds=prob.bounds, fixed=mask, names=prob.names, name="profile")
        try:
            r = fit_nls(sub)
        except DegenerateFitError:
            return delta_cost
        return r.cost - c_min - delta_cost

    th_hat = float(best[idx])
    if excess(0.0) <= 0:
        lo = 0.0
    else:
        lo = optimize.brentq(excess, 0.0, th_hat, xtol=1e-12, rtol=1e-4) if th_hat > 0 else 0.0
    step = max(2.0 * float(res.std_errors[idx]), 1e-3 * th_hat, 1e-9)
    hi = th_hat + step
    for _ in range(60):
        if excess(hi) > 0:
            break
        step *= 2.0
        hi = th_hat + step
    else:
        return lo, math.inf
    hi = optimize.brentq(excess, th_hat, hi, xtol=1e-12, rtol=1e-4)
    return lo, hi


def fit_larmor(taus, coop, sigma=None, kinds=("exponential", "gaussian"), profile=True,
               omega_guess=None):
    """Fit the damped two-harmonic Larmor model once per envelope kind.

    Returns ``{kind: Estimate}``; each estimate holds a, b, c, omega_l
    (rad/s), decay_rate (1/s for exponential, 1/s^2 for Gaussian) and
    timescale (s), with ``extra`` carrying chi2 and, when ``profile`` is
    set, the Delta chi^2 = 1 profile-likelihood interval of the timescale
    (``timescale_bounds``; the upper end is infinite when no decay is
    resolved). Without ``sigma`` the residual variance sets the chi^2
    scale. The envelope kind is never chosen automatically.
    """
    t, y, w = _arrays(taus, coop, sigma, min_points=6)
    if np.any(np.diff(t) <= 0) or np.any(t < 0):
        raise DataError("delays must be nonnegative and increasing")
    t = t / US
    if omega_guess is None:
        omega_guess = dominant_frequency(t, y)
    else:
        omega_guess = omega_guess * US
    if not omega_guess > 0:
        raise FlatSignalError("trace shows no oscillation")
    if (t[-1] - t[0]) * omega_guess < 2.0 * math.pi:
        raise DegenerateFitError("less than one oscillation period sampled")
    out = {}
    for kind in kinds:
        model = larmor_model(kind)
        fits = []
        for w0 in (omega_guess, 0.5 * omega_guess):
            basis = np.column_stack([np.cos(w0 * t), np.cos(2 * w0 * t), np.ones_like(t)])
            lin = np.linalg.lstsq(basis, y, rcond=None)[0]
            prob = FitProblem(model, t, y, [*lin, w0, 0.0], weights=w,
                              absolute_weights=w is not None,
                              bounds=([-np.inf, -np.inf, -np.inf, 0.0, 0.0], [np.inf] * 5),
                              names=("a", "b", "c", "omega_l", "decay_rate"),
                              name=f"larmor_{kind}")
            try:
                fits.append((prob, fit_nls(prob)))
            except DegenerateFitError:
                continue
        if not fits:
            raise DegenerateFitError(f"larmor {kind}: no starting point gave a regular fit")
        prob, res = fits[0]
        if len(fits) == 2 and fits[1][1].cost < 0.5 * res.cost:
            prob, res = fits[1]
        _check(res, f"larmor_{kind}")
        rate_scale = 1.0 / US if kind == "exponential" else 1.0 / US**2
        est = _estimate(res, {"omega_l": 1.0 / US, "decay_rate": rate_scale})
        th, dth = float(res["decay_rate"]), float(res.error("decay_rate"))
        tscale = _timescale(kind, th) * US
        if th > 0:
            rel = dth / th if kind == "exponential" else 0.5 * dth / th
            t_err = tscale * rel
        else:
            t_err = math.inf
        est.values["timescale"] = tscale
        est.errors["timescale"] = t_err
        est.extra.update(kind=kind, chi2=res.cost,
                         chi2_reduced=res.chi2_reduced)
        if profile:
            delta_cost = 1.0 if sigma is not None else res.chi2_reduced
            if delta_cost > 0 and np.isfinite(delta_cost):
                lo, hi = _profile_bounds(prob, res, 4, delta_cost)
            else:
                lo = hi = th
            est.extra["rate_bounds"] = (lo * rate_scale, hi * rate_scale)
            est.extra["timescale_bounds"] = (_timescale(kind, hi) * US, _timescale(kind, lo) * US)
        out[kind] = est
    return out


def normalize_period_mean(taus, coop, omega_l):
    """Divide each sample by the mean of its oscillation period.

    Samples are grouped into consecutive blocks of one Larmor period
    2π/omega_l; this removes slow drifts of the overall coupling at the cost
    of changing a, b and c (omega_L is unaffected).
    """
    taus = np.asarray(taus, dtype=float)
    coop = np.asarray(coop, dtype=float)
    if not omega_l > 0:
        raise DomainError("omega_l must be positive")
    period = 2.0 * math.pi / omega_l
    block = np.floor((taus - taus[0]) / period).astype(int)
    out = np.empty_like(coop)
    for b in np.unique(block):
        sel = block == b
        out[sel] = coop[sel] / np.mean(coop[sel])
    return out
