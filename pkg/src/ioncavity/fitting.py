"""Weighted nonlinear least squares (Levenberg-Marquardt).

A deliberately small, deterministic implementation: central finite-difference
Jacobians, Marquardt diagonal scaling, box bounds by projection, and
curvature-based standard errors scaled by the residual variance (or, for
trusted weights, by the Birge ratio when it exceeds one). A
parameter sitting on a bound with the gradient pointing outward is held for
that step (active set), so bounded optima converge like interior ones.
Models are plain callables ``model(x, params) -> y``.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import signal

from .errors import DegenerateFitError, DomainError

log = logging.getLogger(__name__)

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass
class FitProblem:
    """Data, model and starting point of a least-squares fit.

    ``weights`` multiply squared residuals (1/sigma^2). Parameters flagged
    in ``fixed`` keep their initial value. ``bounds`` is a pair of arrays
    (lower, upper); use +-inf for open sides. With ``absolute_weights`` the
    weights are trusted as true 1/sigma^2 and the covariance is only ever
    inflated by the reduced chi^2, never shrunk.
    """

    model: object
    x: np.ndarray
    y: np.ndarray
    p0: np.ndarray
    weights: np.ndarray | None = None
    bounds: tuple | None = None
    fixed: np.ndarray | None = None
    names: tuple = ()
    name: str = ""
    absolute_weights: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.p0 = np.array(self.p0, dtype=float)
        n_par = self.p0.size
        if self.weights is None:
            self.weights = np.ones_like(self.y)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != self.y.shape or np.any(self.weights < 0):
            raise DomainError("weights must be nonnegative and match y")
        if self.fixed is None:
            self.fixed = np.zeros(n_par, dtype=bool)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        if self.bounds is None:
            self.bounds = (np.full(n_par, -np.inf), np.full(n_par, np.inf))
        lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
        self.bounds = (lo, hi)
        if np.any(self.p0 < lo) or np.any(self.p0 > hi):
            raise DomainError("initial parameters outside bounds")
        if not self.names:
            self.names = tuple(f"p{i}" for i in range(n_par))
        if len(self.names) != n_par or self.fixed.size != n_par:
            raise DomainError("names/fixed must have one entry per parameter")


@dataclass
class FitResult:
    params: np.ndarray
    std_errors: np.ndarray
    chi2_reduced: float
    converged: bool
    iterations: int
    cost: float
    covariance: np.ndarray
    names: tuple
    gradient_norm: float = np.nan
    message: str = ""
    cost_history: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.params[self.names.index(name)]

    def error(self, name):
        return self.std_errors[self.names.index(name)]

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.params)}


def numeric_jacobian(fun, p, free_idx):
    """Central-difference Jacobian of ``fun`` w.r.t. the free parameters."""
    cols = []
    for j in free_idx:
        h = _FD_STEP * max(abs(p[j]), 1e-3)
        up = p.copy()
        dn = p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((fun(up) - fun(dn)) / (2.0 * h))
    return np.column_stack(cols)


def fit_nls(problem, ftol=1e-10, gtol=1e-8, max_iter=500):
    """Minimize sum(w * (model(x, p) - y)**2) by Levenberg-Marquardt.

    Stops when an accepted step lowers the cost by less than ``ftol``
    relative, when the infinity norm of the gradient drops below ``gtol``,
    or when no damping produces a decrease (numerical floor). Reaching
    ``max_iter`` returns ``converged=False``. Raises
    :class:`DegenerateFitError` for underdetermined data or singular
    curvature at the solution.
    """
    pr = problem
    free_idx = np.flatnonzero(~pr.fixed)
    n, m = pr.y.size, free_idx.size
    if m == 0:
        raise DegenerateFitError("no free parameters")
    if n < m:
        raise DegenerateFitError(f"{n} data points cannot determine {m} parameters")
    sw = np.sqrt(pr.weights)
    lo, hi = pr.bounds

    def resid(q):
        return sw * (pr.model(pr.x, q) - pr.y)

    p = pr.p0.copy()
    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise DegenerateFitError("model is not finite at the initial parameters")
    cost = float(r @ r)
    history = [cost]
    lam = 0.0
    converged = False
    message = "maximum iterations reached"
    J = numeric_jacobian(resid, p, free_idx)
    grad = J.T @ r
    lo_f, hi_f = lo[free_idx], hi[free_idx]

    def active(q, g):
        # parameters pinned at a bound with the descent direction pointing out
        qf = q[free_idx]
        return ((qf <= lo_f) & (g > 0)) | ((qf >= hi_f) & (g < 0))

    it = 0
    while it < max_iter:
        act = active(p, grad)
        if np.max(np.abs(np.where(act, 0.0, grad)), initial=0.0) < gtol or cost == 0.0:
            converged, message = True, "gradient below tolerance"
            break
        ina = ~act
        if not ina.any():
            converged, message = True, "all free parameters held at bounds"
            break
        it += 1
        A = (J.T @ J)[np.ix_(ina, ina)]
        d = np.diag(A).copy()
        d = np.maximum(d, 1e-12 * max(d.max(), 1e-300))
        stalled = False
        while True:
            try:
                sub = np.linalg.solve(A + lam * np.diag(d), -grad[ina])
            except np.linalg.LinAlgError:
                sub = None
            if sub is not None and np.all(np.isfinite(sub)):
                step = np.zeros(free_idx.size)
                step[ina] = sub
                q = p.copy()
                q[free_idx] += step
                np.clip(q, lo, hi, out=q)
                r_new = resid(q)
                c_new = float(r_new @ r_new)
                if np.isfinite(c_new) and c_new < cost:
                    break
            lam = 1e-3 if lam == 0.0 else lam * 4.0
            if lam > 1e16:
                stalled = True
                break
        if stalled:
            converged, message = True, "no further decrease possible"
            break
        rel = (cost - c_new) / cost
        p, r, cost = q, r_new, c_new
        history.append(cost)
        lam = lam / 3.0 if lam > 1e-9 else 0.0
        J = numeric_jacobian(resid, p, free_idx)
        grad = J.T @ r
        if rel < ftol:
            converged, message = True, "relative cost change below tolerance"
            break
    else:
        log.debug("fit %s: %s", pr.name, message)

    A = J.T @ J
    dg = np.diag(A)
    if np.any(dg <= 0):
        bad = [pr.names[free_idx[i]] for i in np.flatnonzero(dg <= 0)]
        raise DegenerateFitError(f"parameters {bad} do not affect the model")
    s = np.sqrt(dg)
    scaled = A / np.outer(s, s)
    ev = np.linalg.eigvalsh(scaled)
    if ev[0] < 1e-13 * ev[-1]:
        raise DegenerateFitError(f"singular curvature (condition {ev[-1] / max(ev[0], 1e-300):.3g})")
    cov_free = np.linalg.inv(scaled) / np.outer(s, s)
    dof = n - m
    chi2_red = cost / dof if dof > 0 else np.nan
    if dof > 0:
        cov_free = cov_free * (max(chi2_red, 1.0) if pr.absolute_weights else chi2_red)
    n_par = p.size
    cov = np.zeros((n_par, n_par))
    cov[np.ix_(free_idx, free_idx)] = cov_free
    return FitResult(
        params=p,
        std_errors=np.sqrt(np.diag(cov)),
        chi2_reduced=chi2_red,
        converged=converged,
        iterations=it,
        cost=cost,
        covariance=cov,
        names=tuple(pr.names),
        gradient_norm=float(np.max(np.abs(np.where(active(p, grad), 0.0, grad)), initial=0.0)),
        message=message,
        cost_history=history,
    )


def dominant_frequency(t, y, f_max=None, oversample=10):
    """Angular frequency of the strongest periodic component of y(t).

    Uniformly sampled data use a zero-padded FFT; anything else a
    Lomb-Scargle periodogram. Returns 0 for a constant signal.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float) - np.mean(y)
    if np.ptp(y) == 0 or t.size < 4:
        return 0.0
    span = t[-1] - t[0]
    dt = np.diff(t)
    if f_max is None and np.ptp(dt) <= 1e-9 * np.mean(dt):
        n_pad = int(oversample * t.size)
        power = np.abs(np.fft.rfft(y, n_pad)) ** 2
        w = 2 * np.pi * np.fft.rfftfreq(n_pad, np.mean(dt))
        return float(w[1 + np.argmax(power[1:])])
    if f_max is None:
        f_max = np.pi / np.median(np.diff(t))  # Nyquist (angular)
    n_freq = int(oversample * t.size)
    w = np.linspace(2 * np.pi / span / oversample, f_max, n_freq)
    power = signal.lombscargle(t, y, w)
    return float(w[np.argmax(power)])
