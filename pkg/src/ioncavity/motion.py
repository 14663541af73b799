"""Doppler (finite temperature) corrections to the coupled cavity response.

Ions moving with axial velocity v see the two running-wave components of the
standing wave Doppler shifted by +-kv. Averaging the resulting dipole
response over a 1-D Maxwell-Boltzmann distribution modifies kappa' and
Delta_c'; at low temperature the result is again Lorentzian with a broadened
dipole decay rate gamma'.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import special

from .cavity import CoupledResponse, effective_response
from .errors import DomainError, EstimationError, NumericError
from .fitting import FitProblem, fit_nls
from .units import K_B, MHZ


@dataclass(frozen=True)
class ThermalConfig:
    temperature: float
    ion_mass: float
    wavenumber: float

    def __post_init__(self):
        if self.temperature < 0:
            raise DomainError("temperature must be nonnegative")
        if not (self.ion_mass > 0 and self.wavenumber > 0):
            raise DomainError("ion mass and wavenumber must be positive")

    @property
    def doppler_velocity(self):
        """v_D = sqrt(k_B T / m), the rms axial velocity."""
        return math.sqrt(K_B * self.temperature / self.ion_mass)

    @property
    def doppler_rate(self):
        """k v_D in rad/s."""
        return self.wavenumber * self.doppler_velocity


def xi(v, gamma, delta, k):
    """Velocity kernel of the standing-wave absorption (units 1/rate^2).

    Equal to the real part of the average of 1/(gamma + i(Delta +- kv))
    divided by gamma.
    """
    kv2 = np.square(k * np.asarray(v, dtype=float))
    a = gamma**2 + np.square(delta)
    return (a + kv2) / (a * a + 2.0 * (gamma**2 - np.square(delta)) * kv2 + kv2 * kv2)


@lru_cache(maxsize=16)
def _hermgauss(n):
    # scipy's nodes stay accurate far past numpy's overflow point (~n = 300)
    x, w = special.roots_hermite(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _thermal_integrals(gamma, delta, k, v_d, n):
    """(int f gamma xi, int f (Delta - kv) xi) with n Gauss-Hermite nodes."""
    x, w = _hermgauss(n)
    v = math.sqrt(2.0) * v_d * x
    delta = np.asarray(delta, dtype=float)
    d = delta[..., None]
    kern = xi(v, gamma, d, k)
    absorb = (kern * gamma) @ w / math.sqrt(math.pi)
    disp = (kern * (d - k * v)) @ w / math.sqrt(math.pi)
    return absorb, disp


def thermal_integrals(gamma, delta, th, rtol=1e-8, n_start=64, n_max=8192):
    """Velocity-averaged absorptive and dispersive kernels.

    Node count starts at ``n_start`` and doubles until two successive results
    agree to ``rtol`` (relative to 1/gamma, the natural scale of both
    integrals). Returns arrays shaped like ``delta``.
    """
    delta = np.asarray(delta, dtype=float)
    v_d = th.doppler_velocity
    if v_d == 0:
        den = gamma**2 + delta**2
        return gamma / den, delta / den
    k = th.wavenumber
    scale = 1.0 / gamma
    n = n_start
    prev = _thermal_integrals(gamma, delta, k, v_d, n)
    while n < n_max:
        n *= 2
        cur = _thermal_integrals(gamma, delta, k, v_d, n)
        err = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
        if err <= rtol * scale:
            return cur
        prev = cur
    raise NumericError(
        f"Gauss-Hermite quadrature not converged with {n} nodes "
        f"(k v_D = {th.doppler_rate:.3g} rad/s, gamma = {gamma:.3g} rad/s, change {err / scale:.2e})"
    )


def thermal_response(sys, delta, delta_c, th, rtol=1e-8):
    """kappa' and Delta_c' averaged over the thermal velocity distribution.

    ``sys.gamma_eff`` is taken as the rest-frame dipole decay rate; at T = 0
    the result is exactly :func:`ioncavity.cavity.effective_response`.
    """
    if th.temperature == 0:
        return effective_response(sys, delta, delta_c)
    absorb, disp = thermal_integrals(sys.gamma_eff, delta, th, rtol=rtol)
    g2n = sys.g**2 * sys.n_eff
    return CoupledResponse(sys.rates.kappa + g2n * absorb, np.asarray(delta_c) - g2n * disp)


@dataclass(frozen=True)
class EffectiveGamma:
    """Motion-broadened dipole decay rate.

    ``fitted`` comes from fitting the Lorentzian absorption profile to the
    exact thermal curve; ``closed_form`` is gamma + k v_D / sqrt(2), the
    low-temperature approximation read with kv_D measured in units of gamma.
    """

    fitted: float
    closed_form: float
    doppler_rate: float
    fitted_error: float = 0.0


def effective_gamma(sys, th, fit_grid=None):
    """Effective dipole decay rate gamma' at temperature ``th.temperature``.

    Fits kappa'(Delta) - kappa = A gamma'/(gamma'^2 + Delta^2) to the thermal
    absorption profile over ``fit_grid`` (default +-3 gamma, 61 points).
    """
    gamma = sys.gamma_eff
    kvd = th.doppler_rate
    closed = gamma * (1.0 + kvd / (math.sqrt(2.0) * gamma))
    if th.temperature == 0:
        return EffectiveGamma(gamma, gamma, 0.0)
    if fit_grid is None:
        fit_grid = np.linspace(-3.0 * gamma, 3.0 * gamma, 61)
    fit_grid = np.asarray(fit_grid, dtype=float)
    absorb, _ = thermal_integrals(gamma, fit_grid, th)
    # MHz-scaled units: y = A * G / (G^2 + x^2)
    x = fit_grid / MHZ
    y = absorb * MHZ
    g0 = gamma / MHZ

    def model(x, p):
        amp, gam = p
        return amp * gam / (gam * gam + x * x)

    res = fit_nls(FitProblem(model, x, y, p0=[1.0, g0], names=("amplitude", "gamma"),
                             bounds=([0, 1e-9], [np.inf, np.inf]), name="effective_gamma"))
    if not res.converged:
        raise EstimationError(f"effective_gamma fit did not converge: {res.message}")
    return EffectiveGamma(res["gamma"] * MHZ, closed, kvd, res.error("gamma") * MHZ)


@dataclass(frozen=True)
class Validity:
    doppler_rate: float
    coupled_rate: float
    margin: float
    threshold: float
    valid: bool


def validity_check(sys, th, threshold=3.0):
    """Is the mean Doppler shift small against the coupled-system rates?

    Compares k v_D with min[kappa + g^2N/gamma, gamma + g^2N/kappa] and
    reports valid when the ratio (``margin``) is at least ``threshold``.
    """
    kappa = sys.rates.kappa
    gamma = sys.gamma_eff
    g2n = sys.g**2 * sys.n_eff
    rate = min(kappa + g2n / gamma, gamma + g2n / kappa)
    kvd = th.doppler_rate
    margin = math.inf if kvd == 0 else rate / kvd
    return Validity(kvd, rate, margin, threshold, margin >= threshold)
