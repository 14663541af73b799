"""Spheroidal ion Coulomb crystals and their overlap with the TEM00 mode."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, NumericError
from .units import EPS0


@dataclass(frozen=True)
class TrapParams:
    """Linear RF trap driving a crystal of ions of mass ``ion_mass``.

    ``density_coefficient`` (m^-3 V^-2) is an experimental calibration of
    rho / U_RF^2; when absent the zero-temperature charged-liquid value
    eps0 / (M r0^4 Omega^2) is used.
    """

    r0: float
    omega_rf: float
    u_rf: float
    ion_mass: float
    density_coefficient: float | None = None

    def __post_init__(self):
        if not (self.r0 > 0 and self.omega_rf > 0 and self.ion_mass > 0):
            raise DomainError("r0, omega_rf and ion_mass must be positive")
        if self.u_rf < 0:
            raise DomainError("u_rf must be nonnegative")
        if self.density_coefficient is not None and not self.density_coefficient > 0:
            raise DomainError("density_coefficient must be positive")


def density_coefficient(t):
    """rho / U_RF^2 (m^-3 V^-2), calibrated if available."""
    if t.density_coefficient is not None:
        return t.density_coefficient
    return EPS0 / (t.ion_mass * t.r0**4 * t.omega_rf**2)


def ion_density(t):
    """Ion density (m^-3) of a crystal in trap ``t``."""
    return density_coefficient(t) * t.u_rf**2


@dataclass(frozen=True)
class CrystalSpec:
    """Uniform-density spheroid with half-length L (along z) and radius R."""

    half_length: float
    radius: float
    density: float
    pump_efficiency: float = 1.0
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self):
        if self.half_length <= 0 or self.radius <= 0:
            raise DomainError("crystal half-length and radius must be positive")
        if self.density < 0:
            raise DomainError("density must be nonnegative")
        if not 0 < self.pump_efficiency <= 1:
            raise DomainError("pump efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class ModeGeometry:
    waist: float
    wavelength: float

    def __post_init__(self):
        if not (self.waist > 0 and self.wavelength > 0):
            raise DomainError("waist and wavelength must be positive")

    @property
    def rayleigh_z0(self):
        return math.pi * self.waist**2 / self.wavelength

    @property
    def wavenumber(self):
        return 2.0 * math.pi / self.wavelength

    def beam_radius(self, z):
        return self.waist * np.sqrt(1.0 + (np.asarray(z) / self.rayleigh_z0) ** 2)

    @classmethod
    def from_cavity(cls, p):
        return cls(p.waist, p.wavelength)


def mode_weight(mode, x, y, z, axially_averaged=False):
    """Squared TEM00 mode function at (x, y, z).

    With ``axially_averaged`` the sin^2 standing-wave factor is replaced by
    its mean 1/2, as appropriate for ions spread randomly along the axis.
    """
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    w = mode.beam_radius(z)
    r2 = x**2 + y**2
    radial = (mode.waist / w) ** 2 * np.exp(-2.0 * r2 / w**2)
    if axially_averaged:
        return 0.5 * radial
    z0 = mode.rayleigh_z0
    k = mode.wavenumber
    with np.errstate(divide="ignore"):
        inv_curv = np.where(z == 0, 0.0, z / (z**2 + z0**2))  # 1/R(z)
    phase = k * z - np.arctan(z / z0) + 0.5 * k * r2 * inv_curv
    return radial * np.sin(phase) ** 2


def _disk_gaussian(a, w, rho0):
    """Integral of exp(-2|r - r0|^2/w^2) over a disk of radius a, |r0| = rho0.

    The Gaussian is a 2-D normal density with variance w^2/4 per axis, so the
    disk integral is its normalization pi w^2/2 times a noncentral chi-square
    CDF with two degrees of freedom.
    """
    if a <= 0:
        return 0.0
    s2 = 0.25 * w * w
    return 0.5 * math.pi * w * w * stats.ncx2.cdf(a * a / s2, 2, rho0 * rho0 / s2)


def effective_ion_count(c, m, rtol=1e-7):
    """Mode-weighted ion number of crystal ``c`` in mode ``m``.

    N = eta rho/2 * integral over the spheroid of (w0/w(z))^2
    exp(-2[(x-x0)^2 + (y-y0)^2]/w(z)^2): the standing wave is averaged
    axially and the radial offset of the crystal axis is honoured. The
    transverse integral of each slice is exact; the axial one is adaptive.
    """
    if c.density == 0:
        return 0.0
    L, R = c.half_length, c.radius
    rho0 = math.hypot(c.offset_x, c.offset_y)

    def slab(z):
        w = float(m.beam_radius(z))
        a = R * math.sqrt(max(0.0, 1.0 - (z / L) ** 2))
        return (m.waist / w) ** 2 * _disk_gaussian(a, w, rho0)

    # even in z: integrate one half
    val, err, info = integrate.quad(slab, 0.0, L, epsabs=0.0, epsrel=rtol, limit=200,
                                    full_output=True)[:3]
    if not np.isfinite(val) or err > max(1e-4, 10 * rtol) * abs(val) + 1e-300:
        raise NumericError(
            f"effective_ion_count: quadrature not converged (value={val:.6g}, "
            f"abserr={err:.3g}, evaluations={info.get('neval')})"
        )
    return c.pump_efficiency * c.density / 2.0 * 2.0 * val


def effective_ion_count_thin(rho, half_length, waist):
    """Closed form rho pi w0^2 L / 4 for R >> w0 and L << z0.

    This is the product of the density with the mode volume inside the
    crystal and is only an approximation to :func:`effective_ion_count`; for
    a crystal of half-length L spanning [-L, L] the full integral of an
    infinitely wide crystal is twice this value.
    """
    return rho * math.pi * waist**2 * half_length / 4.0


def total_ion_count(c):
    """Total ions in the spheroid, rho (4/3) pi R^2 L."""
    return c.density * 4.0 / 3.0 * math.pi * c.radius**2 * c.half_length


def volume_uncertainty(dx, c):
    """Relative crystal-volume uncertainty from an imaging resolution dx."""
    L, R = c.half_length, c.radius
    return dx * math.sqrt(16.0 * L**2 + R**2) / (2.0 * R * L)


def count_uncertainty(rel_drho, imaging_dx, c, rel_deta):
    """Relative uncertainty of the effective ion number (quadrature sum)."""
    if rel_drho < 0 or imaging_dx < 0 or rel_deta < 0:
        raise DomainError("uncertainties must be nonnegative")
    return math.sqrt(rel_drho**2 + volume_uncertainty(imaging_dx, c) ** 2 + rel_deta**2)
