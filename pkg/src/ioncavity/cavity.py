"""Steady-state and transient response of N two-level ions in one cavity mode.

The cavity is single ended: light enters and is reflected through the
partially transmitting mirror (transmission ``t1``), the high reflector has
``t2`` and the round-trip absorption loss is ``losses``. The ions enter only
through the effective decay rate ``kappa'`` and detuning ``Delta_c'`` of the
cavity field, so every observable below is a function of a
:class:`CoupledResponse`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, StepSizeError, UnsupportedInputError
from .trace import ScanTrace
from .units import C_LIGHT, EPS0, HBAR, TWO_PI


@dataclass(frozen=True)
class CavityParams:
    """Mirror and geometry data of a linear two-mirror cavity (SI units)."""

    length: float
    t1: float
    t2: float
    losses: float
    waist: float
    wavelength: float

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"cavity length must be positive, got {self.length}")
        for name in ("t1", "t2", "losses"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise DomainError(f"{name} must lie in [0, 1), got {v}")
        if not self.t1 > 0:
            raise DomainError("t1 must be positive: light couples in through M1")
        if not self.t1 > self.t2:
            raise DomainError("single-ended convention requires t1 > t2")
        if not (self.waist > 0 and self.wavelength > 0):
            raise DomainError("waist and wavelength must be positive")


@dataclass(frozen=True)
class CavityRates:
    """Field decay rates (rad/s) and derived figures of a cavity."""

    tau: float
    kappa1: float
    kappa2: float
    kappa_loss: float
    kappa: float
    fsr: float
    finesse: float
    rayleigh_z0: float


def derive_cavity_rates(p):
    """Round-trip time, per-channel decay rates, FSR, finesse and z0.

    >>> r = derive_cavity_rates(CavityParams(11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9))
    >>> round(r.fsr / 1e9, 1)
    12.7
    """
    tau = 2.0 * p.length / C_LIGHT
    k1 = p.t1 / (2.0 * tau)
    k2 = p.t2 / (2.0 * tau)
    kl = p.losses / (2.0 * tau)
    kappa = k1 + k2 + kl
    fsr = C_LIGHT / (2.0 * p.length)
    # FWHM linewidth in Hz is 2*kappa/(2*pi) = kappa/pi
    finesse = fsr / (kappa / math.pi)
    z0 = math.pi * p.waist**2 / p.wavelength
    return CavityRates(tau, k1, k2, kl, kappa, fsr, finesse, z0)


def rates_from_kappa(kappa, kappa1, tau=None):
    """Build :class:`CavityRates` directly from measured kappa and kappa1.

    Useful when only the linewidths are known (e.g. from a fit); the
    unspecified remainder ``kappa - kappa1`` is booked as loss. Without
    ``tau`` the round-trip quantities are NaN, which only matters for
    absolute intracavity amplitudes.
    """
    if not (kappa > 0 and 0 < kappa1 <= kappa):
        raise DomainError("need 0 < kappa1 <= kappa")
    if tau is None:
        tau = math.nan
    fsr = 1.0 / tau
    return CavityRates(tau, kappa1, 0.0, kappa - kappa1, kappa, fsr,
                       fsr / (kappa / math.pi), math.nan)


@dataclass(frozen=True)
class TransitionParams:
    """Optical dipole transition of the ion."""

    gamma: float
    wavelength: float
    dipole_moment: float | None = None
    atomic_frequency: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")
        if self.atomic_frequency is None:
            object.__setattr__(self, "atomic_frequency", TWO_PI * C_LIGHT / self.wavelength)

    @property
    def wavenumber(self):
        return TWO_PI / self.wavelength


@dataclass(frozen=True)
class CoupledSystem:
    """``n_eff`` ions with single-ion coupling ``g`` and dipole decay ``gamma_eff``."""

    g: float
    n_eff: float
    gamma_eff: float
    rates: CavityRates

    def __post_init__(self):
        if self.g < 0 or self.n_eff < 0:
            raise DomainError("g and n_eff must be nonnegative")
        if not self.gamma_eff > 0:
            raise DomainError("gamma_eff must be positive")

    @property
    def g_n(self):
        return collective_coupling(self.g, self.n_eff)

    @classmethod
    def from_collective(cls, g_n, gamma_eff, rates):
        """System specified by its collective rate only (g = g_N, N = 1)."""
        return cls(g=g_n, n_eff=1.0, gamma_eff=gamma_eff, rates=rates)

    def with_n(self, n_eff):
        return CoupledSystem(self.g, n_eff, self.gamma_eff, self.rates)


@dataclass(frozen=True)
class CoupledResponse:
    """Effective cavity decay rate and detuning (rad/s; scalars or arrays)."""

    kappa_prime: float
    delta_c_prime: float


def mode_volume(p):
    """Standing-wave TEM00 mode volume pi w0^2 l / 4."""
    return math.pi * p.waist**2 * p.length / 4.0


def vacuum_field(p, omega=None):
    """Peak single-photon field E0 = sqrt(hbar omega / (2 eps0 V)) in V/m."""
    if omega is None:
        omega = TWO_PI * C_LIGHT / p.wavelength
    return math.sqrt(HBAR * omega / (2.0 * EPS0 * mode_volume(p)))


def single_ion_coupling(t, p):
    """g = mu_ge E0 / hbar at an antinode of the mode centre (rad/s)."""
    if t.dipole_moment is None:
        raise UnsupportedInputError("single_ion_coupling needs the transition dipole moment")
    return t.dipole_moment * vacuum_field(p, t.atomic_frequency) / HBAR


def dipole_moment_for_coupling(g, p, omega=None):
    """Dipole element that yields coupling ``g`` in cavity ``p``."""
    return g * HBAR / vacuum_field(p, omega)


def collective_coupling(g, n_eff):
    """g_N = g sqrt(N)."""
    if np.any(np.asarray(g) < 0) or np.any(np.asarray(n_eff) < 0):
        raise DomainError("g and n_eff must be nonnegative")
    return g * np.sqrt(n_eff)


def lorentzian_terms(g2n, gamma, delta):
    """Absorptive and dispersive ion contributions g^2N (gamma, Delta)/(gamma^2+Delta^2)."""
    den = gamma**2 + np.square(delta)
    return g2n * gamma / den, g2n * delta / den


def effective_response(sys, delta, delta_c):
    """kappa' and Delta_c' for probe detuning ``delta`` and cavity detuning ``delta_c``.

    Uses the (possibly motion-broadened) ``sys.gamma_eff`` as the dipole
    decay rate. Accepts scalars or broadcastable arrays.
    """
    g2n = sys.g**2 * sys.n_eff
    absorb, disp = lorentzian_terms(g2n, sys.gamma_eff, delta)
    return CoupledResponse(sys.rates.kappa + absorb, np.asarray(delta_c) - disp)


def intracavity_amplitude(resp, rates, a_in):
    """Steady-state intracavity amplitude for input amplitude ``a_in``.

    ``a_in`` is normalized per round trip, so |a_in|^2 / tau is the
    incident photon flux and |a|^2 the mean intracavity photon number.
    """
    drive = math.sqrt(2.0 * rates.kappa1 / rates.tau) * a_in
    return drive / (resp.kappa_prime + 1j * np.asarray(resp.delta_c_prime))


def reflection_coefficient(rates, resp):
    """Complex a_r/a_in from the input-output relation."""
    den = resp.kappa_prime + 1j * np.asarray(resp.delta_c_prime)
    return (2.0 * rates.kappa1 - den) / den


def reflectivity(rates, resp):
    """Probe power reflectivity |a_r/a_in|^2; in [0, 1] for a passive cavity."""
    return np.abs(reflection_coefficient(rates, resp)) ** 2


def cooperativity(sys):
    """C = g_N^2 / (2 kappa gamma')."""
    return sys.g**2 * sys.n_eff / (2.0 * sys.rates.kappa * sys.gamma_eff)


def coupling_for_cooperativity(c, kappa, gamma_eff):
    """Collective coupling that gives cooperativity ``c``."""
    return math.sqrt(2.0 * c * kappa * gamma_eff)


def is_strongly_coupled(sys):
    """True when g_N exceeds both kappa and gamma'."""
    return bool(sys.g_n > sys.rates.kappa and sys.g_n > sys.gamma_eff)


def rabi_spectrum(sys, grid):
    """Reflectivity along the diagonal Delta = Delta_c (cavity locked to the ions)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("empty detuning grid")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise DomainError("detuning grid must be sorted ascending")
    r = reflectivity(sys.rates, effective_response(sys, grid, grid))
    return ScanTrace(grid, r, kind="normalized", provenance="rabi_spectrum model")


@dataclass(frozen=True)
class Transient:
    t: np.ndarray
    a: np.ndarray
    polarization: np.ndarray


def _coupled_matrix(sys, delta, delta_c):
    g_n = sys.g_n
    k = sys.rates.kappa
    return np.array([[-(k + 1j * delta_c), 1j * g_n],
                     [1j * g_n, -(sys.gamma_eff + 1j * delta)]])


def transient_buildup(sys, delta, delta_c, a_in, t_end, dt):
    """Ring-up of field and collective polarization from a = S = 0.

    Integrates the linear mean-value equations with classical RK4 at fixed
    step ``dt``. The steady state of the discrete map coincides exactly with
    :func:`intracavity_amplitude`.
    """
    if not (dt > 0 and t_end >= 0):
        raise DomainError("need dt > 0 and t_end >= 0")
    m = _coupled_matrix(sys, delta, delta_c)
    fastest = np.max(np.abs(np.linalg.eigvals(m)))
    # RK4 is stable for |lambda| dt up to ~2.6 on the negative real axis;
    # keep a margin since eigenvalues are complex here.
    if fastest * dt > 2.0:
        raise StepSizeError(
            f"dt={dt:.3g} s unstable for fastest rate {fastest:.3g} rad/s; need dt < {2.0 / fastest:.3g}"
        )
    b = np.array([math.sqrt(2.0 * sys.rates.kappa1 / sys.rates.tau) * a_in, 0.0], dtype=complex)
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    x = np.zeros(2, dtype=complex)
    out = np.empty((n_steps + 1, 2), dtype=complex)
    out[0] = x

    def f(v):
        return m @ v + b

    for i in range(n_steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = x
    t = dt * np.arange(n_steps + 1)
    return Transient(t, out[:, 0], out[:, 1])


def mean_photon_number(resp, rates, photon_flux):
    """Mean intracavity photon number for incident flux ``photon_flux`` (1/s)."""
    return np.abs(intracavity_amplitude(resp, rates, math.sqrt(photon_flux * rates.tau))) ** 2
