"""Larmor precession in the four Zeeman sublevels of a J = 3/2 manifold.

States are single-spin amplitude vectors ordered m_J = -3/2, -1/2, +1/2, +3/2.
A crystal prepared identically in every ion is described by the same vector;
collective quantities follow as N_m(tau) = N P_m(tau). Incoherent
preparations (optical pumping into a mixture of sublevels) are given as a
sequence of ``(weight, SpinState)`` pairs.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateFitError, DomainError, ModelViolationError
from .fitting import FitProblem, dominant_frequency, fit_nls
from .units import LANDE_D32, gyromagnetic_ratio

M_J = np.array([-1.5, -0.5, 0.5, 1.5])
_INDEX = {m: i for i, m in enumerate(M_J)}


def _spin_matrices():
    jp = np.zeros((4, 4))
    for i in range(3):
        m = M_J[i]
        # <m+1| J+ |m>
        jp[i + 1, i] = math.sqrt(15.0 / 4.0 - m * (m + 1.0))
    jx = 0.5 * (jp + jp.T)
    jz = np.diag(M_J)
    return jx, jz


JX, JZ = _spin_matrices()


@dataclass(frozen=True)
class SpinState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (4,):
            raise DomainError("a spin-3/2 state has four amplitudes")
        if abs(np.vdot(a, a).real - 1.0) > 1e-12:
            raise DomainError("spin state is not normalized")
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def basis(cls, m):
        a = np.zeros(4, dtype=complex)
        a[_INDEX[float(m)]] = 1.0
        return cls(a)

    @classmethod
    def normalized(cls, amplitudes):
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))


def pumped_mixture(populations):
    """Incoherent mixture with the given sublevel populations (m = -3/2 ... +3/2)."""
    p = np.asarray(populations, dtype=float)
    if p.shape != (4,) or np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-12):
        raise DomainError("need four nonnegative populations summing to one")
    return [(w, SpinState.basis(m)) for w, m in zip(p, M_J) if w > 0]


def symmetric_outer_mixture():
    """Equal incoherent mixture of m = +-3/2 (pi-polarized pumping)."""
    return pumped_mixture([0.5, 0.0, 0.0, 0.5])


def density_matrix(initial):
    """4x4 density matrix of a pure state or a weighted mixture."""
    if isinstance(initial, SpinState):
        a = initial.amplitudes
        return np.outer(a, a.conj())
    rho = np.zeros((4, 4), dtype=complex)
    total = 0.0
    for w, s in initial:
        rho += w * np.outer(s.amplitudes, s.amplitudes.conj())
        total += w
    if not math.isclose(total, 1.0, rel_tol=1e-12):
        raise DomainError("mixture weights must sum to one")
    return rho


@dataclass(frozen=True)
class FieldConfig:
    """Larmor rates along z (quantization axis) and x, in rad/s."""

    omega_x: float
    omega_z: float

    @classmethod
    def from_field(cls, b_x, b_z, g_factor=LANDE_D32):
        """Field components in tesla -> Larmor rates via gamma_GM = mu_B g / hbar."""
        gm = gyromagnetic_ratio(g_factor)
        return cls(gm * b_x, gm * b_z)


@dataclass(frozen=True)
class DecayModel:
    kind: str = "none"
    timescale: float = math.inf

    def __post_init__(self):
        if self.kind not in ("none", "exponential", "gaussian"):
            raise DomainError(f"unknown decay kind {self.kind!r}")
        if self.kind != "none" and not self.timescale > 0:
            raise DomainError("decay timescale must be positive")


def envelope(decay, taus):
    taus = np.asarray(taus, dtype=float)
    if decay.kind == "none" or math.isinf(decay.timescale):
        return np.ones_like(taus)
    if decay.kind == "exponential":
        return np.exp(-taus / decay.timescale)
    return np.exp(-((taus / decay.timescale) ** 2))


def hamiltonian(f):
    """H / hbar = omega_z J_z + omega_x J_x (rad/s), real symmetric."""
    return f.omega_z * JZ + f.omega_x * JX


def larmor_frequency(f):
    return math.hypot(f.omega_x, f.omega_z)


def propagator(f, tau):
    """U(tau) = exp(-i H tau) from the exact eigendecomposition."""
    e, v = np.linalg.eigh(hamiltonian(f))
    return (v * np.exp(-1j * e * tau)) @ v.conj().T


def evolve(s, f, tau):
    a = propagator(f, tau) @ s.amplitudes
    return SpinState(a / np.linalg.norm(a))


def populations(s):
    return np.abs(s.amplitudes) ** 2


def _exact_populations(initial, f, taus):
    rho = density_matrix(initial)
    e, v = np.linalg.eigh(hamiltonian(f))
    rt = v.conj().T @ rho @ v
    ph = np.exp(-1j * np.outer(taus, e))  # (n_tau, 4)
    # P_m(t) = sum_kl rt_kl V_mk V*_ml exp(-i(E_k - E_l)t)
    amp = np.einsum("tk,mk,kl,ml,tl->tm", ph, v, rt, v.conj(), ph.conj(), optimize=True)
    # clip roundoff (~1e-17) so populations can be used as ion numbers
    return np.maximum(amp.real, 0.0)


def population_harmonics(initial, f):
    """Exact Fourier content of the sublevel populations.

    Returns ``(cos, sin)`` arrays of shape (4 sublevels, 4 harmonics) such that
    P_m(tau) = sum_n cos[m, n] cos(n w_L tau) + sin[m, n] sin(n w_L tau),
    n = 0..3, w_L the Larmor frequency.
    """
    rho = density_matrix(initial)
    e, v = np.linalg.eigh(hamiltonian(f))
    rt = v.conj().T @ rho @ v
    cos = np.zeros((4, 4))
    sin = np.zeros((4, 4))
    wl = larmor_frequency(f)
    for mi in range(4):
        terms = np.outer(v[mi], v[mi].conj()) * rt  # [k, l]
        if wl == 0:
            cos[mi, 0] = terms.sum().real
            continue
        for k in range(4):
            for l in range(4):
                n = k - l  # E_k - E_l = n w_L
                c = terms[k, l]
                if n == 0:
                    cos[mi, 0] += c.real
                elif n > 0:
                    cos[mi, n] += 2.0 * c.real
                    sin[mi, n] += 2.0 * c.imag
    return cos, sin


@dataclass(frozen=True)
class HarmonicFit:
    """P(tau) = a cos(w tau) + b cos(2 w tau) + c for one sublevel."""

    a: float
    b: float
    c: float
    omega: float
    rms_residual: float


@dataclass(frozen=True)
class PopulationTrace:
    taus: np.ndarray
    populations: np.ndarray
    omega_l: float
    fits: tuple | None = None

    def of(self, m):
        return self.populations[:, _INDEX[float(m)]]


def two_harmonic(t, p):
    a, b, c, w = p
    return a * np.cos(w * t) + b * np.cos(2.0 * w * t) + c


def fit_two_harmonic(taus, y, omega_guess=None):
    """Fit a cos(w t) + b cos(2 w t) + c; tries w0 and w0/2 as starting points."""
    taus = np.asarray(taus, dtype=float)
    y = np.asarray(y, dtype=float)
    if omega_guess is None:
        omega_guess = dominant_frequency(taus, y)
    # scale time so that the frequency is O(1)
    ts = 1.0 / omega_guess if omega_guess > 0 else 1.0
    fits = []
    failure = None
    for w0 in (omega_guess, 0.5 * omega_guess):
        # linear least squares for a, b, c at fixed w as the starting point
        basis = np.column_stack([np.cos(w0 * taus), np.cos(2 * w0 * taus), np.ones_like(taus)])
        lin = np.linalg.lstsq(basis, y, rcond=None)[0]
        prob = FitProblem(two_harmonic, taus / ts, y,
                          p0=[*lin, w0 * ts], names=("a", "b", "c", "omega"), name="two_harmonic")
        try:
            res = fit_nls(prob)
        except DegenerateFitError as exc:
            failure = exc
            continue
        fits.append(res)
    if not fits:
        raise failure
    # the half-frequency start can reproduce a pure fundamental exactly
    # (a = 0, b = a_true); only take it when it is clearly better
    best = fits[0]
    if len(fits) == 2 and fits[1].cost < 0.5 * fits[0].cost:
        best = fits[1]
    best.params[3] /= ts
    best.std_errors[3] /= ts
    return best


def populations_trace(initial, f, taus, fit=True, tol=1e-9):
    """Sublevel populations after free precession for each delay in ``taus``.

    With ``fit`` each sublevel trace is fitted with the two-harmonic form
    a cos(w t) + b cos(2 w t) + c. A residual above ``tol`` raises
    :class:`ModelViolationError`: this happens for preparations with
    coherence between the extreme eigenstates of the field direction (for
    example a pure m = +3/2 state under a transverse field, whose populations
    contain a 3 w_L component), but never for m <-> -m symmetric incoherent
    preparations such as :func:`symmetric_outer_mixture`.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0) or np.any(np.diff(taus) < 0):
        raise DomainError("delays must be nonnegative and sorted")
    pops = _exact_populations(initial, f, taus)
    wl = larmor_frequency(f)
    fits = None
    if fit:
        fits = []
        for mi in range(4):
            y = pops[:, mi]
            if np.ptp(y) < 1e-12:
                fits.append(HarmonicFit(0.0, 0.0, float(y.mean()), math.nan, float(np.std(y))))
                continue
            res = fit_two_harmonic(taus, y)
            rms = math.sqrt(res.cost / y.size)
            if rms > tol:
                raise ModelViolationError(
                    f"m={M_J[mi]:+.1f}: population is not of two-harmonic form "
                    f"(rms residual {rms:.2e}); the preparation carries 3 w_L content"
                )
            fits.append(HarmonicFit(res["a"], res["b"], res["c"], abs(res["omega"]), rms))
        fits = tuple(fits)
    return PopulationTrace(taus, pops, wl, fits)


@dataclass(frozen=True)
class TwoTransitionConfig:
    """Probe coupling to the m = +1/2 and m = +3/2 sublevels (sigma- probe)."""

    g_half: float
    g_threehalf: float
    delta_half: float = 0.0
    delta_threehalf: float = 0.0
    n_half: float = 0.0
    n_threehalf: float = 0.0

    def __post_init__(self):
        if min(self.g_half, self.g_threehalf) < 0 or np.any(np.asarray(self.n_half) < 0) \
                or np.any(np.asarray(self.n_threehalf) < 0):
            raise DomainError("couplings and ion numbers must be nonnegative")

    def with_populations(self, n_half, n_threehalf):
        return TwoTransitionConfig(self.g_half, self.g_threehalf, self.delta_half,
                                   self.delta_threehalf, n_half, n_threehalf)


def kappa_prime_two_transition(cfg, gamma, kappa):
    """kappa + one Lorentzian absorption term per addressed Zeeman transition."""
    t_half = cfg.g_half**2 * np.asarray(cfg.n_half) * gamma / (gamma**2 + cfg.delta_half**2)
    t_3half = (cfg.g_threehalf**2 * np.asarray(cfg.n_threehalf) * gamma
               / (gamma**2 + cfg.delta_threehalf**2))
    return kappa + t_half + t_3half


def cooperativity_weights(cfg, gamma, kappa, n_total):
    """Cooperativity per unit population of m = +1/2 and m = +3/2."""
    w_half = cfg.g_half**2 * n_total * gamma / (gamma**2 + cfg.delta_half**2) / (2 * kappa)
    w_3half = cfg.g_threehalf**2 * n_total * gamma / (gamma**2 + cfg.delta_threehalf**2) / (2 * kappa)
    return w_half, w_3half


def cooperativity_trace(a, b, c, omega_l, decay, taus):
    """C(tau) = [a cos(w_L tau) + b cos(2 w_L tau)] env(tau) + c."""
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0):
        raise DomainError("delays must be nonnegative")
    osc = a * np.cos(omega_l * taus) + b * np.cos(2.0 * omega_l * taus)
    return osc * envelope(decay, taus) + c
