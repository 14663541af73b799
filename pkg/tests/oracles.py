"""Independent reference computations shared by the unit and acceptance tests.

None of these call into the package's numerical kernels.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import comb


def mc_effective_count(c, m, n, seed):
    """Mode-weighted ion number by uniform sampling of the spheroid's bounding box."""
    rng = np.random.default_rng(seed)
    L, R = c.half_length, c.radius
    acc, chunk = 0.0, 1_000_000
    for _ in range(n // chunk):
        u = rng.uniform(-1, 1, size=(3, chunk))
        x, y, z = R * u[0], R * u[1], L * u[2]
        inside = x**2 + y**2 <= R**2 * (1 - (z / L) ** 2)
        w = m.waist * np.sqrt(1 + (z / m.rayleigh_z0) ** 2)
        r2 = (x - c.offset_x) ** 2 + (y - c.offset_y) ** 2
        acc += np.sum(np.where(inside, (m.waist / w) ** 2 * np.exp(-2 * r2 / w**2), 0.0))
    box = 8 * R * R * L
    return c.pump_efficiency * c.density / 2 * box * acc / n


def thermal_quad(gamma, delta, kvd):
    """Absorptive and dispersive velocity averages by adaptive quadrature in u = kv."""
    def f(u):
        return math.exp(-u * u / (2 * kvd * kvd)) / (math.sqrt(2 * math.pi) * kvd)

    def kern(u):
        return 0.5 * (1 / (gamma**2 + (delta - u) ** 2) + 1 / (gamma**2 + (delta + u) ** 2))

    lim = 12 * kvd
    pts = [p for p in sorted({-abs(delta), abs(delta)}) if -lim < p < lim]
    opts = dict(limit=500, epsabs=0, epsrel=1e-12, points=pts)
    a = integrate.quad(lambda u: f(u) * gamma * kern(u), -lim, lim, **opts)[0]
    d = integrate.quad(lambda u: f(u) * (delta - u) * kern(u), -lim, lim, **opts)[0]
    return a, d


def binomial_populations(m0, theta):
    """Populations (m = -3/2..+3/2) after rotating |m0 = +-3/2> by theta about x.

    The spin-3/2 state is the symmetric state of three spin-1/2 particles, each
    of which flips with probability sin^2(theta/2).
    """
    c2, s2 = math.cos(theta / 2) ** 2, math.sin(theta / 2) ** 2
    if m0 == 1.5:
        return [comb(3, k) * c2**k * s2 ** (3 - k) for k in range(4)]
    return [comb(3, k) * s2**k * c2 ** (3 - k) for k in range(4)]


def diagonal_reflectivity(d, g_n, gam, kap, kap1):
    """|r|^2 along Delta = Delta_c from the complex susceptibility g_N^2/(gamma + i Delta)."""
    chi = g_n**2 / (gam + 1j * d)
    den = kap + 1j * d + chi
    return np.abs((2 * kap1 - den) / den) ** 2
