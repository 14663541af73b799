"""Physical constants, species data and unit handling.

All rates inside the package are angular frequencies in rad/s. Published
cavity-QED numbers are almost always quoted as ``2π × (value) MHz``; the
helpers :func:`mhz` and :func:`to_mhz` convert between the two so that the
factor of 2π lives in exactly one place.
"""

import math
import re

import scipy.constants as sc

from .errors import DataError

C_LIGHT = sc.c
HBAR = sc.hbar
EPS0 = sc.epsilon_0
K_B = sc.k
MU_B = sc.physical_constants["Bohr magneton"][0]
AMU = sc.physical_constants["atomic mass constant"][0]

#: mass of a 40Ca+ ion (electron mass neglected at this precision)
CA40_MASS = 39.962591 * AMU
#: 3d 2D3/2 <-> 4p 2P1/2 repumper / probe wavelength of 40Ca+
CA40_866_WAVELENGTH = 866.214e-9
#: Lande factor of the 3d 2D3/2 manifold
LANDE_D32 = 4.0 / 5.0

TWO_PI = 2.0 * math.pi
#: one "2π × MHz" expressed in rad/s
MHZ = TWO_PI * 1e6
KHZ = TWO_PI * 1e3


def mhz(value):
    """Angular frequency (rad/s) of ``2π × value MHz``."""
    return value * MHZ


def to_mhz(omega):
    """Inverse of :func:`mhz`."""
    return omega / MHZ


def gyromagnetic_ratio(g_factor=LANDE_D32):
    """gamma_GM = mu_B g / hbar in rad/(s T)."""
    return MU_B * g_factor / HBAR


# ---------------------------------------------------------------------------
# quantity parsing (used by the configuration reader and the CLI)
# ---------------------------------------------------------------------------

_SCALES = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6},
    "field": {"T": 1.0, "mT": 1e-3, "G": 1e-4, "mG": 1e-7},
    "current": {"A": 1.0, "mA": 1e-3},
    "voltage": {"V": 1.0, "mV": 1e-3, "kV": 1e3},
    "density": {"m^-3": 1.0, "cm^-3": 1e6},
    "mass": {"kg": 1.0, "u": AMU, "amu": AMU},
    "fraction": {"": 1.0, "%": 1e-2, "ppm": 1e-6},
    "density_coefficient": {"cm^-3V^-2": 1e6, "m^-3V^-2": 1.0},
    "count_rate": {"/s": 1.0, "1/s": 1.0, "/ms": 1e3, "/us": 1e6},
    # cycle frequencies that never carry 2π (scan spans, repetition rates)
    "hertz": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
}
# frequency units carry an extra 2π unless the caller declares angular input
_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_ANGULAR = {"rad/s": 1.0}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")

QUANTITY_KINDS = tuple(_SCALES) + ("frequency", "number")


def parse_quantity(text, kind, angular=False):
    """Parse ``"2.1MHz"``, ``"37 um"``, ``"24mK"`` ... into an SI float.

    Frequencies follow the ``2π ×`` convention by default: ``"2.1MHz"``
    becomes ``2π·2.1e6`` rad/s. With ``angular=True`` the number is taken
    as already angular (``"2.1MHz"`` -> ``2.1e6`` rad/s). An explicit
    ``rad/s`` suffix is always angular. ``kind="number"`` accepts a bare
    number only; every other kind requires a unit suffix (except fractions).
    """
    m = _NUMBER.match(str(text))
    if m is None:
        raise DataError(f"cannot parse quantity {text!r}")
    value = float(m.group(1))
    unit = m.group(2).replace(" ", "")
    if kind == "number":
        if unit:
            raise DataError(f"{text!r}: expected a bare number, got unit {unit!r}")
        return value
    if kind == "frequency":
        if unit in _ANGULAR:
            return value * _ANGULAR[unit]
        if unit in _FREQ:
            return value * _FREQ[unit] * (1.0 if angular else TWO_PI)
        raise DataError(f"{text!r}: frequency needs one of {sorted(_FREQ) + ['rad/s']}")
    try:
        table = _SCALES[kind]
    except KeyError:
        raise DataError(f"unknown quantity kind {kind!r}") from None
    if unit not in table:
        allowed = ", ".join(u or "<none>" for u in table)
        raise DataError(f"{text!r}: {kind} needs a unit suffix ({allowed})")
    return value * table[unit]
