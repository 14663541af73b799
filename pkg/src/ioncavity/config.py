"""Run configuration: a flat sectioned key = value file.

Example::

    [cavity]
    length = 11.8 mm
    t1 = 1500 ppm

    [transition]
    g = 0.53 MHz
    n_eff = 520

Every dimensioned value needs a unit suffix; frequencies follow the
``2π ×`` convention unless ``angular = true`` appears in ``[run]``. Keys
not listed in :data:`SCHEMA` are rejected with their line number. Missing
keys take the reference defaults from :mod:`ioncavity.presets`.
"""

from dataclasses import dataclass, field, replace
import configparser
import math
import os
import re

import numpy as np

from . import presets
from .cavity import CavityParams, CoupledSystem, derive_cavity_rates
from .crystal import CrystalSpec, ModeGeometry
from .errors import DataError, IonCavityError
from .expsim import NoiseModel, ScanConfig
from .larmor import DecayModel, FieldConfig
from .motion import ThermalConfig
from .pipelines import PipelineParams
from .units import CA40_MASS, LANDE_D32, parse_quantity

OUTPUT_ENV = "IONCAVITY_OUTPUT_DIR"

_P = presets
# section -> key -> (kind, default in SI units); kind "text" is a bare word
SCHEMA = {
    "run": {
        "seed": ("integer", 0),
        "output_dir": ("text", ""),
        "angular": ("boolean", False),
    },
    "cavity": {
        "length": ("length", _P.CAVITY.length),
        "t1": ("fraction", _P.CAVITY.t1),
        "t2": ("fraction", _P.CAVITY.t2),
        "losses": ("fraction", _P.CAVITY.losses),
        "waist": ("length", _P.CAVITY.waist),
        "wavelength": ("length", _P.CAVITY.wavelength),
    },
    "transition": {
        "gamma": ("frequency", _P.GAMMA),
        "gamma_eff": ("frequency", _P.GAMMA_EFF),
        "g": ("frequency", _P.G_SINGLE),
        "n_eff": ("number", _P.N_EFF),
    },
    "crystal": {
        "half_length": ("length", _P.CRYSTAL.half_length),
        "radius": ("length", _P.CRYSTAL.radius),
        "density": ("density", _P.CRYSTAL.density),
        "pump_efficiency": ("fraction", _P.CRYSTAL.pump_efficiency),
        "offset_x": ("length", _P.CRYSTAL.offset_x),
        "offset_y": ("length", _P.CRYSTAL.offset_y),
        "rel_density_error": ("fraction", _P.CRYSTAL_UNCERTAINTY["rel_drho"]),
        "rel_pump_error": ("fraction", _P.CRYSTAL_UNCERTAINTY["rel_deta"]),
        "imaging_resolution": ("length", _P.CRYSTAL_UNCERTAINTY["imaging_dx"]),
    },
    "thermal": {
        "temperature": ("temperature", _P.TEMPERATURE),
        "ion_mass": ("mass", CA40_MASS),
    },
    "larmor": {
        "b_x": ("field", _P.B_FIELD_9A),
        "b_z": ("field", _P.B_FIELD_9A),
        "g_factor": ("number", LANDE_D32),
        "decay": ("text", "exponential"),
        "tau_e": ("time", 1.7e-3),
        "tau_start": ("time", 0.0),
        "tau_stop": ("time", 120e-6),
        "tau_step": ("time", 0.5e-6),
        "sigma": ("number", 0.03),
        "n_total": ("number", _P.N_EFF),
    },
    "noise": {
        "mean_photon_rate": ("count_rate", 5e6),
        "detection_efficiency": ("fraction", 0.16),
        "drift": ("frequency", 0.0),
        "reference_threshold": ("fraction", 0.0),
        "reference_noise": ("fraction", 0.05),
        "lock_error": ("frequency", 0.0),
        "compensation_floor": ("frequency", 0.0),
        "compensation_slope": ("number", 0.0),
        "n_average": ("integer", 100),
        "scan_span": ("hertz", 1.3e9),
        "scan_rate": ("hertz", 30.0),
        "samples_per_scan": ("integer", 1667),
    },
}

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _defaults():
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


@dataclass
class RunConfig:
    """Parsed configuration; ``values[section][key]`` holds SI numbers."""

    values: dict = field(default_factory=_defaults)
    source: str = "<defaults>"

    def __getitem__(self, key):
        sec, name = key.split(".")
        return self.values[sec][name]

    def set(self, key, value):
        sec, name = key.split(".")
        if sec not in SCHEMA or name not in SCHEMA[sec]:
            raise DataError(f"unknown configuration key {key!r}")
        self.values[sec][name] = value

    @property
    def seed(self):
        return int(self.values["run"]["seed"])

    @property
    def angular(self):
        return bool(self.values["run"]["angular"])

    def output_dir(self, override=None):
        """Explicit override, then the file, then $IONCAVITY_OUTPUT_DIR, then cwd."""
        return override or self.values["run"]["output_dir"] or os.environ.get(OUTPUT_ENV) or "."

    # -- domain objects ---------------------------------------------------

    def cavity(self):
        v = self.values["cavity"]
        return CavityParams(v["length"], v["t1"], v["t2"], v["losses"], v["waist"], v["wavelength"])

    def rates(self):
        return derive_cavity_rates(self.cavity())

    def system(self, n_eff=None, gamma_eff=None):
        t = self.values["transition"]
        return CoupledSystem(t["g"], t["n_eff"] if n_eff is None else n_eff,
                             t["gamma_eff"] if gamma_eff is None else gamma_eff, self.rates())

    def mode(self):
        return ModeGeometry.from_cavity(self.cavity())

    def crystal(self):
        v = self.values["crystal"]
        return CrystalSpec(v["half_length"], v["radius"], v["density"], v["pump_efficiency"],
                           v["offset_x"], v["offset_y"])

    def thermal(self):
        v = self.values["thermal"]
        return ThermalConfig(v["temperature"], v["ion_mass"],
                             2 * math.pi / self.values["cavity"]["wavelength"])

    def field(self):
        v = self.values["larmor"]
        return FieldConfig.from_field(v["b_x"], v["b_z"], v["g_factor"])

    def decay(self):
        v = self.values["larmor"]
        if v["decay"] == "none":
            return DecayModel()
        return DecayModel(v["decay"], v["tau_e"])

    def taus(self):
        v = self.values["larmor"]
        n = int(round((v["tau_stop"] - v["tau_start"]) / v["tau_step"])) + 1
        if n < 2:
            raise DataError("larmor: tau_stop must exceed tau_start by at least one step")
        return v["tau_start"] + v["tau_step"] * np.arange(n)

    def noise(self):
        v = self.values["noise"]
        return NoiseModel(v["mean_photon_rate"], v["detection_efficiency"], v["drift"],
                          v["reference_threshold"], self.seed, True, v["compensation_floor"],
                          v["compensation_slope"], v["lock_error"], v["reference_noise"])

    def scan(self):
        v = self.values["noise"]
        return ScanConfig(v["scan_span"], v["scan_rate"], int(v["n_average"]),
                          int(v["samples_per_scan"]))

    def pipeline_params(self):
        t = self.values["transition"]
        lv = self.values["larmor"]
        return replace(PipelineParams(), g=t["g"], n_eff=t["n_eff"], gamma_eff=t["gamma_eff"],
                       noise=self.noise(), scan=self.scan(), larmor_sigma=lv["sigma"],
                       larmor_n_total=lv["n_total"], tau_e=lv["tau_e"])

    def as_dict(self):
        return {sec: dict(vals) for sec, vals in self.values.items()}


def _line_numbers(text):
    """Map (section, key) to the 1-based line where the key is set."""
    where, sec = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            sec = m.group(1).strip()
            where.setdefault((sec, None), i)
        elif sec and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            where[(sec, key)] = i
    return where


def _convert(kind, raw, angular):
    if kind == "text":
        return raw.strip()
    if kind == "boolean":
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError:
            raise DataError(f"expected true/false, got {raw!r}") from None
    if kind == "integer":
        try:
            return int(raw)
        except ValueError:
            raise DataError(f"expected an integer, got {raw!r}") from None
    return parse_quantity(raw, kind, angular=angular)


def parse_config(text, source="<config>"):
    """Parse configuration text into a :class:`RunConfig`.

    Raises :class:`DataError` with ``source:line`` diagnostics for syntax
    errors, unknown sections or keys, and values without units.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise DataError(f"{source}: {exc}".replace("\n", " ")) from None
    lines = _line_numbers(text)
    cfg = RunConfig(source=source)
    angular = False
    if cp.has_option("run", "angular"):
        try:
            angular = _convert("boolean", cp.get("run", "angular"), False)
        except DataError as exc:
            raise DataError(f"{source}:{lines.get(('run', 'angular'), '?')}: {exc}") from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            line = lines.get((sec, None), "?")
            raise DataError(f"{source}:{line}: unknown section [{sec}]; "
                            f"expected one of {', '.join(SCHEMA)}")
        for key, raw in cp.items(sec):
            line = lines.get((sec, key), "?")
            if key not in SCHEMA[sec]:
                raise DataError(f"{source}:{line}: unknown key {key!r} in [{sec}]; "
                                f"expected one of {', '.join(SCHEMA[sec])}")
            kind = SCHEMA[sec][key][0]
            try:
                cfg.values[sec][key] = _convert(kind, raw, angular)
            except DataError as exc:
                raise DataError(f"{source}:{line}: [{sec}] {key}: {exc}") from None
    if cfg.values["larmor"]["decay"] not in ("none", "exponential", "gaussian"):
        raise DataError(f"{source}:{lines.get(('larmor', 'decay'), '?')}: "
                        "decay must be none, exponential or gaussian")
    try:
        # build every object once so inconsistent values surface at load time
        cfg.system()
        cfg.crystal()
        cfg.thermal()
        cfg.noise()
        cfg.scan()
        cfg.decay()
    except IonCavityError as exc:
        raise DataError(f"{source}: {exc}") from None
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
