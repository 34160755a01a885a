"""Config files and presets.

Files are INI style with sections [source], [machine] and [run]. Values in
[source] are dimensionless unless ``units = si`` is set in [run], in which
case lengths are metres and frequencies rad/s, and everything is rescaled
so that c = 1 and omega = 1.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .model import (SI_C, DiscreteSource, InvariantError, MachineConfig, Shape, SourceConfig,
                    machine_to_source)
from .solver import QuadratureSpec


class ConfigError(ValueError):
    """Malformed config file or unknown key."""


@dataclass
class RunConfig:
    source: SourceConfig | DiscreteSource
    q: QuadratureSpec = field(default_factory=QuadratureSpec)
    mode: str = "auto"
    machine: MachineConfig | None = None
    n_samples: int = 64
    jobs: int = 1
    name: str = ""

    @property
    def kind(self) -> str:
        return "machine" if self.machine is not None else "continuous"


_SOURCE_KEYS = {"kind", "m", "omega", "capital_omega", "radial_family", "radial_center",
                "radial_width", "axial_family", "axial_center", "axial_width", "amplitude",
                "switch_on_time"}
_MACHINE_KEYS = {"n_electrodes", "electrode_width", "electrode_pitch", "arc_radius",
                 "dielectric_thickness", "dielectric_width", "v0", "delta_t", "m_omega",
                 "capital_omega", "m_freq", "capital_freq", "v_over_c", "length_unit"}
_RUN_KEYS = {"mode", "units", "grid", "levels", "eps_ref", "filament_boost", "filament_width",
             "n_samples", "jobs", "name"}


def _float(sec, key, where, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"{where}: missing key '{key}'")
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"{where}: key '{key}' is not a number: {sec[key]!r}") from None


def _int(sec, key, where, default=None):
    v = _float(sec, key, where, default)
    if v != int(v):
        raise ConfigError(f"{where}: key '{key}' must be an integer")
    return int(v)


def _check_keys(sec, allowed, where):
    extra = set(sec.keys()) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(extra))}")


def parse_config(text: str, origin: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    if not cp.has_section("source"):
        raise ConfigError(f"{origin}: missing [source] section")
    src = cp["source"]
    run = cp["run"] if cp.has_section("run") else {}
    _check_keys(src, _SOURCE_KEYS, f"{origin} [source]")
    if run:
        _check_keys(run, _RUN_KEYS, f"{origin} [run]")
    where = f"{origin} [run]"
    grid = run.get("grid", "16,48,16")
    try:
        n_r, n_phi, n_z = (int(v) for v in grid.split(","))
    except ValueError:
        raise ConfigError(f"{where}: grid must be n_r,n_phi,n_z") from None
    q = QuadratureSpec(n_r, n_phi, n_z, _int(run, "levels", where, 2),
                       _float(run, "eps_ref", where, math.pi / 4),
                       _int(run, "filament_boost", where, 1),
                       _float(run, "filament_width", where, 0.2))
    mode = run.get("mode", "auto")
    units = run.get("units", "dimensionless")
    if units not in ("si", "dimensionless"):
        raise ConfigError(f"{where}: units must be 'si' or 'dimensionless'")
    common = dict(q=q, mode=mode, n_samples=_int(run, "n_samples", where, 64),
                  jobs=_int(run, "jobs", where, 1), name=run.get("name", ""))

    kind = src.get("kind", "continuous")
    if kind == "machine":
        if not cp.has_section("machine"):
            raise ConfigError(f"{origin}: kind = machine needs a [machine] section")
        mc, L = _machine(cp["machine"], f"{origin} [machine]")
        return RunConfig(machine_to_source(mc, L), machine=mc, **common)
    if kind != "continuous":
        raise ConfigError(f"{origin} [source]: kind must be 'continuous' or 'machine'")
    return RunConfig(_continuous(src, f"{origin} [source]", units), **common)


def _continuous(src, where, units) -> SourceConfig:
    omega = _float(src, "omega", where, 1.0)
    scale_t = scale_x = 1.0
    if units == "si":
        if not omega > 0:
            raise InvariantError("omega_positive", "SI input needs omega > 0 to set the units")
        scale_t = omega          # seconds -> units of 1/omega
        scale_x = omega / SI_C   # metres -> units of c/omega
        omega = 1.0
    try:
        amp = tuple(float(v) for v in src.get("amplitude", "0,0,1").split(","))
    except ValueError:
        raise ConfigError(f"{where}: amplitude must be three numbers s_r,s_phi,s_z") from None
    if len(amp) != 3:
        raise ConfigError(f"{where}: amplitude must be three numbers s_r,s_phi,s_z")
    m = _float(src, "m", where, 2)
    radial = Shape(src.get("radial_family", "gaussian"),
                   _float(src, "radial_center", where) * scale_x,
                   _float(src, "radial_width", where) * scale_x)
    axial = Shape(src.get("axial_family", "gaussian"),
                  _float(src, "axial_center", where, 0.0) * scale_x,
                  _float(src, "axial_width", where, 0.05 / scale_x) * scale_x)
    cfg = SourceConfig(m=int(m) if m == int(m) else m, omega=omega,
                       capital_omega=_float(src, "capital_omega", where, m * omega / 12) / scale_t,
                       radial=radial, axial=axial, amplitude=amp,
                       switch_on_time=_float(src, "switch_on_time", where, 0.0) * scale_t)
    return cfg


def _machine(sec, where) -> tuple[MachineConfig, float | None]:
    _check_keys(sec, _MACHINE_KEYS, where)
    d = MachineConfig()
    kw = {}
    for key, attr in (("n_electrodes", "n_electrodes"), ("electrode_width", "electrode_width"),
                      ("electrode_pitch", "electrode_pitch"), ("arc_radius", "arc_radius"),
                      ("dielectric_thickness", "dielectric_thickness"),
                      ("dielectric_width", "dielectric_width"), ("v0", "V0"), ("delta_t", "delta_t"),
                      ("m_omega", "m_omega"), ("capital_omega", "capital_omega")):
        if key in sec:
            kw[attr] = _float(sec, key, where)
    if "m_freq" in sec:
        kw["m_omega"] = 2 * math.pi * _float(sec, "m_freq", where)
    if "capital_freq" in sec:
        kw["capital_omega"] = 2 * math.pi * _float(sec, "capital_freq", where)
    if "n_electrodes" in kw:
        kw["n_electrodes"] = _int(sec, "n_electrodes", where)
    mc = replace(d, **kw)
    if "v_over_c" in sec:
        mc = mc.with_speed(_float(sec, "v_over_c", where))
    mc.validate()
    L = _float(sec, "length_unit", where) if "length_unit" in sec else None
    return mc, L


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    rc = parse_config(text, path)
    validate_run(rc)
    return rc


def validate_run(rc: RunConfig) -> RunConfig:
    if rc.mode not in ("auto", "superluminal", "subluminal"):
        raise InvariantError("run_mode", f"unknown run mode {rc.mode!r}")
    if isinstance(rc.source, SourceConfig):
        rc.source.validate(None if rc.mode == "auto" else rc.mode)
    elif rc.machine is not None:
        v = rc.machine.v_over_c
        if rc.mode == "superluminal" and not v > 1:
            raise InvariantError("support_superluminal", f"machine v/c = {v:.6g} is not superluminal")
        if rc.mode == "subluminal" and not v < 1:
            raise InvariantError("support_subluminal", f"machine v/c = {v:.6g} is not subluminal")
    return rc


# -- presets ------------------------------------------------------------------

def continuous_preset(r0: float, m: int = 2, sigma_r: float = 0.01, sigma_z: float = 0.05,
                      amplitude=(0.0, 0.0, 1.0)) -> SourceConfig:
    """Thin gaussian ring of pattern speed r0 (omega = 1, Omega = m/12)."""
    return SourceConfig(m=m, omega=1.0, capital_omega=m / 12.0,
                        radial=Shape("gaussian", r0, sigma_r), axial=Shape("gaussian", 0.0, sigma_z),
                        amplitude=tuple(amplitude))


MACHINE_2004 = MachineConfig()


def machine_pair(v_num: float = 1.064, v_den: float = 0.875, base: MachineConfig = MACHINE_2004):
    """Two machine runs differing only in switching delay, in one length unit."""
    num = base.with_speed(v_num)
    den = base.with_speed(v_den)
    L = SI_C / num.pattern_omega
    return machine_to_source(num, L), machine_to_source(den, L), L


def preset(name: str) -> RunConfig:
    if name == "machine-2004":
        return RunConfig(machine_to_source(MACHINE_2004), machine=MACHINE_2004, name=name)
    if name.startswith("machine-v"):
        mc = MACHINE_2004.with_speed(float(name[len("machine-v"):]))
        return RunConfig(machine_to_source(mc), machine=mc, name=name)
    if name == "subluminal":
        return RunConfig(continuous_preset(0.875), mode="subluminal", name=name)
    if name == "superluminal":
        return RunConfig(continuous_preset(1.25), mode="superluminal", name=name)
    if name.startswith("super-") or name.startswith("ring-"):
        r0 = float(name.split("-", 1)[1])
        return RunConfig(continuous_preset(r0), name=name)
    raise ConfigError(f"unknown preset {name!r}")


PRESETS = ("machine-2004", "machine-v1.064", "machine-v0.875", "subluminal", "superluminal",
           "super-1.064")


def dump_config(rc: RunConfig) -> str:
    """Resolved config as INI text that :func:`parse_config` reads back."""
    cp = configparser.ConfigParser(interpolation=None)
    fmt = "{:.17g}".format
    q = rc.q
    cp["run"] = {"mode": rc.mode, "units": "dimensionless",
                 "grid": f"{q.n_r},{q.n_phi},{q.n_z}", "levels": str(q.levels),
                 "eps_ref": fmt(q.eps_ref), "filament_boost": str(q.filament_boost),
                 "filament_width": fmt(q.filament_width), "n_samples": str(rc.n_samples),
                 "jobs": str(rc.jobs)}
    if rc.machine is not None:
        mc = rc.machine
        cp["source"] = {"kind": "machine"}
        cp["machine"] = {
            "n_electrodes": str(mc.n_electrodes), "electrode_width": fmt(mc.electrode_width),
            "electrode_pitch": fmt(mc.electrode_pitch), "arc_radius": fmt(mc.arc_radius),
            "dielectric_thickness": fmt(mc.dielectric_thickness),
            "dielectric_width": fmt(mc.dielectric_width), "v0": fmt(mc.V0),
            "delta_t": fmt(mc.delta_t), "m_freq": fmt(mc.m_omega / (2 * math.pi)),
            "capital_freq": fmt(mc.capital_omega / (2 * math.pi)),
            "length_unit": fmt(rc.source.length_unit)}
        extra = (f"# v/c = {mc.v_over_c:.6g}\n# m omega / 2 pi = {mc.m_omega / 2e6 / math.pi:.6f} MHz\n"
                 f"# Omega / 2 pi = {mc.capital_omega / 2e6 / math.pi:.6f} MHz\n"
                 f"# nu = {rc.source.nu:.17g}, Omega = {rc.source.capital_omega:.17g} (dimensionless)\n")
    else:
        s = rc.source
        cp["source"] = {"kind": "continuous", "m": str(s.m), "omega": fmt(s.omega),
                        "capital_omega": fmt(s.capital_omega),
                        "radial_family": s.radial.family, "radial_center": fmt(s.radial.center),
                        "radial_width": fmt(s.radial.width), "axial_family": s.axial.family,
                        "axial_center": fmt(s.axial.center), "axial_width": fmt(s.axial.width),
                        "amplitude": ",".join(fmt(a) for a in s.amplitude),
                        "switch_on_time": fmt(s.switch_on_time)}
        extra = f"# support r in [{s.r_l:.17g}, {s.r_u:.17g}], r_u*omega/c = {s.r_u * s.omega:.6g}\n"
    buf = io.StringIO()
    cp.write(buf)
    return extra + buf.getvalue()
