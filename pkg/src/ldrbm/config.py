"""Run configuration: INI files with one section per concern, and the named
presets that reproduce every published parameter set.

Units: lengths and ``h`` in cm, times in ms, conductivities in mS/cm,
velocities in cm/s, stimulus amplitude in uA/cm^3, angles in degrees.

Sections and keys::

    [run]          command, output
    [geometry]     generator (slab, biventricle, la, ra, four-chamber) or file;
                   h, lengths, h_atria
    [fibers]       method (R, B, D, LA, RA, auto, none), angles, taus, file,
                   plus per-angle (alpha_endo_l, ...) and per-tau overrides
    [conductivity] preset, or sigma_f, sigma_s, sigma_n; isotropic
    [ionic]        model
    [stimulus]     protocol (face, landmarks, la, whole-heart), sites, radius,
                   duration, amplitude, time_<site> overrides
    [numerics]     dt, bdf_order, T_end, tol, mass, snapshot_every,
                   stop_when_activated, threads
    [compare]      kind (fibers, activation), a, b, field
    [fit]          model, targets, directions, h, dt, rtol, sigma0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

COMMANDS = ("gen-geometry", "generate-fibers", "simulate", "compare", "fit-cv")
GENERATORS = ("slab", "biventricle", "la", "ra", "four-chamber")
FIBER_METHODS = ("R", "B", "D", "LA", "RA", "auto", "none")
PROTOCOLS = ("face", "landmarks", "la", "whole-heart")

PRESETS = {
    "slab-benchmark": """
[run]
command = gen-geometry
[geometry]
generator = slab
lengths = 2.0, 0.7, 0.3
h = 0.035
""",
    "ideal-biventricle": """
[run]
command = gen-geometry
[geometry]
generator = biventricle
h = 0.1
""",
    "ideal-la": """
[run]
command = gen-geometry
[geometry]
generator = la
h = 0.05
""",
    "ideal-ra": """
[run]
command = gen-geometry
[geometry]
generator = ra
h = 0.05
""",
    "four-chamber": """
[run]
command = gen-geometry
[geometry]
generator = four-chamber
h = 0.1
h_atria = 0.05
""",
    "fibers-r": """
[run]
command = generate-fibers
[geometry]
generator = biventricle
h = 0.1
[fibers]
method = R
angles = ideal
""",
    "fibers-b": """
[run]
command = generate-fibers
[geometry]
generator = biventricle
h = 0.1
[fibers]
method = B
angles = ideal
""",
    "fibers-d": """
[run]
command = generate-fibers
[geometry]
generator = biventricle
h = 0.1
[fibers]
method = D
angles = ideal
""",
    "fibers-d-realistic": """
[run]
command = generate-fibers
[geometry]
generator = biventricle
h = 0.1
[fibers]
method = D
angles = realistic
""",
    "fibers-la": """
[run]
command = generate-fibers
[geometry]
generator = la
h = 0.05
[fibers]
method = LA
taus = ideal
""",
    "fibers-ra": """
[run]
command = generate-fibers
[geometry]
generator = ra
h = 0.05
[fibers]
method = RA
taus = ideal
""",
    "slab-cv-ttp": """
[run]
command = simulate
[geometry]
generator = slab
lengths = 2.0, 0.7, 0.3
h = 0.035
[fibers]
method = none
[conductivity]
sigma_f = 1.07
isotropic = yes
[ionic]
model = ttp
[stimulus]
protocol = face
[numerics]
dt = 0.05
T_end = 200
stop_when_activated = yes
""",
    "biventricle-ep": """
[run]
command = simulate
[geometry]
generator = biventricle
h = 0.1
[fibers]
method = D
angles = ideal
[conductivity]
preset = surrogate-ventricular
[ionic]
model = surrogate-ventricular
[stimulus]
protocol = landmarks
sites = lv-septal, lv-lateral, rv-septal, rv-lateral
[numerics]
T_end = 300
stop_when_activated = yes
""",
    "la-fibers": """
[run]
command = simulate
[geometry]
generator = la
h = 0.05
[fibers]
method = LA
taus = ideal
[conductivity]
preset = atrial
[ionic]
model = crn
[stimulus]
protocol = la
[numerics]
T_end = 300
stop_when_activated = yes
""",
    "la-isotropic": """
[run]
command = simulate
[geometry]
generator = la
h = 0.05
[fibers]
method = none
[conductivity]
preset = atrial-isotropic
[ionic]
model = crn
[stimulus]
protocol = la
[numerics]
T_end = 300
stop_when_activated = yes
""",
    "la-fibers-surrogate": """
[run]
command = simulate
[geometry]
generator = la
h = 0.05
[fibers]
method = LA
taus = ideal
[conductivity]
preset = surrogate-atrial
[ionic]
model = surrogate-atrial
[stimulus]
protocol = la
[numerics]
T_end = 300
stop_when_activated = yes
""",
    "la-isotropic-surrogate": """
[run]
command = simulate
[geometry]
generator = la
h = 0.05
[fibers]
method = none
[conductivity]
preset = surrogate-atrial-isotropic
[ionic]
model = surrogate-atrial
[stimulus]
protocol = la
[numerics]
T_end = 300
stop_when_activated = yes
""",
    "whole-heart": """
[run]
command = simulate
[geometry]
generator = four-chamber
h = 0.1
h_atria = 0.05
[fibers]
method = auto
angles = ideal
taus = ideal
[stimulus]
protocol = whole-heart
[numerics]
T_end = 500
stop_when_activated = yes
""",
    "fit-ventricular": """
[run]
command = fit-cv
[fit]
model = surrogate-ventricular
targets = 60, 40, 20
directions = f, s, n
""",
    "fit-atrial": """
[run]
command = fit-cv
[fit]
model = surrogate-atrial
targets = 120, 40
directions = f, s
""",
    "fit-ttp": """
[run]
command = fit-cv
[fit]
model = ttp
targets = 60
directions = f
""",
}


def _floats(text, n=None, key=""):
    try:
        vals = tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


def _words(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


@dataclass
class RunConfig:
    """Parsed configuration. ``sections`` keeps the raw key/value text so the
    manifest can record exactly what was run."""

    command: str
    output: Path
    sections: dict = field(default_factory=dict)
    source: str = ""
    threads: int | None = None

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        return self.section(section).get(key, default)

    def get_float(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        return _floats(v, 1, f"[{section}] {key}")[0]

    def get_int(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: expected an integer, got {v!r}") from None

    def get_bool(self, section, key, default=False):
        v = self.get(section, key)
        if v is None:
            return default
        s = str(v).strip().lower()
        if s in ("1", "yes", "true", "on"):
            return True
        if s in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: expected yes/no, got {v!r}")

    def get_floats(self, section, key, n=None, default=None):
        v = self.get(section, key)
        return default if v is None else _floats(v, n, f"[{section}] {key}")

    def get_words(self, section, key, default=()):
        v = self.get(section, key)
        return default if v is None else _words(v)

    def prefixed(self, section, prefix):
        """Float-valued keys of ``section`` starting with ``prefix``."""
        return {k: self.get_float(section, k) for k in self.section(section) if k.startswith(prefix)}

    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in sorted(self.sections):
            cp[name] = {k: str(v) for k, v in sorted(self.sections[name].items())}
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in cp[name].items())
            lines.append("")
        return "\n".join(lines)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'; expected one of {', '.join(COMMANDS)}")
        gen = self.get("geometry", "generator")
        path = self.get("geometry", "file")
        if self.command in ("gen-geometry", "generate-fibers", "simulate"):
            if gen is None and path is None:
                raise ConfigError("[geometry] needs 'generator' or 'file'")
        if gen is not None and gen not in GENERATORS:
            raise ConfigError(f"[geometry] generator '{gen}' is not one of {', '.join(GENERATORS)}")
        for sec, key in (("geometry", "file"), ("fibers", "file"), ("compare", "a"), ("compare", "b")):
            p = self.get(sec, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"[{sec}] {key}: file '{p}' does not exist")
        method = self.get("fibers", "method")
        if method is not None and method not in FIBER_METHODS:
            raise ConfigError(f"[fibers] method '{method}' is not one of {', '.join(FIBER_METHODS)}")
        proto = self.get("stimulus", "protocol")
        if proto is not None and proto not in PROTOCOLS:
            raise ConfigError(f"[stimulus] protocol '{proto}' is not one of {', '.join(PROTOCOLS)}")
        if self.command == "compare":
            if self.get("compare", "a") is None or self.get("compare", "b") is None:
                raise ConfigError("[compare] needs inputs 'a' and 'b'")
            if self.get("compare", "kind", "fibers") not in ("fibers", "activation"):
                raise ConfigError("[compare] kind must be 'fibers' or 'activation'")
        if self.command == "fit-cv":
            t = self.get_floats("fit", "targets")
            d = self.get_words("fit", "directions", ("f",) * len(t or ()))
            if not t:
                raise ConfigError("[fit] needs 'targets'")
            if len(d) != len(t):
                raise ConfigError("[fit] 'targets' and 'directions' differ in length")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")
        return self


def _parse(text, source):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return {s: dict(cp[s]) for s in cp.sections()}


def load_config(path=None, preset=None, output=None, threads=None, overrides=None):
    """Merge a preset, then a config file, then ``overrides``
    (``{section: {key: value}}``); later sources win key by key."""
    sections = {}
    sources = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; available: {', '.join(sorted(PRESETS))}")
        sources.append(f"preset:{preset}")
        for s, kv in _parse(PRESETS[preset], f"preset:{preset}").items():
            sections.setdefault(s, {}).update(kv)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file '{path}' does not exist")
        sources.append(str(p))
        for s, kv in _parse(p.read_text(), str(p)).items():
            sections.setdefault(s, {}).update(kv)
    for s, kv in (overrides or {}).items():
        sections.setdefault(s, {}).update({k: str(v) for k, v in kv.items()})
    if not sections:
        raise ConfigError("no configuration given: pass --config and/or --preset")
    run = sections.get("run", {})
    command = run.get("command")
    if command is None:
        raise ConfigError("[run] command is missing")
    out = output or run.get("output") or "out"
    cfg = RunConfig(command=command, output=Path(out), sections=sections, source=", ".join(sources))
    if threads is None and "threads" in sections.get("numerics", {}):
        threads = cfg.get_int("numerics", "threads")
    cfg.threads = threads
    return cfg.validate()
