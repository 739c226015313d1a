"""Applied-current stimuli and conduction-system pacing schedules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError

STIM_RADIUS = 0.25  # cm
STIM_DURATION = 3.0  # ms
STIM_AMPLITUDE = 50000.0  # uA/cm^3


@dataclass(frozen=True)
class Stimulus:
    """Volumetric current ``amplitude`` applied during ``[start, start +
    duration)`` to nodes inside a ball, or inside an axis-aligned box when
    ``box = (lo, hi)`` is given."""

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = STIM_RADIUS
    start: float = 0.0
    duration: float = STIM_DURATION
    amplitude: float = STIM_AMPLITUDE
    box: tuple | None = None
    name: str = ""
    chamber: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if len(self.center) != 3:
            raise ConfigError(f"stimulus '{self.name}': center needs three coordinates")
        if not self.radius > 0:
            raise ConfigError(f"stimulus '{self.name}': radius must be positive")
        if not self.duration > 0:
            raise ConfigError(f"stimulus '{self.name}': duration must be positive")
        if self.box is not None:
            lo, hi = (tuple(float(c) for c in np.ravel(b)) for b in self.box)
            if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
                raise ConfigError(f"stimulus '{self.name}': box needs lo <= hi in three coordinates")
            object.__setattr__(self, "box", (lo, hi))

    def nodes(self, points):
        points = np.asarray(points)
        if self.box is not None:
            lo, hi = np.asarray(self.box[0]), np.asarray(self.box[1])
            inside = np.all((points >= lo) & (points <= hi), axis=1)
        else:
            inside = np.sum((points - np.asarray(self.center)) ** 2, axis=1) <= self.radius**2
        return np.flatnonzero(inside)

    def active(self, t):
        return self.start <= t < self.start + self.duration

    @property
    def end(self):
        return self.start + self.duration


@dataclass(frozen=True)
class StimulusProtocol:
    stimuli: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stimuli", tuple(self.stimuli))

    def __iter__(self):
        return iter(self.stimuli)

    def __len__(self):
        return len(self.stimuli)

    @property
    def end(self):
        return max((s.end for s in self.stimuli), default=0.0)

    def for_chamber(self, chamber):
        return StimulusProtocol(tuple(s for s in self.stimuli if s.chamber == chamber))

    def shifted(self, dt):
        return StimulusProtocol(tuple(replace(s, start=s.start + dt) for s in self.stimuli))


# start times in ms; LV/RV entries expand to septal and lateral sites
WHOLE_HEART_TIMES = {
    "SAN": 0.0,
    "BB": 28.0,
    "FO": 42.0,
    "CSM": 80.0,
    "AVN": 90.0,
    "LV": 160.0,
    "RV": 165.0,
}

SITE_CHAMBER = {
    "SAN": "ra",
    "BB": "la",
    "FO": "la",
    "CSM": "la",
    "lv-septal": "ventricles",
    "lv-lateral": "ventricles",
    "rv-septal": "ventricles",
    "rv-lateral": "ventricles",
}
CHAMBER_SITES = {
    "ra": ("SAN",),
    "la": ("BB", "FO", "CSM"),
    "ventricles": ("lv-septal", "lv-lateral", "rv-septal", "rv-lateral"),
}


def _site_time(site, times):
    if site.startswith("lv-"):
        return times["LV"]
    if site.startswith("rv-"):
        return times["RV"]
    return times[site]


def whole_heart_schedule(sites, chambers=("ra", "la", "ventricles"), times=None, radius=STIM_RADIUS, duration=STIM_DURATION, amplitude=STIM_AMPLITUDE):
    """Conduction-system surrogate: one timed spherical stimulus per site.

    ``sites`` maps site names (SAN, BB, FO, CSM, lv-septal, lv-lateral,
    rv-septal, rv-lateral) to points. Only the sites of the listed chambers
    are used. The AVN delay is implicit in the ventricular start times.
    """
    times = dict(WHOLE_HEART_TIMES, **(times or {}))
    if times["LV"] < times["AVN"] or times["RV"] < times["AVN"]:
        raise ConfigError("ventricular sites must fire after the AVN delay")
    out = []
    for ch in chambers:
        if ch not in CHAMBER_SITES:
            raise ConfigError(f"unknown chamber '{ch}'; expected one of {sorted(CHAMBER_SITES)}")
        for site in CHAMBER_SITES[ch]:
            if site not in sites:
                raise ConfigError(f"schedule needs the anatomical point '{site}' for chamber '{ch}'")
            out.append(
                Stimulus(
                    center=sites[site],
                    radius=radius,
                    start=_site_time(site, times),
                    duration=duration,
                    amplitude=amplitude,
                    name=site,
                    chamber=ch,
                )
            )
    return StimulusProtocol(tuple(out))


def la_schedule(sites, radius=STIM_RADIUS, duration=STIM_DURATION, amplitude=STIM_AMPLITUDE):
    """Left-atrium-only pacing: BB at 0 ms, FO at 14 ms, CSM at 52 ms."""
    t0 = WHOLE_HEART_TIMES["BB"]
    times = {k: WHOLE_HEART_TIMES[k] - t0 for k in ("BB", "FO", "CSM")}
    return whole_heart_schedule(sites, ("la",), times=dict(WHOLE_HEART_TIMES, **times), radius=radius, duration=duration, amplitude=amplitude)


def sites_from_meshes(meshes):
    """Collect schedule sites from generator landmarks of a chamber dict
    (``ventricles``, ``ra``, ``la``)."""
    out = {}
    for ch, mesh in meshes.items():
        for site in CHAMBER_SITES.get(ch, ()):
            if site in mesh.landmarks:
                out[site] = np.asarray(mesh.landmarks[site], dtype=float)
    return out


def face_stimulus(mesh, axis=0, depth=None, start=0.0, duration=STIM_DURATION, amplitude=STIM_AMPLITUDE):
    """Box stimulus covering the low face of a slab along ``axis`` (planar
    wave initiation)."""
    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)
    if depth is None:
        # two node layers
        depth = 1.5 * np.diff(np.unique(np.round(mesh.nodes[:, axis], 10))[:2])[0]
    top = hi.copy()
    top[axis] = lo[axis] + depth
    return Stimulus(center=lo, box=(tuple(lo - 1e-9), tuple(top)), start=start, duration=duration, amplitude=amplitude, name=f"face-{'xyz'[axis]}0")
