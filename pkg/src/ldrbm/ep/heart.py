"""Whole-heart activation on the idealized four-chamber assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .monodomain import CONDUCTIVITY_PRESETS, EPParams, Monodomain, assemble_conductivity, simulate
from .stimulus import sites_from_meshes, whole_heart_schedule

# chamber -> (ionic model, conductivity preset)
CHAMBER_DEFAULTS = {
    "ventricles": ("surrogate-ventricular", "surrogate-ventricular"),
    "ra": ("surrogate-atrial", "surrogate-atrial"),
    "la": ("surrogate-atrial", "surrogate-atrial"),
}


@dataclass
class ChamberRun:
    activation: np.ndarray
    result: object


def simulate_heart(meshes, frames, params=None, protocol=None, ionic=None, conductivity=None):
    """Run every chamber of ``meshes`` under the shared schedule.

    The chambers share no nodes, so each is simulated on its own; a chamber
    stays at rest until its first stimulus, which is where its run starts.
    Returns ``{chamber: ChamberRun}`` with activation times on the common
    clock.
    """
    params = params or EPParams()
    protocol = protocol or whole_heart_schedule(sites_from_meshes(meshes), tuple(meshes))
    ionic = dict({k: v[0] for k, v in CHAMBER_DEFAULTS.items()}, **(ionic or {}))
    conductivity = dict(
        {k: CONDUCTIVITY_PRESETS[v[1]] for k, v in CHAMBER_DEFAULTS.items()}, **(conductivity or {})
    )
    out = {}
    for chamber, mesh in meshes.items():
        if chamber not in ionic:
            raise ConfigError(f"no ionic model for chamber '{chamber}'")
        sub = protocol.for_chamber(chamber)
        D = assemble_conductivity(mesh, frames.get(chamber), conductivity[chamber])
        model = Monodomain(mesh, D, ionic[chamber], params, sub)
        state = model.initial_state()
        if len(sub):
            start = min(s.start for s in sub)
            # snap to the time grid so every chamber shares the step times
            state.time = np.floor(start / params.dt + 1e-9) * params.dt
        res = simulate(model, state)
        out[chamber] = ChamberRun(activation=res.activation, result=res)
    return out


def atrioventricular_gap(runs, atria=("ra", "la"), ventricles=("ventricles",)):
    """Earliest ventricular minus latest atrial activation (ms); positive
    when the atria finish first. NaN if any of those nodes never activate."""
    a = [runs[c].activation for c in atria if c in runs]
    v = [runs[c].activation for c in ventricles if c in runs]
    a = np.concatenate(a) if a else np.array([np.nan])
    v = np.concatenate(v) if v else np.array([np.nan])
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))):
        return np.nan
    return float(v.min() - a.max())
