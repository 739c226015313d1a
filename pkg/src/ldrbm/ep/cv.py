"""Conduction-velocity measurement and the conductivity fitting loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from ..errors import FitError, MeasurementError
from ..generators import generate_slab
from .monodomain import ConductivitySpec, EPParams, run_simulation
from .stimulus import StimulusProtocol, face_stimulus

SLAB = (2.0, 0.7, 0.3)  # cm


def measure_cv(points, activation, axis=0, central=0.5):
    """Planar-wave velocity (cm/s) from a regression of activation time
    against position along ``axis`` over the central fraction of the
    extent. Raises MeasurementError when the selected activation is missing
    or not increasing along the axis."""
    x = np.asarray(points, dtype=np.float64)
    x = x[:, axis] if x.ndim == 2 else x
    t = np.asarray(activation, dtype=np.float64)
    if x.shape != t.shape:
        raise MeasurementError(f"{len(x)} positions for {len(t)} activation times")
    lo, hi = x.min(), x.max()
    margin = 0.5 * (1.0 - central) * (hi - lo)
    sel = (x >= lo + margin - 1e-12) & (x <= hi - margin + 1e-12)
    if np.any(~np.isfinite(t[sel])):
        raise MeasurementError(f"{int(np.sum(~np.isfinite(t[sel])))} node(s) in the measurement window never activated")
    xs, ts = x[sel], t[sel]
    levels, inv = np.unique(np.round(xs, 9), return_inverse=True)
    if len(levels) < 2:
        raise MeasurementError("measurement window spans fewer than two positions")
    if len(levels) > len(xs) // 2:
        edges = np.linspace(xs.min(), xs.max(), 21)
        inv = np.clip(np.digitize(xs, edges) - 1, 0, 19)
    means = np.bincount(inv, weights=ts) / np.maximum(np.bincount(inv), 1)
    means = means[np.bincount(inv) > 0]
    if np.any(np.diff(means) <= 0):
        raise MeasurementError("activation is not monotone along the measurement axis")
    slope = linregress(xs, ts).slope  # ms/cm
    return 1000.0 / slope


@dataclass
class FitResult:
    sigma: float
    cv: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)  # (sigma, measured cv or nan)


def slab_cv(sigma, ionic, h=0.035, dt=0.05, lengths=SLAB, bdf_order=3, mass="consistent", mesh=None, T_end=None):
    """Measured planar-wave velocity along x for conductivity ``sigma``.

    A planar wave along x only sees D_xx, so the tensor is taken isotropic.
    """
    mesh = mesh if mesh is not None else generate_slab(lengths, h)
    L = float(np.ptp(mesh.nodes[:, 0]))
    T_end = T_end or max(100.0, 400.0 * L)
    params = EPParams(dt=dt, bdf_order=bdf_order, T_end=T_end, stop_when_activated=True, mass=mass)
    res = run_simulation(mesh, None, ConductivitySpec.isotropic(sigma), ionic, StimulusProtocol((face_stimulus(mesh),)), params)
    return measure_cv(mesh.nodes, res.activation, axis=0)


def fit_conductivity(target_v, direction="f", ionic="surrogate-ventricular", h=0.035, dt=0.05, sigma0=1.0, rtol=0.01, max_iter=20, lengths=SLAB, bdf_order=3, mass="consistent"):
    """Fit the conductivity along ``direction`` (label only: the slab is
    oriented so that this direction is x) to a target velocity in cm/s by
    sigma <- sigma (target / measured)^2. A wave that fails to cross the
    slab quadruples sigma."""
    if not target_v > 0:
        raise FitError("target velocity must be positive")
    if direction not in ("f", "s", "n"):
        raise FitError(f"direction must be f, s or n, got {direction!r}")
    mesh = generate_slab(lengths, h)
    sigma = float(sigma0)
    trace = []
    for it in range(1, max_iter + 1):
        try:
            v = slab_cv(sigma, ionic, dt=dt, bdf_order=bdf_order, mass=mass, mesh=mesh)
        except MeasurementError:
            trace.append((sigma, np.nan))
            sigma *= 4.0
            continue
        trace.append((sigma, v))
        if abs(v - target_v) / target_v < rtol:
            return FitResult(sigma, v, it, True, trace)
        sigma *= (target_v / v) ** 2
    raise FitError(f"no conductivity within {rtol:.0%} of {target_v} cm/s after {max_iter} iterations", trace)
