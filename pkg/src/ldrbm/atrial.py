"""Atrial rule-based fiber generation with bundle selection."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import IntEnum

import numpy as np

from .errors import ConfigError
from .frames import axis_with_fallback
from .laplace import DirichletSpec, nodal_gradient, solve_laplace
from .mesh import TagSchema


class Bundle(IntEnum):
    TV = 1
    CT = 2
    ICV = 3
    SCV = 4
    RAW = 5
    IB = 6
    RAS_TOP = 7
    RAS_CENTRE = 8
    RAS_BOTTOM = 9
    IST_RAA_RAW = 10
    MV = 11
    LPV_RPV = 12
    LA_BODY = 13


RA_BUNDLES = tuple(b for b in Bundle if b <= Bundle.IST_RAA_RAW)
LA_BUNDLES = (Bundle.MV, Bundle.LPV_RPV, Bundle.LA_BODY)

# which intra-atrial distance supplies the normal direction
FIELD_NAMES = ("psi_ab", "psi_v", "psi_r", "psi_w")
AB, V, R, W = range(4)


@dataclass(frozen=True)
class AtrialTaus:
    tau_mv: float = 0.65
    tau_lpv: float = 0.65
    tau_rpv: float = 0.10
    tau_tv: float = 0.90
    tau_icv: float = 0.90
    tau_scv: float = 0.10
    tau_ct_plus: float = -0.10
    tau_ct_minus: float = -0.18
    tau_ib: float = 0.35
    tau_ras: float = 0.135
    tau_raw: float = 0.55

    def __post_init__(self):
        vals = asdict(self)
        bad = [k for k, v in vals.items() if not np.isfinite(v)]
        if bad:
            raise ConfigError(f"non-finite thresholds: {bad}")
        if not self.tau_ct_minus < self.tau_ct_plus:
            raise ConfigError("tau_ct_minus must be smaller than tau_ct_plus")
        if not self.tau_scv < self.tau_icv:
            raise ConfigError("tau_scv must be smaller than tau_icv")


TAU_PRESETS = {
    "ideal": AtrialTaus(),
    "zygote": AtrialTaus(0.85, 0.85, 0.20, 0.90, 0.85, 0.30, -0.55, -0.60, -0.25, -0.10, 0.60),
    "riunet": AtrialTaus(0.85, 0.85, 0.20, 0.89, 0.90, 0.20, -0.10, -0.13, 0.06, 0.13, 0.55),
}


def get_taus(taus):
    if taus is None:
        return TAU_PRESETS["ideal"]
    if isinstance(taus, AtrialTaus):
        return taus
    if isinstance(taus, str):
        key = taus.lower()
        if key not in TAU_PRESETS:
            raise ConfigError(f"unknown tau preset '{taus}'; expected one of {sorted(TAU_PRESETS)}")
        return TAU_PRESETS[key]
    return AtrialTaus(**dict(taus))


def select_bundle_ra(psi_ab, psi_v, psi_r, psi_w, taus):
    """Right-atrial bundle of a single node: (Bundle, field index)."""
    t = taus
    veins = psi_v >= t.tau_icv or psi_v <= t.tau_scv
    caval = Bundle.ICV if psi_v >= t.tau_icv else Bundle.SCV
    if psi_r >= t.tau_tv:
        return Bundle.TV, R
    if psi_r < t.tau_raw:
        if psi_w >= t.tau_ct_minus and psi_w <= t.tau_ct_plus:
            return Bundle.CT, W
        if psi_w < t.tau_ct_minus:
            if veins:
                return caval, V
            return Bundle.RAW, AB
        if veins:
            return caval, V
        if psi_w <= t.tau_ib:
            return Bundle.IB, V
        if psi_w >= t.tau_ras:
            return Bundle.RAS_CENTRE, R
        return Bundle.RAS_TOP, W
    if veins:
        return caval, V
    if psi_w >= 0:
        return Bundle.RAS_BOTTOM, R
    return Bundle.IST_RAA_RAW, AB


def select_bundle_la(psi_ab, psi_v, psi_r, taus):
    """Left-atrial bundle of a single node: (Bundle, field index)."""
    if psi_r >= taus.tau_mv:
        return Bundle.MV, R
    if psi_v >= taus.tau_lpv or psi_v <= taus.tau_rpv:
        return Bundle.LPV_RPV, V
    return Bundle.LA_BODY, AB


def _first(n, cases, default):
    """np.select over (mask, label, field) triples; first match wins."""
    lab = np.select([c[0] for c in cases], [c[1] for c in cases], default[0])
    fld = np.select([c[0] for c in cases], [c[2] for c in cases], default[1])
    return lab.astype(np.int32), fld.astype(np.int32)


def select_bundles_ra(psi_ab, psi_v, psi_r, psi_w, taus):
    """Vectorised :func:`select_bundle_ra`."""
    t = taus
    psi_v, psi_r, psi_w = (np.asarray(a, dtype=np.float64) for a in (psi_v, psi_r, psi_w))
    veins = (psi_v >= t.tau_icv) | (psi_v <= t.tau_scv)
    caval = np.where(psi_v >= t.tau_icv, int(Bundle.ICV), int(Bundle.SCV))
    tv = psi_r >= t.tau_tv
    low = ~tv & (psi_r < t.tau_raw)
    high = ~tv & ~low
    ct = low & (psi_w >= t.tau_ct_minus) & (psi_w <= t.tau_ct_plus)
    below = low & ~ct & (psi_w < t.tau_ct_minus)
    above = low & ~ct & ~below
    cases = [
        (tv, int(Bundle.TV), R),
        (ct, int(Bundle.CT), W),
        (below & veins, caval, V),
        (below, int(Bundle.RAW), AB),
        (above & veins, caval, V),
        (above & (psi_w <= t.tau_ib), int(Bundle.IB), V),
        (above & (psi_w >= t.tau_ras), int(Bundle.RAS_CENTRE), R),
        (above, int(Bundle.RAS_TOP), W),
        (high & veins, caval, V),
        (high & (psi_w >= 0), int(Bundle.RAS_BOTTOM), R),
    ]
    return _first(len(psi_r), cases, (int(Bundle.IST_RAA_RAW), AB))


def select_bundles_la(psi_ab, psi_v, psi_r, taus):
    """Vectorised :func:`select_bundle_la`."""
    psi_v, psi_r = np.asarray(psi_v, dtype=np.float64), np.asarray(psi_r, dtype=np.float64)
    mv = psi_r >= taus.tau_mv
    pv = (psi_v >= taus.tau_lpv) | (psi_v <= taus.tau_rpv)
    cases = [(mv, int(Bundle.MV), R), (pv, int(Bundle.LPV_RPV), V)]
    return _first(len(psi_r), cases, (int(Bundle.LA_BODY), AB))


def _side(side):
    s = str(side).upper()
    if s in ("LA", "ATRIAL-LA"):
        return "LA"
    if s in ("RA", "ATRIAL-RA"):
        return "RA"
    raise ConfigError(f"unknown atrial side '{side}'; expected LA or RA")


def _spec(*groups):
    return DirichletSpec(tuple((n, v) for names, v in groups for n in names))


def solve_atrial_distances(mesh, side, tol=1e-10):
    """Transmural distance ``phi`` and the intra-atrial distances
    ``psi_ab``, ``psi_v``, ``psi_r`` (and ``psi_w`` for the RA)."""
    side = _side(side)
    TagSchema.for_method(side).check(mesh)
    if side == "LA":
        specs = {
            "phi": _spec((["epi"], 1.0), (["endo"], 0.0)),
            "psi_ab": _spec((["rpv"], 2.0), (["mv"], 1.0), (["lpv"], 0.0), (["appendage"], -1.0)),
            "psi_v": _spec((["rpv"], 1.0), (["lpv"], 0.0)),
            "psi_r": _spec((["mv"], 1.0), (["lpv", "rpv", "appendage"], 0.0)),
        }
    else:
        tv, top = ["tv-s", "tv-f"], ["top-epi", "top-endo"]
        specs = {
            "phi": _spec((["epi", "top-epi"], 1.0), (["endo", "top-endo"], 0.0)),
            "psi_ab": _spec((["icv"], 2.0), (tv, 1.0), (["scv"], 0.0), (["appendage"], -1.0)),
            "psi_v": _spec((["icv"], 1.0), (["scv", "appendage"], 0.0)),
            "psi_r": _spec((tv, 1.0), (top, 0.0)),
            "psi_w": _spec((["tv-s"], 1.0), (["tv-f"], -1.0)),
        }
    return {k: solve_laplace(mesh, s, tol=tol) for k, s in specs.items()}


@dataclass
class AtrialResult:
    frames: np.ndarray
    bundle: np.ndarray
    choice: np.ndarray
    fields: dict
    side: str

    @property
    def fiber(self):
        return self.frames[:, :, 0]

    @property
    def transmural(self):
        return self.frames[:, :, 2]

    def counts(self):
        labels = RA_BUNDLES if self.side == "RA" else LA_BUNDLES
        return {b.name: int(np.count_nonzero(self.bundle == b)) for b in labels}


def generate_atrial_fibers(mesh, side, taus=None, tol=1e-10, distances=None):
    """Frames ``axis(grad psi_i, grad phi)`` with ``psi_i`` chosen per node by
    bundle selection. No transmural rotation is applied."""
    side = _side(side)
    taus = get_taus(taus)
    d = distances if distances is not None else solve_atrial_distances(mesh, side, tol)
    if side == "RA":
        label, choice = select_bundles_ra(d["psi_ab"], d["psi_v"], d["psi_r"], d["psi_w"], taus)
    else:
        label, choice = select_bundles_la(d["psi_ab"], d["psi_v"], d["psi_r"], taus)
    grads = {name: nodal_gradient(mesh, d[name]) for name in FIELD_NAMES if name in d}
    k = np.zeros((mesh.n_nodes, 3))
    for i, name in enumerate(FIELD_NAMES):
        if name in grads:
            sel = choice == i
            k[sel] = grads[name][sel]
    Q = axis_with_fallback(k, nodal_gradient(mesh, d["phi"]), mesh.nodes)
    fields_ = dict(d)
    fields_["bundle"] = label
    return AtrialResult(frames=Q, bundle=label, choice=choice, fields=fields_, side=side)
