"""Ventricular rule-based fiber generation (R, B and D variants)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .frames import angle_at, axis_with_fallback, bislerp, polish, rotate_frame, septal_angle
from .laplace import DirichletSpec, nodal_gradient, solve_laplace
from .mesh import METHOD_ALIASES, TagSchema, resolve_union


@dataclass(frozen=True)
class VentricularAngles:
    """Helix (alpha) and sheet (beta) angles in degrees."""

    alpha_epi_l: float = -60.0
    alpha_endo_l: float = 60.0
    alpha_epi_r: float = -25.0
    alpha_endo_r: float = 90.0
    beta_epi_l: float = 20.0
    beta_endo_l: float = -20.0
    beta_epi_r: float = 20.0
    beta_endo_r: float = 0.0
    alpha_epi_ot: float | None = None
    alpha_endo_ot: float | None = None
    beta_epi_ot: float | None = None
    beta_endo_ot: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not np.isfinite(v) or abs(v) > 180.0:
                raise ConfigError(f"angle {f.name}={v} outside [-180, 180] degrees")
        ot = [self.alpha_epi_ot, self.alpha_endo_ot, self.beta_epi_ot, self.beta_endo_ot]
        if any(v is None for v in ot) and not all(v is None for v in ot):
            raise ConfigError("outflow-tract angles must be given all together or not at all")

    @property
    def has_ot(self):
        return self.alpha_epi_ot is not None

    @classmethod
    def zero(cls):
        return cls(*([0.0] * 8))


ANGLE_PRESETS = {
    "ideal": VentricularAngles(),
    "realistic": VentricularAngles(alpha_epi_ot=0.0, alpha_endo_ot=90.0, beta_epi_ot=0.0, beta_endo_ot=0.0),
    "zero": VentricularAngles.zero(),
}


@dataclass
class FiberResult:
    """Frames (N, 3, 3) with columns [f, n, s], the unit transmural
    direction each frame was built on, and every intermediate field."""

    frames: np.ndarray
    transmural: np.ndarray
    fields: dict = field(default_factory=dict)
    method: str = ""

    @property
    def fiber(self):
        return self.frames[:, :, 0]

    @property
    def sheet(self):
        return self.frames[:, :, 2]

    @property
    def crossfiber(self):
        return self.frames[:, :, 1]


def _names(mesh, *names):
    return [n for n in resolve_union(mesh, names)]


def _solve(mesh, tol, *groups):
    entries = []
    for names, value in groups:
        entries.extend((n, value) for n in _names(mesh, *names))
    return solve_laplace(mesh, DirichletSpec(tuple(entries)), tol=tol)


def _endo_sets(mesh):
    lv = ["lv"] + (["la-apex"] if mesh.has_tag("la-apex") else [])
    if mesh.has_tag("rv"):
        rv = ["rv"]
    else:
        rv = ["rs", "rv-s"]
    if mesh.has_tag("ra-apex"):
        rv = rv + ["ra-apex"]
    return lv, rv


def _unit(v):
    n = np.linalg.norm(v, axis=1)
    return v / np.where(n > 0, n, 1.0)[:, None]


def base_normal(mesh):
    """Area-weighted mean outward normal of the base facets."""
    m = mesh.facet_mask(*_names(mesh, "base"))
    if not m.any():
        m = mesh.facet_mask(*_names(mesh, "rings"))
    v = mesh.facet_vector_areas()[m].sum(axis=0)
    return v / np.linalg.norm(v)


def _xi(mesh, tol, lv_value):
    lv, rv = _endo_sets(mesh)
    return _solve(mesh, tol, (lv, lv_value), (rv, -1.0))


def _angles(a, left, d_l, d_r):
    d = np.where(left, d_l, d_r)
    alpha = angle_at(d, np.where(left, a.alpha_endo_l, a.alpha_endo_r), np.where(left, a.alpha_epi_l, a.alpha_epi_r))
    beta = angle_at(d, np.where(left, a.beta_endo_l, a.beta_endo_r), np.where(left, a.beta_epi_l, a.beta_epi_r))
    return d, alpha, beta


def _rossi(mesh, angles, tol):
    lv, _ = _endo_sets(mesh)
    one = lv + ["rv-s"] + (["ra-apex"] if mesh.has_tag("ra-apex") else [])
    phi = _solve(mesh, tol, (one, 1.0), (["epi", "rs"], 0.0))
    g = nodal_gradient(mesh, phi)
    k = np.broadcast_to(base_normal(mesh), g.shape)
    Q = axis_with_fallback(k, g, mesh.nodes)
    xi = _xi(mesh, tol, 1.0)
    left = xi >= 0
    d = np.clip(phi, 0.0, 1.0)
    _, alpha, beta = _angles(angles, left, d, d)
    F = rotate_frame(Q, alpha, beta)
    return F, Q[:, :, 2], {"phi": phi, "xi": xi, "alpha": alpha, "beta": beta}


def canonical_signs(Q, normal_ref, transmural_ref):
    """Pick among the four proper sign patterns of a frame the one whose
    normal axis follows ``normal_ref`` and transmural axis follows
    ``transmural_ref``."""
    sn = np.where(np.einsum("ij,ij->i", Q[:, :, 1], normal_ref) < 0, -1.0, 1.0)
    st = np.where(np.einsum("ij,ij->i", Q[:, :, 2], transmural_ref) < 0, -1.0, 1.0)
    return Q * np.stack([sn * st, sn, st], axis=1)[:, None, :]


def _bayer(mesh, angles, tol, septum_threshold=0.05):
    lv, rv = _endo_sets(mesh)
    phi_l = _solve(mesh, tol, (lv, 1.0), (["epi"] + rv, 0.0))
    phi_r = _solve(mesh, tol, (rv, 1.0), (["epi"] + lv, 0.0))
    phi_epi = _solve(mesh, tol, (["epi"], 1.0), (lv + rv, 0.0))
    psi = _solve(mesh, tol, (["rings"], 1.0), (["la-apex"], 0.0))
    gpsi = nodal_gradient(mesh, psi)
    X = mesh.nodes
    P_l = axis_with_fallback(gpsi, nodal_gradient(mesh, phi_l), X)
    P_r = axis_with_fallback(gpsi, nodal_gradient(mesh, phi_r), X)
    P_epi = axis_with_fallback(gpsi, nodal_gradient(mesh, phi_epi), X)
    den = phi_l + phi_r
    t_endo = np.where(den > 1e-12, phi_r / np.where(den > 1e-12, den, 1.0), 0.5)
    t_epi = np.clip(phi_epi, 0.0, 1.0)
    P_endo = bislerp(P_l, P_r, np.clip(t_endo, 0.0, 1.0))
    Q = polish(bislerp(P_endo, P_epi, t_epi))
    # bislerp returns axis lines; orient them like the single-field variants
    # (apex to base, right endocardium towards left endocardium)
    Q = canonical_signs(Q, gpsi, 2.0 * nodal_gradient(mesh, phi_l) - nodal_gradient(mesh, phi_r))
    xi = _xi(mesh, tol, 1.0)
    left = xi >= 0
    d_l, d_r = np.clip(phi_l, 0.0, 1.0), np.clip(phi_r, 0.0, 1.0)
    d, alpha, beta = _angles(angles, left, d_l, d_r)
    septum = np.asarray(np.minimum(phi_l, phi_r) > septum_threshold)
    a_endo = np.where(left, angles.alpha_endo_l, angles.alpha_endo_r)
    b_endo = np.where(left, angles.beta_endo_l, angles.beta_endo_r)
    # depth from the node's own endocardium, so that the endocardial value
    # is reached on both septal surfaces
    alpha = np.where(septum, septal_angle(1.0 - d, a_endo), alpha)
    beta = np.where(septum, septal_angle(1.0 - d, b_endo), beta)
    F = rotate_frame(Q, alpha, beta)
    fields_ = {
        "phi_l": phi_l,
        "phi_r": phi_r,
        "phi_epi": phi_epi,
        "psi": psi,
        "xi": xi,
        "septum": septum.astype(np.int32),
        "alpha": alpha,
        "beta": beta,
    }
    return F, Q[:, :, 2], fields_


def _doste(mesh, angles, tol, ot_width=0.5):
    lv, rv = _endo_sets(mesh)
    la, ra = ["la-apex"], ["ra-apex"]
    phi = _solve(mesh, tol, (lv, 2.0), (rv, -1.0), (["epi"], 0.0))
    psi_ab_l = _solve(mesh, tol, (["mv"], 1.0), (la, 0.0))
    psi_ab_r = _solve(mesh, tol, (["tv"], 1.0), (ra, 0.0))
    psi_ot_l = _solve(mesh, tol, (["av"], 1.0), (la, 0.0))
    psi_ot_r = _solve(mesh, tol, (["pv"], 1.0), (ra, 0.0))
    w_l = _solve(mesh, tol, (["mv"] + la, 1.0), (["av"], 0.0))
    w_r = _solve(mesh, tol, (["tv"] + ra, 1.0), (["pv"], 0.0))
    xi = _xi(mesh, tol, 2.0)
    left = xi >= 0
    grad = lambda u: nodal_gradient(mesh, u)  # noqa: E731
    k_l = w_l[:, None] * grad(psi_ab_l) + (1.0 - w_l[:, None]) * grad(psi_ot_l)
    k_r = w_r[:, None] * grad(psi_ab_r) + (1.0 - w_r[:, None]) * grad(psi_ot_r)
    k = np.where(left[:, None], k_l, k_r)
    Q = axis_with_fallback(k, grad(phi), mesh.nodes)
    d_l = np.clip(phi / 2.0, 0.0, 1.0)
    d_r = np.clip(np.abs(phi), 0.0, 1.0)
    d, alpha, beta = _angles(angles, left, d_l, d_r)
    w = np.where(left, w_l, w_r)
    if angles.has_ot:
        s = np.clip((ot_width - w) / ot_width, 0.0, 1.0)
        a_ot = angle_at(d, angles.alpha_endo_ot, angles.alpha_epi_ot)
        b_ot = angle_at(d, angles.beta_endo_ot, angles.beta_epi_ot)
        alpha = s * a_ot + (1.0 - s) * alpha
        beta = s * b_ot + (1.0 - s) * beta
    F = rotate_frame(Q, alpha, beta)
    fields_ = {
        "phi": phi,
        "psi_ab_l": psi_ab_l,
        "psi_ab_r": psi_ab_r,
        "psi_ot_l": psi_ot_l,
        "psi_ot_r": psi_ot_r,
        "w_l": w_l,
        "w_r": w_r,
        "xi": xi,
        "alpha": alpha,
        "beta": beta,
    }
    return F, Q[:, :, 2], fields_


_METHODS = {"R-RBM": _rossi, "B-RBM": _bayer, "D-RBM": _doste}


def generate_ventricular_fibers(mesh, method="B", angles=None, tol=1e-10, **options):
    """Fiber, sheet and cross-fiber directions on a tagged biventricle.

    ``method`` is R, B or D (or the long names R-RBM, ...). ``options`` are
    passed to the variant: ``septum_threshold`` for B, ``ot_width`` for D.
    """
    name = METHOD_ALIASES.get(method, method)
    if name not in _METHODS:
        raise ConfigError(f"unknown ventricular method '{method}'; expected R, B or D")
    TagSchema.for_method(name).check(mesh)
    if angles is None:
        angles = ANGLE_PRESETS["ideal"]
    elif isinstance(angles, str):
        if angles not in ANGLE_PRESETS:
            raise ConfigError(f"unknown angle preset '{angles}'; expected one of {sorted(ANGLE_PRESETS)}")
        angles = ANGLE_PRESETS[angles]
    elif isinstance(angles, dict):
        angles = replace(ANGLE_PRESETS["ideal"], **angles)
    F, et, flds = _METHODS[name](mesh, angles, tol, **options)
    return FiberResult(frames=F, transmural=et, fields=flds, method=name)


def helix_angle(frames, transmural, long_axis=(0.0, 0.0, 1.0)):
    """Helix angle in degrees: inclination of the fiber above the
    circumferential direction, measured in the plane normal to
    ``transmural``, with the long axis as the upward reference."""
    f = np.asarray(frames)[:, :, 0]
    et = _unit(np.asarray(transmural, dtype=np.float64))
    L = np.asarray(long_axis, dtype=np.float64)
    en = _unit(L[None, :] - (et @ L)[:, None] * et)
    ec = np.cross(en, et)
    h = np.degrees(np.arctan2(np.einsum("ij,ij->i", f, en), np.einsum("ij,ij->i", f, ec)))
    # fibers are lines: fold into (-90, 90]
    return np.where(h > 90.0, h - 180.0, np.where(h <= -90.0, h + 180.0, h))
