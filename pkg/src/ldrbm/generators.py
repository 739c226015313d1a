"""Procedural meshes: benchmark slab, idealized biventricle and atria.

Curved geometries are voxelized on a uniform grid of cubes. Cube Q1
stiffness matrices have no positive off-diagonal entries, so Laplace
solves on these meshes obey the discrete maximum principle exactly;
boundaries are staircased at the scale of ``h``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import GeometryError
from .mesh import Mesh

# corner offsets in VTK hexahedron order
_CORNERS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
)
# neighbour offset for each entry of fem.HEX_FACES
_FACE_DIRS = np.array([[0, 0, -1], [0, 0, 1], [0, -1, 0], [0, 1, 0], [-1, 0, 0], [1, 0, 0]])
_FACE_LOCAL = np.array(
    [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [2, 3, 7, 6], [0, 4, 7, 3], [1, 2, 6, 5]]
)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class _Voxels:
    """Hexahedral mesh of the cells selected by a boolean mask."""

    def __init__(self, mask, origin, spacing, keep_largest=True):
        mask = np.asarray(mask, dtype=bool)
        if keep_largest and mask.any():
            lab, nlab = ndimage.label(mask)
            if nlab > 1:
                sizes = np.bincount(lab.ravel())[1:]
                mask = lab == (1 + int(np.argmax(sizes)))
        if not mask.any():
            raise GeometryError("geometry contains no cells at this resolution")
        self.mask = mask
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (3,)).copy()
        nx, ny, nz = mask.shape
        cells = np.argwhere(mask)
        self.cells = cells
        corner = cells[:, None, :] + _CORNERS[None]
        gid = (corner[..., 0] * (ny + 1) + corner[..., 1]) * (nz + 1) + corner[..., 2]
        used, inv = np.unique(gid, return_inverse=True)
        self.elements = inv.reshape(gid.shape)
        ijk = np.stack(np.unravel_index(used, (nx + 1, ny + 1, nz + 1)), axis=1)
        self.nodes = self.origin + ijk * self.spacing
        self.cell_centers = self.origin + (cells + 0.5) * self.spacing

        padded = np.pad(mask, 1)
        faces, out_c, in_c, dirs = [], [], [], []
        for f in range(6):
            d = _FACE_DIRS[f]
            nb = cells + d + 1
            outside = ~padded[nb[:, 0], nb[:, 1], nb[:, 2]]
            idx = np.where(outside)[0]
            faces.append(np.stack([idx, np.full(len(idx), f)], axis=1))
        fe = np.concatenate(faces)
        order = np.lexsort((fe[:, 1], fe[:, 0]))
        fe = fe[order]
        self.face_elem = fe[:, 0]
        self.face_dir = _FACE_DIRS[fe[:, 1]].astype(float)
        self.facets = self.elements[fe[:, 0][:, None], _FACE_LOCAL[fe[:, 1]]]
        self.face_centers = self.nodes[self.facets].mean(axis=1)
        self.in_centers = self.cell_centers[fe[:, 0]]
        self.out_centers = self.in_centers + self.face_dir * self.spacing

    def mesh(self, face_tags, tags, groups=None, landmarks=None):
        used = sorted(set(np.unique(face_tags).tolist()))
        tags = {k: v for k, v in tags.items() if v in used}
        return Mesh(self.nodes, self.elements, self.facets, face_tags, tags, groups or {}, landmarks or {})


def _grid(lo, hi, h):
    """Cell grid with spacing h covering [lo, hi]; anchored so that 0 is a
    cell boundary on every axis."""
    lo = np.floor(np.asarray(lo) / h) * h
    hi = np.ceil(np.asarray(hi) / h) * h
    n = np.round((hi - lo) / h).astype(int)
    centers = [lo[i] + (np.arange(n[i]) + 0.5) * h for i in range(3)]
    X, Y, Z = np.meshgrid(*centers, indexing="ij")
    return lo, X, Y, Z


# ---------------------------------------------------------------------------
# slab

SLAB_TAGS = {"x0": 1, "x1": 2, "y0": 3, "y1": 4, "z0": 5, "z1": 6}


def generate_slab(lengths=(2.0, 0.7, 0.3), h=0.035, origin=(0.0, 0.0, 0.0)):
    """Structured box mesh with faces tagged x0, x1, y0, y1, z0, z1.

    Each axis gets ``round(L/h)`` elements (at least one), so spacing equals
    ``h`` whenever ``h`` divides the extent.
    """
    L = np.asarray(lengths, dtype=float)
    if np.any(L <= 0) or h <= 0:
        raise GeometryError("slab extents and h must be positive")
    n = np.maximum(1, np.round(L / h).astype(int))
    vox = _Voxels(np.ones(tuple(n), dtype=bool), origin, L / n, keep_largest=False)
    d = vox.face_dir
    names = np.array(["x0", "x1", "y0", "y1", "z0", "z1"])
    axis = np.argmax(np.abs(d), axis=1)
    positive = d[np.arange(len(d)), axis] > 0
    which = names[2 * axis + positive]
    ftags = np.array([SLAB_TAGS[w] for w in which], dtype=np.int32)
    lm = {"extent": L, "origin": np.asarray(origin, float)}
    return vox.mesh(ftags, SLAB_TAGS, landmarks=lm)


# ---------------------------------------------------------------------------
# biventricle

BIV_TAGS = {
    "epi": 1,
    "lv": 2,
    "rs": 3,
    "rv-s": 4,
    "mv": 5,
    "av": 6,
    "tv": 7,
    "pv": 8,
    "la-apex": 9,
    "ra-apex": 10,
}
BIV_GROUPS = {"rv": ("rs", "rv-s"), "rings": ("mv", "av", "tv", "pv"), "base": ("mv", "av", "tv", "pv")}


def generate_ideal_biventricle(
    lv_semi_axes=(1.0, 1.0, 2.5),
    lv_wall=0.5,
    rv_semi_axes=(1.9, 1.4, 2.0),
    rv_wall=0.3,
    rv_offset=0.9,
    truncation=0.0,
    h=0.1,
    septum_threshold=0.3,
    av_sector=(30.0, 100.0),
    pv_sector=(45.0, 135.0),
):
    """Two intersecting truncated ellipsoids.

    The left cavity is the ellipsoid with ``lv_semi_axes`` centred at the
    origin, its wall is ``lv_wall`` thick. The right cavity is the part of the
    ellipsoid with ``rv_semi_axes`` centred at ``(rv_offset, 0, 0)`` that lies
    outside the left epicardium. Both are cut by the plane
    ``z = truncation``; the long axis is +z (base up).

    The base plane is split into valve rings by polar angle: ``av`` is the
    sector ``av_sector`` (degrees) of the left ring, ``pv`` the sector
    ``pv_sector`` of the right ring measured about the right cavity axis.
    Right endocardial facets closer to the left endocardium than
    ``lv_wall + septum_threshold`` form the septal tag ``rs``.
    """
    a, b, c = (float(v) for v in lv_semi_axes)
    ar, br, cr = (float(v) for v in rv_semi_axes)
    t, tr = float(lv_wall), float(rv_wall)
    if min(a, b, c, ar, br, cr) <= 0 or t <= 0 or tr <= 0 or h <= 0:
        raise GeometryError("semi-axes, wall thicknesses and h must be positive")
    if rv_offset + ar <= a + t:
        raise GeometryError("right cavity does not reach past the left epicardium (non-nested ellipsoids)")
    if rv_offset - ar >= 0.0:
        raise GeometryError("right cavity does not wrap the left free wall (non-nested ellipsoids)")
    if truncation > 0.5 * min(c, cr) or truncation < -0.5 * min(c, cr):
        raise GeometryError("truncation plane too far from the equator")

    zt = truncation

    def q_lv_endo(x, y, z):
        return (x / a) ** 2 + (y / b) ** 2 + (z / c) ** 2

    def q_lv_epi(x, y, z):
        return (x / (a + t)) ** 2 + (y / (b + t)) ** 2 + (z / (c + t)) ** 2

    def q_rv_endo(x, y, z):
        return ((x - rv_offset) / ar) ** 2 + (y / br) ** 2 + (z / cr) ** 2

    def q_rv_epi(x, y, z):
        return ((x - rv_offset) / (ar + tr)) ** 2 + (y / (br + tr)) ** 2 + (z / (cr + tr)) ** 2

    def regions(P):
        x, y, z = P[..., 0], P[..., 1], P[..., 2]
        lv_cav = q_lv_endo(x, y, z) < 1
        lv_in = q_lv_epi(x, y, z) < 1
        rv_cav = (q_rv_endo(x, y, z) < 1) & ~lv_in
        rv_in = q_rv_epi(x, y, z) < 1
        below = z < zt
        myo = below & ((lv_in & ~lv_cav) | (rv_in & ~rv_cav & ~lv_in))
        return myo, lv_cav & below, rv_cav & below, below

    ymax = max(b + t, br + tr) + h
    lo = np.array([min(-(a + t), rv_offset - ar - tr) - h, -ymax, -max(c + t, cr + tr) - h - zt])
    hi = np.array([rv_offset + ar + tr + h, ymax, 0.0])
    # grid anchored so that the truncation plane is a cell boundary
    lo_g, X, Y, Z = _grid(lo, hi, h)
    Z = Z + zt
    lo_g = lo_g + np.array([0.0, 0.0, zt])
    P = np.stack([X, Y, Z], axis=-1)
    myo, _, _, _ = regions(P)
    vox = _Voxels(myo, lo_g, h)

    fc, oc = vox.face_centers, vox.out_centers
    _, lv_cav, rv_cav, below = regions(oc)
    ftag = np.full(len(fc), BIV_TAGS["epi"], dtype=np.int32)
    ftag[lv_cav] = BIV_TAGS["lv"]
    ftag[rv_cav] = BIV_TAGS["rv-s"]
    base = ~below
    in_left_ring = q_lv_epi(fc[:, 0], fc[:, 1], fc[:, 2] - 0.5 * h) < 1
    th_l = np.degrees(np.arctan2(fc[:, 1], fc[:, 0]))
    th_r = np.degrees(np.arctan2(fc[:, 1], fc[:, 0] - rv_offset))
    is_av = (th_l >= av_sector[0]) & (th_l <= av_sector[1])
    is_pv = (th_r >= pv_sector[0]) & (th_r <= pv_sector[1])
    ftag[base & in_left_ring] = np.where(is_av, BIV_TAGS["av"], BIV_TAGS["mv"])[base & in_left_ring]
    ftag[base & ~in_left_ring] = np.where(is_pv, BIV_TAGS["pv"], BIV_TAGS["tv"])[base & ~in_left_ring]

    def apex_patch(tag_value, new_value):
        sel = np.where(ftag == tag_value)[0]
        zmin = fc[sel, 2].min()
        low = sel[np.abs(fc[sel, 2] - zmin) < 1e-9]
        p0 = fc[low].mean(axis=0)
        near = sel[np.linalg.norm(fc[sel] - p0, axis=1) <= 2 * h + 1e-12]
        ftag[near] = new_value
        return p0

    lv_apex = apex_patch(BIV_TAGS["lv"], BIV_TAGS["la-apex"])
    rv_apex = apex_patch(BIV_TAGS["rv-s"], BIV_TAGS["ra-apex"])

    lv_faces = fc[(ftag == BIV_TAGS["lv"]) | (ftag == BIV_TAGS["la-apex"])]
    rv_sel = np.where(ftag == BIV_TAGS["rv-s"])[0]
    dist, _ = cKDTree(lv_faces).query(fc[rv_sel])
    ftag[rv_sel[dist < t + septum_threshold]] = BIV_TAGS["rs"]

    zm = zt - 0.5 * c
    s = np.sqrt(max(0.0, 1 - (zm / c) ** 2))
    zr = zt - 0.5 * min(cr, c)
    se = np.sqrt(max(0.0, 1 - (zr / (c + t)) ** 2))
    sr = np.sqrt(max(0.0, 1 - (zr / cr) ** 2))
    landmarks = {
        "long-axis": (0.0, 0.0, 1.0),
        "axis-origin": (0.0, 0.0, zt),
        "base-height": (zt,),
        "apex-height": (-(c + t),),
        "lv-apex": lv_apex,
        "rv-apex": rv_apex,
        "lv-septal": (a * s, 0.0, zm),
        "lv-lateral": (-a * s, 0.0, zm),
        "lv-anterior": (a * s * np.cos(np.radians(60)), b * s * np.sin(np.radians(60)), zm),
        "lv-posterior": (-0.3 * a * s, -0.95 * b * s, zt - 0.2 * c),
        "rv-septal": ((a + t) * se, 0.0, zr),
        "rv-lateral": (rv_offset + ar * sr, 0.0, zr),
        "geometry": (a, b, c, t, ar, br, cr, tr, rv_offset, zt, h),
    }
    return vox.mesh(ftag, BIV_TAGS, BIV_GROUPS, landmarks)


# ---------------------------------------------------------------------------
# atria

LA_TAGS = {"epi": 1, "endo": 2, "appendage": 3, "mv": 4, "lpv": 5, "rpv": 6}
RA_TAGS = {
    "epi": 1,
    "endo": 2,
    "appendage": 3,
    "icv": 4,
    "scv": 5,
    "cs": 6,
    "tv-s": 7,
    "tv-f": 8,
    "top-epi": 9,
    "top-endo": 10,
}
RA_GROUPS = {"tv": ("tv-s", "tv-f"), "top": ("top-epi", "top-endo")}

# hole: direction from the shell centre and angular radius in degrees
LA_HOLES = {
    "mv": ((0.0, 0.55, -0.85), 50.0),
    "lpv": ((-0.75, -0.45, 0.5), 22.0),
    "rpv": ((0.75, -0.45, 0.5), 22.0),
    "appendage": ((-0.8, 0.45, 0.35), 15.0),
}
RA_HOLES = {
    "tv": ((0.0, 0.75, -0.66), 50.0),
    "scv": ((0.0, -0.3, 0.95), 18.0),
    "icv": ((0.0, -0.75, -0.66), 20.0),
    "cs": ((-0.65, -0.2, -0.73), 9.0),
    "appendage": ((0.6, 0.55, 0.58), 15.0),
}
# stimulus sites as directions from the centre (septum at +x for LA, -x for RA)
LA_SITES = {
    "BB": (0.45, 0.45, 0.75),
    "FO": (0.97, -0.15, 0.05),
    "CSM": (0.45, -0.35, -0.82),
}
RA_SITES = {"SAN": (0.35, -0.25, 0.9)}


def generate_ideal_atrium(
    side="LA",
    radius=1.5,
    thickness=0.2,
    holes=None,
    h=0.05,
    center=(0.0, 0.0, 0.0),
    top_width=0.15,
    septal_direction=None,
):
    """Spherical shell of mid-surface ``radius`` and wall ``thickness`` with
    circular holes (cones about the centre).

    ``holes`` maps tag names to ``(direction, angular_radius_deg)``. For the
    RA the ``tv`` hole is split into ``tv-s`` and ``tv-f`` by the great-circle
    plane through the icv and scv centres, and the geodesic strip of
    half-width ``top_width`` (cm) joining the two caval rims is tagged
    ``top-epi`` / ``top-endo`` on the outer and inner surfaces.
    """
    side = side.upper()
    if side not in ("LA", "RA"):
        raise GeometryError(f"side must be LA or RA, got {side!r}")
    holes = dict(holes if holes is not None else (LA_HOLES if side == "LA" else RA_HOLES))
    need = ("mv", "lpv", "rpv", "appendage") if side == "LA" else ("tv", "icv", "scv", "cs", "appendage")
    miss = [n for n in need if n not in holes]
    if miss:
        raise GeometryError(f"missing hole placements {miss}")
    if radius <= thickness or thickness <= 0 or h <= 0:
        raise GeometryError("need radius > thickness > 0 and h > 0")
    names = sorted(holes)
    dirs = {k: _unit(holes[k][0]) for k in names}
    ang = {k: np.radians(float(holes[k][1])) for k in names}
    for i, p in enumerate(names):
        for q in names[i + 1 :]:
            sep = np.arccos(np.clip(dirs[p] @ dirs[q], -1, 1))
            if sep <= ang[p] + ang[q]:
                raise GeometryError(f"holes '{p}' and '{q}' overlap")

    center = np.asarray(center, dtype=float)
    r_in, r_out = radius - thickness / 2, radius + thickness / 2
    lo_g, X, Y, Z = _grid(-np.full(3, r_out + h), np.full(3, r_out + h), h)
    P = np.stack([X, Y, Z], axis=-1)

    def hole_of(Q):
        u = _unit(Q)
        out = np.full(Q.shape[:-1], "", dtype=object)
        for k in names:
            hit = (u @ dirs[k]) > np.cos(ang[k])
            out[hit & (out == "")] = k
        return out

    def in_any_hole(Q):
        u = _unit(Q)
        hit = np.zeros(Q.shape[:-1], dtype=bool)
        for k in names:
            hit |= (u @ dirs[k]) > np.cos(ang[k])
        return hit

    r = np.linalg.norm(P, axis=-1)
    shell = (r >= r_in) & (r <= r_out)
    mask = shell & ~in_any_hole(P)
    vox = _Voxels(mask, lo_g, h)
    fc, oc = vox.face_centers, vox.out_centers
    ro = np.linalg.norm(oc, axis=1)
    in_shell = (ro >= r_in) & (ro <= r_out)
    hole = hole_of(oc)
    tags = LA_TAGS if side == "LA" else RA_TAGS
    ftag = np.where(ro > radius, tags["epi"], tags["endo"]).astype(np.int32)
    ring = in_shell & (hole != "")
    landmarks = {"center": center, "radius": (radius,), "thickness": (thickness,)}
    for k in names:
        landmarks[f"hole-axis:{k}"] = dirs[k]
        landmarks[f"hole-angle:{k}"] = (np.degrees(ang[k]),)

    if side == "LA":
        for k in names:
            ftag[ring & (hole == k)] = tags[k]
        sites = LA_SITES
    else:
        m = np.cross(dirs["icv"], dirs["scv"])
        m /= np.linalg.norm(m)
        sd = _unit(septal_direction) if septal_direction is not None else np.array([-1.0, 0.0, 0.0])
        if sd @ m < 0:
            m = -m
        for k in names:
            if k == "tv":
                sel = ring & (hole == "tv")
                septal = fc @ m > 0
                ftag[sel & septal] = tags["tv-s"]
                ftag[sel & ~septal] = tags["tv-f"]
            else:
                ftag[ring & (hole == k)] = tags[k]
        # geodesic strip between the caval rims
        u = _unit(fc)
        off = np.abs(u @ m)
        proj = _unit(u - (u @ m)[:, None] * m)
        total = np.arccos(np.clip(dirs["icv"] @ dirs["scv"], -1, 1))
        a1 = np.arccos(np.clip(proj @ dirs["icv"], -1, 1))
        a2 = np.arccos(np.clip(proj @ dirs["scv"], -1, 1))
        on_arc = np.abs(a1 + a2 - total) < 1e-9 + 1e-6
        band = (off < np.sin(top_width / radius)) & on_arc & ~ring
        ftag[band & (ftag == tags["epi"])] = tags["top-epi"]
        ftag[band & (ftag == tags["endo"])] = tags["top-endo"]
        landmarks["septal-normal"] = m
        sites = RA_SITES
    for k, d in sites.items():
        landmarks[k] = _unit(d) * radius
    groups = {} if side == "LA" else RA_GROUPS
    mesh = vox.mesh(ftag, tags, groups, landmarks)
    if np.any(center != 0):
        lm = dict(mesh.landmarks)
        for k in list(sites) + ["center"]:
            lm[k] = (lm[k] if k != "center" else 0.0) + center
        mesh = Mesh(mesh.nodes + center, mesh.elements, mesh.facets, mesh.facet_tags, mesh.tags, mesh.groups, lm)
    return mesh


def ring_tangent(mesh, tag, points):
    """Unit tangent of the circle about a hole axis through each point."""
    c = mesh.landmarks["center"]
    a = mesh.landmarks[f"hole-axis:{tag}"]
    t = np.cross(a, np.asarray(points) - c)
    n = np.linalg.norm(t, axis=1, keepdims=True)
    return t / np.where(n > 0, n, 1.0)


# ---------------------------------------------------------------------------
# four chambers

FOUR_CHAMBER_OFFSETS = {"ra": (1.9, 0.0, 2.0), "la": (-1.6, 0.0, 2.0)}


def generate_four_chamber(h_ventricles=0.1, h_atria=0.05, **biv_kwargs):
    """Idealized four-chamber assembly: biventricle below the base plane,
    right and left atria above it. The chambers share no nodes, so they are
    electrically isolated by construction; the conduction system is
    represented by the timed stimulus schedule.
    """
    return {
        "ventricles": generate_ideal_biventricle(h=h_ventricles, **biv_kwargs),
        "ra": generate_ideal_atrium("RA", h=h_atria, center=FOUR_CHAMBER_OFFSETS["ra"]),
        "la": generate_ideal_atrium("LA", h=h_atria, center=FOUR_CHAMBER_OFFSETS["la"]),
    }
