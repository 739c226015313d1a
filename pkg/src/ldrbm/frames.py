"""Orthonormal frame algebra shared by the fiber generators.

Frames are stored as (N, 3, 3) arrays whose columns are the longitudinal,
normal and transmural unit vectors ``[e_l, e_n, e_t]``. After rotation the
same slots hold ``[f, n, s]``.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .errors import DegeneracyError, FiberError

EPS = 1e-8

# right-multiplication by a half turn about a body axis flips two columns
_FLIPS = np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
)


def _as_rows(v):
    v = np.asarray(v, dtype=np.float64)
    return v.reshape(1, 3) if v.ndim == 1 else v


def axis(k, gamma, eps=EPS):
    """Local frame from a normal direction ``k`` and transmural direction
    ``gamma``. Accepts single vectors or (N, 3) stacks.

    Raises DegeneracyError listing the offending rows when ``gamma`` vanishes
    or ``k`` is parallel to it.
    """
    single = np.ndim(k) == 1 and np.ndim(gamma) == 1
    k, gamma = np.broadcast_arrays(_as_rows(k), _as_rows(gamma))
    g = np.linalg.norm(gamma, axis=1)
    bad = g <= eps
    et = gamma / np.where(bad, 1.0, g)[:, None]
    kn = k - np.einsum("ij,ij->i", k, et)[:, None] * et
    m = np.linalg.norm(kn, axis=1)
    bad |= m <= eps
    if bad.any():
        nodes = np.flatnonzero(bad)
        raise DegeneracyError(f"axis is degenerate at {len(nodes)} node(s), first {nodes[:10].tolist()}", nodes)
    en = kn / m[:, None]
    el = np.cross(en, et)
    P = np.stack([el, en, et], axis=2)
    return P[0] if single else P


def axis_with_fallback(k, gamma, points, eps=EPS):
    """``axis`` with degenerate rows repaired by borrowing ``k`` (and, if the
    transmural direction itself vanishes, ``gamma``) from the nearest
    non-degenerate node."""
    k = np.array(_as_rows(k), dtype=np.float64)
    gamma = np.array(_as_rows(gamma), dtype=np.float64)
    try:
        return axis(k, gamma, eps)
    except DegeneracyError as err:
        bad = np.asarray(err.nodes)
    good = np.ones(len(k), dtype=bool)
    good[bad] = False
    if not good.any():
        raise FiberError("no node has a well-defined frame", bad)
    tree = cKDTree(points[good])
    _, j = tree.query(points[bad])
    src = np.flatnonzero(good)[j]
    gn = np.linalg.norm(gamma[bad], axis=1)
    gamma[bad[gn <= eps]] = gamma[src[gn <= eps]]
    k[bad] = k[src]
    try:
        return axis(k, gamma, eps)
    except DegeneracyError as err:
        still = np.asarray(err.nodes)
    # k borrowed from the neighbour is still parallel to the local gamma:
    # take the neighbour's frame
    j = src[np.searchsorted(bad, still)]
    gamma[still] = gamma[j]
    try:
        return axis(k, gamma, eps)
    except DegeneracyError as err:
        raise FiberError("frame still degenerate after nearest-node fallback", err.nodes) from None


def angle_at(d, endo_value, epi_value):
    """Linear transmural angle law: epi value at d=0, endo value at d=1."""
    d = np.asarray(d, dtype=np.float64)
    return epi_value * (1.0 - d) + endo_value * d


def septal_angle(d, endo_value):
    """Septal angle law endo_value * (1 - 2d), with ``d`` the depth from the
    node's own endocardium: the endocardial value on that surface, zero at
    mid-septum and its negative on the far surface."""
    d = np.asarray(d, dtype=np.float64)
    return endo_value * (1.0 - 2.0 * d)


def rotate_frame(P, alpha, beta):
    """Rotate ``e_l`` counter-clockwise about ``e_t`` by ``alpha`` degrees,
    then ``e_t`` about the rotated longitudinal axis by ``beta`` degrees.

    Returns frames with columns ``[f, n, s]``.
    """
    P = np.asarray(P, dtype=np.float64)
    single = P.ndim == 2
    P = P.reshape(-1, 3, 3)
    a = np.deg2rad(np.broadcast_to(np.asarray(alpha, dtype=np.float64), (len(P),)))[:, None]
    b = np.deg2rad(np.broadcast_to(np.asarray(beta, dtype=np.float64), (len(P),)))[:, None]
    el, en, et = P[:, :, 0], P[:, :, 1], P[:, :, 2]
    f = np.cos(a) * el + np.sin(a) * en
    n1 = np.cos(a) * en - np.sin(a) * el
    s = np.cos(b) * et - np.sin(b) * n1
    n = np.cos(b) * n1 + np.sin(b) * et
    out = np.stack([f, n, s], axis=2)
    return out[0] if single else out


def _proper(P):
    """Negate e_l where a frame is left-handed; the axis lines are kept."""
    out = np.array(P, dtype=np.float64)
    out[:, :, 0] *= np.where(np.linalg.det(out) < 0, -1.0, 1.0)[:, None]
    return out


def _quats(P):
    return Rotation.from_matrix(P).as_quat()


def bislerp(Pa, Pb, t):
    """Quaternion interpolation between two frame fields that treats each
    axis as an unsigned line.

    Left-handed inputs are made proper by negating ``e_l``. Pa's
    quaternion is replaced by whichever of its eight sign and half-turn
    equivalents lies closest to Pb's, then the pair is slerped with weight
    ``t`` (0 returns Pa, 1 returns Pb).
    """
    Pa = np.asarray(Pa, dtype=np.float64)
    Pb = np.asarray(Pb, dtype=np.float64)
    single = Pa.ndim == 2
    Pa = _proper(Pa.reshape(-1, 3, 3))
    Pb = _proper(Pb.reshape(-1, 3, 3))
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (len(Pa),))
    qb = _quats(Pb)
    best = None
    best_dot = np.full(len(Pa), -1.0)
    for flip in _FLIPS:
        q = _quats(Pa * flip[None, None, :])
        dot = np.einsum("ij,ij->i", q, qb)
        better = np.abs(dot) > best_dot + 1e-15
        if best is None:
            best = q * np.where(dot < 0, -1.0, 1.0)[:, None]
            best_dot = np.abs(dot)
            continue
        best[better] = (q * np.where(dot < 0, -1.0, 1.0)[:, None])[better]
        best_dot = np.where(better, np.abs(dot), best_dot)
    qa = best
    dot = np.clip(best_dot, -1.0, 1.0)
    theta = np.arccos(dot)
    sin = np.sin(theta)
    small = sin < 1e-12
    wa = np.where(small, 1.0 - t, np.sin((1.0 - t) * theta) / np.where(small, 1.0, sin))
    wb = np.where(small, t, np.sin(t * theta) / np.where(small, 1.0, sin))
    q = wa[:, None] * qa + wb[:, None] * qb
    q /= np.linalg.norm(q, axis=1)[:, None]
    out = Rotation.from_quat(q).as_matrix()
    return out[0] if single else out


def orthonormality_error(Q):
    Q = np.asarray(Q).reshape(-1, 3, 3)
    E = np.einsum("nki,nkj->nij", Q, Q) - np.eye(3)
    return float(np.abs(E).max()) if len(Q) else 0.0


def handedness_error(Q):
    Q = np.asarray(Q).reshape(-1, 3, 3)
    return float(np.abs(np.cross(Q[:, :, 1], Q[:, :, 2]) - Q[:, :, 0]).max()) if len(Q) else 0.0


def polish(Q):
    """Re-orthonormalise via SVD; removes round-off from quaternion
    conversions without moving the axes beyond that round-off."""
    U, _, Vt = np.linalg.svd(Q)
    return U @ Vt
