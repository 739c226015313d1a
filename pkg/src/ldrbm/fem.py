"""Trilinear hexahedral (Q1) element kernels.

Node ordering follows VTK_HEXAHEDRON: nodes 0-3 span the bottom face
counter-clockwise seen from above, nodes 4-7 the top face.
"""

import numpy as np
import scipy.sparse as sp

REF_NODES = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
)

# outward faces, node order gives an outward normal by the right-hand rule
HEX_FACES = np.array(
    [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [0, 4, 7, 3],
        [1, 2, 6, 5],
    ]
)

QUAD_POINTS = REF_NODES / np.sqrt(3.0)
QUAD_WEIGHTS = np.ones(8)

_CHUNK = 20000


def shape_values(xi):
    xi = np.atleast_2d(xi)
    return np.prod(1.0 + xi[:, None, :] * REF_NODES[None, :, :], axis=2) / 8.0


def shape_grads(xi):
    """dN_a/dxi_j at each point, shape (npts, 8, 3)."""
    xi = np.atleast_2d(xi)
    f = 1.0 + xi[:, None, :] * REF_NODES[None, :, :]
    out = np.empty((xi.shape[0], 8, 3))
    for j in range(3):
        others = [k for k in range(3) if k != j]
        out[:, :, j] = REF_NODES[None, :, j] * f[:, :, others[0]] * f[:, :, others[1]] / 8.0
    return out


N_Q = shape_values(QUAD_POINTS)
DN_Q = shape_grads(QUAD_POINTS)
DN_C = shape_grads(np.zeros(3))[0]


def jacobians(coords, dN):
    """coords (E, 8, 3), dN (q, 8, 3) -> J (E, q, 3, 3) with J[..., i, j] = dx_i/dxi_j."""
    return np.einsum("eai,qaj->eqij", coords, dN)


def jacobian_dets(nodes, elements):
    dets = np.empty((len(elements), len(QUAD_POINTS)))
    for s in range(0, len(elements), _CHUNK):
        c = nodes[elements[s : s + _CHUNK]]
        dets[s : s + _CHUNK] = np.linalg.det(jacobians(c, DN_Q))
    return dets


def _physical_grads(coords, dN):
    J = jacobians(coords, dN)
    det = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    # grad N_a = J^-T dN_a/dxi
    G = np.einsum("eqji,qaj->eqia", Jinv, dN)
    return G, det


def _assemble(elements, blocks, n):
    rows = np.repeat(elements, 8, axis=1).ravel()
    cols = np.tile(elements, (1, 8)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def stiffness(nodes, elements, D=None):
    """Global stiffness matrix int grad(N_a) . D grad(N_b).

    ``D`` is None (identity) or an (E, 3, 3) array of element-constant
    tensors.
    """
    E = len(elements)
    blocks = np.empty((E, 8, 8))
    for s in range(0, E, _CHUNK):
        sl = slice(s, s + _CHUNK)
        G, det = _physical_grads(nodes[elements[sl]], DN_Q)
        wd = det * QUAD_WEIGHTS[None, :]
        if D is None:
            blocks[sl] = np.einsum("eqia,eqib,eq->eab", G, G, wd)
        else:
            DG = np.einsum("eij,eqjb->eqib", D[sl], G)
            blocks[sl] = np.einsum("eqia,eqib,eq->eab", G, DG, wd)
    return _assemble(elements, blocks, len(nodes))


def mass(nodes, elements):
    """Consistent mass matrix."""
    E = len(elements)
    blocks = np.empty((E, 8, 8))
    NN = np.einsum("qa,qb->qab", N_Q, N_Q)
    for s in range(0, E, _CHUNK):
        sl = slice(s, s + _CHUNK)
        det = np.linalg.det(jacobians(nodes[elements[sl]], DN_Q))
        blocks[sl] = np.einsum("qab,eq->eab", NN, det * QUAD_WEIGHTS[None, :])
    return _assemble(elements, blocks, len(nodes))


def lumped_mass(nodes, elements):
    """Row-sum lumped mass vector."""
    w = np.empty((len(elements), 8))
    for s in range(0, len(elements), _CHUNK):
        sl = slice(s, s + _CHUNK)
        det = np.linalg.det(jacobians(nodes[elements[sl]], DN_Q))
        w[sl] = np.einsum("qa,eq->ea", N_Q, det * QUAD_WEIGHTS[None, :])
    return np.bincount(elements.ravel(), weights=w.ravel(), minlength=len(nodes))


def element_volumes(nodes, elements):
    return jacobian_dets(nodes, elements) @ QUAD_WEIGHTS


def center_gradient_operator(nodes, elements):
    """Element-centre gradient operators, shape (E, 3, 8)."""
    G = np.empty((len(elements), 3, 8))
    for s in range(0, len(elements), _CHUNK):
        sl = slice(s, s + _CHUNK)
        g, _ = _physical_grads(nodes[elements[sl]], DN_C[None])
        G[sl] = g[:, 0]
    return G
