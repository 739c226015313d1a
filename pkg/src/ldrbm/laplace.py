"""Laplace-Dirichlet solves and nodal gradient recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import DimensionError, SchemaError, SingularityError, SolverError


@dataclass(frozen=True)
class DirichletSpec:
    """Ordered ``(tag, value)`` pairs. Nodes shared by facets of two entries
    take the value of the later entry. All other boundary facets carry a
    homogeneous Neumann condition."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((str(t), float(v)) for t, v in self.entries)
        object.__setattr__(self, "entries", entries)
        names = [t for t, _ in entries]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise SchemaError(f"tags listed twice in Dirichlet spec: {dup}")

    @classmethod
    def of(cls, *pairs, **kw):
        """``DirichletSpec.of(("lv", 1), ("epi", 0))``; tags given as a tuple
        of names share the value."""
        out = []
        for names, v in pairs:
            if isinstance(names, (tuple, list)):
                out.extend((n, v) for n in names)
            else:
                out.append((names, v))
        return cls(tuple(out), **kw)

    def values(self):
        return [v for _, v in self.entries]


def dirichlet_values(mesh, spec):
    if not spec.entries:
        raise SingularityError("empty Dirichlet spec: the pure Neumann problem is singular")
    seen = {}
    for name, _ in spec.entries:
        for i in mesh.tag_ids(name):
            if i in seen:
                raise SchemaError(f"tags '{seen[i]}' and '{name}' overlap in the Dirichlet spec")
            seen[i] = name
    val = np.full(mesh.n_nodes, np.nan)
    for name, v in spec.entries:
        nodes = mesh.tag_nodes(name)
        if len(nodes) == 0:
            raise SchemaError(f"tag '{name}' has no facets")
        val[nodes] = v
    return val


def _pcg(A, b, x0, tol, maxiter):
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("non-positive diagonal entry; system is not SPD")
    inv = 1.0 / d
    M = LinearOperator(A.shape, matvec=lambda r: inv * r, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    bn = np.linalg.norm(b)
    res = np.linalg.norm(b - A @ x) / (bn if bn > 0 else 1.0)
    if info != 0 and res > tol:
        raise SolverError(
            f"CG did not converge in {count[0]} iterations (relative residual {res:.3e} > {tol:.1e})",
            residual=res,
            iterations=count[0],
        )
    return x, count[0], res


class LaplaceSolution(np.ndarray):
    """Nodal values with solver diagnostics attached."""

    def __new__(cls, values, iterations=0, residual=0.0, bounds=(np.nan, np.nan)):
        obj = np.asarray(values, dtype=np.float64).view(cls)
        obj.iterations = iterations
        obj.residual = residual
        obj.bounds = bounds
        return obj

    def __array_finalize__(self, obj):
        if obj is None:
            return
        self.iterations = getattr(obj, "iterations", 0)
        self.residual = getattr(obj, "residual", 0.0)
        self.bounds = getattr(obj, "bounds", (np.nan, np.nan))


def solve_laplace(mesh, spec, tol=1e-10, maxiter=None, K=None):
    """Trilinear FE solution of -div(grad u) = 0 with the Dirichlet data in
    ``spec`` and homogeneous Neumann data on every other boundary facet.

    Dirichlet rows are eliminated symmetrically and the reduced SPD system is
    solved by Jacobi-preconditioned conjugate gradients; the returned relative
    residual is below ``tol``.
    """
    if not (0.0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    if not isinstance(spec, DirichletSpec):
        spec = DirichletSpec(tuple(spec))
    val = dirichlet_values(mesh, spec)
    fixed = ~np.isnan(val)
    free = np.where(~fixed)[0]
    K = mesh.stiffness() if K is None else K
    u = np.where(fixed, val, 0.0)
    lo, hi = float(np.min(spec.values())), float(np.max(spec.values()))
    if len(free) == 0:
        return LaplaceSolution(u, 0, 0.0, (lo, hi))
    Kff = K[free][:, free]
    b = -(K[free][:, np.where(fixed)[0]] @ val[fixed])
    x0 = np.full(len(free), 0.5 * (lo + hi))
    # iterate to a tenth of tol so the bound min - tol <= u <= max + tol
    # keeps a margin over the algebraic error
    x, it, res = _pcg(Kff, b, x0, 0.1 * tol, maxiter or max(1000, 10 * len(free)))
    u[free] = x
    return LaplaceSolution(u, it, res, (lo, hi))


def nodal_gradient(mesh, field):
    """Volume-weighted average of element-centre gradients at each node."""
    u = np.asarray(field, dtype=np.float64)
    if u.shape[0] != mesh.n_nodes:
        raise DimensionError(f"field has {u.shape[0]} entries, mesh has {mesh.n_nodes} nodes")
    G = mesh.gradient_operator()
    V = mesh.element_volumes()
    ge = np.einsum("eia,ea->ei", G, u[mesh.elements])
    idx = mesh.elements.ravel()
    w = np.bincount(idx, weights=np.repeat(V, 8), minlength=mesh.n_nodes)
    out = np.empty((mesh.n_nodes, 3))
    for i in range(3):
        out[:, i] = np.bincount(idx, weights=np.repeat(V * ge[:, i], 8), minlength=mesh.n_nodes)
    return out / w[:, None]

