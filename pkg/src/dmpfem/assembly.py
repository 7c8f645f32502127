"""Element and global assembly of the linear finite element system.

The global matrix has the block layout ``[[A11, A12], [0, I]]`` over the
interior-first vertex order: interior rows carry the Galerkin equations and
boundary rows are identity rows with the Dirichlet value on the right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .geometry import NotSPDError, element_geometry, spd_eigenvalues
from .quadrature import simplex_rule

__all__ = [
    "DIFFUSION_DEGREE",
    "LOCAL_DEGREE",
    "RESIDUAL_RTOL",
    "LocalMatrices",
    "SparseSystem",
    "SolverError",
    "average_diffusion",
    "local_matrices",
    "assemble",
    "solve",
    "residual",
    "write_triplets",
    "l2_error",
]

DIFFUSION_DEGREE = 4
LOCAL_DEGREE = 3
RESIDUAL_RTOL = 1e-10


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


def average_diffusion(problem, mesh, degree=DIFFUSION_DEGREE):
    """Element averages D_K of the diffusion matrix, shape (N, d, d).

    Raises :class:`NotSPDError` naming the element if an average is not SPD.
    """
    rule = simplex_rule(mesh.dim, degree)
    x = rule.physical_points(mesh.element_coordinates())
    dk = np.einsum("q,nqij->nij", rule.weights, problem.diffusion(x))
    dk = 0.5 * (dk + dk.transpose(0, 2, 1))
    try:
        spd_eigenvalues(dk)
    except NotSPDError as exc:
        raise NotSPDError(f"D_K of element {exc.index}: {exc}", exc.index, exc.eigenvalue) from None
    return dk


@dataclass
class LocalMatrices:
    """Per-element blocks, each of shape (N, d + 1, d + 1), and load (N, d + 1).

    ``convection[k, i, j]`` is the integral over K of phi_i (b . grad phi_j).
    """

    diffusion: np.ndarray
    convection: np.ndarray
    reaction: np.ndarray
    load: np.ndarray

    @property
    def total(self):
        return self.diffusion + self.convection + self.reaction


def local_matrices(problem, mesh, geom=None, dk=None, degree=LOCAL_DEGREE):
    if geom is None:
        geom = element_geometry(mesh)
    if dk is None:
        dk = average_diffusion(problem, mesh)
    rule = simplex_rule(mesh.dim, degree)
    x = rule.physical_points(mesh.element_coordinates())
    blocks = kernels.local_blocks(geom.q, geom.volume, dk, rule.points, rule.weights,
                                  problem.convection(x), problem.reaction(x), problem.source(x))
    return LocalMatrices(*blocks)


@dataclass
class SparseSystem:
    """Assembled system ``A u = f`` with interior-first unknowns."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_interior: int

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def a11(self):
        return self.matrix[: self.n_interior, : self.n_interior]

    @property
    def a12(self):
        return self.matrix[: self.n_interior, self.n_interior:]

    def norm_inf(self):
        return float(abs(self.matrix).sum(axis=1).max())


def assemble(problem, mesh, geom=None, dk=None, local=None):
    """Assemble the global matrix and right-hand side.

    Element contributions are summed in element order, so the result is
    bitwise reproducible.
    """
    if local is None:
        local = local_matrices(problem, mesh, geom, dk)
    T = mesh.elements
    nv, nvi = mesh.n_vertices, mesh.n_interior
    m = T.shape[1]
    rows = np.repeat(T, m, axis=1).ravel()
    cols = np.tile(T, (1, m)).ravel()
    vals = local.total.reshape(len(T), m * m).ravel()
    keep = rows < nvi
    bnd = np.arange(nvi, nv)
    rows = np.concatenate([rows[keep], bnd])
    cols = np.concatenate([cols[keep], bnd])
    vals = np.concatenate([vals[keep], np.ones(nv - nvi)])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(nv, nv)).tocsr()
    A.sum_duplicates()
    if not np.all(np.isfinite(A.data)):
        bad = np.flatnonzero(~np.isfinite(local.total).all(axis=(1, 2)))
        raise FloatingPointError(f"non-finite local matrix on element {int(bad[0]) if len(bad) else '?'}")

    f = np.zeros(nv)
    np.add.at(f, T.ravel(), local.load.ravel())
    f[nvi:] = problem.dirichlet(mesh.vertices[nvi:])
    return SparseSystem(A, f, nvi)


def residual(system, u, rtol=RESIDUAL_RTOL):
    """``(||A u - f||_inf, rtol * (||f||_inf + ||A||_inf ||u||_inf))``."""
    r = system.matrix @ u - system.rhs
    bound = rtol * (np.abs(system.rhs).max() + system.norm_inf() * np.abs(u).max())
    return float(np.abs(r).max()), float(bound)


def solve(system, return_residual=False, rtol=RESIDUAL_RTOL):
    """Direct sparse solve of the interior block; boundary values copied exactly.

    Raises :class:`SolverError` if the factorization fails or the residual
    exceeds ``rtol * (||f||_inf + ||A||_inf ||u||_inf)``.
    """
    nvi = system.n_interior
    f = system.rhs
    u = f.copy()
    if nvi:
        rhs = f[:nvi] - system.a12 @ f[nvi:]
        try:
            lu = splu(sp.csc_matrix(system.a11))
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        u[:nvi] = lu.solve(rhs)
    res, bound = residual(system, u, rtol)
    if not np.isfinite(res) or res > bound:
        raise SolverError(f"residual {res:.3e} exceeds {bound:.3e}", residual=res)
    if return_residual:
        return u, res
    return u


def write_triplets(system, path):
    """Write the matrix as 'row col value' lines (zero-based, 17 digits)."""
    A = system.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v:.17g}\n")


def l2_error(mesh, u, exact, degree=5):
    """``||u_h - exact||_{L2}`` with u_h the piecewise linear interpolant of ``u``."""
    rule = simplex_rule(mesh.dim, degree)
    x = rule.physical_points(mesh.element_coordinates())
    uh = np.einsum("qa,na->nq", rule.points, np.asarray(u)[mesh.elements])
    err2 = (uh - exact(x)) ** 2
    return float(np.sqrt(np.sum(mesh.volumes() * (err2 @ rule.weights))))
