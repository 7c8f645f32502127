"""Per-element q-vectors, heights and dihedral angles, Euclidean and metric.

Dihedral angles are carried as cosines; ``np.arccos`` is applied only when a
caller asks for angles.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels

__all__ = [
    "DegenerateElementError",
    "NotSPDError",
    "ElementGeometry",
    "MetricGeometry",
    "q_vectors",
    "dihedral_cos",
    "element_geometry",
    "simplex_geometry",
    "spd_eigenvalues",
    "metric_quantities",
    "cot_identity_2d",
    "lemma33_entries",
]

DEGENERACY_RTOL = 1e-14
SYMMETRY_TOL = 1e-12


class DegenerateElementError(ValueError):
    def __init__(self, element, volume):
        self.element = int(element)
        self.volume = float(volume)
        super().__init__(f"element {self.element} is degenerate (|K| = {self.volume:.3e})")


class NotSPDError(ValueError):
    def __init__(self, message, index=None, eigenvalue=None):
        self.index = index
        self.eigenvalue = eigenvalue
        super().__init__(message)


def _pairwise_cosines(q, metric=None):
    # same contraction in both branches so D = I reproduces Euclidean values bitwise
    mq = q if metric is None else np.einsum("nde,nje->njd", metric, q)
    g = np.einsum("nid,njd->nij", q, mq)
    nrm = np.sqrt(np.einsum("nii->ni", g))
    return -g / (nrm[:, :, None] * nrm[:, None, :]), nrm


@dataclass
class ElementGeometry:
    """Euclidean geometry of a batch of simplices.

    ``cosines[k, i, j]`` is the cosine of the dihedral angle between the facets
    opposite vertices i and j of element k (in 2D, the angle at the third
    vertex).  Diagonal entries are meaningless.
    """

    volume: np.ndarray
    q: np.ndarray
    heights: np.ndarray
    cosines: np.ndarray

    @property
    def dim(self):
        return self.q.shape[2]

    def __len__(self):
        return len(self.volume)

    def angles(self):
        return np.arccos(np.clip(self.cosines, -1.0, 1.0))


@dataclass
class MetricGeometry:
    """Geometry measured in the metric D_K^{-1} (element mapped by D_K^{-1/2})."""

    q_norms: np.ndarray
    heights: np.ndarray
    cosines: np.ndarray
    det: np.ndarray
    lam_min: np.ndarray
    lam_max: np.ndarray
    mapped_volume: np.ndarray

    def angles(self):
        return np.arccos(np.clip(self.cosines, -1.0, 1.0))

    def max_angle(self):
        m = self.cosines.shape[1]
        iu = np.triu_indices(m, 1)
        return float(np.arccos(np.clip(self.cosines[:, iu[0], iu[1]].min(), -1.0, 1.0)))


def simplex_geometry(coords):
    """Batched geometry for raw element coordinates (N, d + 1, d).

    Raises :class:`DegenerateElementError` for the first element whose volume
    is at most ``1e-14 * (longest edge) ** d``.
    """
    coords = np.asarray(coords, dtype=float)
    n, m, d = coords.shape
    lengths = np.stack([np.linalg.norm(coords[:, a] - coords[:, b], axis=1)
                        for a, b in combinations(range(m), 2)], axis=1)
    edges = coords[:, 1:, :] - coords[:, :1, :]
    vol = np.abs(np.linalg.det(edges)) / (2.0 if d == 2 else 6.0)
    bad = np.flatnonzero(vol <= DEGENERACY_RTOL * lengths.max(axis=1) ** d)
    if len(bad):
        raise DegenerateElementError(bad[0], vol[bad[0]])
    q, vol, h = kernels.simplex_geometry(coords)
    cos, _ = _pairwise_cosines(q)
    return ElementGeometry(vol, q, h, cos)


def element_geometry(mesh):
    return simplex_geometry(mesh.element_coordinates())


def q_vectors(points):
    """q-vectors, volume and heights of one simplex.

    Parameters
    ----------
    points : array_like, shape (d + 1, d)

    Returns
    -------
    q : ndarray, shape (d + 1, d)
        ``q[i]`` is the gradient of the barycentric basis function of vertex i.
    volume : float
    heights : ndarray, shape (d + 1,)
    """
    g = simplex_geometry(np.asarray(points, dtype=float)[None])
    return g.q[0], float(g.volume[0]), g.heights[0]


def dihedral_cos(qi, qj):
    """Cosine of the dihedral angle between the facets with q-vectors qi, qj."""
    qi = np.asarray(qi, dtype=float)
    qj = np.asarray(qj, dtype=float)
    c = -np.dot(qi, qj) / (np.linalg.norm(qi) * np.linalg.norm(qj))
    return float(np.clip(c, -1.0, 1.0))


def spd_eigenvalues(D):
    """Eigenvalues (ascending) of one or a batch of SPD matrices.

    Raises :class:`NotSPDError` if a matrix is not symmetric to 1e-12 relative
    or has a non-positive eigenvalue.
    """
    D = np.asarray(D, dtype=float)
    batch = D if D.ndim == 3 else D[None]
    scale = np.abs(batch).max(axis=(1, 2))
    asym = np.abs(batch - batch.transpose(0, 2, 1)).max(axis=(1, 2))
    bad = np.flatnonzero(asym > SYMMETRY_TOL * np.maximum(scale, 1e-300))
    if len(bad):
        raise NotSPDError(f"matrix {bad[0]} is not symmetric (asymmetry {asym[bad[0]]:.3e})",
                          index=int(bad[0]))
    lam = np.linalg.eigvalsh(0.5 * (batch + batch.transpose(0, 2, 1)))
    bad = np.flatnonzero(lam[:, 0] <= 0)
    if len(bad):
        k = int(bad[0])
        raise NotSPDError(f"matrix {k} is not positive definite (eigenvalue {lam[k, 0]:.6g})",
                          index=k, eigenvalue=float(lam[k, 0]))
    return lam if D.ndim == 3 else lam[0]


def _broadcast_metric(geom, D):
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        D = np.broadcast_to(D, (len(geom), D.shape[0], D.shape[1]))
    return D


def metric_quantities(geom, D):
    """Heights and dihedral cosines of each element in the metric D_K^{-1}.

    ``D`` is a single SPD matrix or one per element.
    """
    D = _broadcast_metric(geom, D)
    lam = spd_eigenvalues(D)
    cos, nrm = _pairwise_cosines(geom.q, D)
    det = np.linalg.det(D)
    return MetricGeometry(
        q_norms=nrm,
        heights=1.0 / nrm,
        cosines=cos,
        det=det,
        lam_min=lam[:, 0],
        lam_max=lam[:, -1],
        mapped_volume=geom.volume / np.sqrt(det),
    )


def lemma33_entries(geom, D):
    """Off-diagonal ``|K~| det(D_K)^{1/2} / (h~_i h~_j) * (-cos)`` per element.

    Equals ``|K| q_i^T D_K q_j`` for i != j; the diagonal is set to NaN.
    """
    mg = metric_quantities(geom, D)
    out = -(mg.mapped_volume * np.sqrt(mg.det))[:, None, None] * mg.cosines / (
        mg.heights[:, :, None] * mg.heights[:, None, :])
    idx = np.arange(out.shape[1])
    out[:, idx, idx] = np.nan
    return out


def cot_identity_2d(geom, D):
    """``-(sqrt(det D_K) / 2) * cot(alpha_ij)`` for each 2D element and pair i != j.

    In two dimensions this equals ``|K| q_i^T D_K q_j``.  The diagonal is NaN.
    """
    if geom.dim != 2:
        raise ValueError("cot_identity_2d requires triangles")
    D = _broadcast_metric(geom, D)
    mg = metric_quantities(geom, D)
    c = mg.cosines
    # sine from the cross product of the mapped q-vectors D^{1/2} q (stable near 0, pi)
    lam, vec = np.linalg.eigh(D)
    root = np.einsum("nij,nj,nkj->nik", vec, np.sqrt(lam), vec)
    qt = np.einsum("nde,nie->nid", root, geom.q)
    cross = qt[:, :, None, 0] * qt[:, None, :, 1] - qt[:, :, None, 1] * qt[:, None, :, 0]
    s = np.abs(cross) / (mg.q_norms[:, :, None] * mg.q_norms[:, None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -0.5 * np.sqrt(mg.det)[:, None, None] * c / s
    idx = np.arange(3)
    out[:, idx, idx] = np.nan
    return out
