"""Sufficient mesh conditions for the discrete maximum principle and metric tensors.

* :func:`check_thm41` evaluates, for every element and ordered vertex pair,
  ``h_i |b|_K / (lam_min(D_K) (d+1)) + h_i h_j |c|_K / (lam_min(D_K) (d+1)(d+2))
  <= cos(alpha_ij)`` with the dihedral angle measured in the metric D_K^{-1}.
* :func:`check_edge_condition_2d` evaluates the perturbed generalized Delaunay
  condition on interior edges of a triangle mesh in both its cotangent and
  arccotangent forms.
* :func:`metric_dmp` / :func:`metric_dmp_adap` build D^{-1}-type metric fields,
  :func:`m_uniform_deviation` measures how far a mesh is from being uniform in
  a metric, and :func:`h_bound` gives the mesh size that guarantees the element
  condition on D^{-1}-uniform meshes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import average_diffusion
from .geometry import element_geometry, metric_quantities, spd_eigenvalues
from .problem import coefficient_bounds
from .quadrature import simplex_rule

__all__ = [
    "MARGIN_TOL",
    "ConditionReport",
    "EdgeConditionRecord",
    "EdgeConditionReport",
    "MetricField",
    "MUniformity",
    "HessianRecoveryError",
    "check_thm41",
    "check_edge_condition_2d",
    "metric_dmp",
    "metric_dmp_adap",
    "recover_hessian",
    "m_uniform_deviation",
    "h_bound",
    "h_bound_readings",
]

MARGIN_TOL = 1e-12
EQUIVALENCE_TOL = 1e-10
HESSIAN_NOISE = 1e-8


def _num(v):
    # shortest round-trip text, also for numpy scalars
    return repr(float(v))


def _b_bound(bounds, reading):
    if reading == "euclidean":
        return bounds.b_norm
    if reading == "component":
        return bounds.b_comp
    raise ValueError(f"unknown norm reading {reading!r}")


@dataclass
class ConditionReport:
    """Element condition margins for every element and ordered pair (i, j).

    Arrays have shape (N, d + 1, d + 1) over local vertex indices; diagonal
    entries are NaN.
    """

    lhs: np.ndarray
    rhs: np.ndarray
    elements: np.ndarray
    b_reading: str = "euclidean"

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def min_margin(self):
        return float(np.nanmin(self.margin))

    @property
    def passed(self):
        return self.min_margin >= -MARGIN_TOL

    @property
    def n_violations(self):
        return int(np.sum(np.nan_to_num(self.margin, nan=np.inf) < -MARGIN_TOL))

    @property
    def worst(self):
        """``(element, local i, local j, margin)`` of the smallest margin."""
        m = np.nan_to_num(self.margin, nan=np.inf)
        k, i, j = np.unravel_index(np.argmin(m), m.shape)
        return int(k), int(i), int(j), float(m[k, i, j])

    def max_metric_angle(self):
        m = self.rhs.shape[1]
        iu = np.triu_indices(m, 1)
        return float(np.arccos(np.clip(self.rhs[:, iu[0], iu[1]].min(), -1.0, 1.0)))

    def summary(self):
        k, i, j, mg = self.worst
        return (f"thm41: {'PASS' if self.passed else 'FAIL'}  worst margin {mg:.6g} "
                f"(element {k}, vertices {self.elements[k, i]}->{self.elements[k, j]})  "
                f"violations {self.n_violations}  "
                f"max metric angle {self.max_metric_angle() / math.pi:.4f} pi")

    def to_csv(self, path):
        m = self.lhs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["element", "vertex_i", "vertex_j", "lhs", "rhs", "margin"])
            for k in range(len(self.lhs)):
                for i in range(m):
                    for j in range(m):
                        if i != j:
                            lhs, rhs = self.lhs[k, i, j], self.rhs[k, i, j]
                            w.writerow([k, self.elements[k, i], self.elements[k, j],
                                        _num(lhs), _num(rhs), _num(rhs - lhs)])


def check_thm41(mesh, problem, geom=None, dk=None, bounds=None, b_reading="euclidean"):
    """Evaluate the element condition for all elements and ordered pairs i != j."""
    d = mesh.dim
    if geom is None:
        geom = element_geometry(mesh)
    if dk is None:
        dk = average_diffusion(problem, mesh)
    if bounds is None:
        bounds = coefficient_bounds(problem, mesh, dk=dk)
    mg = metric_quantities(geom, dk)
    h = geom.heights
    lam = bounds.lam_min[:, None, None]
    b = _b_bound(bounds, b_reading)[:, None, None]
    c = bounds.c[:, None, None]
    lhs = h[:, :, None] * b / (lam * (d + 1)) + (
        h[:, :, None] * h[:, None, :] * c / (lam * (d + 1) * (d + 2)))
    rhs = mg.cosines.copy()
    idx = np.arange(d + 1)
    lhs[:, idx, idx] = np.nan
    rhs[:, idx, idx] = np.nan
    return ConditionReport(lhs, rhs, mesh.elements, b_reading)


@dataclass
class EdgeConditionRecord:
    edge: tuple
    elements: tuple
    angles: tuple
    endpoint: int
    C: float
    lhs: float
    rhs: float
    angle_sum_value: float
    passed: bool


def _arccot(x):
    # branch with values in (0, pi)
    return 0.5 * np.pi - np.arctan(x)


@dataclass
class EdgeConditionReport:
    """Per interior edge, for the worse of its two endpoints.

    ``lhs``/``rhs`` are the two sides of the cotangent form (``C`` and the
    weighted cotangent sum); ``angle_sum_value`` is the half-sum of the
    arccotangent form, which must not exceed pi.  ``angle_sum`` is the plain
    sum of the two metric angles opposite the edge.
    """

    edges: np.ndarray
    elements: np.ndarray
    alpha: np.ndarray
    endpoint: np.ndarray
    C: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    angle_sum_value: np.ndarray
    angle_sum: np.ndarray
    forms_agree: bool

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return bool(len(self.lhs) == 0 or self.margin.min() >= -MARGIN_TOL * max(1.0, np.abs(self.rhs).max()))

    @property
    def n_violations(self):
        tol = MARGIN_TOL * max(1.0, np.abs(self.rhs).max()) if len(self.rhs) else 0.0
        return int(np.sum(self.margin < -tol))

    @property
    def max_angle_sum(self):
        return float(self.angle_sum.max()) if len(self.angle_sum) else 0.0

    @property
    def worst(self):
        k = int(np.argmin(self.margin))
        return tuple(int(v) for v in self.edges[k]), float(self.margin[k])

    def records(self):
        return [EdgeConditionRecord(tuple(int(v) for v in self.edges[k]),
                                    tuple(int(v) for v in self.elements[k]),
                                    (float(self.alpha[k, 0]), float(self.alpha[k, 1])),
                                    int(self.endpoint[k]), float(self.C[k]), float(self.lhs[k]),
                                    float(self.rhs[k]), float(self.angle_sum_value[k]),
                                    bool(self.margin[k] >= -MARGIN_TOL))
                for k in range(len(self.edges))]

    def summary(self):
        if not len(self.edges):
            return "edge2d: PASS (no interior edges)"
        e, mg = self.worst
        return (f"edge2d: {'PASS' if self.passed else 'FAIL'}  worst margin {mg:.6g} "
                f"(edge {e[0]}-{e[1]})  violations {self.n_violations}  "
                f"max opposite angle sum {self.max_angle_sum / math.pi:.4f} pi")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex_i", "vertex_j", "element_K", "element_K2", "alpha_K", "alpha_K2",
                        "endpoint_j", "C", "lhs", "rhs", "margin", "angle_sum_value"])
            for r in self.records():
                w.writerow([*r.edge, *r.elements, _num(r.angles[0]), _num(r.angles[1]), r.endpoint,
                            _num(r.C), _num(r.lhs), _num(r.rhs), _num(r.rhs - r.lhs),
                            _num(r.angle_sum_value)])


def check_edge_condition_2d(mesh, problem, geom=None, dk=None, bounds=None, b_reading="euclidean"):
    """Perturbed generalized Delaunay condition on every interior edge (2D only).

    ``C(K, K', j)`` uses the Euclidean height of edge endpoint j in each
    element; both endpoints are evaluated and the smaller margin is kept.
    """
    if mesh.dim != 2:
        raise ValueError("the edge condition is two-dimensional")
    d = 2
    if geom is None:
        geom = element_geometry(mesh)
    if dk is None:
        dk = average_diffusion(problem, mesh)
    if bounds is None:
        bounds = coefficient_bounds(problem, mesh, dk=dk)
    mg = metric_quantities(geom, dk)
    edges, elems, opp = mesh.interior_edges_2d()
    T = mesh.elements
    K, K2 = elems[:, 0], elems[:, 1]

    def local(k, v):
        return np.argmax(T[k] == v[:, None], axis=1)

    i0, j0 = local(K, edges[:, 0]), local(K, edges[:, 1])
    i1, j1 = local(K2, edges[:, 0]), local(K2, edges[:, 1])
    cosK = mg.cosines[K, i0, j0]
    cosK2 = mg.cosines[K2, i1, j1]
    alpha = np.arccos(np.clip(np.stack([cosK, cosK2], axis=1), -1.0, 1.0))
    # cot from the mapped triangle: cos / sin with sin = 2 |K~| / (|e~_a| |e~_b|) form
    sK, sK2 = np.sqrt(mg.det[K]), np.sqrt(mg.det[K2])
    cotK = _cot(geom, dk, K, i0, j0)
    cotK2 = _cot(geom, dk, K2, i1, j1)
    rhs = 0.5 * sK * cotK + 0.5 * sK2 * cotK2

    b = _b_bound(bounds, b_reading)
    c = bounds.c
    vol, h = geom.volume, geom.heights

    def C_for(hK, hK2):
        return (vol[K] * b[K] / (hK * (d + 1)) + vol[K] * c[K] / ((d + 1) * (d + 2))
                + vol[K2] * b[K2] / (hK2 * (d + 1)) + vol[K2] * c[K2] / ((d + 1) * (d + 2)))

    # endpoint j = edges[:, 1] (column vertex of a_ij with i = edges[:, 0]) and mirrored
    Cs = np.stack([C_for(h[K, j0], h[K2, j1]), C_for(h[K, i0], h[K2, i1])], axis=1)
    which = np.argmax(Cs, axis=1)
    C = Cs[np.arange(len(Cs)), which]
    endpoint = np.where(which == 0, edges[:, 1], edges[:, 0])

    ratio = np.sqrt(mg.det[K2] / mg.det[K])
    value = 0.5 * (alpha[:, 0] + alpha[:, 1]
                   + _arccot(ratio * cotK2 - 2.0 * C / sK)
                   + _arccot(cotK / ratio - 2.0 * C / sK2))
    margin3 = rhs - C
    margin4 = np.pi - value
    scale = max(1.0, float(np.abs(rhs).max())) if len(rhs) else 1.0
    decisive = (np.abs(margin3) > EQUIVALENCE_TOL * scale) & (np.abs(margin4) > EQUIVALENCE_TOL)
    agree = bool(np.all((margin3[decisive] >= 0) == (margin4[decisive] >= 0)))
    return EdgeConditionReport(edges, elems, alpha, endpoint, C, C, rhs, value,
                               alpha.sum(axis=1), agree)


def _cot(geom, dk, k, i, j):
    """cot of the metric angle between facets i and j of elements k (2D)."""
    D = dk[k]
    qi, qj = geom.q[k, i], geom.q[k, j]
    dot = np.einsum("nd,nde,ne->n", qi, D, qj)
    # |D^{1/2} qi x D^{1/2} qj| = sqrt(det D) |qi x qj|
    cross = np.abs(qi[:, 0] * qj[:, 1] - qi[:, 1] * qj[:, 0]) * np.sqrt(np.linalg.det(D))
    return -dot / cross


@dataclass
class MetricField:
    """Element-wise metric tensors M_K = theta_K D_K^{-1}."""

    matrices: np.ndarray
    scheme: str
    theta: np.ndarray
    B: np.ndarray = None
    alpha_h: float = None
    extra: dict = field(default_factory=dict)

    def sigma_h(self, mesh):
        return float(np.sum(mesh.volumes() * np.sqrt(np.linalg.det(self.matrices))))


def metric_dmp(problem, mesh, dk=None):
    """M_K = D_K^{-1} (theta_K = 1)."""
    if dk is None:
        dk = average_diffusion(problem, mesh)
    return MetricField(np.linalg.inv(dk), "DMP", np.ones(len(dk)))


class HessianRecoveryError(ValueError):
    def __init__(self, vertex):
        self.vertex = int(vertex)
        super().__init__(f"quadratic fit is rank deficient on the patch of vertex {self.vertex}")


def _ring_patches(mesh, rings):
    ptr, nbr = mesh.vertex_neighbors()
    nv = mesh.n_vertices
    if rings == 1:
        sizes = np.diff(ptr) + 1
        out_ptr = np.concatenate([[0], np.cumsum(sizes)])
        nodes = np.empty(out_ptr[-1], dtype=np.int64)
        nodes[out_ptr[:-1]] = np.arange(nv)
        pos = np.repeat(out_ptr[:-1] + 1 - ptr[:-1], np.diff(ptr)) + np.arange(len(nbr))
        nodes[pos] = nbr
        return out_ptr, nodes
    import scipy.sparse as sp

    adj = sp.csr_matrix((np.ones(len(nbr)), nbr, ptr), shape=(nv, nv)) + sp.identity(nv)
    reach = adj
    for _ in range(rings - 1):
        reach = reach @ adj
    reach = reach.tocsr()
    reach.sort_indices()
    return reach.indptr.astype(np.int64), reach.indices.astype(np.int64)


def _solve_fits(normal, moment, scale, d, rcond=1e-10):
    mono = kernels.monomials(d)
    eig = np.linalg.eigvalsh(normal)
    ok = eig[:, 0] > rcond * eig[:, -1]
    safe = np.where(ok[:, None, None], normal, np.eye(len(mono)))
    coef = np.linalg.solve(safe, moment[..., None])[..., 0]
    H = np.zeros((len(scale), d, d))
    for m, e in enumerate(mono):
        if e.sum() != 2:
            continue
        nz = np.flatnonzero(e)
        if len(nz) == 1:
            H[:, nz[0], nz[0]] = 2.0 * coef[:, m]
        else:
            H[:, nz[0], nz[1]] = H[:, nz[1], nz[0]] = coef[:, m]
    H /= (scale ** 2)[:, None, None]
    return H, ok


def recover_hessian(mesh, values, return_vertex=False):
    """Least-squares quadratic Hessian recovery from nodal values.

    A quadratic is fitted on the one-ring node patch of each vertex (two-ring
    where the one-ring fit is rank deficient) and its Hessian assigned to the
    vertex.  Element Hessians are the mean of their vertices' Hessians.

    Returns element Hessians (N, d, d), and the vertex Hessians too if
    ``return_vertex`` is set.
    """
    values = np.asarray(values, dtype=float)
    d = mesh.dim
    ptr, nodes = _ring_patches(mesh, 1)
    normal, moment, scale = kernels.patch_normal_equations(ptr, nodes, mesh.vertices, values)
    H, ok = _solve_fits(normal, moment, scale, d)
    if not ok.all():
        bad = np.flatnonzero(~ok)
        ptr2, nodes2 = _ring_patches(mesh, 2)
        sub_ptr = np.concatenate([[0], np.cumsum(np.diff(ptr2)[bad])])
        sub_nodes = np.concatenate([nodes2[ptr2[v]:ptr2[v + 1]] for v in bad])
        # center each refit at its own vertex: pass the sub-problem points in patch order
        normal2 = np.empty((len(bad),) + normal.shape[1:])
        moment2 = np.empty((len(bad),) + moment.shape[1:])
        scale2 = np.empty(len(bad))
        for r, v in enumerate(bad):
            patch = sub_nodes[sub_ptr[r]:sub_ptr[r + 1]]
            order = np.concatenate([[v], patch[patch != v]])
            local_pts = mesh.vertices[order]
            p = np.array([0, len(order)] + [len(order)] * (len(order) - 1))
            nm, mo, sc = kernels.patch_normal_equations(p, np.arange(len(order)), local_pts,
                                                        values[order])
            normal2[r], moment2[r], scale2[r] = nm[0], mo[0], sc[0]
        H2, ok2 = _solve_fits(normal2, moment2, scale2, d)
        if not ok2.all():
            raise HessianRecoveryError(bad[np.flatnonzero(~ok2)[0]])
        H[bad] = H2
    Hk = H[mesh.elements].mean(axis=1)
    return (Hk, H) if return_vertex else Hk


def _abs_sym(H):
    lam, vec = np.linalg.eigh(H)
    return np.einsum("...ij,...j,...kj->...ik", vec, np.abs(lam), vec)


def metric_dmp_adap(problem, mesh, values, dk=None, degree=4):
    """Metric M_K = (1 + B_K / alpha_h)^{1/2} sqrt(det D_K) D_K^{-1}.

    ``B_K = det(D_K)^{-1/2} ||D_K^{-1}|| (1/|K|) int_K ||D_K |H|||^2`` with l2
    matrix norms, where H is the linear interpolant of recovered vertex
    Hessians, integrated with a degree-``degree`` rule; ``alpha_h`` is
    ``((1/|Omega|) sum |K| sqrt(B_K))^2``.  Vertex Hessians at roundoff level
    (``<= 1e-8 max|u| / h_min^2``) are zeroed.  If alpha_h vanishes the ratio
    B_K / alpha_h is taken as zero.
    """
    if dk is None:
        dk = average_diffusion(problem, mesh)
    _, Hv = recover_hessian(mesh, values, return_vertex=True)
    # fits of data with no curvature leave O(eps |u| / h^2) noise; treat as zero
    h_min = float(np.min(element_geometry(mesh).heights))
    noise = HESSIAN_NOISE * max(float(np.max(np.abs(values))), 1e-300) / h_min ** 2
    Hv[np.linalg.norm(Hv, ord=2, axis=(1, 2)) <= noise] = 0.0
    B = _hessian_weight(dk, Hv[mesh.elements], simplex_rule(mesh.dim, degree))
    vol = mesh.volumes()
    alpha_h = float((np.sum(vol * np.sqrt(B)) / vol.sum()) ** 2)
    ratio = B / alpha_h if alpha_h > 0 else np.zeros_like(B)
    theta = np.sqrt(1.0 + ratio) * np.sqrt(np.linalg.det(dk))
    M = theta[:, None, None] * np.linalg.inv(dk)
    spd_eigenvalues(M)
    return MetricField(M, "DMP+adap", theta, B=B, alpha_h=alpha_h)


def _hessian_weight(dk, Hel, rule):
    """B_K for element vertex Hessians ``Hel`` (N, d+1, d, d) under ``rule``."""
    Hq = np.einsum("qa,naij->nqij", rule.points, Hel)
    prod = np.einsum("nij,nqjk->nqik", dk, _abs_sym(Hq))
    sq = np.linalg.norm(prod, ord=2, axis=(2, 3)) ** 2
    mean = sq @ rule.weights
    det = np.linalg.det(dk)
    return det ** -0.5 * np.linalg.norm(np.linalg.inv(dk), ord=2, axis=(1, 2)) * mean


def _unit_regular_simplex(d):
    if d == 2:
        s = math.sqrt(4.0 / math.sqrt(3.0))
        return np.array([[0.0, 0.0], [s, 0.0], [s / 2, s * math.sqrt(3.0) / 2]])
    s = (6.0 * math.sqrt(2.0)) ** (1.0 / 3.0)
    return np.array([[0.0, 0.0, 0.0], [s, 0.0, 0.0], [s / 2, s * math.sqrt(3.0) / 2, 0.0],
                     [s / 2, s * math.sqrt(3.0) / 6, s * math.sqrt(2.0 / 3.0)]])


@dataclass
class MUniformity:
    """Deviation of each element from M-uniformity.

    ``T`` is ``(F_K')^{-1} M_K^{-1} (F_K')^{-T} (sigma_h / N)^{2/d}`` with F_K' the
    Jacobian (columns = mapped reference edges) of the affine map from the
    unit-volume regular simplex, so that ``(F_K')^T M_K F_K'`` is a multiple of
    the identity exactly when K is regular in M; the mesh is M-uniform iff
    every ``T`` is the identity.  ``shape = lam_max(T) / lam_min(T) - 1``,
    ``size = |trace(T)/d - 1|`` and ``distance = ||T - I||_F / sqrt(d)``.
    """

    T: np.ndarray
    shape: np.ndarray
    size: np.ndarray
    distance: np.ndarray
    sigma_h: float


def m_uniform_deviation(mesh, metric):
    d = mesh.dim
    ref = _unit_regular_simplex(d)
    E_ref = (ref[1:] - ref[0]).T
    x = mesh.element_coordinates()
    E = (x[:, 1:, :] - x[:, :1, :]).transpose(0, 2, 1)
    F = E @ np.linalg.inv(E_ref)
    Finv = np.linalg.inv(F)
    M = metric.matrices
    sigma_h = float(np.sum(mesh.volumes() * np.sqrt(np.linalg.det(M))))
    T = Finv @ np.linalg.inv(M) @ Finv.transpose(0, 2, 1)
    T *= (sigma_h / mesh.n_elements) ** (2.0 / d)
    T = 0.5 * (T + T.transpose(0, 2, 1))
    lam = np.linalg.eigvalsh(T)
    eye = np.eye(d)
    return MUniformity(
        T=T,
        shape=lam[:, -1] / lam[:, 0] - 1.0,
        size=np.abs(np.trace(T, axis1=1, axis2=2) / d - 1.0),
        distance=np.linalg.norm(T - eye, axis=(1, 2)) / math.sqrt(d),
        sigma_h=sigma_h,
    )


def h_bound(b_inf, c_inf, lam_min, d):
    """Largest h with ``h b + h^2 c / (d + 2) <= (d + 1) / d * lam_min``.

    Returns ``inf`` when b and c both vanish.
    """
    rhs = (d + 1) / d * lam_min
    a = c_inf / (d + 2)
    if a == 0.0:
        return math.inf if b_inf == 0.0 else rhs / b_inf
    # stable positive root of a h^2 + b h - rhs = 0
    return 2.0 * rhs / (b_inf + math.sqrt(b_inf * b_inf + 4.0 * a * rhs))


def h_bound_readings(problem, mesh, bounds=None):
    """The h bound under each reading of ||b||_inf.

    Keys: ``'euclidean'`` (sampled max of |b(x)|), ``'component'`` (sampled max
    of the largest |b_k(x)|) and, when the problem defines one,
    ``'nominal'`` (its pointwise coefficient bound).
    """
    if bounds is None:
        bounds = coefficient_bounds(problem, mesh)
    d, c, lam = mesh.dim, bounds.c_max, bounds.lam_min_global
    out = {
        "euclidean": h_bound(bounds.b_norm_max, c, lam, d),
        "component": h_bound(bounds.b_comp_max, c, lam, d),
    }
    if problem.nominal_b is not None:
        out["nominal"] = h_bound(problem.nominal_b, c, lam, d)
    return out
