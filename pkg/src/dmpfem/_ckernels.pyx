# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element and patch kernels (same API as ``_pykernels``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow

cnp.import_array()


cdef double _det_inv(double[:, ::1] e, double[:, ::1] inv, int d) noexcept nogil:
    """Determinant and inverse of a d x d matrix, d <= 3, by cofactors."""
    cdef double det
    if d == 2:
        det = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        inv[0, 0] = e[1, 1] / det
        inv[0, 1] = -e[0, 1] / det
        inv[1, 0] = -e[1, 0] / det
        inv[1, 1] = e[0, 0] / det
        return det
    inv[0, 0] = e[1, 1] * e[2, 2] - e[1, 2] * e[2, 1]
    inv[0, 1] = e[0, 2] * e[2, 1] - e[0, 1] * e[2, 2]
    inv[0, 2] = e[0, 1] * e[1, 2] - e[0, 2] * e[1, 1]
    inv[1, 0] = e[1, 2] * e[2, 0] - e[1, 0] * e[2, 2]
    inv[1, 1] = e[0, 0] * e[2, 2] - e[0, 2] * e[2, 0]
    inv[1, 2] = e[0, 2] * e[1, 0] - e[0, 0] * e[1, 2]
    inv[2, 0] = e[1, 0] * e[2, 1] - e[1, 1] * e[2, 0]
    inv[2, 1] = e[0, 1] * e[2, 0] - e[0, 0] * e[2, 1]
    inv[2, 2] = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
    det = e[0, 0] * inv[0, 0] + e[0, 1] * inv[1, 0] + e[0, 2] * inv[2, 0]
    cdef int i, j
    for i in range(3):
        for j in range(3):
            inv[i, j] /= det
    return det


def simplex_geometry(coords):
    cdef const double[:, :, ::1] x = np.ascontiguousarray(coords, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef int m = x.shape[1]
    cdef int d = x.shape[2]
    if d not in (2, 3):
        raise ValueError("only d = 2, 3 supported")
    q_arr = np.empty((n, m, d))
    vol_arr = np.empty(n)
    h_arr = np.empty((n, m))
    cdef double[:, :, ::1] q = q_arr
    cdef double[::1] vol = vol_arr
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] e = np.empty((d, d))
    cdef double[:, ::1] inv = np.empty((d, d))
    cdef double fact = 2.0 if d == 2 else 6.0
    cdef Py_ssize_t k
    cdef int a, b
    cdef double det, s, nrm
    with nogil:
        for k in range(n):
            for a in range(d):
                for b in range(d):
                    e[a, b] = x[k, a + 1, b] - x[k, 0, b]
            det = _det_inv(e, inv, d)
            vol[k] = fabs(det) / fact
            for b in range(d):
                s = 0.0
                for a in range(d):
                    q[k, a + 1, b] = inv[b, a]
                    s = s + inv[b, a]
                q[k, 0, b] = -s
            for a in range(m):
                nrm = 0.0
                for b in range(d):
                    nrm = nrm + q[k, a, b] * q[k, a, b]
                h[k, a] = 1.0 / sqrt(nrm)
    return q_arr, vol_arr, h_arr


def local_blocks(q_in, vol_in, dk_in, phi_in, w_in, bq_in, cq_in, fq_in):
    cdef const double[:, :, ::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef const double[::1] vol = np.ascontiguousarray(vol_in, dtype=np.float64)
    cdef const double[:, :, ::1] dk = np.ascontiguousarray(dk_in, dtype=np.float64)
    cdef const double[:, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[:, :, ::1] bq = np.ascontiguousarray(bq_in, dtype=np.float64)
    cdef const double[:, ::1] cq = np.ascontiguousarray(cq_in, dtype=np.float64)
    cdef const double[:, ::1] fq = np.ascontiguousarray(fq_in, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0]
    cdef int m = q.shape[1]
    cdef int d = q.shape[2]
    cdef int nq = w.shape[0]
    diff_arr = np.zeros((n, m, m))
    conv_arr = np.zeros((n, m, m))
    react_arr = np.zeros((n, m, m))
    load_arr = np.zeros((n, m))
    cdef double[:, :, ::1] diff = diff_arr
    cdef double[:, :, ::1] conv = conv_arr
    cdef double[:, :, ::1] react = react_arr
    cdef double[:, ::1] load = load_arr
    cdef double[:, ::1] dq = np.empty((m, d))
    cdef double[::1] bdq = np.empty(m)
    cdef Py_ssize_t k
    cdef int i, j, a, b, p
    cdef double s, wv
    with nogil:
        for k in range(n):
            for j in range(m):
                for a in range(d):
                    s = 0.0
                    for b in range(d):
                        s = s + dk[k, a, b] * q[k, j, b]
                    dq[j, a] = s
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for a in range(d):
                        s = s + q[k, i, a] * dq[j, a]
                    diff[k, i, j] = vol[k] * s
            for p in range(nq):
                for j in range(m):
                    s = 0.0
                    for a in range(d):
                        s = s + bq[k, p, a] * q[k, j, a]
                    bdq[j] = s
                for i in range(m):
                    wv = w[p] * phi[p, i]
                    load[k, i] += vol[k] * wv * fq[k, p]
                    for j in range(m):
                        conv[k, i, j] += vol[k] * wv * bdq[j]
                        react[k, i, j] += vol[k] * wv * phi[p, j] * cq[k, p]
    return diff_arr, conv_arr, react_arr, load_arr


def monomials(d):
    if d == 2:
        return np.array([[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]])
    return np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                     [2, 0, 0], [1, 1, 0], [1, 0, 1], [0, 2, 0], [0, 1, 1], [0, 0, 2]])


def patch_normal_equations(ptr_in, nodes_in, points_in, values_in):
    cdef const long long[::1] ptr = np.ascontiguousarray(ptr_in, dtype=np.int64)
    cdef const long long[::1] nodes = np.ascontiguousarray(nodes_in, dtype=np.int64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points_in, dtype=np.float64)
    cdef const double[::1] vals = np.ascontiguousarray(values_in, dtype=np.float64)
    cdef const long long[:, ::1] mono = np.ascontiguousarray(monomials(pts.shape[1]), dtype=np.int64)
    cdef Py_ssize_t nv = ptr.shape[0] - 1
    cdef int d = pts.shape[1]
    cdef int nm = mono.shape[0]
    normal_arr = np.zeros((nv, nm, nm))
    moment_arr = np.zeros((nv, nm))
    scale_arr = np.empty(nv)
    cdef double[:, :, ::1] normal = normal_arr
    cdef double[:, ::1] moment = moment_arr
    cdef double[::1] scale = scale_arr
    cdef double[::1] row = np.empty(nm)
    cdef double[::1] rel = np.empty(d)
    cdef Py_ssize_t v, k, node
    cdef int a, b, mm
    cdef double r2, sc, t
    with nogil:
        for v in range(nv):
            sc = 0.0
            for k in range(ptr[v], ptr[v + 1]):
                node = nodes[k]
                r2 = 0.0
                for a in range(d):
                    t = pts[node, a] - pts[v, a]
                    r2 = r2 + t * t
                if r2 > sc:
                    sc = r2
            sc = sqrt(sc)
            if sc <= 0.0:
                sc = 1.0
            scale[v] = sc
            for k in range(ptr[v], ptr[v + 1]):
                node = nodes[k]
                for a in range(d):
                    rel[a] = (pts[node, a] - pts[v, a]) / sc
                for mm in range(nm):
                    t = 1.0
                    for a in range(d):
                        if mono[mm, a] > 0:
                            t = t * pow(rel[a], <double>mono[mm, a])
                    row[mm] = t
                for a in range(nm):
                    moment[v, a] += row[a] * vals[node]
                    for b in range(nm):
                        normal[v, a, b] += row[a] * row[b]
    return normal_arr, moment_arr, scale_arr
