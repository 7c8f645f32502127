"""Pure numpy implementations of the element and patch kernels.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is not built or when ``DMPFEM_PURE_PYTHON`` is set.
"""

import math

import numpy as np


def simplex_geometry(coords):
    """q-vectors, volumes and heights of a batch of simplices.

    Parameters
    ----------
    coords : ndarray, shape (N, d + 1, d)

    Returns
    -------
    q : ndarray, shape (N, d + 1, d)
        Gradients of the barycentric basis functions.
    vol : ndarray, shape (N,)
    h : ndarray, shape (N, d + 1)
        Distance from each vertex to its opposite facet.
    """
    coords = np.asarray(coords, dtype=float)
    d = coords.shape[2]
    E = coords[:, 1:, :] - coords[:, :1, :]
    vol = np.abs(np.linalg.det(E)) / math.factorial(d)
    q = np.empty_like(coords)
    q[:, 1:, :] = np.linalg.inv(E).transpose(0, 2, 1)
    q[:, 0, :] = -q[:, 1:, :].sum(axis=1)
    h = 1.0 / np.linalg.norm(q, axis=2)
    return q, vol, h


def local_blocks(q, vol, dk, phi, w, bq, cq, fq):
    """Element diffusion, convection and reaction blocks and load vectors.

    ``phi`` (nq, d + 1) holds basis values at the quadrature points, ``w`` the
    weights (summing to one).  ``bq`` (N, nq, d), ``cq`` and ``fq`` (N, nq)
    are coefficient values at the physical quadrature points.
    """
    diff = vol[:, None, None] * np.einsum("nid,nde,nje->nij", q, dk, q)
    bdotq = np.einsum("nqd,njd->nqj", bq, q)
    conv = vol[:, None, None] * np.einsum("q,qi,nqj->nij", w, phi, bdotq)
    react = vol[:, None, None] * np.einsum("q,qi,qj,nq->nij", w, phi, phi, cq)
    load = vol[:, None] * np.einsum("q,qi,nq->ni", w, phi, fq)
    return diff, conv, react, load


def monomials(d):
    """Exponents of the quadratic monomials in ``d`` variables."""
    if d == 2:
        return np.array([[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]])
    return np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                     [2, 0, 0], [1, 1, 0], [1, 0, 1], [0, 2, 0], [0, 1, 1], [0, 0, 2]])


def patch_normal_equations(ptr, nodes, points, values):
    """Normal equations of the quadratic least-squares fit on each patch.

    Patch ``v`` is ``nodes[ptr[v]:ptr[v + 1]]``.  Coordinates are centred at
    vertex ``v`` and divided by the patch radius ``scale[v]``.

    Returns
    -------
    normal : ndarray, shape (N_v, m, m)
    moment : ndarray, shape (N_v, m)
    scale : ndarray, shape (N_v,)
    """
    mono = monomials(points.shape[1])
    sizes = np.diff(ptr)
    kmax = int(sizes.max())
    slot = np.arange(kmax)
    mask = slot[None, :] < sizes[:, None]
    idx = nodes[np.where(mask, ptr[:-1, None] + slot[None, :], 0)]
    rel = np.where(mask[..., None], points[idx] - points[:, None, :], 0.0)
    scale = np.sqrt((rel ** 2).sum(axis=2).max(axis=1))
    scale = np.where(scale > 0, scale, 1.0)
    s = rel / scale[:, None, None]
    design = np.prod(s[..., None, :] ** mono[None, None, :, :], axis=3) * mask[..., None]
    rhs = np.where(mask, values[idx], 0.0)
    normal = np.einsum("vkm,vkn->vmn", design, design)
    moment = np.einsum("vkm,vk->vm", design, rhs)
    return normal, moment, scale
