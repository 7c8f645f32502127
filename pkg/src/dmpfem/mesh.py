"""Simplicial meshes: representation, structured generators, validation and I/O.

Vertices are always stored interior-first, so that the first ``n_interior``
rows of the vertex array are interior vertices and the remaining ones lie on
the boundary.  Elements are stored with positive signed volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

__all__ = [
    "SimplicialMesh",
    "MeshStatistics",
    "ValidationReport",
    "MeshFormatError",
    "ACUTE8_HALF_GAP",
    "ACUTE8_HEIGHT",
    "generate_right_split",
    "generate_acute8_split",
    "generate_holed_domain",
    "generate_cube_split",
    "validate",
    "statistics",
    "read_mesh",
    "write_mesh",
    "write_vtk",
]

# Interior points of the 8-triangle acute split of the unit square sit at
# (0.5 -/+ ACUTE8_HALF_GAP, ACUTE8_HEIGHT); side points at the bottom and top
# midpoints.  Tuned so that the largest Euclidean angle is 0.485*pi, the largest
# angle in the metric of [[50, 12], [12, 50]]^-1 is 0.55*pi and the largest sum
# of metric angles opposite an interior edge is 0.97*pi.
ACUTE8_HALF_GAP = 0.068
ACUTE8_HEIGHT = 0.789


class MeshFormatError(ValueError):
    """Malformed ASCII mesh file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _signed_volumes(vertices, elements):
    x = vertices[elements]
    edges = x[:, 1:, :] - x[:, :1, :]
    d = vertices.shape[1]
    return np.linalg.det(edges) / math.factorial(d)


def _facets(elements):
    """All facets (sorted vertex tuples) with the owning element of each."""
    n, m = elements.shape
    local = list(combinations(range(m), m - 1))
    facets = np.concatenate([elements[:, list(c)] for c in local], axis=0)
    owner = np.tile(np.arange(n), len(local))
    # local index of the vertex opposite to the facet
    opposite = np.repeat([sorted(set(range(m)) - set(c))[0] for c in local], n)
    return np.sort(facets, axis=1), owner, opposite


class SimplicialMesh:
    """Conforming simplicial mesh with interior-first vertex ordering.

    Use :meth:`from_arrays` to build a mesh from raw coordinates and
    connectivity; it fixes orientation, detects the boundary and reorders
    vertices.  Instances are treated as immutable.

    Attributes
    ----------
    vertices : ndarray, shape (N_v, d)
    elements : ndarray, shape (N, d + 1)
    boundary : ndarray of bool, shape (N_v,)
    labels : ndarray of str, shape (N_v,)
        Boundary label per vertex ('' for interior vertices).
    n_interior : int
    permutation : ndarray of int
        ``permutation[new] = old`` vertex index relative to the input arrays.
    reoriented : ndarray of int
        Elements whose vertex order was flipped to make the volume positive.
    """

    def __init__(self, vertices, elements, boundary, labels, n_interior,
                 permutation=None, reoriented=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.boundary = np.asarray(boundary, dtype=bool)
        self.labels = np.asarray(labels, dtype=object)
        self.n_interior = int(n_interior)
        nv = len(self.vertices)
        self.permutation = (np.arange(nv) if permutation is None
                            else np.asarray(permutation, dtype=np.int64))
        self.reoriented = (np.zeros(0, dtype=np.int64) if reoriented is None
                           else np.asarray(reoriented, dtype=np.int64))
        for a in (self.vertices, self.elements, self.boundary, self.permutation):
            a.setflags(write=False)
        self._cache = {}

    @classmethod
    def from_arrays(cls, vertices, elements, labels=None):
        """Build a mesh, canonicalizing orientation and vertex order.

        Parameters
        ----------
        vertices : array_like, shape (N_v, d)
        elements : array_like, shape (N, d + 1)
        labels : sequence of str, optional
            Per-vertex boundary labels.  Boundary vertices without a label get
            ``'boundary'``.
        """
        vertices = np.array(vertices, dtype=float)
        elements = np.array(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise ValueError("vertices must have shape (N_v, 2) or (N_v, 3)")
        d = vertices.shape[1]
        if elements.ndim != 2 or elements.shape[1] != d + 1:
            raise ValueError(f"elements must have {d + 1} vertices each")
        if elements.size and (elements.min() < 0 or elements.max() >= len(vertices)):
            raise ValueError("element vertex index out of range")

        vol = _signed_volumes(vertices, elements)
        flip = np.flatnonzero(vol < 0)
        elements[flip, -2:] = elements[flip, -1:-3:-1]

        facets, _, _ = _facets(elements)
        uniq, counts = np.unique(facets, axis=0, return_counts=True)
        boundary = np.zeros(len(vertices), dtype=bool)
        boundary[uniq[counts == 1].ravel()] = True

        if labels is None:
            labels = np.full(len(vertices), "", dtype=object)
        else:
            labels = np.array(labels, dtype=object)
        labels = np.where(boundary & (labels == ""), "boundary", labels)
        labels = np.where(boundary, labels, "")

        perm = np.concatenate([np.flatnonzero(~boundary), np.flatnonzero(boundary)])
        new_index = np.empty_like(perm)
        new_index[perm] = np.arange(len(perm))
        return cls(vertices[perm], new_index[elements], boundary[perm], labels[perm],
                   int((~boundary).sum()), permutation=perm, reoriented=flip)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    def __repr__(self):
        return (f"SimplicialMesh(d={self.dim}, N_v={self.n_vertices}, "
                f"N_vi={self.n_interior}, N={self.n_elements})")

    def _patch_csr(self):
        if "patch" not in self._cache:
            flat = self.elements.ravel()
            order = np.argsort(flat, kind="stable")
            elem = order // self.elements.shape[1]
            ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
            np.add.at(ptr, flat + 1, 1)
            self._cache["patch"] = (np.cumsum(ptr), elem)
        return self._cache["patch"]

    @property
    def vertex_patches(self):
        """Per-vertex arrays of incident element indices."""
        ptr, elem = self._patch_csr()
        return [elem[ptr[i]:ptr[i + 1]] for i in range(self.n_vertices)]

    def patch(self, i):
        ptr, elem = self._patch_csr()
        return elem[ptr[i]:ptr[i + 1]]

    def edges(self):
        """Unique edges as an (E, 2) array with sorted endpoints."""
        if "edges" not in self._cache:
            m = self.elements.shape[1]
            pairs = np.concatenate(
                [self.elements[:, [a, b]] for a, b in combinations(range(m), 2)])
            self._cache["edges"] = np.unique(np.sort(pairs, axis=1), axis=0)
        return self._cache["edges"]

    def interior_edges_2d(self):
        """Interior edges of a 2D mesh with their two elements.

        Returns
        -------
        edges : ndarray, shape (E, 2)
        elems : ndarray, shape (E, 2)
        opposite : ndarray, shape (E, 2)
            Local index (0..2) of the vertex opposite the edge in each element.
        """
        if self.dim != 2:
            raise ValueError("interior_edges_2d requires a 2D mesh")
        if "iedges" not in self._cache:
            facets, owner, opp = _facets(self.elements)
            order = np.lexsort(facets.T[::-1])
            facets, owner, opp = facets[order], owner[order], opp[order]
            same = np.all(facets[1:] == facets[:-1], axis=1)
            first = np.flatnonzero(same)
            self._cache["iedges"] = (
                facets[first],
                np.stack([owner[first], owner[first + 1]], axis=1),
                np.stack([opp[first], opp[first + 1]], axis=1),
            )
        return self._cache["iedges"]

    def vertex_neighbors(self):
        """CSR adjacency ``(indptr, indices)`` of the vertex graph."""
        if "nbr" not in self._cache:
            e = self.edges()
            nv = self.n_vertices
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
            ptr = np.zeros(nv + 1, dtype=np.int64)
            np.add.at(ptr, src + 1, 1)
            self._cache["nbr"] = (np.cumsum(ptr), dst)
        return self._cache["nbr"]

    def element_coordinates(self):
        """Vertex coordinates per element, shape (N, d + 1, d)."""
        return self.vertices[self.elements]

    def volumes(self):
        return _signed_volumes(self.vertices, self.elements)


@dataclass
class MeshStatistics:
    h: float
    diameters: np.ndarray
    min_angle: float
    max_angle: float


def _triangle_angles(x):
    """Interior angles of triangles ``x`` (N, 3, 2); angle k sits at vertex k."""
    out = np.empty(x.shape[:2])
    for k in range(3):
        u = x[:, (k + 1) % 3] - x[:, k]
        v = x[:, (k + 2) % 3] - x[:, k]
        c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out[:, k] = np.arccos(np.clip(c, -1.0, 1.0))
    return out


def statistics(mesh):
    """Element diameters, maximum element size and Euclidean angle range.

    For tetrahedra the angles are dihedral angles.
    """
    x = mesh.element_coordinates()
    m = x.shape[1]
    lengths = np.stack([np.linalg.norm(x[:, a] - x[:, b], axis=1)
                        for a, b in combinations(range(m), 2)], axis=1)
    diam = lengths.max(axis=1)
    if mesh.dim == 2:
        ang = _triangle_angles(x)
    else:
        from .geometry import element_geometry

        g = element_geometry(mesh)
        iu = np.triu_indices(m, 1)
        ang = np.arccos(np.clip(g.cosines[:, iu[0], iu[1]], -1.0, 1.0))
    return MeshStatistics(float(diam.max()), diam, float(ang.min()), float(ang.max()))


def _rectangle(domain):
    x0, x1, y0, y1 = (float(v) for v in domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain!r}")
    return x0, x1, y0, y1


def _check_counts(**kw):
    for k, v in kw.items():
        if int(v) != v or v < 1:
            raise ValueError(f"{k} must be a positive integer, got {v!r}")


def _grid_vertices(nx, ny, x0, x1, y0, y1):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _split_squares(squares, nx):
    """Two triangles per square (i, j) along the bottom-left/top-right diagonal."""
    i, j = squares[:, 0], squares[:, 1]
    bl = j * (nx + 1) + i
    br = bl + 1
    tl = bl + nx + 1
    tr = tl + 1
    return np.concatenate([np.column_stack([bl, br, tr]), np.column_stack([bl, tr, tl])])


def generate_right_split(nx, ny, domain=(0.0, 1.0, 0.0, 1.0)):
    """Uniform grid of ``nx * ny`` rectangles, each cut into two right triangles.

    Every cell is split along its bottom-left to top-right diagonal.
    """
    _check_counts(nx=nx, ny=ny)
    x0, x1, y0, y1 = _rectangle(domain)
    verts = _grid_vertices(nx, ny, x0, x1, y0, y1)
    sq = np.array([(i, j) for j in range(ny) for i in range(nx)], dtype=np.int64)
    return SimplicialMesh.from_arrays(verts, _split_squares(sq, nx))


def generate_acute8_split(nx, ny, domain=(0.0, 1.0, 0.0, 1.0)):
    """Uniform grid of ``nx * ny`` cells, each cut into eight acute triangles.

    Each cell gets the midpoints of its bottom and top sides plus two interior
    points at ``(0.5 -/+ ACUTE8_HALF_GAP, ACUTE8_HEIGHT)`` in cell coordinates.
    The largest Euclidean angle of the resulting mesh is about 0.485*pi when
    the cells are square; the 0.49*pi bound holds for cell aspect ratios
    (width / height) between about 0.98 and 1.18.
    """
    _check_counts(nx=nx, ny=ny)
    x0, x1, y0, y1 = _rectangle(domain)
    sx, sy = (x1 - x0) / nx, (y1 - y0) / ny
    a, yh = ACUTE8_HALF_GAP, ACUTE8_HEIGHT

    corners = _grid_vertices(nx, ny, x0, x1, y0, y1)
    n_c = len(corners)
    # side midpoints on horizontal grid lines: (nx) per line, ny + 1 lines
    mx = x0 + (np.arange(nx) + 0.5) * sx
    my = y0 + np.arange(ny + 1) * sy
    MX, MY = np.meshgrid(mx, my, indexing="xy")
    mids = np.column_stack([MX.ravel(), MY.ravel()])
    n_m = len(mids)
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    left = np.column_stack([x0 + (ii + 0.5 - a) * sx, y0 + (jj + yh) * sy])
    right = np.column_stack([x0 + (ii + 0.5 + a) * sx, y0 + (jj + yh) * sy])
    verts = np.concatenate([corners, mids, left, right])

    A = jj * (nx + 1) + ii
    B = A + 1
    D = A + nx + 1
    C = D + 1
    E = n_c + jj * nx + ii
    G = E + nx
    cell = np.arange(nx * ny)
    P = n_c + n_m + cell
    Q = P + nx * ny
    tris = [(A, D, P), (A, E, P), (D, G, P), (B, C, Q),
            (E, B, Q), (C, G, Q), (E, Q, P), (P, Q, G)]
    elements = np.concatenate([np.column_stack(t) for t in tris])
    return SimplicialMesh.from_arrays(verts, elements)


def generate_holed_domain(n):
    """Unit square minus the central square [4/9, 5/9]^2, right-split.

    The hole occupies the central ``n/9 x n/9`` block of an ``n x n`` grid.
    Boundary vertices are labelled ``'outer'`` or ``'inner'``.
    """
    _check_counts(n=n)
    if n % 9:
        raise ValueError(f"n must be divisible by 9 so the hole aligns with the grid, got {n}")
    lo, hi = 4 * n // 9, 5 * n // 9
    sq = np.array([(i, j) for j in range(n) for i in range(n)
                   if not (lo <= i < hi and lo <= j < hi)], dtype=np.int64)
    verts = _grid_vertices(n, n, 0.0, 1.0, 0.0, 1.0)
    elements = _split_squares(sq, n)
    used = np.unique(elements)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = verts[used]
    elements = remap[elements]

    ij = np.rint(verts * n).astype(np.int64)
    outer = (ij == 0).any(axis=1) | (ij == n).any(axis=1)
    inner = ((ij >= lo) & (ij <= hi)).all(axis=1)
    labels = np.where(outer, "outer", np.where(inner, "inner", ""))
    return SimplicialMesh.from_arrays(verts, elements, labels=labels)


# Kuhn split of the unit cube: path through the cube along each permutation of axes.
_KUHN = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def generate_cube_split(n, box=(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)):
    """Uniform ``n^3`` cube grid with six tetrahedra per cube (Kuhn split)."""
    _check_counts(n=n)
    x0, x1, y0, y1, z0, z1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0 and z1 > z0):
        raise ValueError(f"degenerate box {box!r}")
    g = [np.linspace(x0, x1, n + 1), np.linspace(y0, y1, n + 1), np.linspace(z0, z1, n + 1)]
    X, Y, Z = np.meshgrid(*g, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    cubes = np.array([(i, j, k) for i in range(n) for j in range(n) for k in range(n)])
    tets = []
    for perm in _KUHN:
        cur = cubes.copy()
        path = [vid(*cur.T)]
        for ax in perm:
            cur = cur.copy()
            cur[:, ax] += 1
            path.append(vid(*cur.T))
        tets.append(np.column_stack(path))
    return SimplicialMesh.from_arrays(verts, np.concatenate(tets))


@dataclass
class ValidationReport:
    ok: bool
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def __str__(self):
        lines = ["mesh validation: " + ("PASS" if self.ok else "FAIL")]
        lines += [f"  failure: {f}" for f in self.failures]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def validate(mesh, rtol=1e-14):
    """Check orientation, volumes, conformity, patches and vertex ordering.

    Conformity is checked combinatorially: no repeated elements, every facet
    shared by at most two elements, the two elements of a shared facet on
    opposite sides of it, and (2D) angles around each interior vertex summing
    to 2*pi.
    """
    failures, notes = [], []
    V, T = mesh.vertices, mesh.elements
    d = mesh.dim

    if len(mesh.reoriented):
        notes.append(f"{len(mesh.reoriented)} element(s) reoriented to positive volume "
                     f"(first: {int(mesh.reoriented[0])})")
    if not np.array_equal(mesh.permutation, np.arange(mesh.n_vertices)):
        notes.append("vertices reordered interior-first")

    x = V[T]
    lengths = np.stack([np.linalg.norm(x[:, a] - x[:, b], axis=1)
                        for a, b in combinations(range(d + 1), 2)], axis=1)
    vol = mesh.volumes()
    bad = np.flatnonzero(vol <= rtol * lengths.max(axis=1) ** d)
    if len(bad):
        failures.append(f"orientation/volume: {len(bad)} element(s) with non-positive "
                        f"or degenerate volume (first: {int(bad[0])})")

    srt = np.sort(T, axis=1)
    _, counts = np.unique(srt, axis=0, return_counts=True)
    if (counts > 1).any():
        failures.append(f"conformity: {int((counts > 1).sum())} duplicated element(s)")

    facets, owner, opp = _facets(T)
    order = np.lexsort(facets.T[::-1])
    facets, owner, opp = facets[order], owner[order], opp[order]
    uniq, start, counts = np.unique(facets, axis=0, return_index=True, return_counts=True)
    if (counts > 2).any():
        failures.append(f"conformity: {int((counts > 2).sum())} facet(s) shared by more "
                        "than two elements")
    shared = start[counts == 2]
    if len(shared):
        f = facets[shared]
        base = V[f[:, 0]]
        span = V[f[:, 1:]] - base[:, None, :]
        a1 = V[T[owner[shared], opp[shared]]] - base
        a2 = V[T[owner[shared + 1], opp[shared + 1]]] - base
        s1 = np.linalg.det(np.concatenate([span, a1[:, None, :]], axis=1))
        s2 = np.linalg.det(np.concatenate([span, a2[:, None, :]], axis=1))
        same_side = np.flatnonzero(s1 * s2 >= 0)
        if len(same_side):
            failures.append(f"conformity: {len(same_side)} shared facet(s) with both "
                            "elements on the same side")

    if d == 2 and not failures:
        ang = _triangle_angles(x)
        total = np.zeros(mesh.n_vertices)
        np.add.at(total, T.ravel(), ang.ravel())
        inner = ~mesh.boundary
        off = np.flatnonzero(inner & (np.abs(total - 2 * np.pi) > 1e-9))
        if len(off):
            failures.append(f"conformity: {len(off)} interior vertex patch(es) do not "
                            "close to 2*pi (overlap or gap)")

    if mesh.boundary[:mesh.n_interior].any() or not mesh.boundary[mesh.n_interior:].all():
        failures.append("ordering: vertices are not interior-first")
    # boundary flags must agree with the facet structure
    bflag = np.zeros(mesh.n_vertices, dtype=bool)
    bflag[uniq[counts == 1].ravel()] = True
    if not np.array_equal(bflag, mesh.boundary):
        failures.append("ordering: boundary flags disagree with facet incidence")

    ptr, elem = mesh._patch_csr()
    inc = np.zeros(mesh.n_vertices, dtype=np.int64)
    np.add.at(inc, T.ravel(), 1)
    if not np.array_equal(np.diff(ptr), inc) or not all(
            i in T[elem[ptr[i]:ptr[i + 1]]] for i in range(0, mesh.n_vertices,
                                                           max(1, mesh.n_vertices // 64))):
        failures.append("patches: vertex_patches is not the inverse incidence relation")

    return ValidationReport(not failures, failures, notes)


def _fmt(v):
    return format(float(v), ".17g")


def write_mesh(mesh, path):
    """Write the ASCII mesh format (coordinates with 17 significant digits)."""
    path = Path(path)
    d = mesh.dim
    with path.open("w") as fh:
        fh.write(f"{d} {mesh.n_vertices} {mesh.n_interior} {mesh.n_elements}\n")
        for p in mesh.vertices:
            fh.write(" ".join(_fmt(v) for v in p) + "\n")
        for t in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in t) + "\n")
        if any(lab not in ("", "boundary") for lab in mesh.labels):
            fh.write("labels\n")
            for lab in mesh.labels:
                fh.write((lab or "-") + "\n")


def read_mesh(path):
    """Read the ASCII mesh format.

    Layout: header ``d N_v N_vi N``; ``N_v`` coordinate lines; ``N`` lines of
    ``d + 1`` zero-based vertex indices; optionally a ``labels`` line followed by
    ``N_v`` label tokens (``-`` for none).  Blank lines and ``#`` comments are
    ignored.  Vertices are reordered interior-first if needed; the permutation
    is kept on the returned mesh.
    """
    lines = []
    with Path(path).open() as fh:
        for no, raw in enumerate(fh, start=1):
            s = raw.split("#", 1)[0].strip()
            if s:
                lines.append((no, s.split()))
    if not lines:
        raise MeshFormatError("empty file", 1)
    no, head = lines[0]
    if len(head) != 4:
        raise MeshFormatError("header must be 'd N_v N_vi N'", no)
    try:
        d, nv, nvi, ne = (int(v) for v in head)
    except ValueError:
        raise MeshFormatError("header entries must be integers", no) from None
    if d not in (2, 3):
        raise MeshFormatError(f"dimension must be 2 or 3, got {d}", no)
    need = 1 + nv + ne
    if len(lines) < need:
        raise MeshFormatError(f"expected {nv} vertex and {ne} element lines, file ends early",
                              lines[-1][0])
    verts = np.empty((nv, d))
    for k in range(nv):
        no, tok = lines[1 + k]
        if len(tok) != d:
            raise MeshFormatError(f"vertex line needs {d} coordinates, got {len(tok)}", no)
        try:
            verts[k] = [float(t) for t in tok]
        except ValueError:
            raise MeshFormatError("bad coordinate", no) from None
    elems = np.empty((ne, d + 1), dtype=np.int64)
    for k in range(ne):
        no, tok = lines[1 + nv + k]
        if len(tok) != d + 1:
            raise MeshFormatError(f"element line needs {d + 1} indices for d={d}, got {len(tok)}", no)
        try:
            elems[k] = [int(t) for t in tok]
        except ValueError:
            raise MeshFormatError("bad vertex index", no) from None
        if elems[k].min() < 0 or elems[k].max() >= nv:
            raise MeshFormatError("vertex index out of range", no)
    labels = None
    rest = lines[need:]
    if rest:
        no, tok = rest[0]
        if tok != ["labels"]:
            raise MeshFormatError("unexpected trailing content", no)
        if len(rest) != nv + 1:
            raise MeshFormatError(f"labels section needs {nv} entries", no)
        labels = ["" if t[1][0] == "-" else t[1][0] for t in rest[1:]]
    mesh = SimplicialMesh.from_arrays(verts, elems, labels=labels)
    if mesh.n_interior != nvi:
        raise MeshFormatError(
            f"header declares {nvi} interior vertices, topology gives {mesh.n_interior}", lines[0][0])
    return mesh


def write_vtk(mesh, field, path, name="u", title="dmpfem solution"):
    """Write a legacy ASCII VTK unstructured grid with one nodal scalar field."""
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise ValueError(f"field has shape {field.shape}, expected ({mesh.n_vertices},)")
    d = mesh.dim
    m = d + 1
    cell_type = 5 if d == 2 else 10
    pts = mesh.vertices if d == 3 else np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
    out = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    out += [" ".join(_fmt(v) for v in p) for p in pts]
    out.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (m + 1)}")
    out += [f"{m} " + " ".join(str(int(v)) for v in t) for t in mesh.elements]
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out += [str(cell_type)] * mesh.n_elements
    out += [f"POINT_DATA {mesh.n_vertices}", f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    out += [_fmt(v) for v in field]
    Path(path).write_text("\n".join(out) + "\n")
