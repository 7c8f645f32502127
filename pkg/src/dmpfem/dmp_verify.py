"""Matrix-level and solution-level checks of the discrete maximum principle.

The three matrix checks mirror the proof that a Z-matrix with nonnegative
interior row sums and ``A11^{-1} >= 0`` yields a nonnegative inverse of the
block matrix ``[[A11, A12], [0, I]]``; :func:`extremum_report` measures the
computed solution against the boundary envelope directly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .quadrature import simplex_rule

__all__ = [
    "Verdict",
    "DmpReport",
    "check_z_matrix",
    "check_row_sums",
    "check_a11_positive_definite",
    "check_m_matrix",
    "extremum_report",
    "verify",
    "M_MATRIX_CAP",
]

M_MATRIX_CAP = 3000
OFFDIAG_RTOL = 1e-12
ROWSUM_XCHECK_RTOL = 1e-10
INVERSE_RTOL = 1e-10


@dataclass
class Verdict:
    """Outcome of one check: ``status`` is 'pass', 'fail' or 'skipped'."""

    status: str
    detail: str = ""
    violations: list = field(default_factory=list)
    worst: float = 0.0

    @property
    def passed(self):
        return self.status == "pass"

    def __bool__(self):
        return self.passed

    def __str__(self):
        return self.status if not self.detail else f"{self.status} ({self.detail})"


def _offdiag_interior(system):
    A = system.matrix[: system.n_interior].tocoo()
    off = A.row != A.col
    return A.row[off], A.col[off], A.data[off]


def check_z_matrix(system, max_report=20):
    """Z-matrix check on the interior rows.

    Pass iff ``a_ij <= tol`` for all i != j with i interior and ``a_ii >= -tol``,
    ``tol = 1e-12 ||A||_inf``.  Violations are listed as ``(i, j, a_ij)``,
    largest first.
    """
    tol = OFFDIAG_RTOL * system.norm_inf()
    r, c, v = _offdiag_interior(system)
    bad = v > tol
    diag = system.matrix.diagonal()
    dbad = np.flatnonzero(diag < -tol)
    order = np.argsort(-v[bad], kind="stable")
    viol = [(int(i), int(j), float(a)) for i, j, a in
            zip(r[bad][order], c[bad][order], v[bad][order])][:max_report]
    viol += [(int(i), int(i), float(diag[i])) for i in dbad[:max_report]]
    n = int(bad.sum()) + len(dbad)
    worst = float(v.max()) if len(v) else 0.0
    if n:
        return Verdict("fail", f"{n} entries, max off-diagonal {worst:.3e}", viol, worst)
    return Verdict("pass", f"max off-diagonal {worst:.3e}", [], worst)


def _reaction_row_integrals(problem, mesh):
    """Independent ``sum_K int_K c phi_i`` per vertex with a degree-4 rule."""
    rule = simplex_rule(mesh.dim, 4)
    x = rule.physical_points(mesh.element_coordinates())
    cq = problem.reaction(x)
    vol = mesh.volumes()
    local = vol[:, None] * np.einsum("q,nq,qi->ni", rule.weights, cq, rule.points)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.elements.ravel(), local.ravel())
    return out


def check_row_sums(system, problem=None, mesh=None):
    """Interior row sums nonnegative, cross-checked against the reaction integrals.

    Pass iff every interior row sum is ``>= -1e-12 ||A||_inf`` and, when
    ``problem`` and ``mesh`` are given, every row sum agrees with
    ``sum_K int_K c phi_i`` to ``1e-10`` relative to the row's scale
    ``max(|expected|, max_j |a_ij|)``.
    """
    nvi = system.n_interior
    A = system.matrix[:nvi]
    sums = np.asarray(A.sum(axis=1)).ravel()
    tol = OFFDIAG_RTOL * system.norm_inf()
    if nvi == 0:
        return Verdict("pass", "no interior rows")
    worst_row = int(np.argmin(sums))
    worst = float(sums[worst_row])
    notes = []
    viol = [(int(i), float(s)) for i, s in enumerate(sums) if s < -tol][:20]
    status = "fail" if viol else "pass"
    if problem is not None and mesh is not None:
        expect = _reaction_row_integrals(problem, mesh)[:nvi]
        rowmax = np.asarray(abs(A).max(axis=1).todense()).ravel()
        scale = np.maximum(np.abs(expect), rowmax)
        err = np.abs(sums - expect) / np.where(scale > 0, scale, 1.0)
        k = int(np.argmax(err))
        if err[k] > ROWSUM_XCHECK_RTOL:
            status = "fail"
            notes.append(f"row {k} sum {sums[k]:.6e} != reaction integral {expect[k]:.6e}")
        else:
            notes.append(f"reaction cross-check max rel err {err[k]:.1e}")
    notes.insert(0, f"min row sum {worst:.3e} at row {worst_row}")
    return Verdict(status, "; ".join(notes), viol, worst)


def check_a11_positive_definite(system, n_samples=100, seed=0):
    """Sampled ``v^T A11 v > 0`` for random nonzero v (a probe, not a proof)."""
    nvi = system.n_interior
    if nvi == 0:
        return Verdict("pass", "empty block")
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((nvi, n_samples))
    vals = np.einsum("ij,ij->j", V, system.a11 @ V)
    worst = float(vals.min())
    return Verdict("pass" if worst > 0 else "fail", f"min sampled quadratic form {worst:.3e}",
                   [], worst)


def check_m_matrix(system, size_cap=M_MATRIX_CAP, block=256):
    """Entrywise nonnegativity of ``A11^{-1}`` by column-block solves.

    Skipped when the system has more than ``size_cap`` vertices.  Pass iff all
    entries are ``>= -1e-10 max|A11^{-1}|``.
    """
    n = system.size
    nvi = system.n_interior
    if n > size_cap:
        return Verdict("skipped", f"N_v = {n} > {size_cap}")
    if nvi == 0:
        return Verdict("pass", "empty block")
    try:
        lu = splu(sp.csc_matrix(system.a11))
    except RuntimeError as exc:
        return Verdict("fail", f"A11 singular: {exc}")
    lo, hi = np.inf, 0.0
    arg = None
    for start in range(0, nvi, block):
        stop = min(start + block, nvi)
        E = np.zeros((nvi, stop - start))
        E[np.arange(start, stop), np.arange(stop - start)] = 1.0
        X = lu.solve(E)
        if not np.all(np.isfinite(X)):
            return Verdict("fail", "A11 singular: non-finite inverse")
        hi = max(hi, float(np.abs(X).max()))
        k = np.unravel_index(np.argmin(X), X.shape)
        if X[k] < lo:
            lo, arg = float(X[k]), (int(k[0]), int(k[1] + start))
    if lo >= -INVERSE_RTOL * hi:
        return Verdict("pass", f"min entry {lo:.3e}", [], lo)
    return Verdict("fail", f"min entry {lo:.3e} at {arg}", [arg], lo)


@dataclass
class DmpReport:
    """Matrix verdicts and the solution envelope of one solve."""

    z_matrix: Verdict = None
    row_sums_nonneg: Verdict = None
    a11_positive_definite: Verdict = None
    m_matrix: Verdict = None
    solution_min: float = np.nan
    solution_max: float = np.nan
    bound_low: float = np.nan
    bound_high: float = np.nan
    undershoot: float = np.nan
    overshoot: float = np.nan
    minus_umin: float = np.nan
    residual: float = np.nan
    bounds_applicable: bool = False

    def as_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = "" if v is None else (v.status if isinstance(v, Verdict) else v)
        return out

    def to_keyvalue(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Verdict):
                v = str(v)
            elif isinstance(v, float):
                v = repr(float(v))
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def csv_header(self):
        return list(self.as_dict())

    def to_csv_row(self):
        buf = io.StringIO()
        csv.writer(buf).writerow([repr(float(v)) if isinstance(v, float) else v
                                  for v in self.as_dict().values()])
        return buf.getvalue()


def extremum_report(u, problem, mesh, residual=0.0, report=None):
    """Fill the solution fields of a :class:`DmpReport`.

    With ``f == 0`` at the sample points, the envelope is
    ``[min(0, g_min), max(0, g_max)]`` over boundary vertices; undershoot and
    overshoot at or below ``10 * residual`` are reported as zero.  ``minus_umin``
    is ``-min u`` clipped at zero the same way.
    """
    from .problem import sample_points

    rep = report if report is not None else DmpReport()
    u = np.asarray(u, dtype=float)
    rep.solution_min = float(u.min())
    rep.solution_max = float(u.max())
    rep.residual = float(residual)
    floor = 10.0 * float(residual)
    rep.bounds_applicable = bool(problem.is_source_free(sample_points(mesh)))
    if rep.bounds_applicable:
        g = u[mesh.n_interior:] if mesh.n_interior < mesh.n_vertices else np.zeros(1)
        rep.bound_low = min(0.0, float(g.min()))
        rep.bound_high = max(0.0, float(g.max()))
        under = max(0.0, rep.bound_low - rep.solution_min)
        over = max(0.0, rep.solution_max - rep.bound_high)
        rep.undershoot = under if under > floor else 0.0
        rep.overshoot = over if over > floor else 0.0
    mu = max(0.0, -rep.solution_min)
    rep.minus_umin = mu if mu > floor else 0.0
    return rep


def verify(system, problem, mesh, u=None, residual=0.0, size_cap=M_MATRIX_CAP):
    """Run all matrix checks and, if ``u`` is given, the extremum report."""
    rep = DmpReport()
    rep.z_matrix = check_z_matrix(system)
    rep.row_sums_nonneg = check_row_sums(system, problem, mesh)
    rep.a11_positive_definite = check_a11_positive_definite(system)
    rep.m_matrix = check_m_matrix(system, size_cap)
    if u is not None:
        extremum_report(u, problem, mesh, residual, rep)
    return rep
