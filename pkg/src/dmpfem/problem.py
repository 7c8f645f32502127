"""Boundary value problem definitions and the four built-in examples.

Coefficient fields are vectorized callables taking points of shape ``(..., d)``:
``diffusion`` returns ``(..., d, d)``, ``convection`` returns ``(..., d)`` and
``reaction``, ``source`` and ``dirichlet`` return ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import spd_eigenvalues

__all__ = [
    "ProblemDefinition",
    "CoefficientBounds",
    "ProblemReport",
    "BUILTINS",
    "builtin",
    "constant_problem",
    "problem_from_config",
    "coefficient_bounds",
    "sample_points",
    "validate_problem",
]


@dataclass(frozen=True)
class ProblemDefinition:
    """-div(D grad u) + b . grad u + c u = f in Omega, u = g on the boundary."""

    name: str
    dim: int
    diffusion: Callable
    convection: Callable
    reaction: Callable
    source: Callable
    dirichlet: Callable
    div_convection: Optional[Callable] = None
    exact: Optional[Callable] = None
    domain: Optional[tuple] = None
    # scalar multiplier bounding the convection field pointwise, when the
    # problem defines one (e.g. 5000 for ex5.4)
    nominal_b: Optional[float] = None
    params: dict = field(default_factory=dict)
    # constant problems record their data so they can round-trip through config
    constants: Optional[dict] = None

    def to_config(self):
        """Key/value strings that rebuild this problem via :func:`problem_from_config`."""
        if self.name in BUILTINS:
            cfg = {"name": self.name}
            cfg.update({k: repr(float(v)) for k, v in self.params.items()})
            return cfg
        if self.constants is None:
            raise ValueError(f"problem {self.name!r} has no config representation")
        return {"name": "constant",
                **{k: " ".join(repr(float(x)) for x in np.ravel(v))
                   for k, v in self.constants.items()}}

    def is_source_free(self, points):
        return bool(np.all(self.source(points) == 0.0))


def _const_matrix(M):
    M = np.array(M, dtype=float)

    def f(x):
        x = np.asarray(x)
        return np.broadcast_to(M, x.shape[:-1] + M.shape).copy()
    return f


def _const_vector(v):
    v = np.array(v, dtype=float)

    def f(x):
        x = np.asarray(x)
        return np.broadcast_to(v, x.shape[:-1] + v.shape).copy()
    return f


def _const_scalar(c):
    c = float(c)

    def f(x):
        return np.full(np.asarray(x).shape[:-1], c)
    return f


def _affine_scalar(coef):
    coef = np.array(coef, dtype=float)

    def f(x):
        x = np.asarray(x, dtype=float)
        return coef[0] + x @ coef[1:]
    return f


def _ex51_dirichlet(x):
    x = np.asarray(x, dtype=float)
    X, Y = x[..., 0], x[..., 1]
    tol = 1e-12 * 16
    out = np.zeros(X.shape)
    left = np.isclose(X, 0.0, atol=tol)
    top = np.isclose(Y, 16.0, atol=tol)
    zero = np.isclose(Y, 0.0, atol=tol) | np.isclose(X, 16.0, atol=tol)
    out = np.where(left, np.where(Y < 2.0, 0.5 * Y, 1.0), out)
    out = np.where(top & ~left, np.where(X <= 14.0, 1.0, 8.0 - 0.5 * X), out)
    return np.where(zero, 0.0, out)


def _square_problem(name, D, bnorm):
    bnorm = float(bnorm)
    return ProblemDefinition(
        name=name,
        dim=2,
        diffusion=_const_matrix(D),
        convection=_const_vector([bnorm, bnorm]),
        reaction=_const_scalar(0.0),
        source=_const_scalar(0.0),
        dirichlet=_ex51_dirichlet,
        div_convection=_const_scalar(0.0),
        domain=(0.0, 16.0, 0.0, 16.0),
        nominal_b=bnorm,
        params={"bnorm": bnorm},
    )


def ex51(bnorm=10.0):
    """Isotropic diffusion on [0, 16]^2 with b = bnorm (1, 1), c = f = 0."""
    return _square_problem("ex5.1", np.eye(2), bnorm)


def ex52(bnorm=10.0):
    """ex5.1 with the strongly anisotropic D = [[500.5, 499.5], [499.5, 500.5]]."""
    return _square_problem("ex5.2", [[500.5, 499.5], [499.5, 500.5]], bnorm)


def ex53(bnorm=10.0):
    """ex5.1 with D = [[50, 12], [12, 50]]."""
    return _square_problem("ex5.3", [[50.0, 12.0], [12.0, 50.0]], bnorm)


_HOLE_HALF = 1.0 / 18.0


def _ex54_diffusion(x):
    x = np.asarray(x, dtype=float)
    alpha = np.pi * np.sin(x[..., 0]) * np.cos(x[..., 1])
    c, s = np.cos(alpha), np.sin(alpha)
    d11 = 1000.0 * c * c + s * s
    d22 = 1000.0 * s * s + c * c
    d12 = 999.0 * c * s
    return np.stack([np.stack([d11, d12], -1), np.stack([d12, d22], -1)], -2)


def _ex54_convection(x):
    x = np.asarray(x, dtype=float)
    return np.stack([5000.0 * (0.5 - x[..., 1]), 5000.0 * (x[..., 0] - 0.5)], -1)


def _ex54_dirichlet(x):
    x = np.asarray(x, dtype=float)
    r = np.maximum(np.abs(x[..., 0] - 0.5), np.abs(x[..., 1] - 0.5))
    return np.where(r <= _HOLE_HALF + 1e-9, 2.0, 0.0)


def ex54():
    """Rotating convection around the hole of [0, 1]^2 minus [4/9, 5/9]^2.

    D = R(alpha) diag(1000, 1) R(alpha)^T with alpha = pi sin(x) cos(y),
    b = 5000 (0.5 - y, x - 0.5), c = 100, f = 0, g = 2 on the hole, 0 outside.
    """
    return ProblemDefinition(
        name="ex5.4",
        dim=2,
        diffusion=_ex54_diffusion,
        convection=_ex54_convection,
        reaction=_const_scalar(100.0),
        source=_const_scalar(0.0),
        dirichlet=_ex54_dirichlet,
        div_convection=_const_scalar(0.0),
        domain=(0.0, 1.0, 0.0, 1.0),
        nominal_b=5000.0,
    )


BUILTINS = {"ex5.1": ex51, "ex5.2": ex52, "ex5.3": ex53, "ex5.4": ex54}


def builtin(name, **params):
    """Built-in example problem by name ('ex5.1' ... 'ex5.4')."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


def constant_problem(D, b, c=0.0, f=0.0, g=0.0, name="constant"):
    """Problem with constant coefficients and constant or affine Dirichlet data.

    ``g`` is a scalar or the coefficients ``(g0, g1, ..., gd)`` of
    ``g0 + g1 x1 + ... + gd xd``.
    """
    D = np.array(D, dtype=float)
    d = D.shape[0]
    g = np.atleast_1d(np.array(g, dtype=float))
    if g.size == 1:
        g = np.concatenate([g, np.zeros(d)])
    if g.size != d + 1:
        raise ValueError(f"affine Dirichlet data needs {d + 1} coefficients")
    return ProblemDefinition(
        name=name,
        dim=d,
        diffusion=_const_matrix(D),
        convection=_const_vector(b),
        reaction=_const_scalar(c),
        source=_const_scalar(f),
        dirichlet=_affine_scalar(g),
        div_convection=_const_scalar(0.0),
        nominal_b=float(np.max(np.abs(b))),
        constants={"diffusion": D, "convection": np.array(b, float), "reaction": float(c),
                   "source": float(f), "dirichlet": g},
    )


def problem_from_config(section):
    """Rebuild a problem from a mapping of strings (see ``to_config``)."""
    section = dict(section)
    name = section.pop("name")
    if name in BUILTINS:
        return builtin(name, **{k: float(v) for k, v in section.items()})
    if name != "constant":
        raise ValueError(f"unknown problem {name!r}")

    def nums(key, default=None):
        if key not in section:
            if default is None:
                raise ValueError(f"constant problem needs '{key}'")
            return default
        return np.array([float(t) for t in str(section[key]).replace(",", " ").split()])

    b = nums("convection")
    d = len(b)
    D = nums("diffusion").reshape(d, d)
    return constant_problem(D, b, float(nums("reaction", [0.0])[0]),
                            float(nums("source", [0.0])[0]), nums("dirichlet", [0.0]))


@dataclass
class CoefficientBounds:
    """Per-element and global coefficient bounds over a sample set.

    ``b_norm`` is the maximum Euclidean norm of b; ``b_comp`` the maximum
    absolute component.  ``lam_min`` is the smallest eigenvalue of the element
    average D_K; ``lam_min_global`` the smallest eigenvalue of D over all
    sample points.
    """

    b_norm: np.ndarray
    b_comp: np.ndarray
    c: np.ndarray
    lam_min: np.ndarray
    lam_min_global: float

    @property
    def b_norm_max(self):
        return float(self.b_norm.max())

    @property
    def b_comp_max(self):
        return float(self.b_comp.max())

    @property
    def c_max(self):
        return float(self.c.max())


def sample_points(mesh, extra_degree=None):
    """Barycentric sample set: vertices, edge midpoints, barycentre (+ quadrature).

    Returns physical points of shape (N, ns, d).
    """
    m = mesh.dim + 1
    pts = [np.eye(m)]
    for a in range(m):
        for b in range(a + 1, m):
            p = np.zeros(m)
            p[a] = p[b] = 0.5
            pts.append(p[None])
    pts.append(np.full((1, m), 1.0 / m))
    if extra_degree is not None:
        from .quadrature import simplex_rule

        pts.append(simplex_rule(mesh.dim, extra_degree).points)
    bary = np.concatenate(pts)
    return np.einsum("sa,nad->nsd", bary, mesh.element_coordinates())


def coefficient_bounds(problem, mesh, extra_degree=None, dk=None):
    """Sampled ||b||_{inf,K}, ||c||_{inf,K} and lambda_min(D_K) per element."""
    from .assembly import average_diffusion

    x = sample_points(mesh, extra_degree)
    b = problem.convection(x)
    c = problem.reaction(x)
    if dk is None:
        dk = average_diffusion(problem, mesh)
    lam = spd_eigenvalues(dk)[:, 0]
    lam_pts = spd_eigenvalues(problem.diffusion(x).reshape(-1, mesh.dim, mesh.dim))[:, 0]
    return CoefficientBounds(
        b_norm=np.linalg.norm(b, axis=-1).max(axis=1),
        b_comp=np.abs(b).max(axis=(1, 2)),
        c=c.max(axis=1),
        lam_min=lam,
        lam_min_global=float(lam_pts.min()),
    )


@dataclass
class ProblemReport:
    ok: bool
    failures: list
    min_reaction: float
    min_coercivity: float

    def __bool__(self):
        return self.ok


def _divergence(problem, x):
    if problem.div_convection is not None:
        return problem.div_convection(x)
    span = np.ptp(x.reshape(-1, x.shape[-1]), axis=0)
    step = 1e-6 * max(float(np.linalg.norm(span)), 1e-300)
    div = np.zeros(x.shape[:-1])
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = step
        div += (problem.convection(x + e)[..., k] - problem.convection(x - e)[..., k]) / (2 * step)
    return div


def validate_problem(problem, points, slack=1e-10):
    """Check D SPD, c >= 0 and c - div(b)/2 >= 0 at the given points.

    ``points`` has shape (..., d).  The divergence is analytic when the
    problem provides it, else a central difference with step
    1e-6 times the diameter of the point cloud.
    """
    x = np.asarray(points, dtype=float)
    failures = []
    try:
        spd_eigenvalues(problem.diffusion(x).reshape(-1, problem.dim, problem.dim))
    except ValueError as exc:
        failures.append(f"diffusion: {exc}")
    c = problem.reaction(x)
    coer = c - 0.5 * _divergence(problem, x)
    if c.min() < -slack:
        failures.append(f"reaction: c = {c.min():.6g} < 0")
    if coer.min() < -slack:
        failures.append(f"coercivity: c - div(b)/2 = {coer.min():.6g} < 0")
    return ProblemReport(not failures, failures, float(c.min()), float(coer.min()))
