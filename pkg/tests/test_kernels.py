"""The compiled and numpy kernel backends must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from dmpfem import _pykernels, kernels
from dmpfem import assembly as A
from dmpfem import conditions as C
from dmpfem import mesh as M
from dmpfem import problem as P
from dmpfem.quadrature import simplex_rule

from conftest import random_simplices, random_spd

ck = pytest.importorskip("dmpfem._ckernels", reason="compiled kernels not built")


@pytest.mark.parametrize("d", [2, 3])
def test_simplex_geometry(rng, d):
    x = random_simplices(rng, 500, d)
    for a, b in zip(ck.simplex_geometry(x), _pykernels.simplex_geometry(x)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_local_blocks(rng, d):
    n = 300
    x = random_simplices(rng, n, d)
    q, vol, _ = _pykernels.simplex_geometry(x)
    rule = simplex_rule(d, 4)
    nq = len(rule.weights)
    args = (q, vol, random_spd(rng, n, d), rule.points, rule.weights,
            rng.normal(size=(n, nq, d)), rng.uniform(0, 2, (n, nq)), rng.normal(size=(n, nq)))
    for a, b in zip(ck.local_blocks(*args), _pykernels.local_blocks(*args)):
        scale = np.abs(b).max()
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-13 * scale)


@pytest.mark.parametrize("make", [lambda: M.generate_acute8_split(5, 4),
                                  lambda: M.generate_cube_split(3)])
def test_patch_normal_equations(rng, make):
    mesh = make()
    ptr, nodes = C._ring_patches(mesh, 1)
    vals = rng.normal(size=mesh.n_vertices)
    for a, b in zip(ck.patch_normal_equations(ptr, nodes, mesh.vertices, vals),
                    _pykernels.patch_normal_equations(ptr, nodes, mesh.vertices, vals)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_assembled_systems_agree():
    mesh = M.generate_holed_domain(18)
    p = P.ex54()
    prev = kernels.use_backend("python")
    try:
        py = A.assemble(p, mesh)
        kernels.use_backend("cython")
        cy = A.assemble(p, mesh)
    finally:
        kernels.use_backend(prev)
    diff = abs(py.matrix - cy.matrix).max()
    assert diff <= 1e-12 * py.norm_inf()
    np.testing.assert_allclose(py.rhs, cy.rhs, rtol=1e-12, atol=1e-12)


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_environment_forces_python():
    env = dict(os.environ, DMPFEM_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", "from dmpfem import kernels; print(kernels.BACKEND)"],
                          capture_output=True, text=True, env=env)
    assert proc.stdout.strip() == "python"
