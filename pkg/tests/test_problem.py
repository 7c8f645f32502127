"""Built-in problems, coefficient bounds and the coercivity checks."""

import numpy as np
import pytest

from dmpfem import mesh as M
from dmpfem import problem as P


class TestBuiltins:
    def test_ex51_dirichlet_values(self):
        p = P.ex51()
        g = p.dirichlet(np.array([[0.0, 1.0], [0.0, 8.0], [15.0, 16.0], [3.0, 0.0], [16.0, 5.0]]))
        np.testing.assert_allclose(g, [0.5, 1.0, 0.5, 0.0, 0.0])

    def test_ex51_data(self):
        p = P.ex51(bnorm=10)
        x = np.random.default_rng(0).uniform(0, 16, (20, 2))
        np.testing.assert_array_equal(p.diffusion(x), np.broadcast_to(np.eye(2), (20, 2, 2)))
        np.testing.assert_array_equal(p.convection(x), np.full((20, 2), 10.0))
        assert np.all(p.reaction(x) == 0) and np.all(p.source(x) == 0)

    @pytest.mark.parametrize("name,D", [
        ("ex5.2", [[500.5, 499.5], [499.5, 500.5]]),
        ("ex5.3", [[50.0, 12.0], [12.0, 50.0]]),
    ])
    def test_anisotropic_matrices(self, name, D):
        p = P.builtin(name)
        np.testing.assert_array_equal(p.diffusion(np.zeros((1, 2)))[0], D)

    def test_ex54_origin_eigenvalues(self):
        D = P.ex54().diffusion(np.zeros((1, 2)))[0]
        np.testing.assert_allclose(np.linalg.eigvalsh(D), [1.0, 1000.0])

    def test_ex54_fields(self):
        p = P.ex54()
        x = np.array([[0.5, 0.5], [0.0, 0.0], [1.0, 0.25]])
        np.testing.assert_allclose(p.convection(x), 5000 * np.column_stack([0.5 - x[:, 1], x[:, 0] - 0.5]))
        assert np.all(p.reaction(x) == 100.0)
        g = p.dirichlet(np.array([[0.5 + 1 / 18, 0.5], [0.0, 0.3], [1.0, 1.0]]))
        np.testing.assert_array_equal(g, [2.0, 0.0, 0.0])

    def test_ex54_divergence_free(self):
        p = P.ex54()
        x = np.random.default_rng(1).uniform(0, 1, (50, 2))
        assert np.all(p.div_convection(x) == 0)
        assert np.all(p.reaction(x) - 0.5 * p.div_convection(x) == 100.0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            P.builtin("ex9")

    @pytest.mark.parametrize("name", sorted(P.BUILTINS))
    def test_builtins_valid(self, name):
        p = P.builtin(name)
        lo, hi = (0, 16) if name != "ex5.4" else (0, 1)
        x = np.random.default_rng(2).uniform(lo, hi, (200, 2))
        assert P.validate_problem(p, x).ok

    @pytest.mark.parametrize("name", sorted(P.BUILTINS))
    def test_config_roundtrip(self, name):
        p = P.builtin(name)
        q = P.problem_from_config(p.to_config())
        x = np.random.default_rng(3).uniform(0, 1, (20, 2)) * (16 if name != "ex5.4" else 1)
        for f in ("diffusion", "convection", "reaction", "source", "dirichlet"):
            np.testing.assert_array_equal(getattr(p, f)(x), getattr(q, f)(x))

    def test_constant_roundtrip(self):
        p = P.constant_problem([[2.0, 0.5], [0.5, 1.0]], [1.0, -2.0], 0.5, 0.0, [1.0, 0.5, -0.25])
        q = P.problem_from_config(p.to_config())
        x = np.random.default_rng(4).uniform(-1, 1, (20, 2))
        for f in ("diffusion", "convection", "reaction", "source", "dirichlet"):
            np.testing.assert_array_equal(getattr(p, f)(x), getattr(q, f)(x))


class TestValidation:
    def test_negative_reaction(self):
        p = P.constant_problem(np.eye(2), [0.0, 0.0], c=-1.0)
        rep = P.validate_problem(p, np.zeros((3, 2)))
        assert not rep.ok
        assert any("reaction" in f for f in rep.failures)

    def test_expanding_convection(self):
        from dataclasses import replace

        base = P.constant_problem(np.eye(2), [0.0, 0.0])
        p = replace(base, convection=lambda x: np.asarray(x, float).copy(), div_convection=None)
        rep = P.validate_problem(p, np.random.default_rng(5).uniform(0, 1, (30, 2)))
        assert not rep.ok
        assert rep.min_coercivity == pytest.approx(-1.0, rel=1e-6)


class TestCoefficientBounds:
    def test_ex51_euclidean_norm(self):
        mesh = M.generate_acute8_split(2, 2, (0, 16, 0, 16))
        b = P.coefficient_bounds(P.ex51(bnorm=10), mesh)
        np.testing.assert_allclose(b.b_norm, 10 * np.sqrt(2), rtol=1e-15)
        np.testing.assert_allclose(b.b_comp, 10.0)

    def test_ex53_lambda_min(self):
        mesh = M.generate_right_split(3, 3, (0, 16, 0, 16))
        b = P.coefficient_bounds(P.ex53(), mesh)
        np.testing.assert_allclose(b.lam_min, 38.0, rtol=1e-13)
        assert b.lam_min_global == pytest.approx(38.0)

    def test_ex54_reaction(self):
        b = P.coefficient_bounds(P.ex54(), M.generate_holed_domain(18))
        assert b.c_max == 100.0
        assert b.lam_min_global == pytest.approx(1.0)
        assert b.b_norm_max <= 5000 / np.sqrt(2) + 1e-9

    def test_constant_independent_of_sampling(self):
        mesh = M.generate_right_split(2, 2)
        p = P.constant_problem([[3.0, 1.0], [1.0, 2.0]], [2.0, -1.0], 0.7)
        a = P.coefficient_bounds(p, mesh)
        b = P.coefficient_bounds(p, mesh, extra_degree=6)
        np.testing.assert_array_equal(a.b_norm, b.b_norm)
        np.testing.assert_array_equal(a.c, b.c)

    def test_global_is_max_of_elements(self):
        b = P.coefficient_bounds(P.ex54(), M.generate_holed_domain(9))
        assert b.b_norm_max == b.b_norm.max()
        assert b.c_max == b.c.max()
