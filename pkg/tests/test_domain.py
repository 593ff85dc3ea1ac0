"""Polytope construction, reduction, exact cuts, and utility minimisation."""
import json

import numpy as np
import pytest

from polyfolio.domain import (FullDimDomain, PortfolioDomain, build_domain,
                              full_dimensionalize, min_max_volatility,
                              minimize_quadratic_utility, project_simplex,
                              varsi_fraction, varsi_fraction_many)
from polyfolio.errors import (ConvergenceError, DegenerateInputError,
                              InvalidParameterError)
from polyfolio.sampler import (LogConcaveDensity, QuadraticExponent,
                               SamplerConfig, sample_logconcave)


class TestBuildDomain:
    def test_simplex_structure(self):
        dom = build_domain(3)
        assert dom.kind == "simplex"
        assert dom.A.shape == (3, 3) and np.allclose(dom.A, -np.eye(3))
        assert np.allclose(dom.b, 0)
        assert dom.A_eq.shape == (1, 3) and np.allclose(dom.A_eq, 1)
        assert dom.contains_portfolio([0.2, 0.3, 0.5])
        assert not dom.contains_portfolio([0.6, 0.6, -0.2])

    def test_gamma_one_gives_simplex(self):
        assert build_domain(4, gamma=1.0).kind == "simplex"

    def test_150_50_point_feasible(self):
        dom = build_domain(2, gamma=2.0)
        assert dom.dim == 4
        v = np.array([1.5, -0.5, 1.5, 0.5])
        assert dom.contains(v)
        assert dom.contains_portfolio([1.5, -0.5])

    def test_norm_budget_rejects_excess_shorting(self):
        dom = build_domain(2, gamma=1.6)
        assert not dom.contains_portfolio([1.4, -0.4])  # L1 norm 1.8 > 1.6
        assert dom.contains_portfolio([1.3, -0.3])

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            build_domain(1)
        with pytest.raises(InvalidParameterError):
            build_domain(3, gamma=0.5)

    def test_json_round_trip(self):
        dom = build_domain(3, gamma=1.6)
        doc = json.loads(dom.to_json())
        assert set(doc) == {"n", "kind", "gamma", "A", "b", "A_eq", "b_eq"}
        back = PortfolioDomain.from_json(dom.to_json())
        assert back.kind == dom.kind and back.gamma == dom.gamma
        assert np.allclose(back.A, dom.A) and np.allclose(back.b, dom.b)


class TestFullDimensionalize:
    def test_simplex_dimensions(self):
        assert full_dimensionalize(build_domain(3)).d == 2
        assert full_dimensionalize(build_domain(7)).d == 6

    def test_segment_endpoints(self):
        fd = full_dimensionalize(build_domain(2))
        assert fd.d == 1
        lo = -fd.z[fd.B[:, 0] < 0] / fd.B[fd.B[:, 0] < 0, 0]
        hi = fd.z[fd.B[:, 0] > 0] / fd.B[fd.B[:, 0] > 0, 0]
        ends = fd.to_original(np.array([[lo.max()], [hi.min()]]))
        ends = ends[np.argsort(ends[:, 0])]
        assert np.allclose(ends, [[0, 1], [1, 0]], atol=1e-10)

    def test_orthonormal_basis(self):
        fd = full_dimensionalize(build_domain(5, gamma=1.3))
        gram = fd.N.T @ fd.N
        assert np.allclose(gram, np.eye(fd.d), atol=1e-10)

    def test_norm_constrained_round_trip(self):
        dom = build_domain(3, gamma=1.6)
        fd = dom.full_dim
        assert fd.d == 5
        dens = LogConcaveDensity(domain=dom, h=QuadraticExponent.zero(6),
                                 alpha=0.0)
        pts = sample_logconcave(dens, SamplerConfig(seed=0), 1000)
        assert np.all(dom.A @ pts.T <= dom.b[:, None] + 1e-10)
        assert np.allclose(dom.A_eq @ pts.T, dom.b_eq[:, None], atol=1e-10)

    def test_rank_deficient_equalities_rejected(self):
        dom = PortfolioDomain(n_assets=3, kind="custom", gamma=None,
                              A=-np.eye(3), b=np.zeros(3),
                              A_eq=np.ones((2, 3)), b_eq=np.ones(2))
        with pytest.raises(DegenerateInputError):
            full_dimensionalize(dom)

    def test_isometry(self):
        fd = full_dimensionalize(build_domain(4))
        rng = np.random.default_rng(0)
        y1, y2 = rng.normal(size=(2, fd.d))
        d_orig = np.linalg.norm(fd.to_original(y1) - fd.to_original(y2))
        assert d_orig == pytest.approx(np.linalg.norm(y1 - y2), rel=1e-12)


class TestVarsi:
    def test_segment_symmetry(self):
        assert varsi_fraction([0.0, 1.0], 0.5) == pytest.approx(0.5)

    def test_full_and_empty_cuts(self):
        R = np.array([0.3, -0.2, 1.1])
        assert varsi_fraction(R, 1.2) == 1.0
        assert varsi_fraction(R, -0.3) == 0.0

    def test_rejection_sampling_oracle(self):
        # 10^6-point uniform rejection estimate at the spec's example cut
        rng = np.random.default_rng(42)
        R = np.array([0.0, 1.0, 2.0])
        E = rng.exponential(size=(1_000_000, 3))
        X = E / E.sum(axis=1, keepdims=True)
        hits = (X @ R <= 1.0).mean()
        se = np.sqrt(hits * (1 - hits) / 1e6)
        assert abs(varsi_fraction(R, 1.0) - hits) <= 3 * se

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(3)
        for n in range(2, 9):
            R = rng.normal(size=n)
            cs = np.linspace(R.min(), R.max(), 50)
            fr = varsi_fraction_many(R, cs)
            assert np.all(np.diff(fr) >= -1e-12)

    def test_complement_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            R = rng.normal(size=n)
            c = float(rng.uniform(R.min(), R.max()))
            total = varsi_fraction(R, c) + varsi_fraction(-R, -c)
            assert total == pytest.approx(1.0, abs=1e-10)

    def test_degenerate_constant_returns(self):
        assert varsi_fraction([0.7, 0.7, 0.7], 0.8) == 1.0
        assert varsi_fraction([0.7, 0.7, 0.7], 0.6) == 0.0
        assert varsi_fraction([0.7, 0.7, 0.7], 0.7) == 1.0

    def test_vertex_on_hyperplane_exact(self):
        # offsets containing an exact zero are handled without perturbation
        assert varsi_fraction([0.0, 1.0, 2.0], 2.0) == 1.0
        assert varsi_fraction([0.0, 1.0], 0.0) == pytest.approx(0.0)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidParameterError):
            varsi_fraction([np.inf, 1.0], 0.5)
        with pytest.raises(InvalidParameterError):
            varsi_fraction([[0.0, 1.0]], 0.5)


class TestProjectSimplex:
    def test_projection_properties(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            v = rng.normal(size=int(rng.integers(2, 10))) * 3
            p = project_simplex(v)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(p >= 0)


class TestMinimizeQuadraticUtility:
    def test_symmetric_gmv(self):
        dom = build_domain(3)
        res = minimize_quadratic_utility(dom, np.eye(3), np.zeros(3), 0.0,
                                         tol=1e-10)
        assert np.allclose(res.portfolio, 1 / 3, atol=1e-6)
        assert res.value == pytest.approx(1 / 3, abs=1e-9)

    def test_return_term_dominates(self):
        dom = build_domain(3)
        res = minimize_quadratic_utility(dom, np.eye(3),
                                         np.array([1.0, 0.0, 0.0]), 200.0,
                                         tol=1e-10)
        assert np.allclose(res.portfolio, [1, 0, 0], atol=1e-4)

    def test_objective_monotone_and_gap_certified(self):
        rng = np.random.default_rng(6)
        dom = build_domain(5)
        A = rng.normal(size=(5, 5))
        Sigma = A @ A.T / 5
        mu = rng.normal(size=5)
        res = minimize_quadratic_utility(dom, Sigma, mu, 0.7, tol=1e-9)
        hist = np.array(res.history)
        assert np.all(np.diff(hist) <= 1e-12)
        assert res.gap <= 1e-9

    def test_lifted_domain_gmv(self):
        # min ||x||^2 with sum(x)=1 and slack L1 budget: the unconstrained
        # affine optimum (0.5, 0.5) is feasible
        dom = build_domain(2, gamma=2.0)
        res = minimize_quadratic_utility(dom, np.eye(2), np.zeros(2), 0.0,
                                         tol=1e-8)
        assert np.allclose(res.portfolio, [0.5, 0.5], atol=1e-4)
        assert res.value == pytest.approx(0.5, abs=1e-6)

    def test_lifted_domain_uses_shorting_when_profitable(self):
        dom = build_domain(2, gamma=1.6)
        mu = np.array([1.0, -1.0])
        res = minimize_quadratic_utility(dom, 1e-6 * np.eye(2), mu, 50.0,
                                         tol=1e-8)
        # near-linear objective pushes to the 130/30 vertex
        assert res.portfolio[0] == pytest.approx(1.3, abs=1e-3)
        assert res.portfolio[1] == pytest.approx(-0.3, abs=1e-3)

    def test_asymmetric_sigma_rejected(self):
        dom = build_domain(2)
        with pytest.raises(InvalidParameterError):
            minimize_quadratic_utility(dom, np.array([[1.0, 0.5], [0.0, 1.0]]),
                                       np.zeros(2), 0.0)

    def test_convergence_error_carries_best_iterate(self):
        dom = build_domain(3)
        rng = np.random.default_rng(7)
        A = rng.normal(size=(3, 3))
        with pytest.raises(ConvergenceError) as err:
            minimize_quadratic_utility(dom, A @ A.T, rng.normal(size=3), 1.0,
                                       tol=1e-16, max_iter=3)
        assert err.value.best_x is not None


class TestMinMaxVolatility:
    def test_identity_on_simplex(self):
        v_min, v_max, exact = min_max_volatility(build_domain(4), np.eye(4))
        assert v_min == pytest.approx(0.25, abs=1e-8)
        assert v_max == 1.0
        assert exact

    def test_grid_oracle(self):
        rng = np.random.default_rng(8)
        A = rng.normal(size=(3, 3))
        Sigma = A @ A.T / 3
        v_min, _, _ = min_max_volatility(build_domain(3), Sigma)
        # dense grid over the simplex at 1e-3 resolution
        step = 1e-3
        x1 = np.arange(0.0, 1.0 + step / 2, step)
        pts = []
        for a in x1:
            b = np.arange(0.0, 1.0 - a + step / 2, step)
            pts.append(np.column_stack([np.full(b.size, a), b, 1.0 - a - b]))
        X = np.vstack(pts)
        vols = np.einsum("ij,jk,ik->i", X, Sigma, X)
        grid_min = float(vols.min())
        assert grid_min >= v_min - 1e-12
        assert grid_min - v_min <= 1e-4

    def test_non_simplex_flagged_approximate(self):
        v_min, v_max, exact = min_max_volatility(build_domain(3, gamma=1.5),
                                                 np.eye(3))
        assert not exact
        assert v_max >= 1.0 - 1e-9  # vertices reach single assets and beyond
        assert v_min <= 1 / 3 + 1e-9
