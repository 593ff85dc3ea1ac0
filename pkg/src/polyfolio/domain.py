"""Portfolio feasible sets as convex polytopes.

The long-only set is the canonical simplex (weights nonnegative, summing
to one). The fully-invested set allows shorts up to an L1 budget gamma and
is lifted to 2n variables (x, y) with -y_i <= x_i <= y_i and sum(y) <= gamma
so that it is a plain halfspace polytope. Both are represented as
{ A v <= b, A_eq v = b_eq } and reduced to a full-dimensional system for
sampling through an isometric null-space map.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from . import _kernels
from .errors import (ConvergenceError, DegenerateInputError,
                     InvalidParameterError, NumericalError)

SIMPLEX = "simplex"
NORM_CONSTRAINED = "norm"
CUSTOM = "custom"


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PortfolioDomain:
    """Halfspace representation of a feasible portfolio set.

    Variables are the n asset weights for the simplex, or (x, y) in 2n
    variables for the norm-constrained set. Instances are immutable and
    safe to share across threads.
    """

    n_assets: int
    kind: str
    gamma: float | None
    A: np.ndarray
    b: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray

    def __post_init__(self):
        for name in ("A", "b", "A_eq", "b_eq"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def dim(self) -> int:
        """Number of ambient variables (n, or 2n when lifted)."""
        return self.A.shape[1]

    def contains(self, v, tol: float = 1e-9) -> bool:
        """Membership test for a full variable vector."""
        v = np.asarray(v, dtype=float)
        return bool(
            np.all(self.A @ v <= self.b + tol)
            and np.all(np.abs(self.A_eq @ v - self.b_eq) <= tol)
        )

    def contains_portfolio(self, x, tol: float = 1e-9) -> bool:
        """Membership test for an n-asset weight vector.

        For the lifted set this checks the projected condition
        sum(x) = 1 and ||x||_1 <= gamma (auxiliary variables exist iff
        the L1 budget is met).
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_assets,):
            return False
        if abs(x.sum() - 1.0) > tol:
            return False
        if self.kind == NORM_CONSTRAINED:
            return bool(np.abs(x).sum() <= self.gamma + tol)
        if self.kind == SIMPLEX:
            return bool(np.all(x >= -tol))
        return self.contains(x, tol)

    def lift_portfolio(self, x):
        """Embed an n-asset weight vector into the domain's variable space."""
        x = np.asarray(x, dtype=float)
        if self.kind == NORM_CONSTRAINED:
            return np.concatenate([x, np.abs(x)])
        return x

    def with_halfspace(self, normal, offset: float) -> "PortfolioDomain":
        """Intersect with {normal . x <= offset} on the portfolio coordinates."""
        normal = np.asarray(normal, dtype=float)
        if normal.shape != (self.n_assets,):
            raise InvalidParameterError("halfspace normal must have one entry per asset")
        row = np.zeros(self.dim)
        row[: self.n_assets] = normal
        return PortfolioDomain(
            n_assets=self.n_assets,
            kind=CUSTOM,
            gamma=self.gamma,
            A=np.vstack([self.A, row]),
            b=np.append(self.b, float(offset)),
            A_eq=self.A_eq,
            b_eq=self.b_eq,
        )

    @cached_property
    def full_dim(self) -> "FullDimDomain":
        return full_dimensionalize(self)

    def to_json(self) -> str:
        doc = {
            "n": self.n_assets,
            "kind": self.kind,
            "gamma": self.gamma,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "A_eq": self.A_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "PortfolioDomain":
        doc = json.loads(text)
        return cls(
            n_assets=int(doc["n"]),
            kind=doc["kind"],
            gamma=doc["gamma"],
            A=np.asarray(doc["A"], dtype=float),
            b=np.asarray(doc["b"], dtype=float),
            A_eq=np.asarray(doc["A_eq"], dtype=float),
            b_eq=np.asarray(doc["b_eq"], dtype=float),
        )


@dataclass(frozen=True)
class HalfspaceSection:
    """A domain cut by a portfolio-return threshold {R . x <= R_star}."""

    base: PortfolioDomain
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(self.normal))

    def as_domain(self) -> PortfolioDomain:
        return self.base.with_halfspace(self.normal, self.offset)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            self.base.contains_portfolio(x, tol)
            and self.normal @ x <= self.offset + tol
        )


@dataclass(frozen=True)
class FullDimDomain:
    """Full-dimensional reduction { B y <= z } of a constrained domain.

    The map f(y) = N y + x_star is an isometry onto the original affine
    subspace (columns of N are orthonormal).
    """

    d: int
    B: np.ndarray
    z: np.ndarray
    N: np.ndarray
    x_star: np.ndarray

    def __post_init__(self):
        for name in ("B", "z", "N", "x_star"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def to_original(self, y):
        """Map full-dimensional points back to ambient coordinates."""
        y = np.asarray(y, dtype=float)
        return y @ self.N.T + self.x_star

    def from_original(self, v):
        v = np.asarray(v, dtype=float)
        return (v - self.x_star) @ self.N

    def contains(self, y, tol: float = 1e-9) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.B @ y <= self.z + tol))

    @cached_property
    def chebyshev(self):
        """(center, radius) of the largest inscribed ball."""
        norms = np.linalg.norm(self.B, axis=1)
        c = np.zeros(self.d + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.B, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=self.z,
                      bounds=[(None, None)] * self.d + [(0, None)],
                      method="highs")
        if not res.success:
            raise NumericalError(f"inscribed-ball LP failed: {res.message}")
        return res.x[:-1], float(res.x[-1])


def build_domain(n_assets: int, gamma: float | None = None) -> PortfolioDomain:
    """Construct the long-only simplex or the norm-constrained polytope.

    gamma is the L1 budget of the fully-invested set (1.6 gives 130/30,
    2 gives 150/50); omitted or equal to 1 yields the simplex.
    """
    if n_assets < 2:
        raise InvalidParameterError("need at least two assets")
    if gamma is not None and gamma < 1.0:
        raise InvalidParameterError("gamma must be at least 1")
    n = int(n_assets)
    if gamma is None or gamma == 1.0:
        return PortfolioDomain(
            n_assets=n,
            kind=SIMPLEX,
            gamma=None,
            A=-np.eye(n),
            b=np.zeros(n),
            A_eq=np.ones((1, n)),
            b_eq=np.ones(1),
        )
    eye = np.eye(n)
    A = np.vstack([
        np.hstack([eye, -eye]),      # x_i - y_i <= 0
        np.hstack([-eye, -eye]),     # -x_i - y_i <= 0
        np.concatenate([np.zeros(n), np.ones(n)])[None, :],  # sum y <= gamma
    ])
    b = np.concatenate([np.zeros(2 * n), [float(gamma)]])
    A_eq = np.concatenate([np.ones(n), np.zeros(n)])[None, :]
    return PortfolioDomain(
        n_assets=n, kind=NORM_CONSTRAINED, gamma=float(gamma),
        A=A, b=b, A_eq=A_eq, b_eq=np.ones(1),
    )


def full_dimensionalize(domain: PortfolioDomain) -> FullDimDomain:
    """Reduce a constrained domain to a full-dimensional halfspace system.

    N spans the right null space of the equality matrix (orthonormal, so
    f(y) = N y + x_star preserves distances); B = A N and
    z = b - A x_star.
    """
    A_eq = np.atleast_2d(np.asarray(domain.A_eq, dtype=float))
    b_eq = np.asarray(domain.b_eq, dtype=float).ravel()
    if np.linalg.matrix_rank(A_eq) < A_eq.shape[0]:
        raise DegenerateInputError("equality constraints are rank deficient")
    N = scipy.linalg.null_space(A_eq)
    if N.shape[1] == 0:
        raise DegenerateInputError("equality constraints pin a single point")
    x_star, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
    if np.linalg.norm(A_eq @ x_star - b_eq) > 1e-9 * max(1.0, np.linalg.norm(b_eq)):
        raise DegenerateInputError("equality constraints are inconsistent")
    B = domain.A @ N
    z = domain.b - domain.A @ x_star
    # rows orthogonal to the affine hull are vacuous or infeasible
    norms = np.linalg.norm(B, axis=1)
    vacuous = norms <= 1e-13
    if np.any(vacuous & (z < -1e-10)):
        raise DegenerateInputError("constraints are infeasible on the affine hull")
    keep = ~vacuous
    return FullDimDomain(d=N.shape[1], B=B[keep], z=z[keep], N=N, x_star=x_star)


def varsi_fraction(R, c: float) -> float:
    """Exact fraction of the simplex with portfolio return R . x <= c.

    Runs on the vertex offsets c - R_i in at most n^2 arithmetic steps.
    Simplex-only: the cut fraction of the lifted set is not computed here.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 1 or R.size < 1:
        raise InvalidParameterError("returns vector must be one-dimensional")
    if not np.all(np.isfinite(R)) or not np.isfinite(c):
        raise InvalidParameterError("returns and threshold must be finite")
    return _kernels.varsi_fraction(R, c)


def varsi_fraction_many(R, cs) -> np.ndarray:
    """Vectorised varsi_fraction over an array of thresholds."""
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise InvalidParameterError("returns must be finite")
    return _kernels.varsi_many(R, np.asarray(cs, dtype=float))


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray           # full variable vector
    portfolio: np.ndarray   # asset weights (first n coordinates)
    value: float
    gap: float
    iterations: int
    history: tuple = field(repr=False, default=())


def _check_sigma(Sigma, n):
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (n, n):
        raise InvalidParameterError("covariance has the wrong shape")
    scale = max(1.0, float(np.abs(Sigma).max()))
    if np.abs(Sigma - Sigma.T).max() > 1e-10 * scale:
        raise InvalidParameterError("covariance must be symmetric")
    return 0.5 * (Sigma + Sigma.T)


def project_simplex(v):
    """Euclidean projection onto the canonical simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    rho = ks[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def minimize_quadratic_utility(domain: PortfolioDomain, Sigma, mu, q: float,
                               tol: float = 1e-9, max_iter: int = 200_000):
    """Minimise the expected quadratic utility x' Sigma x - q mu' x.

    On the simplex this runs monotone projected gradient descent with a
    Frank-Wolfe certificate (the linear minimisation gap bounds the
    suboptimality); on lifted domains it runs away-step Frank-Wolfe with
    LP oracles. Stops when the certified gap is at most tol.
    """
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    if q < 0:
        raise InvalidParameterError("risk parameter q must be nonnegative")
    n = domain.n_assets
    Sigma = _check_sigma(Sigma, n)
    mu = np.asarray(mu, dtype=float)
    eigs = np.linalg.eigvalsh(Sigma)
    if eigs[0] < -1e-8 * max(1.0, eigs[-1]):
        raise InvalidParameterError("covariance must be positive semidefinite")

    def phi(x):
        return float(x @ Sigma @ x - q * mu @ x)

    def grad(x):
        return 2.0 * Sigma @ x - q * mu

    if domain.kind == SIMPLEX:
        return _pg_simplex(domain, phi, grad, eigs[-1], tol, max_iter)
    return _away_frank_wolfe(domain, phi, grad, tol, max_iter)


def _pg_simplex(domain, phi, grad, lam_max, tol, max_iter):
    n = domain.n_assets
    x = np.full(n, 1.0 / n)
    L = max(2.0 * lam_max, 1e-12)
    base_step = 1.0 / L
    f = phi(x)
    history = [f]
    for it in range(1, max_iter + 1):
        g = grad(x)
        gap = float(g @ x - g.min())   # linear-minimisation gap over the simplex
        if gap <= tol:
            return MinimizeResult(x, x, f, gap, it - 1, tuple(history))
        step = base_step
        x_new = project_simplex(x - step * g)
        f_new = phi(x_new)
        while f_new > f + 1e-15 and step > 1e-18:
            step *= 0.5
            x_new = project_simplex(x - step * g)
            f_new = phi(x_new)
        x, f = x_new, f_new
        history.append(f)
    g = grad(x)
    gap = float(g @ x - g.min())
    if gap <= tol:
        return MinimizeResult(x, x, f, gap, max_iter, tuple(history))
    raise ConvergenceError(
        f"projected gradient stalled with gap {gap:.3e} > tol {tol:.3e}",
        best_x=x, best_value=f)


def _lp_vertex(domain, cost):
    res = linprog(cost, A_ub=domain.A, b_ub=domain.b, A_eq=domain.A_eq,
                  b_eq=domain.b_eq, bounds=[(None, None)] * domain.dim,
                  method="highs")
    if not res.success:
        raise NumericalError(f"LP oracle failed: {res.message}")
    return res.x


def _away_frank_wolfe(domain, phi, grad, tol, max_iter):
    n = domain.n_assets
    dim = domain.dim

    def full_phi(v):
        return phi(v[:n])

    def full_grad(v):
        g = np.zeros(dim)
        g[:n] = grad(v[:n])
        return g

    v0 = _lp_vertex(domain, np.zeros(dim))
    vertices = [v0]
    weights = [1.0]
    x = v0.copy()
    f = full_phi(x)
    history = [f]
    for it in range(1, max_iter + 1):
        g = full_grad(x)
        s = _lp_vertex(domain, g)
        gap = float(g @ (x - s))
        if gap <= tol:
            return MinimizeResult(x, x[:n], f, gap, it - 1, tuple(history))
        a_idx = int(np.argmax([g @ v for v in vertices]))
        v_away = vertices[a_idx]
        if g @ (x - s) >= g @ (v_away - x):
            d = s - x
            gamma_max = 1.0
            toward = True
        else:
            d = x - v_away
            w = weights[a_idx]
            gamma_max = w / (1.0 - w) if w < 1.0 else 1e12
            toward = False
        # exact line search for the quadratic objective
        denom = full_phi(x + d) - f - g @ d
        gamma = gamma_max if denom <= 0 else min(gamma_max, float(-0.5 * (g @ d) / denom))
        if gamma <= 0:
            gamma = 0.0
        x = x + gamma * d
        if toward:
            weights = [w * (1 - gamma) for w in weights]
            for k, v in enumerate(vertices):
                if np.allclose(v, s, atol=1e-12):
                    weights[k] += gamma
                    break
            else:
                vertices.append(s)
                weights.append(gamma)
        else:
            weights = [w * (1 + gamma) for w in weights]
            weights[a_idx] -= gamma
            if weights[a_idx] <= 1e-14:
                vertices.pop(a_idx)
                weights.pop(a_idx)
        f_new = full_phi(x)
        if f_new > f + 1e-12:
            f_new = f  # line search guarantees descent; guard fp noise
        f = f_new
        history.append(f)
    g = full_grad(x)
    s = _lp_vertex(domain, g)
    gap = float(g @ (x - s))
    if gap <= tol:
        return MinimizeResult(x, x[:n], f, gap, max_iter, tuple(history))
    raise ConvergenceError(
        f"Frank-Wolfe stalled with gap {gap:.3e} > tol {tol:.3e}",
        best_x=x, best_value=f)


def min_max_volatility(domain: PortfolioDomain, Sigma, tol: float = 1e-10,
                       probes: int = 64):
    """Minimum and maximum portfolio volatility x' Sigma x over the domain.

    The minimum is a convex programme. The maximum is exact on the simplex
    (attained at a vertex, i.e. the largest diagonal entry); on other
    domains it is a best-of-probed-vertices lower bound and the returned
    flag is False.
    """
    n = domain.n_assets
    Sigma = _check_sigma(Sigma, n)
    res = minimize_quadratic_utility(domain, Sigma, np.zeros(n), 0.0,
                                     tol=max(tol, 1e-12))
    v_min = res.value
    if domain.kind == SIMPLEX:
        return v_min, float(np.diag(Sigma).max()), True
    rng = np.random.default_rng(0)
    best = v_min
    for _ in range(probes):
        cost = np.zeros(domain.dim)
        cost[:n] = rng.normal(size=n)
        v = _lp_vertex(domain, cost)
        x = v[:n]
        best = max(best, float(x @ Sigma @ x))
    return v_min, best, False
