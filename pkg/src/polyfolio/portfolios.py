"""Reference portfolio constructors used by the experiments and the CLI."""
from __future__ import annotations

import numpy as np

from .domain import PortfolioDomain, minimize_quadratic_utility
from .errors import ConvergenceError, InvalidParameterError


def equal_weight(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def single_asset(n: int, index: int) -> np.ndarray:
    x = np.zeros(n)
    x[index] = 1.0
    return x


def gmv_portfolio(domain: PortfolioDomain, Sigma, tol: float = 1e-10) -> np.ndarray:
    """Global minimum variance portfolio (risk-only utility)."""
    n = domain.n_assets
    res = minimize_quadratic_utility(domain, Sigma, np.zeros(n), 0.0, tol=tol)
    return res.portfolio


def average_uniform_volatility(Sigma) -> float:
    """Mean of x' Sigma x for x uniform on the simplex (closed form).

    Under the flat Dirichlet, E[x_i^2] = 2 / (n (n+1)) and
    E[x_i x_j] = 1 / (n (n+1)), so the mean is (trace + total sum)
    over n (n+1).
    """
    Sigma = np.asarray(Sigma, dtype=float)
    n = Sigma.shape[0]
    return float((np.trace(Sigma) + Sigma.sum()) / (n * (n + 1)))


def mv_portfolio_at_volatility(domain: PortfolioDomain, Sigma, mu,
                               target: float, tol: float = 1e-10,
                               vol_tol: float = 1e-9):
    """Mean-variance optimal portfolio whose volatility matches a target.

    Bisection over the risk parameter; the upper bracket is found by
    doubling. Returns (portfolio, q).
    """
    Sigma = np.asarray(Sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)

    def vol_at(q):
        res = minimize_quadratic_utility(domain, Sigma, mu, q, tol=tol)
        x = res.portfolio
        return float(x @ Sigma @ x), x

    v0, x0 = vol_at(0.0)
    if target <= v0 + vol_tol:
        return x0, 0.0
    q_hi = 1.0
    for _ in range(80):
        v_hi, _ = vol_at(q_hi)
        if v_hi > target:
            break
        q_hi *= 2.0
    else:
        raise ConvergenceError("volatility target exceeds the frontier range")
    q_lo = 0.0
    for _ in range(200):
        q_mid = 0.5 * (q_lo + q_hi)
        v_mid, x_mid = vol_at(q_mid)
        if abs(v_mid - target) <= vol_tol:
            return x_mid, q_mid
        if v_mid < target:
            q_lo = q_mid
        else:
            q_hi = q_mid
    return x_mid, q_mid


def mv_portfolio_average_vol(domain: PortfolioDomain, Sigma, mu,
                             tol: float = 1e-10):
    """Mean-variance portfolio at the average in-sample volatility of the
    long-only portfolios."""
    if domain.kind != "simplex":
        raise InvalidParameterError(
            "average uniform volatility is defined on the simplex")
    target = average_uniform_volatility(Sigma)
    return mv_portfolio_at_volatility(domain, Sigma, mu, target, tol=tol)


def erc_portfolio(Sigma, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Equal risk contributions portfolio.

    Cyclical coordinate descent on the log-barrier formulation: at the
    fixed point every x_i (Sigma x)_i is equal; the iterate is then
    normalised to the simplex.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    n = Sigma.shape[0]
    diag = np.diag(Sigma)
    if np.any(diag <= 0):
        raise InvalidParameterError("covariance needs positive variances")
    y = 1.0 / np.sqrt(diag)
    y = y / y.sum()
    lam = 1.0 / n
    for _ in range(max_iter):
        max_move = 0.0
        for i in range(n):
            c_i = Sigma[i] @ y - diag[i] * y[i]
            new = (-c_i + np.sqrt(c_i * c_i + 4.0 * diag[i] * lam)) / (2.0 * diag[i])
            max_move = max(max_move, abs(new - y[i]))
            y[i] = new
        if max_move < tol:
            break
    x = y / y.sum()
    return x


def risk_contributions(x, Sigma) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    return x * (Sigma @ x)
