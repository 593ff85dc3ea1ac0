"""Allocation strategies as truncated log-concave densities.

A strategy at risk q and dispersion alpha has density proportional to
exp(-alpha (x' Sigma x - q mu' x)); its mode is the formal allocation
proposal. Mixtures over a grid of risk and dispersion levels model the
composition of investors, with weights set directly, through behavioral
functions, or through a Boltzmann distribution over the weight region.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .domain import (CUSTOM, PortfolioDomain, min_max_volatility,
                     minimize_quadratic_utility)
from .errors import (DegenerateInputError, InvalidParameterError,
                     NonMonotoneFrontierError, RegionError)
from .sampler import (LogConcaveDensity, QuadraticExponent, SamplerConfig,
                      anneal_down, anneal_up, equidistant_alpha_sequence,
                      sample_logconcave)


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def grid_index(i: int, j: int, M2: int) -> int:
    """Flat index of risk level i, dispersion level j (0-based, risk-major).

    One place to change if a different layout is ever preferred; the
    stride must be the dispersion count for the map to be a bijection.
    """
    return i * M2 + j


@dataclass(frozen=True)
class Strategy:
    """One allocation strategy: risk q, dispersion alpha, cached proposal."""

    q: float
    alpha: float
    Sigma: np.ndarray
    mu: np.ndarray
    domain: PortfolioDomain
    proposal: np.ndarray          # mode, full variable vector
    proposal_volatility: float

    def __post_init__(self):
        for name in ("Sigma", "mu", "proposal"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.alpha <= 0:
            raise InvalidParameterError("dispersion alpha must be positive")
        if self.q < 0:
            raise InvalidParameterError("risk q must be nonnegative")

    def phi(self, x) -> float:
        """Expected quadratic utility x' Sigma x - q mu' x."""
        x = np.asarray(x, dtype=float)[: self.Sigma.shape[0]]
        return float(x @ self.Sigma @ x - self.q * self.mu @ x)

    @cached_property
    def exponent(self) -> QuadraticExponent:
        """Concave exponent -phi embedded in the domain's variable space."""
        dim = self.domain.dim
        n = self.Sigma.shape[0]
        Q = np.zeros((dim, dim))
        Q[:n, :n] = self.Sigma
        b = np.zeros(dim)
        b[:n] = self.q * self.mu
        return QuadraticExponent(Q=Q, b=b)

    def density(self) -> LogConcaveDensity:
        return LogConcaveDensity(domain=self.domain, h=self.exponent,
                                 alpha=self.alpha)


@dataclass(frozen=True)
class MixtureStrategy:
    """Convex combination of strategies on a risk x dispersion grid."""

    components: tuple
    weights: np.ndarray
    M1: int
    M2: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.components) != self.M1 * self.M2 or w.size != len(self.components):
            raise InvalidParameterError("component count must equal M1*M2")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must lie on the simplex")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def M(self) -> int:
        return self.M1 * self.M2

    def densities(self):
        return [s.density() for s in self.components]

    def reweighted(self, w) -> "MixtureStrategy":
        return MixtureStrategy(self.components, np.asarray(w, float),
                               self.M1, self.M2)

    def alpha_grid(self) -> np.ndarray:
        return np.array([[self.components[grid_index(i, j, self.M2)].alpha
                          for j in range(self.M2)] for i in range(self.M1)])

    def risk_levels(self) -> np.ndarray:
        return np.array([self.components[grid_index(i, 0, self.M2)].q
                         for i in range(self.M1)])

    def proposal_volatilities(self) -> np.ndarray:
        return np.array([self.components[grid_index(i, 0, self.M2)]
                         .proposal_volatility for i in range(self.M1)])

    def to_json(self) -> str:
        first = self.components[0]
        doc = {
            "M1": self.M1,
            "M2": self.M2,
            "q_list": self.risk_levels().tolist(),
            "alpha_grid": self.alpha_grid().tolist(),
            "weights": self.weights.tolist(),
            "Sigma": first.Sigma.tolist(),
            "mu": first.mu.tolist(),
            "proposals": [s.proposal.tolist() for s in self.components],
            "proposal_volatilities": [s.proposal_volatility
                                      for s in self.components],
            "domain": json.loads(first.domain.to_json()),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MixtureStrategy":
        doc = json.loads(text)
        domain = PortfolioDomain.from_json(json.dumps(doc["domain"]))
        Sigma = np.asarray(doc["Sigma"], float)
        mu = np.asarray(doc["mu"], float)
        comps = []
        M1, M2 = int(doc["M1"]), int(doc["M2"])
        for i in range(M1):
            for j in range(M2):
                k = grid_index(i, j, M2)
                comps.append(Strategy(
                    q=float(doc["q_list"][i]),
                    alpha=float(doc["alpha_grid"][i][j]),
                    Sigma=Sigma, mu=mu, domain=domain,
                    proposal=np.asarray(doc["proposals"][k], float),
                    proposal_volatility=float(doc["proposal_volatilities"][k]),
                ))
        return cls(components=tuple(comps),
                   weights=np.asarray(doc["weights"], float), M1=M1, M2=M2)


@dataclass(frozen=True)
class RiskLevel:
    q: float
    target_volatility: float
    volatility: float
    proposal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "proposal", _frozen(self.proposal))


def frontier_max_volatility(domain: PortfolioDomain, Sigma, mu) -> float:
    """Volatility of the maximum-expected-return portfolio.

    The efficient frontier's volatility approaches this value as the risk
    appetite grows, so bisection targets above it are unattainable.
    """
    cost = np.zeros(domain.dim)
    cost[: domain.n_assets] = -np.asarray(mu, float)
    res = linprog(cost, A_ub=domain.A, b_ub=domain.b, A_eq=domain.A_eq,
                  b_eq=domain.b_eq, bounds=[(None, None)] * domain.dim,
                  method="highs")
    if not res.success:
        raise RegionError(f"max-return LP failed: {res.message}")
    x = res.x[: domain.n_assets]
    return float(x @ np.asarray(Sigma, float) @ x)


def risk_sequence(domain: PortfolioDomain, Sigma, mu, M1: int,
                  tol: float = 1e-8, utility_tol: float = 1e-10):
    """Risk parameters q_1 < ... < q_M1 with equidistant proposal volatilities.

    Targets are placed equidistantly strictly inside the attainable
    volatility range (the minimum-variance value up to the smaller of the
    domain maximum and the frontier's own maximum); each q_i is found by
    bisection on the volatility of the utility minimiser, with the upper
    bracket located by doubling.
    """
    if M1 < 1:
        raise InvalidParameterError("M1 must be positive")
    Sigma = np.asarray(Sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)
    v_min, v_max, _ = min_max_volatility(domain, Sigma, tol=utility_tol)
    v_cap = frontier_max_volatility(domain, Sigma, mu)
    v_hi = min(v_max, v_cap)
    if v_hi <= v_min + 1e-15:
        raise NonMonotoneFrontierError(
            "frontier volatility range is empty; returns give no spread")
    targets = [v_min + (i + 1) * (v_hi - v_min) / (M1 + 1) for i in range(M1)]

    cache = {}

    def solve(q):
        if q not in cache:
            res = minimize_quadratic_utility(domain, Sigma, mu, q,
                                             tol=utility_tol)
            x = res.portfolio
            cache[q] = (float(x @ Sigma @ x), res.x)
        return cache[q]

    # doubling bracket for the largest target
    q_top = 1.0
    for _ in range(80):
        if solve(q_top)[0] > targets[-1]:
            break
        q_top *= 2.0
    else:
        raise NonMonotoneFrontierError(
            "doubling failed to bracket the top volatility target")

    levels = []
    q_lo_base = 0.0
    for v_t in targets:
        lo, hi = q_lo_base, q_top
        if solve(lo)[0] > v_t + tol:
            raise NonMonotoneFrontierError(
                "volatility at the lower bracket already exceeds the target")
        q_i = hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            v_mid = solve(mid)[0]
            if abs(v_mid - v_t) <= tol:
                q_i = mid
                break
            if v_mid < v_t:
                lo = mid
            else:
                hi = mid
            q_i = mid
        vol, full_x = solve(q_i)
        levels.append(RiskLevel(q=q_i, target_volatility=v_t,
                                volatility=vol, proposal=full_x))
        q_lo_base = q_i
    return levels


DEFAULT_NORM_THRESHOLD = math.e


def dispersion_sequence(domain: PortfolioDomain, Sigma, mu, q: float,
                        M2: int, config: SamplerConfig,
                        norm_threshold: float = DEFAULT_NORM_THRESHOLD,
                        delta: float = 0.1, epsilon: float = 0.05,
                        mode=None):
    """Dispersion scales alpha_1 < ... < alpha_M2 for one risk level.

    alpha_1 makes the strategy norm_threshold-dispersed (L2 norm vs the
    uniform); alpha_M2 concentrates the mass in a delta-ball around the
    proposal; intermediate scales are equidistant in consecutive L2 norm.
    """
    if M2 < 2:
        raise InvalidParameterError("M2 must be at least 2")
    n = domain.n_assets
    Sigma = np.asarray(Sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)
    dim = domain.dim
    Q = np.zeros((dim, dim))
    Q[:n, :n] = Sigma
    b = np.zeros(dim)
    b[:n] = q * mu
    h = QuadraticExponent(Q=Q, b=b)
    alpha_L = anneal_down(h, domain, norm_threshold, config)
    alpha_U = anneal_up(h, domain, delta, epsilon, config, mode=mode)
    if alpha_U <= alpha_L * (1.0 + 1e-12):
        return [alpha_L] * M2
    return equidistant_alpha_sequence(h, domain, alpha_L, alpha_U, M2, config)


def build_mixture(domain: PortfolioDomain, Sigma, mu, M1: int, M2: int,
                  config: SamplerConfig, weights=None,
                  norm_threshold: float = DEFAULT_NORM_THRESHOLD,
                  delta: float = 0.1, epsilon: float = 0.05,
                  tol: float = 1e-8) -> MixtureStrategy:
    """Assemble the full M1 x M2 strategy grid with its dispersion ladders."""
    Sigma = np.asarray(Sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)
    levels = risk_sequence(domain, Sigma, mu, M1, tol=tol)
    comps = []
    for lev in levels:
        alphas = dispersion_sequence(domain, Sigma, mu, lev.q, M2, config,
                                     norm_threshold=norm_threshold,
                                     delta=delta, epsilon=epsilon,
                                     mode=lev.proposal)
        for a in alphas:
            comps.append(Strategy(q=lev.q, alpha=a, Sigma=Sigma, mu=mu,
                                  domain=domain, proposal=lev.proposal,
                                  proposal_volatility=lev.volatility))
    if weights is None:
        weights = np.full(M1 * M2, 1.0 / (M1 * M2))
    return MixtureStrategy(components=tuple(comps), weights=weights,
                           M1=M1, M2=M2)


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


@dataclass(frozen=True)
class BehavioralFunction:
    """Positive function on [0, 1] expressing a bias over levels.

    kinds: "rising" favors high levels, "falling" low levels, "bump"
    favors levels near x0; "table" interpolates a user table. The
    max/min ratio over [0, 1] equals the ratio parameter exactly for the
    three parametric shapes.
    """

    kind: str
    x0: float = 0.5
    ratio: float = 10.0
    width: float = 0.15
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("rising", "falling", "bump", "table"):
            raise InvalidParameterError(f"unknown behavioral kind {self.kind!r}")
        if self.ratio < 1.0:
            raise InvalidParameterError("ratio must be at least 1")
        if self.kind == "table":
            if not self.table or len(self.table) != 2:
                raise InvalidParameterError("table kind needs (xs, ys)")
            xs, ys = self.table
            if np.any(np.asarray(ys, float) <= 0):
                raise InvalidParameterError("table values must be positive")
            object.__setattr__(self, "table",
                               (tuple(float(v) for v in xs),
                                tuple(float(v) for v in ys)))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        if self.kind == "table":
            out = np.interp(z, self.table[0], self.table[1])
        else:
            if self.kind == "bump":
                g = np.exp(-((z - self.x0) ** 2) / (2.0 * self.width ** 2))
                g_lo = min(math.exp(-((0.0 - self.x0) ** 2) / (2 * self.width ** 2)),
                           math.exp(-((1.0 - self.x0) ** 2) / (2 * self.width ** 2)))
                g_hi = 1.0 if 0.0 <= self.x0 <= 1.0 else max(
                    math.exp(-((0.0 - self.x0) ** 2) / (2 * self.width ** 2)),
                    math.exp(-((1.0 - self.x0) ** 2) / (2 * self.width ** 2)))
            else:
                g = _sigmoid((z - self.x0) / self.width)
                g0 = _sigmoid((0.0 - self.x0) / self.width)
                g1 = _sigmoid((1.0 - self.x0) / self.width)
                if self.kind == "falling":
                    g = 1.0 - g
                    g_lo, g_hi = 1.0 - g1, 1.0 - g0
                else:
                    g_lo, g_hi = g0, g1
            span = max(g_hi - g_lo, 1e-300)
            out = 1.0 + (self.ratio - 1.0) * (g - g_lo) / span
        return float(out[0]) if scalar else out


def bias_vector(volatilities, v_bounds, alpha_grid, f_q: BehavioralFunction,
                f_alpha) -> np.ndarray:
    """Unnormalised strategy bias r from behavioral functions.

    Entry (i, j) is f_q applied to the rescaled proposal volatility of
    risk level i times f_alpha_i applied to the rescaled dispersion scale
    alpha_ij; the rescale maps [v_lo, v_hi] and [alpha_i1, alpha_iM2]
    onto [0, 1].
    """
    volatilities = np.asarray(volatilities, dtype=float)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    M1, M2 = alpha_grid.shape
    if volatilities.size != M1:
        raise InvalidParameterError("one volatility per risk level required")
    if len(f_alpha) != M1:
        raise InvalidParameterError("one dispersion function per risk level")
    v_lo, v_hi = map(float, v_bounds)
    span_v = max(v_hi - v_lo, 1e-300)
    r = np.empty(M1 * M2)
    for i in range(M1):
        zv = (volatilities[i] - v_lo) / span_v
        a_lo, a_hi = alpha_grid[i, 0], alpha_grid[i, -1]
        span_a = max(a_hi - a_lo, 1e-300)
        for j in range(M2):
            za = (alpha_grid[i, j] - a_lo) / span_a
            r[grid_index(i, j, M2)] = f_q(zv) * f_alpha[i](za)
    return r


def behavioral_weights(volatilities, v_bounds, alpha_grid,
                       f_q: BehavioralFunction, f_alpha) -> np.ndarray:
    """Simplex weight vector from behavioral functions (normalised bias)."""
    r = bias_vector(volatilities, v_bounds, alpha_grid, f_q, f_alpha)
    total = r.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegenerateInputError("behavioral functions produced a zero total")
    w = r / total
    return w / w.sum()


@dataclass(frozen=True)
class WeightRegion:
    """Feasible investor compositions: the simplex cut by extra halfspaces."""

    M: int
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParameterError("need at least two strategies")
        if (self.A is None) != (self.b is None):
            raise InvalidParameterError("A and b must be given together")
        if self.A is not None:
            A = np.atleast_2d(np.asarray(self.A, float))
            b = np.asarray(self.b, float).ravel()
            if A.shape != (b.size, self.M):
                raise InvalidParameterError("constraint shapes disagree")
            object.__setattr__(self, "A", _frozen(A))
            object.__setattr__(self, "b", _frozen(b))
            res = linprog(np.zeros(self.M), A_ub=A, b_ub=b,
                          A_eq=np.ones((1, self.M)), b_eq=[1.0],
                          bounds=(0, None), method="highs")
            if not res.success:
                raise RegionError("weight region is empty")

    @property
    def is_simplex(self) -> bool:
        return self.A is None or self.A.shape[0] == 0

    @cached_property
    def domain(self) -> PortfolioDomain:
        A = -np.eye(self.M)
        b = np.zeros(self.M)
        if not self.is_simplex:
            A = np.vstack([A, self.A])
            b = np.concatenate([b, self.b])
        return PortfolioDomain(n_assets=self.M, kind=CUSTOM, gamma=None,
                               A=A, b=b, A_eq=np.ones((1, self.M)),
                               b_eq=np.ones(1))

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        ok = (w.size == self.M and abs(w.sum() - 1.0) <= tol
              and bool(np.all(w >= -tol)))
        if ok and not self.is_simplex:
            ok = bool(np.all(self.A @ w <= self.b + tol))
        return ok


def boltzmann_center(region: WeightRegion, r, T: float | None,
                     config: SamplerConfig, count: int = 4000):
    """Center of mass of exp(<r, w>/T) over the weight region.

    T=None (or infinity) gives the uniform center of mass: exact on the
    simplex, sampled otherwise. Returns (center, per-coordinate standard
    error) from 20-batch means.
    """
    r = np.asarray(r, dtype=float)
    if r.size != region.M:
        raise InvalidParameterError("bias vector size must match the region")
    if T is not None and T <= 0:
        raise InvalidParameterError("temperature must be positive")
    flat = T is None or not np.isfinite(T) or np.allclose(r, 0.0)
    if flat and region.is_simplex:
        center = np.full(region.M, 1.0 / region.M)
        return center, np.zeros(region.M)
    if flat:
        dens = LogConcaveDensity(domain=region.domain,
                                 h=QuadraticExponent.zero(region.M), alpha=0.0)
    else:
        dens = LogConcaveDensity(domain=region.domain,
                                 h=QuadraticExponent.linear(r), alpha=1.0 / T)
    pts = sample_logconcave(dens, config, count)
    center = pts.mean(axis=0)
    n_batches = 20
    usable = (len(pts) // n_batches) * n_batches
    batches = pts[:usable].reshape(n_batches, -1, pts.shape[1]).mean(axis=1)
    se = batches.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return center, se


def temperature_sequence(region: WeightRegion, r, config: SamplerConfig,
                         M: int = 4,
                         norm_threshold: float = DEFAULT_NORM_THRESHOLD,
                         delta: float = 0.1, epsilon: float = 0.05):
    """Decreasing temperatures whose Boltzmann densities ladder the L2 norm.

    T_max comes from the norm threshold against the uniform, T_min from
    mass concentration at the mode; the ladder between them reuses the
    dispersion machinery on the linear exponent <r, w>.
    """
    r = np.asarray(r, dtype=float)
    if r.size != region.M:
        raise InvalidParameterError("bias vector size must match the region")
    dom = region.domain
    h = QuadraticExponent.linear(r)
    if np.allclose(r, 0.0):
        alpha_L = anneal_down(h, dom, norm_threshold, config)
        return [1.0 / alpha_L]
    alpha_L = anneal_down(h, dom, norm_threshold, config)
    alpha_U = anneal_up(h, dom, delta, epsilon, config)
    if alpha_U <= alpha_L * (1.0 + 1e-12):
        return [1.0 / alpha_L]
    ladder = equidistant_alpha_sequence(h, dom, alpha_L, alpha_U, M, config)
    return [1.0 / a for a in ladder]
