"""Portfolio scores against strategy mixtures by MCMC integration.

The score of a portfolio with return threshold R* against a mixture is
the mixture mass of the section S = P intersect {R.x <= R*}: a weighted
sum of per-component probabilities c_k. Each c_k is the ratio of two
integrals of exp(alpha_k h_k) (over S and over P), each computed by a
telescoping ladder of Monte Carlo ratio estimates between annealed
exponents, with the uniform base case vol(S)/vol(P) supplied exactly by
the simplex-cut recurrence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .copula import Copula, copula_from_samples
from .domain import PortfolioDomain, varsi_fraction
from .errors import InvalidParameterError, RegionError
from .market import ReturnsPanel
from .sampler import (LogConcaveDensity, SamplerConfig, sample_logconcave,
                      sample_mixture)
from .strategy import MixtureStrategy, WeightRegion, boltzmann_center


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ComponentIntegrals:
    """Per-component section probabilities c_k with standard errors."""

    c: np.ndarray
    stderr: np.ndarray
    R: np.ndarray
    R_star: float
    empty_section: bool
    samples_used: int

    def __post_init__(self):
        for name in ("c", "stderr", "R"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def M(self) -> int:
        return self.c.size


class ScoreValue(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class IntegralsConfig:
    """Tuning for the telescoping integral estimates."""

    samples_per_ratio_base: float = 10.0
    min_samples_per_ratio: int = 48
    pilot_samples: int = 256
    variance_ratio_cap: float = 2.0
    max_restarts: int = 3
    batches: int = 16


def _log_mean_exp_se(logw):
    """log of the mean of exp(logw), with the relative se of that mean."""
    m = float(np.max(logw))
    w = np.exp(logw - m)
    mean = float(w.mean())
    k = w.size
    rel_sd = float(w.std(ddof=1) / mean) if k > 1 else 0.0
    return m + math.log(mean), rel_sd / math.sqrt(k), rel_sd


def _ladder_exponents(alpha, h_range, d, g):
    """Exponent ladder 0 < e_1 < ... < alpha with geometric spacing g."""
    if alpha <= 0:
        return []
    e1 = alpha if h_range <= 1e-300 else min(alpha, 1.0 / h_range)
    es = [alpha]
    while es[-1] * g > e1:
        es.append(es[-1] * g)
    return list(reversed(es))


def _region_log_integral(dens_domain, h, alpha, config, icfg, rng, pilot_h):
    """log of mean_{REG} exp(alpha h) (relative to the region volume).

    Telescoping product of ratio estimates between consecutive ladder
    exponents, each averaged over samples of the flatter density; the
    schedule densifies and restarts if a stage's weight variance blows up.
    """
    d = dens_domain.full_dim.d
    h_range = float(pilot_h.max() - pilot_h.min())
    n_per = max(icfg.min_samples_per_ratio,
                int(math.ceil(icfg.samples_per_ratio_base * math.sqrt(d)
                              * (1.0 + math.log(d + 1)))))
    g0 = 1.0 - 1.0 / math.sqrt(d) if d > 1 else 0.5
    g = g0
    for attempt in range(icfg.max_restarts + 1):
        es = _ladder_exponents(alpha, h_range, d, g)
        log_total = 0.0
        var_log = 0.0
        used = 0
        start = None
        blew_up = False
        prev_e = 0.0
        for e in es:
            dens = LogConcaveDensity(domain=dens_domain, h=h, alpha=prev_e)
            pts = sample_logconcave(dens, config, n_per, start=start, rng=rng)
            used += n_per
            start = pts[-1]
            hv = np.atleast_1d(h(pts)) if callable(h) else h.h_values(pts)
            logw = (e - prev_e) * hv
            log_ratio, se_rel, rel_sd = _log_mean_exp_se(logw)
            if rel_sd > icfg.variance_ratio_cap and attempt < icfg.max_restarts:
                blew_up = True
                break
            log_total += log_ratio
            var_log += se_rel ** 2
            prev_e = e
        if not blew_up:
            return log_total, var_log, used
        g = math.sqrt(g)
    return log_total, var_log, used


def component_integrals(mixture: MixtureStrategy, R, R_star: float,
                        eps: float = 0.05, seed=0,
                        config: SamplerConfig | None = None,
                        icfg: IntegralsConfig | None = None) -> ComponentIntegrals:
    """Estimate c_k = integral_S pi_k / integral_P pi_k for every component.

    S is the simplex cut by {R.x <= R*}; its volume fraction is exact.
    Each integral runs the annealed ratio ladder with O(sqrt(d)) samples
    per ratio (scaled by the requested accuracy).
    """
    if not 0.0 < eps < 0.5:
        raise InvalidParameterError("eps must lie in (0, 0.5)")
    R = np.asarray(R, dtype=float)
    domain = mixture.components[0].domain
    if domain.kind != "simplex":
        raise InvalidParameterError(
            "component integrals require the simplex domain, where the "
            "section volume fraction is exact")
    base_cfg = config or SamplerConfig()
    icfg = icfg or IntegralsConfig()
    scale = (0.05 / eps) ** 2
    icfg = IntegralsConfig(
        samples_per_ratio_base=icfg.samples_per_ratio_base * scale,
        min_samples_per_ratio=icfg.min_samples_per_ratio,
        pilot_samples=icfg.pilot_samples,
        variance_ratio_cap=icfg.variance_ratio_cap,
        max_restarts=icfg.max_restarts,
        batches=icfg.batches,
    )
    M = mixture.M
    frac = varsi_fraction(R, R_star)
    if frac <= 0.0:
        return ComponentIntegrals(c=np.zeros(M), stderr=np.zeros(M), R=R,
                                  R_star=float(R_star), empty_section=True,
                                  samples_used=0)
    if frac >= 1.0:
        return ComponentIntegrals(c=np.ones(M), stderr=np.zeros(M), R=R,
                                  R_star=float(R_star), empty_section=False,
                                  samples_used=0)
    section = domain.with_halfspace(R, R_star)
    rng_master = np.random.SeedSequence(
        base_cfg.seed if seed is None else seed)
    streams = rng_master.spawn(2 * M + 2)
    # shared uniform pilots fix the exponent ranges per region
    rng_p = np.random.default_rng(streams[-1])
    flat_P = LogConcaveDensity(domain=domain,
                               h=mixture.components[0].exponent, alpha=0.0)
    pilots_P = sample_logconcave(flat_P, base_cfg, icfg.pilot_samples,
                                 rng=rng_p)
    rng_s = np.random.default_rng(streams[-2])
    flat_S = LogConcaveDensity(domain=section,
                               h=mixture.components[0].exponent, alpha=0.0)
    pilots_S = sample_logconcave(flat_S, base_cfg, icfg.pilot_samples,
                                 rng=rng_s)
    c = np.empty(M)
    stderr = np.empty(M)
    used_total = 2 * icfg.pilot_samples
    log_frac = math.log(frac)
    for k, comp in enumerate(mixture.components):
        h = comp.exponent
        ph_S = np.atleast_1d(h(pilots_S))
        ph_P = np.atleast_1d(h(pilots_P))
        rng_S = np.random.default_rng(streams[2 * k])
        rng_P = np.random.default_rng(streams[2 * k + 1])
        ls, vs, us = _region_log_integral(section, h, comp.alpha, base_cfg,
                                          icfg, rng_S, ph_S)
        lp, vp, up = _region_log_integral(domain, h, comp.alpha, base_cfg,
                                          icfg, rng_P, ph_P)
        log_c = log_frac + ls - lp
        ck = math.exp(min(log_c, 50.0))
        c[k] = ck
        stderr[k] = ck * math.sqrt(vs + vp)
        used_total += us + up
    return ComponentIntegrals(c=c, stderr=stderr, R=R, R_star=float(R_star),
                              empty_section=False, samples_used=used_total)


def score(integrals: ComponentIntegrals, w) -> ScoreValue:
    """Mixture score <c, w> with its propagated standard error."""
    w = np.asarray(w, dtype=float)
    if w.shape != integrals.c.shape:
        raise InvalidParameterError("weight vector size mismatch")
    value = float(integrals.c @ w)
    se = float(np.sqrt(((w * integrals.stderr) ** 2).sum()))
    return ScoreValue(value, se)


@dataclass(frozen=True)
class MinMaxMean:
    s_min: float
    w_min: np.ndarray
    s_max: float
    w_max: np.ndarray
    s_mean: float
    se_mean: float

    def __post_init__(self):
        object.__setattr__(self, "w_min", _frozen(self.w_min))
        object.__setattr__(self, "w_max", _frozen(self.w_max))


def min_max_mean_scores(integrals: ComponentIntegrals, region: WeightRegion,
                        config: SamplerConfig | None = None,
                        center_samples: int = 4000) -> MinMaxMean:
    """Extreme scores over the weight region (two LPs) and the mean score
    at the region's center of mass (exact 1/M on the simplex)."""
    c = integrals.c
    if region.M != c.size:
        raise InvalidParameterError("region dimension mismatch")
    A_ub = region.A if not region.is_simplex else None
    b_ub = region.b if not region.is_simplex else None
    sols = []
    for sign in (1.0, -1.0):
        res = linprog(sign * c, A_ub=A_ub, b_ub=b_ub,
                      A_eq=np.ones((1, region.M)), b_eq=[1.0],
                      bounds=(0, None), method="highs")
        if not res.success:
            raise RegionError(f"score LP failed: {res.message}")
        sols.append(res.x)
    w_min, w_max = sols
    center, se_w = boltzmann_center(region, np.zeros(region.M), None,
                                    config or SamplerConfig(),
                                    count=center_samples)
    s_mean = float(c @ center)
    se_mean = float(np.sqrt(((center * integrals.stderr) ** 2).sum()
                            + ((c * se_w) ** 2).sum()))
    return MinMaxMean(s_min=float(c @ w_min), w_min=w_min,
                      s_max=float(c @ w_max), w_max=w_max,
                      s_mean=s_mean, se_mean=se_mean)


class ParametricPoint(NamedTuple):
    T: float
    score: float
    stderr: float


def parametric_score(integrals: ComponentIntegrals, region: WeightRegion,
                     r, temperatures, config: SamplerConfig | None = None,
                     center_samples: int = 4000):
    """Score at the Boltzmann center of mass for each temperature."""
    cfg = config or SamplerConfig()
    out = []
    for T in temperatures:
        center, se_w = boltzmann_center(region, r, T, cfg,
                                        count=center_samples)
        s = float(integrals.c @ center)
        se = float(np.sqrt(((center * integrals.stderr) ** 2).sum()
                           + ((integrals.c * se_w) ** 2).sum()))
        out.append(ParametricPoint(T=float(T), score=s, stderr=se))
    return out


@dataclass(frozen=True)
class ScoreDensity:
    """Boundary-corrected kernel density of scores on [0, 1]."""

    grid: np.ndarray
    density: np.ndarray
    scores: np.ndarray
    bandwidth: float

    def __post_init__(self):
        for name in ("grid", "density", "scores"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def modes(self):
        """Interior local maxima of the density as (position, height)."""
        d = self.density
        idx = [i for i in range(1, d.size - 1)
               if d[i] >= d[i - 1] and d[i] > d[i + 1]]
        return [(float(self.grid[i]), float(d[i])) for i in idx]


def score_distribution(portfolio, mu, Sigma, mixture: MixtureStrategy,
                       draws: int = 10_000, seed=0,
                       config: SamplerConfig | None = None, weights=None,
                       samples_per_component: int = 2000,
                       grid_size: int = 512) -> ScoreDensity:
    """Distribution of the portfolio's score under Gaussian asset returns.

    Per draw, the realised return vector sets the threshold R* = R . x
    and each component probability is the fraction of cached component
    samples falling in the halfspace, so the full distribution costs one
    batch of component samples rather than one MCMC run per draw.
    """
    portfolio = np.asarray(portfolio, dtype=float)
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    cfg = config or SamplerConfig()
    w = np.asarray(mixture.weights if weights is None else weights, float)
    seeds = np.random.SeedSequence(seed).spawn(mixture.M + 1)
    comp_samples = []
    for k, comp in enumerate(mixture.components):
        pts = sample_logconcave(comp.density(), cfg, samples_per_component,
                                rng=np.random.default_rng(seeds[k]))
        comp_samples.append(pts[:, : mu.size])
    rng = np.random.default_rng(seeds[-1])
    rets = rng.multivariate_normal(mu, Sigma, size=draws, method="svd")
    thresholds = rets @ portfolio
    scores = np.zeros(draws)
    chunk = max(1, min(draws, 2_000_000 // samples_per_component))
    for lo in range(0, draws, chunk):
        hi = min(lo + chunk, draws)
        block = np.zeros(hi - lo)
        for k, pts in enumerate(comp_samples):
            proj = pts @ rets[lo:hi].T
            block += w[k] * (proj <= thresholds[lo:hi][None, :]).mean(axis=0)
        scores[lo:hi] = block
    grid = np.linspace(0.0, 1.0, grid_size)
    sd = float(scores.std(ddof=1)) if draws > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(scores, [75, 25])))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    bw = 1.06 * spread * draws ** (-0.2) if spread > 0 else 0.01
    bw = max(bw, 1e-3)
    dens = np.zeros(grid_size)
    for reflect in (lambda s: s, lambda s: -s, lambda s: 2.0 - s):
        pts = reflect(scores)
        dens += np.exp(-0.5 * ((grid[:, None] - pts[None, :]) / bw) ** 2).sum(axis=1)
    dens /= draws * bw * math.sqrt(2.0 * math.pi)
    area = np.trapezoid(dens, grid)
    if area > 0:
        dens = dens / area
    return ScoreDensity(grid=grid, density=dens, scores=scores, bandwidth=bw)


def classic_measures(portfolio, panel: ReturnsPanel, benchmark=None,
                     gmv=None, eval_returns=None) -> dict:
    """Sharpe, Sortino, Jensen's alpha and the cross-sectional score.

    The benchmark defaults to the equally weighted portfolio and the
    risk-free reference to the given GMV portfolio's return series.
    The cross-sectional score is the exact fraction of all long-only
    allocations the portfolio outperforms at the evaluation returns
    (default: the panel's mean return vector).
    """
    x = np.asarray(portfolio, dtype=float)
    n = panel.n_assets
    bench = np.full(n, 1.0 / n) if benchmark is None else np.asarray(benchmark, float)
    rf_port = bench if gmv is None else np.asarray(gmv, float)
    p = panel.returns @ x
    bmk = panel.returns @ bench
    rf = panel.returns @ rf_port
    excess_b = p - bmk
    sd_b = float(excess_b.std(ddof=1))
    sharpe = 0.0 if np.allclose(excess_b, 0.0) else float(excess_b.mean()) / sd_b
    excess_rf = p - rf
    downside = float(np.sqrt(np.mean(np.minimum(excess_rf, 0.0) ** 2)))
    sortino = float("nan") if downside == 0.0 else float(excess_rf.mean()) / downside
    mkt = bmk - rf
    var_mkt = float(mkt.var(ddof=0))
    beta = 0.0 if var_mkt == 0.0 else float(np.cov(excess_rf, mkt, ddof=0)[0, 1]) / var_mkt
    jensen = float(excess_rf.mean()) - beta * float(mkt.mean())
    R_eval = (panel.returns.mean(axis=0) if eval_returns is None
              else np.asarray(eval_returns, float))
    cross = varsi_fraction(R_eval, float(R_eval @ x))
    return {
        "sharpe": sharpe,
        "sortino": sortino,
        "jensen_alpha": jensen,
        "cross_sectional": cross,
    }


def mixed_strategy_copula(mixture: MixtureStrategy, R, Sigma_eval,
                          m: int = 100, sample_count: int = 100_000,
                          seed=0, config: SamplerConfig | None = None) -> Copula:
    """Copula of return/volatility when portfolios follow the mixture.

    Grid levels stay defined by the uniform measure; only the counted
    mass comes from mixture samples, so marginals need not be uniform.
    """
    cfg = config or SamplerConfig()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    pts, _ = sample_mixture(mixture.densities(), mixture.weights, cfg,
                            sample_count, rng=rng)
    n = np.asarray(R, float).size
    return copula_from_samples(pts[:, :n], R, Sigma_eval, m, seed=seed)
