"""Samplers over portfolio polytopes.

Exact uniform sampling on the simplex, reflective Hamiltonian Monte Carlo
for truncated log-concave densities (with a hit-and-run cross-check walk),
mixture sampling, L2-norm estimation between annealing stages, and the
annealing schedules that bracket and ladder the dispersion parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .domain import FullDimDomain, PortfolioDomain, minimize_quadratic_utility
from .errors import (ConvergenceError, InvalidParameterError,
                     InvalidWeightsError, StepSizeError)


@dataclass(frozen=True)
class QuadraticExponent:
    """Concave exponent h(x) = -x'Q x + b'x + c0 with Q positive semidefinite.

    Covers every density family used here: quadratic-utility strategies,
    Gaussians around a fixed portfolio, and linear (Boltzmann) exponents.
    """

    Q: np.ndarray
    b: np.ndarray
    c0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(-x @ self.Q @ x + self.b @ x + self.c0)
        return -np.einsum("ij,jk,ik->i", x, self.Q, x) + x @ self.b + self.c0

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * self.Q @ x + self.b

    def pullback(self, fd: FullDimDomain):
        """Potential coefficients of -h on the full-dimensional coordinates.

        Returns (A2, a1) with -h(N y + x*) = .5 y'A2 y + a1'y + const.
        """
        N, xs = fd.N, fd.x_star
        A2 = 2.0 * (N.T @ self.Q @ N)
        a1 = 2.0 * (N.T @ (self.Q @ xs)) - N.T @ self.b
        return A2, a1

    @classmethod
    def zero(cls, n):
        return cls(Q=np.zeros((n, n)), b=np.zeros(n))

    @classmethod
    def linear(cls, b):
        b = np.asarray(b, dtype=float)
        return cls(Q=np.zeros((b.size, b.size)), b=b)


@dataclass(frozen=True)
class LogConcaveDensity:
    """Density proportional to exp(alpha * h(x)) truncated to a domain.

    h must be concave on the domain; alpha scales the dispersion (small
    alpha is near-uniform, large alpha concentrates at the mode).
    """

    domain: PortfolioDomain
    h: object                    # QuadraticExponent or callable
    alpha: float
    grad_h: object = None        # callable, required for non-quadratic h

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidParameterError("alpha must be nonnegative")

    def h_values(self, points):
        points = np.asarray(points, dtype=float)
        if isinstance(self.h, QuadraticExponent):
            return np.atleast_1d(self.h(points))
        if points.ndim == 1:
            return np.atleast_1d(float(self.h(points)))
        return np.array([float(self.h(p)) for p in points])

    def log_unnormalized(self, points):
        return self.alpha * self.h_values(points)


@dataclass(frozen=True)
class SamplerConfig:
    """Walk selection and tuning; the seed makes runs reproducible."""

    walk: str = "rehmc"          # "rehmc" | "exact-simplex" | "hit-and-run"
    step_size: float | None = None
    leapfrog_steps: int = 20
    walk_length: int = 1
    burn_in: int | None = None
    seed: int = 0
    max_reflections: int = 100
    norm_points: int = 400       # sample size per L2-norm estimate

    def __post_init__(self):
        if self.walk not in ("rehmc", "exact-simplex", "hit-and-run"):
            raise InvalidParameterError(f"unknown walk {self.walk!r}")
        if self.step_size is not None and self.step_size <= 0:
            raise InvalidParameterError("step size must be positive")
        if (self.leapfrog_steps <= 0 or self.walk_length <= 0
                or self.max_reflections <= 0 or self.norm_points <= 0):
            raise InvalidParameterError("counts must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise InvalidParameterError("burn-in must be nonnegative")


@dataclass(frozen=True)
class SampleDiagnostics:
    acceptance_rate: float
    mean_abs_energy_error: float
    step_size: float


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_simplex_uniform(n: int, count: int, seed=0) -> np.ndarray:
    """Exact i.i.d. uniform points on the canonical simplex.

    Sorted-uniform spacings: n-1 uniforms are sorted and the gaps of the
    padded sequence are the coordinates; cost is O(n log n) per point with
    a single vectorised pass for the whole batch.
    """
    if n < 2 or count < 1:
        raise InvalidParameterError("need n >= 2 and count >= 1")
    rng = _rng(seed)
    u = rng.random((count, n - 1))
    u.sort(axis=1)
    out = np.empty((count, n))
    out[:, 0] = u[:, 0]
    out[:, 1:-1] = u[:, 1:] - u[:, :-1]
    out[:, -1] = 1.0 - u[:, -1]
    return out


def default_step(fd: FullDimDomain, A2) -> float:
    """Step heuristic: a fraction of the inscribed radius, capped by the
    curvature of the pulled-back potential so leapfrog stays accurate."""
    _, radius = fd.chebyshev
    step = 0.05 * radius
    lam = float(np.linalg.eigvalsh(A2)[-1]) if A2.size else 0.0
    if lam > 1e-12:
        step = min(step, 0.04 * fd.d ** -0.25 / math.sqrt(lam))
    return max(step, 1e-12)


def sample_logconcave(density: LogConcaveDensity, config: SamplerConfig,
                      count: int, start=None, rng=None,
                      return_diagnostics: bool = False):
    """Draw approximately stationary samples from a truncated density.

    The walk runs on the full-dimensional reduction of the density's
    domain; trajectories reflect specularly at polytope facets and every
    returned point is feasible. Points come back in ambient coordinates.
    """
    if count < 1:
        raise InvalidParameterError("count must be positive")
    dom = density.domain
    fd = dom.full_dim if isinstance(dom, PortfolioDomain) else dom
    rng = _rng(config.seed if rng is None else rng)

    if config.walk == "exact-simplex":
        if not (dom.kind == "simplex" and density.alpha == 0.0):
            raise InvalidParameterError(
                "exact-simplex walk requires the simplex and a flat density")
        pts = sample_simplex_uniform(dom.n_assets, count, rng)
        if return_diagnostics:
            return pts, SampleDiagnostics(1.0, 0.0, 0.0)
        return pts

    burn = config.burn_in if config.burn_in is not None else 2 * fd.d + 10
    y0 = fd.chebyshev[0] if start is None else fd.from_original(start)

    if config.walk == "hit-and-run":
        ys = _hit_and_run(density, fd, config, count, burn, y0, rng)
        pts = fd.to_original(ys)
        if return_diagnostics:
            return pts, SampleDiagnostics(1.0, 0.0, 0.0)
        return pts

    if isinstance(density.h, QuadraticExponent):
        A2, a1 = density.h.pullback(fd)
        A2 = density.alpha * A2
        a1 = density.alpha * a1
    else:
        if density.grad_h is None:
            raise InvalidParameterError("generic exponents need grad_h")
        A2 = a1 = None
    step = config.step_size
    if step is None:
        step = default_step(fd, A2 if A2 is not None else np.zeros((fd.d, fd.d)))

    n_traj = burn + count * config.walk_length
    normals = rng.normal(size=(n_traj, fd.d))
    uniforms = rng.random(n_traj)

    if A2 is not None:
        samples, n_acc, denergy, status = _kernels.rehmc_quadratic(
            A2, a1, fd.B, fd.z, y0, step, config.leapfrog_steps, count,
            config.walk_length, burn, normals, uniforms,
            config.max_reflections)
    else:
        samples, n_acc, denergy, status = _rehmc_generic(
            density, fd, y0, step, config.leapfrog_steps, count,
            config.walk_length, burn, normals, uniforms,
            config.max_reflections)
    if status != 0:
        raise StepSizeError(
            f"trajectory exceeded {config.max_reflections} reflections per "
            f"leapfrog step; reduce the step size (currently {step:.3g})")
    pts = fd.to_original(np.asarray(samples))
    if return_diagnostics:
        return pts, SampleDiagnostics(n_acc / max(n_traj, 1), denergy, step)
    return pts


def _rehmc_generic(density, fd, y0, step, n_leap, count, walk_length, burn,
                   normals, uniforms, max_reflections):
    """Reflective HMC for callable exponents (reference path)."""
    N, xs = fd.N, fd.x_star
    B, z = fd.B, fd.z
    alpha = density.alpha

    def potential(y):
        return -alpha * float(density.h(N @ y + xs))

    def gradient(y):
        return -alpha * (N.T @ np.asarray(density.grad_h(N @ y + xs), float))

    row_norm2 = np.einsum("ij,ij->i", B, B)
    y = np.asarray(y0, float).copy()
    n_traj = burn + count * walk_length
    samples = np.empty((count, fd.d))
    filled = n_acc = 0
    denergy = 0.0
    for t in range(n_traj):
        p = normals[t].copy()
        y_new = y.copy()
        h0 = potential(y) + 0.5 * p @ p
        p -= 0.5 * step * gradient(y_new)
        capped = False
        for leap in range(n_leap):
            t_rem = step
            n_refl = 0
            while t_rem > 0.0:
                bp = B @ p
                by = B @ y_new
                moving = bp > 1e-14
                tau, hit = np.inf, -1
                if np.any(moving):
                    times = np.maximum((z[moving] - by[moving]) / bp[moving], 0.0)
                    k = int(np.argmin(times))
                    tau = float(times[k])
                    hit = int(np.nonzero(moving)[0][k])
                if tau >= t_rem:
                    y_new = y_new + t_rem * p
                    break
                y_new = y_new + tau * p
                p = p - (2.0 * bp[hit] / row_norm2[hit]) * B[hit]
                t_rem -= tau
                n_refl += 1
                if n_refl > max_reflections:
                    capped = True
                    break
            if capped:
                break
            p -= (step if leap < n_leap - 1 else 0.5 * step) * gradient(y_new)
        if capped:
            return samples[:filled], n_acc, denergy / max(t, 1), 1
        h1 = potential(y_new) + 0.5 * p @ p
        dh = h1 - h0
        denergy += abs(dh)
        if np.log(uniforms[t]) < -dh and np.all(B @ y_new <= z + 1e-12):
            y = y_new
            n_acc += 1
        if t >= burn and (t - burn + 1) % walk_length == 0:
            samples[filled] = y
            filled += 1
    return samples, n_acc, denergy / max(n_traj, 1), 0


def _hit_and_run(density, fd, config, count, burn, y0, rng):
    """Hit-and-run with exact chord sampling for quadratic exponents.

    Retained as a cross-validation walk for the reflective sampler.
    """
    B, z = fd.B, fd.z
    quad = isinstance(density.h, QuadraticExponent)
    if quad:
        A2, a1 = density.h.pullback(fd)
        A2 = density.alpha * A2
        a1 = density.alpha * a1
    y = np.asarray(y0, float).copy()
    out = np.empty((count, fd.d))
    filled = 0
    total = burn + count * config.walk_length
    for t in range(total):
        u = rng.normal(size=fd.d)
        u /= np.linalg.norm(u)
        bu = B @ u
        by = B @ y
        with np.errstate(divide="ignore"):
            ratios = (z - by) / bu
        t_hi = ratios[bu > 1e-14].min(initial=np.inf)
        t_lo = ratios[bu < -1e-14].max(initial=-np.inf)
        if not np.isfinite(t_hi) or not np.isfinite(t_lo):
            raise InvalidParameterError("hit-and-run requires a bounded domain")
        if quad:
            a = u @ A2 @ u * 0.5
            b = u @ (A2 @ y) + a1 @ u
            tsel = _chord_sample(a, b, t_lo, t_hi, rng)
        else:
            grid = np.linspace(t_lo, t_hi, 129)
            xs = fd.to_original(y[None, :] + grid[:, None] * u[None, :])
            logp = density.log_unnormalized(xs)
            logp -= logp.max()
            cdf = np.cumsum(np.exp(logp))
            cdf /= cdf[-1]
            tsel = float(np.interp(rng.random(), cdf, grid))
        y = y + tsel * u
        if t >= burn and (t - burn + 1) % config.walk_length == 0:
            out[filled] = y
            filled += 1
    return out


def _chord_sample(a, b, lo, hi, rng):
    """Sample t on [lo, hi] with density proportional to exp(-(a t^2 + b t))."""
    if a > 1e-14:
        mean = -b / (2.0 * a)
        sd = 1.0 / math.sqrt(2.0 * a)
        lo_n, hi_n = (lo - mean) / sd, (hi - mean) / sd
        q = stats.norm.cdf(lo_n) + rng.random() * (stats.norm.cdf(hi_n)
                                                   - stats.norm.cdf(lo_n))
        q = min(max(q, 1e-15), 1 - 1e-15)
        return mean + sd * float(stats.norm.ppf(q))
    if abs(b) < 1e-14:
        return float(rng.uniform(lo, hi))
    # truncated exponential via inverse CDF in log space
    u = rng.random()
    width = hi - lo
    lam = -b  # density exp(lam * t)
    m = max(lam * lo, lam * hi)
    num = np.log((1 - u) * np.exp(lam * lo - m) + u * np.exp(lam * hi - m)) + m
    return float(num / lam)


def sample_mixture(components, weights, config: SamplerConfig, count: int,
                   rng=None):
    """Sample a weighted mixture of truncated log-concave densities.

    Each draw picks the component whose cumulative-weight interval
    contains a fresh uniform, then samples that component. Returns
    (points, labels).
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(components) != weights.size:
        raise InvalidWeightsError("one weight per component is required")
    if np.any(weights < -1e-12):
        raise InvalidWeightsError("weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-6:
        raise InvalidWeightsError("weights must sum to one")
    rng = _rng(config.seed if rng is None else rng)
    cum = np.cumsum(np.clip(weights, 0.0, None))
    cum[-1] = 1.0
    labels = np.searchsorted(cum, rng.random(count), side="right")
    labels = np.minimum(labels, len(components) - 1)
    dim = components[0].domain.dim
    points = np.empty((count, dim))
    for k in range(len(components)):
        mask = labels == k
        ck = int(mask.sum())
        if ck == 0:
            continue
        points[mask] = sample_logconcave(components[k], config, ck, rng=rng)
    return points, labels


def _log_mean_exp(v):
    m = float(np.max(v))
    return m + math.log(float(np.mean(np.exp(v - m))))


def l2_norm_ratio(alpha_next: float, alpha_prev: float, h, samples) -> float:
    """Estimate the L2 norm of exp(alpha_next h) w.r.t. exp(alpha_prev h).

    Product-of-averages estimator over samples drawn from the alpha_next
    density; computed in log space with max-shifts so large exponents
    cannot overflow. Equals 1 exactly when the two scales coincide.
    """
    est, _ = _l2_norm_ratio_se(alpha_next, alpha_prev, h, samples)
    return est


def _l2_norm_ratio_se(alpha_next, alpha_prev, h, samples):
    if alpha_next == alpha_prev:
        return 1.0, 0.0
    hv = _h_batch(h, samples)
    t = alpha_prev - alpha_next
    la = _log_mean_exp(t * hv)
    lb = _log_mean_exp(-t * hv)
    value = math.exp(la + lb)
    k = hv.size
    wa = np.exp(t * hv - (t * hv).max())
    wb = np.exp(-t * hv - (-t * hv).max())
    ma, mb = wa.mean(), wb.mean()
    va = wa.var(ddof=1) / k
    vb = wb.var(ddof=1) / k
    cab = float(np.cov(wa, wb, ddof=1)[0, 1]) / k if k > 1 else 0.0
    rel = va / ma**2 + vb / mb**2 + 2.0 * cab / (ma * mb)
    se = value * math.sqrt(max(rel, 0.0))
    return value, se


def _h_batch(h, samples):
    samples = np.asarray(samples, dtype=float)
    if isinstance(h, QuadraticExponent):
        return np.atleast_1d(h(samples))
    if samples.ndim == 1:
        return np.atleast_1d(float(h(samples)))
    return np.array([float(h(p)) for p in samples])


def anneal_down(h, domain: PortfolioDomain, norm_threshold: float,
                config: SamplerConfig, alpha0: float = 1.0,
                max_steps: int = 500, refine_tol: float | None = None) -> float:
    """First scale in the geometric-decay schedule alpha0 (1 - 1/n)^i whose
    density has L2 norm w.r.t. the uniform at most norm_threshold.

    With refine_tol set, the threshold crossing is additionally located by
    bisection inside the bracketing schedule step to that relative
    tolerance (useful when the schedule granularity 1/n is coarse).
    """
    if norm_threshold <= 1.0:
        raise InvalidParameterError("norm threshold must exceed 1")
    n = domain.dim
    seeds = np.random.SeedSequence(config.seed).spawn(max_steps + 64)
    seed_iter = iter(seeds)

    def norm_at(a):
        dens = LogConcaveDensity(domain=domain, h=h, alpha=a)
        pts = sample_logconcave(dens, config, config.norm_points,
                                rng=np.random.default_rng(next(seed_iter)))
        return l2_norm_ratio(a, 0.0, h, pts)

    alpha = float(alpha0)
    prev = None
    for _ in range(max_steps):
        if norm_at(alpha) <= norm_threshold:
            if refine_tol is None or prev is None:
                return alpha
            lo, hi = alpha, prev
            while (hi - lo) > refine_tol * hi:
                mid = math.sqrt(lo * hi)
                if norm_at(mid) <= norm_threshold:
                    lo = mid
                else:
                    hi = mid
            return lo
        prev = alpha
        alpha *= 1.0 - 1.0 / n
    raise ConvergenceError("annealing failed to reach the norm threshold",
                           best_value=alpha)


def anneal_up(h, domain: PortfolioDomain, delta: float, epsilon: float,
              config: SamplerConfig, mode=None, alpha0: float = 1.0,
              nu: int = 10, subsample: int = 100,
              significance: float = 0.05, max_steps: int = 500) -> float:
    """First scale in the geometric-growth schedule alpha0 (1 + 1/n)^i whose
    mass is concentrated in the ball B(mode, delta).

    Concentration is certified by a one-sided t-test over nu sub-sample
    in-ball ratios: stop at the first scale where the mean ratio is
    significantly above 1 - epsilon.
    """
    if not 0 < epsilon < 1:
        raise InvalidParameterError("epsilon must lie in (0, 1)")
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    if mode is None:
        mode = density_mode(h, domain)
    mode = np.asarray(mode, dtype=float)
    n = domain.dim
    t_crit = float(stats.t.ppf(1.0 - significance, nu - 1))
    seeds = np.random.SeedSequence(config.seed + 1).spawn(max_steps)
    alpha = float(alpha0)
    for i in range(max_steps):
        dens = LogConcaveDensity(domain=domain, h=h, alpha=alpha)
        pts = sample_logconcave(dens, config, nu * subsample,
                                rng=np.random.default_rng(seeds[i]))
        dist = np.linalg.norm(pts - mode, axis=1)
        ratios = (dist <= delta).reshape(nu, subsample).mean(axis=1)
        rbar = float(ratios.mean())
        sd = float(ratios.std(ddof=1))
        if sd == 0.0:
            if rbar > 1.0 - epsilon:
                return alpha
        elif (rbar - (1.0 - epsilon)) / (sd / math.sqrt(nu)) > t_crit:
            return alpha
        alpha *= 1.0 + 1.0 / n
    raise ConvergenceError("annealing failed to concentrate the density",
                           best_value=alpha)


def density_mode(h, domain: PortfolioDomain):
    """Mode of exp(alpha h) on the domain for a quadratic exponent."""
    if not isinstance(h, QuadraticExponent):
        raise InvalidParameterError("mode computation needs a quadratic exponent")
    res = minimize_quadratic_utility(domain, h.Q, h.b, 1.0, tol=1e-9)
    return res.x


def equidistant_alpha_sequence(h, domain: PortfolioDomain, alpha_L: float,
                               alpha_U: float, M: int,
                               config: SamplerConfig,
                               max_rungs: int = 200) -> list:
    """Increasing scale ladder from alpha_L to past alpha_U whose consecutive
    densities have (approximately) equal L2 norms.

    The common norm d is the largest consecutive norm over the geometric
    schedule between the endpoints; each next rung is found by bisection
    to hit d within a tolerance. If the ladder is longer than M, exactly M
    rungs are kept, picked equidistantly by index including both endpoints.
    """
    if M < 2:
        raise InvalidParameterError("need at least two ladder values")
    if not alpha_L < alpha_U:
        raise InvalidParameterError("alpha_L must be below alpha_U")
    n = domain.dim
    grow = 1.0 + 1.0 / n
    seeds = np.random.SeedSequence(config.seed + 2).spawn(4 * max_rungs + 64)
    seed_iter = iter(seeds)

    def norm_between(a_hi, a_lo):
        dens = LogConcaveDensity(domain=domain, h=h, alpha=a_hi)
        pts = sample_logconcave(dens, config, config.norm_points,
                                rng=np.random.default_rng(next(seed_iter)))
        return l2_norm_ratio(a_hi, a_lo, h, pts)

    # pilot geometric schedule fixes the common norm target
    schedule = [alpha_L]
    while schedule[-1] * grow < alpha_U:
        schedule.append(schedule[-1] * grow)
    schedule.append(alpha_U)
    consec = [norm_between(schedule[i + 1], schedule[i])
              for i in range(len(schedule) - 1)]
    d_target = max(max(consec), 1.0 + 1e-9)
    tol = max(0.05 * (d_target - 1.0), 1e-3)

    ladder = [alpha_L]
    for _ in range(max_rungs):
        base = ladder[-1]
        if base >= alpha_U:
            break
        lo, hi = base, base * grow
        while norm_between(hi, base) < d_target - tol:
            lo, hi = hi, hi * grow
            if hi > alpha_U * grow ** 8:
                break
        nxt = hi
        for _ in range(40):
            mid = math.sqrt(lo * hi)
            v = norm_between(mid, base)
            if abs(v - d_target) <= tol:
                nxt = mid
                break
            if v < d_target:
                lo = mid
            else:
                hi = mid
            nxt = mid
        ladder.append(nxt)
    else:
        raise ConvergenceError("scale ladder exceeded the rung cap",
                               best_value=ladder[-1])
    if len(ladder) > M:
        idx = np.unique(np.round(np.linspace(0, len(ladder) - 1, M)).astype(int))
        ladder = [ladder[i] for i in idx]
    elif len(ladder) < M:
        # densify by geometric interpolation along the ladder path
        pos = np.linspace(0.0, len(ladder) - 1.0, M)
        logl = np.log(ladder)
        ladder = list(np.exp(np.interp(pos, np.arange(len(logl)), logl)))
    return ladder
