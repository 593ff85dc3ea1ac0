"""Return/volatility copulae on the simplex and the crisis indicator.

A copula here is the m x m joint mass of portfolio-return and
portfolio-volatility quantile cells under the uniform measure on the
simplex: return levels come from exact simplex-cut fractions (bisection),
volatility levels from empirical quantiles of a uniform sample, so both
marginals are uniform by construction. The indicator compares the mass of
the two diagonal bands; sustained values above one flag warning or crisis
regimes.
"""
from __future__ import annotations

import concurrent.futures
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import varsi_fraction_many
from .errors import DegenerateInputError, InvalidParameterError, WindowError
from .market import ReturnsPanel, compound_returns, shrinkage_covariance
from .sampler import sample_simplex_uniform


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Copula:
    """Joint mass over return bands (rows) and volatility bands (columns)."""

    m: int
    mass: np.ndarray
    return_levels: np.ndarray
    vol_levels: np.ndarray
    sample_count: int
    degenerate: bool = False

    def __post_init__(self):
        for name in ("mass", "return_levels", "vol_levels"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def row_sums(self):
        return self.mass.sum(axis=1)

    def col_sums(self):
        return self.mass.sum(axis=0)

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            for row in self.mass:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                rows.append([float(v) for v in line.split(",")])
        mass = np.asarray(rows)
        m = mass.shape[0]
        levels = np.arange(m + 1, dtype=float)
        return cls(m=m, mass=mass, return_levels=levels, vol_levels=levels,
                   sample_count=0)


@dataclass(frozen=True)
class Interval:
    start: object
    end: object
    severity: str       # "warning" | "crisis"
    length: int         # observations with indicator > 1


@dataclass(frozen=True)
class IndicatorSeries:
    """Rolling indicator values with their detected intervals."""

    dates: tuple
    values: np.ndarray
    intervals: tuple

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "intervals", tuple(self.intervals))

    def state_at(self, idx: int) -> str:
        day = self.dates[idx]
        for iv in self.intervals:
            if iv.start <= day <= iv.end:
                return iv.severity
        return "none"

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("date,value,state\n")
            for i, day in enumerate(self.dates):
                fh.write(f"{day.isoformat()},{format(self.values[i], '.17g')},"
                         f"{self.state_at(i)}\n")


def return_levels(R, m: int) -> np.ndarray:
    """Levels s_0 < ... < s_m splitting the simplex into equal-volume
    return slabs, located by bisection on the exact cut fraction."""
    R = np.asarray(R, dtype=float)
    lo, hi = float(R.min()), float(R.max())
    if hi - lo <= 1e-14 * max(1.0, abs(hi)):
        raise DegenerateInputError("returns are constant across assets")
    if m < 1:
        raise InvalidParameterError("m must be positive")
    levels = np.empty(m + 1)
    levels[0], levels[m] = lo, hi
    for i in range(1, m):
        target = i / m
        a, b = lo, hi
        fa = 0.0
        for _ in range(100):
            mid = 0.5 * (a + b)
            f = varsi_fraction_many(R, [mid])[0]
            if abs(f - target) <= 1e-9:
                break
            if f < target:
                a, fa = mid, f
            else:
                b = mid
            if b - a <= 1e-15 * max(1.0, abs(hi - lo)):
                break
        levels[i] = mid
    # strictly increasing even under bisection round-off
    for i in range(1, m + 1):
        if levels[i] <= levels[i - 1]:
            levels[i] = np.nextafter(levels[i - 1], np.inf)
    return levels


def volatility_levels(Sigma, m: int, sample) -> np.ndarray:
    """Empirical i/m-quantiles of portfolio volatility over a uniform sample."""
    sample = np.asarray(sample, dtype=float)
    vols = np.einsum("ij,jk,ik->i", sample, np.asarray(Sigma, float), sample)
    return np.quantile(vols, np.linspace(0.0, 1.0, m + 1))


def _cell_index(levels, values, m):
    idx = np.searchsorted(levels, values, side="right") - 1
    return np.clip(idx, 0, m - 1)


def estimate_copula(R, Sigma, m: int = 100, sample_count: int = 500_000,
                    seed=0) -> Copula:
    """Estimate the copula by counting uniform simplex samples per grid cell.

    Cells are half-open [level_i, level_{i+1}) with the last cell closed;
    volatility levels are in-sample quantiles of the same draw, so column
    sums are uniform by construction and row sums up to sampling noise.
    """
    R = np.asarray(R, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if m < 2:
        raise InvalidParameterError("m must be at least 2")
    if sample_count < 10 * m * m:
        raise InvalidParameterError("need at least 10 m^2 samples")
    X = sample_simplex_uniform(R.size, sample_count, seed)
    s_levels = return_levels(R, m)
    vols = np.einsum("ij,jk,ik->i", X, Sigma, X)
    u_levels = np.quantile(vols, np.linspace(0.0, 1.0, m + 1))
    degenerate = bool(u_levels[-1] - u_levels[0] <= 1e-18)
    rets = X @ R
    i_idx = _cell_index(s_levels, rets, m)
    j_idx = _cell_index(u_levels, vols, m)
    mass = np.bincount(i_idx * m + j_idx, minlength=m * m).reshape(m, m)
    return Copula(m=m, mass=mass / sample_count, return_levels=s_levels,
                  vol_levels=u_levels, sample_count=sample_count,
                  degenerate=degenerate)


def copula_from_samples(points, R, Sigma, m: int, seed=0,
                        level_sample_count: int | None = None) -> Copula:
    """Copula of arbitrarily distributed portfolios on the uniform grid.

    Grid levels are still defined by the uniform measure (exact return
    levels; volatility quantiles from a fresh uniform draw); the mass is
    counted over the given points, so marginals need not be uniform.
    """
    points = np.asarray(points, dtype=float)
    R = np.asarray(R, dtype=float)
    count = points.shape[0]
    if level_sample_count is None:
        level_sample_count = max(count, 10 * m * m)
    uniform = sample_simplex_uniform(R.size, level_sample_count, seed)
    s_levels = return_levels(R, m)
    u_levels = volatility_levels(Sigma, m, uniform)
    rets = points @ R
    vols = np.einsum("ij,jk,ik->i", points, np.asarray(Sigma, float), points)
    i_idx = _cell_index(s_levels, rets, m)
    j_idx = _cell_index(u_levels, vols, m)
    mass = np.bincount(i_idx * m + j_idx, minlength=m * m).reshape(m, m)
    return Copula(m=m, mass=mass / count, return_levels=s_levels,
                  vol_levels=u_levels, sample_count=count)


def band_masks(m: int, band: float):
    """Boolean up-diagonal and down-diagonal band masks (intersection kept)."""
    bw = band * m
    i = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    up = np.abs(i - j) <= bw
    down = np.abs(i + j - (m - 1)) <= bw
    return up, down


def indicator(copula: Copula, band: float = 0.10) -> float:
    """Down-diagonal over up-diagonal band mass, discarding their
    intersection. Values above one signal crisis-like coupling."""
    if not 0.0 < band < 0.5:
        raise InvalidParameterError("band must lie in (0, 0.5)")
    up, down = band_masks(copula.m, band)
    inter = up & down
    up_mass = float(copula.mass[up & ~inter].sum())
    down_mass = float(copula.mass[down & ~inter].sum())
    if up_mass <= 0.0:
        warnings.warn("up-diagonal band carries no mass; indicator is infinite")
        return float("inf")
    return down_mass / up_mass


def classify_runs(dates, values, warn_len: int = 60, crisis_len: int = 100):
    """Maximal runs of indicator > 1 classified by their length.

    Runs of at most warn_len observations are discarded as isolated
    events; runs up to crisis_len are warnings, longer ones crises.
    """
    intervals = []
    start = None
    values = np.asarray(values, dtype=float)
    for i, v in enumerate(values):
        if v > 1.0 and start is None:
            start = i
        elif v <= 1.0 and start is not None:
            intervals.append((start, i - 1))
            start = None
    if start is not None:
        intervals.append((start, len(values) - 1))
    out = []
    for lo, hi in intervals:
        length = hi - lo + 1
        if length <= warn_len:
            continue
        severity = "crisis" if length > crisis_len else "warning"
        out.append(Interval(start=dates[lo], end=dates[hi],
                            severity=severity, length=length))
    return tuple(out)


def detect(panel: ReturnsPanel, window: int = 60, m: int = 100,
           band: float = 0.10, warn_len: int = 60, crisis_len: int = 100,
           sample_count: int = 500_000, seed=0, threads: int = 1) -> IndicatorSeries:
    """Rolling crisis detector.

    For every date with a full trailing window, compound returns and the
    shrinkage covariance are estimated over that window, a copula is
    sampled and its indicator recorded; sustained runs above one become
    warning/crisis intervals.
    """
    T = len(panel)
    if T <= window:
        raise WindowError("panel is shorter than the rolling window")
    ends = list(range(window - 1, T))
    seeds = np.random.SeedSequence(seed).spawn(len(ends))

    def one(args):
        end, ss = args
        win = panel.window(end, window)
        R = compound_returns(win)
        Sigma = shrinkage_covariance(win).Sigma
        cop = estimate_copula(R, Sigma, m=m, sample_count=sample_count,
                              seed=np.random.default_rng(ss))
        return indicator(cop, band=band)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            values = list(ex.map(one, zip(ends, seeds)))
    else:
        values = [one(a) for a in zip(ends, seeds)]
    dates = tuple(panel.dates[e] for e in ends)
    values = np.asarray(values)
    intervals = classify_runs(dates, values, warn_len, crisis_len)
    return IndicatorSeries(dates=dates, values=values, intervals=intervals)
