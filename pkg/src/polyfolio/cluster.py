"""Clustering copulae: exact earth mover's distances, spectral clustering
on the EMD-derived affinity, k-medoids, and corner-ratio features.

Transport runs on block-downsampled grids (exact min-cost flow at desk
scale rather than an approximate solver on the full grid); the affinity
kernel is exp(-D^2 / 2 sigma^2) with sigma the standard deviation of the
observed distances.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .copula import Copula, indicator
from .errors import (DegenerateInputError, InvalidParameterError,
                     NumericalError)


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with zero diagonal."""

    D: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InvalidParameterError("distance matrix must be square")
        if np.abs(D - D.T).max(initial=0.0) > 1e-9:
            raise InvalidParameterError("distance matrix must be symmetric")
        if np.abs(np.diag(D)).max(initial=0.0) > 1e-12:
            raise InvalidParameterError("diagonal must be zero")
        object.__setattr__(self, "D", _frozen(D))

    @property
    def size(self) -> int:
        return self.D.shape[0]

    def off_diagonal(self):
        mask = ~np.eye(self.size, dtype=bool)
        return self.D[mask]

    def to_csv(self, path, comment: str | None = None):
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            for row in self.D:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def downsample_mass(mass, target: int):
    """Aggregate an m x m mass grid into target x target blocks."""
    m = mass.shape[0]
    if target > m:
        raise InvalidParameterError("cannot downsample to a finer grid")
    if target == m:
        return np.asarray(mass, dtype=float)
    edges = np.linspace(0, m, target + 1).round().astype(int)
    out = np.add.reduceat(np.add.reduceat(np.asarray(mass, float),
                                          edges[:-1], axis=0),
                          edges[:-1], axis=1)
    return out


def _grid_cost(g: int):
    xs, ys = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def emd(cop_a, cop_b, downsample_to: int = 20) -> float:
    """Exact earth mover's distance between two copulae.

    Cell masses are aggregated into downsample_to x downsample_to blocks,
    then transported exactly with Euclidean ground distance between cell
    centers on the unit-spaced downsampled grid.
    """
    mass_a = cop_a.mass if isinstance(cop_a, Copula) else np.asarray(cop_a, float)
    mass_b = cop_b.mass if isinstance(cop_b, Copula) else np.asarray(cop_b, float)
    if mass_a.shape != mass_b.shape:
        raise InvalidParameterError("copulae must share the grid size")
    ta, tb = mass_a.sum(), mass_b.sum()
    if abs(ta - tb) > 1e-6 or ta <= 0:
        raise InvalidParameterError("distributions carry different total mass")
    g = min(downsample_to, mass_a.shape[0])
    a = downsample_mass(mass_a, g).ravel() / ta
    b = downsample_mass(mass_b, g).ravel() / tb
    return _kernels.min_cost_transport(a, b, _grid_cost(g))


def emd_matrix(copulae, downsample_to: int = 20, threads: int = 1) -> DistanceMatrix:
    """Pairwise EMD distance matrix over a corpus of copulae."""
    K = len(copulae)
    masses = [c.mass if isinstance(c, Copula) else np.asarray(c, float)
              for c in copulae]
    g = min(downsample_to, masses[0].shape[0])
    cost = _grid_cost(g)
    hists = [downsample_mass(m, g).ravel() for m in masses]
    hists = [h / h.sum() for h in hists]
    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]

    def one(pair):
        i, j = pair
        return i, j, _kernels.min_cost_transport(hists[i], hists[j], cost)

    D = np.zeros((K, K))
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    for i, j, d in results:
        D[i, j] = D[j, i] = d
    return DistanceMatrix(D=D)


def spectral_cluster(D, k: int, seed=0) -> np.ndarray:
    """Spectral clustering on a distance matrix.

    Affinity exp(-D_ij^2 / 2 sigma^2) with sigma the standard deviation
    of the off-diagonal distances, symmetric normalised Laplacian, the k
    leading eigenvectors row-normalised, and k-medoids over the rows.
    """
    if not isinstance(D, DistanceMatrix):
        D = DistanceMatrix(D=np.asarray(D, float))
    K = D.size
    if k < 2:
        raise InvalidParameterError("need at least two clusters")
    if K < k:
        raise InvalidParameterError("more clusters than points")
    off = D.off_diagonal()
    sigma = float(off.std())
    if sigma <= 0:
        raise DegenerateInputError("all pairwise distances are equal")
    A = np.exp(-(D.D ** 2) / (2.0 * sigma ** 2))
    np.fill_diagonal(A, 0.0)
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateInputError("isolated point in the affinity graph")
    inv_sqrt = 1.0 / np.sqrt(deg)
    M = A * np.outer(inv_sqrt, inv_sqrt)
    try:
        w, v = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    emb = v[:, -k:]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    emb = emb / norms
    labels, _ = kmedoids(emb, k, seed=seed)
    return labels


def kmedoids(points, k: int, seed=0):
    """PAM-style k-medoids: greedy build then best-improvement swaps.

    Deterministic given the seed (ties break toward lower indices).
    Returns (labels, medoid indices).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    N = points.shape[0]
    if k < 1 or k > N:
        raise InvalidParameterError("k must lie in [1, point count]")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise DegenerateInputError(
            f"only {distinct} distinct points for {k} medoids")
    diff = points[:, None, :] - points[None, :, :]
    D = np.sqrt((diff ** 2).sum(axis=2))
    return kmedoids_distances(D, k, seed=seed)


def kmedoids_distances(D, k: int, seed=0, max_sweeps: int = 200):
    """k-medoids on a precomputed distance matrix."""
    D = np.asarray(D, dtype=float)
    N = D.shape[0]
    medoids = [int(np.argmin(D.sum(axis=1)))]
    while len(medoids) < k:
        cur = D[:, medoids].min(axis=1)
        gains = np.array([np.minimum(cur, D[:, c]).sum()
                          if c not in medoids else np.inf for c in range(N)])
        medoids.append(int(np.argmin(gains)))
    medoids = sorted(medoids)

    def cost_of(meds):
        return float(D[:, meds].min(axis=1).sum())

    best_cost = cost_of(medoids)
    for _ in range(max_sweeps):
        improved = False
        for mi in range(k):
            for cand in range(N):
                if cand in medoids:
                    continue
                trial = sorted(medoids[:mi] + [cand] + medoids[mi + 1:])
                c = cost_of(trial)
                if c < best_cost - 1e-12:
                    medoids, best_cost = trial, c
                    improved = True
        if not improved:
            break
    assign = np.argmin(D[:, medoids], axis=1)
    return assign.astype(int), tuple(medoids)


def corner_features(copula, corner_size: float = 0.1) -> np.ndarray:
    """Six corner-mass ratios of a copula.

    Corners are the corner_size * m square blocks: U_L is high return and
    low volatility, U_R high/high, L_L low/low, L_R low return and high
    volatility. Ratios use additive smoothing so they stay finite.
    """
    if not 0.0 < corner_size < 0.5:
        raise InvalidParameterError("corner size must lie in (0, 0.5)")
    mass = copula.mass if isinstance(copula, Copula) else np.asarray(copula, float)
    m = mass.shape[0]
    c = max(1, int(round(corner_size * m)))
    ul = mass[m - c:, :c].sum()
    ur = mass[m - c:, m - c:].sum()
    ll = mass[:c, :c].sum()
    lr = mass[:c, m - c:].sum()
    eps = 1e-6
    pairs = [(ul, ur), (ul, ll), (ul, lr), (ur, ll), (ur, lr), (ll, lr)]
    return np.array([(a + eps) / (b + eps) for a, b in pairs])


def cluster_report(copulae, labels, medoids, sigma=None, band: float = 0.10):
    """Summary dictionary: labels, medoids, and per-cluster mean indicator."""
    labels = np.asarray(labels)
    inds = np.array([indicator(c, band=band) for c in copulae])
    per_cluster = {}
    for lab in sorted(set(labels.tolist())):
        vals = inds[labels == lab]
        finite = vals[np.isfinite(vals)]
        per_cluster[str(lab)] = float(finite.mean()) if finite.size else None
    return {
        "k": int(len(set(labels.tolist()))),
        "sigma": None if sigma is None else float(sigma),
        "labels": labels.tolist(),
        "medoids": list(medoids) if medoids is not None else None,
        "cluster_mean_indicator": per_cluster,
    }
