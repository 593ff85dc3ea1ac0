"""Dated return panels and covariance estimation.

CSV panels have an ISO-8601 date column followed by one column per asset;
cells hold either prices or simple returns. Covariances use the shrinkage
estimator toward the constant-correlation target, which stays usable when
the window is short relative to the number of assets.
"""
from __future__ import annotations

import csv
import datetime
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateAssetError, IngestionError,
                     InsufficientDataError, InvalidParameterError, WindowError)

log = logging.getLogger(__name__)


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReturnsPanel:
    """Immutable dated matrix of simple daily returns (T rows, n assets)."""

    symbols: tuple
    dates: tuple
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _frozen(self.returns))
        T, n = self.returns.shape
        if len(self.symbols) != n or len(self.dates) != T:
            raise InvalidParameterError("panel dimensions disagree")
        if n < 2:
            raise InsufficientDataError("need at least two assets")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidParameterError("dates must be strictly increasing")

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def __len__(self) -> int:
        return self.returns.shape[0]

    def window(self, end: int, length: int) -> "ReturnsPanel":
        """Trailing window of the given length finishing at row index end
        (inclusive)."""
        if length > end + 1:
            raise WindowError("window is longer than the available history")
        lo = end + 1 - length
        return ReturnsPanel(self.symbols, self.dates[lo:end + 1],
                            self.returns[lo:end + 1])


def ingest_csv(path, format: str = "prices") -> ReturnsPanel:
    """Load a dated panel CSV; prices are converted to simple returns.

    Rows with any missing cell are dropped (count logged); an unparseable
    cell raises with its row and column.
    """
    if format not in ("prices", "returns"):
        raise InvalidParameterError("format must be 'prices' or 'returns'")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InsufficientDataError(f"{path}: empty file")
    header = rows[0]
    symbols = [s.strip() for s in header[1:]]
    if len(symbols) < 2:
        raise InsufficientDataError("fewer than two asset columns")
    dates = []
    values = []
    dropped = 0
    for ridx, row in enumerate(rows[1:], start=2):
        if len(row) != len(symbols) + 1:
            dropped += 1
            continue
        if any(cell.strip() == "" for cell in row):
            dropped += 1
            continue
        try:
            day = datetime.date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise IngestionError(f"{path}:{ridx}: bad date {row[0]!r}",
                                 row=ridx, column=1) from exc
        vals = np.empty(len(symbols))
        for cidx, cell in enumerate(row[1:], start=2):
            try:
                vals[cidx - 2] = float(cell)
            except ValueError as exc:
                raise IngestionError(
                    f"{path}:{ridx}: bad cell {cell!r} in column "
                    f"{header[cidx - 1]!r}", row=ridx, column=cidx) from exc
        dates.append(day)
        values.append(vals)
    if dropped:
        log.info("dropped %d incomplete rows from %s", dropped, path)
    if len(dates) < 2:
        raise InsufficientDataError("fewer than two complete observations")
    data = np.array(values)
    if format == "prices":
        rets = data[1:] / data[:-1] - 1.0
        dates = dates[1:]
    else:
        rets = data
    return ReturnsPanel(tuple(symbols), tuple(dates), rets)


def panel_to_csv(panel: ReturnsPanel, path, header_comment: str | None = None):
    """Write a returns panel; finite values round-trip bit-identically."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["date", *panel.symbols])
        for day, row in zip(panel.dates, panel.returns):
            w.writerow([day.isoformat(), *[format(v, ".17g") for v in row]])


def compound_returns(panel, k: int | None = None) -> np.ndarray:
    """Per-asset compound return over the trailing k observations.

    Component j is the product of (1 + r_tj) over the window minus one.
    """
    rets = panel.returns if isinstance(panel, ReturnsPanel) else np.asarray(panel, float)
    T = rets.shape[0]
    if k is None:
        k = T
    if k > T:
        raise WindowError(f"window {k} exceeds the {T} available observations")
    return np.prod(1.0 + rets[T - k:], axis=0) - 1.0


@dataclass(frozen=True)
class CovarianceEstimate:
    """Shrinkage covariance with its intensity and target kind."""

    Sigma: np.ndarray
    intensity: float
    target: str = "constant-correlation"

    def __post_init__(self):
        object.__setattr__(self, "Sigma", _frozen(self.Sigma))


def shrinkage_covariance(panel) -> CovarianceEstimate:
    """Covariance shrunk toward the constant-correlation target.

    The optimal intensity follows the plug-in rule of the constant
    correlation shrinkage estimator: intensity = clip(kappa / T, 0, 1)
    with kappa = (pi_hat - rho_hat) / gamma_hat. Output is symmetric PSD.
    """
    if isinstance(panel, ReturnsPanel):
        rets = panel.returns
        symbols = panel.symbols
    else:
        rets = np.asarray(panel, dtype=float)
        symbols = tuple(f"col{j}" for j in range(rets.shape[1]))
    T, n = rets.shape
    if T < 2:
        raise InsufficientDataError("need at least two observations")
    if n < 2:
        raise InsufficientDataError("need at least two assets")
    x = rets - rets.mean(axis=0, keepdims=True)
    sample = x.T @ x / T
    var = np.diag(sample).copy()
    zero = var <= 0.0
    if np.any(zero):
        raise DegenerateAssetError(symbols[int(np.argmax(zero))])
    sd = np.sqrt(var)
    corr = sample / np.outer(sd, sd)
    rbar = (corr.sum() - n) / (n * (n - 1))
    target = rbar * np.outer(sd, sd)
    np.fill_diagonal(target, var)

    y = x ** 2
    pi_mat = y.T @ y / T - sample ** 2
    pi_hat = pi_mat.sum()
    theta_ii = (x ** 3).T @ x / T - var[:, None] * sample
    rho_hat = (np.diag(pi_mat).sum()
               + rbar * ((sd[None, :] / sd[:, None]) * theta_ii
                         + (sd[:, None] / sd[None, :]) * theta_ii.T)[
                   ~np.eye(n, dtype=bool)].sum() / 2.0)
    gamma_hat = ((sample - target) ** 2).sum()
    if gamma_hat <= 0:
        intensity = 0.0
    else:
        intensity = max(0.0, min(1.0, (pi_hat - rho_hat) / gamma_hat / T))
    Sigma = intensity * target + (1.0 - intensity) * sample
    Sigma = 0.5 * (Sigma + Sigma.T)
    return CovarianceEstimate(Sigma=Sigma, intensity=float(intensity))
