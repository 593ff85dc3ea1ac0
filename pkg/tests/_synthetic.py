"""Synthetic market generators shared across tests."""
import datetime

import numpy as np

from polyfolio.market import ReturnsPanel


def planted_crisis_panel(n=12, calm_before=90, crisis_days=120, calm_after=90,
                         seed=0, calm_spread=0.003, crisis_spread=0.03,
                         vol_lo=0.006, vol_hi=0.025):
    """Panel with a planted anti-diagonal regime.

    Asset volatilities rise with the index throughout. In calm stretches
    mean returns rise gently with volatility (normal risk-reward); during
    the plant the low-volatility assets rally while the high-volatility
    ones fall, which couples low volatility to high return.

    Returns (panel, (plant_start_date, plant_end_date)).
    """
    g = np.random.default_rng(seed)
    sig = np.linspace(vol_lo, vol_hi, n)
    rank = np.linspace(0.0, 1.0, n)
    mu_calm = calm_spread * (rank - 0.25)
    mu_crisis = crisis_spread * (0.5 - rank)
    T = calm_before + crisis_days + calm_after
    rets = np.empty((T, n))
    for t in range(T):
        in_plant = calm_before <= t < calm_before + crisis_days
        rets[t] = (mu_crisis if in_plant else mu_calm) + sig * g.normal(size=n)
    d0 = datetime.date(2020, 1, 1)
    dates = tuple(d0 + datetime.timedelta(days=t) for t in range(T))
    panel = ReturnsPanel(tuple(f"A{i:02d}" for i in range(n)), dates, rets)
    return panel, (dates[calm_before], dates[calm_before + crisis_days - 1])


def calm_panel(n=12, T=300, seed=0, spread=0.003, vol_lo=0.006, vol_hi=0.025):
    """All-calm control panel matching the planted generator's calm regime."""
    g = np.random.default_rng(seed)
    sig = np.linspace(vol_lo, vol_hi, n)
    rank = np.linspace(0.0, 1.0, n)
    mu = spread * (rank - 0.25)
    rets = mu + sig * g.normal(size=(T, n))
    d0 = datetime.date(2020, 1, 1)
    dates = tuple(d0 + datetime.timedelta(days=t) for t in range(T))
    return ReturnsPanel(tuple(f"A{i:02d}" for i in range(n)), dates, rets)


def gaussian_market_panel(mu, Sigma, T, seed=0, symbols=None,
                          start=datetime.date(2016, 10, 22)):
    """I.i.d. Gaussian daily returns with the given moments."""
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    g = np.random.default_rng(seed)
    rets = g.multivariate_normal(mu, Sigma, size=T, method="svd")
    dates = tuple(start + datetime.timedelta(days=t) for t in range(T))
    if symbols is None:
        symbols = tuple(f"A{i:02d}" for i in range(mu.size))
    return ReturnsPanel(tuple(symbols), dates, rets)
