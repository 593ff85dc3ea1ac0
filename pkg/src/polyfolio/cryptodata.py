"""Bundled example market snapshot: 12 large cryptocurrencies.

Shrinkage covariance and mean daily returns estimated on the 100 trading
days ending 2017-01-29, plus the mean daily returns over the following
10 days (the evaluation horizon). Units are daily return fractions;
covariance entries are daily return variances.
"""
import numpy as np

SYMBOLS = ("BTC", "LTC", "ETH", "XRP", "XMR", "USDT",
           "DASH", "XLM", "DOGE", "DGB", "XEM", "SC")

ESTIMATION_START = "2016-10-22"
ESTIMATION_END = "2017-01-29"
EVALUATION_END = "2017-02-08"

# daily return covariance (fractions squared)
COVARIANCE = 1e-3 * np.array([
    [1.4290, 0.9808, 0.5099, 0.3778, 0.6328, 0.8382, 0.5957, 0.7565, 0.4754, 0.9317, 1.0839, 0.2413],
    [0.9808, 3.4804, 0.7195, 0.4652, 1.1354, 0.8545, 1.1496, 1.3633, 0.8549, 1.6933, 1.3762, 0.4291],
    [0.5099, 0.7195, 4.3024, 0.3100, 0.9297, 0.6226, 0.9011, 1.3825, 0.4979, 1.0408, 0.7013, 0.3027],
    [0.3778, 0.4652, 0.3100, 0.5014, 0.3156, 0.4654, 0.3230, 0.4687, 0.2862, 0.4977, 0.4366, 0.1317],
    [0.6328, 1.1354, 0.9297, 0.3156, 2.5198, 0.6002, 1.1857, 0.9297, 0.5557, 1.9265, 0.9451, 0.3790],
    [0.8382, 0.8545, 0.6226, 0.4654, 0.6002, 2.4615, 0.5202, 0.7768, 0.5866, 1.0493, 1.1255, 0.2875],
    [0.5957, 1.1496, 0.9011, 0.3230, 1.1857, 0.5202, 3.7467, 1.0624, 0.5390, 2.0051, 1.1436, 0.3894],
    [0.7565, 1.3633, 1.3825, 0.4687, 0.9297, 0.7768, 1.0624, 4.5856, 0.8172, 1.0103, 1.0801, 0.3444],
    [0.4754, 0.8549, 0.4979, 0.2862, 0.5557, 0.5866, 0.5390, 0.8172, 2.2931, 0.9156, 0.5850, 0.3067],
    [0.9317, 1.6933, 1.0408, 0.4977, 1.9265, 1.0493, 2.0051, 1.0103, 0.9156, 12.7352, 1.2763, 0.7029],
    [1.0839, 1.3762, 0.7013, 0.4366, 0.9451, 1.1255, 1.1436, 1.0801, 0.5850, 1.2763, 4.4734, 0.2613],
    [0.2413, 0.4291, 0.3027, 0.1317, 0.3790, 0.2875, 0.3894, 0.3444, 0.3067, 0.7029, 0.2613, 0.5760],
])
COVARIANCE.setflags(write=False)

# mean daily returns over the estimation window
MEAN_RETURNS = 1e-2 * np.array([
    0.44, 1.10, 0.45, -0.07, 0.53, 0.11,
    0.48, 0.96, 0.64, 0.96, 1.05, -0.07,
])
MEAN_RETURNS.setflags(write=False)

# mean daily returns over the 10-day evaluation horizon
EVALUATION_RETURNS = 1e-2 * np.array([
    0.10, 2.93, -0.02, 1.80, 0.83, 4.39,
    -2.89, 0.05, 1.70, 10.50, 0.41, -0.03,
])
EVALUATION_RETURNS.setflags(write=False)
