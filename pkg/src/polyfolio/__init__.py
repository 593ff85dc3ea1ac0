"""polyfolio: portfolio sets as convex polytopes.

Models long-only and fully-invested portfolio sets as polytopes, estimates
return/volatility copulae and a rolling crisis indicator, clusters copulae
by earth mover's distance, builds log-concave allocation-strategy mixtures,
and scores portfolios against them by MCMC integration.
"""
from ._kernels import IMPLEMENTATION as kernel_implementation

__version__ = "0.1.0"

__all__ = ["kernel_implementation", "__version__"]
