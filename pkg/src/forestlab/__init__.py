"""Regression trees, bagging and random forests on simulated data.

The package grows CART trees with optional per-split covariate
subsampling, averages them into bagging or forest ensembles, and measures
how the two compare through bias-variance decompositions, tree
decorrelation diagnostics and paired significance tests.
"""

from forestlab.errors import InputError, NumericError

__version__ = "0.1.0"

__all__ = ["InputError", "NumericError", "__version__"]
