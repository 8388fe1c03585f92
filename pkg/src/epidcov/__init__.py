"""Detect epistasis between SNP pairs with distance covariance on 3-point metric spaces."""

__version__ = "0.1.0"

from .energy import (  # noqa: F401
    dcor_from_table,
    dcov_from_table,
    dcov_naive,
    kernel_h_oracle,
    population_dcov,
)
from .metric3 import Metric3, embed_sqrt, make_metric, named_metric  # noqa: F401
from .permtest import PermutationPlan, default_B, perm_test  # noqa: F401
