"""Exact and Monte Carlo diagnostics of the quenched CLT on finite Markov chains."""

__version__ = "0.1.0"

from .catalog import catalog, describe, get_chain  # noqa: E402
from .chain import (  # noqa: E402
    ChainSpec,
    ErgodicityReport,
    ergodicity_report,
    from_dict,
    kernel_power,
    load_chain,
    stationary_law,
    validate_chain,
)
from .errors import *  # noqa: E402,F401,F403
from .projective import (  # noqa: E402
    annealed_second_moment,
    bridge_norm_sq,
    bridge_sum_expectation,
    forward_mean,
    forward_second_moment,
    past_norm_sq,
    poisson_oracle,
    sigma_sq,
    two_sided_single_norm_sq,
)
