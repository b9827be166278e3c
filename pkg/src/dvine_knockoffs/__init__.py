"""FDR-controlled variable selection with truncated D-vine copula knockoffs."""

from .pair_copula import (PairCopulaSpec, EdgePenalty, copula_pdf, copula_cdf,
                          hfunc, hinv, param_to_tau, tau_to_param,
                          fit_pair_mle, select_pair_family)

__all__ = [
    "PairCopulaSpec", "EdgePenalty", "copula_pdf", "copula_cdf", "hfunc",
    "hinv", "param_to_tau", "tau_to_param", "fit_pair_mle",
    "select_pair_family",
]

__version__ = "0.1.0"
