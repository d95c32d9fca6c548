"""Bilinear mixed-effects models for affiliation (two-mode) networks."""

__version__ = "0.1.0"

from .data import (
    AffiliationDataset,
    CycleCensus,
    balance_proportion,
    balance_randomization_test,
    cycle_census,
    expected_balance_under_independence,
    load_dataset,
    project,
    tie_density,
)
from .diagnostics import dic, dic_alt, posterior_predictive_balance, summarize
from .errors import DataError, NumericalError
from .latent import (
    MarkedPointPattern,
    align_samples,
    k_randomization_envelope,
    multitype_k,
    orthogonal_procrustes,
    procrustes_align,
)
from .model import ChainState, ModelSpec, Priors, TrueParams, deviance, linear_predictor, simulate_network
from .sampler import ChainConfig, PosteriorSamples, gibbs_sweep, run_chain, run_chains
