"""Deviance-based model comparison, posterior summaries and predictive checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import substream
from .data import balance_proportion
from .model import deviance, expit, mean_predictor  # noqa: F401  (deviance re-exported)
from .sampler import PosteriorSamples

__all__ = [
    "deviance",
    "dic",
    "dic_alt",
    "FitSummary",
    "summarize",
    "posterior_predictive_balance",
]


def _check_draws(samples: PosteriorSamples):
    if samples.n_draws < 2:
        raise ValueError(f"DIC needs at least 2 retained draws, got {samples.n_draws}")


def dic(samples: PosteriorSamples) -> dict:
    """DIC with the plug-in deviance evaluated at the posterior mean of theta.

    p_D = mean deviance - D(theta_bar), DIC = mean deviance + p_D.
    """
    _check_draws(samples)
    d_bar = float(np.mean(samples.deviance))
    d_hat = deviance(samples.theta_mean, samples.y)
    p_d = d_bar - d_hat
    return {"dic": d_bar + p_d, "p_d": p_d, "mean_deviance": d_bar, "deviance_at_mean": d_hat}


def dic_alt(samples: PosteriorSamples) -> dict:
    """DIC with p_D replaced by half the (unbiased) variance of the deviance."""
    _check_draws(samples)
    d_bar = float(np.mean(samples.deviance))
    p_d_alt = float(np.var(samples.deviance, ddof=1)) / 2.0
    return {"dic_alt": d_bar + p_d_alt, "p_d_alt": p_d_alt, "mean_deviance": d_bar}


@dataclass
class ParameterSummary:
    mean: float
    sd: float
    lower: float
    upper: float


@dataclass
class FitSummary:
    parameters: dict[str, ParameterSummary]
    level: float
    mean_deviance: float
    mean_loglik: float
    dic: float
    p_d: float
    dic_alt: float
    p_d_alt: float
    n_draws: int
    extra: dict = field(default_factory=dict)


def summarize_draws(draws, level: float = 0.95) -> ParameterSummary:
    x = np.asarray(draws, dtype=float)
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [a, 1.0 - a])
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return ParameterSummary(float(np.mean(x)), sd, float(lo), float(hi))


def summarize(samples: PosteriorSamples, level: float = 0.95) -> FitSummary:
    """Posterior mean, SD and equal-tailed interval for every scalar parameter.

    Standard deviations (sigma_*) are reported alongside the variances.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    params = {}
    for name, col in samples.scalar_columns().items():
        if name == "deviance":
            continue
        params[name] = summarize_draws(col, level)
        if name.startswith("sigma2_"):
            params["sigma_" + name[len("sigma2_"):]] = summarize_draws(np.sqrt(col), level)
    d, da = dic(samples), dic_alt(samples)
    return FitSummary(
        parameters=params,
        level=level,
        mean_deviance=d["mean_deviance"],
        mean_loglik=-d["mean_deviance"] / 2.0,
        dic=d["dic"],
        p_d=d["p_d"],
        dic_alt=da["dic_alt"],
        p_d_alt=da["p_d_alt"],
        n_draws=samples.n_draws,
    )


def posterior_predictive_balance(samples: PosteriorSamples, dataset, seed: int | None = None, rng=None):
    """Balance proportion of replicated networks, one per retained draw.

    Uses stored theta draws when present; otherwise theta is redrawn from
    N(linear predictor, sigma2_gamma) for each draw. Replicate ``s`` uses its
    own substream unless an explicit ``rng`` is passed.
    """
    Y = np.asarray(dataset.Y)
    observed = balance_proportion(Y)
    stats = np.empty(samples.n_draws)
    for s in range(samples.n_draws):
        g = rng if rng is not None else substream(seed, "ppc", s)
        if samples.theta is not None:
            theta = samples.theta[s]
        else:
            state = samples.state(s)
            theta = mean_predictor(state, dataset) + np.sqrt(state.sigma2_gamma) * g.standard_normal(Y.shape)
        y_rep = (g.random(Y.shape) < expit(theta)).astype(np.int8)
        stats[s] = balance_proportion(y_rep)
    return {"observed": observed, "replicated_stats": stats, "p_value": float(np.mean(stats >= observed))}
