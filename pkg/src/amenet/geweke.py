"""Joint-distribution test of the sampler.

Two simulators target p(params, theta, Y):

* marginal-conditional: params ~ prior, theta | params, Y | theta, independently each draw;
* successive-conditional: alternate Y | theta with one Gibbs sweep given Y.

If every kernel leaves its conditional invariant, test-function means from the
two agree up to Monte Carlo error. The successive chain is autocorrelated, so
its standard errors use batch means.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .data import AffiliationDataset
from .model import ChainState, ModelSpec, Priors, draw_from_prior, expit, mean_predictor
from .sampler import Design, gibbs_sweep

# theta_y couples theta with the data; without it a kernel that ignores Y would pass
TEST_FUNCTIONS = ("beta_d", "sigma2_a", "sigma2_e", "sigma2_u", "sigma2_v", "mean_theta", "theta_y")


def _stats(state: ChainState, Y) -> np.ndarray:
    return np.array([
        state.beta_d[0], state.sigma2_a, state.sigma2_e, state.sigma2_u, state.sigma2_v, state.theta.mean(),
        np.mean(state.theta * Y),
    ])


def _prior_state(spec, priors, n_a, n_e, rng) -> ChainState:
    beta_d, _, s2, s2g = draw_from_prior(spec, priors, rng)
    t = spec.t
    state = ChainState(
        beta_d=beta_d,
        mu_a=np.sqrt(s2["a"]) * rng.standard_normal(n_a),
        mu_e=np.sqrt(s2["e"]) * rng.standard_normal(n_e),
        beta_a=np.zeros(0), beta_e=np.zeros(0),
        sigma2_a=s2["a"], sigma2_e=s2["e"], sigma2_gamma=s2g, sigma2_u=s2["u"], sigma2_v=s2["v"],
        u=np.sqrt(s2["u"]) * rng.standard_normal((n_a, t)),
        v=np.sqrt(s2["v"]) * rng.standard_normal((n_e, t)),
        theta=np.zeros((n_a, n_e)),
    )
    state.theta = mean_predictor(state, _intercept_only(np.zeros((n_a, n_e), dtype=np.int8))) + np.sqrt(
        s2g
    ) * rng.standard_normal((n_a, n_e))
    return state


def _intercept_only(Y):
    return AffiliationDataset.from_matrix(Y)


def _draw_y(theta, rng):
    return (rng.random(theta.shape) < expit(theta)).astype(np.int8)


def marginal_conditional(spec, priors, n_a, n_e, n_draws, seed=None) -> np.ndarray:
    rng = substream(seed, "geweke-marginal")
    out = np.empty((n_draws, len(TEST_FUNCTIONS)))
    for s in range(n_draws):
        state = _prior_state(spec, priors, n_a, n_e, rng)
        out[s] = _stats(state, _draw_y(state.theta, rng))
    return out


def successive_conditional(spec, priors, n_a, n_e, n_draws, seed=None, burn_in=1000) -> np.ndarray:
    rng = substream(seed, "geweke-successive")
    state = _prior_state(spec, priors, n_a, n_e, rng)
    ds = _intercept_only(_draw_y(state.theta, rng))
    design = Design(ds)
    out = np.empty((n_draws, len(TEST_FUNCTIONS)))
    for s in range(-burn_in, n_draws):
        ds = ds.with_Y(_draw_y(state.theta, rng))
        gibbs_sweep(state, ds, priors, rng, design)
        if s >= 0:
            out[s] = _stats(state, ds.Y)
    return out


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> np.ndarray:
    """Standard error of the mean of each column from non-overlapping batch means."""
    x = np.asarray(x)
    b = x.shape[0] // n_batches
    means = x[: b * n_batches].reshape(n_batches, b, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass
class GewekeResult:
    names: tuple
    mean_marginal: np.ndarray
    mean_successive: np.ndarray
    se: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.mean_successive - self.mean_marginal) / self.se

    def passed(self, k: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.z) < k))

    def lines(self):
        for n, a, b, z in zip(self.names, self.mean_marginal, self.mean_successive, self.z):
            yield f"{n:>10s}  marginal {a:9.4f}  successive {b:9.4f}  z {z:6.2f}"


def geweke_test(n_a=4, n_e=3, t=1, n_draws=50_000, seed=None, ig=(5.0, 4.0), beta_sd=1.0) -> GewekeResult:
    """Compare both simulators on an intercept-only model.

    IG(5, 4) priors keep the variance test functions' second moments finite,
    which the default IG(1, 1) would not.
    """
    spec = ModelSpec(t=t)
    priors = Priors.default(1, 0, 0, beta_sd=beta_sd, ig={n: ig for n in ("a", "e", "u", "v")})
    mc = marginal_conditional(spec, priors, n_a, n_e, n_draws, seed)
    sc = successive_conditional(spec, priors, n_a, n_e, n_draws, seed)
    se_mc = mc.std(axis=0, ddof=1) / np.sqrt(n_draws)
    se = np.sqrt(se_mc**2 + batch_means_se(sc) ** 2)
    return GewekeResult(TEST_FUNCTIONS, mc.mean(axis=0), sc.mean(axis=0), se)
