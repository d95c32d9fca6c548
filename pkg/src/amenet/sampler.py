"""Metropolis-within-Gibbs sampler for the bilinear mixed-effects model.

One iteration runs, in order:

1. (beta_d, mu_a, mu_e) | rest, (beta_a, beta_e) | rest, variances;
2. rows of u, rows of v, then sigma2_u and sigma2_v;
3. an independence Metropolis-Hastings update of every theta_ik whose
   proposal is its conditional prior, so the acceptance ratio reduces to
   the likelihood ratio.

Kernels are pure: they take the current state and return the new values.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._rng import substream
from .data import AffiliationDataset
from .errors import DataError, NumericalError
from .model import (
    ChainState,
    ModelSpec,
    Priors,
    build_design_matrix,
    deviance,
    fixed_part,
    log_likelihood,
    mean_predictor,
    vec,
)

log = logging.getLogger(__name__)

JITTER = 1e-10
INIT_LATENT_SD = 0.1


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 6000
    burn_in: int = 3000
    thin: int = 3
    seed: int | None = None
    n_chains: int = 1
    init: str = "zeros-jitter"
    keep_theta: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise DataError("iters must be >= 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise DataError(f"burn ({self.burn_in}) must be >= 0 and smaller than iters ({self.n_iter})")
        if self.thin < 1:
            raise DataError("thin must be >= 1")
        if self.n_retained < 1:
            raise DataError(f"thin ({self.thin}) leaves no draws after burn ({self.burn_in}) of iters ({self.n_iter})")
        if self.n_chains < 1:
            raise DataError("chains must be >= 1")
        if self.init not in ("zeros-jitter", "custom"):
            raise DataError(f"unknown init {self.init!r}")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


# ---------------------------------------------------------------- helpers


def _draw_ig(rng, shape, scale):
    return scale / rng.gamma(shape)


def _cholesky(M, what, iteration=None):
    """Lower Cholesky factor; one retry with diagonal jitter before giving up."""
    try:
        return linalg.cholesky(M, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        pass
    try:
        return linalg.cholesky(M + JITTER * np.eye(M.shape[0]), lower=True)
    except (linalg.LinAlgError, ValueError):
        raise NumericalError(f"{what}: conditional precision is not positive definite", iteration) from None


class Design:
    """Covariate cross-products reused every iteration (they do not depend on Y)."""

    def __init__(self, dataset: AffiliationDataset):
        Xd = dataset.dyad_covariates
        self.n_a, self.n_e, self.r_d = Xd.shape
        self.Xd = Xd
        self.XdXd = np.einsum("ikr,iks->rs", Xd, Xd)
        self.XdA = Xd.sum(axis=1).T  # (r_d, n_a)
        self.XdE = Xd.sum(axis=0).T  # (r_d, n_e)
        self.X_a = dataset.actor_covariates
        self.X_e = dataset.event_covariates
        self.r_a = self.X_a.shape[1]
        self.r_e = self.X_e.shape[1]


def residual_for_latent(state: ChainState, dataset: AffiliationDataset) -> np.ndarray:
    """theta minus its linear part; the response in the u and v regressions."""
    return state.theta - fixed_part(state, dataset)


# ---------------------------------------------------------------- step 1


def linear_block_conditional(state: ChainState, dataset: AffiliationDataset, priors: Priors):
    """Dense mean and covariance of (beta_d, mu_a, mu_e) | rest, built from X_D.

    Reference implementation; the sampler uses the structured factorization
    in ``sample_linear_block``.
    """
    X_D = build_design_matrix(dataset).toarray()
    n_a, n_e = dataset.Y.shape
    r_d = priors.beta_d_mean.size
    s2g = state.sigma2_gamma
    prior_prec = np.zeros((r_d + n_a + n_e,) * 2)
    prior_prec[:r_d, :r_d] = np.linalg.inv(priors.beta_d_cov)
    prior_prec[r_d:r_d + n_a, r_d:r_d + n_a] = np.eye(n_a) / state.sigma2_a
    prior_prec[r_d + n_a:, r_d + n_a:] = np.eye(n_e) / state.sigma2_e
    prior_mean = np.concatenate([
        priors.beta_d_mean,
        dataset.actor_covariates @ state.beta_a,
        dataset.event_covariates @ state.beta_e,
    ])
    z = vec(state.theta - state.u @ state.v.T)
    cov = np.linalg.inv(prior_prec + X_D.T @ X_D / s2g)
    mean = cov @ (prior_prec @ prior_mean + X_D.T @ z / s2g)
    return mean, cov


def _linear_block_draw(state, dataset, priors, design, eps, iteration=None):
    """Draw (beta_d, mu_a, mu_e) using the block structure of X_D' X_D.

    The actor block of the precision is diagonal, so it is eliminated first
    and only the (r_d + n_e) Schur complement is factorized. ``eps`` is a
    standard normal vector ordered (mu_a, beta_d, mu_e); zeros give the mean.
    """
    n_a, n_e, r_d = design.n_a, design.n_e, design.r_d
    s2g, s2a, s2e = state.sigma2_gamma, state.sigma2_a, state.sigma2_e
    z = state.theta - state.u @ state.v.T
    prec_bd = np.linalg.inv(priors.beta_d_cov)

    d = np.full(n_a, n_e / s2g + 1.0 / s2a)
    m = r_d + n_e
    C = np.zeros((m, m))
    C[:r_d, :r_d] = prec_bd + design.XdXd / s2g
    C[:r_d, r_d:] = design.XdE / s2g
    C[r_d:, :r_d] = design.XdE.T / s2g
    C[r_d:, r_d:] += np.diag(np.full(n_e, n_a / s2g + 1.0 / s2e))
    B = np.vstack([design.XdA / s2g, np.full((n_e, n_a), 1.0 / s2g)])

    b_a = design.X_a @ state.beta_a / s2a + z.sum(axis=1) / s2g
    b_r = np.concatenate([
        prec_bd @ priors.beta_d_mean + np.einsum("ikr,ik->r", design.Xd, z) / s2g,
        design.X_e @ state.beta_e / s2e + z.sum(axis=0) / s2g,
    ])

    S = C - (B / d) @ B.T
    L = _cholesky(S, "linear block", iteration)
    w_r = linalg.solve_triangular(L, b_r - B @ (b_a / d), lower=True)
    x_r = linalg.solve_triangular(L, w_r + eps[n_a:], lower=True, trans="T")
    x_a = (b_a - B.T @ x_r) / d + eps[:n_a] / np.sqrt(d)
    return x_r[:r_d], x_a, x_r[r_d:]


def sample_linear_block(state, dataset, priors, rng, design=None, iteration=None):
    """Gibbs draw of (beta_d, mu_a, mu_e). Returns the three new arrays."""
    design = design or Design(dataset)
    eps = rng.standard_normal(design.n_a + design.r_d + design.n_e)
    return _linear_block_draw(state, dataset, priors, design, eps, iteration)


def beta_ae_conditional(state: ChainState, dataset: AffiliationDataset, priors: Priors):
    """Mean and covariance of (beta_a, beta_e) | mu_a, mu_e, sigma2_a, sigma2_e."""
    X_a, X_e = dataset.actor_covariates, dataset.event_covariates
    r_a, r_e = X_a.shape[1], X_e.shape[1]
    prior_prec = np.linalg.inv(priors.beta_ae_cov) if r_a + r_e else np.zeros((0, 0))
    prec = prior_prec.copy()
    prec[:r_a, :r_a] += X_a.T @ X_a / state.sigma2_a
    prec[r_a:, r_a:] += X_e.T @ X_e / state.sigma2_e
    rhs = prior_prec @ priors.beta_ae_mean + np.concatenate([
        X_a.T @ state.mu_a / state.sigma2_a,
        X_e.T @ state.mu_e / state.sigma2_e,
    ])
    cov = np.linalg.inv(prec)
    return cov @ rhs, cov


def sample_beta_ae(state, dataset, priors, rng, iteration=None):
    """Gibbs draw of (beta_a, beta_e); no-op when there are no actor/event covariates."""
    r_a = dataset.actor_covariates.shape[1]
    r = r_a + dataset.event_covariates.shape[1]
    if r == 0:
        return np.zeros(0), np.zeros(0)
    mean, cov = beta_ae_conditional(state, dataset, priors)
    L = _cholesky(cov, "beta_ae", iteration)
    draw = mean + L @ rng.standard_normal(r)
    return draw[:r_a], draw[r_a:]


def variance_conditionals(state, dataset, priors) -> dict:
    """Inverse-gamma (shape, scale) full conditionals of sigma2_a, sigma2_e, sigma2_gamma."""
    n_a, n_e = dataset.Y.shape
    ra = state.mu_a - dataset.actor_covariates @ state.beta_a
    re = state.mu_e - dataset.event_covariates @ state.beta_e
    rg = state.theta - state.u @ state.v.T - fixed_part(state, dataset)
    (a1, a2), (e1, e2), (g1, g2) = priors.ig["a"], priors.ig["e"], priors.ig["gamma"]
    return {
        "a": (n_a / 2 + a1, a2 + ra @ ra / 2),
        "e": (n_e / 2 + e1, e2 + re @ re / 2),
        "gamma": (g1 + n_a * n_e / 2, g2 + np.sum(rg * rg) / 2),
    }


def sample_variances(state, dataset, priors, rng, update_gamma=False):
    """Draw sigma2_a, sigma2_e and, when ``update_gamma``, sigma2_gamma.

    Binary data leave sigma2_gamma at its fixed value.
    """
    cond = variance_conditionals(state, dataset, priors)
    s2a = _draw_ig(rng, *cond["a"])
    s2e = _draw_ig(rng, *cond["e"])
    s2g = _draw_ig(rng, *cond["gamma"]) if update_gamma else state.sigma2_gamma
    return s2a, s2e, s2g


# ---------------------------------------------------------------- step 2


def latent_conditional(resid: np.ndarray, other: np.ndarray, sigma2_prior: float, sigma2_gamma: float):
    """Row-wise conditional of u given v (or v given u via ``resid.T``).

    Each row r solves a Bayesian regression of ``resid[r]`` on ``other``;
    all rows share one covariance. Returns (means, cov, lower factor of precision).
    """
    t = other.shape[1]
    prec = np.eye(t) / sigma2_prior + other.T @ other / sigma2_gamma
    L = _cholesky(prec, "latent rows")
    means = linalg.cho_solve((L, True), (resid @ other / sigma2_gamma).T).T
    cov = linalg.cho_solve((L, True), np.eye(t))
    return means, cov, L


def _latent_draw(resid, other, sigma2_prior, sigma2_gamma, rng):
    means, _, L = latent_conditional(resid, other, sigma2_prior, sigma2_gamma)
    z = rng.standard_normal(means.shape)
    return means + linalg.solve_triangular(L, z.T, lower=True, trans="T").T


def sample_u(state, dataset, rng):
    """Draw every row of u given v; rows are conditionally independent."""
    if state.t == 0:
        return state.u
    resid = residual_for_latent(state, dataset)
    return _latent_draw(resid, state.v, state.sigma2_u, state.sigma2_gamma, rng)


def sample_v(state, dataset, rng):
    if state.t == 0:
        return state.v
    resid = residual_for_latent(state, dataset)
    return _latent_draw(resid.T, state.u, state.sigma2_v, state.sigma2_gamma, rng)


def sigma_uv_conditionals(state, priors) -> dict:
    (u1, u2), (v1, v2) = priors.ig["u"], priors.ig["v"]
    n_a, t = state.u.shape
    n_e = state.v.shape[0]
    return {
        "u": (n_a * t / 2 + u1, u2 + np.sum(state.u**2) / 2),
        "v": (n_e * t / 2 + v1, v2 + np.sum(state.v**2) / 2),
    }


def sample_sigma_uv(state, priors, rng):
    cond = sigma_uv_conditionals(state, priors)
    return _draw_ig(rng, *cond["u"]), _draw_ig(rng, *cond["v"])


# ---------------------------------------------------------------- step 3


def update_theta(state, dataset, rng):
    """Independence MH sweep over all dyads. Returns (theta, number accepted)."""
    centre = mean_predictor(state, dataset)
    proposal = centre + np.sqrt(state.sigma2_gamma) * rng.standard_normal(centre.shape)
    y = dataset.Y
    log_ratio = log_likelihood(proposal, y) - log_likelihood(state.theta, y)
    accept = np.log(rng.random(centre.shape)) < log_ratio
    return np.where(accept, proposal, state.theta), int(accept.sum())


# ---------------------------------------------------------------- chains


def initial_state(dataset: AffiliationDataset, spec: ModelSpec, rng) -> ChainState:
    """Zeros for coefficients and effects, N(0, 0.1^2) latent positions, unit variances."""
    n_a, n_e = dataset.Y.shape
    t = spec.t
    u = INIT_LATENT_SD * rng.standard_normal((n_a, t))
    v = INIT_LATENT_SD * rng.standard_normal((n_e, t))
    state = ChainState(
        beta_d=np.zeros(dataset.dyad_covariates.shape[2]),
        mu_a=np.zeros(n_a),
        mu_e=np.zeros(n_e),
        beta_a=np.zeros(dataset.actor_covariates.shape[1]),
        beta_e=np.zeros(dataset.event_covariates.shape[1]),
        sigma2_a=1.0,
        sigma2_e=1.0,
        sigma2_gamma=spec.sigma_gamma_fixed,
        sigma2_u=1.0,
        sigma2_v=1.0,
        u=u,
        v=v,
        theta=np.zeros((n_a, n_e)),
    )
    state.theta = mean_predictor(state, dataset)
    return state


def gibbs_sweep(state, dataset, priors, rng, design=None, update_gamma=False, iteration=None):
    """One full iteration, updating ``state`` in place. Returns theta acceptances."""
    design = design or Design(dataset)
    state.beta_d, state.mu_a, state.mu_e = sample_linear_block(state, dataset, priors, rng, design, iteration)
    state.beta_a, state.beta_e = sample_beta_ae(state, dataset, priors, rng, iteration)
    state.sigma2_a, state.sigma2_e, state.sigma2_gamma = sample_variances(
        state, dataset, priors, rng, update_gamma
    )
    if state.t > 0:
        state.u = sample_u(state, dataset, rng)
        state.v = sample_v(state, dataset, rng)
        state.sigma2_u, state.sigma2_v = sample_sigma_uv(state, priors, rng)
    state.theta, accepted = update_theta(state, dataset, rng)
    return accepted


@dataclass
class PosteriorSamples:
    """Retained draws of one chain (or several chains pooled)."""

    beta_d: np.ndarray
    beta_a: np.ndarray
    beta_e: np.ndarray
    mu_a: np.ndarray
    mu_e: np.ndarray
    sigma2_a: np.ndarray
    sigma2_e: np.ndarray
    sigma2_gamma: np.ndarray
    sigma2_u: np.ndarray
    sigma2_v: np.ndarray
    u: np.ndarray
    v: np.ndarray
    deviance: np.ndarray
    theta_mean: np.ndarray
    y: np.ndarray
    acceptance_rate_theta: float
    iteration: np.ndarray
    beta_names: dict = field(default_factory=dict)
    theta: np.ndarray | None = None
    chain: int = 0

    @property
    def n_draws(self) -> int:
        return self.deviance.shape[0]

    @property
    def t(self) -> int:
        return self.u.shape[2]

    def state(self, s: int) -> ChainState:
        """ChainState for retained draw ``s``; theta is the stored draw or, if absent, NaN."""
        n_a, n_e = self.y.shape
        theta = self.theta[s] if self.theta is not None else np.full((n_a, n_e), np.nan)
        return ChainState(
            beta_d=self.beta_d[s], mu_a=self.mu_a[s], mu_e=self.mu_e[s],
            beta_a=self.beta_a[s], beta_e=self.beta_e[s],
            sigma2_a=float(self.sigma2_a[s]), sigma2_e=float(self.sigma2_e[s]),
            sigma2_gamma=float(self.sigma2_gamma[s]), sigma2_u=float(self.sigma2_u[s]),
            sigma2_v=float(self.sigma2_v[s]), u=self.u[s], v=self.v[s], theta=theta,
        )

    def scalar_columns(self) -> dict[str, np.ndarray]:
        """Per-draw scalar parameters keyed by column name, in output order."""
        cols = {}
        for block in ("beta_d", "beta_a", "beta_e"):
            arr = getattr(self, block)
            names = self.beta_names.get(block) or [str(j) for j in range(arr.shape[1])]
            for j, name in enumerate(names):
                cols[f"{block}[{name}]"] = arr[:, j]
        for n in ("a", "e", "gamma", "u", "v"):
            cols[f"sigma2_{n}"] = getattr(self, f"sigma2_{n}")
        cols["deviance"] = self.deviance
        return cols

    @classmethod
    def pool(cls, chains: list["PosteriorSamples"]) -> "PosteriorSamples":
        """Concatenate chains; theta_mean is the draw-weighted average."""
        if len(chains) == 1:
            return chains[0]
        cat = lambda name: np.concatenate([getattr(c, name) for c in chains], axis=0)  # noqa: E731
        w = np.array([c.n_draws for c in chains], dtype=float)
        theta_mean = sum(wi * c.theta_mean for wi, c in zip(w, chains)) / w.sum()
        acc = float(np.dot(w, [c.acceptance_rate_theta for c in chains]) / w.sum())
        theta = cat("theta") if all(c.theta is not None for c in chains) else None
        return cls(
            **{n: cat(n) for n in ("beta_d", "beta_a", "beta_e", "mu_a", "mu_e", "sigma2_a", "sigma2_e",
                                   "sigma2_gamma", "sigma2_u", "sigma2_v", "u", "v", "deviance", "iteration")},
            theta_mean=theta_mean, y=chains[0].y, acceptance_rate_theta=acc,
            beta_names=chains[0].beta_names, theta=theta, chain=-1,
        )


def run_chain(dataset, spec, priors, config: ChainConfig, chain: int = 0, init_state: ChainState | None = None):
    """Run one chain and keep thinned post-burn-in draws.

    Draws come from the substream ``("chain", chain)`` of ``config.seed``.
    """
    rng = substream(config.seed, "chain", chain)
    if config.init == "custom":
        if init_state is None:
            raise DataError("init='custom' requires init_state")
        state = init_state.copy()
        state.validate(dataset)
        if state.t != spec.t:
            raise DataError("init_state latent dimension does not match spec.t")
    else:
        state = initial_state(dataset, spec, rng)
    design = Design(dataset)
    n_a, n_e = dataset.Y.shape
    S = config.n_retained
    r = (design.r_d, design.r_a, design.r_e)
    out = {
        "beta_d": np.empty((S, r[0])), "beta_a": np.empty((S, r[1])), "beta_e": np.empty((S, r[2])),
        "mu_a": np.empty((S, n_a)), "mu_e": np.empty((S, n_e)),
        "u": np.empty((S, n_a, spec.t)), "v": np.empty((S, n_e, spec.t)),
        **{f"sigma2_{n}": np.empty(S) for n in ("a", "e", "gamma", "u", "v")},
        "deviance": np.empty(S), "iteration": np.empty(S, dtype=np.int64),
    }
    theta_draws = np.empty((S, n_a, n_e)) if config.keep_theta else None
    theta_sum = np.zeros((n_a, n_e))
    accepted = 0
    s = 0
    for it in range(config.n_iter):
        accepted += gibbs_sweep(state, dataset, priors, rng, design, iteration=it)
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            for name in ("beta_d", "beta_a", "beta_e", "mu_a", "mu_e", "u", "v"):
                out[name][s] = getattr(state, name)
            for n in ("a", "e", "gamma", "u", "v"):
                out[f"sigma2_{n}"][s] = getattr(state, f"sigma2_{n}")
            out["deviance"][s] = deviance(state.theta, dataset.Y)
            out["iteration"][s] = it
            theta_sum += state.theta
            if theta_draws is not None:
                theta_draws[s] = state.theta
            s += 1
        if (it + 1) % 1000 == 0:
            log.debug("chain %d: iteration %d/%d", chain, it + 1, config.n_iter)
    return PosteriorSamples(
        **out,
        theta_mean=theta_sum / S,
        y=np.asarray(dataset.Y),
        acceptance_rate_theta=accepted / (config.n_iter * n_a * n_e),
        beta_names={
            "beta_d": list(dataset.dyad_covariate_names),
            "beta_a": list(dataset.actor_covariate_names),
            "beta_e": list(dataset.event_covariate_names),
        },
        theta=theta_draws,
        chain=chain,
    )


def _run_chain_job(args):
    return run_chain(*args)


def run_chains(dataset, spec, priors, config: ChainConfig, n_jobs: int = 1) -> list[PosteriorSamples]:
    """Run ``config.n_chains`` independent chains, optionally in worker processes."""
    jobs = [(dataset, spec, priors, config, c) for c in range(config.n_chains)]
    if n_jobs == 1 or config.n_chains == 1:
        return [_run_chain_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(_run_chain_job, jobs))
