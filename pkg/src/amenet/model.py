"""Bilinear mixed-effects model for binary affiliation networks.

The linear predictor for dyad (i, k) is

    theta_ik = beta_d' x_ik + mu_a[i] + mu_e[k] + gamma_ik + u_i' v_k

with mu_a = X_a beta_a + a, mu_e = X_e beta_e + e, Gaussian random effects
and a logit link. Vectorization of (i, k) matrices is column-major
(``order="F"``): dyad (i, k) sits at row ``i + k * n_a``.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._rng import substream
from .data import AffiliationDataset
from .errors import DataError

FAMILIES = ("bernoulli-logit",)
VARIANCE_NAMES = ("a", "e", "gamma", "u", "v")


@dataclass(frozen=True)
class ModelSpec:
    t: int = 2
    family: str = "bernoulli-logit"
    sigma_gamma_fixed: float = 1.0
    base_levels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t < 0:
            raise DataError(f"latent dimension t must be >= 0, got {self.t}")
        if self.family not in FAMILIES:
            raise DataError(f"unsupported family {self.family!r}; supported: {FAMILIES}")
        if not self.sigma_gamma_fixed > 0:
            raise DataError("sigma_gamma must be > 0")


@dataclass(frozen=True)
class Priors:
    """Normal priors on regression coefficients, inverse-gamma (shape, scale) on variances."""

    beta_d_mean: np.ndarray
    beta_d_cov: np.ndarray
    beta_ae_mean: np.ndarray
    beta_ae_cov: np.ndarray
    ig: dict = field(default_factory=lambda: {n: (1.0, 1.0) for n in VARIANCE_NAMES})

    def __post_init__(self):
        for name in ("beta_d", "beta_ae"):
            mean = np.atleast_1d(np.asarray(getattr(self, f"{name}_mean"), dtype=float))
            cov = np.atleast_2d(np.asarray(getattr(self, f"{name}_cov"), dtype=float))
            if mean.size == 0:
                cov = np.zeros((0, 0))
            if cov.shape != (mean.size, mean.size):
                raise DataError(f"{name} prior covariance shape {cov.shape} does not match mean")
            if mean.size:
                if not np.allclose(cov, cov.T):
                    raise DataError(f"{name} prior covariance is not symmetric")
                if np.linalg.eigvalsh(cov).min() <= 0:
                    raise DataError(f"{name} prior covariance is not positive definite")
            object.__setattr__(self, f"{name}_mean", mean)
            object.__setattr__(self, f"{name}_cov", cov)
        ig = {n: (1.0, 1.0) for n in VARIANCE_NAMES}
        ig.update(self.ig)
        for n, (a, b) in ig.items():
            if n not in VARIANCE_NAMES:
                raise DataError(f"unknown variance name {n!r}")
            if not (a > 0 and b > 0):
                raise DataError(f"IG prior for sigma2_{n} needs shape, scale > 0")
        object.__setattr__(self, "ig", {n: (float(a), float(b)) for n, (a, b) in ig.items()})

    @classmethod
    def default(cls, r_d: int, r_a: int, r_e: int, beta_sd: float = 1.0, ig=None):
        """MVN(0, sd^2 I) on every beta, IG(1, 1) on every variance unless overridden."""
        r_ae = r_a + r_e
        return cls(
            beta_d_mean=np.zeros(r_d),
            beta_d_cov=beta_sd**2 * np.eye(r_d),
            beta_ae_mean=np.zeros(r_ae),
            beta_ae_cov=beta_sd**2 * np.eye(r_ae),
            ig=dict(ig or {}),
        )

    @classmethod
    def for_dataset(cls, dataset: AffiliationDataset, beta_sd: float = 1.0, ig=None):
        return cls.default(
            dataset.dyad_covariates.shape[2],
            dataset.actor_covariates.shape[1],
            dataset.event_covariates.shape[1],
            beta_sd=beta_sd,
            ig=ig,
        )


@dataclass
class ChainState:
    beta_d: np.ndarray
    mu_a: np.ndarray
    mu_e: np.ndarray
    beta_a: np.ndarray
    beta_e: np.ndarray
    sigma2_a: float
    sigma2_e: float
    sigma2_gamma: float
    sigma2_u: float
    sigma2_v: float
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray

    @property
    def t(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "ChainState":
        return dataclasses.replace(
            self, **{f.name: np.array(getattr(self, f.name)) for f in dataclasses.fields(self)
                     if isinstance(getattr(self, f.name), np.ndarray)}
        )

    def validate(self, dataset: AffiliationDataset | None = None):
        for n in VARIANCE_NAMES:
            if not getattr(self, f"sigma2_{n}") > 0:
                raise DataError(f"sigma2_{n} must be > 0")
        if self.u.shape[1] != self.v.shape[1]:
            raise DataError("u and v must share the latent dimension")
        if dataset is not None:
            n_a, n_e = dataset.Y.shape
            expected = {
                "beta_d": (dataset.dyad_covariates.shape[2],),
                "mu_a": (n_a,),
                "mu_e": (n_e,),
                "beta_a": (dataset.actor_covariates.shape[1],),
                "beta_e": (dataset.event_covariates.shape[1],),
                "theta": (n_a, n_e),
            }
            for name, shape in expected.items():
                if np.shape(getattr(self, name)) != shape:
                    raise DataError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
            if self.u.shape[0] != n_a or self.v.shape[0] != n_e:
                raise DataError("u/v row counts do not match the dataset")


# ---------------------------------------------------------------- predictor / likelihood


def linear_predictor(state: ChainState, dataset: AffiliationDataset, i: int, k: int) -> float:
    """gamma-free mean of theta_ik, the centre of the theta proposal."""
    n_a, n_e = dataset.Y.shape
    if not (0 <= i < n_a and 0 <= k < n_e):
        raise IndexError(f"dyad ({i}, {k}) out of range for {n_a} x {n_e} network")
    return float(
        dataset.dyad_covariates[i, k] @ state.beta_d
        + state.mu_a[i]
        + state.mu_e[k]
        + state.u[i] @ state.v[k]
    )


def fixed_part(state: ChainState, dataset: AffiliationDataset) -> np.ndarray:
    """beta_d' x_ik + mu_a[i] + mu_e[k] for all dyads."""
    return dataset.dyad_covariates @ state.beta_d + state.mu_a[:, None] + state.mu_e[None, :]


def mean_predictor(state: ChainState, dataset: AffiliationDataset) -> np.ndarray:
    return fixed_part(state, dataset) + state.u @ state.v.T


def log_likelihood(theta, y):
    """Bernoulli-logit log-likelihood y*theta - log(1 + e^theta), elementwise."""
    theta = np.asarray(theta, dtype=float)
    out = np.asarray(y) * theta - np.logaddexp(0.0, theta)
    return float(out) if out.ndim == 0 else out


def deviance(theta, Y) -> float:
    """-2 times the Bernoulli-logit log-likelihood of Y at theta."""
    return float(-2.0 * np.sum(log_likelihood(theta, Y)))


def build_design_matrix(dataset: AffiliationDataset) -> sp.csr_matrix:
    """Sparse X_D mapping (beta_d, mu_a, mu_e) to vec(fixed part), column-major dyads."""
    n_a, n_e = dataset.Y.shape
    r_d = dataset.dyad_covariates.shape[2]
    n = n_a * n_e
    rows = np.arange(n)
    # column-major vec: row i + k * n_a
    i_idx = rows % n_a
    k_idx = rows // n_a
    Xd = dataset.dyad_covariates.transpose(1, 0, 2).reshape(n, r_d)
    dyad = sp.csr_matrix(Xd)
    actor = sp.csr_matrix((np.ones(n), (rows, i_idx)), shape=(n, n_a))
    event = sp.csr_matrix((np.ones(n), (rows, k_idx)), shape=(n, n_e))
    return sp.hstack([dyad, actor, event], format="csr")


def vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M).reshape(-1, order="F")


def bilinear_moments(t: int, sigma2_u: float, sigma2_v: float) -> dict:
    """E(eps^2) and the tetrad moment E(eps_ik eps_jk eps_jl eps_il) for eps = u_i' v_k."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return {"second": t * sigma2_u * sigma2_v, "fourth": t * sigma2_u**2 * sigma2_v**2}


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class TrueParams:
    """Fixed parameter values for simulation. Zero variances are allowed here."""

    beta_d: tuple = (0.0,)
    beta_a: tuple = ()
    beta_e: tuple = ()
    sigma2_a: float = 1.0
    sigma2_e: float = 1.0
    sigma2_gamma: float = 1.0
    sigma2_u: float = 1.0
    sigma2_v: float = 1.0


class Simulation(NamedTuple):
    dataset: AffiliationDataset
    truth: ChainState


def _draw_ig(rng, shape, scale):
    return scale / rng.gamma(shape)


def expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def draw_from_prior(spec: ModelSpec, priors: Priors, rng, sample_sigma_gamma=False):
    """Draw (beta_d, beta_ae, variances dict, sigma2_gamma) from the prior."""
    r_a_e = priors.beta_ae_mean.size
    beta_d = rng.multivariate_normal(priors.beta_d_mean, priors.beta_d_cov) if priors.beta_d_mean.size else np.zeros(0)
    beta_ae = rng.multivariate_normal(priors.beta_ae_mean, priors.beta_ae_cov) if r_a_e else np.zeros(0)
    s2 = {n: _draw_ig(rng, *priors.ig[n]) for n in ("a", "e", "u", "v")}
    s2g = _draw_ig(rng, *priors.ig["gamma"]) if sample_sigma_gamma else spec.sigma_gamma_fixed
    return beta_d, beta_ae, s2, s2g


def simulate_network(
    spec: ModelSpec,
    params,
    n_a: int,
    n_e: int,
    actor_covariates=None,
    event_covariates=None,
    seed: int | None = None,
    actor_marks=None,
) -> Simulation:
    """Draw a binary network from the model.

    ``params`` is either a ``TrueParams`` (fixed values) or a ``Priors`` object,
    in which case coefficients and variances are drawn from it first. The
    dyad term gamma enters as N(0, sigma2_gamma) noise on theta.
    """
    rng = substream(seed, "simulate")
    X_a = np.zeros((n_a, 0)) if actor_covariates is None else np.asarray(actor_covariates, float)
    X_e = np.zeros((n_e, 0)) if event_covariates is None else np.asarray(event_covariates, float)
    r_a, r_e = X_a.shape[1], X_e.shape[1]
    if isinstance(params, Priors):
        beta_d, beta_ae, s2, s2g = draw_from_prior(spec, params, rng)
        beta_a, beta_e = beta_ae[:r_a], beta_ae[r_a:]
    else:
        beta_d = np.atleast_1d(np.asarray(params.beta_d, float))
        beta_a = np.asarray(params.beta_a, float).reshape(-1)
        beta_e = np.asarray(params.beta_e, float).reshape(-1)
        s2 = {"a": params.sigma2_a, "e": params.sigma2_e, "u": params.sigma2_u, "v": params.sigma2_v}
        s2g = params.sigma2_gamma
    if beta_a.size != r_a or beta_e.size != r_e:
        raise DataError("coefficient lengths do not match covariate columns")
    if beta_d.size != 1:
        raise DataError("simulation supports intercept-only dyad covariates")
    if min(*s2.values(), s2g) < 0:
        raise DataError("variances must be >= 0")

    t = spec.t
    mu_a = X_a @ beta_a + np.sqrt(s2["a"]) * rng.standard_normal(n_a)
    mu_e = X_e @ beta_e + np.sqrt(s2["e"]) * rng.standard_normal(n_e)
    u = np.sqrt(s2["u"]) * rng.standard_normal((n_a, t))
    v = np.sqrt(s2["v"]) * rng.standard_normal((n_e, t))
    mean = beta_d[0] + mu_a[:, None] + mu_e[None, :] + u @ v.T
    theta = mean + np.sqrt(s2g) * rng.standard_normal((n_a, n_e))
    Y = (rng.random((n_a, n_e)) < expit(theta)).astype(np.int8)

    dataset = AffiliationDataset.from_matrix(
        Y, actor_covariates=X_a, event_covariates=X_e, actor_marks=actor_marks
    )
    truth = ChainState(
        beta_d=beta_d, mu_a=mu_a, mu_e=mu_e, beta_a=beta_a, beta_e=beta_e,
        sigma2_a=s2["a"], sigma2_e=s2["e"], sigma2_gamma=s2g, sigma2_u=s2["u"], sigma2_v=s2["v"],
        u=u, v=v, theta=theta,
    )
    return Simulation(dataset, truth)


# ---------------------------------------------------------------- configuration


def read_config(path):
    """Parse a ``key = value`` model configuration into ``(ModelSpec, beta_sd, ig)``.

    Recognised keys: ``t``, ``family``, ``sigma_gamma``, ``prior.beta.sd``,
    ``prior.ig.<name>.shape``, ``prior.ig.<name>.scale`` and
    ``base_levels.<covariate>``.
    """
    text = Path(path).read_text(encoding="utf-8") if path is not None else ""
    return parse_config(text, source=str(path))


def parse_config(text: str, source: str = "<config>"):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[model]\n" + text, source=source)
    except configparser.Error as exc:
        raise DataError(f"{source}: {exc}") from None
    kv = dict(cp["model"])
    spec_kw, ig, base_levels = {}, {}, {}
    beta_sd = 1.0
    for key, raw in kv.items():
        try:
            if key == "t":
                spec_kw["t"] = int(raw)
            elif key == "family":
                spec_kw["family"] = raw.strip()
            elif key == "sigma_gamma":
                spec_kw["sigma_gamma_fixed"] = float(raw)
            elif key == "prior.beta.sd":
                beta_sd = float(raw)
            elif key.startswith("prior.ig."):
                _, _, name, part = key.split(".")
                if name not in VARIANCE_NAMES or part not in ("shape", "scale"):
                    raise KeyError(key)
                shape, scale = ig.get(name, (1.0, 1.0))
                ig[name] = (float(raw), scale) if part == "shape" else (shape, float(raw))
            elif key.startswith("base_levels."):
                base_levels[key.split(".", 1)[1]] = raw.strip()
            else:
                raise KeyError(key)
        except KeyError:
            raise DataError(f"{source}: unknown configuration key '{key}'") from None
        except ValueError:
            raise DataError(f"{source}: bad value for '{key}': {raw!r}") from None
    if not beta_sd > 0:
        raise DataError(f"{source}: prior.beta.sd must be > 0")
    spec = ModelSpec(base_levels=base_levels, **spec_kw)
    return spec, beta_sd, ig
