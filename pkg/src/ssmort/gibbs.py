"""Conjugate Gibbs sampler for the state-space mortality models.

Each iteration draws the latent factor path in one block via FFBS, imposes
the identification constraints, and then cycles through the static
parameters using their closed-form conditionals:

* Gaussian conditionals for the age level ``alpha``, the loadings ``beta``
  and ``beta_gamma``, the period drift ``theta`` and the cohort AR
  intercept ``eta``;
* a [-1, 1]-truncated Gaussian for the cohort AR coefficient ``lam``;
* inverse-gamma conditionals for the three innovation variances.

The update order within an iteration is: state block, factor centering,
``beta`` block + renormalization, ``beta_gamma`` block + renormalization
(full cohort model only), then ``alpha`` (by age), ``theta``, ``eta``,
``lam``, ``sigma2_eps``, ``sigma2_kappa``, ``sigma2_gamma``.  The order is
fixed for reproducibility; chains are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import truncnorm

from .lgssm import IllConditionedSystemError, ffbs_sample, kalman_filter
from .model import (
    DataPanel,
    DegenerateDrawError,
    ModelKind,
    ModelSpec,
    StatePath,
    StaticParams,
    build_system,
    center_state_path,
    normalize_sum_to_one,
)

__all__ = [
    "GaussianPrior",
    "InverseGammaPrior",
    "Hyperpriors",
    "SamplerConfig",
    "PosteriorChain",
    "SamplerError",
    "default_init",
    "sample_gaussian_posteriors",
    "sample_variance_posteriors",
    "run_chain",
    "conjugate_normal_posterior",
    "draw_truncated_normal",
    "draw_inverse_gamma",
    "effective_sample_size",
]


class SamplerError(RuntimeError):
    """An inner operation failed; carries the 1-based iteration index."""

    def __init__(self, iteration: int, message: str):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


@dataclass(frozen=True)
class GaussianPrior:
    mean: float
    var: float

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("prior variance must be positive")


@dataclass(frozen=True)
class InverseGammaPrior:
    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("inverse-gamma hyperparameters must be positive")


@dataclass(frozen=True)
class Hyperpriors:
    """Independent conjugate priors plus the filter initialization.

    ``init_mean`` / ``init_var`` may be scalars (broadcast over the state
    vector; ``init_var`` fills a diagonal covariance) or full arrays.
    Defaults are deliberately vague: N(0, 10) for every Gaussian prior,
    IG(2.01, 0.01) for every variance, and a N(0, 10 I) state seed.
    """

    alpha: GaussianPrior = GaussianPrior(0.0, 10.0)
    beta: GaussianPrior = GaussianPrior(0.0, 10.0)
    beta_gamma: GaussianPrior = GaussianPrior(0.0, 10.0)
    theta: GaussianPrior = GaussianPrior(0.0, 10.0)
    eta: GaussianPrior = GaussianPrior(0.0, 10.0)
    lam: GaussianPrior = GaussianPrior(0.0, 10.0)
    sigma2_eps: InverseGammaPrior = InverseGammaPrior(2.01, 0.01)
    sigma2_kappa: InverseGammaPrior = InverseGammaPrior(2.01, 0.01)
    sigma2_gamma: InverseGammaPrior = InverseGammaPrior(2.01, 0.01)
    init_mean: float | np.ndarray = 0.0
    init_var: float | np.ndarray = 10.0

    def filter_init(self, state_dim: int) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(np.asarray(self.init_mean, dtype=float), (state_dim,)).copy()
        var = np.asarray(self.init_var, dtype=float)
        cov = np.diag(np.broadcast_to(var, (state_dim,))) if var.ndim < 2 else var.copy()
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValueError("filter initialization covariance must be positive definite")
        return mean, cov


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, seed and priors for one sampler run.

    ``cohort_var_with_intercept`` controls whether the cohort innovation
    variance conditional subtracts the AR intercept from its residuals
    (consistent with the state equation); setting it False drops ``eta``
    from that one conditional.
    """

    iterations: int = 30_000
    burn_in: int = 15_000
    seed: int = 0
    thin: int = 1
    hyperpriors: Hyperpriors = field(default_factory=Hyperpriors)
    init: StaticParams | None = None
    cohort_var_with_intercept: bool = True

    def __post_init__(self):
        if self.iterations <= 0 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("iterations > 0, burn_in >= 0 and thin >= 1 required")
        if self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")


@dataclass
class PosteriorChain:
    """Stored post-burn-in draws, one row per kept iteration.

    Vector parameters are (L, p) arrays; scalar parameters (L,) arrays;
    latent paths an (L, n+1, d) array.  Cohort-only fields are ``None``
    for Lee-Carter chains, and ``beta_gamma`` is ``None`` for the
    simplified cohort model (pinned to ones).
    """

    spec: ModelSpec
    config: SamplerConfig
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    sigma2_eps: np.ndarray
    sigma2_kappa: np.ndarray
    states: np.ndarray
    beta_gamma: np.ndarray | None = None
    eta: np.ndarray | None = None
    lam: np.ndarray | None = None
    sigma2_gamma: np.ndarray | None = None

    def __len__(self) -> int:
        return self.theta.shape[0]

    def params_at(self, i: int) -> StaticParams:
        kind = self.spec.kind
        if kind is ModelKind.LC:
            cohort: dict = {}
        else:
            p = self.spec.window.n_ages
            bg = np.ones(p) if self.beta_gamma is None else self.beta_gamma[i]
            cohort = dict(
                beta_gamma=bg,
                eta=float(self.eta[i]),
                lam=float(self.lam[i]),
                sigma2_gamma=float(self.sigma2_gamma[i]),
            )
        return StaticParams(
            alpha=self.alpha[i],
            beta=self.beta[i],
            theta=float(self.theta[i]),
            sigma2_eps=float(self.sigma2_eps[i]),
            sigma2_kappa=float(self.sigma2_kappa[i]),
            **cohort,
        )

    def path_at(self, i: int) -> StatePath:
        return StatePath(self.states[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self.params_at(i), self.path_at(i)

    def posterior_mean_params(self) -> StaticParams:
        kind = self.spec.kind
        if kind is ModelKind.LC:
            cohort = {}
        else:
            p = self.spec.window.n_ages
            bg = np.ones(p) if self.beta_gamma is None else self.beta_gamma.mean(axis=0)
            cohort = dict(
                beta_gamma=bg,
                eta=float(self.eta.mean()),
                lam=float(self.lam.mean()),
                sigma2_gamma=float(self.sigma2_gamma.mean()),
            )
        return StaticParams(
            alpha=self.alpha.mean(axis=0),
            beta=self.beta.mean(axis=0),
            theta=float(self.theta.mean()),
            sigma2_eps=float(self.sigma2_eps.mean()),
            sigma2_kappa=float(self.sigma2_kappa.mean()),
            **cohort,
        )

    def posterior_mean_path(self) -> StatePath:
        return StatePath(self.states.mean(axis=0))

    def scalar_names(self) -> list[str]:
        names = ["theta", "sigma2_eps", "sigma2_kappa"]
        if self.spec.kind.has_cohort:
            names = ["theta", "eta", "lam", "sigma2_eps", "sigma2_kappa", "sigma2_gamma"]
        return names

    def scalar_series(self, name: str) -> np.ndarray:
        series = getattr(self, name)
        if series is None:
            raise KeyError(f"{name} is not sampled for {self.spec.kind.value}")
        return series

    def summary(self, level: float = 0.95) -> list[tuple[str, float, float, float, float]]:
        """Per-parameter posterior mean, credible interval and effective
        sample size; one row per scalar, covering loadings, the period
        factor by year and the cohort factor by birth year."""
        lo_q, hi_q = 0.5 * (1 - level), 0.5 * (1 + level)
        window = self.spec.window
        rows: list[tuple[str, float, float, float, float]] = []

        def add(name: str, series: np.ndarray) -> None:
            rows.append(
                (
                    name,
                    float(series.mean()),
                    float(np.quantile(series, lo_q)),
                    float(np.quantile(series, hi_q)),
                    effective_sample_size(series),
                )
            )

        for i, age in enumerate(window.ages):
            add(f"alpha_{age}", self.alpha[:, i])
        for i, age in enumerate(window.ages):
            add(f"beta_{age}", self.beta[:, i])
        if self.beta_gamma is not None:
            for i, age in enumerate(window.ages):
                add(f"beta_gamma_{age}", self.beta_gamma[:, i])
        for name in self.scalar_names():
            add(name, self.scalar_series(name))
        for j in range(self.states.shape[1]):
            add(f"kappa_{window.years[0] - 1 + j}", self.states[:, j, 0])
        if self.spec.kind.has_cohort:
            x1, xp = int(window.ages[0]), int(window.ages[-1])
            t1 = int(window.years[0])
            for c in window.cohorts:
                t_latest = min(int(window.years[-1]), c + xp)
                j, i = t_latest - (t1 - 1), t_latest - c - x1
                add(f"gamma_{c}", self.states[:, j, 1 + i])
        return rows


def effective_sample_size(series: np.ndarray) -> float:
    """ESS via the initial-positive-sequence autocorrelation estimator."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 3:
        return float(n)
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return float(n)
    acf = np.correlate(x, x, mode="full")[n - 1 :] / (n * var)
    tail = acf[1:]
    negative = np.nonzero(tail < 0)[0]
    cut = negative[0] if negative.size else tail.size
    tau = 1.0 + 2.0 * float(tail[:cut].sum())
    return float(n / max(tau, 1.0))


def default_init(spec: ModelSpec, panel: DataPanel) -> StaticParams:
    """Starting point for the chain: per-age mean log rate for ``alpha``,
    flat loadings, mildly negative drifts and small variances."""
    p = spec.window.n_ages
    common = dict(
        alpha=panel.log_rates.mean(axis=1),
        beta=np.full(p, 1.0 / p),
        theta=-0.1,
        sigma2_eps=0.01,
        sigma2_kappa=0.01,
    )
    if spec.kind is ModelKind.LC:
        return StaticParams(**common)
    bg = np.ones(p) if spec.kind is ModelKind.SIMPLIFIED_COHORT else np.full(p, 1.0 / p)
    return StaticParams(**common, beta_gamma=bg, eta=-0.1, lam=0.5, sigma2_gamma=0.01)


def conjugate_normal_posterior(
    stat_sum, stat_weight, noise_var: float, prior: GaussianPrior
):
    """Posterior (mean, var) for a scalar Gaussian location with known
    noise variance: likelihood sufficient statistics enter as
    ``stat_sum`` (weighted residual sum) and ``stat_weight`` (sum of
    squared regressors, or the count for pure location parameters)."""
    denom = prior.var * stat_weight + noise_var
    mean = (prior.var * stat_sum + prior.mean * noise_var) / denom
    var = prior.var * noise_var / denom
    return mean, var


def draw_truncated_normal(
    mean: float, var: float, low: float, high: float, rng: np.random.Generator
) -> float:
    sd = float(np.sqrt(var))
    a, b = (low - mean) / sd, (high - mean) / sd
    return float(truncnorm.rvs(a, b, loc=mean, scale=sd, random_state=rng))


def draw_inverse_gamma(shape: float, scale: float, rng: np.random.Generator) -> float:
    return float(scale / rng.gamma(shape, 1.0))


def _gamma_grid(path: StatePath, spec: ModelSpec) -> np.ndarray:
    """Cohort-factor values aligned to the data grid: (p, n) array of
    gamma^{x_i}_t for t = 1..n; zeros for Lee-Carter."""
    p, n = spec.window.n_ages, spec.window.n_years
    if spec.kind is ModelKind.LC:
        return np.zeros((p, n))
    return path.gamma[1:].T


def sample_gaussian_posteriors(
    panel: DataPanel,
    path: StatePath,
    params: StaticParams,
    spec: ModelSpec,
    priors: Hyperpriors,
    rng: np.random.Generator,
) -> StaticParams:
    """Draw the location-type parameters from their conditionals.

    Order: ``beta`` block then renormalization, ``beta_gamma`` block then
    renormalization (full cohort model), ``alpha`` by age, ``theta``,
    ``eta``, ``lam``.  Each draw conditions on the most recent values of
    the other parameters.
    """
    y = panel.log_rates
    n = spec.window.n_years
    kappa = path.kappa[1:]
    gamma = _gamma_grid(path, spec)
    s2e = params.sigma2_eps

    alpha, bg = params.alpha, params.beta_gamma
    if spec.kind is ModelKind.LC:
        bg_term = np.zeros_like(y)
    else:
        bg_term = bg[:, None] * gamma

    # beta block: conditionally independent across ages given the rest
    resid = y - alpha[:, None] - bg_term
    mean, var = conjugate_normal_posterior(
        resid @ kappa, float(kappa @ kappa), s2e, priors.beta
    )
    beta = normalize_sum_to_one(rng.normal(mean, np.sqrt(var)), "beta")

    beta_gamma = bg
    if spec.kind is ModelKind.FULL_COHORT:
        resid = y - alpha[:, None] - beta[:, None] * kappa
        mean, var = conjugate_normal_posterior(
            np.sum(resid * gamma, axis=1), np.sum(gamma * gamma, axis=1), s2e, priors.beta_gamma
        )
        beta_gamma = normalize_sum_to_one(rng.normal(mean, np.sqrt(var)), "beta_gamma")
        bg_term = beta_gamma[:, None] * gamma

    resid = y - beta[:, None] * kappa - bg_term
    mean, var = conjugate_normal_posterior(resid.sum(axis=1), n, s2e, priors.alpha)
    alpha = rng.normal(mean, np.sqrt(var))

    dkappa = np.diff(path.kappa)
    mean, var = conjugate_normal_posterior(float(dkappa.sum()), n, params.sigma2_kappa, priors.theta)
    theta = float(rng.normal(mean, np.sqrt(var)))

    updates = dict(alpha=alpha, beta=beta, theta=theta)
    if spec.kind.has_cohort:
        g1 = path.gamma[:, 0]
        s2g = params.sigma2_gamma
        mean, var = conjugate_normal_posterior(
            float(np.sum(g1[1:] - params.lam * g1[:-1])), n, s2g, priors.eta
        )
        eta = float(rng.normal(mean, np.sqrt(var)))
        mean, var = conjugate_normal_posterior(
            float((g1[1:] - eta) @ g1[:-1]), float(g1[:-1] @ g1[:-1]), s2g, priors.lam
        )
        lam = draw_truncated_normal(mean, var, -1.0, 1.0, rng)
        updates.update(beta_gamma=beta_gamma, eta=eta, lam=lam)
    return replace(params, **updates)


def sample_variance_posteriors(
    panel: DataPanel,
    path: StatePath,
    params: StaticParams,
    spec: ModelSpec,
    priors: Hyperpriors,
    rng: np.random.Generator,
    cohort_var_with_intercept: bool = True,
) -> StaticParams:
    """Draw the three innovation variances from their inverse-gamma
    conditionals (observation noise, period innovation, cohort
    innovation), in that order."""
    y = panel.log_rates
    p, n = spec.window.n_ages, spec.window.n_years
    gamma = _gamma_grid(path, spec)
    bg = params.beta_gamma if params.beta_gamma is not None else np.zeros(p)

    fit = params.alpha[:, None] + params.beta[:, None] * path.kappa[1:] + bg[:, None] * gamma
    resid2 = float(np.sum((y - fit) ** 2))
    s2e = draw_inverse_gamma(
        priors.sigma2_eps.shape + 0.5 * n * p, priors.sigma2_eps.scale + 0.5 * resid2, rng
    )

    innov = np.diff(path.kappa) - params.theta
    s2k = draw_inverse_gamma(
        priors.sigma2_kappa.shape + 0.5 * n,
        priors.sigma2_kappa.scale + 0.5 * float(innov @ innov),
        rng,
    )

    updates = dict(sigma2_eps=s2e, sigma2_kappa=s2k)
    if spec.kind.has_cohort:
        g1 = path.gamma[:, 0]
        innov = g1[1:] - params.lam * g1[:-1]
        if cohort_var_with_intercept:
            innov = innov - params.eta
        updates["sigma2_gamma"] = draw_inverse_gamma(
            priors.sigma2_gamma.shape + 0.5 * n,
            priors.sigma2_gamma.scale + 0.5 * float(innov @ innov),
            rng,
        )
    return replace(params, **updates)


def run_chain(spec: ModelSpec, panel: DataPanel, config: SamplerConfig) -> PosteriorChain:
    """Run the full sampler and return the post-burn-in draws.

    Per iteration: FFBS state block, factor centering, loading blocks with
    renormalization, remaining static parameters, variances.  Every stored
    draw satisfies the identification constraints and the cohort-shift
    identity.  Deterministic given ``config.seed``.
    """
    if not np.array_equal(panel.window.ages, spec.window.ages) or not np.array_equal(
        panel.window.years, spec.window.years
    ):
        raise ValueError("panel window does not match model spec window")

    p, n, d = spec.window.n_ages, spec.window.n_years, spec.state_dim
    params = config.init if config.init is not None else default_init(spec, panel)
    params.validate(spec)
    priors = config.hyperpriors
    init = priors.filter_init(d)
    rng = np.random.default_rng(config.seed)

    kept = range(config.burn_in + 1, config.iterations + 1, config.thin)
    n_keep = len(kept)
    store = {
        "alpha": np.empty((n_keep, p)),
        "beta": np.empty((n_keep, p)),
        "theta": np.empty(n_keep),
        "sigma2_eps": np.empty(n_keep),
        "sigma2_kappa": np.empty(n_keep),
        "states": np.empty((n_keep, n + 1, d)),
    }
    if spec.kind.has_cohort:
        store["eta"] = np.empty(n_keep)
        store["lam"] = np.empty(n_keep)
        store["sigma2_gamma"] = np.empty(n_keep)
        if spec.kind is ModelKind.FULL_COHORT:
            store["beta_gamma"] = np.empty((n_keep, p))

    kept_idx = {it: k for k, it in enumerate(kept)}
    for i in range(1, config.iterations + 1):
        try:
            sys = build_system(spec, params)
            flt = kalman_filter(panel, sys, init)
            path = center_state_path(ffbs_sample(flt, sys, rng), spec)
            params = sample_gaussian_posteriors(panel, path, params, spec, priors, rng)
            params = sample_variance_posteriors(
                panel, path, params, spec, priors, rng, config.cohort_var_with_intercept
            )
        except (IllConditionedSystemError, DegenerateDrawError, np.linalg.LinAlgError) as exc:
            raise SamplerError(i, str(exc)) from exc

        k = kept_idx.get(i)
        if k is not None:
            store["alpha"][k] = params.alpha
            store["beta"][k] = params.beta
            store["theta"][k] = params.theta
            store["sigma2_eps"][k] = params.sigma2_eps
            store["sigma2_kappa"][k] = params.sigma2_kappa
            store["states"][k] = path.states
            if spec.kind.has_cohort:
                store["eta"][k] = params.eta
                store["lam"][k] = params.lam
                store["sigma2_gamma"][k] = params.sigma2_gamma
                if spec.kind is ModelKind.FULL_COHORT:
                    store["beta_gamma"][k] = params.beta_gamma

    return PosteriorChain(spec=spec, config=config, **store)
