"""Metropolis-within-Gibbs chains for the hierarchical classification
posteriors: a smoothness (or length-scale) random-walk block alternating
with a preconditioned Crank-Nicolson move on the whitened field.

Both priors share one driver.  The state carries standard-normal white
noise xi; a prior-specific transform maps (hyper, xi) to the latent
field on the grid.  For the Besov-Laplace prior the transform is the
coordinate-wise whitening map followed by wavelet synthesis (wpCN); for
the Gaussian comparator it is the Cholesky factor of the squared-
exponential covariance (standard pCN in non-centered form).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, LikelihoodEvaluator
from .priors import (
    GaussianComparatorSpec,
    SmoothnessHyperPrior,
    cholesky_with_jitter,
    sq_exp_covariance,
    whiten_values,
)
from .summaries import (
    PosteriorSummary,
    StoredDrawsAccumulator,
    StreamingAccumulator,
)
from .wavelets import WaveletBasis, grid_points

__all__ = [
    "SamplerConfig",
    "ChainState",
    "ChainDivergedError",
    "LaplaceChainSpec",
    "GaussianChainSpec",
    "hyper_step",
    "wpcn_step",
    "run_chain",
]

DELTA1_CLAMP = (0.01, 10.0)
DELTA2_CLAMP = (0.001, 0.05)  # paper-tuned wpCN/pCN step-size range


class ChainDivergedError(RuntimeError):
    """Raised when the log-likelihood turns NaN; carries a state dump."""


@dataclass
class SamplerConfig:
    delta1: float = 0.5
    delta2: float = 0.01
    iterations: int = 25000
    burn_in: int = 10000
    thinning: int = 1
    adapt: bool = True
    target_accept: float = 0.30
    adapt_window: int = 50
    adapt_rate: float = 0.5
    alpha_init: float | None = None
    seed: int | np.random.SeedSequence = 0
    streaming: bool = False
    trace_every: int = 0
    trace_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.delta2 < 0.5:
            raise ValueError("delta2 must lie in (0, 1/2)")
        if self.delta1 <= 0.0:
            raise ValueError("delta1 must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target acceptance must lie in (0,1)")


@dataclass
class ChainState:
    """Current (hyper, xi) with the derived field and cached likelihood.

    ``omega`` holds the whitened-coefficient image T_alpha(xi) for the
    Laplace chain (None for the Gaussian chain, whose transform is
    linear in xi).
    """

    hyper: float
    xi: np.ndarray
    omega: np.ndarray | None
    w_grid: np.ndarray
    loglik: float


# -- prior-specific strategies -------------------------------------------------

@dataclass
class LaplaceChainSpec:
    """Hierarchical rescaled Besov-Laplace prior in whitened form."""

    basis: WaveletBasis
    prior_n: int
    laplace_scale: float = 1.0
    alpha_fixed: float | None = None

    def build(self):
        return _LaplaceStrategy(self)


class _LaplaceStrategy:
    def __init__(self, spec: LaplaceChainSpec):
        self.basis = spec.basis
        self.d = spec.basis.dimension
        self.n = spec.prior_n
        self.scale = spec.laplace_scale
        self.alpha_fixed = spec.alpha_fixed
        self.hyperprior = (
            None if spec.alpha_fixed is not None
            else SmoothnessHyperPrior(spec.prior_n, self.d)
        )
        self.latent_dim = spec.basis.truncation
        self.grid_dim = spec.basis.grid_size
        self.grid_level = spec.basis.max_level
        self.grid_dimension = spec.basis.dimension
        self._pad = np.zeros(spec.basis.grid_size)
        self._sqrt_n = np.sqrt(spec.basis.grid_size)

    def field(self, hyper: float, xi: np.ndarray):
        omega = whiten_values(xi, hyper, self.n, self.d, self.scale)
        self._pad[: self.latent_dim] = omega
        w = self.basis._synthesize_full(self._pad) * self._sqrt_n
        return w, omega

    def hyper_logprior(self, hyper: float) -> float:
        return self.hyperprior.logdensity(hyper)

    def init_hyper(self, cfg: SamplerConfig) -> float:
        if self.alpha_fixed is not None:
            return self.alpha_fixed
        if cfg.alpha_init is not None:
            return cfg.alpha_init
        lo, hi = self.hyperprior.support
        cold = self.d + 1.0
        return cold if lo < cold <= hi else 0.5 * (lo + hi)

    def trace_value(self, hyper: float) -> float:
        return hyper


@dataclass
class GaussianChainSpec:
    """Hierarchical squared-exponential GP comparator; the hyper block
    walks log A with the exact change-of-variables density."""

    gp: GaussianComparatorSpec
    a_init: float = 1.0
    a_fixed: float | None = None

    def build(self):
        return _GaussianStrategy(self)


class _GaussianStrategy:
    def __init__(self, spec: GaussianChainSpec):
        self.gp = spec.gp
        self.d = spec.gp.dimension
        self.alpha_fixed = None if spec.a_fixed is None else np.log(spec.a_fixed)
        self.a_init = spec.a_init
        self.latent_dim = spec.gp.grid_size
        self.grid_dim = spec.gp.grid_size
        self.grid_level = spec.gp.max_level
        self.grid_dimension = spec.gp.dimension
        self._axis_pts = grid_points(1, spec.gp.max_level)
        self._chol_cache: dict[float, np.ndarray] = {}

    def _chol(self, theta: float) -> np.ndarray:
        L = self._chol_cache.get(theta)
        if L is None:
            cov = sq_exp_covariance(self._axis_pts, np.exp(theta))
            L = cholesky_with_jitter(cov, self.gp.jitter_rel, self.gp.jitter_rel_max)
            if len(self._chol_cache) >= 4:
                self._chol_cache.pop(next(iter(self._chol_cache)))
            self._chol_cache[theta] = L
        return L

    def field(self, hyper: float, xi: np.ndarray):
        L = self._chol(hyper)
        if self.d == 1:
            return L @ xi, None
        m = L.shape[0]
        return (L @ xi.reshape(m, m) @ L.T).reshape(-1), None

    def hyper_logprior(self, theta: float) -> float:
        # density of theta = log A when A^d ~ Exp(1)
        return np.log(self.d) + self.d * theta - np.exp(self.d * theta)

    def init_hyper(self, cfg: SamplerConfig) -> float:
        if self.alpha_fixed is not None:
            return self.alpha_fixed
        if cfg.alpha_init is not None:
            return np.log(cfg.alpha_init)
        return np.log(self.a_init)

    def trace_value(self, hyper: float) -> float:
        return float(np.exp(hyper))


# -- Metropolis blocks ----------------------------------------------------------

def hyper_step(state: ChainState, strategy, loglik_fn, delta1: float, rng):
    """Random-walk MH on the hyperparameter given the white noise.

    Proposals outside the hyper-prior support are rejected outright
    (the support is open at its lower end, so no clamping atom).
    """
    z = rng.standard_normal()
    u = rng.random()
    prop = state.hyper + delta1 * z
    lp_prop = strategy.hyper_logprior(prop)
    if lp_prop == -np.inf:
        return state, False
    w_prop, omega_prop = strategy.field(prop, state.xi)
    ll_prop = loglik_fn(w_prop)
    if np.isnan(ll_prop):
        raise ChainDivergedError(_dump("hyper", state, prop, ll_prop))
    log_acc = (ll_prop - state.loglik) + (lp_prop - strategy.hyper_logprior(state.hyper))
    if np.log(u) < log_acc:
        return (
            ChainState(prop, state.xi, omega_prop, w_prop, ll_prop),
            True,
        )
    return state, False


def wpcn_step(state: ChainState, strategy, loglik_fn, delta2: float, rng):
    """Whitened pCN move: xi* = sqrt(1-2 d2) xi + sqrt(2 d2) chi, accepted
    on the likelihood ratio, both sides evaluated at the current hyper."""
    chi = rng.standard_normal(state.xi.shape[0])
    u = rng.random()
    xi_prop = np.sqrt(1.0 - 2.0 * delta2) * state.xi + np.sqrt(2.0 * delta2) * chi
    w_prop, omega_prop = strategy.field(state.hyper, xi_prop)
    ll_prop = loglik_fn(w_prop)
    if np.isnan(ll_prop):
        raise ChainDivergedError(_dump("field", state, state.hyper, ll_prop))
    if np.log(u) < ll_prop - state.loglik:
        return (
            ChainState(state.hyper, xi_prop, omega_prop, w_prop, ll_prop),
            True,
        )
    return state, False


def _dump(block: str, state: ChainState, prop, ll) -> str:
    return (
        f"NaN log-likelihood in {block} block: hyper={state.hyper!r}, "
        f"proposal={prop!r}, cached loglik={state.loglik!r}, "
        f"max|xi|={float(np.max(np.abs(state.xi)))!r}"
    )


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _clamp(x: float, bounds: tuple[float, float]) -> float:
    return min(max(x, bounds[0]), bounds[1])


def run_chain(
    prior_kind: str,
    data: Dataset,
    cfg: SamplerConfig,
    spec: LaplaceChainSpec | GaussianChainSpec,
) -> PosteriorSummary:
    """Run the two-block chain and summarize post-burn-in draws.

    Step sizes adapt by Robbins-Monro on the log scale during burn-in
    (frozen afterwards), targeting cfg.target_accept; delta2 is clamped
    to the tuned range DELTA2_CLAMP.
    """
    if prior_kind not in ("laplace", "gaussian"):
        raise ValueError(f"unknown prior kind {prior_kind!r}")
    strategy = spec.build()
    rng = _rng_from(cfg.seed)
    loglik_fn = LikelihoodEvaluator(
        data, strategy.grid_dimension, strategy.grid_level
    ).loglik

    hyper0 = strategy.init_hyper(cfg)
    xi0 = rng.standard_normal(strategy.latent_dim)
    w0, omega0 = strategy.field(hyper0, xi0)
    state = ChainState(hyper0, xi0, omega0, w0, loglik_fn(w0))

    n_kept = (cfg.iterations - cfg.burn_in + cfg.thinning - 1) // cfg.thinning
    if cfg.streaming:
        acc = StreamingAccumulator(strategy.grid_dim)
    else:
        acc = StoredDrawsAccumulator(n_kept, strategy.grid_dim)

    delta1, delta2 = cfg.delta1, cfg.delta2
    fixed_hyper = strategy.alpha_fixed is not None
    trace = np.empty(cfg.iterations)
    win1 = win2 = 0
    post1 = post2 = 0
    n_post = 0
    batch = 0
    trace_fh = None
    if cfg.trace_every > 0 and cfg.trace_path:
        trace_fh = open(cfg.trace_path, "w")
        trace_fh.write("step,alpha,loglik,acc1,acc2\n")

    try:
        for s in range(1, cfg.iterations + 1):
            if fixed_hyper:
                a1 = False
            else:
                state, a1 = hyper_step(state, strategy, loglik_fn, delta1, rng)
            state, a2 = wpcn_step(state, strategy, loglik_fn, delta2, rng)
            trace[s - 1] = strategy.trace_value(state.hyper)
            win1 += a1
            win2 += a2
            if s > cfg.burn_in:
                post1 += a1
                post2 += a2
                n_post += 1
                if (s - cfg.burn_in - 1) % cfg.thinning == 0:
                    acc.add(state.w_grid)
            elif cfg.adapt and s % cfg.adapt_window == 0:
                batch += 1
                gain = cfg.adapt_rate / np.sqrt(batch)
                if not fixed_hyper:
                    rate1 = win1 / cfg.adapt_window
                    delta1 = _clamp(
                        delta1 * np.exp(gain * (rate1 - cfg.target_accept)),
                        DELTA1_CLAMP,
                    )
                rate2 = win2 / cfg.adapt_window
                delta2 = _clamp(
                    delta2 * np.exp(gain * (rate2 - cfg.target_accept)),
                    DELTA2_CLAMP,
                )
                win1 = win2 = 0
            if trace_fh is not None and s % cfg.trace_every == 0:
                trace_fh.write(
                    f"{s},{strategy.trace_value(state.hyper)!r},"
                    f"{state.loglik!r},{int(a1)},{int(a2)}\n"
                )
    finally:
        if trace_fh is not None:
            trace_fh.close()

    summary = acc.summarize(strategy.grid_dimension, strategy.grid_level)
    summary.alpha_trace = trace
    summary.accept_hyper = float("nan") if fixed_hyper else post1 / n_post
    summary.accept_field = post2 / n_post
    return summary
