"""
random_effects.py - Random intercepts and the spatial Gaussian-process field for
y = X beta + G b + sigma eps.

The spatial field eta ~ N(0, kappa^2 C(h)) with C(h)_ij = exp(-|s_i - s_j|^2 / (2 h^2))
is drawn by conditioning a prior draw on the data, reusing the Cholesky factor of
C(h) + jitter I until the bandwidth moves.
"""

import math

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from ehreg.samplers import chain
from ehreg.utils.distributions import cholesky_lower, sample_inverse_gamma

SPATIAL_JITTER = 1e-8
MH_STEP_FRACTION = 0.1


def median_pairwise_distance(coords):
    """h_M: median of all pairwise Euclidean distances."""
    return float(np.median(pdist(np.asarray(coords, dtype=float))))


def effect_residuals(state, handle):
    """y - X beta - alpha, the target the random effects explain."""
    data = handle.dataset
    target = data.y - data.X @ state.beta
    if handle.spec.prior_kind == "horseshoe":
        target = target - state.alpha
    return target


# --- Random intercept ---
def intercept_conditional(state, handle):
    """Per-group (mean, variance) of v_j given the rest."""
    groups = handle.dataset.groups
    m = state.b.shape[0]
    weights = chain.observation_weights(state)
    target = effect_residuals(state, handle)
    # sums of D and D r within each group
    precision = 1.0 / state.tau_v2 + np.bincount(groups, weights=weights, minlength=m) / state.sigma2
    linear = np.bincount(groups, weights=weights * target, minlength=m) / state.sigma2
    return linear / precision, 1.0 / precision


def update_random_intercepts(state, handle, rng):
    mean, variance = intercept_conditional(state, handle)
    return mean + np.sqrt(variance) * rng.standard_normal(mean.shape[0])


def tau_v2_conditional(state, handle):
    m = state.b.shape[0]
    return handle.prior.a_v + m / 2.0, handle.prior.b_v + 0.5 * np.sum(state.b ** 2)


def update_tau_v2(state, handle, rng):
    shape, rate = tau_v2_conditional(state, handle)
    return float(sample_inverse_gamma(rng, shape, rate))


# --- Spatial field ---
def gp_correlation(squared_distances, h):
    return np.exp(-squared_distances / (2.0 * h * h))


def spatial_factor(handle, ctx, h):
    """Lower Cholesky factor of C(h) + jitter I, cached on the sweep context per bandwidth."""
    cached = ctx.cache.get("spatial")
    if cached is not None and cached["h"] == h:
        return cached["factor"]
    # distances never change within a chain
    squared = ctx.cache.get("squared_distances")
    if squared is None:
        squared = squareform(pdist(handle.dataset.coords, 'sqeuclidean'))
        ctx.cache["squared_distances"] = squared
    correlation = gp_correlation(squared, h) + SPATIAL_JITTER * np.eye(squared.shape[0])
    factor = cholesky_lower(correlation, f"spatial correlation at h={h:.4g}")
    ctx.cache["spatial"] = {"h": h, "factor": factor}
    return factor


def spatial_field_conditional(state, handle, factor):
    """(mean, covariance) of eta given the rest.

    Equivalent to precision kappa^-2 C^-1 + D / sigma^2 and mean driven by D (y - X beta) / sigma^2.
    """
    prior_cov = state.kappa2 * (factor @ factor.T)
    noise = state.sigma2 / chain.observation_weights(state)
    marginal = cholesky_lower(prior_cov + np.diag(noise), "spatial marginal covariance")
    gain = linalg.cho_solve((marginal, True), prior_cov).T
    target = effect_residuals(state, handle)
    return gain @ target, prior_cov - gain @ prior_cov


def update_spatial_field(state, handle, rng, factor):
    """Draw eta = eta0 + K M^-1 (r - eta0 - e) with eta0 ~ N(0, K), e ~ N(0, sigma^2 D^-1), M = K + sigma^2 D^-1."""
    n = factor.shape[0]
    scale = math.sqrt(state.kappa2)
    prior_cov = state.kappa2 * (factor @ factor.T)
    noise = state.sigma2 / chain.observation_weights(state)
    prior_draw = scale * (factor @ rng.standard_normal(n))
    noise_draw = np.sqrt(noise) * rng.standard_normal(n)
    marginal = cholesky_lower(prior_cov + np.diag(noise), "spatial marginal covariance")
    correction = linalg.cho_solve((marginal, True), effect_residuals(state, handle) - prior_draw - noise_draw)
    return prior_draw + prior_cov @ correction


def _gp_log_likelihood(eta, factor, kappa2):
    whitened = linalg.solve_triangular(factor, eta, lower=True)
    n = eta.shape[0]
    return -np.sum(np.log(np.diag(factor))) - 0.5 * n * math.log(kappa2) - 0.5 * whitened @ whitened / kappa2


def reflect(proposal, upper):
    """Fold a proposal back into (0, upper)."""
    # symmetric on (0, upper)
    while proposal <= 0.0 or proposal >= upper:
        proposal = -proposal if proposal <= 0.0 else 2.0 * upper - proposal
    return proposal


def kappa2_conditional(state, handle, factor):
    whitened = linalg.solve_triangular(factor, state.b, lower=True)
    n = state.b.shape[0]
    return handle.prior.a_kappa + n / 2.0, handle.prior.b_kappa + 0.5 * whitened @ whitened


def update_gp_hyper(state, handle, ctx, rng):
    """kappa^2 from its inverse-gamma conditional, then h by reflected random-walk Metropolis."""
    factor = spatial_factor(handle, ctx, state.h)
    shape, rate = kappa2_conditional(state, handle, factor)
    kappa2 = float(sample_inverse_gamma(rng, shape, rate))

    h_max = handle.h_max
    step = handle.prior.mh_step if handle.prior.mh_step is not None else MH_STEP_FRACTION * h_max
    proposal = reflect(state.h + step * rng.standard_normal(), h_max)
    # uniform prior on h and symmetric proposal: ratio of GP likelihoods only
    log_u = math.log1p(-rng.random())
    current = _gp_log_likelihood(state.b, factor, kappa2)
    saved = ctx.cache.get("spatial")
    proposed_factor = spatial_factor(handle, ctx, proposal)
    ctx.mh_proposed += 1
    if log_u < _gp_log_likelihood(state.b, proposed_factor, kappa2) - current:
        ctx.mh_accepted += 1
        return kappa2, proposal
    # rejected: restore the factor for the current h
    ctx.cache["spatial"] = saved
    return kappa2, state.h


def sweep_effects(state, handle, ctx):
    rng = ctx.rng("effects")
    if handle.spec.random_effect.kind == "intercept":
        state.b = update_random_intercepts(state, handle, rng)
        state.tau_v2 = update_tau_v2(state, handle, rng)
    else:
        state.b = update_spatial_field(state, handle, rng, spatial_factor(handle, ctx, state.h))
        state.kappa2, state.h = update_gp_hyper(state, handle, ctx, rng)
