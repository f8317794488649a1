"""
horseshoe.py - Horseshoe coefficient prior for the regression samplers.

beta_k ~ N(0, sigma^2 tau^2 xi_k), xi_k | lam_k ~ IG(1/2, 1/lam_k), lam_k ~ IG(1/2, 1),
tau^2 | nu ~ IG(1/2, 1/nu), nu ~ IG(1/2, 1), and a flat-ish N(0, A_alpha) intercept.
Observation weights are u_i^(-z_i) in both the alpha and beta steps.
"""

import numpy as np

from ehreg.samplers import chain
from ehreg.utils.distributions import sample_inverse_gamma


def prior_scales(state):
    """Diagonal of Lambda = tau^2 diag(xi)."""
    return state.tau2 * state.xi


def alpha_conditional(state, handle):
    """(mean, variance) of alpha given the rest."""
    data = handle.dataset
    weights = chain.observation_weights(state)
    target = data.y - data.X @ state.beta - chain.effect_offset(state, handle)
    precision = 1.0 / handle.prior.A_alpha + np.sum(weights) / state.sigma2
    mean = (np.sum(weights * target) / state.sigma2) / precision
    return mean, 1.0 / precision


def update_alpha(state, handle, rng):
    mean, variance = alpha_conditional(state, handle)
    return float(mean + np.sqrt(variance) * rng.standard_normal())


def update_beta_hs(state, handle, rng):
    """beta ~ N(A~^-1 X'D y~, sigma^2 A~^-1) with A~ = Lambda^-1 + X'DX and y~ = y - alpha."""
    data = handle.dataset
    weights = chain.observation_weights(state)
    target = data.y - chain.mean_offset(state, handle)
    weighted_X = data.X * weights[:, None]
    precision = np.diag(1.0 / (state.sigma2 * prior_scales(state))) + weighted_X.T @ data.X / state.sigma2
    linear = weighted_X.T @ target / state.sigma2
    return chain.draw_regression_coefficients(rng, precision, linear)


def sigma2_hs_conditional(state, handle):
    """(shape, rate) of sigma^-2; the coefficient quadratic form enters with factor 1/2."""
    r = chain.residuals(state, handle)
    weights = chain.observation_weights(state)
    p = state.beta.shape[0]
    shape = handle.prior.a_sigma + (handle.dataset.n + p) / 2.0
    rate = (handle.prior.b_sigma + 0.5 * np.sum(weights * r * r)
            + 0.5 * np.sum(state.beta ** 2 / prior_scales(state)))
    return shape, rate


def update_sigma2_hs(state, handle, rng):
    shape, rate = sigma2_hs_conditional(state, handle)
    return float(sample_inverse_gamma(rng, shape, rate))


def update_horseshoe_locals(state, rng):
    """Draw xi, lam, tau^2 and nu in turn, each from its inverse-gamma conditional."""
    beta2 = state.beta ** 2
    p = beta2.shape[0]
    # all four are IG with shape (k + 1) / 2 for k coefficients in the block
    xi = sample_inverse_gamma(rng, 1.0, 1.0 / state.lam + beta2 / (2.0 * state.tau2 * state.sigma2))
    lam = sample_inverse_gamma(rng, 1.0, 1.0 + 1.0 / xi)
    tau2 = float(sample_inverse_gamma(rng, (p + 1) / 2.0, 1.0 / state.nu + np.sum(beta2 / (2.0 * xi * state.sigma2))))
    nu = float(sample_inverse_gamma(rng, 1.0, 1.0 + 1.0 / tau2))
    return np.atleast_1d(xi), np.atleast_1d(lam), tau2, nu


def sweep_horseshoe(state, handle, ctx):
    # alpha and beta share the coefficient stream
    coefficients = ctx.rng("beta")
    state.alpha = update_alpha(state, handle, coefficients)
    state.beta = update_beta_hs(state, handle, coefficients)
    state.sigma2 = update_sigma2_hs(state, handle, ctx.rng("scale"))
    state.xi, state.lam, state.tau2, state.nu = update_horseshoe_locals(state, ctx.rng("shrink"))
