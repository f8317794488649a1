"""
eh.py - Partially collapsed Gibbs sampler for linear regression with EH errors.

Sweep order: beta, sigma^2, z, (s, gamma), (v, w), u, then random effects.
s and gamma are drawn with (v, w) integrated out, so (s, gamma) must come after z
and before the (v, w) refresh.
"""

import math

import numpy as np
from scipy import stats

from ehreg import config
from ehreg.samplers import chain, horseshoe, random_effects
from ehreg.utils.distributions import sample_gig_half, sample_inverse_gamma


def adaptive_gamma(handle):
    return handle.spec.error_model == "aeh" or handle.prior.adaptive_gamma


# --- Coefficients and scale ---
def update_beta(state, handle, rng):
    """beta ~ N(B~ A~, B~), B~^-1 = B^-1 + X'DX / sigma^2, A~ = B^-1 A + X'D y~ / sigma^2."""
    data = handle.dataset
    weights = chain.observation_weights(state)
    target = data.y - chain.mean_offset(state, handle)
    weighted_X = data.X * weights[:, None]
    precision = handle.beta_prior_precision + weighted_X.T @ data.X / state.sigma2
    linear = handle.beta_prior_linear + weighted_X.T @ target / state.sigma2
    return chain.draw_regression_coefficients(rng, precision, linear)


def sigma2_conditional(state, handle):
    """(shape, rate) of the gamma conditional of sigma^-2."""
    r = chain.residuals(state, handle)
    weights = chain.observation_weights(state)
    shape = handle.prior.a_sigma + handle.dataset.n / 2.0
    rate = handle.prior.b_sigma + 0.5 * np.sum(weights * r * r)
    return shape, rate


def update_sigma2(state, handle, rng):
    shape, rate = sigma2_conditional(state, handle)
    return float(sample_inverse_gamma(rng, shape, rate))


def regression_step(state, handle, ctx):
    """Coefficient and scale block for either coefficient prior."""
    if handle.spec.prior_kind == "horseshoe":
        horseshoe.sweep_horseshoe(state, handle, ctx)
    else:
        state.beta = update_beta(state, handle, ctx.rng("beta"))
        state.sigma2 = update_sigma2(state, handle, ctx.rng("scale"))


def effects_step(state, handle, ctx):
    if handle.spec.random_effect is not None:
        random_effects.sweep_effects(state, handle, ctx)


# --- Mixture indicators ---
def z_probabilities(state, handle):
    """P(z_i = 1 | rest), compared in log space."""
    r = chain.residuals(state, handle)
    sd = math.sqrt(state.sigma2)
    with np.errstate(divide='ignore'):
        log_heavy = np.log(state.s) + stats.norm.logpdf(r, scale=sd * np.sqrt(state.u))
        log_normal = np.log1p(-state.s) + stats.norm.logpdf(r, scale=sd)
    total = np.logaddexp(log_normal, log_heavy)
    # both components at -inf: keep the normal label
    return np.where(np.isfinite(total), np.exp(log_heavy - total), 0.0)


def update_z(state, handle, rng):
    probabilities = z_probabilities(state, handle)
    return (rng.random(probabilities.shape[0]) < probabilities).astype(int)


def s_conditional(state, handle):
    # Beta(a_s + #heavy, b_s + #normal)
    n_heavy = int(np.sum(state.z))
    return handle.prior.a_s + n_heavy, handle.prior.b_s + handle.dataset.n - n_heavy


def update_s(state, handle, rng):
    if handle.prior.fix_s is not None:
        return float(handle.prior.fix_s)
    a, b = s_conditional(state, handle)
    return float(rng.beta(a, b))


def gamma_conditional(state, handle):
    # u_i | gamma ~ H(.; gamma) contributes gamma (1 + log(1 + u_i))^-(1+gamma)
    shape = handle.prior.a_gamma + state.u.shape[0]
    rate = handle.prior.b_gamma + np.sum(np.log1p(np.log1p(state.u)))
    return shape, rate


def update_gamma(state, handle, rng):
    if not adaptive_gamma(handle):
        return state.gamma
    shape, rate = gamma_conditional(state, handle)
    return float(rng.gamma(shape, 1.0 / rate))


# --- Latent scales ---
def update_vw(state, rng):
    """w_i ~ Ga(1 + gamma, 1 + log(1 + u_i)), then v_i ~ Ga(1 + w_i, 1 + u_i)."""
    w = rng.gamma(1.0 + state.gamma, 1.0 / (1.0 + np.log1p(state.u)))
    v = rng.gamma(1.0 + w, 1.0 / (1.0 + state.u))
    return v, w


def update_u(state, handle, rng):
    """u_i ~ GIG(1/2, 2 v_i, r_i^2 / sigma^2) if z_i = 1, else Ga(1, v_i)."""
    # normal rows: u is unconstrained by the data
    u = rng.exponential(1.0 / state.v)
    heavy = state.z == 1
    if np.any(heavy):
        r = chain.residuals(state, handle)[heavy]
        u[heavy] = sample_gig_half(rng, 2.0 * state.v[heavy], r * r / state.sigma2)
    # GIG draws can underflow to 0 for tiny b
    return np.maximum(u, np.finfo(float).tiny)


def sweep_eh(state, handle, ctx):
    # beta, sigma^2 given (z, u)
    regression_step(state, handle, ctx)
    # labels, then (s, gamma) with (v, w) integrated out
    mixture = ctx.rng("mixture")
    state.z = update_z(state, handle, mixture)
    state.s = update_s(state, handle, mixture)
    state.gamma = update_gamma(state, handle, mixture)
    # (v, w) given (u, gamma), then u given v
    latent = ctx.rng("latent")
    state.v, state.w = update_vw(state, latent)
    state.u = update_u(state, handle, latent)
    effects_step(state, handle, ctx)


def run_chain(handle, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
              thin=config.DEFAULT_THIN, seed=0, progress=None):
    """EH (or adaptive-gamma aEH) chain; deterministic given seed."""
    if handle.spec.error_model not in ("eh", "aeh"):
        handle = chain.with_model(handle, "eh")
    return chain.run_gibbs(handle, sweep_eh, n_iter, burn_in, thin, seed, progress)
