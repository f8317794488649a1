"""
baselines.py - Competitor error models: normal, Student t with fixed df, adaptive t
over a discrete df grid, and the normal + t two-component mixture (MT).

The t law is the normal scale mixture with u_i ~ IG(df/2, df/2). All kernels reuse
the EH coefficient, scale and random-effect blocks, so with s fixed at 0 the EH,
MT and normal chains draw identical coefficients.
"""

import numpy as np
from scipy import special

from ehreg import config
from ehreg.samplers import chain
from ehreg.samplers.eh import effects_step, regression_step, update_s, update_z
from ehreg.utils.distributions import sample_inverse_gamma


def update_u_scale_mixture(state, handle, rng):
    """u_i ~ IG((df+1)/2, df/2 + r_i^2/(2 sigma^2)) if z_i = 1, else the prior IG(df/2, df/2)."""
    r = chain.residuals(state, handle)
    # t and aT set z = 1 everywhere; MT keeps normal rows at the prior
    heavy = state.z == 1
    half_df = state.df / 2.0
    shape = np.where(heavy, half_df + 0.5, half_df)
    rate = np.where(heavy, half_df + r * r / (2.0 * state.sigma2), half_df)
    return np.maximum(sample_inverse_gamma(rng, shape, rate), np.finfo(float).tiny)


def df_log_weights(u, grid):
    """Unnormalized log posterior of df over the grid: sum_i log IG(u_i; df/2, df/2)."""
    grid = np.asarray(grid, dtype=float)
    log_u = np.log(u)
    half = grid / 2.0
    # log IG(u; a, a) = a log a - lgamma(a) - (a + 1) log u - a / u
    return (u.shape[0] * (half * np.log(half) - special.gammaln(half))
            - (half + 1.0) * np.sum(log_u) - half * np.sum(1.0 / u))


def df_probabilities(u, grid):
    weights = df_log_weights(u, grid)
    return np.exp(weights - special.logsumexp(weights))


def update_df(state, handle, rng):
    grid = np.asarray(handle.spec.df_grid, dtype=float)
    # degenerate grid
    if grid.shape[0] == 1:
        return float(grid[0])
    return float(rng.choice(grid, p=df_probabilities(state.u, grid)))


def sweep_normal(state, handle, ctx):
    regression_step(state, handle, ctx)
    effects_step(state, handle, ctx)


def sweep_t(state, handle, ctx):
    regression_step(state, handle, ctx)
    latent = ctx.rng("latent")
    # df from the current u, then u given the new df
    if handle.spec.error_model == "at":
        state.df = update_df(state, handle, ctx.rng("mixture"))
    state.u = update_u_scale_mixture(state, handle, latent)
    effects_step(state, handle, ctx)


def sweep_mt(state, handle, ctx):
    regression_step(state, handle, ctx)
    # same label and weight kernels as EH
    mixture = ctx.rng("mixture")
    state.z = update_z(state, handle, mixture)
    state.s = update_s(state, handle, mixture)
    state.u = update_u_scale_mixture(state, handle, ctx.rng("latent"))
    effects_step(state, handle, ctx)


def run_chain_normal(handle, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
                     thin=config.DEFAULT_THIN, seed=0, progress=None):
    handle = chain.with_model(handle, "normal")
    return chain.run_gibbs(handle, sweep_normal, n_iter, burn_in, thin, seed, progress)


def run_chain_t(handle, df=None, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
                thin=config.DEFAULT_THIN, seed=0, progress=None):
    df = handle.spec.df if df is None else df
    handle = chain.with_model(handle, "t", df=float(df))
    return chain.run_gibbs(handle, sweep_t, n_iter, burn_in, thin, seed, progress)


def run_chain_adaptive_t(handle, grid=None, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
                         thin=config.DEFAULT_THIN, seed=0, progress=None):
    grid = tuple(handle.spec.df_grid if grid is None else grid)
    handle = chain.with_model(handle, "at", df_grid=grid)
    return chain.run_gibbs(handle, sweep_t, n_iter, burn_in, thin, seed, progress)


def run_chain_mt(handle, df=None, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
                 thin=config.DEFAULT_THIN, seed=0, progress=None):
    df = handle.spec.df if df is None else df
    handle = chain.with_model(handle, "mt", df=float(df))
    return chain.run_gibbs(handle, sweep_mt, n_iter, burn_in, thin, seed, progress)
