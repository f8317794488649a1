"""Gibbs samplers for the EH model and its competitors."""

from ehreg import config
from ehreg.errors import ValidationError
from ehreg.samplers import baselines, eh


def run_model(handle, n_iter=config.DEFAULT_N_ITER, burn_in=config.DEFAULT_BURN_IN,
              thin=config.DEFAULT_THIN, seed=0, progress=None):
    """Dispatch on the handle's error model."""
    model = handle.spec.error_model
    settings = dict(n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed, progress=progress)
    if model in ("eh", "aeh"):
        return eh.run_chain(handle, **settings)
    if model == "normal":
        return baselines.run_chain_normal(handle, **settings)
    if model == "t":
        return baselines.run_chain_t(handle, **settings)
    if model == "at":
        return baselines.run_chain_adaptive_t(handle, **settings)
    if model == "mt":
        return baselines.run_chain_mt(handle, **settings)
    raise ValidationError(f"Unknown error model '{model}'")
