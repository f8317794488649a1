"""
chain.py - Shared Gibbs driver: per-block random streams, observation weights,
the Gaussian coefficient draw and the retained-draw recorder.
"""

import time
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from ehreg import config
from ehreg.errors import ChainError, InsufficientDrawsError, NumericError, ValidationError
from ehreg.model import ChainOutput, ModelHandle, initial_state
from ehreg.utils.distributions import sample_mvn, solve_spd

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

# Each block owns an independent stream so kernels sharing a block consume identical numbers
BLOCKS = ("beta", "scale", "mixture", "latent", "effects", "shrink")


def block_streams(seed):
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: np.random.default_rng(child) for name, child in zip(BLOCKS, sequence.spawn(len(BLOCKS)))}


def replication_seed(seed, replication):
    """Seed entropy for replication r of a run; independent of scheduling order."""
    return [int(seed), int(replication)]


@dataclass
class SweepContext:
    """Streams plus per-chain caches and Metropolis counters threaded through a sweep."""
    streams: dict
    cache: dict = field(default_factory=dict)
    mh_proposed: int = 0
    mh_accepted: int = 0

    @classmethod
    def from_seed(cls, seed):
        return cls(streams=block_streams(seed))

    def rng(self, block) -> np.random.Generator:
        return self.streams[block]

    @property
    def acceptance_rate(self):
        return self.mh_accepted / self.mh_proposed if self.mh_proposed else None


def with_model(handle: ModelHandle, error_model, **changes):
    """Same data and prior under another error model."""
    return replace(handle, spec=replace(handle.spec, error_model=error_model, **changes))


# --- Quantities shared by every kernel ---
def observation_weights(state):
    """Diagonal of D: u_i^(-z_i), i.e. 1 for the normal component and 1/u_i for the heavy one."""
    return np.where(state.z == 1, 1.0 / state.u, 1.0)


def effect_offset(state, handle):
    effect = handle.spec.random_effect
    if effect is None:
        return 0.0
    if effect.kind == "intercept":
        return state.b[handle.dataset.groups]
    return state.b


def mean_offset(state, handle):
    """Part of the mean outside X beta: intercept alpha (horseshoe path) plus random effects."""
    offset = effect_offset(state, handle)
    if handle.spec.prior_kind == "horseshoe":
        offset = offset + state.alpha
    return offset


def residuals(state, handle):
    data = handle.dataset
    return data.y - data.X @ state.beta - mean_offset(state, handle)


def draw_regression_coefficients(rng, precision, linear):
    """Draw from N(precision^-1 linear, precision^-1)."""
    mean = solve_spd(precision, linear, "coefficient precision")
    return sample_mvn(rng, mean, precision=precision)


# --- Driver ---
def check_mcmc_settings(n_iter, burn_in, thin):
    problems = []
    if n_iter < 1:
        problems.append(f"n_iter must be positive, got {n_iter}")
    if burn_in < 0:
        problems.append(f"burn_in must be nonnegative, got {burn_in}")
    if thin < 1:
        problems.append(f"thin must be at least 1, got {thin}")
    if problems:
        raise ValidationError(problems[0], problems)
    if n_iter <= burn_in:
        raise InsufficientDrawsError(f"Nothing retained: n_iter={n_iter} does not exceed burn_in={burn_in}")
    if (n_iter - burn_in) % thin:
        raise ValidationError(f"n_iter - burn_in = {n_iter - burn_in} is not divisible by thin={thin}")


def recorded_blocks(handle: ModelHandle):
    """(name, getter) pairs in the stable column order of the draw table."""
    spec = handle.spec
    blocks = [("beta", lambda s: s.beta)]
    if spec.prior_kind == "horseshoe":
        blocks.append(("alpha", lambda s: s.alpha))
    blocks.append(("sigma2", lambda s: s.sigma2))
    if spec.is_mixture:
        blocks.append(("s", lambda s: s.s))
    if spec.error_model in ("eh", "aeh"):
        blocks.append(("gamma", lambda s: s.gamma))
    if spec.error_model == "at":
        blocks.append(("df", lambda s: s.df))
    if spec.prior_kind == "horseshoe":
        blocks.extend([("nu", lambda s: s.nu), ("tau2", lambda s: s.tau2), ("xi", lambda s: s.xi)])
    if spec.random_effect is not None:
        blocks.append(("b", lambda s: s.b))
        if spec.random_effect.kind == "intercept":
            blocks.append(("tau_v2", lambda s: s.tau_v2))
        else:
            blocks.extend([("kappa2", lambda s: s.kappa2), ("h", lambda s: s.h)])
    if spec.record_latent:
        blocks.extend([("z", lambda s: s.z), ("u", lambda s: s.u)])
    return blocks


def run_gibbs(handle: ModelHandle, sweep, n_iter, burn_in, thin, seed, progress=None, desc=None):
    """Run `sweep(state, handle, ctx)` n_iter times and keep every thin-th post-burn-in state."""
    check_mcmc_settings(n_iter, burn_in, thin)
    ctx = SweepContext.from_seed(seed)
    state = initial_state(handle)
    blocks = recorded_blocks(handle)
    n_keep = (n_iter - burn_in) // thin
    # one column per scalar, one per vector entry
    store = {name: np.empty((n_keep, np.size(getter(state)))) for name, getter in blocks}
    z_total = np.zeros(handle.dataset.n)
    show = config.SHOW_PROGRESS if progress is None else progress
    label = desc or f"{handle.spec.tag} chain"

    logging.debug(f"Starting {label}: n_iter={n_iter}, burn_in={burn_in}, thin={thin}, seed={seed}")
    start = time.perf_counter()
    row = 0
    for iteration in tqdm(range(n_iter), desc=label, disable=not show, leave=False):
        try:
            sweep(state, handle, ctx)
        except (NumericError, np.linalg.LinAlgError, FloatingPointError) as e:
            logging.error(f"{label} failed at sweep {iteration}: {e}")
            raise ChainError(iteration, e) from e
        # retain
        if iteration >= burn_in and (iteration - burn_in) % thin == 0:
            for name, getter in blocks:
                store[name][row] = getter(state)
            z_total += state.z
            row += 1
    runtime = time.perf_counter() - start

    output = ChainOutput(
        draws=store, n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed,
        model_tag=handle.spec.tag, prior_kind=handle.spec.prior_kind, runtime_seconds=runtime,
        z_mean=z_total / n_keep if handle.spec.is_mixture else None,
        acceptance_rate=ctx.acceptance_rate,
    )
    logging.debug(f"Finished {label}: {n_keep} draws retained in {runtime:.1f}s")
    return output
