"""
metrics.py - Posterior summaries, sampling-efficiency diagnostics, coefficient and
predictive accuracy metrics, and the deviance information criterion.
"""

import math
import logging
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import stats

from ehreg.errors import InsufficientDrawsError, ValidationError
from ehreg.model import ChainOutput, Dataset, parse_model_flag
from ehreg.utils.distributions import eh_density_table

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

MIN_SUMMARY_DRAWS = 100
MIN_TRACE_LENGTH = 200


# --- Summaries and efficiency ---
@dataclass
class PosteriorSummary:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def length(self):
        return self.upper - self.lower


def summarize(draws, level=0.95):
    """Posterior mean and equal-tailed interval per column (linear-interpolation quantiles)."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] < MIN_SUMMARY_DRAWS:
        raise InsufficientDrawsError(f"Need at least {MIN_SUMMARY_DRAWS} draws to summarize, got {draws.shape[0]}")
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0, method='linear')
    return PosteriorSummary(mean=draws.mean(axis=0), lower=lower, upper=upper)


def autocorrelation(trace):
    """Biased sample autocorrelation at every lag, by FFT."""
    x = np.asarray(trace, dtype=float) - np.mean(trace)
    n = x.shape[0]
    spectrum = np.fft.rfft(x, 2 * n)
    autocov = np.fft.irfft(spectrum * np.conj(spectrum), 2 * n)[:n] / n
    return autocov / autocov[0]


def inefficiency_factor(trace):
    """1 + 2 sum of autocorrelations, truncated by Geyer's initial monotone positive sequence.

    A constant trace has IF 1. Antithetic chains may fall below 1; the floor is 0.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.shape[0] < MIN_TRACE_LENGTH:
        raise InsufficientDrawsError(f"Need a trace of at least {MIN_TRACE_LENGTH} draws, got {trace.shape[0]}")
    if np.var(trace) == 0:
        return 1.0
    rho = autocorrelation(trace)
    n_pairs = rho.shape[0] // 2
    pairs = rho[:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    total = 0.0
    previous = math.inf
    for gamma_k in pairs:
        if gamma_k <= 0:
            break
        gamma_k = min(gamma_k, previous)
        total += gamma_k
        previous = gamma_k
    return max(0.0, -1.0 + 2.0 * total)


def batch_means_variance(trace, n_batches=None):
    """Variance of the trace mean from non-overlapping batch means.

    Defaults to floor(N^(1/3)) batches.
    """
    trace = np.asarray(trace, dtype=float)
    n = trace.shape[0]
    if n < MIN_TRACE_LENGTH:
        raise InsufficientDrawsError(f"Need a trace of at least {MIN_TRACE_LENGTH} draws, got {n}")
    n_batches = n_batches or max(2, int(n ** (1.0 / 3.0)))
    size = n // n_batches
    means = trace[:size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(np.var(means, ddof=1) / n_batches)


def mc_standard_error(trace):
    """Monte Carlo standard error of the trace mean: sd * sqrt(IF / N)."""
    trace = np.asarray(trace, dtype=float)
    return float(np.std(trace) * math.sqrt(inefficiency_factor(trace) / trace.shape[0]))


def gelman_rubin(traces):
    """Potential scale reduction factor for an (m chains x N draws) array."""
    traces = np.asarray(traces, dtype=float)
    m, n = traces.shape
    if m < 2:
        raise ValidationError("R-hat needs at least two chains")
    chain_means = traces.mean(axis=1)
    within = traces.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    if within == 0:
        return 1.0
    pooled = (n - 1) / n * within + between / n
    return float(math.sqrt(pooled / within))


# --- Accuracy metrics ---
@dataclass
class MetricReport:
    """Per-coefficient RMSE, coverage and interval length; averages over coefficients."""
    rmse: np.ndarray
    cp: np.ndarray
    al: np.ndarray
    if_avg: Optional[float] = None
    rmspe: Optional[float] = None
    dic: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def rmse_avg(self):
        return float(np.mean(self.rmse))

    @property
    def cp_avg(self):
        return float(np.mean(self.cp))

    @property
    def al_avg(self):
        return float(np.mean(self.al))

    def to_dict(self):
        record = asdict(self)
        record.update(rmse_avg=self.rmse_avg, cp_avg=self.cp_avg, al_avg=self.al_avg)
        return record


def coefficient_metrics(estimates, lowers, uppers, truth):
    """Metrics over replications (rows) for each coefficient (columns)."""
    estimates, lowers, uppers = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (estimates, lowers, uppers))
    truth = np.asarray(truth, dtype=float)
    rmse = np.sqrt(np.mean((estimates - truth) ** 2, axis=0))
    cp = np.mean((lowers <= truth) & (truth <= uppers), axis=0)
    al = np.mean(uppers - lowers, axis=0)
    return MetricReport(rmse=rmse, cp=cp, al=al)


def predictive_metrics(pred_means, lowers, uppers, y_true):
    """RMSE of predictive means, coverage and length of predictive intervals, pooled over points."""
    pred_means, lowers, uppers, y_true = (np.asarray(a, dtype=float).reshape(-1)
                                          for a in (pred_means, lowers, uppers, y_true))
    rmse = math.sqrt(float(np.mean((pred_means - y_true) ** 2)))
    cp = float(np.mean((lowers <= y_true) & (y_true <= uppers)))
    al = float(np.mean(uppers - lowers))
    return MetricReport(rmse=np.array([rmse]), cp=np.array([cp]), al=np.array([al]))


def rmspe(v_hat, v_true):
    """Root mean squared prediction error of random effects over groups."""
    v_hat, v_true = np.asarray(v_hat, dtype=float), np.asarray(v_true, dtype=float)
    return math.sqrt(float(np.mean((v_hat - v_true) ** 2)))


def average_inefficiency(output: ChainOutput, name="beta"):
    matrix = output[name]
    return float(np.mean([inefficiency_factor(matrix[:, k]) for k in range(matrix.shape[1])]))


# --- Prediction ---
def predict_clean(output: ChainOutput, x_new, rng, level=0.95):
    """Predictive draws y* = x*'beta + alpha + sigma eps*, eps* ~ N(0, 1), i.e. given z* = 0."""
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    location = output["beta"] @ x_new.T
    if "alpha" in output.draws:
        location = location + output["alpha"]
    sigma = np.sqrt(output.scalar("sigma2"))[:, None]
    draws = location + sigma * rng.standard_normal(location.shape)
    summary = summarize(draws, level)
    return summary, draws


# --- DIC ---
def _location(draws, dataset: Dataset):
    """Mean of y for each row of parameter values (rows x n)."""
    location = draws["beta"] @ dataset.X.T
    if "alpha" in draws:
        location = location + draws["alpha"]
    if "b" in draws:
        effects = draws["b"]
        location = location + (effects[:, dataset.groups] if dataset.groups is not None else effects)
    return location


def pointwise_log_likelihood(draws, dataset: Dataset, model_tag):
    """Observed-data log likelihood (latent z, u integrated out) for each row of parameter values."""
    spec = parse_model_flag(model_tag)
    sigma = np.sqrt(draws["sigma2"])
    x = (dataset.y - _location(draws, dataset)) / sigma
    log_sigma = np.log(sigma)
    model = spec.error_model
    if model == "normal":
        log_f = stats.norm.logpdf(x)
    elif model in ("t", "at"):
        df = draws["df"] if model == "at" else spec.df
        log_f = stats.t.logpdf(x, df)
    elif model == "mt":
        s = draws["s"]
        with np.errstate(divide='ignore'):
            log_f = np.logaddexp(np.log1p(-s) + stats.norm.logpdf(x), np.log(s) + stats.t.logpdf(x, spec.df))
    else:
        log_f = np.empty_like(x)
        gammas = np.round(draws["gamma"][:, 0], 2)
        for gamma in np.unique(gammas):
            rows = gammas == gamma
            log_f[rows] = eh_density_table(float(gamma)).log_pdf(x[rows], draws["s"][rows])
    return np.sum(log_f - log_sigma, axis=1)


def dic(output: ChainOutput, dataset: Dataset, max_draws=None, seed=0):
    """DIC = 2 mean(D(theta)) - D(mean theta), D = -2 log L with latent variables marginalized."""
    names = [name for name in ("beta", "alpha", "sigma2", "s", "gamma", "df", "b") if name in output.draws]
    rows = np.arange(output.n_retained)
    if max_draws is not None and rows.shape[0] > max_draws:
        rows = np.sort(np.random.default_rng(seed).choice(rows, max_draws, replace=False))
    draws = {name: output[name][rows] for name in names}
    deviance = -2.0 * pointwise_log_likelihood(draws, dataset, output.model_tag)
    means = {name: draws[name].mean(axis=0, keepdims=True) for name in names}
    plug_in = -2.0 * pointwise_log_likelihood(means, dataset, output.model_tag)[0]
    value = float(2.0 * deviance.mean() - plug_in)
    logging.info(f"DIC for {output.model_tag}: {value:.2f} (mean deviance {deviance.mean():.2f}, "
                 f"effective parameters {deviance.mean() - plug_in:.2f})")
    return value
