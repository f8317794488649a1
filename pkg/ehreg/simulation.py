"""
simulation.py - Synthetic designs for the contamination studies.

Regression study: covariates from N(0, R) with R_kl = rho^|k-l|, errors from
(1 - ratio) N(0, 1) + ratio N(shift, 1), scaled by sigma. The random-intercept
study adds one N(0, tau_v^2) intercept per subject over T repeated measurements.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ehreg.model import Dataset, OutlierScenario
from ehreg.utils.distributions import sample_mvn


def default_coefficients(p):
    """beta_0 = 0.5, beta_1 = beta_4 = 0.3, beta_7 = beta_10 = 2, the rest 0."""
    beta = np.zeros(p + 1)
    beta[0] = 0.5
    for k, value in ((1, 0.3), (4, 0.3), (7, 2.0), (10, 2.0)):
        if k <= p:
            beta[k] = value
    return beta


@dataclass(frozen=True)
class RegressionDesign:
    n: int = 300
    p: int = 20
    rho: float = 0.2
    sigma: float = 0.5
    n_holdout: int = 20
    coefficients: tuple = field(default_factory=lambda: tuple(default_coefficients(20)))

    @classmethod
    def with_size(cls, n, p, **kwargs):
        return cls(n=n, p=p, coefficients=tuple(default_coefficients(p)), **kwargs)


@dataclass(frozen=True)
class RandomInterceptDesign:
    n_subjects: int = 50
    n_repeats: int = 10
    p: int = 10
    rho: float = 0.2
    sigma: float = 1.0
    tau_v: float = 0.5
    coefficients: tuple = field(default_factory=lambda: tuple(default_coefficients(10)))


@dataclass
class SimulatedData:
    dataset: Dataset
    holdout: Dataset
    outlier: np.ndarray
    truth: dict


def correlated_covariates(rng, n, p, rho):
    correlation = linalg.toeplitz(rho ** np.arange(p))
    return sample_mvn(rng, np.zeros(p), cov=correlation, size=n)


def contaminated_errors(rng, n, scenario: OutlierScenario):
    """Standard normal errors, shifted by shift_mu with probability contamination_ratio."""
    outlier = rng.random(n) < scenario.contamination_ratio
    return rng.standard_normal(n) + scenario.shift_mu * outlier, outlier


def _with_intercept(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def simulate_regression(design: RegressionDesign, scenario: OutlierScenario, rng) -> SimulatedData:
    beta = np.asarray(design.coefficients, dtype=float)
    X = correlated_covariates(rng, design.n, design.p, design.rho)
    errors, outlier = contaminated_errors(rng, design.n, scenario)
    y = _with_intercept(X) @ beta + design.sigma * errors

    X_new = correlated_covariates(rng, design.n_holdout, design.p, design.rho)
    y_new = _with_intercept(X_new) @ beta + design.sigma * rng.standard_normal(design.n_holdout)

    names = ["intercept"] + [f"x{k}" for k in range(1, design.p + 1)]
    truth = {"beta": beta.tolist(), "sigma": design.sigma, "scenario": scenario.label,
             "contamination_ratio": scenario.contamination_ratio, "shift_mu": scenario.shift_mu}
    return SimulatedData(
        dataset=Dataset(y=y, X=_with_intercept(X), covariate_names=names, has_intercept=True),
        holdout=Dataset(y=y_new, X=_with_intercept(X_new), covariate_names=names, has_intercept=True),
        outlier=outlier, truth=truth,
    )


def simulate_random_intercept(design: RandomInterceptDesign, scenario: OutlierScenario, rng) -> SimulatedData:
    """m subjects x T repeats: y_jt = x_jt'beta + v_j + sigma eps_jt."""
    beta = np.asarray(design.coefficients, dtype=float)
    n = design.n_subjects * design.n_repeats
    groups = np.repeat(np.arange(design.n_subjects), design.n_repeats)
    intercepts = design.tau_v * rng.standard_normal(design.n_subjects)
    X = correlated_covariates(rng, n, design.p, design.rho)
    errors, outlier = contaminated_errors(rng, n, scenario)
    y = _with_intercept(X) @ beta + intercepts[groups] + design.sigma * errors

    names = ["intercept"] + [f"x{k}" for k in range(1, design.p + 1)]
    truth = {"beta": beta.tolist(), "sigma": design.sigma, "tau_v": design.tau_v,
             "random_effects": intercepts.tolist(), "scenario": scenario.label}
    dataset = Dataset(y=y, X=_with_intercept(X), groups=groups, covariate_names=names, has_intercept=True)
    return SimulatedData(dataset=dataset, holdout=None, outlier=outlier, truth=truth)
