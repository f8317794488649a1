"""
model.py - Data model, prior configuration and latent-state containers shared by
all samplers, plus validation of a (prior, dataset, model) combination.
"""

import math
import logging
from dataclasses import dataclass, field, asdict, fields
from typing import Optional

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial.distance import pdist

from ehreg.errors import ValidationError, NotPositiveDefiniteError, InsufficientDrawsError
from ehreg.utils.distributions import cholesky_lower

if not logging.getLogger().hasHandlers():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')

ERROR_MODELS = ("eh", "aeh", "normal", "t", "at", "mt")
MIXTURE_MODELS = ("eh", "aeh", "mt")
PRIOR_KINDS = ("normal", "horseshoe")
RANDOM_EFFECT_KINDS = ("intercept", "spatial")

DEFAULT_T_DF = 3.0
DEFAULT_MT_DF = 0.5
# Discrete uniform support for the adaptive-t degrees of freedom
DEFAULT_DF_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0, 15.0, 20.0, 30.0, 50.0)


# --- Data ---
@dataclass
class Dataset:
    """Responses y (n), design X (n x p) and optional group labels or coordinates."""
    y: np.ndarray
    X: np.ndarray
    groups: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    covariate_names: list = field(default_factory=list)
    has_intercept: bool = False

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=int).reshape(-1)
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float)
        if not self.covariate_names:
            self.covariate_names = [f"x{k}" for k in range(self.X.shape[1])]

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def n_groups(self):
        return 0 if self.groups is None else int(self.groups.max()) + 1

    @property
    def G(self):
        """Dense n x m incidence matrix of the random-intercept design."""
        if self.groups is None:
            return None
        incidence = np.zeros((self.n, self.n_groups))
        incidence[np.arange(self.n), self.groups] = 1.0
        return incidence

    def copy(self):
        return Dataset(
            y=self.y.copy(), X=self.X.copy(),
            groups=None if self.groups is None else self.groups.copy(),
            coords=None if self.coords is None else self.coords.copy(),
            covariate_names=list(self.covariate_names), has_intercept=self.has_intercept,
        )


# --- Priors and model structure ---
@dataclass
class PriorConfig:
    """Flat hyperparameter set. Absent keys in a config file take these defaults.

    beta ~ N(beta_mean, beta_cov) where beta_mean defaults to zeros and beta_cov to
    beta_variance * I; sigma^-2 ~ Ga(a_sigma, b_sigma); s ~ Beta(a_s, b_s);
    gamma fixed at `gamma` unless adaptive_gamma, then Ga(a_gamma, b_gamma).
    """
    beta_variance: float = 1000.0
    beta_mean: Optional[list] = None
    beta_cov: Optional[list] = None
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    a_s: float = 1.0
    b_s: float = 1.0
    fix_s: Optional[float] = None
    gamma: float = 1.0
    adaptive_gamma: bool = False
    a_gamma: float = 100.0
    b_gamma: float = 100.0
    A_alpha: float = 1000.0
    a_v: float = 1.0
    b_v: float = 1.0
    a_kappa: float = 1.0
    b_kappa: float = 1.0
    mh_step: Optional[float] = None

    POSITIVE_KEYS = ("beta_variance", "a_sigma", "b_sigma", "a_s", "b_s", "gamma", "a_gamma", "b_gamma",
                     "A_alpha", "a_v", "b_v", "a_kappa", "b_kappa")

    def violations(self):
        problems = []
        for key in self.POSITIVE_KEYS:
            value = getattr(self, key)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                problems.append(f"{key} must be a positive finite number, got {value!r}")
        if self.fix_s is not None and not (0.0 <= self.fix_s <= 1.0):
            problems.append(f"fix_s must lie in [0, 1], got {self.fix_s!r}")
        if self.mh_step is not None and not (self.mh_step > 0):
            problems.append(f"mh_step must be positive, got {self.mh_step!r}")
        return problems

    def beta_prior(self, p):
        """(mean, covariance) of the normal coefficient prior for p coefficients."""
        mean = np.zeros(p) if self.beta_mean is None else np.asarray(self.beta_mean, dtype=float)
        cov = self.beta_variance * np.eye(p) if self.beta_cov is None else np.asarray(self.beta_cov, dtype=float)
        return mean, cov

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"Unknown prior keys: {', '.join(unknown)}", [f"unknown key {k}" for k in unknown])
        config = cls(**values)
        problems = config.violations()
        if problems:
            raise ValidationError("Invalid prior configuration", problems)
        return config

    def to_json(self, path):
        from ehreg.utils.io import save_json
        save_json(self.to_dict(), path, "prior config")

    @classmethod
    def from_json(cls, path):
        from ehreg.utils.io import load_json
        return cls.from_dict(load_json(path, "prior config"))


@dataclass(frozen=True)
class RandomEffectSpec:
    """Random-intercept (group labels) or spatial Gaussian-process (coordinates) effect."""
    kind: str

    def __post_init__(self):
        if self.kind not in RANDOM_EFFECT_KINDS:
            raise ValidationError(f"Unknown random-effect kind '{self.kind}'")


@dataclass(frozen=True)
class ModelSpec:
    """Error model tag with its tail parameter, coefficient prior kind and recording flags."""
    error_model: str = "eh"
    df: Optional[float] = None
    df_grid: tuple = DEFAULT_DF_GRID
    prior_kind: str = "normal"
    random_effect: Optional[RandomEffectSpec] = None
    record_latent: bool = False

    @property
    def tag(self):
        if self.error_model in ("t", "mt"):
            return f"{self.error_model}:{self.df:g}"
        return self.error_model

    @property
    def is_mixture(self):
        return self.error_model in MIXTURE_MODELS


def parse_model_flag(flag, prior_kind="normal", random_effect=None, record_latent=False):
    """'eh' | 'aeh' | 'normal' | 't[:df]' | 'at' | 'mt[:df]' -> ModelSpec."""
    name, _, value = flag.strip().lower().partition(":")
    if name not in ERROR_MODELS:
        raise ValidationError(f"Unknown model '{flag}'; expected one of {', '.join(ERROR_MODELS)}")
    df = None
    if name in ("t", "mt"):
        try:
            df = float(value) if value else (DEFAULT_T_DF if name == "t" else DEFAULT_MT_DF)
        except ValueError:
            raise ValidationError(f"Degrees of freedom in '{flag}' is not a number")
    elif value:
        raise ValidationError(f"Model '{name}' takes no parameter, got '{flag}'")
    if prior_kind not in PRIOR_KINDS:
        raise ValidationError(f"Unknown prior '{prior_kind}'; expected normal or horseshoe")
    return ModelSpec(error_model=name, df=df, prior_kind=prior_kind,
                     random_effect=random_effect, record_latent=record_latent)


# --- Chain containers ---
@dataclass
class ChainState:
    """One configuration visited by the sweep. Fields a model does not use keep their initial value."""
    beta: np.ndarray
    sigma2: float
    z: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    s: float = 0.5
    gamma: float = 1.0
    df: float = 1.0
    alpha: float = 0.0
    xi: np.ndarray = None
    lam: np.ndarray = None
    tau2: float = 1.0
    nu: float = 1.0
    b: np.ndarray = None
    tau_v2: float = 1.0
    kappa2: float = 1.0
    h: float = 1.0

    def copy(self):
        return ChainState(**{f.name: (getattr(self, f.name).copy() if isinstance(getattr(self, f.name), np.ndarray)
                                      else getattr(self, f.name)) for f in fields(self)})


@dataclass
class ChainOutput:
    """Retained draws keyed by parameter name, each an (n_retained x k) matrix."""
    draws: dict
    n_iter: int
    burn_in: int
    thin: int
    seed: object
    model_tag: str
    prior_kind: str = "normal"
    runtime_seconds: float = 0.0
    z_mean: Optional[np.ndarray] = None
    acceptance_rate: Optional[float] = None

    @property
    def n_retained(self):
        return (self.n_iter - self.burn_in) // self.thin

    def __getitem__(self, name):
        return self.draws[name]

    def scalar(self, name):
        return self.draws[name][:, 0]

    def columns(self):
        names = []
        for name, matrix in self.draws.items():
            if matrix.shape[1] == 1 and name not in VECTOR_PARAMETERS:
                names.append(name)
            else:
                names.extend(f"{name}[{k}]" for k in range(matrix.shape[1]))
        return names

    def to_frame(self):
        blocks = [self.draws[name] for name in self.draws]
        return pd.DataFrame(np.hstack(blocks), columns=self.columns())

    @classmethod
    def from_frame(cls, frame, metadata):
        draws = {}
        for column in frame.columns:
            name = column.split("[", 1)[0]
            draws.setdefault(name, []).append(frame[column].to_numpy(dtype=float))
        draws = {name: np.column_stack(cols) for name, cols in draws.items()}
        output = cls(draws=draws, n_iter=int(metadata["n_iter"]), burn_in=int(metadata["burn_in"]),
                     thin=int(metadata["thin"]), seed=metadata.get("seed"), model_tag=metadata["model_tag"],
                     prior_kind=metadata.get("prior_kind", "normal"))
        if len(frame) != output.n_retained:
            raise InsufficientDrawsError(
                f"Draw table has {len(frame)} rows but metadata implies {output.n_retained} retained draws")
        return output

    def metadata(self):
        return {
            "model_tag": self.model_tag,
            "prior_kind": self.prior_kind,
            "n_iter": self.n_iter,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "seed": self.seed,
            "n_retained": self.n_retained,
            "runtime_seconds": round(self.runtime_seconds, 3),
            "columns": self.columns(),
        }


VECTOR_PARAMETERS = ("beta", "xi", "b", "z", "u")


# --- Outlier scenarios ---
@dataclass(frozen=True)
class OutlierProbe:
    """Planted outliers y_i = a_i + b_i * magnitude for i in `indices`."""
    indices: tuple
    a: tuple
    b: tuple
    magnitude: float = 1.0

    def __post_init__(self):
        if not (len(self.indices) == len(self.a) == len(self.b)):
            raise ValidationError("Outlier probe needs one (a, b) pair per planted index")
        if any(slope == 0 for slope in self.b):
            raise ValidationError("Outlier probe slopes b must be nonzero")
        if len(set(self.indices)) != len(self.indices):
            raise ValidationError("Outlier probe indices must be distinct")

    def apply(self, y, magnitude=None):
        """Copy of y with the probe rows set to a + b * magnitude."""
        magnitude = self.magnitude if magnitude is None else magnitude
        y = np.array(y, dtype=float)
        y[list(self.indices)] = np.asarray(self.a) + np.asarray(self.b) * magnitude
        return y


@dataclass(frozen=True)
class OutlierScenario:
    """Location-shift contamination: errors from (1 - ratio) N(0, 1) + ratio N(shift_mu, 1)."""
    contamination_ratio: float = 0.0
    shift_mu: float = 0.0
    probe: Optional[OutlierProbe] = None

    def __post_init__(self):
        if not (0.0 <= self.contamination_ratio < 1.0):
            raise ValidationError(f"Contamination ratio must lie in [0, 1), got {self.contamination_ratio}")

    @property
    def label(self):
        if self.contamination_ratio == 0:
            return "(0,--)"
        return f"({self.contamination_ratio * 100:g},{self.shift_mu:g})"


# (percent contaminated, shift) pairs of the regression study
SIMULATION_SCENARIOS = (
    OutlierScenario(0.0, 0.0),
    OutlierScenario(0.05, 5.0), OutlierScenario(0.10, 5.0),
    OutlierScenario(0.05, 10.0), OutlierScenario(0.10, 10.0),
    OutlierScenario(0.05, 15.0), OutlierScenario(0.10, 15.0),
    OutlierScenario(0.05, 20.0), OutlierScenario(0.10, 20.0),
)


def parse_scenario(text):
    """'10,20' (percent, shift) or '0' -> OutlierScenario."""
    parts = [part.strip() for part in text.strip("() ").split(",") if part.strip() not in ("", "--")]
    try:
        ratio = float(parts[0]) / 100.0
        shift = float(parts[1]) if len(parts) > 1 else 0.0
    except (IndexError, ValueError):
        raise ValidationError(f"Cannot parse scenario '{text}'; expected 'percent,shift'")
    return OutlierScenario(ratio, shift)


# --- Validation ---
@dataclass
class ModelHandle:
    """A checked (dataset, prior, model) combination consumed by the samplers."""
    dataset: Dataset
    prior: PriorConfig
    spec: ModelSpec
    beta_prior_precision: np.ndarray
    beta_prior_linear: np.ndarray
    h_max: Optional[float] = None
    warnings: list = field(default_factory=list)


def _column_rank(X):
    if X.shape[1] == 0:
        return 0
    _, r, _ = linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return 0
    return int(np.sum(diag > diag[0] * max(X.shape) * np.finfo(float).eps))


def validate(prior: PriorConfig, dataset: Dataset, spec: ModelSpec = None, probe: OutlierProbe = None):
    """Check dimensions, hyperparameters and model structure; return a ModelHandle.

    Every violation found is collected into a single ValidationError. Sufficient
    conditions that only affect robustness guarantees are logged as warnings and
    kept on the handle.
    """
    spec = spec or ModelSpec()
    problems = list(prior.violations())
    warnings = []
    n, p = dataset.n, dataset.p

    if n < 1:
        problems.append("dataset has no observations")
    if dataset.X.shape[0] != n:
        problems.append(f"X has {dataset.X.shape[0]} rows but y has {n} entries")
    if not np.all(np.isfinite(dataset.y)):
        problems.append("y contains non-finite values")
    if not np.all(np.isfinite(dataset.X)):
        problems.append("X contains non-finite values")
    if spec.error_model not in ERROR_MODELS:
        problems.append(f"unknown error model '{spec.error_model}'")
    if spec.prior_kind not in PRIOR_KINDS:
        problems.append(f"unknown prior kind '{spec.prior_kind}'")
    if spec.error_model in ("t", "mt") and not (spec.df is not None and spec.df > 0):
        problems.append(f"degrees of freedom must be positive, got {spec.df!r}")
    if spec.error_model == "at" and (len(spec.df_grid) == 0 or min(spec.df_grid) <= 0):
        problems.append("adaptive-t grid must be a non-empty set of positive values")

    precision = np.zeros((p, p))
    linear = np.zeros(p)
    if spec.prior_kind == "normal" and not problems:
        mean, cov = prior.beta_prior(p)
        if mean.shape != (p,) or cov.shape != (p, p):
            problems.append(f"beta prior has mean {mean.shape} and covariance {cov.shape}, expected ({p},) and ({p}, {p})")
        else:
            try:
                factor = cholesky_lower(cov, "beta prior covariance")
                precision = linalg.cho_solve((factor, True), np.eye(p))
                linear = precision @ mean
            except (NotPositiveDefiniteError, ValidationError) as e:
                problems.append(f"B_beta is not symmetric positive definite: {e}")
    if spec.prior_kind == "horseshoe" and dataset.has_intercept:
        problems.append("horseshoe prior carries its own intercept alpha; drop the intercept column from X")

    h_max = None
    effect = spec.random_effect
    if effect is not None and effect.kind == "intercept":
        if dataset.groups is None or dataset.groups.shape[0] != n:
            problems.append("random-intercept model needs one group label per observation")
        elif dataset.groups.min() < 0:
            problems.append("group labels must be nonnegative integers")
        elif np.any(np.bincount(dataset.groups) == 0):
            warnings.append("some group labels have no observations; their intercepts follow the prior")
    if effect is not None and effect.kind == "spatial":
        if dataset.coords is None or dataset.coords.shape != (n, 2):
            problems.append("spatial model needs an n x 2 coordinate matrix")
        else:
            distances = pdist(dataset.coords)
            if distances.size and np.min(distances) == 0:
                problems.append("spatial coordinates must be pairwise distinct")
            h_max = float(np.median(distances)) if distances.size else 1.0
    if effect is None and dataset.coords is not None:
        warnings.append("coordinates supplied but no spatial effect requested; they are ignored")

    if not problems and n >= 1 and _column_rank(dataset.X) < p:
        warnings.append(f"X has column rank {_column_rank(dataset.X)} < {p}; the posterior relies on the proper prior")

    if probe is not None:
        if max(probe.indices) >= n or min(probe.indices) < 0:
            problems.append("outlier probe index out of range")
        clean = n - len(probe.indices)
        if clean < len(probe.indices) + p:
            warnings.append(f"(A.1) violated: {clean} non-outliers < {len(probe.indices)} outliers + {p} predictors")

    if problems:
        raise ValidationError(f"Model validation failed with {len(problems)} problem(s): {problems[0]}", problems)
    for message in warnings:
        logging.warning(message)
    return ModelHandle(dataset=dataset, prior=prior, spec=spec, beta_prior_precision=precision,
                       beta_prior_linear=linear, h_max=h_max, warnings=warnings)


def initial_state(handle: ModelHandle) -> ChainState:
    """Least-squares coefficients, residual variance, z = 0, u = v = w = 1."""
    data, prior, spec = handle.dataset, handle.prior, handle.spec
    n, p = data.n, data.p
    design = data.X if spec.prior_kind == "normal" else np.column_stack([np.ones(n), data.X])
    coef = np.linalg.lstsq(design, data.y, rcond=None)[0] if design.shape[1] else np.zeros(0)
    residual = data.y - design @ coef
    sigma2 = float(np.var(residual)) if n > 1 else 1.0
    if not sigma2 > 0:
        sigma2 = max(float(np.var(data.y)), 1.0) * 1e-4 if n > 1 else 1.0
    alpha, beta = (0.0, coef) if spec.prior_kind == "normal" else (float(coef[0]), coef[1:])

    df = 1.0
    if spec.error_model == "at":
        df = float(max(spec.df_grid))
    elif spec.df is not None:
        df = float(spec.df)
    z = np.ones(n, dtype=int) if spec.error_model in ("t", "at") else np.zeros(n, dtype=int)

    if spec.random_effect is None:
        effects = np.zeros(0)
    elif spec.random_effect.kind == "intercept":
        effects = np.zeros(data.n_groups)
    else:
        effects = np.zeros(n)

    return ChainState(
        beta=np.asarray(beta, dtype=float), sigma2=sigma2, z=z,
        u=np.ones(n), v=np.ones(n), w=np.ones(n),
        s=0.5 if prior.fix_s is None else float(prior.fix_s),
        gamma=float(prior.gamma), df=df, alpha=alpha,
        xi=np.ones(p), lam=np.ones(p), tau2=1.0, nu=1.0,
        b=effects, tau_v2=1.0, kappa2=1.0,
        h=(handle.h_max / 2.0) if handle.h_max else 1.0,
    )


def load_prior(path=None):
    if path is None:
        return PriorConfig()
    return PriorConfig.from_json(path)
