"""
distributions.py - Densities, CDFs, quantiles and random draws for the H family,
the EH error mixture and the conjugate kernels (gamma, inverse gamma, GIG with
index 1/2, multivariate normal) used by every sampler.

All random draws take an explicit numpy Generator; nothing here keeps state
apart from the read-only normalizing-constant and density-table caches.
"""

import math
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, linalg, stats

from ehreg.errors import (
    DomainError,
    NotPositiveDefiniteError,
    QuadratureError,
    UndefinedTailError,
    UnsupportedParameterError,
)

LOG_2PI = math.log(2.0 * math.pi)


# --- Parameter types ---
@dataclass(frozen=True)
class HParams:
    """Shape gamma (log-tail exponent) and tail index delta of H(u; gamma, delta)."""
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"H-distribution needs gamma > 0, got {self.gamma}")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise DomainError(f"H-distribution needs delta >= 0, got {self.delta}")


@dataclass(frozen=True)
class EHParams:
    """Mixing weight s of the heavy component and its shape gamma."""
    s: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.s <= 1.0):
            raise DomainError(f"EH mixing weight must lie in [0, 1], got {self.s}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"EH shape needs gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class GigParams:
    """GIG(lam, a, b) with density proportional to u^(lam-1) exp(-(a u + b / u) / 2).

    Only lam = 1/2 is used, where the Bessel ratios have closed forms.
    """
    a: float
    b: float
    lam: float = 0.5

    def __post_init__(self):
        if self.lam != 0.5:
            raise UnsupportedParameterError("Only the GIG index 1/2 is supported")
        if self.a < 0 or self.b < 0 or (self.a == 0 and self.b == 0):
            raise DomainError(f"GIG needs a, b >= 0 with one of them positive, got a={self.a}, b={self.b}")

    def mean(self):
        # K_{3/2}(z) / K_{1/2}(z) = 1 + 1/z
        if self.b == 0:
            return 1.0 / self.a
        root = math.sqrt(self.a * self.b)
        return math.sqrt(self.b / self.a) * (1.0 + 1.0 / root)

    def inverse_mean(self):
        # K_{-1/2} = K_{1/2}
        if self.b == 0:
            return math.inf
        return math.sqrt(self.a / self.b)

    def second_moment(self):
        if self.b == 0:
            return 3.0 / self.a ** 2
        root = math.sqrt(self.a * self.b)
        return (self.b / self.a) * (1.0 + 3.0 / root + 3.0 / root ** 2)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the adaptive quadrature behind the EH density."""
    epsabs: float = 1e-14
    epsrel: float = 1e-10
    limit: int = 500
    max_relative_residual: float = 1e-6


DEFAULT_QUADRATURE = QuadratureSpec()


def _check_finite_nonnegative(u, what="u"):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError(f"{what} must be finite")
    if np.any(u < 0):
        raise DomainError(f"{what} must be nonnegative")
    return u


def _scalar_or_array(values):
    values = np.asarray(values)
    return values.item() if values.ndim == 0 else values


def _log_expm1(t):
    """log(e^t - 1) without overflow for large t."""
    if t > 30.0:
        return t + math.log1p(-math.exp(-t))
    return math.log(math.expm1(t))


# --- H-distribution ---
@lru_cache(maxsize=256)
def _normalizing_constant(gamma, delta):
    # On u = exp(e^s - 1) - 1 the unnormalized kernel integrates as exp(-delta (e^s - 1) - gamma s).
    def integrand(s):
        if s > 700.0:
            return 0.0
        return math.exp(-delta * math.expm1(s) - gamma * s)

    value, abserr = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    if not np.isfinite(value) or value <= 0 or abserr > 1e-8 * value:
        raise QuadratureError(f"Normalizing constant C(delta={delta}, gamma={gamma}) did not converge", abserr)
    logging.debug(f"Cached C(delta={delta}, gamma={gamma}) = {1.0 / value:.12g}")
    return 1.0 / value


def h_normalizing_constant(p: HParams) -> float:
    """C(delta, gamma); exactly gamma when delta = 0."""
    if p.delta == 0:
        return float(p.gamma)
    return _normalizing_constant(float(p.gamma), float(p.delta))


def h_log_density(u, p: HParams):
    """log H(u; gamma, delta)."""
    u = _check_finite_nonnegative(u)
    t = np.log1p(u)
    out = math.log(h_normalizing_constant(p)) - (1.0 + p.delta) * t - (1.0 + p.gamma) * np.log1p(t)
    return _scalar_or_array(out)


def h_density(u, p: HParams):
    """C(delta, gamma) (1+u)^-(1+delta) {1 + log(1+u)}^-(1+gamma)."""
    return _scalar_or_array(np.exp(h_log_density(u, p)))


def h_cdf(u, p: HParams):
    """Closed-form CDF 1 - {1 + log(1+u)}^-gamma (delta = 0 only)."""
    if p.delta != 0:
        raise UnsupportedParameterError("h_cdf has a closed form only for delta = 0; use h_cdf_quadrature")
    u = _check_finite_nonnegative(u)
    return _scalar_or_array(-np.expm1(-p.gamma * np.log1p(np.log1p(u))))


def h_cdf_quadrature(u, p: HParams, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    """CDF for any delta by quadrature on t = log(1+u)."""
    u = _check_finite_nonnegative(u)
    log_c = math.log(h_normalizing_constant(p))

    def integrand(t):
        return math.exp(log_c - p.delta * t - (1.0 + p.gamma) * math.log1p(t))

    out = np.empty(u.shape, dtype=float)
    for idx, value in np.ndenumerate(u):
        upper = math.log1p(value)
        if upper == 0.0:
            out[idx] = 0.0
            continue
        mass, abserr = integrate.quad(integrand, 0.0, upper, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit)
        if abserr > quad.max_relative_residual * max(mass, 1e-300):
            raise QuadratureError(f"H CDF quadrature at u={value} did not converge", abserr)
        out[idx] = min(mass, 1.0)
    return _scalar_or_array(out)


def h_quantile(prob, p: HParams):
    """Inverse of h_cdf: exp((1-prob)^(-1/gamma) - 1) - 1."""
    if p.delta != 0:
        raise UnsupportedParameterError("h_quantile has a closed form only for delta = 0")
    prob = np.asarray(prob, dtype=float)
    if np.any(~np.isfinite(prob)) or np.any(prob < 0) or np.any(prob >= 1):
        raise DomainError("h_quantile needs probabilities in [0, 1)")
    with np.errstate(over='ignore'):
        out = np.expm1(np.expm1(-np.log1p(-prob) / p.gamma))
    return _scalar_or_array(out)


def sample_h(rng: np.random.Generator, p: HParams, size=None):
    """Exact inverse-CDF draw from H(.; gamma)."""
    if p.delta != 0:
        raise UnsupportedParameterError("sample_h supports delta = 0 only")
    return h_quantile(rng.random(size), p)


def sample_h_hierarchy(rng: np.random.Generator, gamma, size=None):
    """Three-level draw w ~ Ga(gamma, 1), v | w ~ Ga(w, 1), u | v ~ Ga(1, v).

    Returns (u, v, w). Marginally u ~ H(.; gamma).
    """
    w = rng.gamma(gamma, 1.0, size)
    v = rng.gamma(w, 1.0)
    with np.errstate(divide='ignore'):
        u = rng.standard_exponential(np.shape(v)) / v
    return u, v, w


# --- EH mixture ---
def _heavy_log_integrand(t, x, gamma, delta, log_c):
    """log of phi(x; 0, u) H(u) du/dt at u = e^t - 1."""
    if t <= 0.0:
        return -math.inf
    log_u = _log_expm1(t)
    quad_term = 0.0 if x == 0.0 else 0.5 * x * x * math.exp(-log_u)
    return (-quad_term - 0.5 * (LOG_2PI + log_u)
            + log_c - (1.0 + delta) * t - (1.0 + gamma) * math.log1p(t) + t)


def _heavy_component_log_density(x, gamma, delta, quad):
    x = abs(float(x))
    log_c = math.log(h_normalizing_constant(HParams(gamma, delta)))
    t_peak = math.log1p(x * x)
    t_ref = max(t_peak, 1.0)
    log_scale = _heavy_log_integrand(t_ref, x, gamma, delta, log_c)

    def integrand(t):
        value = _heavy_log_integrand(t, x, gamma, delta, log_c) - log_scale
        return math.exp(value) if value > -745.0 else 0.0

    points = [t_peak] if 0.0 < t_peak < t_ref else None
    lower, err_lower = integrate.quad(integrand, 0.0, t_ref, points=points,
                                      epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit)
    upper, err_upper = integrate.quad(integrand, t_ref, np.inf,
                                      epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit)
    total = lower + upper
    residual = err_lower + err_upper
    if not np.isfinite(total) or total <= 0 or residual > quad.max_relative_residual * total:
        raise QuadratureError(f"Heavy-component integral at x={x} did not converge", residual * math.exp(log_scale))
    return log_scale + math.log(total)


def heavy_component_log_density(x, gamma=1.0, delta=0.0, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    """log f1(x), f1(x) = int phi(x; 0, u) H(u; gamma, delta) du."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    out = np.empty(x.shape, dtype=float)
    for idx, value in np.ndenumerate(x):
        out[idx] = _heavy_component_log_density(value, float(gamma), float(delta), quad)
    return _scalar_or_array(out)


def heavy_component_density(x, gamma=1.0, delta=0.0, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    return _scalar_or_array(np.exp(heavy_component_log_density(x, gamma, delta, quad)))


def eh_log_density(x, p: EHParams, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    """log{(1-s) phi(x) + s f1(x)}, evaluated in log space."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    log_normal = stats.norm.logpdf(x)
    if p.s == 0:
        return _scalar_or_array(log_normal)
    log_heavy = heavy_component_log_density(np.abs(x), p.gamma, 0.0, quad)
    if p.s == 1:
        return _scalar_or_array(log_heavy)
    out = np.logaddexp(math.log1p(-p.s) + log_normal, math.log(p.s) + log_heavy)
    return _scalar_or_array(out)


def eh_density(x, p: EHParams, quad: QuadratureSpec = DEFAULT_QUADRATURE):
    """EH density (1-s) phi(x; 0, 1) + s int phi(x; 0, u) H(u; gamma) du."""
    return _scalar_or_array(np.exp(eh_log_density(x, p, quad)))


def eh_tail_constant(p: EHParams) -> float:
    """Limit of |x| (log|x|)^(1+gamma) f_EH(x): s gamma / 2^(1+gamma)."""
    if p.s <= 0:
        raise UndefinedTailError("Tail constant is undefined without a heavy component (s = 0)")
    return p.s * p.gamma / 2.0 ** (1.0 + p.gamma)


class EHDensityTable:
    """Interpolated log f1 on r = log(1 + |x|) for bulk likelihood evaluation.

    Nodes come from the quadrature path; beyond the last node the exact
    quadrature is used.
    """

    def __init__(self, gamma, delta=0.0, r_max=None, n_nodes=600, quad: QuadratureSpec = DEFAULT_QUADRATURE):
        self.gamma = float(gamma)
        self.delta = float(delta)
        self.quad = quad
        self.r_max = float(r_max if r_max is not None else math.log1p(1e8))
        nodes = np.linspace(0.0, self.r_max, n_nodes)
        values = heavy_component_log_density(np.expm1(nodes), self.gamma, self.delta, quad)
        self._spline = interpolate.CubicSpline(nodes, values, bc_type=((1, 0.0), 'not-a-knot'))

    def heavy_log_pdf(self, x):
        r = np.log1p(np.abs(np.asarray(x, dtype=float)))
        out = np.asarray(self._spline(np.minimum(r, self.r_max)), dtype=float)
        beyond = r > self.r_max
        if np.any(beyond):
            out[beyond] = heavy_component_log_density(np.expm1(r[beyond]), self.gamma, self.delta, self.quad)
        return out

    def log_pdf(self, x, s):
        """log{(1-s) phi(x) + s f1(x)}; s may be an array broadcastable with x."""
        x = np.asarray(x, dtype=float)
        s = np.asarray(s, dtype=float)
        with np.errstate(divide='ignore'):
            return np.logaddexp(np.log1p(-s) + stats.norm.logpdf(x), np.log(s) + self.heavy_log_pdf(x))


@lru_cache(maxsize=64)
def eh_density_table(gamma, delta=0.0):
    logging.info(f"Building EH density table for gamma={gamma}, delta={delta}")
    return EHDensityTable(gamma, delta)


# --- Conjugate kernels ---
def sample_gamma(rng: np.random.Generator, shape, rate, size=None):
    """Ga(shape, rate) draw (rate parameterization)."""
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size)


def sample_inverse_gamma(rng: np.random.Generator, shape, rate, size=None):
    """IG(shape, rate) draw: reciprocal of Ga(shape, rate)."""
    return 1.0 / sample_gamma(rng, shape, rate, size)


def sample_gig_half(rng: np.random.Generator, a, b, size=None):
    """Draw from GIG(1/2, a, b), density proportional to u^(-1/2) exp(-(a u + b/u) / 2).

    For b > 0, 1/u is inverse Gaussian with mean sqrt(a/b) and shape a, drawn by
    the transformation-with-rejection method written in a cancellation-free form
    (numpy's wald loses all precision once mean/shape is large, i.e. b -> 0).
    For b = 0 the law is Gamma(1/2, rate a/2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise DomainError("GIG(1/2, a, b) needs a > 0")
    if np.any(~np.isfinite(b)) or np.any(b < 0):
        raise DomainError("GIG(1/2, a, b) needs b >= 0")
    shape = np.broadcast_shapes(a.shape, b.shape) if size is None else size
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)

    normal = rng.standard_normal(shape)
    uniform = rng.random(shape)
    n2 = normal * normal
    with np.errstate(divide='ignore', invalid='ignore'):
        mu = np.sqrt(a / b)
        # X = mu + mu^2 N^2 / (2a) - mu / (2a) sqrt(4 a mu N^2 + mu^2 N^4), rewritten
        x = 4.0 * a / (n2 * (1.0 + np.sqrt(1.0 + 4.0 * a / (mu * n2))) ** 2)
        accept = uniform * (mu + x) <= mu
        x = np.where(accept, x, mu * mu / x)
        u = 1.0 / x
    degenerate = b == 0
    if np.any(degenerate):
        u = np.where(degenerate, n2 / a, u)
    return _scalar_or_array(u)


def _symmetric_checked(matrix, context):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f"{context} must be square, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-10 * scale):
        raise DomainError(f"{context} must be symmetric")
    return 0.5 * (matrix + matrix.T)


def cholesky_lower(matrix, context="matrix"):
    """Lower Cholesky factor; raises NotPositiveDefiniteError naming the failing minor."""
    matrix = _symmetric_checked(matrix, context)
    factor, info = linalg.lapack.dpotrf(matrix, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info, context)
    if info < 0:
        raise DomainError(f"Invalid argument {-info} passed to Cholesky for {context}")
    return factor


def solve_spd(matrix, rhs, context="matrix"):
    """Solve matrix @ x = rhs for symmetric positive definite matrix."""
    factor = cholesky_lower(matrix, context)
    return linalg.cho_solve((factor, True), rhs)


def sample_mvn(rng: np.random.Generator, mean, cov=None, precision=None, size=None):
    """Multivariate normal draw parameterized by covariance or by precision.

    The precision path inverts through its Cholesky factor and then factors the
    covariance, so both parameterizations consume the same normals identically.
    """
    if (cov is None) == (precision is None):
        raise DomainError("sample_mvn needs exactly one of cov or precision")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if precision is not None:
        factor = cholesky_lower(precision, "precision")
        cov = linalg.cho_solve((factor, True), np.eye(factor.shape[0]))
    chol = cholesky_lower(cov, "covariance")
    if chol.shape[0] != mean.shape[0]:
        raise DomainError(f"Mean has length {mean.shape[0]} but matrix is {chol.shape[0]}x{chol.shape[0]}")
    if size is None:
        return mean + chol @ rng.standard_normal(mean.shape[0])
    draws = rng.standard_normal((size, mean.shape[0]))
    return mean + draws @ chol.T
