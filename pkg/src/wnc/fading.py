"""Parametric fading-gain models and the induced instantaneous-capacity law.

A flat-fading channel with bandwidth W and mean SNR gamma maps the random
gain envelope H onto the per-slot capacity

    C = W * log2(1 + gamma * H**2)            [bits/slot]

so every capacity functional reduces to a gain functional through
r(x) = sqrt((2**(x/W) - 1) / gamma).  The named gain laws are:

    Rayleigh(sigma)        E[H^2] = 2 sigma^2 (default sigma = 1/sqrt(2))
    Rice(s, sigma0)        LOS amplitude s, per-component variance sigma0^2
    Nakagami(m, omega)     H^2 ~ Gamma(m, omega/m), E[H^2] = omega
    Weibull(c, k)          tail P(H > r) = exp(-c r^k)
    Lognormal(mu, sigma)   log H ~ N(mu, sigma^2)

plus FrequencySelective, the independent sum of per-subchannel capacities.
All five named laws give light-tailed capacity; `certify_light_tail`
produces an explicit (a, b) pair with tail(x) <= a*exp(-b*x) on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

from .distributions import DEFAULT_GRID_N, DiscreteDistribution
from .errors import HeavyTailError, NumericFailure, ValidationError

_EXP_OVERFLOW = 700.0
_GAIN_CLIP_Q = 1e-12          # gain domain clipped at the 1 - 1e-12 quantile
_RATE_CAP = 64.0              # largest certified exponential rate (per bit)
_PREFACTOR_CAP = math.e       # default prefactor budget for rate search

__all__ = [
    "ChannelSpec", "Rayleigh", "Rice", "Nakagami", "Weibull", "Lognormal",
    "FrequencySelective", "FadingMarginal", "TailCertificate",
    "capacity_marginal", "capacity_cdf", "capacity_tail", "capacity_quantile",
    "cgf", "certify_light_tail", "exponential_tail_prefactor",
    "tail_minplus_convolution", "rayleigh_capacity_cdf",
]


def _require_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive finite real, got {value!r}")


@dataclass(frozen=True)
class ChannelSpec:
    """Bandwidth W (Hz, unit slot duration) and dimensionless mean SNR gamma."""

    bandwidth_w: float
    snr_gamma: float

    def __post_init__(self):
        _require_positive("bandwidth_w", self.bandwidth_w)
        _require_positive("snr_gamma", self.snr_gamma)


@dataclass(frozen=True)
class Rayleigh:
    sigma: float = 1.0 / math.sqrt(2.0)

    def __post_init__(self):
        _require_positive("sigma", self.sigma)

    def gain(self):
        return stats.rayleigh(scale=self.sigma)

    def sample_gain(self, rng, size):
        return rng.rayleigh(self.sigma, size)


@dataclass(frozen=True)
class Rice:
    s: float
    sigma0: float

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s >= 0):
            raise ValidationError(f"s must be a nonnegative finite real, got {self.s!r}")
        _require_positive("sigma0", self.sigma0)

    def gain(self):
        # P(H > r) = Q1(s/sigma0, r/sigma0), the Marcum Q tail
        return stats.rice(self.s / self.sigma0, scale=self.sigma0)

    def sample_gain(self, rng, size):
        return np.hypot(rng.normal(self.s, self.sigma0, size),
                        rng.normal(0.0, self.sigma0, size))


@dataclass(frozen=True)
class Nakagami:
    m: float
    omega: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m >= 0.5):
            raise ValidationError(f"m must be >= 0.5, got {self.m!r}")
        _require_positive("omega", self.omega)

    def gain(self):
        return stats.nakagami(self.m, scale=math.sqrt(self.omega))

    def sample_gain(self, rng, size):
        return np.sqrt(rng.gamma(self.m, self.omega / self.m, size))


@dataclass(frozen=True)
class Weibull:
    c: float
    k: float

    def __post_init__(self):
        _require_positive("c", self.c)
        _require_positive("k", self.k)

    def gain(self):
        # exp(-(r/l)^k) = exp(-c r^k) with l = c^(-1/k)
        return stats.weibull_min(self.k, scale=self.c ** (-1.0 / self.k))

    def sample_gain(self, rng, size):
        return (rng.exponential(1.0, size) / self.c) ** (1.0 / self.k)


@dataclass(frozen=True)
class Lognormal:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValidationError(f"mu must be finite, got {self.mu!r}")
        _require_positive("sigma", self.sigma)

    def gain(self):
        return stats.lognorm(self.sigma, scale=math.exp(self.mu))

    def sample_gain(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)


@dataclass(frozen=True)
class FrequencySelective:
    """Parallel independent subchannels; capacity is the sum of the parts."""

    subchannels: tuple

    def __post_init__(self):
        if len(self.subchannels) < 1:
            raise ValidationError("FrequencySelective needs at least one subchannel")
        for spec, model in self.subchannels:
            if not isinstance(spec, ChannelSpec):
                raise ValidationError("subchannel entries must be (ChannelSpec, model)")
            if isinstance(model, FrequencySelective):
                raise ValidationError("nested FrequencySelective is not supported")


_SIMPLE_MODELS = (Rayleigh, Rice, Nakagami, Weibull, Lognormal)


class FadingMarginal:
    """Instantaneous-capacity law of a (ChannelSpec, FadingModel) pair.

    Implements the capacity-law protocol shared with DiscreteDistribution:
    cdf / tail / quantile / cgf / mean / var / sample / discretize.
    """

    def __init__(self, spec: ChannelSpec, model):
        if isinstance(model, FrequencySelective):
            if len(model.subchannels) == 1:
                # a single subchannel is exactly that channel
                spec, model = model.subchannels[0]
                self._parts = None
            else:
                self._parts = [FadingMarginal(sub_spec, sub_model)
                               for sub_spec, sub_model in model.subchannels]
        elif isinstance(model, _SIMPLE_MODELS):
            self._parts = None
        else:
            raise ValidationError(f"unknown fading model {model!r}")
        self.spec = spec
        self.model = model

    # -- gain <-> capacity transforms (single channel) -------------------

    @cached_property
    def _gain(self):
        return self.model.gain()

    def _gain_radius(self, x):
        w, g = self.spec.bandwidth_w, self.spec.snr_gamma
        return np.sqrt(np.expm1(np.asarray(x, dtype=float) / w * math.log(2.0)) / g)

    def _capacity_of_gain(self, r):
        w, g = self.spec.bandwidth_w, self.spec.snr_gamma
        return w * np.log1p(g * np.square(r)) / math.log(2.0)

    @property
    def is_composite(self) -> bool:
        return self._parts is not None

    @cached_property
    def _grid_law(self) -> DiscreteDistribution:
        """Discretised law; for composite models, the subchannel convolution."""
        if not self.is_composite:
            return self._discretize_single(DEFAULT_GRID_N)
        # common uniform grid so the convolution stays on a lattice
        his = [p.quantile(1.0 - 1e-9) for p in self._parts]
        hi = sum(his)
        n = DEFAULT_GRID_N
        h = hi / n
        out = None
        for part, part_hi in zip(self._parts, his):
            k = max(int(math.ceil(part_hi / h)), 8)
            edges = h * np.arange(k + 1)
            cvals = np.concatenate((part.cdf(edges[1:-1]), [1.0]))
            mass = np.diff(np.concatenate(([0.0], cvals)))
            mass = np.clip(mass, 0.0, None)
            mass /= mass.sum()
            if out is None:
                out = mass
            else:
                out = np.convolve(out, mass)
        centers = h * (np.arange(out.size) + 0.5)
        keep = out > 0
        return DiscreteDistribution(centers[keep], out[keep] / out[keep].sum())

    def _discretize_single(self, n):
        x_lo = self.quantile(1e-9)
        x_hi = self.quantile(1.0 - 1e-9)
        return DiscreteDistribution.from_cdf(self.cdf, x_lo, x_hi, n)

    # -- protocol ---------------------------------------------------------

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValidationError("capacity argument must be nonnegative")
        if self.is_composite:
            out = self._grid_law.cdf(x)
        elif isinstance(self.model, Rayleigh):
            out = rayleigh_capacity_cdf(self.spec, self.model, x)
        else:
            out = self._gain.cdf(self._gain_radius(x))
        return float(out) if np.ndim(x) == 0 else out

    def cdf_generic(self, x):
        """Gain-transform path F_H(r(x)) for every simple model (no closed forms)."""
        x = np.asarray(x, dtype=float)
        if self.is_composite:
            raise ValidationError("generic path applies to single-channel models")
        out = self._gain.cdf(self._gain_radius(x))
        return float(out) if np.ndim(x) == 0 else out

    def tail(self, x):
        """P(C > x), computed from the gain survival function (no 1-CDF)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValidationError("capacity argument must be nonnegative")
        if self.is_composite:
            out = self._grid_law.tail(x)
        else:
            out = self._gain.sf(self._gain_radius(x))
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, p: float) -> float:
        if not 0.0 < p < 1.0:
            raise ValidationError(f"quantile level must be in (0,1), got {p!r}")
        if self.is_composite:
            return self._grid_law.quantile(p)
        return float(self._capacity_of_gain(self._gain.ppf(p)))

    def cgf(self, theta: float) -> float:
        """log E[exp(theta C)] by composite Gauss-Legendre quadrature.

        The gain axis is partitioned into dyadic probability slices between
        the 1e-15 and 1 - 1e-12 gain quantiles, so node density follows the
        mass even when the pdf is singular at the origin (Weibull k < 1) or
        the law is extremely skewed (lognormal).  kappa(0) = 0 exactly.
        Returns +inf when the integrand is still growing at the clip point
        (no exponential moment) or kappa exceeds the exp overflow guard.
        """
        if not np.isfinite(theta):
            raise ValidationError("theta must be finite")
        if theta == 0.0:
            return 0.0
        if self.is_composite:
            parts = [p.cgf(theta) for p in self._parts]
            return math.inf if any(math.isinf(v) for v in parts) else float(sum(parts))
        return self._cgf_quadrature(theta)

    @cached_property
    def _slices(self):
        """Dyadic probability breakpoints mapped onto the gain axis."""
        left = 0.5 ** np.arange(50, 0, -1)       # 2^-50 ... 2^-1
        right = 1.0 - 0.5 ** np.arange(2, 41)    # 3/4 ... 1 - 2^-40
        qs = np.concatenate((left, right, [1.0 - _GAIN_CLIP_Q]))
        r = np.asarray(self._gain.ppf(qs), dtype=float)
        r = np.concatenate(([max(float(self._gain.ppf(1e-15)), 0.0)], r))
        keep = np.concatenate(([True], np.diff(r) > 0))
        return r[keep]

    def _log_integrand(self, r, theta):
        with np.errstate(divide="ignore"):
            return theta * self._capacity_of_gain(r) + self._gain.logpdf(r)

    def _expectation_nodes(self):
        nodes, weights = leggauss(64)
        edges = self._slices
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        r = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
        w = half[:, None] * weights[None, :]
        return r.ravel(), w.ravel()

    def _cgf_quadrature(self, theta):
        r_hi = float(self._slices[-1])
        if theta > 0:
            # integrand rising at the clip point means the true integral diverges
            eps = 1e-6 * r_hi
            probe = self._log_integrand(np.array([r_hi - eps, r_hi]), theta)
            if probe[1] > probe[0]:
                return math.inf
        r, w = self._expectation_nodes()
        logs = self._log_integrand(r, theta)
        m = float(np.max(logs))
        total = float(w @ np.exp(logs - m))
        kappa = m + math.log(total)
        return kappa if kappa < _EXP_OVERFLOW else math.inf

    def mean(self) -> float:
        if self.is_composite:
            return float(sum(p.mean() for p in self._parts))
        return self._moment(1)

    def var(self) -> float:
        if self.is_composite:
            return float(sum(p.var() for p in self._parts))
        return self._moment(2) - self._moment(1) ** 2

    def _moment(self, k):
        r, w = self._expectation_nodes()
        vals = self._capacity_of_gain(r) ** k * self._gain.pdf(r)
        return float(w @ vals)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        if self.is_composite:
            return sum(p.sample(rng, size) for p in self._parts)
        return self._capacity_of_gain(self.model.sample_gain(rng, size))

    def discretize(self, n: int = DEFAULT_GRID_N) -> DiscreteDistribution:
        if self.is_composite:
            return self._grid_law
        if n == DEFAULT_GRID_N:
            return self._grid_law
        return self._discretize_single(n)

    @property
    def support_min(self) -> float:
        return 0.0

    @property
    def support_max(self) -> float:
        return math.inf

    def __repr__(self):
        return f"FadingMarginal({self.spec!r}, {self.model!r})"


def capacity_marginal(spec: ChannelSpec, model) -> FadingMarginal:
    """Capacity law object for a channel spec and fading model."""
    return FadingMarginal(spec, model)


def _as_marginal(spec, model):
    """Accept either a fading model (with spec) or a capacity law directly."""
    if isinstance(model, DiscreteDistribution):
        return model
    return FadingMarginal(spec, model)


def rayleigh_capacity_cdf(spec: ChannelSpec, model: Rayleigh, x):
    """Closed-form Rayleigh capacity CDF 1 - exp((1 - 2^(x/W)) / gamma_eff).

    gamma_eff = gamma * 2 sigma^2 reduces to the textbook form at the
    default unit-mean-square gain (sigma = 1/sqrt(2)).
    """
    g_eff = spec.snr_gamma * 2.0 * model.sigma ** 2
    x = np.asarray(x, dtype=float)
    out = -np.expm1(-np.expm1(x / spec.bandwidth_w * math.log(2.0)) / g_eff)
    return float(out) if np.ndim(x) == 0 else out


# -- module-level operations ---------------------------------------------


def capacity_cdf(spec: ChannelSpec, model, x):
    """F_C(x) for x >= 0; frequency-selective models use numeric convolution."""
    if np.any(np.asarray(x, dtype=float) < 0):
        raise ValidationError("capacity argument must be nonnegative")
    return _as_marginal(spec, model).cdf(x)


def capacity_tail(spec: ChannelSpec, model, x):
    """1 - F_C(x), evaluated through the gain survival function."""
    if np.any(np.asarray(x, dtype=float) < 0):
        raise ValidationError("capacity argument must be nonnegative")
    return _as_marginal(spec, model).tail(x)


def capacity_quantile(spec: ChannelSpec, model, p: float) -> float:
    """inf{x : F_C(x) >= p} for p in (0,1)."""
    return _as_marginal(spec, model).quantile(p)


def cgf(spec: ChannelSpec, model, theta: float) -> float:
    """Cumulant generating function of the instantaneous capacity."""
    return _as_marginal(spec, model).cgf(theta)


@dataclass(frozen=True)
class TailCertificate:
    """Certified exponential tail cover tail(x) <= a * exp(-b x) on a grid."""

    prefactor_a: float
    rate_b: float
    fit_range: tuple
    max_violation: float

    def bound(self, x):
        return self.prefactor_a * np.exp(-self.rate_b * np.asarray(x, dtype=float))


def exponential_tail_prefactor(tail_values: np.ndarray, grid: np.ndarray,
                               rate_b: float) -> float:
    """Smallest prefactor a with tail <= a*exp(-b x) at every grid point."""
    pos = tail_values > 0
    if not np.any(pos):
        return 1e-300
    log_a = np.max(np.log(tail_values[pos]) + rate_b * grid[pos])
    if log_a > _EXP_OVERFLOW:
        return math.inf
    return float(math.exp(log_a) * (1.0 + 1e-12))


def certify_light_tail(spec: ChannelSpec, model, x_lo: float, x_hi: float,
                       grid_n: int = 256, rate: float | None = None,
                       prefactor_cap: float = _PREFACTOR_CAP) -> TailCertificate:
    """Search an exponential tail cover with the largest defensible rate.

    For each candidate rate b the prefactor is a(b) = max tail(x)*exp(b x)
    over the grid.  A rate is accepted when the maximising point is not the
    right edge of the grid (no pure extrapolation) and a(b) stays within
    ``prefactor_cap``; laws whose support is exhausted inside the range
    accept every rate up to the cap.  The largest accepted b is located by
    doubling plus bisection.  With ``rate`` given, the search is skipped
    and the certificate is fitted at that rate.

    Raises HeavyTailError when no b > 1e-8 is accepted.
    """
    if not (0 <= x_lo < x_hi):
        raise ValidationError("need 0 <= x_lo < x_hi")
    if grid_n < 16:
        raise ValidationError("grid_n must be >= 16")
    marginal = _as_marginal(spec, model)
    grid = np.linspace(x_lo, x_hi, grid_n)
    tails = np.asarray(marginal.tail(grid), dtype=float)
    if np.any(~np.isfinite(tails)):
        raise NumericFailure("tail evaluation returned non-finite values")

    def make(b):
        a = exponential_tail_prefactor(tails, grid, b)
        violation = float(np.max(tails - a * np.exp(-b * grid)))
        return TailCertificate(a, b, (x_lo, x_hi), violation)

    if rate is not None:
        if rate <= 0:
            raise ValidationError("rate must be positive")
        return make(rate)

    # every rate is defensible only for genuinely bounded support, not for
    # tails that merely underflow to zero inside the fit range
    bounded = marginal.support_max <= x_hi

    def accepted(b):
        pos = tails > 0
        if not np.any(pos):
            return True
        scores = np.log(tails[pos]) + b * grid[pos]
        peak = int(np.argmax(scores))
        interior = peak < pos.sum() - 1 or bounded
        within = bounded or scores[peak] <= math.log(prefactor_cap)
        return interior and within

    b_min = 1e-8
    if not accepted(b_min):
        raise HeavyTailError(
            f"no exponential rate above {b_min} covers the tail on "
            f"[{x_lo}, {x_hi}]: heavy tail detected")
    lo = b_min
    hi = min(2.0 * b_min, _RATE_CAP)
    while accepted(hi):
        lo = hi
        if hi >= _RATE_CAP:
            return make(_RATE_CAP)
        hi = min(hi * 2.0, _RATE_CAP)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if accepted(mid):
            lo = mid
        else:
            hi = mid
    return make(lo)


def tail_minplus_convolution(tails, x: float, splits: int = 512) -> float:
    """Min-plus convolution of tail functions, capped at 1.

    (f (x) g)(x) = inf over y in [0, x] of f(y) + g(x - y), evaluated
    left-to-right over the list.  The infimum is located on a uniform
    split grid and polished with a bounded scalar minimisation, so the
    result is a valid upper bound for the tail of the underlying sum.
    """
    if len(tails) == 0:
        raise ValidationError("need at least one tail function")
    if x < 0:
        raise ValidationError("x must be nonnegative")
    from scipy.optimize import minimize_scalar

    def pairwise(f, g, z):
        if z == 0.0:
            return min(1.0, f(0.0) + g(0.0))
        ys = np.linspace(0.0, z, splits)
        vals = np.array([f(y) + g(z - y) for y in ys])
        j = int(np.argmin(vals))
        lo = ys[max(j - 1, 0)]
        hi = ys[min(j + 1, splits - 1)]
        res = minimize_scalar(lambda y: f(y) + g(z - y), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        return min(float(vals[j]), float(res.fun))

    funcs = list(tails)
    if len(funcs) == 1:
        return min(1.0, float(funcs[0](x)))
    acc = funcs[0]
    for g in funcs[1:-1]:
        prev = acc

        def acc(y, prev=prev, g=g):
            return pairwise(prev, g, y)

    return min(1.0, pairwise(acc, funcs[-1], x))
