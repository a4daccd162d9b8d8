"""Grid-based probability laws.

A ``DiscreteDistribution`` (support points + masses) is the common numeric
currency of the toolkit: CDFs, tails, quantiles, cumulant generating
functions, convolutions and the increment laws used by the ruin-theoretic
prefactors are all evaluated on it.  Continuous capacity laws are reduced
to this form by ``from_cdf`` (4096 cells spanning the [1e-9, 1-1e-9]
quantile range by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError

MASS_TOL = 1e-9
DEFAULT_GRID_N = 4096
_EXP_OVERFLOW = 700.0

__all__ = ["DiscreteDistribution", "MASS_TOL", "DEFAULT_GRID_N"]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability law with finite support.

    support : strictly increasing 1-d array of real values
    mass    : nonnegative weights of the same length, summing to 1
              within ``MASS_TOL`` (renormalised exactly after validation)
    """

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        m = np.asarray(self.mass, dtype=float)
        if s.ndim != 1 or m.ndim != 1 or s.size != m.size or s.size == 0:
            raise ValidationError("support and mass must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(m))):
            raise ValidationError("support and mass must be finite")
        if s.size > 1 and not np.all(np.diff(s) > 0):
            raise ValidationError("support must be strictly increasing")
        if np.any(m < -MASS_TOL):
            raise ValidationError("mass must be nonnegative")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"mass must sum to 1 within {MASS_TOL}, got {total!r}")
        m = np.clip(m, 0.0, None) / np.clip(m, 0.0, None).sum()
        s = s.copy()
        s.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "mass", m)

    # -- cached cumulative structure ------------------------------------

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self.mass)
        c[-1] = 1.0
        return c

    @cached_property
    def _suffix(self) -> np.ndarray:
        # _suffix[i] = P(X >= support[i]); suffix sums avoid 1-CDF cancellation
        return np.cumsum(self.mass[::-1])[::-1]

    # -- basic functionals ----------------------------------------------

    def cdf(self, x):
        """P(X <= x), evaluated exactly on the atoms."""
        idx = np.searchsorted(self.support, np.asarray(x, dtype=float), side="right")
        padded = np.concatenate(([0.0], self._cum))
        out = padded[idx]
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def tail(self, x):
        """P(X > x) via suffix sums (stable deep in the tail)."""
        idx = np.searchsorted(self.support, np.asarray(x, dtype=float), side="right")
        padded = np.concatenate((self._suffix, [0.0]))
        out = padded[idx]
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def tail_geq(self, x):
        """P(X >= x)."""
        idx = np.searchsorted(self.support, np.asarray(x, dtype=float), side="left")
        padded = np.concatenate((self._suffix, [0.0]))
        out = padded[idx]
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def quantile(self, p: float) -> float:
        """Generalised inverse inf{x : F(x) >= p} for p in (0, 1)."""
        if not 0.0 < p < 1.0:
            raise ValidationError(f"quantile level must be in (0,1), got {p!r}")
        return float(self.support[np.searchsorted(self._cum, p, side="left")])

    def mean(self) -> float:
        return float(self.support @ self.mass)

    def var(self) -> float:
        mu = self.mean()
        return float(((self.support - mu) ** 2) @ self.mass)

    def cgf(self, theta: float) -> float:
        """log E[exp(theta X)], exact on the atoms; 0 at theta = 0."""
        if not np.isfinite(theta):
            raise ValidationError("theta must be finite")
        if theta == 0.0:
            return 0.0
        pos = self.mass > 0
        return float(logsumexp(theta * self.support[pos], b=self.mass[pos]))

    def mgf(self, theta: float) -> float:
        k = self.cgf(theta)
        return float(np.exp(k)) if k < _EXP_OVERFLOW else float("inf")

    # -- structure ------------------------------------------------------

    @property
    def support_min(self) -> float:
        return float(self.support[0])

    @property
    def support_max(self) -> float:
        return float(self.support[-1])

    def affine(self, shift: float = 0.0, scale: float = 1.0) -> "DiscreteDistribution":
        """Law of shift + scale*X (scale may be negative)."""
        if scale == 0.0:
            return DiscreteDistribution.point_mass(shift)
        s = shift + scale * self.support
        m = self.mass
        if scale < 0:
            s, m = s[::-1], m[::-1]
        return DiscreteDistribution(s, m)

    def convolve(self, other: "DiscreteDistribution",
                 max_atoms: int = 8192) -> "DiscreteDistribution":
        """Law of the independent sum X + Y.

        Exact outer-sum when the product of supports is small; otherwise
        regridded onto ``max_atoms`` uniform cells (mass preserving).
        """
        if self.support.size * other.support.size > 4_000_000:
            a = self.regrid(2048)
            b = other.regrid(2048)
        else:
            a, b = self, other
        sums = np.add.outer(a.support, b.support).ravel()
        wts = np.outer(a.mass, b.mass).ravel()
        uniq, inv = np.unique(sums, return_inverse=True)
        mass = np.zeros_like(uniq)
        np.add.at(mass, inv, wts)
        out = DiscreteDistribution(uniq, mass)
        if uniq.size > max_atoms:
            out = out.regrid(max_atoms)
        return out

    def regrid(self, n: int) -> "DiscreteDistribution":
        """Bin the atoms onto an n-cell uniform grid over the support span."""
        if self.support.size <= n:
            return self
        lo, hi = self.support_min, self.support_max
        edges = np.linspace(lo, hi, n + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        idx = np.clip(np.searchsorted(edges, self.support, side="right") - 1, 0, n - 1)
        mass = np.zeros(n)
        np.add.at(mass, idx, self.mass)
        keep = mass > 0
        return DiscreteDistribution(centers[keep], mass[keep])

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        u = rng.random(size)
        return self.support[np.searchsorted(self._cum, u, side="left")]

    def discretize(self, n: int = DEFAULT_GRID_N) -> "DiscreteDistribution":
        """Already discrete; returns itself (protocol compatibility)."""
        return self

    # -- constructors ----------------------------------------------------

    @staticmethod
    def point_mass(c: float) -> "DiscreteDistribution":
        return DiscreteDistribution(np.array([float(c)]), np.array([1.0]))

    @staticmethod
    def from_cdf(cdf_fn, x_lo: float, x_hi: float,
                 n: int = DEFAULT_GRID_N) -> "DiscreteDistribution":
        """Discretise a continuous CDF onto an n-node uniform grid.

        Nodes are cell centers; each node receives the CDF increment over
        its cell, with the two edge cells absorbing the clipped tails so
        the masses sum to 1 exactly.
        """
        if not x_lo < x_hi:
            raise ValidationError("x_lo must be < x_hi")
        nodes = np.linspace(x_lo, x_hi, n)
        bounds = np.empty(n + 1)
        bounds[1:-1] = 0.5 * (nodes[:-1] + nodes[1:])
        cvals = np.asarray(cdf_fn(bounds[1:-1]), dtype=float)
        cvals = np.concatenate(([0.0], cvals, [1.0]))
        mass = np.diff(cvals)
        mass = np.clip(mass, 0.0, None)
        keep = mass > 0
        return DiscreteDistribution(nodes[keep], mass[keep] / mass[keep].sum())
