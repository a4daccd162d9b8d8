"""Dependence-structure models of the cumulative capacity S(t) and its bounds.

Three process types cover the dependence spectrum:

    Comonotonic(marginal)      all slots driven by one uniform; S(t) = t*C
    Additive(marginal)         i.i.d. slots (product copula)
    MarkovAdditive(kernel)     increments modulated by a finite Markov chain

plus ``AntitheticPairing``, the negatively dependent construction used by
the ordering checks (consecutive slots are F^{-1}(U), F^{-1}(1-U)).

Bounds: the comonotonic closed form F_C(x/t), universal Frechet envelopes,
Chernoff bounds  1 - e^{t k(th) - th x} <= F_S(t)(x) <= e^{t k(-th) + th x}
for additive processes, and the Perron-Frobenius analogue with prefactor
h(J0)/min_j h(J_j) for Markov-additive processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .distributions import DiscreteDistribution
from .errors import NumericFailure, ValidationError

_EXP_OVERFLOW = 700.0

__all__ = [
    "Comonotonic", "Additive", "MarkovAdditive", "AntitheticPairing",
    "CapacityProcess", "MarkovKernel", "SpectralData", "BoundReport",
    "comonotonic_cdf", "frechet_bounds", "additive_cdf_bounds",
    "markov_cdf_bounds", "transient_bounds", "mgf_matrix", "perron_frobenius",
    "kernel_cgf", "marginal_of", "process_mean_rate", "theta_grid",
]


# ---------------------------------------------------------------------------
# result record


@dataclass(frozen=True)
class BoundReport:
    """A computed bound value with its provenance.

    kind is one of cdf_lower / cdf_upper / tail_upper / delay_upper /
    delay_lower; value is always clipped to [0, 1].
    """

    kind: str
    value: float
    theta_star: Optional[float]
    prefactor: float
    horizon: float
    notes: str = ""

    def __post_init__(self):
        if self.kind not in ("cdf_lower", "cdf_upper", "tail_upper",
                             "delay_upper", "delay_lower"):
            raise ValidationError(f"unknown bound kind {self.kind!r}")
        if not (0.0 <= self.value <= 1.0):
            raise ValidationError(f"bound value must be in [0,1], got {self.value!r}")


# ---------------------------------------------------------------------------
# Markov kernel


@dataclass(frozen=True)
class MarkovKernel:
    """Finite-state Markov-additive kernel.

    transition is row-stochastic and must be irreducible and aperiodic;
    increments holds one DiscreteDistribution per transition.  In the
    compact destination mode (the default construction) H_ij depends only
    on the destination j.
    """

    states: tuple
    transition: np.ndarray
    increments: tuple            # matrix of DiscreteDistribution, row-major
    by_destination: bool = False

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        n = len(self.states)
        if n < 1 or p.shape != (n, n):
            raise ValidationError("transition must be an |E| x |E| matrix")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValidationError("transition rows must be probabilities summing to 1")
        reach = np.linalg.matrix_power((p > 0).astype(float) + np.eye(n), n)
        if np.any(reach <= 0):
            raise ValidationError("transition matrix must be irreducible")
        if n > 1:
            # aperiodicity: P^m eventually strictly positive
            q = p.copy()
            for _ in range(n * n):
                if np.all(q > 0):
                    break
                q = q @ p
            else:
                raise ValidationError("transition matrix must be aperiodic")
        rows = tuple(tuple(row) for row in self.increments)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValidationError("increments must be an |E| x |E| matrix of laws")
        for r in rows:
            for law in r:
                if not isinstance(law, DiscreteDistribution):
                    raise ValidationError("increment laws must be DiscreteDistribution")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "increments", rows)

    @staticmethod
    def from_destination_laws(states, transition, laws) -> "MarkovKernel":
        """Compact mode: the increment law depends only on the destination."""
        laws = [law if isinstance(law, DiscreteDistribution)
                else DiscreteDistribution.point_mass(float(law)) for law in laws]
        n = len(states)
        if len(laws) != n:
            raise ValidationError("need one increment law per state")
        rows = tuple(tuple(laws) for _ in range(n))
        return MarkovKernel(tuple(states), np.asarray(transition, float), rows,
                            by_destination=True)

    @cached_property
    def stationary(self) -> np.ndarray:
        """Stationary law pi of the transition matrix (pi P = pi)."""
        n = len(self.states)
        a = np.vstack([self.transition.T - np.eye(n), np.ones(n)])
        b = np.concatenate([np.zeros(n), [1.0]])
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def state_index(self, state) -> int:
        if isinstance(state, (int, np.integer)):
            if not 0 <= state < len(self.states):
                raise ValidationError(f"state index {state} out of range")
            return int(state)
        try:
            return self.states.index(state)
        except ValueError:
            raise ValidationError(f"unknown state {state!r}") from None

    def mean_rate(self) -> float:
        """Stationary mean increment sum_i pi_i sum_j p_ij E[Y | i->j]."""
        pi = self.stationary
        means = np.array([[law.mean() for law in row] for row in self.increments])
        return float(pi @ (self.transition * means).sum(axis=1))

    def shifted(self, delta: float) -> "MarkovKernel":
        """Kernel with every increment shifted by delta (law of Y + delta)."""
        rows = tuple(tuple(law.affine(shift=delta) for law in row)
                     for row in self.increments)
        return MarkovKernel(self.states, self.transition, rows,
                            by_destination=self.by_destination)


def mgf_matrix(kernel: MarkovKernel, theta: float) -> np.ndarray:
    """Tilted kernel F[theta] with entries p_ij * E[exp(theta Y) | i->j].

    Equals the transition matrix exactly at theta = 0.
    """
    if not np.isfinite(theta):
        raise ValidationError("theta must be finite")
    n = len(kernel.states)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            m = kernel.increments[i][j].mgf(theta)
            if not np.isfinite(m):
                raise NumericFailure(
                    f"mgf overflow at transition ({kernel.states[i]!r}, "
                    f"{kernel.states[j]!r}) for theta={theta!r}")
            out[i, j] = kernel.transition[i, j] * m
    return out


@dataclass(frozen=True)
class SpectralData:
    """Perron-Frobenius data of a tilted kernel.

    log_eigenvalue plays the role of kappa(theta); right_vector is h with
    pi . h = 1 and left_vector is v with v . h = 1.
    """

    theta: float
    log_eigenvalue: float
    right_vector: np.ndarray
    left_vector: np.ndarray


def perron_frobenius(matrix: np.ndarray, theta: float = math.nan,
                     stationary: Optional[np.ndarray] = None,
                     tol: float = 1e-12, max_iter: int = 10_000,
                     check_irreducible: bool = True) -> SpectralData:
    """Dominant eigenvalue and eigenvectors of a nonnegative irreducible matrix.

    Power iteration on the matrix (right vector) and its transpose (left
    vector) to relative tolerance ``tol``.  h is normalised by pi . h = 1
    (pi defaults to the sum-normalised left vector) and v by v . h = 1.
    The residual ||M h - lam h|| must stay below 1e-9 relative, else a
    NumericFailure is raised.  ``check_irreducible=False`` skips the
    zero-pattern check (used for tilted kernels whose small entries have
    underflowed but are positive in exact arithmetic).
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValidationError("matrix must be square")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValidationError("matrix must be entrywise nonnegative and finite")
    if check_irreducible:
        reach = np.linalg.matrix_power((m > 0).astype(float) + np.eye(n), n)
        if np.any(reach <= 0):
            raise ValidationError("matrix must be irreducible")

    def dominant(a):
        x = np.full(n, 1.0 / n)
        lam = 0.0
        for it in range(max_iter):
            y = a @ x
            lam_new = float(np.max(y))
            if lam_new <= 0:
                raise NumericFailure("power iteration collapsed to zero")
            y /= lam_new
            if (abs(lam_new - lam) <= tol * lam_new
                    and np.max(np.abs(y - x)) <= tol):
                return lam_new, y
            x, lam = y, lam_new
        raise NumericFailure(
            f"power iteration did not converge in {max_iter} iterations "
            f"(last eigenvalue {lam!r})")

    lam, h = dominant(m)
    _, v = dominant(m.T)
    pi = np.asarray(stationary, float) if stationary is not None else v / v.sum()
    h = h / float(pi @ h)
    v = v / float(v @ h)
    resid = np.max(np.abs(m @ h - lam * h)) / np.max(np.abs(h))
    if resid > 1e-9 * max(lam, 1.0):
        raise NumericFailure(f"eigen residual {resid:.3e} exceeds tolerance")
    return SpectralData(theta=theta, log_eigenvalue=math.log(lam),
                        right_vector=h, left_vector=v)


def kernel_cgf(kernel: MarkovKernel, theta: float) -> float:
    """kappa(theta) = log of the Perron-Frobenius eigenvalue of F[theta].

    Overflowing tilts report +inf (outside the effective domain).
    """
    if theta == 0.0:
        return 0.0
    try:
        m = mgf_matrix(kernel, theta)
    except NumericFailure:
        return math.inf
    if len(kernel.states) == 1:
        return math.log(m[0, 0])
    return perron_frobenius(m, theta=theta, stationary=kernel.stationary,
                            check_irreducible=False).log_eigenvalue


def kernel_spectral(kernel: MarkovKernel, theta: float) -> SpectralData:
    m = mgf_matrix(kernel, theta)
    if len(kernel.states) == 1:
        return SpectralData(theta=theta, log_eigenvalue=math.log(m[0, 0]),
                            right_vector=np.ones(1), left_vector=np.ones(1))
    return perron_frobenius(m, theta=theta, stationary=kernel.stationary,
                            check_irreducible=False)


# ---------------------------------------------------------------------------
# process types


@dataclass(frozen=True)
class Comonotonic:
    """All slots are increasing functions of one common uniform."""

    marginal: object


@dataclass(frozen=True)
class Additive:
    """Independent identically distributed slot capacities."""

    marginal: object


@dataclass(frozen=True)
class MarkovAdditive:
    """Slot capacities modulated by a finite Markov chain."""

    kernel: MarkovKernel
    initial: object = "stationary"     # state label/index or "stationary"


@dataclass(frozen=True)
class AntitheticPairing:
    """Negatively dependent construction: slot pairs F^-1(U), F^-1(1-U).

    Not one of the three canonical structures; used by the ordering module
    and the simulation oracle as the negative-dependence reference.
    """

    marginal: object

    @cached_property
    def pair_sum_law(self) -> DiscreteDistribution:
        """Exact law of F^-1(U) + F^-1(1-U) on a fine probability grid."""
        m = self.marginal
        if isinstance(m, DiscreteDistribution):
            cuts = np.unique(np.concatenate((m._cum, 1.0 - m._cum, [0.0, 1.0])))
            cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0)]
            mids = 0.5 * (cuts[:-1] + cuts[1:])
            lengths = np.diff(cuts)
            keep = lengths > 0
            mids, lengths = mids[keep], lengths[keep]
        else:
            n = 8192
            mids = (np.arange(n) + 0.5) / n
            lengths = np.full(n, 1.0 / n)
        vals = np.array([m.quantile(u) + m.quantile(1.0 - u) for u in mids])
        order = np.argsort(vals, kind="stable")
        vals, lengths = vals[order], lengths[order]
        uniq, inv = np.unique(vals, return_inverse=True)
        mass = np.zeros_like(uniq)
        np.add.at(mass, inv, lengths)
        return DiscreteDistribution(uniq, mass / mass.sum())


CapacityProcess = Union[Comonotonic, Additive, MarkovAdditive, AntitheticPairing]


def marginal_of(process) -> object:
    if isinstance(process, (Comonotonic, Additive, AntitheticPairing)):
        return process.marginal
    raise ValidationError(f"process {type(process).__name__} has no single marginal")


def process_mean_rate(process) -> float:
    """Stationary mean capacity per slot."""
    if isinstance(process, MarkovAdditive):
        return process.kernel.mean_rate()
    return marginal_of(process).mean()


# ---------------------------------------------------------------------------
# closed forms and envelopes


def comonotonic_cdf(process: Comonotonic, t: int, x: float) -> float:
    """F_S(t)(x) = F_C(x / t): identical comonotonic slots are a.s. equal."""
    if not isinstance(process, Comonotonic):
        raise ValidationError("comonotonic_cdf needs a Comonotonic process")
    if t < 1:
        raise ValidationError("t must be >= 1")
    if x < 0:
        raise ValidationError("x must be nonnegative")
    return float(process.marginal.cdf(x / t))


def frechet_bounds(marginals, x: float, budget_cells: int = 256,
                   polish_passes: int = 2):
    """Universal envelope on F_{sum}(x) from the marginals alone.

    lower = [ sup_{sum u_i = x} sum_i F_i(u_i) - (t-1) ]^+
    upper = [ inf_{sum u_i = x} sum_i F_i(u_i) ]_1

    The allocation search runs exact dynamic programming on a shared budget
    grid (u_i >= 0, sum exactly x) followed by pairwise continuous polish
    passes.  Every candidate evaluated is feasible, so the grid optimum
    under-estimates the sup and over-estimates the inf: both directions are
    safe (the returned interval always contains the true Frechet interval's
    intersection with [0,1]... the returned lower never exceeds the true
    lower bound and the returned upper never falls below the true upper).
    """
    ms = list(marginals)
    t = len(ms)
    if t == 0:
        raise ValidationError("need at least one marginal")
    if not 1 <= t <= 8:
        raise ValidationError("allocation search supports 1 <= t <= 8 marginals")
    if x < 0:
        raise ValidationError("x must be nonnegative")
    if t == 1:
        f = float(ms[0].cdf(x))
        return f, f
    if x == 0.0:
        s = sum(float(m.cdf(0.0)) for m in ms)
        return max(0.0, s - (t - 1)), min(1.0, s)

    def alloc_value(alloc):
        return sum(float(m.cdf(u)) for m, u in zip(ms, alloc))

    def dp(sign):
        # grid DP right-to-left: W[k][j] = best over marginals k.. with budget j
        grid = np.linspace(0.0, x, budget_cells + 1)
        fvals = [np.asarray(m.cdf(grid), dtype=float) for m in ms]
        w = fvals[-1].copy()
        choice = []
        for k in range(t - 2, -1, -1):
            new_w = np.empty_like(w)
            pick = np.empty(budget_cells + 1, dtype=int)
            for j in range(budget_cells + 1):
                cand = fvals[k][: j + 1] + w[j::-1]
                idx = int(np.argmax(sign * cand))
                new_w[j] = cand[idx]
                pick[j] = idx
            w = new_w
            choice.append(pick)
        choice.reverse()
        alloc = []
        j = budget_cells
        for k in range(t - 1):
            idx = choice[k][j]
            alloc.append(grid[idx])
            j -= idx
        alloc.append(grid[j])
        return alloc

    def polish(alloc, sign):
        from scipy.optimize import minimize_scalar
        alloc = list(alloc)
        for _ in range(polish_passes):
            for i in range(t):
                for j in range(i + 1, t):
                    budget = alloc[i] + alloc[j]
                    if budget <= 0:
                        continue

                    def obj(u, i=i, j=j, budget=budget):
                        return -sign * (float(ms[i].cdf(u))
                                        + float(ms[j].cdf(budget - u)))

                    res = minimize_scalar(obj, bounds=(0.0, budget),
                                          method="bounded",
                                          options={"xatol": 1e-10 * max(x, 1.0)})
                    cand = float(res.x)
                    old = -sign * obj(alloc[i])
                    new = -sign * obj(cand)
                    if sign * new > sign * old:
                        alloc[i], alloc[j] = cand, budget - cand
        return alloc

    sup_alloc = polish(dp(+1.0), +1.0)
    inf_alloc = polish(dp(-1.0), -1.0)
    lower = max(0.0, alloc_value(sup_alloc) - (t - 1))
    upper = min(1.0, alloc_value(inf_alloc))
    return lower, upper


# ---------------------------------------------------------------------------
# Chernoff machinery


def theta_grid(kappa_fn, n: int = 200, theta_seed: float = 1.0,
               theta_floor: float = 1e-4, theta_cap: float = 65536.0) -> np.ndarray:
    """Log-spaced grid over (theta_floor, theta_max) of the finite kappa domain.

    theta_max is located by doubling until kappa turns infinite (or the cap
    is reached).
    """
    hi = theta_seed
    if not np.isfinite(kappa_fn(hi)):
        while hi > theta_floor and not np.isfinite(kappa_fn(hi)):
            hi /= 2.0
        if hi <= theta_floor:
            raise NumericFailure("no exponential moment on the theta grid")
    else:
        while hi < theta_cap and np.isfinite(kappa_fn(hi * 2.0)):
            hi *= 2.0
    return np.geomspace(theta_floor, hi, n)


def _refine_scalar(fn, lo, hi):
    from scipy.optimize import minimize_scalar
    res = minimize_scalar(fn, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(hi, 1.0)})
    return float(res.x), float(res.fun)


def _optimize_exponent(exponent_fn, grid):
    """Minimise a smooth exponent over a positive grid + local refinement."""
    vals = np.array([exponent_fn(th) for th in grid])
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise NumericFailure("no exponential moment on the theta grid")
    j = int(np.argmin(np.where(finite, vals, np.inf)))
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, len(grid) - 1)]
    th, val = _refine_scalar(exponent_fn, lo, hi)
    if vals[j] < val:
        return float(grid[j]), float(vals[j])
    return th, val


def _cgf_of(process):
    if isinstance(process, Additive):
        return process.marginal.cgf
    if isinstance(process, MarkovAdditive):
        return lambda th: kernel_cgf(process.kernel, th)
    raise ValidationError("Chernoff bounds need an Additive or MarkovAdditive process")


def _markov_prefactor(process: MarkovAdditive, theta: float, initial_state=None):
    """h(J0)/min_j h(J_j) at tilt theta; stationary initial mixes to 1/min h."""
    spec_data = kernel_spectral(process.kernel, theta)
    h = spec_data.right_vector
    init = process.initial if initial_state is None else initial_state
    if isinstance(init, str) and init == "stationary":
        numer = 1.0        # pi . h = 1 by normalisation
    else:
        numer = float(h[process.kernel.state_index(init)])
    return numer / float(np.min(h)), spec_data


def additive_cdf_bounds(process: Additive, t: int, x: float,
                        thetas: Optional[np.ndarray] = None):
    """Chernoff sandwich for the additive cumulative capacity.

    Returns (lower, upper) BoundReports with the optimising theta recorded.
    """
    return _chernoff_cdf_bounds(process, t, x, thetas, prefactored=False)


def markov_cdf_bounds(process: MarkovAdditive, t: int, x: float,
                      thetas: Optional[np.ndarray] = None,
                      initial_state=None, self_check: bool = True):
    """Markov-additive sandwich with the h(J0)/min_j h(J_j) prefactor.

    The matrix-power identity F_t[theta] = F[theta]^t is verified on a
    fixed probe set each call (path enumeration against matrix power).
    """
    if self_check:
        _matrix_power_self_check(process.kernel)
    return _chernoff_cdf_bounds(process, t, x, thetas, prefactored=True,
                                initial_state=initial_state)


def _chernoff_cdf_bounds(process, t, x, thetas, prefactored, initial_state=None):
    if t < 1:
        raise ValidationError("t must be >= 1")
    if x < 0:
        raise ValidationError("x must be nonnegative")
    kappa = _cgf_of(process)

    def log_pref(theta):
        if not prefactored:
            return 0.0, None
        pf, _ = _markov_prefactor(process, theta, initial_state)
        return math.log(pf), pf

    # upper: min over th > 0 of pf(-th) * e^{t k(-th) + th x}
    def upper_exponent(th):
        k = kappa(-th)
        if not np.isfinite(k):
            return math.inf
        lp, _ = log_pref(-th)
        return t * k + th * x + lp

    # lower: max over th > 0 of 1 - pf(th) e^{t k(th) - th x}
    def lower_exponent(th):
        k = kappa(th)
        if not np.isfinite(k):
            return math.inf
        lp, _ = log_pref(th)
        return t * k - th * x + lp

    grid_up = theta_grid(lambda th: kappa(-th))
    th_up, e_up = _optimize_exponent(upper_exponent, grid_up)
    grid_lo = theta_grid(kappa)
    th_lo, e_lo = _optimize_exponent(lower_exponent, grid_lo)

    pf_up = math.exp(log_pref(-th_up)[0])
    pf_lo = math.exp(log_pref(th_lo)[0])
    upper = BoundReport("cdf_upper", min(1.0, math.exp(min(e_up, _EXP_OVERFLOW))),
                        theta_star=th_up, prefactor=pf_up, horizon=float(t))
    lower_val = min(1.0, max(0.0, -math.expm1(min(e_lo, _EXP_OVERFLOW))))
    lower = BoundReport("cdf_lower", lower_val, theta_star=th_lo,
                        prefactor=pf_lo, horizon=float(t))
    return lower, upper


def chernoff_tail_upper(process, t: int, x: float,
                        initial_state=None) -> BoundReport:
    """Upper bound on P(S(t) >= x): min over th>0 of pf e^{t k(th) - th x}."""
    kappa = _cgf_of(process)
    prefactored = isinstance(process, MarkovAdditive)

    def exponent(th):
        k = kappa(th)
        if not np.isfinite(k):
            return math.inf
        lp = (math.log(_markov_prefactor(process, th, initial_state)[0])
              if prefactored else 0.0)
        return t * k - th * x + lp

    grid = theta_grid(kappa)
    th, e = _optimize_exponent(exponent, grid)
    pf = (_markov_prefactor(process, th, initial_state)[0] if prefactored else 1.0)
    return BoundReport("tail_upper", min(1.0, math.exp(min(e, _EXP_OVERFLOW))),
                       theta_star=th, prefactor=pf, horizon=float(t))


def _enumerate_tilted(kernel: MarkovKernel, t: int, theta: float) -> np.ndarray:
    """F_t[theta] by explicit path enumeration (independent oracle)."""
    n = len(kernel.states)
    tilts = np.array([[kernel.transition[i, j] * kernel.increments[i][j].mgf(theta)
                       for j in range(n)] for i in range(n)])
    out = np.zeros((n, n))
    stack = [(i, i, 1.0, 0) for i in range(n)]
    while stack:
        start, here, weight, depth = stack.pop()
        if depth == t:
            out[start, here] += weight
            continue
        for j in range(n):
            w = weight * tilts[here, j]
            if w != 0.0:
                stack.append((start, j, w, depth + 1))
    return out


def _matrix_power_self_check(kernel: MarkovKernel):
    """F_t[theta] = F[theta]^t on a fixed probe set (paths vs matrix power)."""
    n = len(kernel.states)
    rng = np.random.default_rng(20_1711)
    for _ in range(3):
        t = int(rng.integers(2, 5))
        theta = float(rng.uniform(-0.8, 0.8))
        if n ** t > 100_000:
            continue
        direct = _enumerate_tilted(kernel, t, theta)
        powered = np.linalg.matrix_power(mgf_matrix(kernel, theta), t)
        scale = max(np.max(np.abs(powered)), 1.0)
        if np.max(np.abs(direct - powered)) > 1e-8 * scale:
            raise NumericFailure(
                "matrix-power identity violated: F_t[theta] != F[theta]^t")


# ---------------------------------------------------------------------------
# transient capacity


@dataclass(frozen=True)
class TransientBounds:
    """Certified thresholds for the time-average capacity S(t)/t.

    P(avg <= c_upper) <= prob_upper  and  P(avg <= c_lower) >= prob_lower.
    """

    c_lower: float
    c_upper: float
    prob_lower: float
    prob_upper: float
    theta_lower: float
    theta_upper: float


def transient_bounds(process, t: int, y_l: float, y_u: float) -> TransientBounds:
    """Chernoff thresholds c* = (t kappa(theta) + y*) / (theta t).

    The upper side scans theta < 0 (maximising c*), the lower side theta > 0
    (minimising c*).  For Markov-additive processes the probability bounds
    carry the prefactor h(J0)/min_j h(J_j) evaluated at the optimising tilt.
    """
    if t < 1:
        raise ValidationError("t must be >= 1")
    if y_l <= 0 or y_u <= 0:
        raise ValidationError("exceedance exponents must be positive")
    kappa = _cgf_of(process)
    prefactored = isinstance(process, MarkovAdditive)

    # upper threshold: maximise c*(-th) over th > 0, i.e. minimise -c*
    def obj_upper(th):
        k = kappa(-th)
        if not np.isfinite(k):
            return math.inf
        return (t * k + y_u) / (th * t)

    grid = theta_grid(lambda th: kappa(-th))
    th_u, neg_c = _optimize_exponent(obj_upper, grid)
    c_up = -neg_c

    def obj_lower(th):
        k = kappa(th)
        if not np.isfinite(k):
            return math.inf
        return (t * k + y_l) / (th * t)

    grid_lo = theta_grid(kappa)
    th_l, c_lo = _optimize_exponent(obj_lower, grid_lo)

    pf_u = _markov_prefactor(process, -th_u)[0] if prefactored else 1.0
    pf_l = _markov_prefactor(process, th_l)[0] if prefactored else 1.0
    return TransientBounds(
        c_lower=c_lo, c_upper=c_up,
        prob_lower=max(0.0, 1.0 - pf_l * math.exp(-y_l)),
        prob_upper=min(1.0, pf_u * math.exp(-y_u)),
        theta_lower=th_l, theta_upper=-th_u)
