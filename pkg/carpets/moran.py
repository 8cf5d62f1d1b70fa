"""
Scalar root-solving core.

- t(P): root of the random Moran equation Φ(t) = Σ_ij p_ij log Σ_k a_ijk^t = 0
- λ(P): row entropy over row Lyapunov exponent
- t_under / t_over: the extreme values of t(P) over all P
- the family P(α, λ, t) with p_ij ∝ p_i b_ij^λ (Σ_k a_ijk^t)^α, and the two
  monotone solves F(α) = 0 (fix t(P) = t) and G(λ) = 0 (fix λ(P) = λ)

Weights are carried flat in global row order (see model.SystemLayout).
"""
from dataclasses import dataclass
from functools import cached_property
import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

logger = logging.getLogger(__name__)

SOLVER_TOL = 1e-12
MAX_ITERATIONS = 200
DISTRIBUTION_TOL = 1e-12
ALPHA_START = 1.0
ALPHA_CAP = 1e6
LAMBDA_CAP = 1e6
LOG_SPACE_ALPHA = 50.0


class InvalidDistributionError(ValueError):
    """Row distribution does not fit the system or gives a non-finite Φ."""


class BracketError(ValueError):
    """No sign change found before the bracket cap."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class DegenerateFamilyError(BracketError):
    """F is constant or not monotone in α (the generic hypothesis fails at this t)."""


# ====================================================================
# ROW DISTRIBUTIONS
# ====================================================================

@dataclass(frozen=True)
class RowDistribution:
    """
    Non-negative weights p_ij with Σ_j p_ij = p_i.

    `weights[i][j]` is p_ij; `flat` is the same data in global row order.
    """
    weights: tuple

    @classmethod
    def from_flat(cls, system, flat):
        flat = np.asarray(flat, dtype=float)
        offsets = system.layout.row_offsets
        if flat.shape != (system.layout.n_rows,):
            raise InvalidDistributionError(
                f"Expected {system.layout.n_rows} row weights, got shape {flat.shape}"
            )
        return cls(weights=tuple(
            tuple(float(w) for w in flat[offsets[i]:offsets[i + 1]]) for i in range(system.m)
        ))

    @classmethod
    def uniform(cls, system):
        layout = system.layout
        counts = np.diff(layout.row_offsets)[layout.row_map]
        return cls.from_flat(system, layout.row_env_probs / counts)

    @cached_property
    def flat(self):
        array = np.array([w for block in self.weights for w in block], dtype=float)
        array.flags.writeable = False
        return array

    def conditionals(self, system):
        """p_ij / p_i per global row."""
        return self.flat / system.layout.row_env_probs

    def check(self, system, tol=DISTRIBUTION_TOL):
        """Raise InvalidDistributionError unless the weights fit the system."""
        if tuple(len(block) for block in self.weights) != system.row_counts:
            raise InvalidDistributionError(
                f"Row weights shaped {tuple(len(b) for b in self.weights)}, "
                f"system rows are {system.row_counts}"
            )
        flat = self.flat
        if not np.all(np.isfinite(flat)) or np.any(flat < 0):
            raise InvalidDistributionError("Row weights must be finite and non-negative")
        block_totals = system.layout.block_sums(flat)
        worst = np.max(np.abs(block_totals - system.layout.env_probs))
        if worst > tol:
            raise InvalidDistributionError(
                f"Row weights do not sum to p_i per map (worst deviation {worst:.3g})"
            )
        return self


@dataclass(frozen=True)
class FamilyPoint:
    """One member P(α, λ, t) of the parametric family, with its normalisers γ_i."""
    alpha: float
    lam: float
    t: float
    gamma: tuple
    log_gamma: tuple
    P: RowDistribution


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    iterations: int
    converged: bool


# ====================================================================
# ROOT FINDING
# ====================================================================

def bisect(func, lo, hi, tol=SOLVER_TOL, max_iter=MAX_ITERATIONS, f_lo=None, f_hi=None):
    """
    Plain bisection on a bracket with a sign change.

    Stops when |func| ≤ tol or the bracket can no longer be split in floating point.
    """
    f_lo = func(lo) if f_lo is None else f_lo
    f_hi = func(hi) if f_hi is None else f_hi
    if f_lo == 0:
        return RootResult(lo, 0.0, 0, True)
    if f_hi == 0:
        return RootResult(hi, 0.0, 0, True)
    if (f_lo > 0) == (f_hi > 0):
        raise BracketError(
            f"No sign change on [{lo}, {hi}]: f={f_lo:.3g}, {f_hi:.3g}", lo=lo, hi=hi,
        )

    mid, f_mid = lo, f_lo
    for iteration in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = func(mid)
        if abs(f_mid) <= tol:
            return RootResult(mid, f_mid, iteration, True)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return RootResult(mid, f_mid, max_iter, abs(f_mid) <= tol)


def brent(func, lo, hi, tol=SOLVER_TOL, max_iter=MAX_ITERATIONS):
    """Brent's method inside an established bracket; residual reported like bisect."""
    root, info = brentq(func, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                        maxiter=max_iter, full_output=True, disp=False)
    residual = func(root)
    return RootResult(root, residual, info.iterations, abs(residual) <= tol or info.converged)


def find_root(func, lo, hi, tol=SOLVER_TOL, method='brent'):
    if method == 'bisect':
        return bisect(func, lo, hi, tol=tol)
    if method == 'brent':
        return brent(func, lo, hi, tol=tol)
    raise ValueError(f"Unknown root method '{method}'. Use 'bisect' or 'brent'.")


def _clamped_unit_root(func, tol):
    """Root of a decreasing function on [0,1], clamped to 0 or 1 when no interior root exists."""
    f0 = func(0.0)
    if not math.isfinite(f0):
        raise InvalidDistributionError(f"Moran function is not finite at t=0 ({f0})")
    if f0 <= tol:
        return 0.0
    f1 = func(1.0)
    if not math.isfinite(f1):
        raise InvalidDistributionError(f"Moran function is not finite at t=1 ({f1})")
    if f1 >= -tol:
        return 1.0
    return bisect(func, 0.0, 1.0, tol=tol, f_lo=f0, f_hi=f1).root


# ====================================================================
# MORAN EQUATION
# ====================================================================

def _weighted_log_sum(weights, log_sums):
    """Σ w log S with 0 · log S = 0."""
    return float(np.sum(np.where(weights > 0, weights * log_sums, 0.0)))


def phi(system, P, t):
    """Φ(t) = Σ_ij p_ij log Σ_k a_ijk^t."""
    return _weighted_log_sum(P.flat, np.log(system.layout.row_sums(t)))


def solve_t(system, P, tol=SOLVER_TOL):
    """t(P) ∈ [0,1] with |Φ(t)| ≤ tol, by bisection."""
    P.check(system)
    return _clamped_unit_root(lambda t: phi(system, P, t), tol)


def solve_t_many(system, weights, tol=0.0, max_iter=MAX_ITERATIONS):
    """
    t(P) for a batch of weight vectors (shape (B, n_rows)) at once.

    Same clamping as solve_t. Φ is convex and decreasing, so Newton steps from
    t=0 approach the root from below; a step leaving the current bracket falls
    back to bisection. tol=0 iterates down to floating-point resolution.
    Rows of `weights` are not checked against p_i.
    """
    layout = system.layout
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    positive = weights > 0

    def phi_many(ts):
        sums, slopes = layout.row_sums_with_slopes_many(ts)
        values = np.where(positive, weights * np.log(sums), 0.0).sum(axis=1)
        derivatives = np.where(positive, weights * slopes / sums, 0.0).sum(axis=1)
        return values, derivatives

    count = len(weights)
    f0, _ = phi_many(np.zeros(count))
    f1, _ = phi_many(np.ones(count))
    if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(f1))):
        raise InvalidDistributionError("Moran function is not finite for some weight vectors")

    roots = np.where(f0 <= tol, 0.0, 1.0)
    active = (f0 > tol) & (f1 < -tol)
    t = np.zeros(count)
    lo = np.zeros(count)
    hi = np.ones(count)
    resolution = 4 * np.finfo(float).eps
    for _ in range(max_iter):
        if not active.any():
            break
        f, df = phi_many(t)
        lo = np.where(f > 0, t, lo)
        hi = np.where(f < 0, t, hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            newton = t - f / df
        step = np.where((newton > lo) & (newton < hi), newton, 0.5 * (lo + hi))
        solved = np.abs(f) <= tol
        roots = np.where(active, np.where(solved, t, step), roots)
        active &= ~(solved | (np.abs(step - t) <= resolution))
        t = step
    return roots


def lambda_of(system, P):
    """λ(P) = (Σ p_ij log p_ij - Σ p_i log p_i) / Σ p_ij log b_ij, with 0 log 0 = 0."""
    layout = system.layout
    flat = P.flat
    numerator = float(np.sum(xlogy(flat, flat)) - np.sum(xlogy(layout.env_probs, layout.env_probs)))
    denominator = float(np.dot(flat, layout.log_heights))
    return numerator / denominator


def lambda_many(system, weights):
    """λ(P) for a batch of weight vectors (shape (B, n_rows))."""
    layout = system.layout
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    env_entropy = np.sum(xlogy(layout.env_probs, layout.env_probs))
    return (xlogy(weights, weights).sum(axis=1) - env_entropy) / (weights @ layout.log_heights)


def t_bounds(system, tol=SOLVER_TOL):
    """
    (t_under, t_over): the smallest and largest t(P) over all P.

    They solve Σ_i p_i log(min_j Σ_k a_ijk^t) = 0 and the max_j version.
    """
    layout = system.layout
    starts = layout.row_offsets[:-1]

    def extreme(reducer):
        def func(t):
            block = reducer.reduceat(layout.row_sums(t), starts)
            return float(np.dot(layout.env_probs, np.log(block)))
        return _clamped_unit_root(func, tol)

    t_under = extreme(np.minimum)
    t_over = extreme(np.maximum)
    logger.debug(f't-bounds: t_under={t_under:.12g}, t_over={t_over:.12g}')
    return t_under, t_over


# ====================================================================
# PARAMETRIC FAMILY
# ====================================================================

def segment_logsumexp(values, offsets):
    """log Σ exp(values) over each segment offsets[i]:offsets[i+1]."""
    starts = offsets[:-1]
    peak = np.maximum.reduceat(values, starts)
    shifted = np.exp(values - np.repeat(peak, np.diff(offsets)))
    return peak + np.log(np.add.reduceat(shifted, starts))


class _Family:
    """Family P(α, λ, t) at a fixed t, with the row sums computed once."""

    def __init__(self, system, t):
        self.system = system
        self.layout = system.layout
        self.t = t
        self.log_sums = np.log(self.layout.row_sums(t))

    def exponents(self, alpha, lam):
        return lam * self.layout.log_heights + alpha * self.log_sums

    def log_gamma(self, alpha, lam):
        return segment_logsumexp(self.exponents(alpha, lam), self.layout.row_offsets)

    def weights(self, alpha, lam):
        layout = self.layout
        exponents = self.exponents(alpha, lam)
        log_gamma = segment_logsumexp(exponents, layout.row_offsets)
        shares = np.exp(exponents - log_gamma[layout.row_map])
        shares /= layout.block_sums(shares)[layout.row_map]
        return layout.row_env_probs * shares, log_gamma

    def F(self, alpha, lam):
        weights, _ = self.weights(alpha, lam)
        return float(np.dot(weights, self.log_sums))

    def G(self, alpha, lam):
        return float(np.dot(self.layout.env_probs, self.log_gamma(alpha, lam)))

    def point(self, alpha, lam):
        weights, log_gamma = self.weights(alpha, lam)
        with np.errstate(over='ignore'):
            gamma = np.exp(log_gamma)
        return FamilyPoint(
            alpha=float(alpha),
            lam=float(lam),
            t=float(self.t),
            gamma=tuple(float(g) for g in gamma),
            log_gamma=tuple(float(g) for g in log_gamma),
            P=RowDistribution.from_flat(self.system, weights),
        )


def gamma(system, i, alpha, lam, t):
    """γ_i(α, λ, t) = Σ_j b_ij^λ (Σ_k a_ijk^t)^α, in log space when |α| > 50."""
    if not 0 <= i < system.m:
        raise IndexError(f"Map index {i} out of range (system has {system.m} maps)")
    layout = system.layout
    rows = slice(layout.row_offsets[i], layout.row_offsets[i + 1])
    sums = layout.row_sums(t)[rows]
    heights = layout.heights[rows]
    if abs(alpha) <= LOG_SPACE_ALPHA:
        return float(np.sum(heights ** lam * sums ** alpha))
    exponents = lam * np.log(heights) + alpha * np.log(sums)
    peak = exponents.max()
    with np.errstate(over='ignore'):
        return float(np.exp(peak + np.log(np.sum(np.exp(exponents - peak)))))


def family_P(system, alpha, lam, t):
    """P(α, λ, t): p_ij = p_i b_ij^λ (Σ_k a_ijk^t)^α / γ_i, normalised per map in log space."""
    return _Family(system, t).point(alpha, lam)


def family_residual(system, alpha, lam, t):
    """F(α, λ, t) = Σ_ij p_ij(α, λ, t) log Σ_k a_ijk^t."""
    return _Family(system, t).F(alpha, lam)


def gamma_residual(system, alpha, lam, t):
    """G(α, λ, t) = Σ_i p_i log γ_i(α, λ, t)."""
    return _Family(system, t).G(alpha, lam)


def _solve_alpha(family, lam, tol, method):
    """α with F(α, λ, t) = 0; F increases in α under the generic hypothesis."""
    F = lambda alpha: family.F(alpha, lam)

    f_zero = F(0.0)
    if abs(f_zero) <= tol:
        return 0.0

    lo, hi = -ALPHA_START, ALPHA_START
    f_lo, f_hi = F(lo), F(hi)
    spread = f_hi - f_lo
    if f_hi < f_lo - tol:
        raise DegenerateFamilyError(
            f"F decreases in alpha at t={family.t:.12g}, lambda={lam:.12g}; "
            f"the generic hypothesis fails here", t=family.t, lam=lam,
        )
    while f_hi < 0:
        if hi >= ALPHA_CAP:
            _raise_alpha_bracket(family.t, lam, spread, 'above')
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_next = F(hi)
        if f_next < f_hi - tol:
            raise DegenerateFamilyError(
                f"F is not monotone in alpha at t={family.t:.12g}", t=family.t, lam=lam,
            )
        f_hi = f_next
    while f_lo > 0:
        if lo <= -ALPHA_CAP:
            _raise_alpha_bracket(family.t, lam, spread, 'below')
        hi, f_hi = lo, f_lo
        lo *= 2.0
        f_next = F(lo)
        if f_next > f_lo + tol:
            raise DegenerateFamilyError(
                f"F is not monotone in alpha at t={family.t:.12g}", t=family.t, lam=lam,
            )
        f_lo = f_next

    result = find_root(F, lo, hi, tol=tol, method=method)
    if not result.converged:
        logger.debug(f'alpha solve at t={family.t:.6g} stopped with |F|={abs(result.residual):.3g}')
    return result.root


def _raise_alpha_bracket(t, lam, spread, side):
    """spread: F(1) - F(-1); zero means F never moves with α."""
    if abs(spread) <= SOLVER_TOL:
        raise DegenerateFamilyError(
            f"F is constant in alpha at t={t:.12g}; the generic hypothesis fails here",
            t=t, lam=lam,
        )
    raise BracketError(
        f"No root of F {side} |alpha|={ALPHA_CAP:g} at t={t:.12g}, lambda={lam:.12g}; "
        f"t is numerically at t_under/t_over", t=t, lam=lam,
    )


def solve_alpha(system, lam, t, tol=SOLVER_TOL, method='brent'):
    """
    α(λ, t): the member of the family with t(P(α, λ, t)) = t.

    The bracket starts at [-1, 1] and doubles towards the sign change, up to |α| = 1e6.
    """
    return _solve_alpha(_Family(system, t), lam, tol, method)


def _solve_lambda(family, tol, method):
    """λ with G(α(λ, t), λ, t) = 0; G decreases in λ."""
    G = lambda lam: family.G(_solve_alpha(family, lam, tol, method), lam)

    lo, hi = 0.0, 1.0
    g_lo = G(lo)
    if abs(g_lo) <= tol:
        return lo
    while g_lo < 0:
        if lo <= -LAMBDA_CAP:
            raise BracketError(f"No root of G below lambda=0 at t={family.t:.12g}", t=family.t)
        hi, lo = lo, lo - 1.0 if lo == 0 else 2.0 * lo
        g_lo = G(lo)
    g_hi = G(hi)
    while g_hi > 0:
        if hi >= LAMBDA_CAP:
            raise BracketError(f"No root of G below lambda={LAMBDA_CAP:g} at t={family.t:.12g}",
                               t=family.t)
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = G(hi)
    return find_root(G, lo, hi, tol=tol, method=method).root


def solve_lambda(system, t, tol=SOLVER_TOL, method='brent'):
    """
    (λ(t), α(λ(t), t)): the family member with t(P) = t and λ(P) = λ.

    G is strictly decreasing in λ (its derivative is Σ p_ij log b_ij < 0).
    """
    family = _Family(system, t)
    lam = _solve_lambda(family, tol, method)
    return lam, _solve_alpha(family, lam, tol, method)


def structural_point(system, t, tol=SOLVER_TOL, method='brent'):
    """FamilyPoint P(t) with t(P) = t solving both F = 0 and G = 0."""
    family = _Family(system, t)
    lam = _solve_lambda(family, tol, method)
    return family.point(_solve_alpha(family, lam, tol, method), lam)


def entropy_lambda(system, tol=SOLVER_TOL):
    """
    Largest λ(P) over all P: root of Σ_i p_i log Σ_j b_ij^λ = 0.

    This is the α = 0 slice of G; the maximiser is p_ij ∝ p_i b_ij^λ.
    """
    family = _Family(system, 0.0)
    G = lambda lam: family.G(0.0, lam)
    g_zero = G(0.0)
    if g_zero <= tol:
        return 0.0
    hi = 1.0
    while G(hi) > 0:
        if hi >= LAMBDA_CAP:
            raise BracketError(f"No root of the entropy equation below {LAMBDA_CAP:g}")
        hi *= 2.0
    return bisect(G, 0.0, hi, tol=tol, f_lo=g_zero).root
