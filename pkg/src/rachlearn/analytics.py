"""Closed-form delay, run-length, and reallocation formulas.

All functions are pure functions of scalar arguments. Delays are expressed
in time slots; infinity is a legitimate value (a contention pool of one
preamble shared by two or more urgent senders never resolves) and is
returned as ``math.inf``, never raised.

The test suite validates each formula against an independent oracle:
exhaustive sequence enumeration for the run probabilities, Monte Carlo for
the expected return time, a brute-force feasibility scan for the
reallocation count, and full combinatorial enumeration for the partial
reallocation law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PreambleSplit",
    "RunStats",
    "min_period",
    "periodic_success_prob",
    "critical_success_prob",
    "contention_delay",
    "contention_free_delay",
    "post_learning_delay",
    "reallocation_count",
    "run_probability",
    "run_probability_series",
    "expected_return_time",
    "revert_probability",
    "default_revert_pivot",
    "effective_detection_radius",
    "learned_count",
    "realloc_pmf",
    "expected_realloc",
    "lowest_expected_delay",
]


@dataclass(frozen=True)
class PreambleSplit:
    """Partition of the random-access preambles into contention and free pools.

    ``p_c`` preambles are picked at random by contending senders; the other
    ``p_f`` are assigned by the base station on a fixed schedule.
    """

    p_total: int
    p_c: int
    p_f: int

    def __post_init__(self):
        if self.p_c + self.p_f != self.p_total:
            raise ValueError(
                f"p_c + p_f = {self.p_c + self.p_f} != p_total = {self.p_total}"
            )
        if self.p_c < 1:
            raise ValueError("need at least one contention preamble (p_c >= 1)")
        if self.p_f < 0:
            raise ValueError("p_f must be nonnegative")


@dataclass(frozen=True)
class RunStats:
    """A run-length threshold paired with the per-observation success probability.

    ``p_success`` is the probability of observing the favored state on one
    observation; a run is ``alpha`` consecutive unfavored observations.
    Degenerate probabilities (0 or 1) are rejected: they would make the
    observation likelihood ratio 0 or infinite and the test trivial.
    """

    alpha: int
    p_success: float

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be a positive integer")
        if not 0.0 < self.p_success < 1.0:
            raise ValueError("p_success must lie strictly inside (0, 1)")


def min_period(n_devices: int, p_f: int) -> int:
    """Shortest schedule period that fits ``n_devices`` on ``p_f`` free preambles.

    At most ``p_f`` devices can hold distinct contention-free preambles per
    slot, so the period is the ceiling of ``n_devices / p_f``.
    """
    if p_f < 1:
        raise ValueError("no contention-free preambles to schedule (p_f < 1)")
    if n_devices < 1:
        raise ValueError("need at least one device")
    return -(-n_devices // p_f)


def periodic_success_prob(p_c: int, n_periodic: float) -> float:
    """Single-slot success probability for a periodic sender contending on p_c preambles.

    Equals the probability that all ``n_periodic - 1`` other simultaneous
    periodic senders pick a different preamble.
    """
    if p_c < 1:
        raise ValueError("p_c must be >= 1")
    if n_periodic < 1:
        raise ValueError("n_periodic must be >= 1")
    if n_periodic == 1:
        return 1.0
    return ((p_c - 1) / p_c) ** (n_periodic - 1)


def critical_success_prob(p_c: int, n_critical: int) -> float:
    """Single-slot success probability for one of ``n_critical`` urgent contenders."""
    if p_c < 1:
        raise ValueError("p_c must be >= 1")
    if n_critical < 1:
        raise ValueError("n_critical must be >= 1")
    if n_critical == 1:
        return 1.0
    return ((p_c - 1) / p_c) ** (n_critical - 1)


def contention_delay(p_c: int, n_critical: int) -> float:
    """Expected slots until first contention success (geometric mean, may be inf)."""
    p = critical_success_prob(p_c, n_critical)
    if p == 0.0:
        return math.inf
    return 1.0 / p


def contention_free_delay(t_min: int) -> float:
    """Expected slots until an urgent sender's scheduled slot comes up.

    The schedule offset is uniform over ``[0, t_min)``, so the mean wait is
    ``(t_min - 1) / 2``.
    """
    if t_min < 1:
        raise ValueError("t_min must be >= 1")
    return (t_min - 1) / 2.0


def post_learning_delay(
    split: PreambleSplit, beta: int, n_devices: int, n_critical: int
) -> float:
    """Expected delay of an urgent message once ``beta`` preambles are reallocated.

    The sender wins through whichever channel resolves first: contention on
    the enlarged pool ``p_c + beta``, or its own scheduled slot on the
    shrunken free pool ``p_f - beta``. Either branch may be infinite
    (sole-contention-preamble deadlock, or an empty free pool).
    """
    if not 0 <= beta <= split.p_f:
        raise ValueError("beta must lie in [0, p_f]")
    if split.p_c + beta < 1:
        raise ValueError("contention pool would be empty")
    contention = contention_delay(split.p_c + beta, n_critical)
    if split.p_f - beta == 0:
        scheduled = math.inf
    else:
        scheduled = contention_free_delay(min_period(n_devices, split.p_f - beta))
    return min(contention, scheduled)


# Boundary snap for the reallocation formula: D_th values that land exactly on
# a feasibility boundary otherwise flip the ceiling on float noise.
_CEIL_SNAP = 1e-9


def reallocation_count(p_c: int, n_critical: int, d_th_slots: float) -> int:
    """Minimal number of free preambles to reallocate so contention meets a deadline.

    Solves ``((p_c + b) / (p_c + b - 1)) ** (n_critical - 1) <= d_th_slots``
    for the smallest nonnegative integer ``b``. A negative closed-form value
    means the deadline already holds with no reallocation, hence the clamp
    to zero. The deadline is in slots and must exceed one slot; contention
    delay can approach but never reach a single slot.
    """
    if n_critical < 2:
        raise ValueError("reallocation is only defined for two or more contenders")
    if d_th_slots <= 1.0:
        raise ValueError("deadline must exceed one slot to be feasible")
    root = d_th_slots ** (1.0 / (n_critical - 1))
    value = (root * (p_c - 1) - p_c) / (1.0 - root)
    nearest = round(value)
    if abs(value - nearest) < _CEIL_SNAP:
        value = nearest
    return max(0, math.ceil(value))


def run_probability(n_obs: int, alpha: int, p_success: float) -> float:
    """Probability that a run of ``alpha`` consecutive unfavored observations
    occurs somewhere within the first ``n_obs`` observations.

    Cumulative in ``n_obs``: nondecreasing, 0 below ``alpha``, and tending
    to 1. Computed by the first-occurrence recursion
    ``P(n) = q^a + (n - a) p q^a - p q^a * sum_{i<n-a} P(i)`` with
    ``q = 1 - p_success``.
    """
    if n_obs < 0:
        raise ValueError("n_obs must be nonnegative")
    stats = RunStats(alpha, p_success)
    return run_probability_series(n_obs, stats.alpha, stats.p_success)[n_obs]


def run_probability_series(n_max: int, alpha: int, p_success: float):
    """Vector of ``run_probability(n, ...)`` for ``n = 0 .. n_max`` (one pass)."""
    q = 1.0 - p_success
    base = q**alpha
    out = [0.0] * (n_max + 1)
    if n_max < alpha:
        return out
    out[alpha] = base
    partial = 0.0  # sum of out[0 .. n - alpha - 1]
    for n in range(alpha + 1, n_max + 1):
        partial += out[n - alpha - 1]
        value = base + (n - alpha) * p_success * base - p_success * base * partial
        # the true sequence is nondecreasing and bounded by 1; the subtraction
        # form loses ~1e-14 near saturation, so pin it
        out[n] = min(1.0, max(value, out[n - 1]))
    return out


def expected_return_time(alpha: int, p_success: float) -> float:
    """Expected observations until ``alpha`` consecutive unfavored ones occur.

    Every favored observation after ``j < alpha`` unfavored ones resets the
    streak at cost ``j + 1``; conditioning on the first reset gives
    ``(p * sum_{j<a} q^j (j+1) + a q^a) / q^a``.
    """
    stats = RunStats(alpha, p_success)
    p, a = stats.p_success, stats.alpha
    q = 1.0 - p
    head = sum(q**j * (j + 1) for j in range(a))
    return (p * head + a * q**a) / q**a


def revert_probability(n_obs: float, pivot: float, scale: float = 0.5) -> float:
    """Probability of restarting the favored-state search after an unfavored run.

    A shifted sigmoid, ``scale * (1 - (n - pivot) / (1 + |n - pivot|))``:
    near ``scale * 2`` well below the pivot, ``scale`` at it, and decaying
    to 0 as the observation count grows. ``scale`` must lie in (0, 0.5] so
    the value is a probability for every ``n_obs``.
    """
    if not 0.0 < scale <= 0.5:
        raise ValueError("scale must lie in (0, 0.5]")
    d = n_obs - pivot
    return scale * (1.0 - d / (1.0 + abs(d)))


def default_revert_pivot(
    alpha: int,
    p_wrong: float,
    p_right: float,
    search_cap: int = 200_000,
) -> int:
    """Pick the revert pivot separating wrong-state runs from right-state runs.

    Returns the smallest observation count at which a run is nearly certain
    under a wrongly favored state (``run_probability >= 0.9`` at favored-
    observation probability ``p_wrong``) while still unlikely under the
    correct one (``<= 0.1`` at ``p_right``). Falls back to the first count
    meeting the wrong-state condition alone when the two laws are too close
    to separate.
    """
    wrong = run_probability_series(search_cap, alpha, p_wrong)
    right = run_probability_series(search_cap, alpha, p_right)
    first_wrong = None
    for n in range(alpha, search_cap + 1):
        if wrong[n] >= 0.9:
            if first_wrong is None:
                first_wrong = n
            if right[n] <= 0.1:
                return n
        elif first_wrong is not None and right[n] > 0.1:
            break
    if first_wrong is not None:
        return first_wrong
    return alpha


def effective_detection_radius(r_d: float, memory_bits: int, r_c: float) -> float:
    """Radius within which relayed memory keeps beliefs anchored to good observations.

    Each memory bit beyond the mandatory two carries one more upstream
    observation, extending the raw detection range by one hop length.
    """
    if memory_bits < 2:
        raise ValueError("at least two memory bits are required")
    if r_d <= 0 or r_c <= 0:
        raise ValueError("radii must be positive")
    return r_d + (memory_bits - 2) * r_c


def learned_count(
    t_slots: float, r_c: float, r_d_eff: float, p_f: int, area: float
) -> float:
    """Expected correctly-informed scheduled senders per slot, ``t_slots`` after onset.

    Information travels one hop per slot, so the informed disk has radius
    ``min(t * r_c, r_d_eff)``; the expected count is the free-preamble
    density times that disk, clamped to ``[0, p_f]``.
    """
    if t_slots < 0:
        raise ValueError("t_slots must be nonnegative")
    if area <= 0:
        raise ValueError("area must be positive")
    r_t = min(t_slots * r_c, r_d_eff)
    return float(min(p_f, p_f * math.pi * r_t * r_t / area))


def _log_perm(n: int, k: int) -> float:
    # log of k-permutations of n; requires 0 <= k <= n
    return math.lgamma(n + 1) - math.lgamma(n - k + 1)


def realloc_pmf(n_learned: int, p_f: int, beta: int, b: int) -> float:
    """Probability that exactly ``b`` of the ``beta`` designated preambles are freed,
    given ``n_learned`` of the slot's ``p_f`` scheduled senders are informed.

    The designated preambles are a fixed ``beta``-subset of the ``p_f``
    scheduled assignments while the informed senders are a uniform
    ``n_learned``-subset, so the overlap follows
    ``perm(n_learned, b) * perm(p_f - n_learned, beta - b) * comb(beta, b)
    * (p_f - beta)! / p_f!`` (equivalently, a hypergeometric law).
    Computed in log space; p_f = 63 would overflow naive factorials.
    """
    if not 0 <= beta <= p_f:
        raise ValueError("beta must lie in [0, p_f]")
    if not 0 <= n_learned <= p_f:
        raise ValueError("n_learned must lie in [0, p_f]")
    if not 0 <= b <= beta:
        raise ValueError("b must lie in [0, beta]")
    if b > n_learned or beta - b > p_f - n_learned:
        return 0.0
    log_val = (
        math.lgamma(p_f - beta + 1)
        - math.lgamma(p_f + 1)
        + _log_perm(n_learned, b)
        + _log_perm(p_f - n_learned, beta - b)
        + math.lgamma(beta + 1)
        - math.lgamma(b + 1)
        - math.lgamma(beta - b + 1)
    )
    return math.exp(log_val)


def expected_realloc(n_learned: int, p_f: int, beta: int) -> float:
    """Expected number of effectively freed preambles under partial learning.

    Direct expectation over ``realloc_pmf``; the hypergeometric mean
    ``beta * n_learned / p_f`` is kept out of the implementation so tests
    can use it as an independent check.
    """
    return sum(b * realloc_pmf(n_learned, p_f, beta, b) for b in range(beta + 1))


def lowest_expected_delay(p_c: int, e_realloc: float, n_critical: int) -> float:
    """Best achievable expected contention delay given the mean freed-preamble count.

    Geometric mean with the effective pool ``p_c + e_realloc``; exponent
    ``n_critical - 1`` keeps it consistent with ``contention_delay``.
    """
    if n_critical < 1:
        raise ValueError("n_critical must be >= 1")
    pool = p_c + e_realloc
    if pool <= 1:
        raise ValueError("effective pool must exceed one preamble")
    if n_critical == 1:
        return 1.0
    return (pool / (pool - 1.0)) ** (n_critical - 1)
