"""Per-device environment observations over the candidate-count state space.

A device reports the number of urgent messages it believes exist. Inside
the detection range it sees the true count except for a small miss
probability; outside, misses dominate. A miss lands uniformly on one of the
wrong states, the minimal law under which the true state is always the
single most likely observation and all wrong states are equally likely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ObservationModel", "sample", "sample_batch", "binarize"]


@dataclass(frozen=True)
class ObservationModel:
    """State space {1..s_max} plus the inside/outside missed-detection rates."""

    s_max: int
    miss_inside: float
    miss_outside: float
    detection_range: float

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError("state space must be non-empty")
        if not 0.0 < self.miss_inside < 1.0:
            raise ValueError("miss_inside must lie strictly inside (0, 1)")
        if not 0.0 < self.miss_outside < 1.0:
            raise ValueError("miss_outside must lie strictly inside (0, 1)")
        if self.miss_inside > self.miss_outside + 1e-12:
            raise ValueError("inside observers cannot miss more often than outside ones")
        if self.detection_range <= 0:
            raise ValueError("detection_range must be positive")

    def miss_prob(self, dist_to_event: float) -> float:
        return self.miss_inside if dist_to_event <= self.detection_range else self.miss_outside


def sample(
    model: ObservationModel, dist_to_event: float, true_state: int, rng: np.random.Generator
) -> int:
    """One observation: the true state with probability 1 - miss, else a uniform wrong state."""
    if not 1 <= true_state <= model.s_max:
        raise ValueError(f"true_state {true_state} outside state space 1..{model.s_max}")
    if model.s_max == 1:
        return true_state
    q = model.miss_prob(dist_to_event)
    if rng.random() < 1.0 - q:
        return true_state
    wrong = int(rng.random() * (model.s_max - 1))
    if wrong >= model.s_max - 1:
        wrong = model.s_max - 2
    return wrong + 1 if wrong + 1 < true_state else wrong + 2


def sample_batch(
    model: ObservationModel,
    dist_to_event: float,
    true_state: int,
    size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized ``sample`` for statistical tests; same law, independent draws."""
    if model.s_max == 1:
        return np.full(size, true_state, dtype=np.int32)
    q = model.miss_prob(dist_to_event)
    out = np.full(size, true_state, dtype=np.int32)
    miss = rng.random(size) >= 1.0 - q
    n_miss = int(miss.sum())
    wrong = (rng.random(n_miss) * (model.s_max - 1)).astype(np.int32)
    np.minimum(wrong, model.s_max - 2, out=wrong)
    wrong += 1
    wrong[wrong >= true_state] += 1
    out[miss] = wrong
    return out


def binarize(e: int, s_f: int) -> int:
    """Collapse a multi-state observation to favored (1) / unfavored (0)."""
    return 1 if e == s_f else 0
