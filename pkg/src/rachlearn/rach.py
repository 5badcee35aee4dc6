"""Slot-level random access: scheduling, per-device intents, collision resolution.

Preamble indexing convention: contention preambles are ``0 .. p_c - 1``;
contention-free preambles are ``p_c + rank`` where ``rank`` is the device's
position within its schedule group. The reallocation order is the
contention-free ranks ascending, so "the first beta preambles of the order"
are exactly ranks ``0 .. beta - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .analytics import PreambleSplit, min_period

__all__ = [
    "Schedule",
    "RachState",
    "DeviceState",
    "SlotOutcome",
    "build_schedule",
    "device_intent",
    "resolve_slot",
]


@dataclass(frozen=True)
class Schedule:
    t_min: int
    tau: np.ndarray  # int32, schedule group per device, in [0, t_min)
    cf_rank: np.ndarray  # int32, contention-free preamble rank within the group


@dataclass(frozen=True)
class RachState:
    split: PreambleSplit
    schedule: Schedule

    def cf_preamble(self, rank: int) -> int:
        return self.split.p_c + rank


@dataclass
class DeviceState:
    """Channel-relevant device state; positions live in the geometry module."""

    device_id: int
    is_critical: bool
    tau: int
    cf_rank: int
    pending: bool = False  # urgent message not yet delivered
    learned_state: int = 0  # 0 unlearned, -1 rejected-favored, >= 1 a learned count
    beta: int = 0  # preambles this device believes are reallocated

    @property
    def acts_learned(self) -> bool:
        # A device that merely rejected the favored state has no count to act
        # on; for channel purposes it behaves exactly like an unlearned one.
        return self.learned_state >= 1


@dataclass(frozen=True)
class SlotOutcome:
    successes: dict  # preamble -> sole device that used it
    collisions: set  # preambles hit by two or more devices


def build_schedule(n: int, p_f: int, rng: np.random.Generator) -> Schedule:
    """Randomly partition devices into groups of at most ``p_f``, distinct ranks within.

    A uniform permutation is chunked into ``ceil(n / p_f)`` groups; the
    position inside the chunk doubles as the contention-free rank, so no two
    devices in a group share a preamble.
    """
    t_min = min_period(n, p_f)
    perm = rng.permutation(n)
    tau = np.empty(n, dtype=np.int32)
    cf_rank = np.empty(n, dtype=np.int32)
    slots = np.arange(n)
    tau[perm] = (slots // p_f).astype(np.int32)
    cf_rank[perm] = (slots % p_f).astype(np.int32)
    return Schedule(t_min=t_min, tau=tau, cf_rank=cf_rank)


def device_intent(
    dev: DeviceState, rach: RachState, slot: int, rng: np.random.Generator
) -> Optional[int]:
    """The preamble this device transmits on this slot, or None to stay silent.

    Scheduled senders use their assigned contention-free preamble unless
    they have learned a count that reallocates it out from under them. A
    device with an outstanding urgent message prefers its scheduled slot
    when one lands, and otherwise contends on the original pool plus
    whatever prefix of the reallocation order it has learned to use. One
    transmission per device per slot.
    """
    scheduled_now = slot % rach.schedule.t_min == dev.tau
    if dev.pending:
        if scheduled_now:
            return rach.cf_preamble(dev.cf_rank)
        pool = rach.split.p_c + (dev.beta if dev.acts_learned else 0)
        k = int(rng.random() * pool)
        if k >= pool:
            k = pool - 1
        return k if k < rach.split.p_c else rach.cf_preamble(k - rach.split.p_c)
    if scheduled_now:
        if dev.acts_learned and dev.cf_rank < dev.beta:
            return None  # yielded to the urgent senders
        return rach.cf_preamble(dev.cf_rank)
    return None


def resolve_slot(intents: Iterable[tuple[int, int]]) -> SlotOutcome:
    """Sole user of a preamble succeeds; two or more collide, all of them fail."""
    users: dict[int, int] = {}
    collisions: set[int] = set()
    for device, preamble in intents:
        if preamble in collisions:
            continue
        if preamble in users:
            del users[preamble]
            collisions.add(preamble)
        else:
            users[preamble] = device
    return SlotOutcome(successes=users, collisions=collisions)
