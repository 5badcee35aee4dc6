"""Two-phase finite-memory sequential learning, executed hop by hop.

Phase 1 accumulates a short window of raw count observations along a chain
of devices; the device that completes the window picks the favored state
(the most-observed count, ties toward the larger value) and switches the
chain to phase 2. Phase 2 devices carry a fixed-width binary window, test
the favored state through alternating S/R blocks, and restart the whole
search with a decaying probability whenever enough consecutive unfavored
beliefs pile up.

Every device participates at most once: it either extends a chain or
decides, then only relays. This module is the readable per-device
reference; the engine runs the same machine as an array kernel
(:mod:`rachlearn._kernels`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analytics import revert_probability
from .observe import binarize

__all__ = [
    "REJECTED",
    "LearningParams",
    "LearningMessage",
    "LearnOutcome",
    "SequenceState",
    "choose_favored",
    "phase1_step",
    "private_belief",
    "phase2_step",
    "propagate",
    "write_sequence_log",
]

REJECTED = -1  # decision value for "the favored state is wrong"; no count attached


@dataclass(frozen=True)
class LearningParams:
    k_obs: int  # observations needed before a favored state is chosen
    run_length: int  # consecutive unfavored beliefs that arm a revert
    memory_bits: int  # relayed payload width; window is memory_bits - 2
    s_block_len: int
    r_block_len: int
    revert_scale: float
    revert_pivot: float

    def __post_init__(self):
        if self.k_obs < 1:
            raise ValueError("k_obs must be >= 1")
        if self.run_length < 1:
            raise ValueError("run_length must be >= 1")
        if self.memory_bits < 2:
            raise ValueError("memory_bits must be >= 2")
        if self.s_block_len < 1 or self.r_block_len < 1:
            raise ValueError("block lengths must be >= 1")

    @property
    def window_bits(self) -> int:
        return self.memory_bits - 2


@dataclass
class LearningMessage:
    """The relayed payload.

    ``obs_window`` holds raw states (phase 1, up to ``k_obs - 1``) or exactly
    ``memory_bits - 2`` binary observations, oldest first (phase 2). The two
    control bits are ``favored`` (the hypothesis bit) and ``intact`` (whether
    the current block's flip condition is still alive); together with the
    window they account for exactly ``memory_bits`` of payload. The counters
    ride alongside and are not charged against the payload width.
    """

    phase: int
    obs_window: list[int] = field(default_factory=list)
    s_f: Optional[int] = None
    favored: int = 1
    intact: int = 1
    run_count: int = 0
    n_obs: int = 0
    block_pos: int = 0
    block_is_r: bool = True


@dataclass
class LearnOutcome:
    decided: bool
    learned_state: Optional[int]  # a count, REJECTED, or None when undecided
    forward: Optional[LearningMessage]
    revert: bool = False


def choose_favored(observations: list[int]) -> int:
    """Most frequently observed state; ties resolve toward the larger count.

    Overestimating the urgent-message count frees more preambles than
    needed, which is the safer error, hence the upward tie-break.
    """
    if not observations:
        raise ValueError("cannot choose a favored state from no observations")
    counts: dict[int, int] = {}
    for e in observations:
        counts[e] = counts.get(e, 0) + 1
    best_state, best_count = -1, 0
    for state in sorted(counts):
        if counts[state] >= best_count:
            best_state, best_count = state, counts[state]
    return best_state


def _seed_phase2_window(raw_window: list[int], s_f: int, window_bits: int) -> list[int]:
    bits = [binarize(e, s_f) for e in raw_window]
    if len(bits) >= window_bits:
        return bits[len(bits) - window_bits :]
    return [0] * (window_bits - len(bits)) + bits  # unfavored padding at the old end


def phase1_step(msg: LearningMessage, own_obs: int, params: LearningParams) -> LearnOutcome:
    """Extend a phase-1 window, or complete it and emit the first phase-2 message."""
    if msg.phase != 1:
        raise ValueError("phase1_step received a non-phase-1 message")
    if len(msg.obs_window) >= params.k_obs:
        raise ValueError("phase-1 window already complete; sequencing bug")
    window = msg.obs_window + [own_obs]
    if len(window) < params.k_obs:
        return LearnOutcome(
            decided=False,
            learned_state=None,
            forward=LearningMessage(phase=1, obs_window=window),
        )
    s_f = choose_favored(window)
    forward = LearningMessage(
        phase=2,
        obs_window=_seed_phase2_window(window, s_f, params.window_bits),
        s_f=s_f,
        favored=1,
        intact=1,
        run_count=0,
        n_obs=0,
        block_pos=0,
        block_is_r=True,
    )
    return LearnOutcome(decided=True, learned_state=s_f, forward=forward)


def private_belief(window: list[int], own_bit: int) -> int:
    """Favored iff any of the window bits or the own observation is favored."""
    return 1 if own_bit or any(window) else 0


def phase2_step(
    msg: LearningMessage,
    own_obs: int,
    params: LearningParams,
    rng: np.random.Generator,
) -> LearnOutcome:
    """One phase-2 hop: belief, run/block bookkeeping, then revert or decide.

    A revert (armed by ``run_length`` consecutive unfavored beliefs, fired
    with the decaying pivot probability) turns this device into a fresh
    phase-1 initiator seeded with its own observation only. Otherwise the
    device decides — the favored state if the hypothesis bit survived, the
    rejection sentinel if not — and relays the slid window either way.
    """
    if msg.phase != 2:
        raise ValueError("phase2_step received a non-phase-2 message")
    if len(msg.obs_window) != params.window_bits:
        raise ValueError("phase-2 window width does not match memory_bits")
    own_bit = binarize(own_obs, msg.s_f)
    x = private_belief(msg.obs_window, own_bit)
    run_count = 0 if x else min(msg.run_count + 1, params.run_length)
    n_obs = msg.n_obs + 1

    if x == 0 and run_count >= params.run_length:
        p_b = revert_probability(n_obs, params.revert_pivot, params.revert_scale)
        if rng.random() < p_b:
            # Restart as a fresh initiator: one own observation seeds a new
            # chain, exactly like the original urgent senders (with a
            # one-observation requirement the seed already decides).
            seeded = phase1_step(LearningMessage(phase=1), own_obs, params)
            return LearnOutcome(
                decided=seeded.decided,
                learned_state=seeded.learned_state,
                forward=seeded.forward,
                revert=True,
            )

    favored, intact = msg.favored, msg.intact
    block_pos, block_is_r = msg.block_pos, msg.block_is_r
    if block_is_r:
        if x == 1:
            intact = 0
    else:
        if x == 0:
            intact = 0
    block_pos += 1
    block_len = params.r_block_len if block_is_r else params.s_block_len
    if block_pos >= block_len:
        if intact:
            favored = 0 if block_is_r else 1
        block_is_r = not block_is_r
        block_pos = 0
        intact = 1

    forward = LearningMessage(
        phase=2,
        obs_window=msg.obs_window[1:] + [own_bit],
        s_f=msg.s_f,
        favored=favored,
        intact=intact,
        run_count=run_count,
        n_obs=n_obs,
        block_pos=block_pos,
        block_is_r=block_is_r,
    )
    learned = msg.s_f if favored == 1 else REJECTED
    return LearnOutcome(decided=True, learned_state=learned, forward=forward)


class SequenceState:
    """Protocol bookkeeping for one deployment: who holds what, who decided."""

    def __init__(self, n: int, params: LearningParams):
        self.n = n
        self.params = params
        self.participated = np.zeros(n, dtype=bool)
        self.decided = np.zeros(n, dtype=bool)
        self.learned = np.zeros(n, dtype=np.int32)  # 0 none, REJECTED, or a count
        self.messages: dict[int, LearningMessage] = {}
        self.frontier: list[int] = []
        self.reverts = 0

    def seed_initiators(self, seeds: list[tuple[int, int]]) -> None:
        """Start one phase-1 chain per (device, observation) pair."""
        for dev, obs in seeds:
            outcome = phase1_step(LearningMessage(phase=1), obs, self.params)
            self._apply(dev, outcome)
            self.frontier.append(dev)

    def _apply(self, dev: int, outcome: LearnOutcome) -> None:
        self.participated[dev] = True
        if outcome.decided:
            if self.decided[dev]:
                raise RuntimeError(f"device {dev} attempted a second decision")
            self.decided[dev] = True
            self.learned[dev] = outcome.learned_state
        if outcome.revert:
            self.reverts += 1
        if outcome.forward is not None:
            self.messages[dev] = outcome.forward


def propagate(
    state: SequenceState,
    adjacency,
    observe_fn: Callable[[int], int],
    rng: np.random.Generator,
    slot: Optional[int] = None,
    log: Optional[list] = None,
) -> list[tuple[int, LearnOutcome]]:
    """One hop: last slot's participants offer; fresh neighbors take one step each.

    A device offered several messages keeps exactly one, chosen uniformly.
    Offers go only to devices that have never participated; each receiver
    draws a fresh observation via ``observe_fn`` and runs the step matching
    the message phase. Returns (device, outcome) pairs in device order.
    """
    offers: dict[int, int] = {}
    counts: dict[int, int] = {}
    for sender in state.frontier:
        for j in adjacency.neighbors_of(sender):
            j = int(j)
            if state.participated[j]:
                continue
            c = counts.get(j, 0) + 1
            counts[j] = c
            if c == 1 or rng.random() < 1.0 / c:
                offers[j] = sender

    results: list[tuple[int, LearnOutcome]] = []
    next_frontier: list[int] = []
    for receiver in sorted(offers):
        sender = offers[receiver]
        msg = state.messages[sender]
        own = observe_fn(receiver)
        if msg.phase == 1:
            outcome = phase1_step(msg, own, state.params)
        else:
            outcome = phase2_step(msg, own, state.params, rng)
        state._apply(receiver, outcome)
        next_frontier.append(receiver)
        results.append((receiver, outcome))
        if log is not None:
            log.append(
                (
                    slot,
                    sender,
                    receiver,
                    msg.phase,
                    own,
                    outcome.learned_state if outcome.decided else None,
                )
            )
    state.frontier = next_frontier
    return results


def write_sequence_log(rows: list, path) -> None:
    """Persist propagate() log rows as CSV for trace debugging."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "sender", "receiver", "phase", "observation", "decided_state"])
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
