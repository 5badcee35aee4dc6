"""Run orchestration: deployment, event, slot loop, and Monte Carlo aggregation.

A run is deterministic given (config, seed): the seed feeds one stream for
the spatial setup and an independent stream for the slot loop, both derived
through ``numpy.random.SeedSequence``. Monte Carlo replications spawn child
seeds from the master seed, so aggregates are independent of execution
order and of how many workers ran them.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import analytics, geometry
from ._kernels import simulate_run
from .rach import build_schedule

__all__ = [
    "SimConfig",
    "MetricsRecord",
    "AggregateMetrics",
    "RunRejectedError",
    "run",
    "monte_carlo",
]

DEFAULT_MASTER_SEED = 20260809


class RunRejectedError(RuntimeError):
    """A run could not be set up (e.g. no urgent senders after bounded redraws)."""


@dataclass
class SimConfig:
    """All experiment parameters. Field names double as the JSON schema."""

    width_m: float = 100.0
    length_m: float = 100.0
    density: float = 2.0  # devices per square meter
    comm_range_m: float = 2.0
    detection_range_m: float = 10.0
    trigger_radius_m: float = 1.0
    slot_ms: float = 0.25
    preambles_total: int = 64
    preambles_contention: int = 1
    preambles_free: int = 63
    phase1_obs: Optional[int] = 3  # None disables learning entirely
    run_length: int = 5
    memory_bits: int = 5
    s_block_len: Optional[int] = None  # None -> run_length
    r_block_len: Optional[int] = None
    detect_prob_inside: float = 0.9
    miss_prob_outside: float = 0.9
    state_space_max: int = 20
    delay_threshold_ms: float = 2.5
    revert_scale: float = 0.5
    revert_pivot: Optional[int] = None  # None -> derived from the run-probability laws
    max_slots: Optional[int] = None  # None -> 4 * expected schedule period
    stop_when_stationary: bool = True  # end a run once learning and delivery settle
    event_retries: int = 100
    runs: int = 200
    master_seed: int = DEFAULT_MASTER_SEED

    # --- derived quantities -------------------------------------------------

    @property
    def miss_prob_inside(self) -> float:
        return 1.0 - self.detect_prob_inside

    @property
    def expected_n(self) -> int:
        return int(round(self.width_m * self.length_m * self.density))

    @property
    def expected_t_min(self) -> int:
        return analytics.min_period(self.expected_n, self.preambles_free)

    @property
    def d_th_slots(self) -> float:
        return self.delay_threshold_ms / self.slot_ms

    @property
    def resolved_max_slots(self) -> int:
        if self.max_slots is not None:
            return self.max_slots
        return 4 * self.expected_t_min

    @property
    def resolved_s_block(self) -> int:
        return self.s_block_len if self.s_block_len is not None else self.run_length

    @property
    def resolved_r_block(self) -> int:
        return self.r_block_len if self.r_block_len is not None else self.run_length

    def resolved_revert_pivot(self) -> int:
        if self.revert_pivot is not None:
            return self.revert_pivot
        p_wrong = self.miss_prob_inside / max(self.state_space_max - 1, 1)
        return analytics.default_revert_pivot(self.run_length, p_wrong, self.detect_prob_inside)

    def beta_table(self) -> np.ndarray:
        """Reallocation count a device applies for each learnable count, capped at p_f."""
        table = np.zeros(self.state_space_max + 1, dtype=np.int32)
        for s in range(2, self.state_space_max + 1):
            table[s] = min(
                self.preambles_free,
                analytics.reallocation_count(self.preambles_contention, s, self.d_th_slots),
            )
        return table

    # --- validation -----------------------------------------------------------

    def validate(self) -> list[tuple[str, bool, str]]:
        """Evaluate every configuration rule; returns (rule, ok, detail) triples."""
        checks = []
        checks.append(
            (
                "preamble_split",
                self.preambles_contention + self.preambles_free == self.preambles_total
                and self.preambles_contention >= 1
                and self.preambles_free >= 1,
                f"p_c={self.preambles_contention} p_f={self.preambles_free} "
                f"p={self.preambles_total}",
            )
        )
        checks.append(
            (
                "geometry_positive",
                min(
                    self.width_m,
                    self.length_m,
                    self.density,
                    self.comm_range_m,
                    self.detection_range_m,
                    self.trigger_radius_m,
                )
                > 0,
                "all spatial parameters must be positive",
            )
        )
        checks.append(("slot_positive", self.slot_ms > 0, f"slot_ms={self.slot_ms}"))
        checks.append(
            (
                "memory_bits_range",
                2 <= self.memory_bits <= 64,
                f"memory_bits={self.memory_bits} (window is memory_bits - 2, at most 62)",
            )
        )
        checks.append(
            (
                "learning_constants",
                (self.phase1_obs is None or self.phase1_obs >= 1)
                and self.run_length >= 1
                and self.resolved_s_block >= 1
                and self.resolved_r_block >= 1,
                f"phase1_obs={self.phase1_obs} run_length={self.run_length}",
            )
        )
        miss_in = self.miss_prob_inside
        checks.append(
            (
                "detection_probs",
                0.0 < miss_in < 1.0
                and 0.0 < self.miss_prob_outside < 1.0
                and miss_in <= self.miss_prob_outside + 1e-12,
                f"miss_inside={miss_in:g} miss_outside={self.miss_prob_outside:g}",
            )
        )
        checks.append(
            ("state_space", self.state_space_max >= 2, f"state_space_max={self.state_space_max}")
        )
        checks.append(
            (
                "deadline_feasible",
                self.d_th_slots > 1.0,
                f"delay_threshold_ms={self.delay_threshold_ms} is "
                f"{self.d_th_slots:g} slots; must exceed 1 slot",
            )
        )
        checks.append(
            ("revert_scale_range", 0.0 < self.revert_scale <= 0.5, f"revert_scale={self.revert_scale}")
        )
        checks.append(
            (
                "counts_positive",
                self.runs >= 1
                and self.event_retries >= 1
                and (self.max_slots is None or self.max_slots >= 1)
                and self.master_seed >= 0,
                f"runs={self.runs}",
            )
        )
        return checks

    def require_valid(self) -> None:
        bad = [f"{name}: {detail}" for name, ok, detail in self.validate() if not ok]
        if bad:
            raise ValueError("invalid configuration: " + "; ".join(bad))

    # --- serialization ----------------------------------------------------------

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        """Load a config whose keys are exactly the field names; unknown keys are errors."""
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must contain a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class MetricsRecord:
    """Everything measured in one run."""

    n: int
    n_critical: int
    true_state: int
    slot_ms: float
    d_th_slots: float
    delay_slots: np.ndarray  # int32 per urgent sender; -1 = censored at max_slots
    learned_correct_frac: np.ndarray  # float64 per slot, of all n devices
    decided_count: int
    correct_count: int
    intents_per_slot: np.ndarray
    successes_per_slot: np.ndarray
    end_slot: int
    reverts: int

    @property
    def censored(self) -> int:
        return int((self.delay_slots < 0).sum())

    @property
    def delays_ms(self) -> np.ndarray:
        """Achieved delays only; censoring is reported separately, never dropped."""
        return self.delay_slots[self.delay_slots >= 0] * self.slot_ms

    @property
    def threshold_satisfied(self) -> np.ndarray:
        return (self.delay_slots >= 0) & (self.delay_slots <= self.d_th_slots)


@dataclass
class AggregateMetrics:
    """Monte Carlo pool across runs; independent of run execution order."""

    runs: int
    master_seed: int
    slot_ms: float
    d_th_ms: float
    horizon_ms: float
    pooled_delays_ms: np.ndarray  # achieved delays, sorted ascending
    pooled_total: int  # achieved + censored
    censored: int
    mean_curve: np.ndarray
    per_run_n: np.ndarray
    per_run_critical: np.ndarray
    reverts: int

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.pooled_total if self.pooled_total else 0.0

    @property
    def mean_delay_ms(self) -> float:
        return float(self.pooled_delays_ms.mean()) if len(self.pooled_delays_ms) else math.nan

    @property
    def satisfaction(self) -> float:
        if not self.pooled_total:
            return math.nan
        ok = int((self.pooled_delays_ms <= self.d_th_ms + 1e-12).sum())
        return ok / self.pooled_total

    @property
    def peak_learned_pct(self) -> float:
        return float(self.mean_curve.max()) * 100.0 if len(self.mean_curve) else 0.0

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct achieved delays and P(delay <= v); censored mass keeps it below 1."""
        values, counts = np.unique(self.pooled_delays_ms, return_counts=True)
        cum = np.cumsum(counts) / self.pooled_total
        return values, cum


def _group_csr(tau: np.ndarray, cf_rank: np.ndarray, t_min: int):
    order = np.lexsort((cf_rank, tau)).astype(np.int32)
    start = np.zeros(t_min + 1, dtype=np.int64)
    np.cumsum(np.bincount(tau, minlength=t_min), out=start[1:])
    return start, order


def run(config: SimConfig, seed) -> MetricsRecord:
    """Execute one deterministic run. ``seed`` is an int or a SeedSequence."""
    config.require_valid()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    setup_ss, kernel_ss = ss.spawn(2)
    rng_setup = np.random.default_rng(setup_ss)

    dep = geometry.deploy(config.width_m, config.length_m, config.density, rng_setup)
    site = None
    critical = np.zeros(0, dtype=np.int32)
    n_a = 0
    if dep.count > 0:
        for _ in range(config.event_retries):
            site, critical, n_a = geometry.place_event(dep, config.trigger_radius_m, rng_setup)
            if 1 <= n_a <= config.state_space_max:
                break
        else:
            site = None
    if site is None or n_a < 1:
        raise RunRejectedError(
            f"no usable urgent-sender set after {config.event_retries} event draws "
            f"(deployment of {dep.count} devices)"
        )

    adjacency = geometry.neighbors(dep, config.comm_range_m)
    schedule = build_schedule(dep.count, config.preambles_free, rng_setup)
    group_start, group_members = _group_csr(schedule.tau, schedule.cf_rank, schedule.t_min)

    dist = np.linalg.norm(dep.positions - site.position, axis=1)
    inside_rd = dist <= config.detection_range_m

    learn_enabled = config.phase1_obs is not None
    k_obs = config.phase1_obs if learn_enabled else 1

    rng_kernel = np.random.default_rng(kernel_ss)
    (
        delay_slots,
        learned_correct,
        decided,
        learned_state,
        intents_per_slot,
        successes_per_slot,
        end_slot,
        n_reverts,
    ) = simulate_run(
        rng_kernel,
        adjacency.indptr,
        adjacency.indices,
        group_start,
        group_members,
        schedule.tau,
        schedule.cf_rank,
        inside_rd,
        critical,
        n_a,
        config.state_space_max,
        config.miss_prob_inside,
        config.miss_prob_outside,
        learn_enabled,
        k_obs,
        config.run_length,
        config.memory_bits,
        config.resolved_s_block,
        config.resolved_r_block,
        config.revert_scale,
        float(config.resolved_revert_pivot()),
        config.beta_table(),
        config.preambles_contention,
        config.preambles_free,
        schedule.t_min,
        config.resolved_max_slots,
        config.stop_when_stationary,
    )

    return MetricsRecord(
        n=dep.count,
        n_critical=n_a,
        true_state=n_a,
        slot_ms=config.slot_ms,
        d_th_slots=config.d_th_slots,
        delay_slots=delay_slots,
        learned_correct_frac=learned_correct.astype(np.float64) / dep.count,
        decided_count=int(decided.sum()),
        correct_count=int((learned_state == n_a).sum()),
        intents_per_slot=intents_per_slot,
        successes_per_slot=successes_per_slot,
        end_slot=int(end_slot),
        reverts=int(n_reverts),
    )


def _mc_worker(args) -> MetricsRecord:
    config, child_ss = args
    return run(config, child_ss)


def monte_carlo(
    config: SimConfig,
    runs: Optional[int] = None,
    master_seed: Optional[int] = None,
    parallel: int = 1,
) -> AggregateMetrics:
    """Pool ``runs`` independent runs seeded from the master seed.

    Delays from all urgent senders are pooled for the CDF; learning curves
    are averaged pointwise. The result does not depend on worker count.
    """
    runs = config.runs if runs is None else runs
    master_seed = config.master_seed if master_seed is None else master_seed
    if runs < 1:
        raise ValueError("runs must be >= 1")
    children = np.random.SeedSequence(master_seed).spawn(runs)
    jobs = [(config, child) for child in children]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_mc_worker, jobs, chunksize=max(1, runs // (4 * parallel))))
    else:
        records = [_mc_worker(job) for job in jobs]

    delays = np.sort(np.concatenate([r.delays_ms for r in records]))
    total = int(sum(r.n_critical for r in records))
    censored = int(sum(r.censored for r in records))
    curve = np.mean([r.learned_correct_frac for r in records], axis=0)
    return AggregateMetrics(
        runs=runs,
        master_seed=master_seed,
        slot_ms=config.slot_ms,
        d_th_ms=config.delay_threshold_ms,
        horizon_ms=config.resolved_max_slots * config.slot_ms,
        pooled_delays_ms=delays,
        pooled_total=total,
        censored=censored,
        mean_curve=curve,
        per_run_n=np.array([r.n for r in records], dtype=np.int64),
        per_run_critical=np.array([r.n_critical for r in records], dtype=np.int64),
        reverts=int(sum(r.reverts for r in records)),
    )
