"""Spatial deployment, neighbor structure, and abnormal-event placement.

Devices are scattered by a Poisson point process over a rectangle; the
abnormal event lands uniformly inside it and promotes every device within
the trigger radius to an urgent (critical-message) sender. All range
predicates are inclusive at the boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["Deployment", "EventSite", "Adjacency", "deploy", "neighbors", "place_event", "deployment_to_csv"]


@dataclass(frozen=True)
class Deployment:
    width: float
    length: float
    density: float
    positions: np.ndarray  # shape (n, 2), all inside [0, width] x [0, length]

    @property
    def count(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class EventSite:
    position: np.ndarray  # shape (2,)
    trigger_radius: float


@dataclass(frozen=True)
class Adjacency:
    """Symmetric neighbor lists in CSR form, sorted within each row."""

    indptr: np.ndarray  # int64, len n + 1
    indices: np.ndarray  # int32, len = 2 * number of edges

    @property
    def count(self) -> int:
        return len(self.indptr) - 1

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])


def deploy(width: float, length: float, density: float, rng: np.random.Generator) -> Deployment:
    """Draw a Poisson(width * length * density) count of uniform device positions."""
    if width <= 0 or length <= 0 or density <= 0:
        raise ValueError("width, length, and density must be positive")
    n = int(rng.poisson(width * length * density))
    positions = rng.random((n, 2)) * np.array([width, length])
    return Deployment(width=width, length=length, density=density, positions=positions)


def neighbors(dep: Deployment, comm_range: float) -> Adjacency:
    """All device pairs within ``comm_range`` (inclusive), as a CSR adjacency."""
    if comm_range <= 0:
        raise ValueError("comm_range must be positive")
    n = dep.count
    if n == 0:
        return Adjacency(np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int32))
    tree = cKDTree(dep.positions)
    pairs = tree.query_pairs(r=comm_range, output_type="ndarray")
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Adjacency(indptr=indptr, indices=dst.astype(np.int32))


def place_event(
    dep: Deployment, trigger_radius: float, rng: np.random.Generator
) -> tuple[EventSite, np.ndarray, int]:
    """Drop the event uniformly in the rectangle and collect the urgent senders.

    Returns the site, the sorted indices of devices within the trigger
    radius, and their count (which is also the true state the network must
    learn).
    """
    if dep.count == 0:
        raise ValueError("cannot place an event in an empty deployment")
    site = rng.random(2) * np.array([dep.width, dep.length])
    dist = np.linalg.norm(dep.positions - site, axis=1)
    critical = np.flatnonzero(dist <= trigger_radius).astype(np.int32)
    return EventSite(position=site, trigger_radius=trigger_radius), critical, len(critical)


def deployment_to_csv(dep: Deployment, roles: np.ndarray, path) -> None:
    """Write one row per device (id, x, y, role) for visual inspection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["device_id", "x_m", "y_m", "role"])
        for i, (x, y) in enumerate(dep.positions):
            writer.writerow([i, f"{x:.6f}", f"{y:.6f}", "critical" if roles[i] else "periodic"])
