"""Appliance mode and state extraction from filtered training signals.

Operating modes are learned in two phases. Bottom-up Ward-linkage
agglomeration first reduces the samples to ``k`` clusters, always merging the
pair whose merge cost

    delta(A, B) = n_A * n_B / (n_A + n_B) * (m_A - m_B)^2

is globally minimal. A distance-based sweep then walks the cluster centroids
from highest to lowest, absorbing any neighbour closer than a fixed fraction
of the current root centroid; the surviving clusters' [min, max] envelopes
become the appliance's states. The sweep exists because cost-based stopping
underweights small clusters: an infrequent mode would be lumped into a wide
neighbouring state purely because it holds few samples.

For 1-D data the globally cheapest Ward merge is always between clusters
adjacent in centroid order (for sorted centroids ci < cj < ck, assuming both
adjacent merges cost at least the straddling one leads to 0 >= 2*ni*nk), so
agglomeration runs on sorted samples with a heap of adjacent-pair costs in
O(n log n) instead of touching all pairs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .signals import PowerSignal

OFF_MODE = "off"

# extract_states guards: below 10 clusters the linkage phase would already be
# doing the distance sweep's job; dedupe keeps agglomeration tractable.
MIN_CLUSTERS = 10
DEDUPE_SAMPLE_LIMIT = 1_000_000
DEDUPE_QUANTUM_W = 1.0


@dataclass(frozen=True)
class Cluster:
    """A multiset of power samples with cached summary statistics."""

    members: np.ndarray
    centroid: float
    min: float
    max: float
    size: int

    @classmethod
    def of(cls, members) -> "Cluster":
        arr = np.asarray(members, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("a cluster needs at least one member")
        return cls(
            members=arr,
            centroid=float(arr.mean()),
            min=float(arr.min()),
            max=float(arr.max()),
            size=int(arr.size),
        )


@dataclass(frozen=True)
class State:
    """One operating mode's power interval."""

    mode: str
    low: float
    high: float
    centroid: float
    size: int = 0

    def contains(self, watts: float) -> bool:
        return self.low <= watts <= self.high

    def distance_to(self, watts: float) -> float:
        """Distance from a value to the interval (0 inside)."""
        if watts < self.low:
            return self.low - watts
        if watts > self.high:
            return watts - self.high
        return 0.0


@dataclass(frozen=True)
class StateSet:
    """Disjoint power intervals, one per mode, sorted by centroid ascending."""

    states: tuple[State, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError("a state set needs at least one state")
        offs = [s for s in self.states if s.mode == OFF_MODE]
        if len(offs) != 1:
            raise ValueError("exactly one state must be the OFF state")
        if offs[0].centroid != min(s.centroid for s in self.states):
            raise ValueError("the OFF state must have the lowest centroid")

    @property
    def off_state(self) -> State:
        return next(s for s in self.states if s.mode == OFF_MODE)

    @property
    def non_off(self) -> tuple[State, ...]:
        return tuple(s for s in self.states if s.mode != OFF_MODE)

    def mode_ids(self) -> list[str]:
        return [s.mode for s in self.states]

    def get(self, mode: str) -> State:
        for s in self.states:
            if s.mode == mode:
                return s
        raise KeyError(mode)

    def nearest(self, watts: float) -> State:
        """State containing the value, else the closest interval."""
        return min(self.states, key=lambda s: (s.distance_to(watts), s.centroid))


def ward_merge_cost(a: Cluster, b: Cluster) -> float:
    """Increase in within-cluster sum of squares if a and b were merged."""
    return _cost(a.size, a.centroid, b.size, b.centroid)


def _cost(na: int, ca: float, nb: int, cb: float) -> float:
    return (na * nb) / (na + nb) * (ca - cb) ** 2


def lw_cluster(samples, k: int) -> list[Cluster]:
    """Agglomerate samples bottom-up until exactly ``k`` clusters remain.

    Every sample starts as its own cluster; at each stage the globally
    cheapest pair merges. Cost ties break toward the pair with the smaller
    centroids, which makes the result deterministic.
    """
    data = np.sort(np.asarray(samples, dtype=np.float64))
    n = data.size
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < k:
        raise InsufficientDataError(f"cannot form {k} clusters from {n} samples")

    if n > DEDUPE_SAMPLE_LIMIT:
        data = np.round(data / DEDUPE_QUANTUM_W) * DEDUPE_QUANTUM_W
        values, counts = np.unique(data, return_counts=True)
    else:
        values, counts = data, np.ones(n, dtype=np.int64)

    # Clusters are contiguous slices of the sorted data; only neighbours can
    # merge, so a lazy-deletion heap over adjacent pairs suffices.
    m = values.size
    size = counts.astype(np.float64)
    total = values * size  # member sums, for exact weighted centroids
    lo = np.arange(m)  # slice bounds into `values`
    hi = np.arange(m) + 1
    left = np.arange(m) - 1  # neighbour links; -1 / m = none
    right = np.arange(m) + 1
    alive = np.ones(m, dtype=bool)
    version = np.zeros(m, dtype=np.int64)

    def centroid(i):
        return total[i] / size[i]

    def pair_entry(i, j):
        c = _cost(size[i], centroid(i), size[j], centroid(j))
        return (c, centroid(i), centroid(j), i, j, version[i], version[j])

    heap = [pair_entry(i, i + 1) for i in range(m - 1)]
    heapq.heapify(heap)

    remaining = m
    if remaining < k and n >= k:
        raise InsufficientDataError(
            f"deduplication left {remaining} distinct values, fewer than k={k}"
        )
    while remaining > k:
        cost, _, _, i, j, vi, vj = heapq.heappop(heap)
        if not (alive[i] and alive[j]) or version[i] != vi or version[j] != vj:
            continue
        # merge j into i (i is the lower neighbour)
        size[i] += size[j]
        total[i] += total[j]
        hi[i] = hi[j]
        alive[j] = False
        version[i] += 1
        right[i] = right[j]
        if right[j] < m:
            left[right[j]] = i
        remaining -= 1
        if left[i] >= 0:
            heapq.heappush(heap, pair_entry(left[i], i))
        if right[i] < m:
            heapq.heappush(heap, pair_entry(i, right[i]))

    out = []
    for i in range(m):
        if alive[i]:
            members = data[lo[i] : hi[i]] if n <= DEDUPE_SAMPLE_LIMIT else np.repeat(
                values[lo[i] : hi[i]], counts[lo[i] : hi[i]]
            )
            out.append(Cluster.of(members))
    out.sort(key=lambda c: c.centroid)
    return out


def _merge_clusters(a: Cluster, b: Cluster) -> Cluster:
    return Cluster(
        members=np.concatenate((a.members, b.members)),
        centroid=(a.centroid * a.size + b.centroid * b.size) / (a.size + b.size),
        min=min(a.min, b.min),
        max=max(a.max, b.max),
        size=a.size + b.size,
    )


def distance_merge(clusters: list[Cluster], merge_ratio: float = 0.15) -> list[Cluster]:
    """Absorb clusters whose centroids sit close under the current root.

    Centroids are walked in descending order. While the next centroid is
    within ``merge_ratio`` of the root's centroid, the clusters merge and the
    merged cluster (weighted centroid, envelope bounds) stays root; otherwise
    the root is final and the next cluster takes over as root.
    """
    if not clusters:
        raise ValueError("no clusters to merge")
    ordered = sorted(clusters, key=lambda c: c.centroid, reverse=True)
    finished = []
    root = ordered[0]
    for cand in ordered[1:]:
        if root.centroid - cand.centroid < merge_ratio * root.centroid:
            root = _merge_clusters(root, cand)
        else:
            finished.append(root)
            root = cand
    finished.append(root)
    finished.reverse()
    return finished


def _mode_names(count: int) -> list[str]:
    return [f"on{i}" for i in range(1, count + 1)]


def states_from_clusters(
    clusters: list[Cluster], off_threshold: float = 5.0
) -> StateSet:
    """Tag merged clusters as states; split the OFF mode off by its level.

    The lowest-centroid cluster becomes OFF when it sits under
    ``off_threshold`` watts; otherwise the appliance was never observed off
    and a zero-width OFF state at 0 W is added.
    """
    ordered = sorted(clusters, key=lambda c: c.centroid)
    states = []
    if ordered[0].centroid < off_threshold:
        off, rest = ordered[0], ordered[1:]
        states.append(
            State(OFF_MODE, low=off.min, high=off.max, centroid=off.centroid, size=off.size)
        )
    else:
        rest = ordered
        states.append(State(OFF_MODE, low=0.0, high=0.0, centroid=0.0, size=0))
    for name, c in zip(_mode_names(len(rest)), rest):
        states.append(State(name, low=c.min, high=c.max, centroid=c.centroid, size=c.size))
    return StateSet(states=tuple(states))


def extract_states(
    filtered_signal: PowerSignal,
    k: int = MIN_CLUSTERS,
    merge_ratio: float = 0.15,
    off_threshold: float = 5.0,
) -> StateSet:
    """Learn an appliance's states from its filtered training signal."""
    if k < MIN_CLUSTERS:
        raise ValueError(f"k must be at least {MIN_CLUSTERS}, got {k}")
    n = len(filtered_signal)
    clusters = lw_cluster(filtered_signal.values, min(k, n))
    merged = distance_merge(clusters, merge_ratio=merge_ratio)
    return states_from_clusters(merged, off_threshold=off_threshold)
