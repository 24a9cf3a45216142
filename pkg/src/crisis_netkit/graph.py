"""Cumulative daily network snapshots built from communication events.

Every retweet, reply, or quote adds weight 1 to the directed edge
actor -> target user. A post only guarantees the author appears as a node.
Snapshots are cumulative: day d contains everything from day 0 through d,
so node and edge sets grow monotonically and weights never decrease.

Storage follows a base-plus-delta layout: one shared edge table with
per-day weight increments, so a multi-day study costs memory proportional
to the final graph, not to days x graph.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .ingest import COMMUNICATION_KINDS, DayBucket


@dataclass(slots=True)
class NetworkSnapshot:
    """Materialized graph state as of the end of one study day."""

    day_index: int
    nodes: set[str]
    edges: dict[tuple[str, str], int]
    first_seen: dict[tuple[str, str], int]


@dataclass(slots=True)
class WeightStats:
    median: float | None
    variance: float | None
    max: int | None
    histogram: dict[int, int]
    n_edges: int

    @classmethod
    def empty(cls) -> "WeightStats":
        return cls(median=None, variance=None, max=None, histogram={}, n_edges=0)


class SnapshotStore:
    """Compact cumulative-graph store with per-day weight deltas.

    Node and edge identities live in flat arrays indexed by first appearance;
    each day records which edges gained weight and by how much. All per-day
    views are derived by replaying deltas in day order.
    """

    def __init__(self) -> None:
        self.node_ids: list[str] = []
        self._node_index: dict[str, int] = {}
        self.node_first_day: list[int] = []
        self.edge_src: list[int] = []
        self.edge_dst: list[int] = []
        self.edge_first_day: list[int] = []
        self._edge_index: dict[tuple[int, int], int] = {}
        # Per day: (edge indices touched, weight increments), both np arrays.
        self.day_deltas: list[tuple[np.ndarray, np.ndarray]] = []
        self.day_new_edges: list[int] = []
        self.day_node_counts: list[int] = []
        self.day_edge_counts: list[int] = []

    # -- construction ---------------------------------------------------

    def _node(self, user_id: str, day: int) -> int:
        idx = self._node_index.get(user_id)
        if idx is None:
            idx = len(self.node_ids)
            self._node_index[user_id] = idx
            self.node_ids.append(user_id)
            self.node_first_day.append(day)
        return idx

    @classmethod
    def from_buckets(cls, buckets: Sequence[DayBucket]) -> "SnapshotStore":
        store = cls()
        for bucket in buckets:
            day = bucket.day_index
            touched: dict[int, int] = {}
            new_edges = 0
            for ev in bucket.events:
                u = store._node(ev.user_id, day)
                if ev.kind in COMMUNICATION_KINDS:
                    v = store._node(ev.target_user_id, day)
                    key = (u, v)
                    eidx = store._edge_index.get(key)
                    if eidx is None:
                        eidx = len(store.edge_src)
                        store._edge_index[key] = eidx
                        store.edge_src.append(u)
                        store.edge_dst.append(v)
                        store.edge_first_day.append(day)
                        new_edges += 1
                    touched[eidx] = touched.get(eidx, 0) + 1
            idx_arr = np.fromiter(touched.keys(), dtype=np.int64, count=len(touched))
            cnt_arr = np.fromiter(touched.values(), dtype=np.int64, count=len(touched))
            order = np.argsort(idx_arr, kind="stable")
            store.day_deltas.append((idx_arr[order], cnt_arr[order]))
            store.day_new_edges.append(new_edges)
            store.day_node_counts.append(len(store.node_ids))
            store.day_edge_counts.append(len(store.edge_src))
        return store

    # -- cheap per-day facts ---------------------------------------------

    @property
    def n_days(self) -> int:
        return len(self.day_deltas)

    def nodes_at(self, day: int) -> int:
        return self.day_node_counts[day]

    def edges_at(self, day: int) -> int:
        return self.day_edge_counts[day]

    def active_pairs(self, day: int) -> int:
        return len(self.day_deltas[day][0])

    def new_pairs(self, day: int) -> int:
        return self.day_new_edges[day]

    # -- replay views -----------------------------------------------------

    def iter_weights(self) -> Iterator[np.ndarray]:
        """Yield the cumulative weight vector after each day.

        The vector is sliced to the edges existing by that day; a fresh copy
        is yielded so callers may keep it.
        """
        weights = np.zeros(len(self.edge_src), dtype=np.int64)
        for day in range(self.n_days):
            idx, cnt = self.day_deltas[day]
            np.add.at(weights, idx, cnt)
            yield weights[: self.edge_counts_slice(day)].copy()

    def edge_counts_slice(self, day: int) -> int:
        return self.day_edge_counts[day]

    def weights_at(self, day: int) -> np.ndarray:
        weights = np.zeros(self.day_edge_counts[day], dtype=np.int64)
        for d in range(day + 1):
            idx, cnt = self.day_deltas[d]
            np.add.at(weights, idx, cnt)
        return weights

    def edge_arrays_at(self, day: int) -> tuple[np.ndarray, np.ndarray]:
        """(source index, target index) arrays of edges existing by ``day``."""
        m = self.day_edge_counts[day]
        src = np.asarray(self.edge_src[:m], dtype=np.int64)
        dst = np.asarray(self.edge_dst[:m], dtype=np.int64)
        return src, dst

    def snapshot(self, day: int) -> NetworkSnapshot:
        if day < 0 or day >= self.n_days:
            raise IndexError(f"day {day} outside 0..{self.n_days - 1}")
        n_nodes = self.day_node_counts[day]
        nodes = set(self.node_ids[:n_nodes])
        weights = self.weights_at(day)
        edges: dict[tuple[str, str], int] = {}
        first_seen: dict[tuple[str, str], int] = {}
        for eidx in range(self.day_edge_counts[day]):
            key = (self.node_ids[self.edge_src[eidx]], self.node_ids[self.edge_dst[eidx]])
            edges[key] = int(weights[eidx])
            first_seen[key] = self.edge_first_day[eidx]
        return NetworkSnapshot(day_index=day, nodes=nodes, edges=edges, first_seen=first_seen)

    def iter_snapshots(self) -> Iterator[NetworkSnapshot]:
        for day in range(self.n_days):
            yield self.snapshot(day)


def build_daily_snapshots(buckets: Sequence[DayBucket]) -> list[NetworkSnapshot]:
    """Build one cumulative snapshot per day bucket (possibly empty days)."""
    store = SnapshotStore.from_buckets(buckets)
    return list(store.iter_snapshots())


def edge_weight_distribution(snapshot: NetworkSnapshot) -> WeightStats:
    """Median, population variance, max, and histogram of edge weights."""
    if not snapshot.edges:
        return WeightStats.empty()
    weights = np.fromiter(snapshot.edges.values(), dtype=np.int64, count=len(snapshot.edges))
    return weight_stats_from_array(weights)


def weight_stats_from_array(weights: np.ndarray) -> WeightStats:
    if weights.size == 0:
        return WeightStats.empty()
    values, counts = np.unique(weights, return_counts=True)
    histogram = {int(v): int(c) for v, c in zip(values, counts)}
    return WeightStats(
        median=float(np.median(weights)),
        variance=float(np.var(weights)),
        max=int(weights.max()),
        histogram=histogram,
        n_edges=int(weights.size),
    )


def new_edge_ratio(
    snapshots: Sequence[NetworkSnapshot],
) -> list[tuple[int, float | None]]:
    """Per-day share of that day's active ordered pairs never seen before.

    A pair is active on day d when its weight grew that day (or it appeared).
    Days with no edge-creating events get ratio None. Day 0 is 1.0 whenever
    any edge exists there.
    """
    out: list[tuple[int, float | None]] = []
    prev: dict[tuple[str, str], int] = {}
    for snap in snapshots:
        active = 0
        new = 0
        for key, w in snap.edges.items():
            before = prev.get(key, 0)
            if w != before:
                active += 1
                if before == 0:
                    new += 1
        out.append((snap.day_index, (new / active) if active else None))
        prev = snap.edges
    return out


def memory_ratios_from_store(store: SnapshotStore) -> list[tuple[int, float | None]]:
    """new_edge_ratio computed directly from the store's deltas."""
    out: list[tuple[int, float | None]] = []
    for day in range(store.n_days):
        active = store.active_pairs(day)
        new = store.new_pairs(day)
        out.append((day, (new / active) if active else None))
    return out


def export_snapshot(snapshot: NetworkSnapshot, out_dir: str) -> tuple[str, str]:
    """Write one day's edge list and node list; returns the two paths.

    Edge rows are ``source<TAB>target<TAB>weight<TAB>first_seen_day``, sorted
    by (source, target) for reproducible bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    tag = f"day_{snapshot.day_index:03d}"
    edge_path = os.path.join(out_dir, f"{tag}.edges.tsv")
    node_path = os.path.join(out_dir, f"{tag}.nodes.txt")
    with open(edge_path, "w", encoding="utf-8") as fh:
        for (src, dst) in sorted(snapshot.edges):
            w = snapshot.edges[(src, dst)]
            day0 = snapshot.first_seen[(src, dst)]
            fh.write(f"{src}\t{dst}\t{w}\t{day0}\n")
    with open(node_path, "w", encoding="utf-8") as fh:
        for node in sorted(snapshot.nodes):
            fh.write(node + "\n")
    return edge_path, node_path


def load_snapshot_dir(in_dir: str) -> list[NetworkSnapshot]:
    """Load snapshots previously written by export_snapshot."""
    days = sorted(
        int(name.split("_")[1].split(".")[0])
        for name in os.listdir(in_dir)
        if name.endswith(".edges.tsv")
    )
    snapshots = []
    for day in days:
        tag = f"day_{day:03d}"
        edges: dict[tuple[str, str], int] = {}
        first_seen: dict[tuple[str, str], int] = {}
        with open(os.path.join(in_dir, f"{tag}.edges.tsv"), encoding="utf-8") as fh:
            for line in fh:
                src, dst, w, d0 = line.rstrip("\n").split("\t")
                edges[(src, dst)] = int(w)
                first_seen[(src, dst)] = int(d0)
        with open(os.path.join(in_dir, f"{tag}.nodes.txt"), encoding="utf-8") as fh:
            nodes = {line.rstrip("\n") for line in fh if line.rstrip("\n")}
        snapshots.append(
            NetworkSnapshot(day_index=day, nodes=nodes, edges=edges, first_seen=first_seen)
        )
    return snapshots
