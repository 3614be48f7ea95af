"""Community detection by greedy agglomerative modularity maximization."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Hashable, Mapping, NamedTuple

import numpy as np

from . import kernels
from .graph import ConfigError, ProviderGraph


class Merge(NamedTuple):
    a: str  # representative NPI (smallest node index) of the surviving community
    b: str  # representative NPI of the absorbed community
    delta_q: float


@dataclass
class Partition:
    """Provider -> community labeling.

    Ids are dense ``0..k-1`` in descending community size (ties: smallest
    member NPI first). ``merge_log`` is the full dendrogram; the labeling is
    the state after the first ``cut_level`` merges.
    """

    community_of: dict[str, int]
    modularity: float
    merge_log: list[Merge] = field(default_factory=list)
    cut_level: int = 0

    @property
    def n_communities(self) -> int:
        return len(set(self.community_of.values()))

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for npi in sorted(self.community_of):
            out.setdefault(self.community_of[npi], []).append(npi)
        return dict(sorted(out.items()))

    def sizes(self) -> dict[int, int]:
        return dict(sorted(Counter(self.community_of.values()).items()))


@dataclass
class PrunedPartition:
    major: Partition
    excluded: list[tuple[int, list[str]]]
    min_size: int = 50

    def summary(self) -> dict:
        sizes = [len(m) for _, m in self.excluded]
        return {
            "n_major": self.major.n_communities,
            "major_providers": len(self.major.community_of),
            "excluded_communities": len(sizes),
            "excluded_providers": sum(sizes),
            "excluded_mean_size": (sum(sizes) / len(sizes)) if sizes else 0.0,
        }

    def excluded_providers(self) -> set[str]:
        return {npi for _, members in self.excluded for npi in members}


def relabel_by_size(labels: Mapping[str, Hashable]) -> dict[str, int]:
    """Dense ids by descending size; ties go to the community whose smallest NPI sorts first."""
    groups: dict[Hashable, list[str]] = {}
    for npi in sorted(labels):
        groups.setdefault(labels[npi], []).append(npi)
    order = sorted(groups.values(), key=lambda m: (-len(m), m[0]))
    return {npi: cid for cid, members in enumerate(order) for npi in members}


def modularity(graph: ProviderGraph, labeling: Mapping[str, Hashable]) -> float:
    """Weighted modularity ``sum_c (e_cc - a_c**2)``.

    ``e_cc`` is the fraction of edge weight inside ``c`` and ``a_c`` the
    fraction of edge ends attached to ``c``.
    """
    missing = [n for n in graph.npis if n not in labeling]
    if missing:
        raise ValueError(f"{len(missing)} node(s) unlabeled, e.g. {missing[0]!r}")
    two_m = 2.0 * float(graph.weight.astype(np.float64).sum()) if graph.n_edges else 0.0
    if two_m <= 0:
        raise ValueError("modularity is undefined for a graph with zero total edge weight")
    codes: dict[Hashable, int] = {}
    lab = np.fromiter((codes.setdefault(labeling[n], len(codes)) for n in graph.npis), dtype=np.int64, count=graph.n_nodes)
    k = len(codes)
    w = graph.weight.astype(np.float64)
    same = lab[graph.src] == lab[graph.dst]
    inside = np.bincount(lab[graph.src[same]], w[same], k)
    ends = np.bincount(lab[graph.src], w, k) + np.bincount(lab[graph.dst], w, k)
    return float(np.sum(2.0 * inside / two_m - (ends / two_m) ** 2))


def _initial_q(graph: ProviderGraph, two_m: float) -> float:
    deg = graph.degrees()
    return float(-np.sum((deg / two_m) ** 2))


def replay(graph: ProviderGraph, merge_log: list[Merge], level: int) -> dict[str, str]:
    """Labeling (by representative NPI) after applying the first ``level`` merges."""
    parent = {n: n for n in graph.npis}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in merge_log[:level]:
        parent[find(m.b)] = find(m.a)
    return {n: find(n) for n in graph.npis}


def fast_greedy(graph: ProviderGraph, backend: str | None = None) -> Partition:
    """Greedy agglomerative modularity maximization.

    Starts from singletons and repeatedly merges the adjacent pair with the
    largest modularity gain (ties: smallest ``(min id, max id)`` by node
    order) until no adjacent pair remains, then cuts the dendrogram at the
    highest-modularity level, preferring fewer communities on ties.

    A graph with zero total edge weight yields singletons and ``Q = 0``.
    """
    if graph.n_nodes == 0:
        raise ValueError("cannot partition an empty graph")
    w = graph.weight.astype(np.float64)
    two_m = 2.0 * float(w.sum()) if graph.n_edges else 0.0
    if two_m <= 0:
        return Partition(relabel_by_size({n: n for n in graph.npis}), 0.0, [], 0)

    a, b, gain = kernels.greedy_merges(graph.n_nodes, graph.src, graph.dst, w, backend=backend)
    # gain = w_ab * 2m - k_a * k_b, so delta Q = 2 * gain / (2m)^2
    scale = 2.0 / (two_m * two_m)
    npis = graph.npis
    log = [Merge(npis[i], npis[j], g * scale) for i, j, g in zip(a.tolist(), b.tolist(), gain.tolist())]

    # exact for integer weights (gains are integers below 2**53)
    cum = np.concatenate([[0.0], np.cumsum(gain)])
    best = float(cum.max())
    level = int(np.flatnonzero(cum == best)[-1])

    labels = relabel_by_size(replay(graph, log, level))
    return Partition(labels, modularity(graph, labels), log, level)


def q_trajectory(graph: ProviderGraph, partition: Partition) -> np.ndarray:
    """Incrementally tracked Q after each merge prefix (index 0 = singletons)."""
    two_m = 2.0 * float(graph.weight.astype(np.float64).sum())
    q0 = _initial_q(graph, two_m)
    return q0 + np.concatenate([[0.0], np.cumsum([m.delta_q for m in partition.merge_log])])


def prune_small(partition: Partition, min_size: int = 50) -> PrunedPartition:
    """Split off communities smaller than ``min_size``.

    Major communities are relabeled densely by descending size. Excluded
    communities keep the ids they had in the input partition. The major
    partition keeps the whole-network modularity.
    """
    if min_size < 1:
        raise ConfigError("min_size must be >= 1")
    members = partition.members()
    major_labels = {npi: cid for cid, mem in members.items() if len(mem) >= min_size for npi in mem}
    excluded = [(cid, mem) for cid, mem in members.items() if len(mem) < min_size]
    major = Partition(relabel_by_size(major_labels), partition.modularity, partition.merge_log, partition.cut_level)
    return PrunedPartition(major, excluded, min_size)


# -- serialization --------------------------------------------------------


def write_partition_csv(partition: Partition, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["npi", "community_id"])
    for npi in sorted(partition.community_of):
        w.writerow([npi, partition.community_of[npi]])


def read_partition_csv(fh: IO[str]) -> dict[str, int]:
    reader = csv.DictReader(fh)
    if not {"npi", "community_id"} <= set(reader.fieldnames or ()):
        raise ValueError("partition CSV needs columns npi,community_id")
    return {row["npi"]: int(row["community_id"]) for row in reader}


def write_merge_log_csv(partition: Partition, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "community_a", "community_b", "delta_q"])
    for step, m in enumerate(partition.merge_log, start=1):
        w.writerow([step, m.a, m.b, repr(m.delta_q)])


def partition_metadata(partition: Partition, pruned: PrunedPartition) -> dict:
    return {
        "q": partition.modularity,
        "n_communities": partition.n_communities,
        "merge_count": partition.cut_level,
        "dendrogram_merges": len(partition.merge_log),
        "min_size": pruned.min_size,
        "excluded_summary": pruned.summary(),
    }


def dump_json(obj, fh: IO[str]) -> None:
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")
