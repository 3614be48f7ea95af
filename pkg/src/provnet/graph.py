"""Weighted provider patient-sharing graph: construction, thresholds, export."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np

from . import kernels
from .claims import Provider, Visit, specialty_key

DEFAULT_PCP_SPECIALTIES = frozenset(
    {"Family Medicine", "Internal Medicine", "General Practice", "Geriatric Medicine", "Pediatrics"}
)

NODE_COLUMNS = ("npi", "specialty", "org_id", "is_pcp", "unique_patient_count")
EDGE_COLUMNS = ("npi_a", "npi_b", "weight")
EXPORT_FORMATS = ("edge-csv", "gexf", "dot")


class ConfigError(ValueError):
    pass


class EmptyGraphError(ValueError):
    """Raised when filtering leaves nothing to analyse; names the responsible filter."""

    def __init__(self, filter_name: str, message: str):
        super().__init__(message)
        self.filter_name = filter_name


def is_pcp(specialty: str, pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES) -> bool:
    return specialty_key(specialty) in {specialty_key(s) for s in pcp_specialties}


@dataclass(frozen=True, slots=True)
class ProviderNode:
    npi: str
    specialty: str = ""
    org_id: str | None = None
    is_pcp: bool = False
    unique_patient_count: int = 0


@dataclass(eq=False)
class ProviderGraph:
    """Undirected weighted graph over providers.

    Nodes are held in NPI order; edges as index arrays with ``src < dst``,
    sorted by ``(src, dst)``. Treat instances as immutable.
    """

    nodes: dict[str, ProviderNode]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    npis: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.npis = tuple(self.nodes)
        if list(self.npis) != sorted(self.npis):
            raise ValueError("nodes must be in sorted NPI order")
        self.src = np.ascontiguousarray(self.src, dtype=np.int64)
        self.dst = np.ascontiguousarray(self.dst, dtype=np.int64)
        self.weight = np.ascontiguousarray(self.weight)
        if len(self.src):
            if np.any(self.src >= self.dst):
                raise ValueError("edges must satisfy src < dst (no self-loops)")
            if np.any(self.weight < 0):
                raise ValueError("edge weights must be non-negative")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[str, str, float]],
        nodes: Iterable[str | ProviderNode] = (),
    ) -> ProviderGraph:
        """Build from ``(a, b, w)`` triples; parallel edges are summed."""
        node_map: dict[str, ProviderNode] = {}
        for n in nodes:
            node = n if isinstance(n, ProviderNode) else ProviderNode(str(n))
            node_map[node.npi] = node
        acc: dict[tuple[str, str], float] = {}
        for a, b, w in edges:
            a, b = str(a), str(b)
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            key = (a, b) if a < b else (b, a)
            acc[key] = acc.get(key, 0) + w
            node_map.setdefault(a, ProviderNode(a))
            node_map.setdefault(b, ProviderNode(b))
        npis = sorted(node_map)
        index = {n: i for i, n in enumerate(npis)}
        keys = sorted((index[a], index[b]) for a, b in acc)
        src = np.array([k[0] for k in keys], dtype=np.int64)
        dst = np.array([k[1] for k in keys], dtype=np.int64)
        ws = [acc[(npis[s], npis[d])] for s, d in keys]
        dtype = np.int64 if all(float(x).is_integer() for x in ws) else np.float64
        weight = np.array(ws, dtype=dtype)
        return cls({n: node_map[n] for n in npis}, src, dst, weight)

    @property
    def n_nodes(self) -> int:
        return len(self.npis)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def total_weight(self) -> float:
        return self.weight.sum().item() if len(self.weight) else 0

    def edges(self) -> Iterable[tuple[str, str, float]]:
        npis = self.npis
        for s, d, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield npis[s], npis[d], w

    def edge_dict(self) -> dict[tuple[str, str], float]:
        return {(a, b): w for a, b, w in self.edges()}

    def weight_between(self, a: str, b: str) -> float:
        if a > b:
            a, b = b, a
        return self.edge_dict().get((a, b), 0)

    def degrees(self) -> np.ndarray:
        w = self.weight.astype(np.float64)
        return np.bincount(self.src, w, self.n_nodes) + np.bincount(self.dst, w, self.n_nodes)

    def subgraph(self, keep: Iterable[str]) -> ProviderGraph:
        keep = set(keep)
        mask_nodes = np.array([n in keep for n in self.npis], dtype=bool)
        new_index = np.cumsum(mask_nodes) - 1
        emask = mask_nodes[self.src] & mask_nodes[self.dst] if self.n_edges else np.zeros(0, dtype=bool)
        nodes = {n: self.nodes[n] for n in self.npis if n in keep}
        return ProviderGraph(nodes, new_index[self.src[emask]], new_index[self.dst[emask]], self.weight[emask])

    def same_as(self, other: ProviderGraph) -> bool:
        return (
            self.npis == other.npis
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    def to_networkx(self, partition: Mapping[str, int] | None = None):
        import networkx as nx

        g = nx.Graph()
        for npi, node in self.nodes.items():
            attrs = {"specialty": node.specialty, "is_pcp": node.is_pcp, "unique_patient_count": node.unique_patient_count}
            if node.org_id:
                attrs["org_id"] = node.org_id
            if partition is not None and npi in partition:
                attrs["community"] = int(partition[npi])
            g.add_node(npi, **attrs)
        for a, b, w in self.edges():
            g.add_edge(a, b, weight=w)
        return g


def _patient_provider_csr(visits: Iterable[Visit]):
    by_patient: dict[str, set[str]] = {}
    for v in visits:
        by_patient.setdefault(v.patient_id, set()).add(v.npi)
    npis = sorted(set().union(*by_patient.values())) if by_patient else []
    index = {n: i for i, n in enumerate(npis)}
    indptr = [0]
    indices: list[int] = []
    for pid in sorted(by_patient):
        indices.extend(sorted(index[n] for n in by_patient[pid]))
        indptr.append(len(indices))
    return npis, np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64)


def shared_patient_counts(
    visits: Iterable[Visit],
    directory: Mapping[str, Provider] | None = None,
    pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES,
    workers: int = 1,
    backend: str | None = None,
) -> ProviderGraph:
    """Unfiltered patient-sharing graph: ``w(u, v)`` is the number of distinct
    patients who visited both ``u`` and ``v``.

    ``workers > 1`` splits patients into chunks counted on a thread pool; the
    result does not depend on the split.
    """
    npis, indptr, indices = _patient_provider_csr(visits)
    n = len(npis)
    n_patients = len(indptr) - 1
    directory = directory or {}
    pcp_keys = {specialty_key(s) for s in pcp_specialties}
    patient_counts = np.bincount(indices, minlength=n)

    nodes = {}
    for i, npi in enumerate(npis):
        prov = directory.get(npi)
        spec = prov.specialty if prov else ""
        nodes[npi] = ProviderNode(
            npi,
            spec,
            prov.org_id if prov else None,
            specialty_key(spec) in pcp_keys,
            int(patient_counts[i]),
        )

    workers = max(1, int(workers))
    bounds = np.linspace(0, n_patients, workers + 1).astype(np.int64)
    chunks = [(int(bounds[c]), int(bounds[c + 1])) for c in range(workers)]
    if workers == 1:
        parts = [kernels.pair_keys(indptr, indices, n, 0, n_patients, backend=backend)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: kernels.pair_keys(indptr, indices, n, c[0], c[1], backend=backend), chunks))
    keys = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    uniq, counts = np.unique(keys, return_counts=True)
    return ProviderGraph(nodes, uniq // max(n, 1), uniq % max(n, 1), counts.astype(np.int64))


def apply_thresholds(graph: ProviderGraph, min_patients_per_provider: int = 5, min_edge_weight: int = 2) -> ProviderGraph:
    """Drop providers with too few distinct patients, then edges that are too light.

    The provider filter runs first. Isolated nodes that survive are kept.
    """
    if min_patients_per_provider < 1 or min_edge_weight < 1:
        raise ConfigError("thresholds must be >= 1")
    keep = [n for n in graph.npis if graph.nodes[n].unique_patient_count >= min_patients_per_provider]
    g = graph.subgraph(keep)
    mask = g.weight >= min_edge_weight
    return ProviderGraph(g.nodes, g.src[mask], g.dst[mask], g.weight[mask])


def require_nonempty(graph: ProviderGraph, min_patients_per_provider: int, min_edge_weight: int) -> None:
    if graph.n_nodes == 0:
        raise EmptyGraphError(
            "provider",
            f"empty graph after filtering: provider filter (min_patients_per_provider={min_patients_per_provider}) removed every provider",
        )
    if graph.n_edges == 0:
        raise EmptyGraphError(
            "edge",
            f"empty graph after filtering: edge filter (min_edge_weight={min_edge_weight}) removed every edge",
        )


# -- serialization --------------------------------------------------------


def _fmt_weight(w) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def write_edge_csv(graph: ProviderGraph, fh: IO[str], min_weight: float | None = None) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EDGE_COLUMNS)
    for a, b, wt in graph.edges():
        if min_weight is None or wt >= min_weight:
            w.writerow([a, b, _fmt_weight(wt)])


def write_nodes_csv(graph: ProviderGraph, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(NODE_COLUMNS)
    for npi in graph.npis:
        n = graph.nodes[npi]
        w.writerow([n.npi, n.specialty, n.org_id or "", int(n.is_pcp), n.unique_patient_count])


def read_nodes_csv(fh: IO[str]) -> dict[str, ProviderNode]:
    reader = csv.DictReader(fh)
    nodes = {}
    for row in reader:
        nodes[row["npi"]] = ProviderNode(
            row["npi"], row.get("specialty", ""), row.get("org_id") or None, row.get("is_pcp", "0") == "1", int(row.get("unique_patient_count") or 0)
        )
    return nodes


def read_edge_csv(fh: IO[str], nodes: Mapping[str, ProviderNode] | None = None) -> ProviderGraph:
    reader = csv.DictReader(fh)
    missing = set(EDGE_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"edge CSV missing column(s): {', '.join(sorted(missing))}")
    edges = []
    for row in reader:
        raw = row["weight"]
        wt = int(raw) if raw.lstrip("-").isdigit() else float(raw)
        edges.append((row["npi_a"], row["npi_b"], wt))
    return ProviderGraph.from_edges(edges, (nodes or {}).values())


def _gexf(graph: ProviderGraph, partition, min_weight) -> bytes:
    import networkx as nx

    g = graph.to_networkx(partition)
    if min_weight is not None:
        g.remove_edges_from([(a, b) for a, b, w in g.edges(data="weight") if w < min_weight])
    buf = io.BytesIO()
    nx.write_gexf(g, buf)
    return buf.getvalue()


def _dot_id(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(graph: ProviderGraph, partition, min_weight) -> bytes:
    lines = ["graph providers {"]
    for npi in graph.npis:
        node = graph.nodes[npi]
        attrs = [f"specialty={_dot_id(node.specialty)}"]
        if partition is not None and npi in partition:
            attrs.append(f"community={int(partition[npi])}")
        lines.append(f"  {_dot_id(npi)} [{', '.join(attrs)}];")
    for a, b, w in graph.edges():
        if min_weight is None or w >= min_weight:
            lines.append(f"  {_dot_id(a)} -- {_dot_id(b)} [weight={_fmt_weight(w)}];")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def export_graph(
    graph: ProviderGraph,
    partition: Mapping[str, int] | None = None,
    fmt: str = "edge-csv",
    min_display_weight: float | None = None,
) -> bytes:
    """Serialize for external tools. ``min_display_weight`` hides light edges."""
    if fmt in ("edge-csv", "csv"):
        buf = io.StringIO()
        write_edge_csv(graph, buf, min_display_weight)
        return buf.getvalue().encode("utf-8")
    if fmt == "gexf":
        return _gexf(graph, partition, min_display_weight)
    if fmt == "dot":
        return _dot(graph, partition, min_display_weight)
    raise ValueError(f"unknown export format {fmt!r}; expected one of {', '.join(EXPORT_FORMATS)}")


__all__ = [
    "DEFAULT_PCP_SPECIALTIES",
    "ConfigError",
    "EmptyGraphError",
    "ProviderGraph",
    "ProviderNode",
    "apply_thresholds",
    "export_graph",
    "is_pcp",
    "read_edge_csv",
    "read_nodes_csv",
    "require_nonempty",
    "shared_patient_counts",
    "write_edge_csv",
    "write_nodes_csv",
]
