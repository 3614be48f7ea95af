"""Import/export accounting of services between communities and RCA indices."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .assignment import AssignmentResult
from .claims import Provider, Visit

IMPORT = "import"
EXPORT = "export"
DIRECTIONS = (IMPORT, EXPORT)


@dataclass
class TradeMatrix:
    """Cross-community service counts keyed by the rendering provider's specialty.

    ``pair_flows`` is keyed ``(provider community, patient community, specialty)``.
    ``excluded`` tallies visits dropped because the patient was unassigned or
    the provider sat outside the major communities.
    """

    communities: list[int]
    import_counts: dict[tuple[int, str], float] = field(default_factory=dict)
    export_counts: dict[tuple[int, str], float] = field(default_factory=dict)
    pair_flows: dict[tuple[int, int, str], float] = field(default_factory=dict)
    excluded: dict[str, int] = field(default_factory=lambda: {"unassigned_patient": 0, "unpartitioned_provider": 0})
    weighting: str = "visits"

    def counts(self, direction: str) -> dict[tuple[int, str], float]:
        if direction == IMPORT:
            return self.import_counts
        if direction == EXPORT:
            return self.export_counts
        raise ValueError(f"direction must be 'import' or 'export', got {direction!r}")

    @property
    def specialties(self) -> list[str]:
        return sorted({s for _, s in self.import_counts} | {s for _, s in self.export_counts})

    def specialty_volume(self) -> dict[str, float]:
        vol: dict[str, float] = defaultdict(float)
        for (_, s), x in self.import_counts.items():
            vol[s] += x
        return dict(vol)


def trade_counts(
    visits: Iterable[Visit],
    assignment: AssignmentResult | Mapping[str, int | None],
    community_of: Mapping[str, int],
    directory: Mapping[str, Provider] | None = None,
    weighting: str = "visits",
) -> TradeMatrix:
    """Classify every visit crossing community lines as one import and one export.

    Service specialty comes from ``directory`` (the rendering provider's
    specialty), falling back to the visit's own label. ``weighting="spend"``
    accumulates paid amounts instead of visit counts.
    """
    if weighting not in ("visits", "spend"):
        raise ValueError("weighting must be 'visits' or 'spend'")
    patient_comm = assignment.community_of_patient if isinstance(assignment, AssignmentResult) else assignment
    directory = directory or {}
    comms = sorted(set(community_of.values()))
    m = TradeMatrix(comms, weighting=weighting)
    imp: dict[tuple[int, str], float] = defaultdict(float)
    exp: dict[tuple[int, str], float] = defaultdict(float)
    flows: dict[tuple[int, int, str], float] = defaultdict(float)
    for v in visits:
        pc = patient_comm.get(v.patient_id)
        if pc is None:
            m.excluded["unassigned_patient"] += 1
            continue
        vc = community_of.get(v.npi)
        if vc is None:
            m.excluded["unpartitioned_provider"] += 1
            continue
        if vc == pc:
            continue
        prov = directory.get(v.npi)
        spec = prov.specialty if prov is not None else v.specialty
        x = 1 if weighting == "visits" else v.paid_amount
        imp[(pc, spec)] += x
        exp[(vc, spec)] += x
        flows[(vc, pc, spec)] += x
    m.import_counts = dict(sorted(imp.items()))
    m.export_counts = dict(sorted(exp.items()))
    m.pair_flows = dict(sorted(flows.items()))
    return m


@dataclass
class RcaTable:
    direction: str
    values: dict[tuple[int, str], float | None]

    def defined(self) -> dict[tuple[int, str], float]:
        return {k: v for k, v in self.values.items() if v is not None}


def rca(matrix: TradeMatrix | Mapping[tuple[int, str], float], direction: str = EXPORT, communities: Sequence[int] | None = None) -> RcaTable:
    """Revealed comparative advantage for every (community, specialty).

    ``RCA(c, i) = (x(c,i) / sum_i x(c,i)) / (sum_c x(c,i) / sum_c sum_i x(c,i))``.
    A zero row or column total leaves the entry undefined (``None``).
    """
    if isinstance(matrix, TradeMatrix):
        x = matrix.counts(direction)
        communities = matrix.communities if communities is None else communities
    else:
        x = dict(matrix)
    comms = sorted(set(communities or ()) | {c for c, _ in x})
    specs = sorted({s for _, s in x})
    row: dict[int, float] = defaultdict(float)
    col: dict[str, float] = defaultdict(float)
    for (c, s), v in x.items():
        if v < 0:
            raise ValueError("trade counts must be non-negative")
        row[c] += v
        col[s] += v
    total = sum(row.values())
    values: dict[tuple[int, str], float | None] = {}
    for c in comms:
        for s in specs:
            if row[c] <= 0 or col[s] <= 0 or total <= 0:
                values[(c, s)] = None
            else:
                values[(c, s)] = (x.get((c, s), 0) / row[c]) / (col[s] / total)
    return RcaTable(direction, values)


@dataclass(frozen=True)
class FlowEdge:
    from_community: int
    to_community: int
    specialty: str
    count: float
    share: float


def trade_flow_report(matrix: TradeMatrix, top_k: int = 4, min_share: float = 0.05) -> list[FlowEdge]:
    """Pairwise flows for the ``top_k`` most traded specialties.

    Share is the pair flow over the specialty's total cross-community volume;
    edges with share below ``min_share`` are dropped.
    """
    vol = matrix.specialty_volume()
    top = sorted(vol, key=lambda s: (-vol[s], s))[:top_k]
    edges = []
    for spec in top:
        total = vol[spec]
        pairs = [(k, x) for k, x in matrix.pair_flows.items() if k[2] == spec]
        pairs.sort(key=lambda kx: (-kx[1], kx[0][0], kx[0][1]))
        for (src, dst, _), x in pairs:
            share = x / total
            if share >= min_share:
                edges.append(FlowEdge(src, dst, spec, x, share))
    return edges


def self_sufficiency_gaps(
    matrix: TradeMatrix,
    import_rca: RcaTable | None = None,
    balance_tolerance: float = 0.25,
    top_n: int = 3,
) -> list[dict]:
    """Two kinds of findings.

    ``internalization_opportunity``: a community both imports and exports a
    specialty in near-equal amounts (relative gap within ``balance_tolerance``).
    ``specialty_gap``: per community, up to ``top_n`` specialties with import
    RCA of at least 1, ranked by import volume.
    """
    import_rca = import_rca or rca(matrix, IMPORT)
    findings = []
    for c in matrix.communities:
        for spec in matrix.specialties:
            im = matrix.import_counts.get((c, spec), 0)
            ex = matrix.export_counts.get((c, spec), 0)
            if im > 0 and ex > 0:
                gap = abs(im - ex) / max(im, ex)
                if gap <= balance_tolerance:
                    findings.append(
                        {"type": "internalization_opportunity", "community": c, "specialty": spec, "import": im, "export": ex, "imbalance": gap}
                    )
    for c in matrix.communities:
        cands = []
        for spec in matrix.specialties:
            r = import_rca.values.get((c, spec))
            im = matrix.import_counts.get((c, spec), 0)
            if r is not None and r >= 1 and im > 0:
                cands.append((spec, im, r))
        cands.sort(key=lambda t: (-t[1], -t[2], t[0]))
        for rank, (spec, im, r) in enumerate(cands[:top_n], start=1):
            findings.append({"type": "specialty_gap", "community": c, "specialty": spec, "import": im, "rca": r, "rank": rank})
    return findings


# -- serialization --------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_rca_csv(tables: Sequence[RcaTable], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["community", "specialty", "direction", "rca"])
    for t in tables:
        for (c, s), v in sorted(t.values.items()):
            w.writerow([c, s, t.direction, "" if v is None else repr(v)])


def read_rca_csv(fh: IO[str]) -> list[RcaTable]:
    by_dir: dict[str, dict] = {}
    for row in csv.DictReader(fh):
        by_dir.setdefault(row["direction"], {})[(int(row["community"]), row["specialty"])] = float(row["rca"]) if row["rca"] else None
    return [RcaTable(d, v) for d, v in by_dir.items()]


def write_flows_csv(edges: Sequence[FlowEdge], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["from", "to", "specialty", "count", "share"])
    for e in edges:
        w.writerow([e.from_community, e.to_community, e.specialty, _num(e.count), repr(e.share)])


def write_trade_counts_csv(matrix: TradeMatrix, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["from", "to", "specialty", "count"])
    for (src, dst, spec), x in matrix.pair_flows.items():
        w.writerow([src, dst, spec, _num(x)])
