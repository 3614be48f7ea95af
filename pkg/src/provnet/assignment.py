"""Patient-to-community assignment and within-community utilization/spend."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Mapping, Sequence

from .claims import Provider, Visit, specialty_key
from .community import Partition, PrunedPartition
from .graph import DEFAULT_PCP_SPECIALTIES

PLURALITY = "plurality"
IMPUTED_PCP = "imputed_pcp"
SCHEMES = (PLURALITY, IMPUTED_PCP)

ASSIGNMENT_COLUMNS = ("patient_id", "scheme", "community_id", "visit_fraction", "spend_fraction")


def _major_map(partition: PrunedPartition | Partition | Mapping[str, int]) -> Mapping[str, int]:
    if isinstance(partition, PrunedPartition):
        return partition.major.community_of
    if isinstance(partition, Partition):
        return partition.community_of
    return partition


@dataclass
class AssignmentResult:
    scheme: str
    community_of_patient: dict[str, int | None]
    visit_fraction: dict[str, float | None] = field(default_factory=dict)
    spend_fraction: dict[str, float | None] = field(default_factory=dict)

    def assigned(self) -> dict[str, int]:
        return {p: c for p, c in self.community_of_patient.items() if c is not None}


@dataclass
class PatientTally:
    visits: int = 0
    spend: float = 0.0
    in_visits: dict[int, int] = field(default_factory=lambda: defaultdict(int))
    in_spend: dict[int, float] = field(default_factory=lambda: defaultdict(float))


def tally_visits(visits: Iterable[Visit], community_of: Mapping[str, int]) -> dict[str, PatientTally]:
    """Per patient: total visits/spend and per-community visit/spend counts.

    Visits to providers outside ``community_of`` count only in the totals.
    """
    out: dict[str, PatientTally] = {}
    spend_parts: dict[str, list[float]] = defaultdict(list)
    in_parts: dict[tuple[str, int], list[float]] = defaultdict(list)
    for v in visits:
        t = out.get(v.patient_id)
        if t is None:
            t = out[v.patient_id] = PatientTally()
        t.visits += 1
        spend_parts[v.patient_id].append(v.paid_amount)
        c = community_of.get(v.npi)
        if c is not None:
            t.in_visits[c] += 1
            in_parts[(v.patient_id, c)].append(v.paid_amount)
    for pid, parts in spend_parts.items():
        out[pid].spend = math.fsum(parts)
    for (pid, c), parts in in_parts.items():
        out[pid].in_spend[c] = math.fsum(parts)
    return out


def _fractions(t: PatientTally, c: int | None) -> tuple[float | None, float | None]:
    if c is None or t.visits == 0:
        return None, None
    vf = t.in_visits.get(c, 0) / t.visits
    sf = t.in_spend.get(c, 0.0) / t.spend if t.spend > 0 else None
    return vf, sf


def assign_by_plurality(visits: Sequence[Visit], partition) -> AssignmentResult:
    """Assign each patient to the major community that received most of their visits.

    Ties go to higher in-community spend, then to the smaller community id.
    Patients with no visit to a major-community provider stay unassigned.
    """
    community_of = _major_map(partition)
    tallies = tally_visits(visits, community_of)
    result = AssignmentResult(PLURALITY, {})
    for pid in sorted(tallies):
        t = tallies[pid]
        if t.in_visits:
            c = min(t.in_visits, key=lambda c: (-t.in_visits[c], -t.in_spend.get(c, 0.0), c))
        else:
            c = None
        result.community_of_patient[pid] = c
        result.visit_fraction[pid], result.spend_fraction[pid] = _fractions(t, c)
    return result


def _months_before(d: date, months: int) -> date:
    y, m = divmod(d.year * 12 + d.month - 1 - months, 12)
    m += 1
    for day in (d.day, 30, 29, 28):
        try:
            return date(y, m, day)
        except ValueError:
            continue
    raise AssertionError("unreachable")


def impute_pcp(
    visits: Sequence[Visit],
    directory: Mapping[str, Provider],
    pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES,
    window_months: int = 12,
    as_of: date | None = None,
) -> dict[str, str]:
    """Patient -> NPI of the PCP seen most often in the trailing window.

    The window is ``(as_of - window_months, as_of]``; ``as_of`` defaults to the
    latest service date. Ties go to the most recently seen PCP, then the
    smallest NPI. Patients without in-window PCP visits are absent.
    """
    if window_months < 1:
        raise ValueError("window_months must be >= 1")
    if not visits:
        return {}
    as_of = as_of or max(v.service_date for v in visits)
    start = _months_before(as_of, window_months)
    pcp_keys = {specialty_key(s) for s in pcp_specialties}
    counts: dict[str, dict[str, list]] = defaultdict(dict)
    for v in visits:
        if not (start < v.service_date <= as_of):
            continue
        prov = directory.get(v.npi)
        if prov is None or specialty_key(prov.specialty) not in pcp_keys:
            continue
        entry = counts[v.patient_id].setdefault(v.npi, [0, v.service_date])
        entry[0] += 1
        if v.service_date > entry[1]:
            entry[1] = v.service_date
    out = {}
    for pid in sorted(counts):
        seen = counts[pid]
        out[pid] = min(seen, key=lambda n: (-seen[n][0], -seen[n][1].toordinal(), n))
    return out


def assign_by_pcp(imputed: Mapping[str, str], partition, visits: Sequence[Visit] = ()) -> AssignmentResult:
    """Assign patients to their imputed PCP's major community.

    Patients with no imputed PCP, or whose PCP is outside every major
    community, stay unassigned. ``visits`` feed the fraction columns.
    """
    community_of = _major_map(partition)
    tallies = tally_visits(visits, community_of)
    result = AssignmentResult(IMPUTED_PCP, {})
    for pid in sorted(set(tallies) | set(imputed)):
        npi = imputed.get(pid)
        c = community_of.get(npi) if npi is not None else None
        result.community_of_patient[pid] = c
        t = tallies.get(pid)
        if t is None:
            result.visit_fraction[pid] = result.spend_fraction[pid] = None
        else:
            result.visit_fraction[pid], result.spend_fraction[pid] = _fractions(t, c)
    return result


@dataclass
class CommunityFractions:
    """Within-community utilization and spend, per patient and per community.

    ``pooled_*`` divide summed numerators by summed denominators over assigned
    patients (canonical); ``mean_*`` average the per-patient fractions.
    """

    patient_visit: dict[str, float]
    patient_spend: dict[str, float]
    pooled_utilization: dict[int, float]
    pooled_spend: dict[int, float]
    mean_utilization: dict[int, float]
    mean_spend: dict[int, float]
    overall_utilization: float | None
    overall_spend: float | None


def in_community_fractions(assignment: AssignmentResult, visits: Sequence[Visit], partition) -> CommunityFractions:
    community_of = _major_map(partition)
    tallies = tally_visits(visits, community_of)
    pv, ps = {}, {}
    num_v: dict[int, int] = defaultdict(int)
    den_v: dict[int, int] = defaultdict(int)
    num_s: dict[int, list[float]] = defaultdict(list)
    den_s: dict[int, list[float]] = defaultdict(list)
    per_v: dict[int, list[float]] = defaultdict(list)
    per_s: dict[int, list[float]] = defaultdict(list)
    for pid, c in sorted(assignment.assigned().items()):
        t = tallies.get(pid)
        if t is None or t.visits == 0:
            continue
        vf, sf = _fractions(t, c)
        pv[pid] = vf
        num_v[c] += t.in_visits.get(c, 0)
        den_v[c] += t.visits
        per_v[c].append(vf)
        num_s[c].append(t.in_spend.get(c, 0.0))
        den_s[c].append(t.spend)
        if sf is not None:
            ps[pid] = sf
            per_s[c].append(sf)
    comms = sorted(den_v)
    pooled_u = {c: num_v[c] / den_v[c] for c in comms}
    pooled_s = {c: math.fsum(num_s[c]) / math.fsum(den_s[c]) for c in comms if math.fsum(den_s[c]) > 0}
    mean_u = {c: math.fsum(per_v[c]) / len(per_v[c]) for c in comms}
    mean_s = {c: math.fsum(per_s[c]) / len(per_s[c]) for c in comms if per_s[c]}
    tot_v = sum(den_v.values())
    tot_s = math.fsum(x for c in comms for x in den_s[c])
    return CommunityFractions(
        pv,
        ps,
        pooled_u,
        pooled_s,
        mean_u,
        mean_s,
        sum(num_v.values()) / tot_v if tot_v else None,
        math.fsum(x for c in comms for x in num_s[c]) / tot_s if tot_s > 0 else None,
    )


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_assignment_csv(result: AssignmentResult, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ASSIGNMENT_COLUMNS)
    for pid in sorted(result.community_of_patient):
        c = result.community_of_patient[pid]
        w.writerow([pid, result.scheme, "" if c is None else c, _fmt(result.visit_fraction.get(pid)), _fmt(result.spend_fraction.get(pid))])


def read_assignment_csv(fh: IO[str]) -> AssignmentResult:
    reader = csv.DictReader(fh)
    if not set(ASSIGNMENT_COLUMNS) <= set(reader.fieldnames or ()):
        raise ValueError(f"assignment CSV needs columns {','.join(ASSIGNMENT_COLUMNS)}")
    result = None
    for row in reader:
        if result is None:
            result = AssignmentResult(row["scheme"], {})
        pid = row["patient_id"]
        result.community_of_patient[pid] = int(row["community_id"]) if row["community_id"] else None
        result.visit_fraction[pid] = float(row["visit_fraction"]) if row["visit_fraction"] else None
        result.spend_fraction[pid] = float(row["spend_fraction"]) if row["spend_fraction"] else None
    return result or AssignmentResult(PLURALITY, {})
