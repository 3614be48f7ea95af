"""Community profiles: provider mix, organizational concentration, cost, risk, geography."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .assignment import AssignmentResult, CommunityFractions
from .claims import PatientRecord, Visit, specialty_key
from .graph import DEFAULT_PCP_SPECIALTIES, ProviderNode

PROFILE_COLUMNS = (
    "community_id",
    "n_providers",
    "n_patients",
    "pcp_specialist_ratio",
    "pct_within_utilization",
    "pct_within_spend",
    "herfindahl",
    "pmpm",
    "mean_risk",
    "risk_adjusted_pmpm",
    "anchoring_county",
)


class ProfileError(ValueError):
    pass


def pcp_specialist_ratio(specialties: Sequence[str], pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES) -> float:
    """Share of a community's providers whose specialty is primary care."""
    if not specialties:
        raise ProfileError("empty community")
    keys = {specialty_key(s) for s in pcp_specialties}
    return sum(specialty_key(s) in keys for s in specialties) / len(specialties)


def herfindahl(org_ids: Sequence[str | None]) -> float:
    """Sum of squared organizational shares by provider count.

    Providers without an ``org_id`` count as one-provider organizations.
    """
    if not org_ids:
        raise ProfileError("empty community")
    counts = Counter()
    solo = 0
    for org in org_ids:
        if org:
            counts[org] += 1
        else:
            solo += 1
    n = len(org_ids)
    return math.fsum((c / n) ** 2 for c in counts.values()) + solo / (n * n)


def pmpm(patient_ids: Iterable[str], visits: Iterable[Visit], enrollment: Mapping[str, int]) -> float:
    ids = set(patient_ids)
    months = sum(enrollment[p] for p in ids)
    if months <= 0:
        raise ProfileError("zero member-months")
    return math.fsum(v.paid_amount for v in visits if v.patient_id in ids) / months


def risk_adjusted_pmpm(pmpm_value: float, mean_risk: float) -> float:
    if not mean_risk > 0:
        raise ProfileError("mean risk must be positive")
    return pmpm_value / mean_risk


def mean_risk(patients: Sequence[PatientRecord], weighted: bool = False) -> float:
    """Unweighted mean risk, or member-month weighted when ``weighted``."""
    if not patients:
        raise ProfileError("no patients")
    if weighted:
        months = sum(p.enrollment_months for p in patients)
        return math.fsum(p.risk_score * p.enrollment_months for p in patients) / months
    return math.fsum(p.risk_score for p in patients) / len(patients)


def county_distribution(patients: Sequence[PatientRecord]) -> dict[str, float]:
    counts = Counter(p.county for p in patients)
    n = len(patients)
    return {c: counts[c] / n for c in sorted(counts)} if n else {}


def anchoring_county(distribution: Mapping[str, float]) -> str | None:
    if not distribution:
        return None
    return min(distribution, key=lambda c: (-distribution[c], c))


@dataclass
class CommunityProfile:
    community_id: int
    n_providers: int
    n_patients: int
    pcp_specialist_ratio: float
    pct_within_utilization: float | None
    pct_within_spend: float | None
    herfindahl: float
    pmpm: float | None
    mean_risk: float | None
    risk_adjusted_pmpm: float | None
    county_distribution: dict[str, float] = field(default_factory=dict)
    mean_patient_utilization: float | None = None
    mean_patient_spend: float | None = None

    @property
    def anchoring_county(self) -> str | None:
        return anchoring_county(self.county_distribution)


def build_profile(
    community_id: int,
    members: Sequence[ProviderNode],
    patients: Sequence[PatientRecord],
    visits: Sequence[Visit],
    fractions: CommunityFractions | None = None,
    pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES,
    weighted_risk: bool = False,
) -> CommunityProfile:
    """One profile row. ``visits`` may include other patients' visits."""
    fractions_u = fractions.pooled_utilization.get(community_id) if fractions else None
    fractions_s = fractions.pooled_spend.get(community_id) if fractions else None
    if patients:
        p = pmpm([x.patient_id for x in patients], visits, {x.patient_id: x.enrollment_months for x in patients})
        risk = mean_risk(patients, weighted_risk)
        adj = risk_adjusted_pmpm(p, risk)
    else:
        p = risk = adj = None
    return CommunityProfile(
        community_id=community_id,
        n_providers=len(members),
        n_patients=len(patients),
        pcp_specialist_ratio=pcp_specialist_ratio([m.specialty for m in members], pcp_specialties),
        pct_within_utilization=fractions_u,
        pct_within_spend=fractions_s,
        herfindahl=herfindahl([m.org_id for m in members]),
        pmpm=p,
        mean_risk=risk,
        risk_adjusted_pmpm=adj,
        county_distribution=county_distribution(patients),
        mean_patient_utilization=fractions.mean_utilization.get(community_id) if fractions else None,
        mean_patient_spend=fractions.mean_spend.get(community_id) if fractions else None,
    )


def build_profiles(
    community_of: Mapping[str, int],
    nodes: Mapping[str, ProviderNode],
    assignment: AssignmentResult,
    patients: Sequence[PatientRecord],
    visits: Sequence[Visit],
    fractions: CommunityFractions | None = None,
    pcp_specialties: Iterable[str] = DEFAULT_PCP_SPECIALTIES,
    weighted_risk: bool = False,
) -> list[CommunityProfile]:
    by_id = {p.patient_id: p for p in patients}
    members: dict[int, list[ProviderNode]] = {}
    for npi in sorted(community_of):
        members.setdefault(community_of[npi], []).append(nodes.get(npi) or ProviderNode(npi))
    assigned: dict[int, list[PatientRecord]] = {}
    for pid, c in sorted(assignment.assigned().items()):
        if pid in by_id:
            assigned.setdefault(c, []).append(by_id[pid])
    return [
        build_profile(c, members[c], assigned.get(c, []), visits, fractions, pcp_specialties, weighted_risk)
        for c in sorted(members)
    ]


def _num(x, digits=6) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def write_profiles_csv(profiles: Sequence[CommunityProfile], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PROFILE_COLUMNS)
    for p in profiles:
        w.writerow(
            [
                p.community_id,
                p.n_providers,
                p.n_patients,
                _num(p.pcp_specialist_ratio),
                _num(p.pct_within_utilization),
                _num(p.pct_within_spend),
                _num(p.herfindahl),
                _num(p.pmpm, 2),
                _num(p.mean_risk, 4),
                _num(p.risk_adjusted_pmpm, 2),
                p.anchoring_county or "",
            ]
        )


def write_profiles_json(profiles: Sequence[CommunityProfile], fh: IO[str]) -> None:
    rows = []
    for p in profiles:
        d = asdict(p)
        d["anchoring_county"] = p.anchoring_county
        rows.append(d)
    json.dump(rows, fh, indent=2, sort_keys=True)
    fh.write("\n")
