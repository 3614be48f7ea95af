"""Claims and patient tables: parsing, validation, visit derivation, study filters."""

from __future__ import annotations

import csv
import io
import math
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Mapping, Sequence

INDIVIDUAL = "individual"
ORGANIZATION = "organization"
ENTITY_TYPES = (INDIVIDUAL, ORGANIZATION)

CLAIM_COLUMNS = (
    "patient_id",
    "npi",
    "service_date",
    "paid_amount",
    "specialty",
    "org_id",
    "entity_type",
)
REQUIRED_CLAIM_COLUMNS = CLAIM_COLUMNS[:5]

PATIENT_COLUMNS = (
    "patient_id",
    "county",
    "risk_score",
    "enrollment_months",
    "diabetic",
    "comorbidities",
)
REQUIRED_PATIENT_COLUMNS = ("patient_id", "county", "risk_score")

_WS = re.compile(r"\s+")


class SchemaError(ValueError):
    """A required column is missing or the source cannot be read."""


class IntegrityError(ValueError):
    """A visit references a patient that is not in the patient table."""


def normalize_specialty(label: str) -> str:
    """Trim and collapse internal whitespace; case is kept for display."""
    return _WS.sub(" ", label).strip()


def specialty_key(label: str) -> str:
    return normalize_specialty(label).casefold()


@dataclass(frozen=True, slots=True)
class StudyWindow:
    start: date
    end: date  # inclusive

    @classmethod
    def for_year(cls, year: int) -> StudyWindow:
        return cls(date(year, 1, 1), date(year, 12, 31))

    def __contains__(self, d: date) -> bool:
        return self.start <= d <= self.end

    @property
    def months(self) -> int:
        return (self.end.year - self.start.year) * 12 + self.end.month - self.start.month + 1


@dataclass(frozen=True, slots=True)
class ClaimLine:
    patient_id: str
    npi: str
    service_date: date
    paid_amount: float
    specialty: str
    org_id: str | None = None
    entity_type: str = INDIVIDUAL


@dataclass(frozen=True, slots=True)
class PatientRecord:
    patient_id: str
    county: str
    risk_score: float
    enrollment_months: int
    diabetic: bool = True
    comorbidity_flags: frozenset[str] = frozenset()


@dataclass(frozen=True, slots=True)
class Visit:
    patient_id: str
    npi: str
    service_date: date
    paid_amount: float
    specialty: str


@dataclass(frozen=True, slots=True)
class Provider:
    """Provider directory entry derived from claim lines."""

    npi: str
    specialty: str
    org_id: str | None = None
    entity_type: str = INDIVIDUAL


@dataclass(frozen=True, slots=True)
class RejectedRow:
    row: int  # 1-based data row, header excluded
    reason: str


@dataclass
class FilterConfig:
    counties: frozenset[str] | None = None
    require_diabetic: bool = True
    individual_only: bool = True
    on_unknown_patient: str = "reject"  # or "error"

    def __post_init__(self):
        if self.counties is not None:
            self.counties = frozenset(self.counties)
        if self.on_unknown_patient not in ("reject", "error"):
            raise ValueError(f"on_unknown_patient must be 'reject' or 'error', got {self.on_unknown_patient!r}")


@dataclass
class FilterResult:
    visits: list[Visit]
    patients: list[PatientRecord]
    rejects: list[RejectedRow] = field(default_factory=list)


def _open_text(source: str | os.PathLike | IO[str]):
    if isinstance(source, (str, os.PathLike)):
        try:
            return open(source, newline="", encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read {source}: {exc}") from exc
    return source


def _resolve_columns(header: Sequence[str] | None, schema: Mapping[str, str], required: Iterable[str]) -> dict[str, int]:
    if header is None:
        raise SchemaError("source is empty (no header row)")
    header = [h.strip() for h in header]
    positions = {}
    for name, column in schema.items():
        if column in header:
            positions[name] = header.index(column)
    missing = [schema.get(name, name) for name in required if name not in positions]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    return positions


def _read_rows(source, schema, required):
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise SchemaError(f"unreadable source: {exc}") from exc
        positions = _resolve_columns(header, schema, required)
        rows = []
        try:
            for row in reader:
                rows.append(row)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise SchemaError(f"unreadable source: {exc}") from exc
        return positions, rows
    finally:
        if fh is not source:
            fh.close()


def _cell(row: list[str], positions: dict[str, int], name: str) -> str:
    idx = positions.get(name)
    if idx is None or idx >= len(row):
        return ""
    return row[idx].strip()


def _modal_year(years: Iterable[int]) -> int | None:
    counts = Counter(years)
    if not counts:
        return None
    return min(counts, key=lambda y: (-counts[y], y))


def parse_claims(
    source: str | os.PathLike | IO[str],
    schema: Mapping[str, str] | None = None,
    window: StudyWindow | None = None,
) -> tuple[list[ClaimLine], list[RejectedRow]]:
    """Parse a claims CSV into validated claim lines.

    ``schema`` maps canonical field names to the source's column headers
    (identity by default). When ``window`` is omitted the study window is the
    calendar year holding the most service dates.

    Every data row ends up either in the returned claims or in the rejects;
    a missing required column raises :class:`SchemaError`.
    """
    schema = {c: c for c in CLAIM_COLUMNS} | dict(schema or {})
    positions, rows = _read_rows(source, schema, REQUIRED_CLAIM_COLUMNS)

    parsed: list[tuple[int, ClaimLine | None, str | None]] = []
    for rowno, row in enumerate(rows, start=1):
        parsed.append((rowno, *_parse_claim_row(row, positions)))

    if window is None:
        year = _modal_year(c.service_date.year for _, c, _ in parsed if c is not None)
        window = StudyWindow.for_year(year) if year is not None else None

    claims, rejects = [], []
    for rowno, claim, reason in parsed:
        if claim is None:
            rejects.append(RejectedRow(rowno, reason))
        elif window is not None and claim.service_date not in window:
            rejects.append(RejectedRow(rowno, "date outside study window"))
        else:
            claims.append(claim)
    return claims, rejects


def _parse_claim_row(row, positions) -> tuple[ClaimLine | None, str | None]:
    if not any(cell.strip() for cell in row):
        return None, "empty row"
    patient_id = _cell(row, positions, "patient_id")
    if not patient_id:
        return None, "missing patient_id"
    npi = _cell(row, positions, "npi")
    if not npi:
        return None, "missing npi"
    try:
        service_date = date.fromisoformat(_cell(row, positions, "service_date"))
    except ValueError:
        return None, "bad date"
    raw_amount = _cell(row, positions, "paid_amount")
    try:
        amount = float(raw_amount)
    except ValueError:
        return None, "bad amount"
    if not math.isfinite(amount):
        return None, "bad amount"
    if amount < 0:
        return None, "negative amount"
    specialty = normalize_specialty(_cell(row, positions, "specialty"))
    if not specialty:
        return None, "empty specialty"
    entity = _cell(row, positions, "entity_type").lower() or INDIVIDUAL
    if entity not in ENTITY_TYPES:
        return None, "bad entity_type"
    org_id = _cell(row, positions, "org_id") or None
    return ClaimLine(patient_id, npi, service_date, amount + 0.0, specialty, org_id, entity), None


def parse_patients(
    source: str | os.PathLike | IO[str],
    schema: Mapping[str, str] | None = None,
    window_months: int = 12,
) -> tuple[list[PatientRecord], list[RejectedRow]]:
    """Parse the patients CSV. Blank ``enrollment_months`` means the full window."""
    schema = {c: c for c in PATIENT_COLUMNS} | dict(schema or {})
    positions, rows = _read_rows(source, schema, REQUIRED_PATIENT_COLUMNS)
    patients, rejects = [], []
    seen = set()
    for rowno, row in enumerate(rows, start=1):
        rec, reason = _parse_patient_row(row, positions, window_months)
        if rec is not None and rec.patient_id in seen:
            rec, reason = None, "duplicate patient_id"
        if rec is None:
            rejects.append(RejectedRow(rowno, reason))
        else:
            seen.add(rec.patient_id)
            patients.append(rec)
    return patients, rejects


def _parse_patient_row(row, positions, window_months):
    if not any(cell.strip() for cell in row):
        return None, "empty row"
    pid = _cell(row, positions, "patient_id")
    if not pid:
        return None, "missing patient_id"
    county = _cell(row, positions, "county")
    if not county:
        return None, "missing county"
    try:
        risk = float(_cell(row, positions, "risk_score"))
    except ValueError:
        return None, "bad risk_score"
    if not (math.isfinite(risk) and risk > 0):
        return None, "non-positive risk_score"
    raw_months = _cell(row, positions, "enrollment_months")
    if raw_months:
        try:
            months = int(raw_months)
        except ValueError:
            return None, "bad enrollment_months"
        if not 1 <= months <= window_months:
            return None, "enrollment_months out of range"
    else:
        months = window_months
    raw_diab = _cell(row, positions, "diabetic") or "1"
    if raw_diab not in ("0", "1"):
        return None, "bad diabetic flag"
    flags = frozenset(f.strip() for f in _cell(row, positions, "comorbidities").split(";") if f.strip())
    return PatientRecord(pid, county, risk, months, raw_diab == "1", flags), None


def derive_visits(claims: Iterable[ClaimLine | Visit]) -> list[Visit]:
    """Collapse claim lines into one visit per (patient, provider, date).

    Amounts are summed. The visit's specialty is taken from its highest-amount
    line, ties going to the lexicographically smallest label. Output is sorted
    by key.
    """
    groups: dict[tuple[str, str, date], list] = defaultdict(list)
    for line in claims:
        groups[(line.patient_id, line.npi, line.service_date)].append(line)
    visits = []
    for key in sorted(groups):
        lines = groups[key]
        amount = math.fsum(line.paid_amount for line in lines)
        specialty = min(lines, key=lambda ln: (-ln.paid_amount, ln.specialty)).specialty
        visits.append(Visit(key[0], key[1], key[2], amount, specialty))
    return visits


def visits_as_lines(visits: Iterable[Visit]) -> list[ClaimLine]:
    return [ClaimLine(v.patient_id, v.npi, v.service_date, v.paid_amount, v.specialty) for v in visits]


def _plurality_label(counter: Counter) -> str | None:
    if not counter:
        return None
    return min(counter, key=lambda k: (-counter[k], k))


def build_provider_directory(claims: Iterable[ClaimLine]) -> dict[str, Provider]:
    """One entry per NPI using the most frequent specialty, org and entity type.

    Ties resolve to the lexicographically smallest value.
    """
    spec: dict[str, Counter] = defaultdict(Counter)
    org: dict[str, Counter] = defaultdict(Counter)
    ent: dict[str, Counter] = defaultdict(Counter)
    for line in claims:
        spec[line.npi][line.specialty] += 1
        if line.org_id:
            org[line.npi][line.org_id] += 1
        ent[line.npi][line.entity_type] += 1
    return {
        npi: Provider(npi, _plurality_label(spec[npi]), _plurality_label(org.get(npi, Counter())), _plurality_label(ent[npi]))
        for npi in sorted(spec)
    }


def study_filter(
    visits: Sequence[Visit],
    patients: Sequence[PatientRecord],
    config: FilterConfig | None = None,
    directory: Mapping[str, Provider] | None = None,
) -> FilterResult:
    """Restrict visits and patients to the study population.

    Visits pointing at an unknown patient are rejected (row = 1-based visit
    index) or raise :class:`IntegrityError`, per ``config.on_unknown_patient``.
    Under ``individual_only`` a provider missing from ``directory`` is kept.
    """
    config = config or FilterConfig()
    known = {p.patient_id for p in patients}
    kept_patients = [
        p
        for p in patients
        if (config.counties is None or p.county in config.counties) and (p.diabetic or not config.require_diabetic)
    ]
    kept_ids = {p.patient_id for p in kept_patients}

    kept_visits, rejects = [], []
    for i, v in enumerate(visits, start=1):
        if v.patient_id not in known:
            if config.on_unknown_patient == "error":
                raise IntegrityError(f"visit {i} references unknown patient {v.patient_id!r}")
            rejects.append(RejectedRow(i, "unknown patient"))
            continue
        if v.patient_id not in kept_ids:
            continue
        if config.individual_only and directory is not None:
            prov = directory.get(v.npi)
            if prov is not None and prov.entity_type != INDIVIDUAL:
                continue
        kept_visits.append(v)
    return FilterResult(kept_visits, kept_patients, rejects)


# -- canonical CSV writers ------------------------------------------------


def format_amount(x: float) -> str:
    return repr(float(x))


def write_claims_csv(lines: Iterable[ClaimLine], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CLAIM_COLUMNS)
    for c in lines:
        w.writerow([c.patient_id, c.npi, c.service_date.isoformat(), format_amount(c.paid_amount), c.specialty, c.org_id or "", c.entity_type])


def write_visits_csv(visits: Iterable[Visit], directory: Mapping[str, Provider], fh: IO[str]) -> None:
    """Visits in the claims schema so they re-parse with :func:`parse_claims`."""
    lines = []
    for v in visits:
        prov = directory.get(v.npi)
        lines.append(
            ClaimLine(
                v.patient_id,
                v.npi,
                v.service_date,
                v.paid_amount,
                v.specialty,
                prov.org_id if prov else None,
                prov.entity_type if prov else INDIVIDUAL,
            )
        )
    write_claims_csv(lines, fh)


def write_patients_csv(patients: Iterable[PatientRecord], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PATIENT_COLUMNS)
    for p in sorted(patients, key=lambda p: p.patient_id):
        w.writerow([p.patient_id, p.county, repr(p.risk_score), p.enrollment_months, int(p.diabetic), ";".join(sorted(p.comorbidity_flags))])


def write_providers_csv(directory: Mapping[str, Provider], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["npi", "specialty", "org_id", "entity_type"])
    for npi in sorted(directory):
        p = directory[npi]
        w.writerow([p.npi, p.specialty, p.org_id or "", p.entity_type])


def read_providers_csv(source) -> dict[str, Provider]:
    fh = _open_text(source)
    try:
        reader = csv.DictReader(fh)
        missing = {"npi", "specialty"} - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"missing required column(s): {', '.join(sorted(missing))}")
        out = {}
        for row in reader:
            out[row["npi"]] = Provider(row["npi"], row["specialty"], row.get("org_id") or None, row.get("entity_type") or INDIVIDUAL)
        return out
    finally:
        if fh is not source:
            fh.close()


def write_rejects_csv(rejects: Iterable[RejectedRow], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["row", "reason"])
    for r in rejects:
        w.writerow([r.row, r.reason])


def to_csv_text(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()
