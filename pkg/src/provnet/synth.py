"""Seeded synthetic claims with planted provider communities.

Randomness comes from numpy's PCG64 generator seeded with ``SynthConfig.seed``,
so a given config always produces the same bytes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .claims import CLAIM_COLUMNS, PATIENT_COLUMNS

DEFAULT_COUNTIES = ("Albany", "Rensselaer", "Saratoga", "Schenectady")
DEFAULT_PCP = ("Family Medicine", "Internal Medicine")
DEFAULT_SPECIALISTS = (
    "Endocrinology",
    "Cardiovascular Disease",
    "Ophthalmology",
    "Dermatology",
    "Gastroenterology",
    "Nephrology",
    "Podiatry",
    "Vascular Surgery",
)
# (log-mean, log-sd) of a visit's paid amount
DEFAULT_COSTS = {
    "Family Medicine": (4.6, 0.5),
    "Internal Medicine": (4.7, 0.5),
    "Endocrinology": (5.1, 0.6),
    "Cardiovascular Disease": (5.6, 0.9),
    "Ophthalmology": (5.0, 0.7),
    "Dermatology": (4.9, 0.6),
    "Gastroenterology": (5.8, 0.9),
    "Nephrology": (5.3, 0.7),
    "Podiatry": (4.5, 0.5),
    "Vascular Surgery": (6.2, 1.0),
}


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    seed: int = 0
    n_communities: int = 6
    providers_per_community: tuple[int, int] = (50, 60)
    patients_per_community: tuple[int, int] = (250, 350)
    pcp_share: float | list[float] = 0.4
    p_in: float = 0.85
    # row-stochastic over other communities; None spreads 1 - p_in evenly
    cross_matrix: list[list[float]] | None = None
    visits_per_patient: tuple[int, int] = (8, 16)
    lines_per_visit: tuple[int, int] = (1, 3)
    pcp_visit_share: float = 0.3
    pcp_specialties: tuple[str, ...] = DEFAULT_PCP
    specialists: tuple[str, ...] = DEFAULT_SPECIALISTS
    costs: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_COSTS))
    orgs_per_community: int = 8
    org_skew: float = 1.0
    missing_org_share: float = 0.0
    counties: tuple[str, ...] = DEFAULT_COUNTIES
    home_county_share: float = 0.85
    risk_mean: float | list[float] = 5.0
    risk_sd: float = 0.5  # log-scale
    full_enrollment_share: float = 0.85
    organization_npi_share: float = 0.0
    year: int = 2014

    def validate(self) -> None:
        k = self.n_communities
        if k < 1:
            raise SynthConfigError("n_communities must be >= 1")
        for name in ("providers_per_community", "patients_per_community", "visits_per_patient", "lines_per_visit"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise SynthConfigError(f"{name} must be a range with 1 <= lo <= hi")
        if self.visits_per_patient[1] > 365:
            raise SynthConfigError("at most 365 visits per patient (one per day)")
        for name in ("p_in", "pcp_visit_share", "missing_org_share", "home_county_share", "full_enrollment_share", "organization_npi_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthConfigError(f"{name} must be a probability")
        shares = self._per_community(self.pcp_share)
        if any(not 0.0 <= s <= 1.0 for s in shares):
            raise SynthConfigError("pcp_share must be a probability")
        cross = self.cross_probabilities()
        if k > 1 and self.p_in <= cross[~np.eye(k, dtype=bool)].max():
            raise SynthConfigError("p_in must exceed every cross-community visit probability")
        if self.orgs_per_community < 1:
            raise SynthConfigError("orgs_per_community must be >= 1")
        missing = set(self.pcp_specialties + self.specialists) - set(self.costs)
        if missing:
            raise SynthConfigError(f"no cost parameters for {sorted(missing)}")
        if any(r <= 0 for r in self._per_community(self.risk_mean)):
            raise SynthConfigError("risk_mean must be positive")

    def _per_community(self, v) -> list[float]:
        if isinstance(v, (int, float)):
            return [float(v)] * self.n_communities
        if len(v) != self.n_communities:
            raise SynthConfigError("per-community list has wrong length")
        return [float(x) for x in v]

    def cross_probabilities(self) -> np.ndarray:
        """k x k matrix of probabilities that a visit goes to each community."""
        k = self.n_communities
        if self.cross_matrix is None:
            off = (1.0 - self.p_in) / (k - 1) if k > 1 else 0.0
            m = np.full((k, k), off)
        else:
            m = np.array(self.cross_matrix, dtype=float)
            if m.shape != (k, k) or np.any(m < 0):
                raise SynthConfigError("cross_matrix must be k x k and non-negative")
            np.fill_diagonal(m, 0.0)
            sums = m.sum(axis=1, keepdims=True)
            m = np.divide(m, sums, out=np.zeros_like(m), where=sums > 0) * (1.0 - self.p_in)
        np.fill_diagonal(m, self.p_in if k > 1 else 1.0)
        return m


@dataclass
class SynthData:
    claims_csv: str
    patients_csv: str
    providers_truth_csv: str
    patients_truth_csv: str
    provider_community: dict[str, int]
    patient_community: dict[str, int]
    n_visits: int
    n_lines: int

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "claims": out / "claims.csv",
            "patients": out / "patients.csv",
            "providers_truth": out / "truth_providers.csv",
            "patients_truth": out / "truth_patients.csv",
        }
        for key, text in (
            ("claims", self.claims_csv),
            ("patients", self.patients_csv),
            ("providers_truth", self.providers_truth_csv),
            ("patients_truth", self.patients_truth_csv),
        ):
            paths[key].write_text(text, encoding="utf-8", newline="")
        return paths


def _org_probs(n_orgs: int, skew: float) -> np.ndarray:
    p = 1.0 / np.arange(1, n_orgs + 1) ** skew
    return p / p.sum()


def generate(config: SynthConfig | None = None) -> SynthData:
    """Generate claims, patients and ground-truth tables for ``config``."""
    cfg = config or SynthConfig()
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    k = cfg.n_communities
    pcp_shares = cfg._per_community(cfg.pcp_share)
    risk_means = cfg._per_community(cfg.risk_mean)
    cross = cfg.cross_probabilities()

    # providers
    n_prov = rng.integers(cfg.providers_per_community[0], cfg.providers_per_community[1] + 1, size=k)
    total_prov = int(n_prov.sum())
    npi_numbers = 1_000_000_000 + rng.choice(1_000_000_000, size=total_prov, replace=False)
    prov_comm = np.repeat(np.arange(k), n_prov)
    prov_npi = [str(int(x)) for x in npi_numbers]
    prov_spec: list[str] = []
    prov_org: list[str] = []
    prov_entity: list[str] = []
    comm_members: list[np.ndarray] = []
    comm_pcps: list[np.ndarray] = []
    start = 0
    for c in range(k):
        n = int(n_prov[c])
        is_pcp = rng.random(n) < pcp_shares[c]
        if pcp_shares[c] > 0 and not is_pcp.any():
            is_pcp[0] = True
        specs = np.where(
            is_pcp,
            rng.choice(len(cfg.pcp_specialties), size=n),
            rng.choice(len(cfg.specialists), size=n),
        )
        orgs = rng.choice(cfg.orgs_per_community, size=n, p=_org_probs(cfg.orgs_per_community, cfg.org_skew))
        no_org = rng.random(n) < cfg.missing_org_share
        is_org_entity = rng.random(n) < cfg.organization_npi_share
        for t in range(n):
            prov_spec.append(cfg.pcp_specialties[specs[t]] if is_pcp[t] else cfg.specialists[specs[t]])
            prov_org.append("" if no_org[t] else f"ORG{c:02d}{orgs[t]:03d}")
            prov_entity.append("organization" if is_org_entity[t] else "individual")
        idx = np.arange(start, start + n)
        comm_members.append(idx)
        comm_pcps.append(idx[is_pcp])
        start += n
    cost_params = np.array([cfg.costs[s] for s in prov_spec])

    # patients and visits
    n_pat = rng.integers(cfg.patients_per_community[0], cfg.patients_per_community[1] + 1, size=k)
    total_pat = int(n_pat.sum())
    pat_comm = np.repeat(np.arange(k), n_pat)
    order = rng.permutation(total_pat)
    pat_comm = pat_comm[order]
    width = max(6, len(str(total_pat)))
    pat_ids = [f"P{i:0{width}d}" for i in range(total_pat)]

    n_counties = len(cfg.counties)
    home_county = np.arange(k) % n_counties
    county_draw = rng.random(total_pat) < cfg.home_county_share
    other = rng.integers(0, n_counties, size=total_pat)
    pat_county = np.where(county_draw, home_county[pat_comm], other)
    risk = np.exp(np.log(np.array(risk_means))[pat_comm] - cfg.risk_sd**2 / 2 + cfg.risk_sd * rng.standard_normal(total_pat))
    months = np.where(rng.random(total_pat) < cfg.full_enrollment_share, 12, rng.integers(1, 12, size=total_pat))
    n_vis = rng.integers(cfg.visits_per_patient[0], cfg.visits_per_patient[1] + 1, size=total_pat)

    patients_buf = io.StringIO()
    pw = csv.writer(patients_buf, lineterminator="\n")
    pw.writerow(PATIENT_COLUMNS)
    for i in range(total_pat):
        pw.writerow([pat_ids[i], cfg.counties[pat_county[i]], f"{risk[i]:.4f}", int(months[i]), 1, ""])

    year_start = date(cfg.year, 1, 1)
    n_days = (date(cfg.year, 12, 31) - year_start).days + 1
    day_strings = [(year_start + timedelta(days=d)).isoformat() for d in range(n_days)]

    claims_buf = io.StringIO()
    cw = csv.writer(claims_buf, lineterminator="\n")
    cw.writerow(CLAIM_COLUMNS)
    n_lines = 0
    n_visits = 0
    lo_lines, hi_lines = cfg.lines_per_visit
    for i in range(total_pat):
        home = pat_comm[i]
        nv = int(n_vis[i])
        dest = rng.choice(k, size=nv, p=cross[home])
        home_pcps = comm_pcps[home]
        own_pcp = home_pcps[rng.integers(len(home_pcps))] if len(home_pcps) else -1
        to_pcp = rng.random(nv) < cfg.pcp_visit_share
        picks = rng.random(nv)
        days = np.sort(rng.choice(n_days, size=nv, replace=False))
        noise = rng.standard_normal(nv)
        n_ln = rng.integers(lo_lines, hi_lines + 1, size=nv)
        for t in range(nv):
            c = dest[t]
            if c == home and to_pcp[t] and own_pcp >= 0:
                p = own_pcp
            else:
                mem = comm_members[c]
                p = mem[int(picks[t] * len(mem))]
            mu, sd = cost_params[p]
            cents = int(round(np.exp(mu + sd * noise[t]) * 100))
            lines = int(n_ln[t])
            split = rng.multinomial(cents, np.full(lines, 1.0 / lines)) if lines > 1 else [cents]
            for amt in split:
                cw.writerow([pat_ids[i], prov_npi[p], day_strings[days[t]], f"{amt / 100:.2f}", prov_spec[p], prov_org[p], prov_entity[p]])
            n_lines += lines
            n_visits += 1

    prov_truth = {prov_npi[j]: int(prov_comm[j]) for j in range(total_prov)}
    pat_truth = {pat_ids[i]: int(pat_comm[i]) for i in range(total_pat)}
    return SynthData(
        claims_csv=claims_buf.getvalue(),
        patients_csv=patients_buf.getvalue(),
        providers_truth_csv=_truth_csv("npi", prov_truth),
        patients_truth_csv=_truth_csv("patient_id", pat_truth),
        provider_community=prov_truth,
        patient_community=pat_truth,
        n_visits=n_visits,
        n_lines=n_lines,
    )


def _truth_csv(key: str, mapping: dict[str, int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, "true_community"])
    for k in sorted(mapping):
        w.writerow([k, mapping[k]])
    return buf.getvalue()


def read_truth_csv(source) -> dict[str, int]:
    fh = open(source, newline="", encoding="utf-8") if isinstance(source, (str, Path)) else source
    try:
        reader = csv.reader(fh)
        next(reader)
        return {row[0]: int(row[1]) for row in reader if row}
    finally:
        if fh is not source:
            fh.close()
