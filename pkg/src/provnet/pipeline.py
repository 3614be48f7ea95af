"""Pipeline stages over canonical CSV/JSON artifacts in one output directory.

Each stage reads the artifacts of earlier stages from ``out`` and writes its
own, so stages can be run one at a time or all at once with
:func:`run_pipeline`; both paths produce identical files.
"""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, kernels
from .assignment import (
    IMPUTED_PCP,
    PLURALITY,
    AssignmentResult,
    assign_by_pcp,
    assign_by_plurality,
    impute_pcp,
    in_community_fractions,
    read_assignment_csv,
    write_assignment_csv,
)
from .claims import (
    FilterConfig,
    StudyWindow,
    build_provider_directory,
    derive_visits,
    parse_claims,
    parse_patients,
    read_providers_csv,
    study_filter,
    write_patients_csv,
    write_providers_csv,
    write_rejects_csv,
    write_visits_csv,
)
from .community import (
    Partition,
    dump_json,
    fast_greedy,
    partition_metadata,
    prune_small,
    read_partition_csv,
    write_merge_log_csv,
    write_partition_csv,
)
from .graph import (
    DEFAULT_PCP_SPECIALTIES,
    ConfigError,
    apply_thresholds,
    export_graph,
    read_edge_csv,
    read_nodes_csv,
    require_nonempty,
    shared_patient_counts,
    write_edge_csv,
    write_nodes_csv,
)
from .profiling import build_profiles, write_profiles_csv, write_profiles_json
from .trade import EXPORT, IMPORT, rca, self_sufficiency_gaps, trade_counts, trade_flow_report, write_flows_csv, write_rca_csv, write_trade_counts_csv

EXPORT_FILES = {"gexf": "graph.gexf", "dot": "graph.dot", "csv": "graph_display_edges.csv"}

# settings that never change artifact bytes; kept out of the config hash
RUNTIME_ONLY = ("threads", "out", "claims", "patients")


class StageDependencyError(FileNotFoundError):
    pass


@dataclass
class RunConfig:
    claims: str | None = None
    patients: str | None = None
    out: str = "out"
    year: int | None = None
    counties: list[str] | None = None
    require_diabetic: bool = True
    individual_only: bool = True
    min_patients: int = 5
    min_edge_weight: int = 2
    min_community_size: int = 50
    scheme: str = "plurality"
    pcp_specialties: list[str] = field(default_factory=lambda: sorted(DEFAULT_PCP_SPECIALTIES))
    pcp_window_months: int = 12
    export: list[str] = field(default_factory=lambda: ["gexf", "dot", "csv"])
    display_min_weight: float | None = 5
    trade_weighting: str = "visits"
    top_k: int = 4
    min_share: float = 0.05
    balance_tolerance: float = 0.25
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        for name in ("min_patients", "min_edge_weight", "min_community_size", "pcp_window_months", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.scheme not in ("plurality", "pcp"):
            raise ConfigError("scheme must be 'plurality' or 'pcp'")
        unknown = set(self.export) - set(EXPORT_FILES)
        if unknown:
            raise ConfigError(f"unknown export format(s): {', '.join(sorted(unknown))}")
        paths = [p for p in (self.claims, self.patients, self.out) if p]
        if len({str(Path(p).resolve()) for p in paths}) != len(paths):
            raise ConfigError("input and output paths must be distinct")

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(extra))}")
        return cls(**data)

    def effective(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if k not in RUNTIME_ONLY}

    def config_hash(self) -> str:
        blob = json.dumps(self.effective(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# -- helpers --------------------------------------------------------------


def _need(out: Path, name: str, stage: str, producer: str) -> Path:
    p = out / name
    if not p.exists():
        raise StageDependencyError(f"stage '{stage}' requires {name} in {out} (run `provnet {producer}` first)")
    return p


def _write(path: Path, writer, *args) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer(*args, fh)


def _read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_visits(out: Path, stage: str):
    claims, rejects = parse_claims(_need(out, "visits.csv", stage, "ingest"))
    if rejects:
        raise ValueError(f"visits.csv failed to re-parse ({len(rejects)} rejected rows)")
    return derive_visits(claims)


def _load_major(out: Path, stage: str) -> tuple[dict[str, int], dict]:
    with open(_need(out, "partition.csv", stage, "detect"), newline="", encoding="utf-8") as fh:
        full = read_partition_csv(fh)
    meta = _read_json(_need(out, "detect.json", stage, "detect"))
    n_major = meta["excluded_summary"]["n_major"]
    return {npi: c for npi, c in full.items() if c < n_major}, meta


# -- stages ---------------------------------------------------------------


def stage_ingest(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    if not cfg.claims or not Path(cfg.claims).exists():
        raise StageDependencyError(f"claims file not found: {cfg.claims}")
    if not cfg.patients or not Path(cfg.patients).exists():
        raise StageDependencyError(f"patients file not found: {cfg.patients}")
    out.mkdir(parents=True, exist_ok=True)
    window = StudyWindow.for_year(cfg.year) if cfg.year else None
    claims, claim_rejects = parse_claims(cfg.claims, window=window)
    patients, patient_rejects = parse_patients(cfg.patients)
    visits = derive_visits(claims)
    directory = build_provider_directory(claims)
    fconf = FilterConfig(
        counties=frozenset(cfg.counties) if cfg.counties else None,
        require_diabetic=cfg.require_diabetic,
        individual_only=cfg.individual_only,
    )
    res = study_filter(visits, patients, fconf, directory)
    kept_npis = {v.npi for v in res.visits}
    kept_dir = {n: p for n, p in directory.items() if n in kept_npis}

    _write(out / "visits.csv", write_visits_csv, res.visits, kept_dir)
    _write(out / "patients.csv", write_patients_csv, res.patients)
    _write(out / "providers.csv", write_providers_csv, kept_dir)
    _write(out / "rejects_claims.csv", write_rejects_csv, claim_rejects)
    _write(out / "rejects_patients.csv", write_rejects_csv, patient_rejects)
    _write(out / "rejects_visits.csv", write_rejects_csv, res.rejects)
    summary = {
        "claim_lines": len(claims),
        "claim_rejects": len(claim_rejects),
        "patients_parsed": len(patients),
        "patient_rejects": len(patient_rejects),
        "visits": len(visits),
        "visits_after_filter": len(res.visits),
        "visit_rejects": len(res.rejects),
        "patients_after_filter": len(res.patients),
        "providers_after_filter": len(kept_dir),
    }
    _write(out / "ingest.json", dump_json, summary)
    return summary


def stage_graph(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    visits = _load_visits(out, "graph")
    with open(_need(out, "providers.csv", "graph", "ingest"), newline="", encoding="utf-8") as fh:
        directory = read_providers_csv(fh)
    raw = shared_patient_counts(visits, directory, cfg.pcp_specialties, workers=cfg.threads)
    g = apply_thresholds(raw, cfg.min_patients, cfg.min_edge_weight)
    require_nonempty(g, cfg.min_patients, cfg.min_edge_weight)
    _write(out / "nodes.csv", write_nodes_csv, g)
    _write(out / "edges.csv", write_edge_csv, g)
    summary = {
        "raw_nodes": raw.n_nodes,
        "raw_edges": raw.n_edges,
        "nodes": g.n_nodes,
        "edges": g.n_edges,
        "total_weight": g.total_weight,
        "min_patients_per_provider": cfg.min_patients,
        "min_edge_weight": cfg.min_edge_weight,
    }
    _write(out / "graph.json", dump_json, summary)
    return summary


def _load_graph(out: Path, stage: str):
    with open(_need(out, "nodes.csv", stage, "graph"), newline="", encoding="utf-8") as fh:
        nodes = read_nodes_csv(fh)
    with open(_need(out, "edges.csv", stage, "graph"), newline="", encoding="utf-8") as fh:
        return read_edge_csv(fh, nodes)


def stage_detect(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    g = _load_graph(out, "detect")
    part = fast_greedy(g)
    pruned = prune_small(part, cfg.min_community_size)
    _write(out / "partition.csv", write_partition_csv, part)
    _write(out / "merges.csv", write_merge_log_csv, part)
    meta = partition_metadata(part, pruned)
    meta["excluded"] = [{"community_id": c, "providers": m} for c, m in pruned.excluded]
    _write(out / "detect.json", dump_json, meta)
    for fmt in cfg.export:
        data = export_graph(g, part.community_of, "edge-csv" if fmt == "csv" else fmt, cfg.display_min_weight)
        (out / EXPORT_FILES[fmt]).write_bytes(data)
    return meta


def stage_assign(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    visits = _load_visits(out, "assign")
    major, _ = _load_major(out, "assign")
    if cfg.scheme == "plurality":
        result = assign_by_plurality(visits, major)
    else:
        with open(_need(out, "providers.csv", "assign", "ingest"), newline="", encoding="utf-8") as fh:
            directory = read_providers_csv(fh)
        imputed = impute_pcp(visits, directory, cfg.pcp_specialties, cfg.pcp_window_months)
        result = assign_by_pcp(imputed, major, visits)
    _write(out / "assignment.csv", write_assignment_csv, result)
    fr = in_community_fractions(result, visits, major)
    summary = {
        "scheme": result.scheme,
        "patients": len(result.community_of_patient),
        "assigned": len(result.assigned()),
        "overall_within_utilization": fr.overall_utilization,
        "overall_within_spend": fr.overall_spend,
    }
    _write(out / "assign.json", dump_json, summary)
    return summary


def _load_assignment(out: Path, stage: str) -> AssignmentResult:
    with open(_need(out, "assignment.csv", stage, "assign"), newline="", encoding="utf-8") as fh:
        return read_assignment_csv(fh)


def stage_profile(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    g = _load_graph(out, "profile")
    major, _ = _load_major(out, "profile")
    assignment = _load_assignment(out, "profile")
    visits = _load_visits(out, "profile")
    patients, rejects = parse_patients(_need(out, "patients.csv", "profile", "ingest"))
    fr = in_community_fractions(assignment, visits, major)
    profiles = build_profiles(major, g.nodes, assignment, patients, visits, fr, cfg.pcp_specialties)
    _write(out / "profiles.csv", write_profiles_csv, profiles)
    _write(out / "profiles.json", write_profiles_json, profiles)
    return {"communities": len(profiles)}


def stage_trade(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    visits = _load_visits(out, "trade")
    major, _ = _load_major(out, "trade")
    assignment = _load_assignment(out, "trade")
    with open(_need(out, "providers.csv", "trade", "ingest"), newline="", encoding="utf-8") as fh:
        directory = read_providers_csv(fh)
    m = trade_counts(visits, assignment, major, directory, cfg.trade_weighting)
    imp, exp = rca(m, IMPORT), rca(m, EXPORT)
    flows = trade_flow_report(m, cfg.top_k, cfg.min_share)
    findings = self_sufficiency_gaps(m, imp, cfg.balance_tolerance)
    _write(out / "rca.csv", write_rca_csv, [imp, exp])
    _write(out / "flows.csv", write_flows_csv, flows)
    _write(out / "trade_counts.csv", write_trade_counts_csv, m)
    _write(out / "findings.json", dump_json, {"excluded_visits": m.excluded, "findings": findings})
    return {"flow_edges": len(flows), "findings": len(findings), "excluded_visits": m.excluded}


STAGES = {
    "ingest": stage_ingest,
    "graph": stage_graph,
    "detect": stage_detect,
    "assign": stage_assign,
    "profile": stage_profile,
    "trade": stage_trade,
}


def write_run_metadata(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    detect = _read_json(_need(out, "detect.json", "report", "detect"))
    meta = {
        "versions": {"provnet": __version__, "python": platform.python_version(), "kernels": kernels.BACKEND},
        "config": cfg.effective(),
        "config_hash": cfg.config_hash(),
        "q": detect["q"],
        "counts": {
            "ingest": _read_json(out / "ingest.json") if (out / "ingest.json").exists() else None,
            "graph": _read_json(_need(out, "graph.json", "report", "graph")),
            "n_communities": detect["n_communities"],
            "excluded_summary": detect["excluded_summary"],
            "assign": _read_json(_need(out, "assign.json", "report", "assign")),
        },
    }
    _write(out / "run_metadata.json", dump_json, meta)
    return meta


def run_pipeline(cfg: RunConfig) -> dict:
    """Run every stage in order and write ``run_metadata.json``."""
    cfg.validate()
    for name, stage in STAGES.items():
        stage(cfg)
    return write_run_metadata(cfg)


__all__ = ["IMPORT", "EXPORT", "IMPUTED_PCP", "PLURALITY", "Partition", "RunConfig", "STAGES", "StageDependencyError", "run_pipeline"]
