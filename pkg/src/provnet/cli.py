"""Command-line interface: ``provnet <stage> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .graph import ConfigError, EmptyGraphError
from .pipeline import STAGES, RunConfig, StageDependencyError, run_pipeline

log = logging.getLogger("provnet")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults are None so only flags given on the command line override --config
    p.add_argument("--config", help="JSON file with RunConfig keys")
    p.add_argument("--out", help="artifact directory (default: out)")
    p.add_argument("--threads", type=int, help="worker threads for graph construction")


def _add_ingest(p):
    p.add_argument("--claims", help="claims CSV")
    p.add_argument("--patients", help="patients CSV")
    p.add_argument("--year", type=int, help="study window calendar year (default: modal service year)")
    p.add_argument("--counties", type=_csv_list, help="comma-separated county list to keep")
    p.add_argument("--include-non-diabetic", dest="require_diabetic", action="store_false", default=None)
    p.add_argument("--include-organizations", dest="individual_only", action="store_false", default=None)


def _add_graph(p):
    p.add_argument("--min-patients", type=int, help="minimum distinct patients per provider (default 5)")
    p.add_argument("--min-edge-weight", type=int, help="minimum shared patients per edge (default 2)")
    p.add_argument("--pcp-specialties", type=_csv_list, help="comma-separated PCP specialty labels")


def _add_detect(p):
    p.add_argument("--min-community-size", type=int, help="communities smaller than this are excluded (default 50)")
    p.add_argument("--export", type=_csv_list, help="graph exports: gexf,dot,csv")
    p.add_argument("--display-min-weight", type=float, help="hide lighter edges in exports (default 5)")


def _add_assign(p):
    p.add_argument("--scheme", choices=["plurality", "pcp"])
    p.add_argument("--pcp-window-months", type=int)


def _add_trade(p):
    p.add_argument("--trade-weighting", choices=["visits", "spend"])
    p.add_argument("--top-k", type=int)
    p.add_argument("--min-share", type=float)
    p.add_argument("--balance-tolerance", type=float)


STAGE_ARGS = {
    "ingest": [_add_ingest],
    "graph": [_add_graph],
    "detect": [_add_detect],
    "assign": [_add_assign, _add_graph],
    "profile": [_add_graph],
    "trade": [_add_trade],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, adders in STAGE_ARGS.items():
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p)
        for add in adders:
            add(p)
    for name, help_text in (("report", "run every stage and write run_metadata.json"), ("run", "alias of report")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        for add in (_add_ingest, _add_graph, _add_detect, _add_assign, _add_trade):
            add(p)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("synth", help="write a seeded synthetic claims/patients dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--communities", type=int, default=6)
    p.add_argument("--providers", type=int, nargs=2, metavar=("LO", "HI"), default=(50, 60))
    p.add_argument("--patients", type=int, nargs=2, metavar=("LO", "HI"), default=(250, 350))
    p.add_argument("--visits", type=int, nargs=2, metavar=("LO", "HI"), default=(8, 16))
    p.add_argument("--p-in", type=float, default=0.85)
    p.add_argument("--pcp-share", type=float, default=0.4)
    p.add_argument("--year", type=int, default=2014)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    names = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names and value is not None:
            data[key] = value
    cfg = RunConfig.from_dict(data)
    cfg.validate()
    return cfg


def _synth(args) -> dict:
    from .synth import SynthConfig, generate

    data = generate(
        SynthConfig(
            seed=args.seed,
            n_communities=args.communities,
            providers_per_community=tuple(args.providers),
            patients_per_community=tuple(args.patients),
            visits_per_patient=tuple(args.visits),
            p_in=args.p_in,
            pcp_share=args.pcp_share,
            year=args.year,
        )
    )
    paths = data.write(args.out)
    return {"claim_lines": data.n_lines, "visits": data.n_visits, "files": {k: str(v) for k, v in paths.items()}}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            summary = _synth(args)
        else:
            cfg = config_from_args(args)
            if args.command in ("report", "run"):
                summary = run_pipeline(cfg)
            else:
                summary = STAGES[args.command](cfg)
    except (StageDependencyError, EmptyGraphError, ConfigError, ValueError, OSError) as exc:
        print(f"provnet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
