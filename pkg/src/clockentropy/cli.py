"""Command line entry point: ``clockentropy <kind> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import KINDS, ConfigError, materialize
from .experiments import RUNNERS, RunReport
from .gallery import GALLERY
from .io import write_csv, write_json
from .linalg import ValidationError

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3
TOP_LEVEL = ("seed", "grids", "tolerances", "output")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: dict, assignment: str) -> None:
    """``key=value`` sets a parameter; ``grids.x=...`` and friends reach the top level."""
    if "=" not in assignment:
        raise ConfigError(f"--set {assignment}: expected key=value")
    key, value = assignment.split("=", 1)
    path = key.strip().split(".")
    if path[0] not in TOP_LEVEL:
        path = ["params", *path]
    node = raw
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{'/'.join(path)}: cannot set a field inside a non-object")
    node[path[-1]] = _parse_value(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clockentropy",
                                     description="Audit entropy-production bounds for quantum clocks.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--list", action="store_true", help="print the clock gallery and exit")
    sub = parser.add_subparsers(dest="kind")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, help="output directory (default from config, else ./out)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel restarts for the tightness search")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a field; VALUE is parsed as JSON when possible")
    return parser


def load_config(args) -> dict:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"<root>: cannot read {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("<root>: config must be a JSON object")
        if raw.setdefault("kind", args.kind) != args.kind:
            raise ConfigError(f"kind: config says {raw['kind']!r} but the subcommand is {args.kind!r}")
    raw["kind"] = args.kind
    for assignment in args.set:
        apply_override(raw, assignment)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw.setdefault("output", {})["dir"] = str(args.out)
    return materialize(raw)


def write_outputs(report: RunReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in report.tables.items():
        write_csv(out / f"{name}.csv", header, rows)
    for name, obj in report.artifacts.items():
        write_json(out / f"{name}.json", obj)
    write_json(out / "report.json", {
        "config": report.config,
        "version": report.version,
        "verdict": report.verdict,
        "reports": [r.to_dict() for r in report.reports],
        "summary": report.summary,
        "nonconverged": report.nonconverged,
        "wall_clock_seconds": report.wall_clock,
    })


def exit_code(report: RunReport) -> int:
    if report.nonconverged:
        return EXIT_NONCONVERGENCE
    return EXIT_VIOLATION if report.verdict == "violated" else EXIT_OK


def run(cfg: dict, jobs: int = 1) -> RunReport:
    start = time.perf_counter()
    runner = RUNNERS[cfg["kind"]]
    report = runner(cfg, jobs) if cfg["kind"] == "tightness" else runner(cfg)
    report.wall_clock = time.perf_counter() - start
    return report


def print_gallery() -> None:
    for name, (ctor, defaults) in GALLERY.items():
        clock = ctor(**defaults)
        print(f"{name:<11} dim={clock.dim:<3} horizon={clock.horizon:.6g} bandwidth={clock.declared_bandwidth:.6g} "
              f"outcomes={len(clock.measurement)} parameter='{clock.parameter_name}' defaults={defaults}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        print_gallery()
        return EXIT_OK
    if args.kind is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args)
        if args.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        report = run(cfg, args.jobs)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(report, Path(cfg["output"]["dir"]))
    for r in report.reports:
        print(f"[{r.verdict:>12}] {r.anchor}: {r.name}  left={r.left_side:.10g} right={r.right_side:.10g}")
    for item in report.nonconverged:
        print(f"[not converged] {item}")
    print(f"verdict: {report.verdict}  ({report.wall_clock:.2f} s, output in {cfg['output']['dir']})")
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
