"""Command line front door: ``proverum run <scenario>``."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .errors import ParseError, ProverumError, StepPreconditionFailed
from .ledger import verify_dump


def corpus_dir() -> Path:
    return Path(str(resources.files("proverum") / "corpus"))


def resolve_scenario(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    for candidate in (corpus_dir() / name, corpus_dir() / f"{name}.scenario"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no scenario {name!r} on disk or in the bundled corpus")


def _options(text: str) -> tuple[int, ...]:
    try:
        return tuple(sorted({int(o) for o in text.split(",") if o}))
    except ValueError:
        raise argparse.ArgumentTypeError("public-env takes a comma list of 1, 2, 3") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proverum", description="Permissioned-ledger postal voting simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or a bundled scenario by name")
    run.add_argument("scenario", nargs="?")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--topology", help="topology config file, or 'default'")
    run.add_argument("--public-env", type=_options, help="public options to enable, e.g. 1,2,3")
    run.add_argument("--report", type=Path, help="write the report here and render figures beside it")
    run.add_argument("--verify-only", type=Path, metavar="CHANNEL_DUMP", help="verify a channel dump and exit")
    run.add_argument("--dump-dir", type=Path, help="write every channel's blocks here after the run")
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _verify_only(path: Path) -> int:
    report = verify_dump(path.read_bytes())
    status = "pass" if report.ok else f"fail at height {report.first_bad_height}: {report.detail}"
    print(f"verify\t{path.name}\t{status}")
    return 0 if report.ok else 1


def run_command(args: argparse.Namespace) -> int:
    from .scenario.report import render_report
    from .scenario.runner import run_file

    if args.verify_only is not None:
        return _verify_only(args.verify_only)
    if args.scenario is None:
        print("proverum run: a scenario is required", file=sys.stderr)
        return 2
    topology = str(Path(args.topology).resolve()) if args.topology and args.topology != "default" else args.topology
    try:
        run = run_file(resolve_scenario(args.scenario), seed=args.seed, topology=topology,
                       public_env=args.public_env)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except StepPreconditionFailed as exc:
        print(f"step failed: {exc}", file=sys.stderr)
        return 2
    except (ProverumError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = render_report(run)
    if args.report is not None:
        from .plotting import render_figures

        args.report.parent.mkdir(parents=True, exist_ok=True)
        args.report.write_text(text)
        render_figures(run.simulation, args.report.parent / f"{args.report.stem}_figures")
    else:
        sys.stdout.write(text)
    if args.dump_dir is not None:
        args.dump_dir.mkdir(parents=True, exist_ok=True)
        for cid, channel in sorted(run.simulation.network.channels.items()):
            (args.dump_dir / f"{cid}.chain").write_bytes(channel.dump())
    for e in run.expectations:
        if not e.ok:
            print(f"expectation failed: line {e.line} {e.fact}: expected {e.expected!r}, got {e.actual!r}",
                  file=sys.stderr)
    return 0 if run.ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for path in sorted(corpus_dir().glob("*.scenario")):
            print(path.stem)
        return 0
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
