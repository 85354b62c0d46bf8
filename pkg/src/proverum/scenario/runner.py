"""Scenario files: a line-oriented script driving a :class:`Simulation`.

One step per line, ``#`` starts a comment. ``key=value`` words are parameters.
Setup verbs (``seed``, ``topology``, ``public-env``) must precede all others.

    seed <n>
    topology default|<path>
    public-env <1,2,3>
    citizens generate <per-municipality> | citizens file <path>
    relocate <from> <to> <local-id>
    restrict <municipality> <local-id> true|false
    event <id> [<reference-date>]
    stage <name>|all [until=<name>] [k=v ...]
    inject <TEn> [k=v ...]
    tamper poa-block|sink-record|register-export|stale-api [k=v ...]
    attempt <verb> <args...>
    advance [ticks]
    verify-chains
    verify-public
    sweep
    expect <fact> <value...>
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from ..errors import ParseError, ProverumError, StepPreconditionFailed
from ..public_env import PublicReport, public_verify
from .citizens import parse_citizens
from .process import STAGES, Simulation
from .sweep import SweepResult, federal_matches_recount, reception_rows, sweep
from .threats import INJECTIONS, InjectionOutcome, inject, tamper
from .topology import TopologyConfig, default_config, parse_topology

SETUP_VERBS = ("seed", "topology", "public-env")
VERBS = SETUP_VERBS + ("citizens", "relocate", "restrict", "event", "stage", "inject", "tamper", "attempt",
                       "advance", "verify-chains", "verify-public", "sweep", "expect")
TAMPER_VERBS = ("poa-block", "sink-record", "register-export", "stale-api")


@dataclass(frozen=True)
class Step:
    index: int
    line: int
    verb: str
    args: tuple[str, ...]
    params: dict[str, str] = field(default_factory=dict, hash=False)

    @property
    def text(self) -> str:
        words = [self.verb, *self.args, *(f"{k}={v}" for k, v in self.params.items())]
        return " ".join(words)


@dataclass
class StepOutcome:
    step: Step
    status: str
    detail: str = ""


@dataclass(frozen=True)
class Expectation:
    step: int
    line: int
    fact: str
    expected: str
    actual: str

    @property
    def ok(self) -> bool:
        return self.expected == self.actual


@dataclass
class ScenarioRun:
    name: str
    seed: int
    simulation: Simulation
    steps: list[StepOutcome] = field(default_factory=list)
    expectations: list[Expectation] = field(default_factory=list)
    chain_reports: list[tuple[str, int, bool, str]] = field(default_factory=list)
    public_reports: list[tuple[str, PublicReport]] = field(default_factory=list)
    sweeps: list[SweepResult] = field(default_factory=list)
    injections: dict[str, InjectionOutcome] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.expectations)


def parse_scenario(text: str) -> list[Step]:
    steps = []
    setup_done = False
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        words = line.split()
        verb = words[0]
        if verb not in VERBS:
            raise ParseError(f"unknown verb {verb!r}", n, line.index(verb) + 1)
        if verb in SETUP_VERBS and setup_done:
            raise ParseError(f"{verb} must come before other steps", n, line.index(verb) + 1)
        if verb not in SETUP_VERBS:
            setup_done = True
        args, params = [], {}
        for w in words[1:]:
            key, eq, value = w.partition("=")
            if eq and verb not in ("expect",) and key:
                params[key] = value
            else:
                args.append(w)
        _check_arity(verb, args, n, line)
        steps.append(Step(len(steps) + 1, n, verb, tuple(args), params))
    return steps


_ARITY = {
    "seed": (1, 1), "topology": (1, 1), "public-env": (1, 1), "citizens": (2, 2), "relocate": (3, 3),
    "restrict": (3, 3), "event": (1, 2), "stage": (1, 1), "inject": (1, 1), "tamper": (1, 1),
    "attempt": (1, None), "advance": (0, 1), "verify-chains": (0, 0), "verify-public": (0, 0), "sweep": (0, 0),
    "expect": (2, None),
}


def _check_arity(verb: str, args: list[str], n: int, line: str) -> None:
    low, high = _ARITY[verb]
    if len(args) < low or (high is not None and len(args) > high):
        raise ParseError(f"{verb}: wrong number of arguments", n, len(line) + 1)
    column = line.index(verb) + len(verb) + 2
    if verb == "seed" and not args[0].lstrip("-").isdigit():
        raise ParseError("seed must be an integer", n, column)
    if verb == "citizens" and args[0] not in ("generate", "file"):
        raise ParseError("citizens takes generate or file", n, column)
    if verb == "stage" and args[0] not in STAGES + ("all",):
        raise ParseError(f"unknown stage {args[0]!r}", n, column)
    if verb == "inject" and args[0].upper() not in INJECTIONS:
        raise ParseError(f"unknown threat event {args[0]!r}", n, column)
    if verb == "tamper" and args[0] not in TAMPER_VERBS:
        raise ParseError(f"unknown tamper verb {args[0]!r}", n, column)
    if verb == "attempt" and args[0] not in ("stage", "inject", "tamper", "relocate", "restrict"):
        raise ParseError(f"cannot attempt {args[0]!r}", n, column)


def _bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ProverumError(f"expected true or false, got {text!r}")
    return text == "true"


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


class ScenarioRunner:
    def __init__(self, steps: list[Step], base_dir: Path, name: str = "scenario", seed: Optional[int] = None,
                 topology: Optional[Union[str, Path]] = None, public_env: Optional[tuple[int, ...]] = None):
        self.steps = steps
        self.base_dir = base_dir
        self.name = name
        self.override_seed = seed
        self.override_topology = topology
        self.override_public_env = public_env
        self.event_id: Optional[str] = None
        self.outcomes: dict[str, InjectionOutcome] = {}
        self.last_error = "none"
        self.tamper_notes: list[str] = []

    # -- setup ------------------------------------------------------------

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def _config(self, scenario_topology: Optional[str]) -> TopologyConfig:
        chosen = self.override_topology or scenario_topology
        if chosen is None or str(chosen) == "default":
            return default_config()
        return parse_topology(self._resolve(str(chosen)).read_text())

    def _simulation(self) -> Simulation:
        seed, topology, options = 0, None, None
        for s in self.steps:
            if s.verb == "seed":
                seed = int(s.args[0])
            elif s.verb == "topology":
                topology = s.args[0]
            elif s.verb == "public-env":
                options = tuple(int(o) for o in s.args[0].split(",") if o)
        if self.override_seed is not None:
            seed = self.override_seed
        config = self._config(topology)
        if self.override_public_env is not None:
            options = self.override_public_env
        return Simulation(config, seed, options)

    # -- execution --------------------------------------------------------

    def run(self) -> ScenarioRun:
        sim = self._simulation()
        run = ScenarioRun(self.name, sim.seed, sim, injections=self.outcomes)
        for step in self.steps:
            if step.verb in SETUP_VERBS:
                run.steps.append(StepOutcome(step, "ok", step.text))
                continue
            try:
                detail = self._execute(run, step)
            except (ProverumError, OSError, ValueError) as exc:
                raise StepPreconditionFailed(f"step {step.index} (line {step.line}) {step.text}: "
                                             f"{type(exc).__name__}: {exc}", step.index) from exc
            run.steps.append(StepOutcome(step, "ok", detail or ""))
        return run

    def _event(self) -> str:
        if self.event_id is None:
            raise ProverumError("no event opened")
        return self.event_id

    def _execute(self, run: ScenarioRun, step: Step) -> str:
        sim = run.simulation
        verb, args, params = step.verb, step.args, step.params
        if verb == "citizens":
            if args[0] == "generate":
                return f"{len(sim.generate_citizens(int(args[1])))} citizens generated"
            records = parse_citizens(self._resolve(args[1]).read_text())
            sim.load_citizens(records)
            return f"{len(records)} citizens loaded"
        if verb == "relocate":
            receipt = sim.relocate(args[0], args[1], args[2])
            return f"{receipt.old_id}->{receipt.new_id}"
        if verb == "restrict":
            sim.restrict(args[0], args[1], _bool(args[2]))
            return ""
        if verb == "event":
            date = dt.date.fromisoformat(args[1]) if len(args) > 1 else None
            self.event_id = sim.open_event(args[0], date).event_id
            return ""
        if verb == "stage":
            return self._stage(sim, args[0], params)
        if verb == "inject":
            outcome = inject(sim, self._event(), args[0].upper(), params)
            self.outcomes[outcome.threat] = outcome
            return outcome.render()
        if verb == "tamper":
            note = tamper(sim, args[0], params)
            self.tamper_notes.append(note)
            return note
        if verb == "attempt":
            inner = Step(step.index, step.line, args[0], args[1:], params)
            try:
                detail = self._execute(run, inner)
            except ProverumError as exc:
                self.last_error = type(exc).__name__
                return f"refused: {type(exc).__name__}: {exc}"
            self.last_error = "none"
            return f"succeeded {detail}".strip()
        if verb == "advance":
            sim.network.advance(int(args[0]) if args else 1)
            return ""
        if verb == "verify-chains":
            for cid, channel in sorted(sim.network.channels.items()):
                report = channel.verify_chain()
                run.chain_reports.append((cid, channel.height, report.ok, report.detail))
            return ""
        if verb == "verify-public":
            report = self._public(sim)
            run.public_reports.append((self._event(), report))
            return "pass" if report.ok else "fail"
        if verb == "sweep":
            run.sweeps = sweep(sim)
            return "pass" if all(r.ok for r in run.sweeps) else "fail"
        if verb == "expect":
            fact, expected = args[0], " ".join(args[1:])
            actual = self.fact(run, fact)
            run.expectations.append(Expectation(step.index, step.line, fact, expected, actual))
            return "match" if expected == actual else f"MISMATCH expected {expected!r} got {actual!r}"
        raise ProverumError(f"unhandled verb {verb}")

    def _stage(self, sim: Simulation, name: str, params: dict[str, str]) -> str:
        event = self._event()
        stage_params = {k: float(v) for k, v in params.items() if k != "until"}
        if name == "all":
            until = params.get("until")
            if until is not None and until not in STAGES:
                raise ProverumError(f"unknown stage {until!r}")
            election = sim.election(event)
            ran = []
            while election.next_stage() is not None:
                current = election.next_stage()
                sim.run_stage(event, current, **(stage_params if current == "cast" else {}))
                ran.append(current)
                if current == until:
                    break
            return ",".join(ran)
        sim.run_stage(event, name, **stage_params)
        return name

    def _public(self, sim: Simulation) -> PublicReport:
        sim.flush_public()
        return public_verify(sim.public.snapshot(), self._event())

    # -- facts ------------------------------------------------------------

    def fact(self, run: ScenarioRun, name: str) -> str:
        sim = run.simulation
        head, _, rest = name.partition(".")
        if head.upper() in INJECTIONS:
            outcome = self.outcomes.get(head.upper())
            if outcome is None:
                return "not-injected"
            return _fmt(getattr(outcome, rest)) if rest in ("detected", "mitigation") else "unknown-fact"
        simple: dict[str, Callable[[], object]] = {
            "chains.ok": lambda: all(c.verify_chain().ok for c in sim.network.channels.values()),
            "replay.ok": lambda: all(c.replay_sound() for c in sim.network.channels.values()),
            "public.ok": lambda: self._public(sim).ok,
            "public.failed": lambda: ",".join(sorted({c.name for c in self._public(sim).failures()})) or "none",
            "public.notes": lambda: len(self._public(sim).notes),
            "sweep.ok": lambda: all(r.ok for r in sweep(sim)),
            "federal.published": lambda: sim.federal_result(self._event()) is not None,
            "federal.matches_recount": lambda: federal_matches_recount(sim, self._event()),
            "aggregation.blocked": lambda: bool({k for k in sim.election(self._event()).blocked if k != "destroy"}),
            "destruction.done": lambda: all(o.acted for o in sim.election(self._event()).destruction.values())
                                       and bool(sim.election(self._event()).destruction),
            "publication.rejections": lambda: len(sim.publication_errors),
            "attempt.error": lambda: self.last_error,
            "stage.next": lambda: sim.election(self._event()).next_stage(),
        }
        if name in simple:
            return _fmt(simple[name]())
        if head == "public" and rest.startswith("check."):
            wanted = rest[len("check."):]
            found = [c for c in self._public(sim).checks if c.name == wanted]
            return _fmt(all(c.ok for c in found)) if found else "unknown-fact"
        if head == "sweep" and rest:
            found = [r for r in sweep(sim) if r.name == rest]
            return _fmt(found[0].ok) if found else "unknown-fact"
        if head == "accepted":
            return _fmt(sum(1 for r in reception_rows(sim, self._event()) if r[3] == "Accepted"
                            and (not rest or r[0] == rest)))
        if head == "rejected":
            return _fmt(sum(1 for r in reception_rows(sim, self._event()) if r[3] == "Rejected"
                            and (not rest or r[4] == rest)))
        if head == "register" and rest.startswith("version."):
            register = sim.offices[rest[len("version."):]].active_register(self._event())
            return _fmt(register.version if register else None)
        if head == "holder" and rest:
            record_sets = {m: {r.local_person_id for r in reg.records()} for m, reg in sim.registries.items()}
            holders = sorted(m for m, ids in record_sets.items() if rest in ids)
            return ",".join(holders) or "none"
        return "unknown-fact"


def run_scenario(text: str, base_dir: Union[str, Path] = ".", name: str = "scenario", **overrides) -> ScenarioRun:
    return ScenarioRunner(parse_scenario(text), Path(base_dir), name, **overrides).run()


def run_file(path: Union[str, Path], **overrides) -> ScenarioRun:
    path = Path(path)
    return run_scenario(path.read_text(), path.parent, path.stem, **overrides)
