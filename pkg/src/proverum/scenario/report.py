"""Deterministic tab-delimited run reports ending in a digest line."""

from __future__ import annotations

import hashlib

from .runner import ScenarioRun
from .sweep import sweep

FORMAT = "proverum-report/1"


def render_report(run: ScenarioRun) -> str:
    sim = run.simulation
    lines = [f"report\t{FORMAT}\t{run.name}", f"seed\t{run.seed}"]
    for outcome in run.steps:
        detail = outcome.detail.replace("\n", " ").replace("\t", " ")
        lines.append(f"step\t{outcome.step.index}\t{outcome.step.line}\t{outcome.status}\t{outcome.step.text}\t{detail}")
    chains = run.chain_reports or [
        (cid, c.height, c.verify_chain().ok, c.verify_chain().detail) for cid, c in sorted(sim.network.channels.items())
    ]
    for cid, height, ok, detail in chains:
        lines.append(f"chain\t{cid}\t{height}\t{'pass' if ok else 'fail'}\t{detail}")
    for cid, channel in sorted(sim.network.channels.items()):
        lines.append(f"head\t{cid}\t{channel.head_hash.hex()}")
    for outcome in sim.outcomes:
        lines.append(f"threat\t{outcome.render()}")
    for event_id, election in sorted(sim.elections.items()):
        federal = sim.federal_result(event_id)
        lines.append(f"event\t{event_id}\tstages={','.join(election.done) or '-'}")
        for muni, counts in sorted(election.counts.items()):
            lines.append(f"count\t{event_id}\t{muni}\t{','.join(f'{c}:{n}' for c, n in sorted(counts.items()))}")
        for scope, reason in sorted(election.blocked.items()):
            lines.append(f"blocked\t{event_id}\t{scope}\t{reason}")
        if federal is not None:
            lines.append(f"federal\t{federal.render()}")
    for event_id, report in run.public_reports:
        for check in report.checks:
            option = f"option{check.option}" if check.option is not None else "all"
            lines.append(f"public-check\t{event_id}\t{check.name}\t{option}\t{'pass' if check.ok else 'fail'}\t"
                         f"{'; '.join(check.evidence)}")
        for note in report.notes:
            lines.append(f"public-note\t{event_id}\t{note}")
    for problem in sim.publication_errors:
        lines.append(f"publication-rejected\t{problem}")
    for result in run.sweeps or sweep(sim):
        lines.append(result.render())
    for e in run.expectations:
        lines.append(f"expect\t{e.step}\t{e.fact}\t{e.expected}\t{e.actual}\t{'match' if e.ok else 'MISMATCH'}")
    lines.append(f"outcome\t{'pass' if run.ok else 'fail'}\t{sum(e.ok for e in run.expectations)}/{len(run.expectations)}")
    body = "\n".join(lines) + "\n"
    return body + f"report-digest\t{hashlib.sha256(body.encode('utf-8')).hexdigest()}\n"


def report_digest(text: str) -> str:
    last = text.rstrip("\n").rsplit("\n", 1)[-1]
    if not last.startswith("report-digest\t"):
        raise ValueError("missing report-digest line")
    return last.split("\t", 1)[1]
