"""Command line front end: check a protocol file, optionally run it.

Exit status: 0 when every stage succeeds, 1 on a verification or parse
failure, 2 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from . import presburger
from .analysis import check_linearity, check_well_asserted, unfold_once
from .diagnostics import CheckReport, ResourceExhausted, SourceError, UnmergeableBranches, Violation
from .model import PInit, PJoin, strip_assertions_global, strip_assertions_process
from .parser import ProtocolFile, parse_formula, parse_protocol_file
from .printer import show_formula, show_local
from .projection import project_all
from .runtime import Deadlock, MonitorViolation, StepLimitExceeded, ValueDecodeError, simulate
from .typecheck import MODES, infer_all, validate_all

STAGES = ("parse", "linearity", "wellAsserted", "projection", "typing", "run")


@dataclass
class Outcome:
    filename: str
    mode: str
    stages: dict = field(default_factory=lambda: {s: "skipped" for s in STAGES})
    projections: list = field(default_factory=list)
    types: list = field(default_factory=list)       # (participant, heading, type text)
    diagnostics: list = field(default_factory=list)  # (Violation, rendered text)
    trace: list | None = None
    exit_code: int = 0

    def fail(self, stage: str, violations, texts) -> None:
        self.stages[stage] = "failed"
        self.diagnostics.extend(zip(violations, texts))
        self.exit_code = 1

    def to_json(self) -> dict:
        out = {
            "file": self.filename,
            "verdict": "ok" if self.exit_code == 0 else "failed",
            "exitCode": self.exit_code,
            "mode": self.mode,
            "stages": self.stages,
            "projections": [{"participant": p, "type": t} for p, t in self.projections],
            "types": [{"participant": p, "session": h, "type": t} for p, h, t in self.types],
            "diagnostics": [{**v.to_json(), "text": text} for v, text in self.diagnostics],
        }
        if self.trace is not None:
            out["trace"] = [e.to_json() for e in self.trace]
        return out


def render_violation(v: Violation, filename: str) -> str:
    if v.kind == "Mismatch":
        return v.message
    if v.line is not None and "col" in v.details:
        return f"{filename}:{v.line}:{v.details['col']}: {v.message}"
    if v.line is not None:
        return f"{filename}:{v.line}: {v.render()}"
    return f"{filename}: {v.render()}"


def _heading(proc) -> str:
    match proc:
        case PInit(svc, parts, chans, _):
            return f"init:{svc}[{','.join(parts)}]({','.join(chans)})"
        case PJoin(svc, part, chans, _):
            return f"join:{svc}[{part}]({','.join(chans)})"
    return "-"


def run_pipeline(text: str, filename: str, args) -> Outcome:
    out = Outcome(filename, args.mode)

    def report_stage(stage: str, report: CheckReport) -> bool:
        if report.ok:
            out.stages[stage] = "ok"
            return True
        out.fail(stage, report.violations, [render_violation(v, filename) for v in report.violations])
        return False

    try:
        pf = parse_protocol_file(text, filename)
    except SourceError as err:
        v = Violation("Parse", "", err.message, err.line, {"col": err.pos.col} if err.pos else {})
        out.fail("parse", [v], [err.render(filename)])
        return out
    out.stages["parse"] = "ok"
    if args.no_assertions:
        pf = ProtocolFile(strip_assertions_global(pf.global_),
                          [(n, strip_assertions_process(p)) for n, p in pf.participants], pf.filename)
    go_on = args.keep_going

    ok = report_stage("linearity", check_linearity(unfold_once(pf.global_)))
    if not ok and not go_on:
        return out
    ok = report_stage("wellAsserted", check_well_asserted(pf.global_)) and ok
    if not ok and not go_on:
        return out

    try:
        projections = project_all(pf.global_)
    except UnmergeableBranches as err:
        v = Violation("Unmergeable", err.path, str(err), None)
        out.fail("projection", [v], [render_violation(v, filename)])
        return out
    out.stages["projection"] = "ok"
    out.projections = [(p, show_local(t)) for p, t in projections]

    if pf.participants:
        mode = MODES[args.mode]
        typing = infer_all(pf, mode)
        procs = dict(pf.participants)
        out.types = [(p, _heading(procs[p]), show_local(t)) for p, _, t in typing.types]
        typed_ok = report_stage("typing", validate_all(pf, projections, mode, typing))
        ok = ok and typed_ok
    if not ok and not (args.force and args.run):
        return out

    if args.run:
        scheduler = "random" if args.seed is not None else "round-robin"
        try:
            trace = simulate(pf, monitor=not args.no_assertions, scheduler=scheduler, seed=args.seed)
            out.trace = trace.events
            out.stages["run"] = "ok"
        except Deadlock as err:
            out.trace = err.trace.events
            v = Violation("Deadlock", "", str(err), None, {"blocked": err.blocked})
            out.fail("run", [v], [render_violation(v, filename)])
        except MonitorViolation as err:
            v = Violation("MonitorViolation", err.path, str(err), None, {"participant": err.participant})
            out.fail("run", [v], [render_violation(v, filename)])
        except (ValueDecodeError, StepLimitExceeded) as err:
            v = Violation(type(err).__name__, "", str(err), None)
            out.fail("run", [v], [render_violation(v, filename)])
    return out


def render_text(out: Outcome, trace_json: bool) -> str:
    lines = []
    if out.stages["parse"] == "ok":
        lines.append(f"Parsing of {out.filename} succeeded.")
    if out.stages["linearity"] == "ok" and out.stages["wellAsserted"] == "ok":
        lines.append("The global description is linear and well-asserted.")
    if out.projections:
        lines += ["", "Projections:"]
        lines += [f"{p}: {t}" for p, t in out.projections]
    if out.types:
        lines += ["", "Types of the participants:"]
        for p, heading, t in out.types:
            lines += [heading, f"{p}: {t}"]
    if out.diagnostics:
        lines.append("")
        lines += [text for _, text in out.diagnostics]
    if out.trace is not None:
        lines += ["", "Trace:"]
        if trace_json:
            lines.append(json.dumps([e.to_json() for e in out.trace], indent=2))
        else:
            lines += [e.render() for e in out.trace]
    lines.append("")
    lines.append("Verification succeeded." if out.exit_code == 0 else "Verification failed.")
    return "\n".join(lines) + "\n"


def report_schema() -> dict:
    return json.loads(resources.files("sessionkit").joinpath("report.schema.json").read_text())


def _check_command(args) -> int:
    try:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        print(f"{args.file}: cannot read input: {err.strerror}", file=sys.stderr)
        return 2
    budget = presburger.qe_budget(args.qe_budget) if args.qe_budget else nullcontext()
    try:
        with budget:
            out = run_pipeline(text, args.file, args)
    except ResourceExhausted as err:
        out = Outcome(args.file, args.mode)
        v = Violation("ResourceExhausted", "", str(err), None)
        out.fail("typing", [v], [render_violation(v, args.file)])
    if args.json:
        doc = out.to_json()
        jsonschema.validate(doc, report_schema())
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        sys.stdout.write(render_text(out, args.trace_json))
    return out.exit_code


def _qe_command(args) -> int:
    try:
        f = parse_formula(args.formula)
    except SourceError as err:
        print(err.render("<formula>"), file=sys.stderr)
        return 1
    budget = presburger.qe_budget(args.qe_budget) if args.qe_budget else nullcontext()
    try:
        with budget:
            result = presburger.eliminate_quantifiers(f)
            sat = presburger.is_satisfiable(f)
            valid = presburger.is_valid(f)
    except ResourceExhausted as err:
        print(f"<formula>: {err}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps({"formula": show_formula(result.formula), "stats": result.stats,
                          "satisfiable": sat, "valid": valid}, indent=2))
    else:
        print(show_formula(result.formula, spaced=True))
        print(f"eliminated quantifiers: {result.eliminated}, atoms: {result.atom_count}")
        print(f"satisfiable: {str(sat).lower()}, valid: {str(valid).lower()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sessionkit",
                                     description="Check multiparty protocols with assertions and run them.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="verify a protocol file (default command)")
    check.add_argument("file")
    check.add_argument("--run", action="store_true", help="simulate the system after verification")
    check.add_argument("--mode", choices=sorted(MODES), default="multiparty")
    check.add_argument("--json", action="store_true", help="machine-readable report")
    check.add_argument("--seed", type=int, default=None, help="use a seeded random scheduler")
    check.add_argument("--no-assertions", action="store_true", help="treat every assertion as [-]")
    check.add_argument("--qe-budget", type=int, default=None, metavar="N",
                       help="abort decision queries after N elimination steps")
    check.add_argument("--keep-going", action="store_true", help="continue after a failing stage")
    check.add_argument("--force", action="store_true", help="with --run, simulate even if verification failed")
    check.add_argument("--trace-json", action="store_true", help="print the trace as JSON")
    check.set_defaults(handler=_check_command)

    qe = sub.add_parser("qe", help="eliminate quantifiers from a formula")
    qe.add_argument("formula")
    qe.add_argument("--json", action="store_true")
    qe.add_argument("--qe-budget", type=int, default=None, metavar="N")
    qe.set_defaults(handler=_qe_command)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("check", "qe", "-h", "--help"):
        argv.insert(0, "check")
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
