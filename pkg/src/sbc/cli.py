"""Command-line front end.

    sbc check    app.sbd            parse + well-formedness
    sbc analyze  app.sbd            check + information flow + security rules
    sbc simulate app.sbd --scenario run.scn
    sbc generate app.sbd --out out/
    sbc fmt      app.sbd            canonical formatting (stdout, or -w in place)

Exit codes: 0 clean, 1 findings, 2 usage/IO/parse failure.
Set SBC_COLOR=0|1 to force color off/on in human output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import codegen, infoflow, interp, rules, syntax
from .model import AppModel, Diagnostic, Severity, validate

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_FAILURE = 2


def _use_color(stream) -> bool:
    env = os.environ.get("SBC_COLOR")
    if env in ("0", "1"):
        return env == "1"
    return hasattr(stream, "isatty") and stream.isatty()


_COLORS = {Severity.ERROR: "\x1b[31m", Severity.WARNING: "\x1b[33m"}


def _sort_key(d: Diagnostic):
    if d.span is None:
        return ("", 0, d.code)
    return (d.span.file, d.span.line, d.code)


def emit_diagnostics(findings: list[Diagnostic], fmt: str, stream=None) -> None:
    stream = stream or sys.stdout
    color = fmt == "human" and _use_color(stream)
    for d in sorted(findings, key=_sort_key):
        if fmt == "machine":
            record = {
                "severity": d.severity.value,
                "code": d.code,
                "file": d.span.file if d.span else None,
                "line": d.span.line if d.span else None,
                "col": d.span.column if d.span else None,
                "message": d.message,
                "witness": [str(q) for q in d.witness],
            }
            print(json.dumps(record), file=stream)
        else:
            text = d.format_human()
            if color:
                text = _COLORS[d.severity] + text + "\x1b[0m"
            print(text, file=stream)


def _load_model(path: str, diags: list[Diagnostic]) -> Optional[AppModel]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: cannot read {path}: {e.strerror}", file=sys.stderr)
        return None
    outcome = syntax.parse(text, path)
    if not outcome.ok:
        diags.extend(outcome.diagnostics)
        return None
    return outcome.model


def _result_code(findings: list[Diagnostic], fail_on_warnings: bool) -> int:
    if any(d.severity is Severity.ERROR for d in findings):
        return EXIT_FINDINGS
    if fail_on_warnings and findings:
        return EXIT_FINDINGS
    return EXIT_CLEAN


def _analyze_findings(model: AppModel) -> list[Diagnostic]:
    findings = list(infoflow.flow_diagnostics(model))
    findings.extend(rules.check_all(model).findings)
    return findings


def _per_file(args, handler) -> int:
    """Run handler(path) per input; worst exit code wins."""
    worst = EXIT_CLEAN
    for path in args.inputs:
        worst = max(worst, handler(path))
    return worst


def _cmd_check(args) -> int:
    def one(path):
        diags: list[Diagnostic] = []
        model = _load_model(path, diags)
        if model is None:
            emit_diagnostics(diags, args.format)
            return EXIT_FAILURE
        diags = validate(model)
        emit_diagnostics(diags, args.format)
        return _result_code(diags, args.fail_on_warnings)

    return _per_file(args, one)


def _full_analysis(path: str, args) -> tuple[Optional[AppModel], list[Diagnostic], int]:
    """parse + validate + infoflow + rules; model is None on parse failure."""
    diags: list[Diagnostic] = []
    model = _load_model(path, diags)
    if model is None:
        return None, diags, EXIT_FAILURE
    wf = validate(model)
    if wf:
        return model, wf, _result_code(wf, args.fail_on_warnings)
    findings = _analyze_findings(model)
    return model, findings, _result_code(findings, args.fail_on_warnings)


def _cmd_analyze(args) -> int:
    def one(path):
        _, findings, code = _full_analysis(path, args)
        emit_diagnostics(findings, args.format)
        return code

    return _per_file(args, one)


def _cmd_simulate(args) -> int:
    try:
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = interp.parse_scenario(fh.read(), args.scenario)
    except (OSError, interp.ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    def one(path):
        model, findings, code = _full_analysis(path, args)
        emit_diagnostics(findings, args.format)
        if model is None or any(d.code.startswith("WF") for d in findings):
            return max(code, EXIT_FAILURE if model is None else code)
        budget = args.budget if args.budget else len(scenario.gestures) + 3
        trace = interp.run(model, scenario, step_budget=budget)
        for rule, config in trace.steps:
            if config.terminal:
                print(f"{rule}: <terminal>")
            else:
                store = ", ".join(f"{q}={v.payload!r}" for q, v in sorted(config.sigma.items()))
                print(f"{rule}: {config.current} [{store}]")
        for ev in trace.events:
            if ev[0] == "proxy-exit":
                outbound = ", ".join(f"{k}={v.payload!r}" for k, v in sorted(ev[2].items()))
                print(f"proxy-exit {ev[1]} [{outbound}]")
        if trace.error:
            print(f"error: scenario failed: {trace.error}", file=sys.stderr)
            return EXIT_FAILURE
        return code

    return _per_file(args, one)


def _cmd_generate(args) -> int:
    def one(path):
        model, findings, code = _full_analysis(path, args)
        emit_diagnostics(findings, args.format)
        if model is None:
            return EXIT_FAILURE
        try:
            units, _ = codegen.generate_all(model)
        except codegen.GenerationBlocked:
            # the blocking findings were already printed by the analysis pass
            return EXIT_FINDINGS
        codegen.write_units(units, args.out)
        return code

    return _per_file(args, one)


def _cmd_fmt(args) -> int:
    def one(path):
        diags: list[Diagnostic] = []
        model = _load_model(path, diags)
        if model is None:
            emit_diagnostics(diags, args.format)
            return EXIT_FAILURE
        text = syntax.format_model(model)
        if args.write:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_CLEAN

    return _per_file(args, one)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbc", description="storyboard compiler and analyzer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=False, out=False, write=False):
        p.add_argument("inputs", nargs="+", metavar="FILE.sbd")
        p.add_argument("--format", choices=("human", "machine"), default="human")
        p.add_argument("--fail-on-warnings", action="store_true")
        if scenario:
            p.add_argument("--scenario", required=True, metavar="FILE.scn")
            p.add_argument("--budget", type=int, default=0, help="max steps (default: gestures + 3)")
        if out:
            p.add_argument("--out", "-o", required=True, metavar="DIR")
        if write:
            p.add_argument("--write", "-w", action="store_true", help="rewrite files in place")

    common(sub.add_parser("check", help="parse and validate"))
    common(sub.add_parser("analyze", help="validate, information flow, security rules"))
    common(sub.add_parser("simulate", help="run under a scripted scenario"), scenario=True)
    common(sub.add_parser("generate", help="emit the skeleton package"), out=True)
    common(sub.add_parser("fmt", help="canonical formatting"), write=True)
    return parser


_COMMANDS = {
    "check": _cmd_check,
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "generate": _cmd_generate,
    "fmt": _cmd_fmt,
}


def run_cli(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_FAILURE if e.code not in (0, None) else EXIT_CLEAN
    return _COMMANDS[args.command](args)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
