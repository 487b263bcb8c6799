"""Command-line pipeline: model -> candidates -> rules -> monitoring -> reports.

Stages compose through files::

    apmon precalc  --model ehs.json --out pa.json
    apmon compile  --pa pa.json --model ehs.json --thresholds bindings.json --out rules/
    apmon simulate --model ehs.json --scenario UpdateVitalParameters --mode burst --seed 42 --out run.log
    apmon monitor  --rules rules/ --replay run.log --out mon/
    apmon report   --verdicts mon/verdicts.tsv --out series.csv

Every failure exits nonzero with one ``apmon: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import OrderedDict
from pathlib import Path
from typing import List, Optional

from .model import load_model
from .monitor import Manager, build_report, detect, dumps_log, dumps_verdicts, loads_verdicts, read_log, replay, write_log
from .monitor.events import EventRecord
from .monitor.report import RunReport, window_table
from .precalc import dumps_instances, loads_instances, precalculate
from .process import build_rules
from .qnsim import Burst, Steady, apply_refactoring, derive_qn, mva_solve, simulate
from .rulec import MonitorRule, dumps_rules, loads_rules, render_rule, rule_filename

RULES_BUNDLE = "rules.json"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one diagnostic line instead of usage + message
        self.exit(2, f"apmon: error: usage: {' '.join(message.split())}\n")


def _write(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _read_json(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: expected a JSON object")
    return doc


def _parse_refactor(specs: List[str]) -> List[tuple]:
    out = []
    for s in specs or []:
        target, sep, factor = s.partition("=")
        if not sep:
            raise CliError(f"--refactor expects TARGET=FACTOR, got {s!r}")
        try:
            out.append((target, float(factor)))
        except ValueError:
            raise CliError(f"--refactor factor is not a number: {factor!r}") from None
    return out


# --- subcommands -----------------------------------------------------------------

def cmd_precalc(a) -> int:
    model = load_model(a.model)
    _write(dumps_instances(precalculate(model), model.name), a.out)
    return 0


def cmd_compile(a) -> int:
    model = load_model(a.model)
    candidates = loads_instances(Path(a.pa).read_text(encoding="utf-8"))
    thresholds = _read_json(a.thresholds) if a.thresholds else None
    rules = build_rules(model, candidates, thresholds, a.consecutive, a.absolute_slope)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in rules:
        (out / rule_filename(r)).write_text(render_rule(r), encoding="utf-8")
    (out / RULES_BUNDLE).write_text(dumps_rules(rules), encoding="utf-8")
    for r in rules:
        print(rule_filename(r))
    return 0


def _load_rules(path: str) -> List[MonitorRule]:
    p = Path(path)
    if p.is_dir():
        p = p / RULES_BUNDLE
    return loads_rules(p.read_text(encoding="utf-8"))


def _sim_events(a) -> List[EventRecord]:
    model = load_model(a.model)
    scenario = a.scenario or (model.scenarios[0].name if model.scenarios else None)
    if scenario is None:
        raise CliError("model has no scenario to simulate")
    net = derive_qn(model, scenario)
    for target, factor in _parse_refactor(a.refactor):
        net = apply_refactoring(net, target, factor)
    if a.mode == "burst":
        mode = Burst(a.jobs if a.jobs is not None else net.population, a.t0)
    else:
        mode = Steady()
    return simulate(net, mode, a.horizon, a.seed, a.service)


def cmd_monitor(a) -> int:
    rules = _load_rules(a.rules)
    if a.replay:
        events = read_log(a.replay)
    elif a.from_sim:
        if not a.model:
            raise CliError("--from-sim needs --model")
        events = _sim_events(a)
    else:
        raise CliError("monitor needs --replay LOG or --from-sim")
    by_instance: "OrderedDict[str, List[MonitorRule]]" = OrderedDict()
    for r in rules:
        by_instance.setdefault(r.instance_id, []).append(r)
    mgr = Manager()
    for iid, rs in by_instance.items():
        mgr.register_consumer(iid, rs)
    verdicts = replay(events, mgr)
    detections = [detect(iid, verdicts) for iid in by_instance]
    report = build_report(verdicts, detections, mgr.counters(), a.epoch)
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verdicts.tsv").write_text(dumps_verdicts(verdicts), encoding="utf-8")
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(dumps_verdicts(verdicts))
    for d in detections:
        status = "FIRED" if d.fired else "clear"
        print(f"{status}\t{d.instance_id}\t{len(d.evidence)} violating window(s)", file=sys.stderr)
    return 0


def cmd_simulate(a) -> int:
    if a.mva:
        model = load_model(a.model)
        scenario = a.scenario or model.scenarios[0].name
        net = derive_qn(model, scenario)
        for target, factor in _parse_refactor(a.refactor):
            net = apply_refactoring(net, target, factor)
        sol = mva_solve(net)
        _write(sol.to_json() if a.json else sol.table(), a.out)
        return 0
    events = _sim_events(a)
    if a.out in (None, "-"):
        sys.stdout.write(dumps_log(events))
    else:
        write_log(events, a.out)
    return 0


def cmd_report(a) -> int:
    verdicts = loads_verdicts(Path(a.verdicts).read_text(encoding="utf-8"))
    report = RunReport(a.epoch, [], window_table(verdicts), {})
    _write(report.to_csv(), a.out)
    return 0


# --- parser ------------------------------------------------------------------------

def _sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario to simulate (default: first in the model)")
    p.add_argument("--mode", choices=("burst", "steady"), default="burst")
    p.add_argument("--jobs", type=int, help="burst size (default: scenario population)")
    p.add_argument("--t0", type=float, default=0.0, help="burst release time, seconds")
    p.add_argument("--horizon", type=float, default=1500.0, help="simulated seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--service", choices=("exponential", "deterministic"), default="exponential")
    p.add_argument("--refactor", action="append", metavar="TARGET=FACTOR",
                   help="scale the demand of a station, node or link (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="apmon", description="Runtime performance antipattern detection.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("precalc", help="candidate antipattern instances of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="PA file (default: stdout)")
    p.set_defaults(func=cmd_precalc)

    p = sub.add_parser("compile", help="actualize and compile monitor rules")
    p.add_argument("--pa", required=True, help="PA file from precalc")
    p.add_argument("--model", required=True)
    p.add_argument("--thresholds", help="JSON map of $Th_* bindings (seconds); default: model thresholds")
    p.add_argument("--consecutive", type=int, default=2, help="violations in a row needed to fire")
    p.add_argument("--absolute-slope", action="store_true", help="compare |slope| instead of the signed increase")
    p.add_argument("--out", default="rules", help="output directory")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("monitor", help="run rules over a recorded or simulated event log")
    p.add_argument("--rules", required=True, help="rules directory or bundle")
    p.add_argument("--replay", help="event log to replay")
    p.add_argument("--from-sim", action="store_true", help="simulate the model instead of replaying")
    p.add_argument("--model")
    p.add_argument("--epoch", type=float, default=0.0)
    p.add_argument("--out", help="output directory (default: verdicts on stdout)")
    _sim_args(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("simulate", help="simulate a scenario and write its event log")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="event log (default: stdout)")
    p.add_argument("--mva", action="store_true", help="print the exact MVA solution instead")
    p.add_argument("--json", action="store_true", help="with --mva, emit JSON")
    _sim_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="per-window CSV series from a verdict log")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--epoch", type=float, default=0.0)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # every failure becomes one diagnostic line
        msg = str(exc) if not isinstance(exc, KeyError) else f"unknown name {exc.args[0]}"
        msg = " ".join(msg.split())
        print(f"apmon: error: {args.command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
