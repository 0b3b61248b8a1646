"""Command line: ``dltts {distance,run,compare,audit} SCENARIO [flags]``.

Every command builds one report dictionary; ``--format machine`` prints it
as JSON (rationals as ``"num/den"`` strings), ``--format text`` renders the
same dictionary as a table. Exit codes: 0 ok, 1 usage or scenario error,
2 policy violated.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .compare import Config, compare_configs
from .mechanisms import KINDS, audit_dp, audit_ldp, check_indist
from .metrics import UncomparableError, tuple_distance
from .model import ModelError
from .scenario import CLOSED, HALF_OPEN, Scenario, ScenarioError, load_scenario
from .system import FAIL, violation_probability

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


class UsageError(Exception):
    pass


def q(x) -> str | None:
    """Exact rational as a string; ``None`` stays ``None``."""
    return None if x is None else str(Fraction(x))


# reports ---------------------------------------------------------------------


def distance_report(scen: Scenario, args) -> dict:
    target = args.target
    targets = scen.target(target)
    if not targets:
        raise UsageError("target set is empty")
    if not scen.distance_candidates:
        raise UsageError("scenario has no candidate records")
    rows = []
    for label, rec in scen.distance_candidates:
        per_target = []
        for t in targets:
            try:
                cols = tuple_distance(rec, t)
            except UncomparableError:
                continue
            per_target.append(
                {"target": str(t), "columns": {h: q(d) for h, d in cols}, "d_bar": q(sum((d for _, d in cols), Fraction(0)))}
            )
        if not per_target:
            raise UsageError(f"candidate {label} is uncomparable with every target record")
        best = min(Fraction(p["d_bar"]) for p in per_target)
        rows.append({"candidate": label, "record": str(rec), "against": per_target, "rho": q(best)})
    overall = min(Fraction(r["rho"]) for r in rows)
    return {
        "command": "distance",
        "scenario": scen.name,
        "target": target or "policy",
        "target_records": [str(t) for t in targets],
        "candidates": rows,
        "rho": q(overall),
        "closest": [r["candidate"] for r in rows if Fraction(r["rho"]) == overall],
    }


def _tree(scen: Scenario, args):
    if args.epsilon is not None and scen.mechanism is None:
        raise UsageError("--epsilon needs a mechanism section in the scenario")
    if not scen.script:
        raise UsageError("scenario has no script")
    engine = scen.engine(args.target if scen.targets else None, args.epsilon)
    return engine, engine.run(scen.noisy_script(args.seed))


def run_report(scen: Scenario, args) -> dict:
    engine, tree = _tree(scen, args)
    states = []
    for row in tree.trace():
        states.append(
            {
                "id": row["id"],
                "parent": row["parent"],
                "action": row["action"],
                "label": row["label"],
                "probability": q(row["probability"]),
                "path_probability": q(row["path_probability"]),
                "delta": [{"relation": r, "record": s, "provenance": p} for r, s, p in row["delta"]],
                "verdict": row["verdict"],
                "distance": q(row["distance"]),
            }
        )
    for s in states:
        s["witness"] = None
        st = tree.states[s["id"]]
        if st.violated:
            s["witness"] = str(st.report.witness)
    report = {
        "command": "run",
        "scenario": scen.name,
        "target": (args.target or "policy") if scen.targets else None,
        "epsilon": args.epsilon,
        "seed": args.seed,
        "states": states,
        "transitions": [
            {"source": t.source, "action": t.action, "distribution": [[sid, q(p)] for sid, p in t.distribution]}
            for t in tree.transitions
        ],
        "violation_probability": q(violation_probability(tree)),
        "fail_reachable": tree.fail_reachable(),
    }
    if args.sample:
        run = engine.sample(scen.noisy_script(args.seed), args.seed)
        report["sampled_run"] = run.ids
    return report


def compare_report(scen: Scenario, args) -> dict:
    _, tree = _tree(scen, args)
    targets = scen.target(args.target)
    for sid in (args.left, args.right):
        if sid not in tree.states or sid == FAIL:
            raise UsageError(f"unknown state {sid!r}")
    c1, c2 = Config.from_tree(tree, args.left), Config.from_tree(tree, args.right)
    res = compare_configs(c1, c2, targets)

    def succ(sid):
        t = next(t for t in tree.transitions if t.source == sid and t.action != "δ")
        return [target for target, _ in t.distribution]

    left_ids = succ(args.left)
    return {
        "command": "compare",
        "scenario": scen.name,
        "target": args.target or "policy",
        "left": args.left,
        "right": args.right,
        "decision": res.decision.value,
        "chosen": None if res.chosen is None else left_ids[res.chosen],
        "d_min": q(res.d_min),
        "d_min_other": q(res.d_min_other),
        "distances": dict(zip(left_ids, map(q, res.distances))),
        "distances_other": dict(zip(succ(args.right), map(q, res.distances_other))),
    }


def _audit_entry(r) -> dict:
    return {
        "ratio": q(r.ratio),
        "adjacency_value": q(r.adjacency),
        "exact": str(r),
        "epsilon": r.epsilon if r.finite else "inf",
        "pair": None if r.pair is None else [str(x) for x in r.pair],
    }


def audit_report(scen: Scenario, args) -> dict:
    if scen.mechanism is None:
        raise UsageError("scenario has no mechanism section")
    spec = scen.mechanism
    kinds = args.adjacency or list(spec.adjacency)
    dp = []
    for kind in kinds:
        entry = {"adjacency": kind, **_audit_entry(audit_dp(spec.mechanism, spec.adjacency_for(kind), spec.over, spec.restrict))}
        if args.epsilon is not None:
            elements = spec.restrict or (spec.mechanism.inputs if spec.over == "inputs" else spec.mechanism.outputs)
            entry["holds_at_epsilon"] = all(
                check_indist(spec.mechanism, x, y, spec.adjacency_for(kind), args.epsilon, spec.over)
                for i, x in enumerate(elements)
                for y in elements[i + 1:]
            )
        dp.append(entry)
    return {
        "command": "audit",
        "scenario": scen.name,
        "over": spec.over,
        "restrict": None if spec.restrict is None else list(spec.restrict),
        "epsilon": args.epsilon,
        "ldp": _audit_entry(audit_ldp(spec.mechanism)),
        "dp": dp,
    }


# text rendering ----------------------------------------------------------------


def _table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def _s(x) -> str:
    return "-" if x is None else str(x)


def render_text(rep: dict) -> str:
    out = [f"{rep['command']}: {rep['scenario']}"]
    cmd = rep["command"]
    if cmd == "distance":
        out.append(f"target {rep['target']}: " + "; ".join(rep["target_records"]))
        rows = [["candidate", "record", "d_bar", "columns"]]
        for c in rep["candidates"]:
            for a in c["against"]:
                cols = " ".join(f"{h}={d}" for h, d in a["columns"].items())
                rows.append([c["candidate"], c["record"], a["d_bar"], cols])
        out += _table(rows)
        out.append(f"rho: {rep['rho']} (closest: {', '.join(rep['closest'])})")
    elif cmd == "run":
        rows = [["state", "parent", "action", "label", "p", "path_p", "verdict", "rho"]]
        for s in rep["states"]:
            rows.append([s["id"], _s(s["parent"]), _s(s["action"]), _s(s["label"]), s["probability"],
                         s["path_probability"], _s(s["verdict"]), _s(s["distance"])])
        out += _table(rows)
        for s in rep["states"]:
            for d in s["delta"]:
                out.append(f"  {s['id']} +{d['relation']}{d['record']} [{d['provenance']}]")
            if s["witness"]:
                out.append(f"  {s['id']} violated by {s['witness']}")
        for t in rep["transitions"]:
            dist = ", ".join(f"{sid}:{p}" for sid, p in t["distribution"])
            out.append(f"  {t['source']} --{t['action']}--> {dist}")
        out.append(f"violation probability: {rep['violation_probability']}")
        out.append(f"fail reachable: {'yes' if rep['fail_reachable'] else 'no'}")
        if "sampled_run" in rep:
            out.append("sampled run: " + " -> ".join(rep["sampled_run"]))
    elif cmd == "compare":
        out.append(f"target {rep['target']}; left {rep['left']}, right {rep['right']}")
        for side in ("distances", "distances_other"):
            out.append(f"{side}: " + ", ".join(f"{k}={v}" for k, v in rep[side].items()))
        out.append(f"d_min: {rep['d_min']}  d_min_other: {rep['d_min_other']}")
        out.append(f"decision: {rep['decision']}" + (f" via {rep['chosen']}" if rep["chosen"] else ""))
    elif cmd == "audit":
        rows = [["audit", "exact", "epsilon", "ratio", "adjacency", "pair"]]

        def line(name, e):
            return [name, e["exact"], repr(e["epsilon"]) if e["epsilon"] != "inf" else "inf",
                    _s(e["ratio"]), e["adjacency_value"], " ".join(e["pair"] or []) or "-"]

        rows.append(line("ldp", rep["ldp"]))
        for e in rep["dp"]:
            rows.append(line(f"dp[{e['adjacency']}]", e))
        out += _table(rows)
        if rep["epsilon"] is not None:
            for e in rep["dp"]:
                out.append(f"dp[{e['adjacency']}] at epsilon {rep['epsilon']!r}: "
                           + ("holds" if e["holds_at_epsilon"] else "fails"))
    return "\n".join(out) + "\n"


def render_machine(rep: dict) -> str:
    return json.dumps(rep, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# entry point -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file")
    common.add_argument("--format", choices=("text", "machine"), default="text")
    common.add_argument("--interval-closure", choices=(HALF_OPEN, CLOSED), default=None,
                        help="reading of bare a-b ranges (default: scenario option, else half-open)")
    common.add_argument("--target", default=None, help="target set name (default: the policy)")
    common.add_argument("--epsilon", type=float, default=None)
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="dltts", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("distance", parents=[common], help="d_bar and rho of candidate records to a target")
    r = sub.add_parser("run", parents=[common], help="materialise the run tree of the script")
    r.add_argument("--sample", action="store_true", help="also sample one run with --seed")
    c = sub.add_parser("compare", parents=[common], help="compare the configurations of two states")
    c.add_argument("--left", default="s")
    c.add_argument("--right", default="s")
    a = sub.add_parser("audit", parents=[common], help="least epsilon for LDP and DP per adjacency")
    a.add_argument("--adjacency", action="append", choices=KINDS, default=None)
    return p


REPORTS = {"distance": distance_report, "run": run_report, "compare": compare_report, "audit": audit_report}


def execute(argv) -> tuple[int, str]:
    """Run a command; return the exit code and the rendered report."""
    args = build_parser().parse_args(argv)
    if not hasattr(args, "sample"):
        args.sample = False
    scen = load_scenario(args.scenario, args.interval_closure)
    rep = REPORTS[args.command](scen, args)
    text = render_machine(rep) if args.format == "machine" else render_text(rep)
    code = EXIT_VIOLATED if rep["command"] == "run" and rep["fail_reachable"] else EXIT_OK
    return code, text


def main(argv=None) -> int:
    try:
        code, text = execute(sys.argv[1:] if argv is None else argv)
    except (ScenarioError, UsageError, ModelError) as e:
        print(f"dltts: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
