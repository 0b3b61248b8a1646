"""The labelled tagged transition system driven by a querying script.

States carry the adversary's knowledge (raw and saturated); each script step
supplies one probabilistic transition per frontier state, whose branches add
the answered records to the parent's saturated knowledge. The oracle checks
every saturated tag against the policy, sending violated states to the
absorbing fail state with the violation action, and reports the rho distance
of the knowledge to a target set.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mechanisms import FiniteMechanism
from .metrics import rho
from .model import Database, ModelError, PolicyAtom, Record
from .saturation import (
    DEPTH_CAP,
    FACT_CEILING,
    Rule,
    Tag,
    Verdict,
    check_consistency,
    epsilon_saturate,
)

FAIL = "⊗"
VIOLATION = "δ"
INTERNAL = "ι"
OK = "ok"
VIOLATED = "violated"


class RunError(ModelError):
    pass


@dataclass(frozen=True)
class Branch:
    records: tuple[Record, ...]
    probability: Fraction
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "probability", Fraction(self.probability))


@dataclass(frozen=True)
class ScriptStep:
    """One query of the script: the action label and the answer branches."""

    action: str
    branches: tuple[Branch, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        check_distribution([b.probability for b in self.branches], f"step {self.action!r}")


def check_distribution(ps: Sequence[Fraction], what: str = "distribution") -> None:
    if not ps:
        raise RunError(f"{what} has no branches")
    if any(p < 0 for p in ps):
        raise RunError(f"{what} has a negative probability")
    total = sum(ps, Fraction(0))
    if total != 1:
        raise RunError(f"{what}: probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class OracleReport:
    state: str
    verdict: str
    distance: Fraction | None = None
    witness: Record | None = None
    atom: PolicyAtom | None = None


@dataclass
class State:
    id: str
    tag: Tag | None
    saturated: Tag | None
    probability: Fraction = Fraction(1)  # weight in the generating distribution
    path_probability: Fraction = Fraction(1)
    action: str | None = None
    parent: str | None = None
    label: str | None = None
    report: OracleReport | None = None

    @property
    def is_fail(self) -> bool:
        return self.id == FAIL

    @property
    def violated(self) -> bool:
        return self.report is not None and self.report.verdict == VIOLATED


@dataclass(frozen=True)
class Transition:
    source: str
    action: str
    distribution: tuple[tuple[str, Fraction], ...]

    def __post_init__(self):
        object.__setattr__(self, "distribution", tuple(self.distribution))
        check_distribution([p for _, p in self.distribution], f"transition from {self.source}")


@dataclass
class RunTree:
    states: dict[str, State]
    transitions: list[Transition]
    root: str

    def transition_from(self, sid: str) -> Transition | None:
        for t in self.transitions:
            if t.source == sid:
                return t
        return None

    def non_fail(self) -> list[State]:
        return [s for s in self.states.values() if not s.is_fail]

    def violated_states(self) -> list[State]:
        return [s for s in self.states.values() if s.violated]

    def reachable(self, positive_only: bool = True) -> set[str]:
        """States reachable from the root; with ``positive_only``, only
        through edges in the support of their distribution."""
        seen = {self.root}
        todo = deque([self.root])
        while todo:
            t = self.transition_from(todo.popleft())
            if t is None:
                continue
            for target, p in t.distribution:
                if (p > 0 or not positive_only) and target not in seen:
                    seen.add(target)
                    todo.append(target)
        return seen

    def fail_reachable(self) -> bool:
        return FAIL in self.reachable()

    def trace(self) -> list[dict]:
        """One record per state in breadth-first order."""
        out = []
        for s in self.states.values():
            parent = self.states.get(s.parent) if s.parent else None
            if s.is_fail:
                delta = []
            else:
                base = parent.saturated if parent is not None and parent.saturated is not None else Tag()
                delta = s.saturated.delta(base)
            out.append(
                {
                    "id": s.id,
                    "parent": s.parent,
                    "action": s.action,
                    "label": s.label,
                    "probability": s.probability,
                    "path_probability": s.path_probability,
                    "delta": [(str(r.schema.name), str(r), s.saturated.provenance(r)) for r in delta],
                    "verdict": None if s.report is None else s.report.verdict,
                    "distance": None if s.report is None else s.report.distance,
                }
            )
        return out


@dataclass
class Dltts:
    """The engine: externals, deduction rules, policy and oracle target.

    With ``mechanism`` set, saturation identifies epsilon-indistinguishable
    answers first (``epsilon`` defaults to 0).
    """

    externals: Mapping[str, Database] | Iterable[Database] = field(default_factory=dict)
    rules: Sequence[Rule] = ()
    policy: Sequence[PolicyAtom] = ()
    target: Sequence[Record] = ()
    mechanism: FiniteMechanism | None = None
    epsilon: float = 0.0
    depth_cap: int = DEPTH_CAP
    fact_ceiling: int = FACT_CEILING
    max_states: int = 10_000

    def saturate(self, tag: Tag) -> Tag:
        return epsilon_saturate(
            tag,
            self.externals,
            self.rules,
            self.mechanism,
            self.epsilon,
            depth_cap=self.depth_cap,
            fact_ceiling=self.fact_ceiling,
        )

    def oracle(self, sid: str, saturated: Tag) -> OracleReport:
        verdict: Verdict = check_consistency(saturated, self.policy)
        distance = None
        if self.target and saturated:
            distance = rho(saturated, self.target, skip_uncomparable=True)
        return OracleReport(sid, VIOLATED if verdict.violated else OK, distance, verdict.witness, verdict.atom)

    def initial(self) -> State:
        tag = Tag()
        sat = self.saturate(tag)
        s = State("s", tag, sat, Fraction(1), Fraction(1), None)
        s.report = self.oracle(s.id, sat)
        return s

    def step(self, current: State, branches: Sequence[Branch], action: str = "q") -> tuple[Transition, list[State]]:
        """Fire one transition from ``current``; returns it and the children.

        Each child's raw tag is the parent's saturated tag plus the branch's
        answered records.
        """
        if current.is_fail:
            raise RunError("no transition leaves the fail state")
        if current.violated:
            raise RunError(f"state {current.id} is violated; its only transition is to the fail state")
        check_distribution([b.probability for b in branches], f"step {action!r}")
        children = []
        for i, b in enumerate(branches):
            sid = f"s{i}" if current.id == "s" else f"{current.id}.{i}"
            tag = current.saturated.with_answers(b.records)
            sat = self.saturate(tag)
            child = State(
                sid, tag, sat, b.probability, current.path_probability * b.probability,
                action, current.id, b.label,
            )
            child.report = self.oracle(sid, sat)
            children.append(child)
        t = Transition(current.id, action, [(c.id, c.probability) for c in children])
        return t, children

    def run(self, script: Sequence[ScriptStep]) -> RunTree:
        """Materialise the whole run tree of the script."""
        root = self.initial()
        states = {root.id: root}
        transitions: list[Transition] = []
        frontier = [root]
        fail_needed = False
        for step in script:
            nxt = []
            for s in frontier:
                if s.violated:
                    continue
                t, children = self.step(s, step.branches, step.action)
                transitions.append(t)
                for c in children:
                    states[c.id] = c
                nxt.extend(children)
                if len(states) > self.max_states:
                    raise RunError(f"run tree exceeds {self.max_states} states; use sampling")
            frontier = nxt
        for s in list(states.values()):
            if s.violated:
                transitions.append(Transition(s.id, VIOLATION, [(FAIL, Fraction(1))]))
                fail_needed = True
        if fail_needed:
            states[FAIL] = State(FAIL, None, None, Fraction(1), violation_probability_of(states), VIOLATION)
        return RunTree(states, transitions, root.id)

    def sample(self, script: Sequence[ScriptStep], rng) -> "Run":
        """One run, choosing each branch with its probability."""
        rng = np.random.default_rng(rng)
        current = self.initial()
        steps = [RunStep(current, None, current.report)]
        for step in script:
            if current.violated:
                break
            _, children = self.step(current, step.branches, step.action)
            ps = np.array([float(c.probability) for c in children])
            k = int(rng.choice(len(children), p=ps / ps.sum()))
            current = children[k]
            steps.append(RunStep(current, k, current.report))
        return Run(steps, terminal=current.violated)


def violation_probability_of(states: Mapping[str, State]) -> Fraction:
    return sum((s.path_probability for s in states.values() if s.violated), Fraction(0))


@dataclass(frozen=True)
class RunStep:
    state: State
    branch: int | None
    report: OracleReport


@dataclass(frozen=True)
class Run:
    steps: list
    terminal: bool  # reached the fail state

    @property
    def ids(self) -> list[str]:
        return [s.state.id for s in self.steps] + ([FAIL] if self.terminal else [])


def violation_probability(tree: RunTree) -> Fraction:
    """Probability mass of root-to-fail paths: products along edges, summed."""
    total = Fraction(0)
    todo = [(tree.root, Fraction(1))]
    while todo:
        sid, p = todo.pop()
        if sid == FAIL:
            total += p
            continue
        t = tree.transition_from(sid)
        if t is None:
            continue
        for target, q in t.distribution:
            todo.append((target, p * q))
    return total


def oracle_distances(tree: RunTree, target: Sequence[Record]) -> dict[str, Fraction]:
    """rho from each state's saturated knowledge to ``target``; states with
    no comparable knowledge are absent."""
    target = list(target)
    if not target:
        raise RunError("oracle distances need a nonempty target")
    out = {}
    for s in tree.non_fail():
        if s.saturated:
            d = rho(s.saturated, target, skip_uncomparable=True)
            if d is not None:
                out[s.id] = d
    return out
