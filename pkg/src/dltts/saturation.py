"""Knowledge tags, ground relational deduction and policy consistency.

Saturation closes a tag under a declared, finite set of relational rules
evaluated against the tag and a set of external databases. Rules are
stratified: aggregates, differences and arithmetic bounds only read
relations that are complete in lower strata, which makes the fixpoint
independent of rule order.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, ClassVar, Iterable, Mapping, Sequence

from .model import (
    Database,
    Header,
    HeaderClass,
    IntInterval,
    ModelError,
    PolicyAtom,
    Record,
    Schema,
    Value,
    bounds,
    disjoint,
    entails,
    exact_number,
    meet,
    within,
)

if TYPE_CHECKING:
    from .mechanisms import FiniteMechanism

DEPTH_CAP = 32
FACT_CEILING = 10_000

ANSWERED = "answered"
DEDUCED = "deduced"


class SaturationError(ModelError):
    pass


class SaturationOverflow(SaturationError):
    """The fixpoint did not settle within the configured bounds."""


def _sorted(rs: Iterable[Record]) -> list[Record]:
    return sorted(rs, key=Record.sort_key)


@dataclass(frozen=True)
class Tag:
    """The adversary's knowledge: ground records marked answered or deduced."""

    answered: frozenset = frozenset()
    deduced: frozenset = frozenset()

    def __post_init__(self):
        answered = frozenset(self.answered)
        object.__setattr__(self, "answered", answered)
        object.__setattr__(self, "deduced", frozenset(self.deduced) - answered)

    @property
    def facts(self) -> frozenset:
        return self.answered | self.deduced

    def __iter__(self):
        return iter(_sorted(self.facts))

    def __len__(self):
        return len(self.answered) + len(self.deduced)

    def __contains__(self, r):
        return r in self.answered or r in self.deduced

    def __bool__(self):
        return bool(self.answered or self.deduced)

    def provenance(self, r: Record) -> str:
        if r in self.answered:
            return ANSWERED
        if r in self.deduced:
            return DEDUCED
        raise KeyError(r)

    def with_answers(self, rs: Iterable[Record]) -> "Tag":
        return Tag(self.answered | frozenset(rs), self.deduced)

    def with_deduced(self, rs: Iterable[Record]) -> "Tag":
        return Tag(self.answered, self.deduced | frozenset(rs))

    def relation(self, name: str) -> list[Record]:
        return _sorted(r for r in self.facts if r.schema.name == name)

    def issubset(self, other: "Tag") -> bool:
        return self.facts <= other.facts

    def delta(self, parent: "Tag") -> list[Record]:
        return _sorted(self.facts - parent.facts)


# rules ----------------------------------------------------------------------


class _Env:
    """Relation name -> (schema, records) view over a tag plus externals."""

    def __init__(self, facts: Iterable[Record], externals: Mapping[str, Database]):
        self.schemas: dict[str, Schema] = {}
        self.rows: dict[str, set] = defaultdict(set)
        self.externals = set(externals)
        for db in externals.values():
            self.schemas[db.name] = db.schema
            self.rows[db.name].update(db.rows)
        for r in facts:
            self.add(r)

    def add(self, r: Record) -> bool:
        name = r.schema.name
        known = self.schemas.setdefault(name, r.schema)
        if known != r.schema:
            raise SaturationError(f"relation {name!r} receives records of two different schemas")
        if r in self.rows[name]:
            return False
        self.rows[name].add(r)
        return True

    def get(self, name: str) -> tuple[Schema | None, list[Record]]:
        return self.schemas.get(name), _sorted(self.rows.get(name, ()))

    def fact(self, name: str, header: str) -> Value | None:
        """The cell of a single-record relation; None if absent or ambiguous."""
        schema, rows = self.get(name)
        if schema is None or len(rows) != 1:
            return None
        return rows[0][header]


def _keep(r: Record, where: Mapping[str, Value], exclude: Mapping[str, Value]) -> bool:
    return all(within(r[h], v) for h, v in where.items()) and all(
        disjoint(r[h], v) for h, v in exclude.items()
    )


@dataclass(frozen=True)
class Select:
    """Rows whose cells lie within ``where`` and are disjoint from ``exclude``."""

    source: str
    into: str
    where: Mapping[str, Value] = field(default_factory=dict)
    exclude: Mapping[str, Value] = field(default_factory=dict)
    monotone: ClassVar[bool] = True

    def sources(self):
        return (self.source,)

    def apply(self, env: _Env) -> list[Record]:
        schema, rows = env.get(self.source)
        if schema is None:
            return []
        out = schema.renamed(self.into)
        return [Record(out, r.values) for r in rows if _keep(r, self.where, self.exclude)]


@dataclass(frozen=True)
class Project:
    source: str
    into: str
    headers: tuple[str, ...]
    monotone: ClassVar[bool] = True

    def sources(self):
        return (self.source,)

    def apply(self, env: _Env) -> list[Record]:
        schema, rows = env.get(self.source)
        if schema is None:
            return []
        return [r.project(self.headers, self.into) for r in rows]


@dataclass(frozen=True)
class Join:
    """Natural join in which key cells unify by ``meet`` instead of equality.

    A published age ``[40,49]`` joins with a known age ``46`` and yields
    ``46``; an ailment ``Viral-Infection`` joins with ``CoVid`` and yields
    ``CoVid``. Shared headers outside ``on`` keep the left cell.
    """

    left: str
    right: str
    into: str
    on: tuple[str, ...] | None = None
    monotone: ClassVar[bool] = True

    def sources(self):
        return (self.left, self.right)

    def apply(self, env: _Env) -> list[Record]:
        ls, lrows = env.get(self.left)
        rs, rrows = env.get(self.right)
        if ls is None or rs is None:
            return []
        shared = [h for h in ls.names if h in rs.names]
        keys = list(self.on) if self.on is not None else shared
        for k in keys:
            if k not in shared:
                raise SaturationError(f"join key {k!r} is not shared by {self.left!r} and {self.right!r}")
            if not ls.header(k).same_type(rs.header(k)):
                raise SaturationError(f"join key {k!r} has different types in {self.left!r} and {self.right!r}")
        extra = [h for h in rs.headers if h.name not in ls.names]
        out = Schema(self.into, ls.headers + tuple(extra), min(ls.dmax, rs.dmax))
        result = []
        for t in lrows:
            for u in rrows:
                cells = dict(t.items())
                for k in keys:
                    m = meet(t[k], u[k])
                    if m is None:
                        break
                    cells[k] = m
                else:
                    values = [cells[h] for h in ls.names] + [u[h.name] for h in extra]
                    result.append(Record(out, tuple(values)))
        return result


@dataclass(frozen=True)
class Union:
    inputs: tuple[str, ...]
    into: str
    monotone: ClassVar[bool] = True

    def sources(self):
        return tuple(self.inputs)

    def apply(self, env: _Env) -> list[Record]:
        out = None
        result = []
        for name in self.inputs:
            schema, rows = env.get(name)
            if schema is None:
                continue
            if out is None:
                out = schema.renamed(self.into)
            elif set(schema.names) != set(out.names):
                raise SaturationError(f"union of {self.inputs} needs equal header sets")
            result.extend(Record(out, tuple(r[h] for h in out.names)) for r in rows)
        return result


@dataclass(frozen=True)
class Difference:
    left: str
    right: str
    into: str
    monotone: ClassVar[bool] = False

    def sources(self):
        return (self.left, self.right)

    def apply(self, env: _Env) -> list[Record]:
        ls, lrows = env.get(self.left)
        if ls is None:
            return []
        rs, rrows = env.get(self.right)
        gone = set()
        if rs is not None:
            if set(rs.names) != set(ls.names):
                raise SaturationError(f"difference of {self.left!r} and {self.right!r} needs equal header sets")
            gone = {tuple(r[h] for h in ls.names) for r in rrows}
        out = ls.renamed(self.into)
        return [Record(out, r.values) for r in lrows if r.values not in gone]


COUNT = "COUNT"
SUM = "SUM"


@dataclass(frozen=True)
class Aggregate:
    """A one-record relation holding COUNT of rows, or SUM of the known
    (single-valued) cells of ``header``; masked cells are not summed."""

    source: str
    into: str
    op: str
    header: str | None = None
    result_header: str | None = None
    where: Mapping[str, Value] = field(default_factory=dict)
    exclude: Mapping[str, Value] = field(default_factory=dict)
    monotone: ClassVar[bool] = False

    def __post_init__(self):
        if self.op not in (COUNT, SUM):
            raise SaturationError(f"unsupported aggregate {self.op!r}")
        if self.op == SUM and self.header is None:
            raise SaturationError("SUM needs a header")

    def sources(self):
        return (self.source,)

    def apply(self, env: _Env) -> list[Record]:
        schema, rows = env.get(self.source)
        if schema is None:
            return []
        rows = [r for r in rows if _keep(r, self.where, self.exclude)]
        if self.op == COUNT:
            total = Fraction(len(rows))
        else:
            cells = [exact_number(r[self.header]) for r in rows]
            total = sum((c for c in cells if c is not None), Fraction(0))
        if total.denominator != 1:
            raise SaturationError(f"{self.op} over {self.source!r} is not an integer")
        name = self.result_header or self.op.capitalize()
        out = Schema(self.into, (Header(name, HeaderClass.NUMERVAL),), schema.dmax)
        return [Record(out, (IntInterval.point(total),))]


@dataclass(frozen=True)
class ArithmeticBound:
    """Attribute a residual ``minuend - subtrahend`` to the one row of
    ``source`` whose ``header`` cell is not a single known number.

    ``minuend`` and ``subtrahend`` name one-record relations and a header,
    e.g. a published minimum total and a SUM over known balances. When
    ``guard`` is given, its two facts must be equal (e.g. a COUNT of answered
    rows against a published number of clients). An upper bound sitting at
    its schema's ceiling is open-ended and maps to the target's ceiling.
    """

    source: str
    into: str
    header: str
    minuend: tuple[str, str]
    subtrahend: tuple[str, str]
    guard: tuple[tuple[str, str], tuple[str, str]] | None = None
    monotone: ClassVar[bool] = False

    def sources(self):
        names = [self.source, self.minuend[0], self.subtrahend[0]]
        if self.guard is not None:
            names += [self.guard[0][0], self.guard[1][0]]
        return tuple(names)

    def apply(self, env: _Env) -> list[Record]:
        schema, rows = env.get(self.source)
        a, b = env.fact(*self.minuend), env.fact(*self.subtrahend)
        if schema is None or a is None or b is None:
            return []
        if self.guard is not None:
            g1, g2 = env.fact(*self.guard[0]), env.fact(*self.guard[1])
            if g1 is None or g2 is None or g1 != g2:
                return []
        unknown = [r for r in rows if exact_number(r[self.header]) is None]
        ba, bb = bounds(a), bounds(b)
        if len(unknown) != 1 or ba is None or bb is None:
            return []
        minuend_schema = env.schemas[self.minuend[0]]
        lo = ba[0] - bb[1]
        hi = schema.dmax if ba[1] >= minuend_schema.dmax else min(ba[1] - bb[0], schema.dmax)
        lo, hi = _ceil(lo), _floor(hi)
        if lo > hi:
            return []
        target = unknown[0]
        cell = meet(target[self.header], IntInterval(lo, hi))
        if cell is None:
            return []
        out = schema.renamed(self.into)
        return [Record(out, target.replace(**{self.header: cell}).values)]


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


Rule = Select | Project | Join | Union | Difference | Aggregate | ArithmeticBound


# fixpoint ------------------------------------------------------------------


def stratify(rules: Sequence[Rule], externals: Iterable[str] = ()) -> list[list[Rule]]:
    """Group rules into evaluation strata; raises on recursion through a
    non-monotone rule or on rules writing into an external database."""
    externals = set(externals)
    for r in rules:
        if r.into in externals:
            raise SaturationError(f"rule writes into external database {r.into!r}")
    defined = {r.into for r in rules}
    level = {name: 0 for name in defined}
    bound = len(defined) + 1
    changed = True
    while changed:
        changed = False
        for r in rules:
            need = max(
                (level.get(s, 0) + (0 if r.monotone else 1) for s in r.sources()),
                default=0,
            )
            if need > level[r.into]:
                if need > bound:
                    raise SaturationError(f"rules are not stratifiable (recursion through {r.into!r})")
                level[r.into] = need
                changed = True
    strata: dict[int, list[Rule]] = defaultdict(list)
    for r in rules:
        strata[level[r.into]].append(r)
    return [strata[k] for k in sorted(strata)]


def _externals(externals) -> dict[str, Database]:
    if externals is None:
        return {}
    if isinstance(externals, Mapping):
        return {db.name: db for db in externals.values()}
    return {db.name: db for db in externals}


def saturate(
    tag: Tag,
    externals: Mapping[str, Database] | Iterable[Database] | None = None,
    rules: Sequence[Rule] = (),
    *,
    depth_cap: int = DEPTH_CAP,
    fact_ceiling: int = FACT_CEILING,
) -> Tag:
    """Least fixpoint of ``rules`` over ``tag`` and ``externals``.

    Derived records join the tag marked deduced. Raises
    ``SaturationOverflow`` when a stratum needs more than ``depth_cap``
    rounds or more than ``fact_ceiling`` records are derived.
    """
    exts = _externals(externals)
    env = _Env(tag.facts, exts)
    derived: set[Record] = set()
    for stratum in stratify(rules, exts):
        for _ in range(depth_cap + 1):
            new = []
            for rule in stratum:
                for r in rule.apply(env):
                    if env.add(r):
                        new.append(r)
            if not new:
                break
            derived.update(new)
            if len(derived) > fact_ceiling:
                raise SaturationOverflow(f"saturation derived more than {fact_ceiling} records")
        else:
            raise SaturationOverflow(f"saturation did not settle within {depth_cap} rounds")
    return tag.with_deduced(derived - tag.facts)


def identify_outputs(mech: "FiniteMechanism", epsilon: float) -> dict:
    """Map every output to the representative of its class under
    epsilon-indistinguishability, closed transitively."""
    from .mechanisms import check_output_indist

    outputs = list(mech.outputs)
    parent = {o: o for o in outputs}

    def find(o):
        while parent[o] != o:
            parent[o] = parent[parent[o]]
            o = parent[o]
        return o

    for i, a in enumerate(outputs):
        for b in outputs[i + 1:]:
            if check_output_indist(mech, a, b, epsilon):
                ra, rb = find(a), find(b)
                if ra != rb:
                    first, second = sorted((ra, rb), key=outputs.index)
                    parent[second] = first
    return {o: find(o) for o in outputs}


def epsilon_saturate(
    tag: Tag,
    externals=None,
    rules: Sequence[Rule] = (),
    mech: "FiniteMechanism | None" = None,
    epsilon: float = 0.0,
    **kw,
) -> Tag:
    """Saturation up to epsilon-indistinguishability of answers.

    Answered records that are outputs of ``mech`` are replaced by their class
    representative before saturating, so tags differing only in
    indistinguishable answers saturate to the same tag.
    """
    if mech is None:
        return saturate(tag, externals, rules, **kw)
    rep = identify_outputs(mech, epsilon)
    answered = frozenset(rep.get(r, r) if _hashable_in(r, rep) else r for r in tag.answered)
    return saturate(Tag(answered, tag.deduced), externals, rules, **kw)


def _hashable_in(r, mapping) -> bool:
    try:
        return r in mapping
    except TypeError:
        return False


@dataclass(frozen=True)
class Verdict:
    violated: bool
    witness: Record | None = None
    atom: PolicyAtom | None = None

    def __str__(self):
        return f"violated by {self.witness} against {self.atom}" if self.violated else "consistent"


CONSISTENT = Verdict(False)


def check_consistency(tag: Tag, policy: Iterable[PolicyAtom]) -> Verdict:
    """Violated iff some record of the tag entails some policy pattern."""
    policy = list(policy)
    for atom in policy:
        # report a record of the pattern's own schema when one entails it
        hits = [r for r in tag if entails(r, atom)]
        if hits:
            exact = [r for r in hits if set(r.schema.names) == set(atom.pattern.schema.names)]
            return Verdict(True, (exact or hits)[0], atom)
    return CONSISTENT
