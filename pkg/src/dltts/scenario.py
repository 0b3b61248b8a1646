"""Scenario files: a YAML document describing schemas, tables, policy,
deduction rules, the querying script and an optional mechanism.

Sections: ``options``, ``taxonomy``, ``schema``, ``database``, ``external``,
``policy``, ``targets``, ``rules``, ``script``, ``mechanism``, ``distance``,
``compare``. See ``scenarios/`` for complete examples.

Cell syntax depends on the header class. ``#``, ``*``, ``$`` and ``★`` are
wildcards. Intervals are written ``[40,50)``, ``[40,50]``, ``[40-50[`` or
``>=420`` (up to the schema ceiling); a bare range ``40-50`` is read
half-open or closed according to ``options.interval_closure``.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import saturation as sat
from .mechanisms import DISCRETE, INPUTS, KINDS, NOISE, OUTPUTS, Adjacency, FiniteMechanism, bounded_noise
from .model import (
    DEFAULT_DMAX,
    AttributeGroup,
    Database,
    Header,
    HeaderClass,
    IntInterval,
    ModelError,
    NominalSet,
    Number,
    PolicyAtom,
    Record,
    Schema,
    TaxNode,
    Value,
    Wildcard,
)
from .system import Branch, Dltts, ScriptStep
from .taxonomy import Taxonomy, TaxonomyError

WILDCARDS = {"#", "*", "$", "★", "⋆"}
HALF_OPEN = "half-open"
CLOSED = "closed"
DEFAULT_TARGET = "policy"


class ScenarioError(ValueError):
    """A scenario that does not parse or violates an invariant."""


def parse_fraction(x, what="number") -> Fraction:
    if isinstance(x, bool):
        raise ScenarioError(f"{what}: expected a number, got {x!r}")
    try:
        if isinstance(x, float):
            return Fraction(str(x))
        return Fraction(str(x).strip())
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"{what}: cannot read {x!r} as a rational number") from None


_BRACKETED = re.compile(r"^([\[\(\]])\s*(-?\d+)\s*[,;-]\s*(-?\d+)\s*([\]\)\[])$")
_BARE = re.compile(r"^(-?\d+)\s*-\s*(-?\d+)$")
_BOUND = re.compile(r"^(>=|≥|<=|≤)\s*(-?\d+)$")


def parse_interval(text: str, dmax: int, closure: str = HALF_OPEN) -> IntInterval | None:
    text = text.strip()
    m = _BRACKETED.match(text)
    if m:
        left, lo, hi, right = m.groups()
        return IntInterval(int(lo), int(hi), lo_closed=left == "[", hi_closed=right == "]")
    m = _BARE.match(text)
    if m:
        return IntInterval(int(m.group(1)), int(m.group(2)), hi_closed=closure == CLOSED)
    m = _BOUND.match(text)
    if m:
        op, c = m.groups()
        if op in (">=", "≥"):
            return IntInterval(int(c), dmax)
        return IntInterval(-dmax, int(c))
    return None


def parse_cell(header: Header, raw, dmax: int = DEFAULT_DMAX, closure: str = HALF_OPEN) -> Value:
    if isinstance(raw, bool):
        raw = str(raw)
    if isinstance(raw, str) and raw.strip() in WILDCARDS:
        return Wildcard(raw.strip())
    cls = header.cls
    try:
        if cls is HeaderClass.NOMINAL:
            if isinstance(raw, (list, tuple, set)):
                return NominalSet(frozenset(str(a) for a in raw))
            s = str(raw).strip()
            if s.startswith("{") and s.endswith("}"):
                return NominalSet(frozenset(a.strip() for a in s[1:-1].split(",") if a.strip()))
            return NominalSet.of(s)
        if cls is HeaderClass.TAXORAL:
            return TaxNode(header.taxonomy, str(raw).strip())
        if isinstance(raw, str):
            iv = parse_interval(raw, dmax, closure)
            if iv is not None:
                return iv
        n = parse_fraction(raw, f"header {header.name!r}")
        if cls is HeaderClass.NUMERVAL:
            if n.denominator != 1:
                raise ScenarioError(f"header {header.name!r}: {raw!r} is not an integer")
            return IntInterval.point(n)
        return Number(n)
    except (ModelError, TaxonomyError) as e:
        raise ScenarioError(f"header {header.name!r}: {e}") from None


@dataclass
class Options:
    dmax: int = DEFAULT_DMAX
    interval_closure: str = HALF_OPEN
    epsilon: float | None = None
    noise: dict | None = None
    depth_cap: int = sat.DEPTH_CAP
    fact_ceiling: int = sat.FACT_CEILING


@dataclass
class MechanismSpec:
    mechanism: FiniteMechanism
    over: str = INPUTS
    restrict: tuple | None = None
    data: dict = field(default_factory=dict)  # label -> Record / Database for adjacency
    adjacency: tuple[str, ...] = (DISCRETE,)

    def adjacency_for(self, kind: str) -> Adjacency:
        return Adjacency(kind, data=self.data)

    def over_records(self) -> FiniteMechanism:
        """The mechanism with labels replaced by the records they stand for,
        so answered records can be identified up to indistinguishability."""
        def lab(x):
            d = self.data.get(x)
            return d if isinstance(d, Record) else x

        m = self.mechanism
        return FiniteMechanism(
            tuple(lab(v) for v in m.inputs),
            tuple(lab(a) for a in m.outputs),
            {lab(v): {lab(a): p for a, p in row.items()} for v, row in m.table.items()},
        )


@dataclass
class Scenario:
    path: Path | None
    options: Options
    taxonomies: dict[str, Taxonomy]
    schemas: dict[str, Schema]
    databases: dict[str, Database]
    externals: dict[str, Database]
    policy: list[PolicyAtom]
    targets: dict[str, list[Record]]
    rules: list
    script: list[ScriptStep]
    mechanism: MechanismSpec | None = None
    distance_candidates: list[tuple[str, Record]] = field(default_factory=list)
    compare: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.path.name if self.path else "<memory>"

    def target(self, name: str | None = None) -> list[Record]:
        name = name or DEFAULT_TARGET
        if name not in self.targets:
            raise ScenarioError(f"undeclared target {name!r} (declared: {', '.join(sorted(self.targets))})")
        return self.targets[name]

    def engine(self, target: str | None = None, epsilon: float | None = None, use_mechanism: bool = False) -> Dltts:
        eps = self.options.epsilon if epsilon is None else epsilon
        mech = self.mechanism.over_records() if (use_mechanism or eps is not None) and self.mechanism else None
        return Dltts(
            externals=self.externals,
            rules=self.rules,
            policy=self.policy,
            target=self.target(target) if self.targets else (),
            mechanism=mech,
            epsilon=eps or 0.0,
            depth_cap=self.options.depth_cap,
            fact_ceiling=self.options.fact_ceiling,
        )

    def noisy_script(self, seed) -> list[ScriptStep]:
        """The script with bounded noise applied to numerical answer cells."""
        noise = self.options.noise
        if not noise:
            return self.script
        rng = np.random.default_rng(seed)
        steps = []
        for step in self.script:
            branches = []
            for b in step.branches:
                recs = []
                for r in b.records:
                    cells = {}
                    for h, v in r.items():
                        if r.schema.header(h).cls is HeaderClass.NUMERICAL and isinstance(v, Number):
                            cells[h] = bounded_noise(
                                v, noise["mechanism"], noise["scale"], noise["domain"], rng,
                                mode=noise.get("mode", "resample"),
                            )
                    recs.append(r.replace(**cells) if cells else r)
                branches.append(replace(b, records=tuple(recs)))
            steps.append(ScriptStep(step.action, tuple(branches)))
        return steps


# loading -------------------------------------------------------------------


def load_scenario(path, interval_closure: str | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from None
    return loads(text, path, interval_closure)


def loads(text: str, path: Path | None = None, interval_closure: str | None = None) -> Scenario:
    where = str(path) if path else "<scenario>"
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f"{where}:{mark.line + 1}:{mark.column + 1}" if mark else where
        problem = getattr(e, "problem", None) or str(e)
        raise ScenarioError(f"{loc}: parse error: {problem}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: a scenario must be a mapping of sections")
    try:
        return _Loader(doc, path, interval_closure).build()
    except ScenarioError as e:
        raise ScenarioError(f"{where}: {e}") from None
    except (ModelError, TaxonomyError) as e:
        raise ScenarioError(f"{where}: invalid scenario: {e}") from None


SECTIONS = {
    "options", "taxonomy", "schema", "database", "external", "policy", "targets",
    "rules", "script", "mechanism", "distance", "compare",
}


class _Loader:
    def __init__(self, doc: dict, path: Path | None, closure: str | None):
        unknown = set(doc) - SECTIONS
        if unknown:
            raise ScenarioError(f"unknown sections: {', '.join(sorted(unknown))}")
        self.doc = doc
        self.base = path.parent if path else Path(".")
        self.path = path
        self.options = self._options(doc.get("options") or {})
        if closure is not None:
            self.options.interval_closure = closure
        if self.options.interval_closure not in (HALF_OPEN, CLOSED):
            raise ScenarioError(f"interval closure must be {HALF_OPEN!r} or {CLOSED!r}")
        self.relations: dict[str, Schema] = {}
        self.header_types: dict[str, Header] = {}

    def build(self) -> Scenario:
        doc = self.doc
        taxonomies = {
            str(name): Taxonomy.from_nested(str(name), tree)
            for name, tree in (doc.get("taxonomy") or {}).items()
        }
        self.taxonomies = taxonomies
        schemas = {str(n): self._schema(str(n), spec) for n, spec in (doc.get("schema") or {}).items()}
        self.schemas = schemas
        for s in schemas.values():
            self._register(s)
        databases = {str(n): self._database(str(n), spec) for n, spec in (doc.get("database") or {}).items()}
        self.databases = databases
        externals = {str(n): self._database(str(n), spec) for n, spec in (doc.get("external") or {}).items()}
        self.externals = externals
        clash = set(databases) & set(externals)
        if clash:
            raise ScenarioError(f"names used both as database and external: {sorted(clash)}")
        policy = [PolicyAtom(self._record(spec, "policy")) for spec in doc.get("policy") or []]
        targets = {DEFAULT_TARGET: [a.pattern for a in policy]} if policy else {}
        for name, specs in (doc.get("targets") or {}).items():
            targets[str(name)] = [self._record(s, f"target {name}") for s in _listify(specs)]
        rules = [self._rule(i, spec) for i, spec in enumerate(doc.get("rules") or [])]
        self._check_rule_sources(rules, externals)
        script = [self._step(i, spec) for i, spec in enumerate(doc.get("script") or [])]
        mech = self._mechanism(doc["mechanism"]) if doc.get("mechanism") else None
        dist = doc.get("distance") or {}
        candidates = [(str(c), self._record(c, "distance")) for c in dist.get("candidates", [])]
        if not candidates:
            candidates = [
                (f"{db.name}/{rid}" if db.ids else f"{db.name}[{i}]", r)
                for db in databases.values()
                for i, (rid, r) in enumerate(zip(db.ids or [None] * len(db), db.rows))
            ]
        scen = Scenario(
            self.path, self.options, taxonomies, schemas, databases, externals, policy,
            targets, rules, script, mech, candidates, dict(doc.get("compare") or {}),
        )
        self._check_scales(scen)
        return scen

    # pieces ----------------------------------------------------------------

    def _options(self, o: dict) -> Options:
        opts = Options()
        if "dmax" in o:
            opts.dmax = int(o["dmax"])
        if "interval_closure" in o:
            opts.interval_closure = str(o["interval_closure"])
        if o.get("epsilon") is not None:
            opts.epsilon = float(o["epsilon"])
        for key in ("depth_cap", "fact_ceiling"):
            if key in o:
                setattr(opts, key, int(o[key]))
        if o.get("noise"):
            n = dict(o["noise"])
            if n.get("mechanism") not in NOISE:
                raise ScenarioError(f"noise mechanism must be one of {NOISE}")
            n["scale"] = float(n.get("scale", 1))
            dom = parse_interval(str(n.get("domain", "")), opts.dmax, CLOSED)
            if dom is None:
                raise ScenarioError("noise needs an integer interval domain")
            n["domain"] = dom
            opts.noise = n
        return opts

    def _schema(self, name: str, spec) -> Schema:
        if isinstance(spec, list):
            spec = {"headers": spec}
        headers = []
        for h in spec.get("headers") or []:
            if isinstance(h, dict) and "name" not in h and len(h) == 1:
                (hname, hspec), = h.items()
                h = dict(hspec or {}, name=hname)
            try:
                cls = HeaderClass(str(h.get("class", "nominal")).lower())
                group = AttributeGroup(str(h.get("group", "quasi-identifier")).lower())
            except ValueError as e:
                raise ScenarioError(f"schema {name!r}: {e}") from None
            tax = None
            if cls is HeaderClass.TAXORAL:
                tname = str(h.get("taxonomy", h["name"]))
                if tname not in self.taxonomies:
                    raise ScenarioError(f"schema {name!r}: undeclared taxonomy {tname!r}")
                tax = self.taxonomies[tname]
            scale = parse_fraction(h["scale"], "scale") if h.get("scale") is not None else None
            try:
                headers.append(Header(str(h["name"]), cls, group, tax, scale))
            except ModelError as e:
                raise ScenarioError(f"schema {name!r}: {e}") from None
        return Schema(name, tuple(headers), int(spec.get("dmax", self.options.dmax)))

    def _register(self, schema: Schema) -> None:
        self.relations[schema.name] = schema
        for h in schema.headers:
            known = self.header_types.setdefault(h.name, h)
            if not known.same_type(h):
                raise ScenarioError(f"header {h.name!r} is declared with two different classes")

    def _database(self, name: str, spec) -> Database:
        sname = str(spec.get("schema", name))
        if sname not in self.schemas:
            raise ScenarioError(f"database {name!r}: undeclared schema {sname!r}")
        schema = self.schemas[sname].renamed(name)
        self._register(schema)
        ids, rows = [], []
        if "csv" in spec:
            ids, rows = self._csv(self.base / spec["csv"], schema)
        raw = spec.get("rows") or []
        items = raw.items() if isinstance(raw, dict) else enumerate(raw)
        named = isinstance(raw, dict)
        for rid, cells in items:
            ids.append(str(rid) if named else None)
            rows.append(self._cells(schema, cells, f"database {name!r} row {rid}"))
        use_ids = all(i is not None for i in ids) and ids
        try:
            return Database(schema, tuple(rows), tuple(ids) if use_ids else None)
        except ModelError as e:
            raise ScenarioError(str(e)) from None

    def _csv(self, path: Path, schema: Schema):
        try:
            with open(path, newline="", encoding="utf-8") as f:
                reader = list(csv.reader(f))
        except OSError as e:
            raise ScenarioError(f"{path}: {e.strerror}") from None
        if not reader:
            raise ScenarioError(f"{path}: empty CSV file")
        head = [c.strip() for c in reader[0]]
        has_id = head and head[0] == "id"
        if (head[1:] if has_id else head) != list(schema.names):
            raise ScenarioError(f"{path}: header row {head} does not match schema {list(schema.names)}")
        ids, rows = [], []
        for lineno, line in enumerate(reader[1:], start=2):
            if not line:
                continue
            if has_id:
                ids.append(line[0])
                line = line[1:]
            else:
                ids.append(None)
            rows.append(self._cells(schema, line, f"{path}:{lineno}"))
        return ids, rows

    def _cells(self, schema: Schema, cells, what: str) -> Record:
        if isinstance(cells, dict):
            cells = [cells.get(h, "#") for h in schema.names]
        if not isinstance(cells, (list, tuple)) or len(cells) != len(schema):
            raise ScenarioError(f"{what}: expected {len(schema)} cells for {list(schema.names)}")
        values = tuple(parse_cell(h, c, schema.dmax, self.options.interval_closure) for h, c in zip(schema.headers, cells))
        return Record(schema, values)

    def _relation_schema(self, name: str) -> Schema:
        if name in self.relations:
            return self.relations[name]
        raise ScenarioError(f"undeclared schema or database {name!r}")

    def _record(self, spec, what: str) -> Record:
        """A record: ``db/row-id`` reference or ``{schema: s, cells: [...]}``."""
        if isinstance(spec, str):
            db, _, rid = spec.partition("/")
            source = self.databases.get(db) or self.externals.get(db)
            if source is None or not rid:
                raise ScenarioError(f"{what}: cannot resolve record reference {spec!r}")
            try:
                return source.row(rid)
            except ModelError as e:
                raise ScenarioError(f"{what}: {e}") from None
        if not isinstance(spec, dict) or "schema" not in spec:
            raise ScenarioError(f"{what}: a record needs 'schema' and 'cells' (or a db/id reference)")
        schema = self._relation_schema(str(spec["schema"]))
        return self._cells(schema, spec.get("cells", spec.get("values")), what)

    def _value(self, header: str, raw, what: str) -> Value:
        if header not in self.header_types:
            raise ScenarioError(f"{what}: unknown header {header!r}")
        return parse_cell(self.header_types[header], raw, self.options.dmax, self.options.interval_closure)

    def _conditions(self, spec, what) -> dict:
        return {str(h): self._value(str(h), v, what) for h, v in (spec or {}).items()}

    def _rule(self, i: int, spec: dict):
        what = f"rules[{i}]"
        op = str(spec.get("op", "")).lower()
        try:
            into = str(spec["into"])
            if op == "select":
                return sat.Select(str(spec["source"]), into, self._conditions(spec.get("where"), what),
                                  self._conditions(spec.get("exclude"), what))
            if op == "project":
                return sat.Project(str(spec["source"]), into, tuple(str(h) for h in spec["headers"]))
            if op == "join":
                on = tuple(str(h) for h in spec["on"]) if spec.get("on") else None
                return sat.Join(str(spec["left"]), str(spec["right"]), into, on)
            if op == "union":
                return sat.Union(tuple(str(s) for s in spec["sources"]), into)
            if op == "difference":
                return sat.Difference(str(spec["left"]), str(spec["right"]), into)
            if op in ("count", "sum", "aggregate"):
                agg = str(spec.get("function", op)).upper()
                result = str(spec.get("result", agg.capitalize()))
                self.header_types.setdefault(result, Header(result, HeaderClass.NUMERVAL))
                return sat.Aggregate(str(spec["source"]), into, agg, spec.get("header"), result,
                                     self._conditions(spec.get("where"), what),
                                     self._conditions(spec.get("exclude"), what))
            if op == "bound":
                guard = None
                if spec.get("guard"):
                    g = spec["guard"]
                    guard = (_ref(g[0], what), _ref(g[1], what))
                return sat.ArithmeticBound(str(spec["source"]), into, str(spec["header"]),
                                           _ref(spec["minuend"], what), _ref(spec["subtrahend"], what), guard)
        except KeyError as e:
            raise ScenarioError(f"{what}: missing field {e.args[0]!r}") from None
        except sat.SaturationError as e:
            raise ScenarioError(f"{what}: {e}") from None
        raise ScenarioError(f"{what}: unknown rule op {op!r}")

    def _check_rule_sources(self, rules, externals) -> None:
        known = set(self.relations) | {r.into for r in rules}
        for i, r in enumerate(rules):
            for s in r.sources():
                if s not in known:
                    raise ScenarioError(f"rules[{i}]: undeclared source {s!r}")
        try:
            sat.stratify(rules, externals)
        except sat.SaturationError as e:
            raise ScenarioError(str(e)) from None

    def _step(self, i: int, spec: dict) -> ScriptStep:
        what = f"script[{i}]"
        branches = []
        for j, b in enumerate(spec.get("branches") or []):
            p = parse_fraction(b.get("p", b.get("probability")), f"{what}.branches[{j}] probability")
            recs = tuple(self._record(r, f"{what}.branches[{j}]") for r in _listify(b.get("rows")))
            branches.append(Branch(recs, p, str(b["label"]) if b.get("label") is not None else None))
        total = sum((b.probability for b in branches), Fraction(0))
        if not branches or total != 1:
            raise ScenarioError(f"{what}: branch probabilities sum to {total}, not 1")
        return ScriptStep(str(spec.get("action", f"q{i + 1}")), tuple(branches))

    def _mechanism(self, spec: dict) -> MechanismSpec:
        def labels(section):
            raw = spec.get(section)
            if raw is None:
                raise ScenarioError(f"mechanism: missing {section!r}")
            if isinstance(raw, dict):
                return [str(k) for k in raw], {str(k): self._data(v) for k, v in raw.items() if v is not None}
            return [str(x) for x in raw], {}

        inputs, idata = labels("inputs")
        outputs, odata = labels("outputs")
        table = {}
        for v, row in (spec.get("table") or {}).items():
            table[str(v)] = {str(a): parse_fraction(p, f"mechanism row {v}") for a, p in (row or {}).items()}
        try:
            mech = FiniteMechanism(tuple(inputs), tuple(outputs), table)
        except ValueError as e:
            raise ScenarioError(f"mechanism: {e}") from None
        over = str(spec.get("over", INPUTS))
        if over not in (INPUTS, OUTPUTS):
            raise ScenarioError(f"mechanism: 'over' must be {INPUTS!r} or {OUTPUTS!r}")
        restrict = tuple(str(x) for x in spec["restrict"]) if spec.get("restrict") else None
        adjacency = tuple(str(a) for a in _listify(spec.get("adjacency", [DISCRETE])))
        for a in adjacency:
            if a not in KINDS:
                raise ScenarioError(f"mechanism: unknown adjacency {a!r}")
        return MechanismSpec(mech, over, restrict, {**idata, **odata}, adjacency)

    def _data(self, ref):
        """Mechanism label data: a database name, a record, or a list of records."""
        if isinstance(ref, str) and "/" not in ref:
            db = self.databases.get(ref) or self.externals.get(ref)
            if db is None:
                raise ScenarioError(f"mechanism: unknown database {ref!r}")
            return db
        if isinstance(ref, list):
            return tuple(self._record(r, "mechanism") for r in ref)
        return self._record(ref, "mechanism")

    def _check_scales(self, scen: Scenario) -> None:
        """Each numerical header's D must exceed every gap between its numbers."""
        seen: dict[str, list[Fraction]] = {}
        scale: dict[str, Fraction] = {}

        def collect(r: Record):
            for h in r.schema.headers:
                v = r[h.name]
                if h.cls is HeaderClass.NUMERICAL and isinstance(v, Number):
                    seen.setdefault(h.name, []).append(v.value)
                    scale[h.name] = h.scale

        for db in list(scen.databases.values()) + list(scen.externals.values()):
            for r in db.rows:
                collect(r)
        for step in scen.script:
            for b in step.branches:
                for r in b.records:
                    collect(r)
        for recs in scen.targets.values():
            for r in recs:
                collect(r)
        for h, xs in seen.items():
            gap = max(xs) - min(xs)
            if not gap < scale[h]:
                raise ScenarioError(
                    f"normalisation constant D={scale[h]} of header {h!r} does not exceed the observed gap {gap}"
                )


def _ref(x, what) -> tuple[str, str]:
    if isinstance(x, str) and "." in x:
        rel, _, h = x.partition(".")
        return rel, h
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return str(x[0]), str(x[1])
    raise ScenarioError(f"{what}: expected 'relation.header', got {x!r}")


def _listify(x) -> list:
    if x is None:
        return []
    return list(x) if isinstance(x, (list, tuple)) else [x]
