"""Typed cell values, schemas, records, databases and policy patterns.

Every cell denotes a set of ground values: a nominal set denotes its atoms,
an interval its integers, a number itself, a taxonomy node the subtree below
it, and a wildcard everything. Pattern matching (``within``) and join
unification (``meet``) are phrased over those denoted sets.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .taxonomy import Taxonomy

DEFAULT_DMAX = 10**6


class ModelError(ValueError):
    pass


class HeaderClass(enum.Enum):
    NOMINAL = "nominal"
    NUMERVAL = "numerval"
    NUMERICAL = "numerical"
    TAXORAL = "taxoral"


class AttributeGroup(enum.Enum):
    IDENTIFIER = "identifier"
    QUASI_IDENTIFIER = "quasi-identifier"
    SENSITIVE = "sensitive"


# values --------------------------------------------------------------------


@dataclass(frozen=True)
class NominalSet:
    atoms: frozenset

    def __post_init__(self):
        object.__setattr__(self, "atoms", frozenset(str(a) for a in self.atoms))
        if not self.atoms:
            raise ModelError("nominal set must be nonempty")

    @classmethod
    def of(cls, *atoms) -> "NominalSet":
        return cls(frozenset(atoms))

    def __str__(self):
        if len(self.atoms) == 1:
            return next(iter(self.atoms))
        return "{" + ", ".join(sorted(self.atoms)) + "}"


@dataclass(frozen=True)
class IntInterval:
    """A finite nonempty set of consecutive integers.

    Endpoint flags are folded into the bounds at construction, so
    ``IntInterval(40, 50, hi_closed=False) == IntInterval(40, 49)``.
    """

    lo: int
    hi: int
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo.denominator != 1 or hi.denominator != 1:
            raise ModelError(f"interval bounds must be integers: {self.lo}, {self.hi}")
        lo, hi = int(lo), int(hi)
        if not self.lo_closed:
            lo += 1
        if not self.hi_closed:
            hi -= 1
        if lo > hi:
            raise ModelError(f"interval [{self.lo}, {self.hi}] denotes no integer")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "lo_closed", True)
        object.__setattr__(self, "hi_closed", True)

    @classmethod
    def point(cls, a) -> "IntInterval":
        return cls(a, a)

    def __len__(self):
        return self.hi - self.lo + 1

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def __str__(self):
        return str(self.lo) if self.is_point else f"[{self.lo},{self.hi}]"


@dataclass(frozen=True)
class Number:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class TaxNode:
    taxonomy: Taxonomy
    label: str

    def __post_init__(self):
        if self.label not in self.taxonomy:
            raise ModelError(f"{self.label!r} is not a node of taxonomy {self.taxonomy.name!r}")

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class Wildcard:
    """A dummy constant; denotes every value. All wildcards are equal."""

    symbol: str = field(default="#", compare=False)

    def __str__(self):
        return self.symbol


Value = Union[NominalSet, IntInterval, Number, TaxNode, Wildcard]

LEGAL = {
    HeaderClass.NOMINAL: (NominalSet, Wildcard),
    HeaderClass.NUMERVAL: (IntInterval, Wildcard),
    HeaderClass.NUMERICAL: (Number, IntInterval, Wildcard),
    HeaderClass.TAXORAL: (TaxNode, Wildcard),
}


def _as_interval(v: Value) -> IntInterval | None:
    if isinstance(v, IntInterval):
        return v
    if isinstance(v, Number) and v.value.denominator == 1:
        return IntInterval.point(v.value)
    return None


def bounds(v: Value) -> tuple[Fraction, Fraction] | None:
    """Numeric lower/upper bounds of a number or interval cell."""
    if isinstance(v, Number):
        return v.value, v.value
    if isinstance(v, IntInterval):
        return Fraction(v.lo), Fraction(v.hi)
    return None


def exact_number(v: Value) -> Fraction | None:
    """The single number a cell denotes, if it denotes exactly one."""
    b = bounds(v)
    if b is not None and b[0] == b[1]:
        return b[0]
    return None


def within(a: Value, b: Value) -> bool:
    """Whether the set denoted by ``a`` is included in that denoted by ``b``."""
    if isinstance(b, Wildcard):
        return True
    if isinstance(a, Wildcard):
        return False
    if isinstance(a, NominalSet) and isinstance(b, NominalSet):
        return a.atoms <= b.atoms
    if isinstance(a, TaxNode) and isinstance(b, TaxNode):
        return a.taxonomy == b.taxonomy and b.taxonomy.is_ancestor(b.label, a.label)
    if isinstance(a, Number) and isinstance(b, Number):
        return a.value == b.value
    ia, ib = _as_interval(a), _as_interval(b)
    if ia is not None and ib is not None:
        return ib.lo <= ia.lo and ia.hi <= ib.hi
    return False


def disjoint(a: Value, b: Value) -> bool:
    return meet(a, b) is None


def meet(a: Value, b: Value) -> Value | None:
    """The most specific cell consistent with both, or None when they conflict."""
    if isinstance(a, Wildcard):
        return b
    if isinstance(b, Wildcard):
        return a
    if isinstance(a, NominalSet) and isinstance(b, NominalSet):
        common = a.atoms & b.atoms
        return NominalSet(common) if common else None
    if isinstance(a, TaxNode) and isinstance(b, TaxNode):
        if a.taxonomy != b.taxonomy:
            return None
        tax = a.taxonomy
        if tax.is_ancestor(a.label, b.label):
            return b
        if tax.is_ancestor(b.label, a.label):
            return a
        return None
    if isinstance(a, Number) and isinstance(b, Number):
        return a if a.value == b.value else None
    if isinstance(a, Number) or isinstance(b, Number):
        num, other = (a, b) if isinstance(a, Number) else (b, a)
        ob = bounds(other)
        if ob is not None and ob[0] <= num.value <= ob[1] and num.value.denominator == 1:
            return num
        return None
    if isinstance(a, IntInterval) and isinstance(b, IntInterval):
        lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
        return IntInterval(lo, hi) if lo <= hi else None
    return None


def sort_key(v: Value) -> tuple:
    if isinstance(v, Wildcard):
        return (0,)
    if isinstance(v, NominalSet):
        return (1, tuple(sorted(v.atoms)))
    if isinstance(v, IntInterval):
        return (2, v.lo, v.hi)
    if isinstance(v, Number):
        return (2, v.value, v.value)
    return (3, v.label)


# schemas and records -------------------------------------------------------


@dataclass(frozen=True)
class Header:
    name: str
    cls: HeaderClass
    group: AttributeGroup = AttributeGroup.QUASI_IDENTIFIER
    taxonomy: Taxonomy | None = None
    scale: Fraction | None = None  # normalisation constant D for numerical headers

    def __post_init__(self):
        if self.cls is HeaderClass.TAXORAL and self.taxonomy is None:
            raise ModelError(f"taxoral header {self.name!r} needs a taxonomy")
        if self.cls is HeaderClass.NUMERICAL:
            if self.scale is None or Fraction(self.scale) <= 0:
                raise ModelError(f"numerical header {self.name!r} needs a scale D > 0")
            object.__setattr__(self, "scale", Fraction(self.scale))

    def same_type(self, other: "Header") -> bool:
        return self.name == other.name and self.cls == other.cls and self.taxonomy == other.taxonomy


@dataclass(frozen=True)
class Schema:
    name: str
    headers: tuple[Header, ...]
    dmax: int = DEFAULT_DMAX  # ceiling used to encode open-ended bounds

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))
        names = [h.name for h in self.headers]
        if len(set(names)) != len(names):
            raise ModelError(f"schema {self.name!r} has duplicate header names")

    def __len__(self):
        return len(self.headers)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(h.name for h in self.headers)

    def header(self, name: str) -> Header:
        for h in self.headers:
            if h.name == name:
                return h
        raise ModelError(f"schema {self.name!r} has no header {name!r}")

    def index(self, name: str) -> int:
        return self.names.index(self.header(name).name)

    def renamed(self, name: str) -> "Schema":
        return Schema(name, self.headers, self.dmax)

    def project(self, name: str, headers: Sequence[str]) -> "Schema":
        return Schema(name, tuple(self.header(h) for h in headers), self.dmax)


def coerce(header: Header, v: Value) -> Value:
    """Check a cell against its header class, folding integral numbers into
    point intervals under numerval headers. Plain ints and fractions are
    read as numbers."""
    if isinstance(v, (int, Fraction)) and not isinstance(v, bool):
        v = Number(v)
    if header.cls is HeaderClass.NUMERVAL and isinstance(v, Number):
        iv = _as_interval(v)
        if iv is None:
            raise ModelError(f"numerval header {header.name!r} needs integer values, got {v}")
        return iv
    if not isinstance(v, LEGAL[header.cls]):
        raise ModelError(f"{type(v).__name__} is not legal under {header.cls.value} header {header.name!r}")
    if isinstance(v, TaxNode) and v.taxonomy != header.taxonomy:
        raise ModelError(f"{v.label!r} is not from the taxonomy of header {header.name!r}")
    return v


@dataclass(frozen=True)
class Record:
    """A ground tuple over a schema."""

    schema: Schema
    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        if len(values) != len(self.schema):
            raise ModelError(
                f"record has {len(values)} cells but schema {self.schema.name!r} has {len(self.schema)}"
            )
        object.__setattr__(
            self, "values", tuple(coerce(h, v) for h, v in zip(self.schema.headers, values))
        )

    def __getitem__(self, name: str) -> Value:
        return self.values[self.schema.index(name)]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def items(self):
        return zip(self.schema.names, self.values)

    def project(self, headers: Sequence[str], name: str | None = None) -> "Record":
        schema = self.schema.project(name or self.schema.name, headers)
        return Record(schema, tuple(self[h] for h in headers))

    def replace(self, **cells) -> "Record":
        return Record(self.schema, tuple(cells.get(n, v) for n, v in self.items()))

    def sort_key(self) -> tuple:
        return (self.schema.name, tuple(sort_key(v) for v in self.values))

    def __str__(self):
        return "(" + ", ".join(str(v) for v in self.values) + ")"


@dataclass(frozen=True)
class Database:
    """An ordered duplicate-free table; row order matters for Hamming pairing."""

    schema: Schema
    rows: tuple[Record, ...]
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if len(set(rows)) != len(rows):
            raise ModelError(f"database {self.schema.name!r} contains duplicate rows")
        for r in rows:
            if r.schema != self.schema:
                raise ModelError(f"row {r} does not conform to schema {self.schema.name!r}")
        if self.ids is not None:
            ids = tuple(self.ids)
            if len(ids) != len(rows) or len(set(ids)) != len(ids):
                raise ModelError(f"database {self.schema.name!r}: row ids must be unique, one per row")
            object.__setattr__(self, "ids", ids)

    @property
    def name(self) -> str:
        return self.schema.name

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def row(self, rid: str) -> Record:
        if self.ids is None or rid not in self.ids:
            raise ModelError(f"database {self.name!r} has no row {rid!r}")
        return self.rows[self.ids.index(rid)]


def type_compatible(t: Record, u: Record) -> tuple[str, ...] | None:
    """Headers on which two records can be compared, or None if uncomparable.

    Equal header sets pair by name. Otherwise the record with fewer headers
    must have all of them, with the same class, in the other; the pairing is
    then onto the shorter record's headers.
    """
    a, b = t.schema, u.schema
    if set(a.names) == set(b.names):
        shorter, longer = a, b
    elif len(a) < len(b):
        shorter, longer = a, b
    elif len(b) < len(a):
        shorter, longer = b, a
    else:
        return None
    for h in shorter.headers:
        if h.name not in longer.names or not h.same_type(longer.header(h.name)):
            return None
    return shorter.names


@dataclass(frozen=True)
class PolicyAtom:
    """A negated pattern: no knowledge may entail a record matching it."""

    pattern: Record

    def __post_init__(self):
        if all(isinstance(v, Wildcard) for v in self.pattern.values):
            raise ModelError("policy atom needs at least one non-wildcard cell")

    def __str__(self):
        return f"¬{self.pattern}"


def matches(t: Record, p: PolicyAtom | Record) -> bool:
    """Entailment of a pattern: every non-wildcard pattern cell must be a
    header of ``t`` whose denoted set lies inside the pattern's."""
    pattern = p.pattern if isinstance(p, PolicyAtom) else p
    pairing = type_compatible(t, pattern)
    if pairing is None:
        raise ModelError(f"record over {t.schema.name!r} is not comparable with pattern over {pattern.schema.name!r}")
    return _entails(t, pattern)


def _entails(t: Record, pattern: Record) -> bool:
    names = set(t.schema.names)
    for h, pv in pattern.items():
        if isinstance(pv, Wildcard):
            continue
        if h not in names or not within(t[h], pv):
            return False
    return True


def entails(t: Record, p: PolicyAtom) -> bool:
    """Lenient ``matches``: uncomparable records simply do not entail."""
    if type_compatible(t, p.pattern) is None:
        return False
    return _entails(t, p.pattern)


def records(schema: Schema, rows: Iterable[Sequence[Value]]) -> list[Record]:
    return [Record(schema, tuple(r)) for r in rows]
