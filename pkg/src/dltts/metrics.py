"""Column metrics, tuple distances, the set distance rho and Hamming counts.

All results are exact ``Fraction`` values in [0, 1] per column.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Collection, Iterable

from .model import (
    Database,
    Header,
    HeaderClass,
    IntInterval,
    ModelError,
    NominalSet,
    Number,
    Record,
    TaxNode,
    Value,
    Wildcard,
    type_compatible,
)

DistanceVector = list  # [(header name, Fraction)]


class UncomparableError(ModelError):
    pass


def jaccard_distance(a: Collection, b: Collection) -> Fraction:
    union = len(set(a) | set(b))
    if union == 0:
        return Fraction(0)
    return Fraction(len(set(a) ^ set(b)), union)


def d_nom(v: Value, w: Value) -> Fraction:
    if isinstance(v, Wildcard) or isinstance(w, Wildcard):
        return Fraction(0)
    v, w = _nominal(v), _nominal(w)
    return jaccard_distance(v.atoms, w.atoms)


def _nominal(v) -> NominalSet:
    if isinstance(v, str):
        return NominalSet.of(v)
    if not isinstance(v, NominalSet):
        raise TypeError(f"nominal distance needs nominal sets, got {type(v).__name__}")
    return v


def _interval(v) -> IntInterval:
    if isinstance(v, IntInterval):
        return v
    if isinstance(v, Number) and v.value.denominator == 1:
        return IntInterval.point(v.value)
    if isinstance(v, int):
        return IntInterval.point(v)
    raise TypeError(f"interval distance needs integer intervals, got {v!r}")


def d_num(u: Value, v: Value) -> Fraction:
    """Jaccard distance between the integer sets two intervals denote."""
    if isinstance(u, Wildcard) or isinstance(v, Wildcard):
        return Fraction(0)
    a, b = _interval(u), _interval(v)
    inter = max(0, min(a.hi, b.hi) - max(a.lo, b.lo) + 1)
    union = len(a) + len(b) - inter
    return 1 - Fraction(inter, union)


def d_eucl(x: Value, y: Value, scale) -> Fraction:
    if isinstance(x, Wildcard) or isinstance(y, Wildcard):
        return Fraction(0)
    if not (isinstance(x, Number) and isinstance(y, Number)):
        raise TypeError("euclidean distance needs two numbers")
    scale = Fraction(scale)
    if scale <= 0:
        raise ValueError("normalisation constant must be positive")
    d = abs(x.value - y.value) / scale
    if d > 1:
        raise ValueError(f"|{x} - {y}| exceeds the normalisation constant {scale}")
    return d


def d_wp(x: Value, y: Value) -> Fraction:
    if isinstance(x, Wildcard) or isinstance(y, Wildcard):
        return Fraction(0)
    if not (isinstance(x, TaxNode) and isinstance(y, TaxNode)) or x.taxonomy != y.taxonomy:
        raise TypeError("taxonomy distance needs two nodes of the same taxonomy")
    return x.taxonomy.d_wp(x.label, y.label)


def column_distance(header: Header, v: Value, w: Value) -> Fraction:
    cls = header.cls
    if cls is HeaderClass.NOMINAL:
        return d_nom(v, w)
    if cls is HeaderClass.NUMERVAL:
        return d_num(v, w)
    if cls is HeaderClass.NUMERICAL:
        if isinstance(v, IntInterval) or isinstance(w, IntInterval):
            return d_num(v, w)
        return d_eucl(v, w, header.scale)
    return d_wp(v, w)


def tuple_distance(t: Record, u: Record) -> DistanceVector:
    """Per-header distances over the headers the two records share."""
    pairing = type_compatible(t, u)
    if pairing is None:
        raise UncomparableError(f"{t} and {u} are uncomparable")
    return [(h, column_distance(t.schema.header(h), t[h], u[h])) for h in pairing]


def d_bar(t: Record, u: Record) -> Fraction:
    return sum((d for _, d in tuple_distance(t, u)), Fraction(0))


def rho(s: Iterable[Record], s2: Iterable[Record], skip_uncomparable: bool = False) -> Fraction | None:
    """Minimum ``d_bar`` over all cross pairs.

    With ``skip_uncomparable`` uncomparable pairs are ignored and None is
    returned when no pair is comparable; otherwise they raise.
    """
    s, s2 = list(s), list(s2)
    if not s or not s2:
        raise ValueError("rho needs two nonempty sets")
    best = None
    for t in s:
        for u in s2:
            if type_compatible(t, u) is None:
                if skip_uncomparable:
                    continue
                raise UncomparableError(f"{t} and {u} are uncomparable")
            d = d_bar(t, u)
            if best is None or d < best:
                best = d
    return best


def _rows(d) -> tuple[Record, ...]:
    if isinstance(d, Database):
        return d.rows
    if isinstance(d, Record):
        return (d,)
    return tuple(d)


def differing_cells(t: Record, u: Record) -> int:
    if t.schema.names != u.schema.names:
        raise ModelError("records must have the same headers for a cell-wise comparison")
    return sum(1 for a, b in zip(t.values, u.values) if a != b)


def _check_shape(a, b):
    if len(a) != len(b):
        raise ModelError(f"databases have different row counts ({len(a)} vs {len(b)})")
    for t, u in zip(a, b):
        if t.schema.names != u.schema.names:
            raise ModelError("databases have different headers")


def hamming(d, d2) -> int:
    """Number of row positions whose records differ."""
    a, b = _rows(d), _rows(d2)
    _check_shape(a, b)
    return sum(1 for t, u in zip(a, b) if t.values != u.values)


def cell_hamming(d, d2) -> int:
    """Number of differing cells, rows paired by position.

    On a single pair of records this is the record-wise reading of the
    Hamming metric; it dominates ``d_bar`` row by row.
    """
    a, b = _rows(d), _rows(d2)
    _check_shape(a, b)
    return sum(differing_cells(t, u) for t, u in zip(a, b))
