"""One-step comparison of two candidate configurations against a target.

A configuration is a parent state (saturated knowledge ``l``, probability
``p``) with the successors of one transition from it. ``config_1`` is kept
when it gets at least as close to the target as ``config_2`` through a
successor whose probability does not exceed ``p`` and is at least that of
every closest successor of ``config_2``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .metrics import UncomparableError, rho
from .model import ModelError, Record
from .saturation import Tag
from .system import VIOLATION, RunTree, State, Transition, check_distribution


class Decision(enum.Enum):
    CONTINUE_WITH_CONFIG1 = "continue-with-config1"
    RETURN = "return"


def _records(tag) -> list[Record]:
    return list(tag) if tag is not None else []


@dataclass(frozen=True)
class Config:
    parent: Tag | frozenset
    probability: Fraction
    successors: tuple[tuple[Tag | frozenset, Fraction], ...]

    def __post_init__(self):
        object.__setattr__(self, "probability", Fraction(self.probability))
        succ = tuple((tag, Fraction(p)) for tag, p in self.successors)
        if not succ:
            raise ModelError("configuration has no successors")
        check_distribution([p for _, p in succ], "configuration successors")
        object.__setattr__(self, "successors", succ)

    @classmethod
    def from_tree(cls, tree: RunTree, sid: str) -> "Config":
        """The configuration of state ``sid`` and its scripted transition."""
        state: State = tree.states[sid]
        t: Transition | None = next(
            (t for t in tree.transitions if t.source == sid and t.action != VIOLATION), None
        )
        if t is None:
            raise ModelError(f"state {sid} has no query transition to compare")
        succ = [(tree.states[target].saturated, p) for target, p in t.distribution]
        return cls(state.saturated, state.probability, succ)


@dataclass(frozen=True)
class Comparison:
    decision: Decision
    chosen: int | None
    d_min: Fraction
    d_min_other: Fraction
    distances: tuple[Fraction, ...]
    distances_other: tuple[Fraction, ...]


def _distance(tag, target) -> Fraction:
    recs = _records(tag)
    d = rho(recs, target, skip_uncomparable=True) if recs else None
    if d is None:
        raise UncomparableError("successor knowledge has no record comparable with the target")
    return d


def _check_parent(c: Config, target) -> None:
    recs = _records(c.parent)
    if recs:
        d = rho(recs, target, skip_uncomparable=True)
        if d == 0:
            raise ModelError("target already reached by the parent knowledge")


def compare_configs(c1: Config, c2: Config, target: Iterable[Record]) -> Comparison:
    """Decide whether to continue under ``c1``.

    Ties among qualifying successors go to the largest probability, then the
    lowest index.
    """
    target = list(target)
    if not target:
        raise ModelError("target set is empty")
    _check_parent(c1, target)
    _check_parent(c2, target)
    d = tuple(_distance(tag, target) for tag, _ in c1.successors)
    d2 = tuple(_distance(tag, target) for tag, _ in c2.successors)
    dmin, dmin2 = min(d), min(d2)
    best_other = max(p for (_, p), dj in zip(c2.successors, d2) if dj == dmin2)
    chosen = None
    if dmin <= dmin2:
        qualifying = [
            (i, p)
            for i, ((_, p), di) in enumerate(zip(c1.successors, d))
            if di == dmin and p <= c1.probability and p >= best_other
        ]
        if qualifying:
            chosen = min(qualifying, key=lambda ip: (-ip[1], ip[0]))[0]
    decision = Decision.RETURN if chosen is None else Decision.CONTINUE_WITH_CONFIG1
    return Comparison(decision, chosen, dmin, dmin2, d, d2)
