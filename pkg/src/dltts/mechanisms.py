"""Finite randomized answering mechanisms and their epsilon audits.

A mechanism is a finite stochastic table ``P[v][a] = Prob[M(v) = a]`` with
exact rational entries. Audits return the least epsilon as an exact
(probability ratio, adjacency) pair plus the float ``ln(ratio) / adjacency``.

Only output singletons are audited. For a finite output set this is
enough: if ``P[v][a] <= k P[w][a]`` for every ``a`` then summing over any
``S`` gives ``P[v][S] <= k P[w][S]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .metrics import cell_hamming, rho
from .model import IntInterval, Number, Record, bounds

TOLERANCE = 1e-12
INF = math.inf


class MechanismError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteMechanism:
    inputs: tuple
    outputs: tuple
    table: Mapping[Hashable, Mapping[Hashable, Fraction]]

    def __post_init__(self):
        inputs, outputs = tuple(self.inputs), tuple(self.outputs)
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise MechanismError("mechanism inputs and outputs must be distinct")
        table = {}
        for v in inputs:
            row = dict(self.table.get(v, {}))
            for a in row:
                if a not in outputs:
                    raise MechanismError(f"row {v!r} assigns probability to unknown output {a!r}")
            row = {a: Fraction(row.get(a, 0)) for a in outputs}
            if any(p < 0 or p > 1 for p in row.values()):
                raise MechanismError(f"row {v!r} has an entry outside [0, 1]")
            total = sum(row.values(), Fraction(0))
            if total != 1:
                raise MechanismError(f"row {v!r} sums to {total}, not 1")
            table[v] = row
        for v in self.table:
            if v not in inputs:
                raise MechanismError(f"table row {v!r} is not a declared input")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "table", table)

    def prob(self, v, a) -> Fraction:
        if v not in self.table:
            raise MechanismError(f"unknown input {v!r}")
        if a not in self.table[v]:
            raise MechanismError(f"unknown output {a!r}")
        return self.table[v][a]

    def prob_set(self, v, s: Iterable) -> Fraction:
        return sum((self.prob(v, a) for a in s), Fraction(0))

    def support(self, v) -> frozenset:
        return frozenset(a for a, p in self.table[v].items() if p > 0)

    def restricted(self, inputs: Sequence) -> "FiniteMechanism":
        return FiniteMechanism(tuple(inputs), self.outputs, {v: self.table[v] for v in inputs})


def randomized_response() -> FiniteMechanism:
    """Randomized Response with the two coin flips folded in:
    the true bit is reported with probability 3/4."""
    q, r = Fraction(3, 4), Fraction(1, 4)
    return FiniteMechanism(
        (True, False), (True, False), {True: {True: q, False: r}, False: {True: r, False: q}}
    )


COINS = ("H", "T")


def randomized_response_coins() -> FiniteMechanism:
    """Randomized Response over the eight instances ``(X, F1, F2)``.

    An instance names the bit and the coin faces, but the answer a
    querier observes is distributed as for the bit alone, so every instance
    carries the row of its ``X``.
    """
    folded = randomized_response()
    inputs = tuple((x, f1, f2) for x in (True, False) for f1 in COINS for f2 in COINS)
    return FiniteMechanism(inputs, folded.outputs, {v: folded.table[v[0]] for v in inputs})


def probability_pairs(mech: FiniteMechanism) -> set[tuple[Fraction, Fraction]]:
    """All pairs ``(P[x][y], P[x'][y'])`` over inputs and outputs."""
    values = {mech.prob(v, a) for v in mech.inputs for a in mech.outputs}
    return {(p, q) for p in values for q in values}


def ratio(p: Fraction, q: Fraction) -> Fraction | None:
    """``max(p/q, q/p)``; 1 for 0/0 and None (infinite) when exactly one is zero."""
    if p == 0 and q == 0:
        return Fraction(1)
    if p == 0 or q == 0:
        return None
    return max(p / q, q / p)


def _within(r: Fraction | None, bound: float, tol: float) -> bool:
    if r is None:
        return bound == INF
    return math.log(r) <= bound + tol


def check_local_indist(mech: FiniteMechanism, v, w, a, epsilon: float, tol: float = TOLERANCE) -> bool:
    """Both ``P[v][a] <= e^eps P[w][a]`` and the reverse."""
    return _within(ratio(mech.prob(v, a), mech.prob(w, a)), epsilon, tol)


def check_output_indist(mech: FiniteMechanism, a, b, epsilon: float, tol: float = TOLERANCE) -> bool:
    """Outputs ``a`` and ``b`` are epsilon-indistinguishable: for every input
    pair ``(v, w)``, ``P[v][a]`` and ``P[w][b]`` are within a factor ``e^eps``."""
    return _within(_output_ratio(mech, a, b), epsilon, tol)


def _output_ratio(mech: FiniteMechanism, a, b) -> Fraction | None:
    pa = [mech.prob(v, a) for v in mech.inputs]
    pb = [mech.prob(v, b) for v in mech.inputs]
    worst = Fraction(1)
    for p in pa:
        for q in pb:
            r = ratio(p, q)
            if r is None:
                return None
            worst = max(worst, r)
    return worst


def _input_ratio(mech: FiniteMechanism, v, w) -> Fraction | None:
    worst = Fraction(1)
    for a in mech.outputs:
        r = ratio(mech.prob(v, a), mech.prob(w, a))
        if r is None:
            return None
        worst = max(worst, r)
    return worst


@dataclass(frozen=True)
class AuditResult:
    """Least epsilon; ``ratio`` None means no finite epsilon works."""

    ratio: Fraction | None
    adjacency: Fraction = Fraction(1)
    pair: tuple | None = None

    @property
    def epsilon(self) -> float:
        if self.ratio is None:
            return INF
        if self.ratio == 1:
            return 0.0
        return math.log(self.ratio) / self.adjacency

    @property
    def finite(self) -> bool:
        return self.ratio is not None

    def __str__(self):
        if self.ratio is None:
            return "inf"
        if self.ratio == 1:
            return "0"
        scale = "" if self.adjacency == 1 else f"({1 / self.adjacency})*"
        return f"{scale}ln({self.ratio})"


def audit_ldp(mech: FiniteMechanism) -> AuditResult:
    """Least epsilon making every input pair locally indistinguishable on every output."""
    best = AuditResult(Fraction(1))
    for v, w in combinations(mech.inputs, 2):
        for a in mech.outputs:
            r = ratio(mech.prob(v, a), mech.prob(w, a))
            if r is None:
                return AuditResult(None, pair=(v, w, a))
            if r > best.ratio:
                best = AuditResult(r, pair=(v, w, a))
    return best


# adjacency -----------------------------------------------------------------

HAMMING = "hamming"
RHO = "rho"
DISCRETE = "discrete"
KINDS = (HAMMING, RHO, DISCRETE)


def _records(x) -> list[Record]:
    if isinstance(x, Record):
        return [x]
    if hasattr(x, "rows"):
        return list(x.rows)
    return list(x)


def adjacency_eval(kind: str, d, d2, scale=1) -> Fraction:
    """``scale * base(d, d2)`` for base Hamming (cell-wise), rho, or the
    discrete metric (1 for distinct arguments)."""
    scale = Fraction(scale)
    if kind == HAMMING:
        base = Fraction(cell_hamming(_records(d), _records(d2)))
    elif kind == RHO:
        base = rho(_records(d), _records(d2))
    elif kind == DISCRETE:
        base = Fraction(0 if d == d2 else 1)
    else:
        raise MechanismError(f"unknown adjacency kind {kind!r}")
    return scale * base


@dataclass(frozen=True)
class Adjacency:
    """An adjacency measure over mechanism labels.

    ``data`` maps labels to the databases or records they stand for; labels
    without an entry are used as-is.
    """

    kind: str
    scale: Fraction = Fraction(1)
    data: Mapping[Hashable, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MechanismError(f"unknown adjacency kind {self.kind!r}")

    def __call__(self, a, b) -> Fraction:
        return adjacency_eval(self.kind, self.data.get(a, a), self.data.get(b, b), self.scale)


def _as_adjacency(adj) -> Callable:
    return Adjacency(adj) if isinstance(adj, str) else adj


INPUTS = "inputs"
OUTPUTS = "outputs"


def audit_dp(
    mech: FiniteMechanism,
    adjacency: Adjacency | str | Callable = DISCRETE,
    over: str = INPUTS,
    restrict: Sequence | None = None,
) -> AuditResult:
    """Least epsilon with ``|ln P[x][a] - ln P[y][a]| <= eps * adj(x, y)``.

    ``over="inputs"`` compares input databases output by output;
    ``over="outputs"`` compares outputs as in output indistinguishability,
    with the adjacency measured between the outputs themselves.
    ``restrict`` limits the compared elements. Pairs at adjacency 0 must
    have ratio 1, else the result is infinite.
    """
    adj = _as_adjacency(adjacency)
    if over == INPUTS:
        elements, pair_ratio = mech.inputs, _input_ratio
    elif over == OUTPUTS:
        elements, pair_ratio = mech.outputs, _output_ratio
    else:
        raise MechanismError(f"audit over {over!r}: expected 'inputs' or 'outputs'")
    if restrict is not None:
        unknown = [x for x in restrict if x not in elements]
        if unknown:
            raise MechanismError(f"cannot restrict to unknown {over} {unknown}")
        elements = tuple(restrict)
    best = AuditResult(Fraction(1))
    for x, y in combinations(elements, 2):
        r = pair_ratio(mech, x, y)
        a = Fraction(adj(x, y))
        if r is None or (a == 0 and r > 1):
            return AuditResult(None, a, (x, y))
        if r == 1:
            continue
        cand = AuditResult(r, a, (x, y))
        if cand.epsilon > best.epsilon:
            best = cand
    return best


def check_indist(
    mech: FiniteMechanism,
    x,
    y,
    adjacency: Adjacency | str | Callable,
    epsilon: float,
    over: str = INPUTS,
    tol: float = TOLERANCE,
) -> bool:
    """Whether ``x`` and ``y`` are indistinguishable at ``epsilon`` when the
    allowed log-ratio is ``epsilon * adj(x, y)``."""
    adj = _as_adjacency(adjacency)
    r = (_input_ratio if over == INPUTS else _output_ratio)(mech, x, y)
    a = Fraction(adj(x, y))
    if r is None:
        return False
    if r == 1:
        return True
    if a == 0 or epsilon == 0:
        return False
    return math.log(r) <= epsilon * float(a) + tol


# bounded noise -------------------------------------------------------------

LAPLACE = "laplace"
GAUSS = "gauss"
EXPONENTIAL = "exponential"
NOISE = (LAPLACE, GAUSS, EXPONENTIAL)


def bounded_noise_samples(
    value,
    mech: str,
    scale: float,
    domain: IntInterval,
    rng: np.random.Generator | int | None,
    n: int = 1,
    mode: str = "resample",
    max_tries: int = 1000,
) -> np.ndarray:
    """``n`` noisy integer versions of ``value`` confined to ``domain``.

    Laplace and Gauss add continuous noise, round to the nearest integer and
    either redraw (``mode="resample"``) or clip (``mode="clamp"``) anything
    outside the domain; draws still outside after ``max_tries`` rounds are
    clipped. The exponential mechanism samples the domain directly with
    weights ``exp(-|x - value| / scale)``.
    """
    if isinstance(value, (Number, IntInterval)):
        b = bounds(value)
        if b[0] != b[1]:
            raise MechanismError("noise needs a single numeric value")
        value = b[0]
    value = float(value)
    if not isinstance(domain, IntInterval):
        raise MechanismError("noise domain must be an integer interval")
    if scale <= 0:
        raise MechanismError("noise scale must be positive")
    if mode not in ("resample", "clamp"):
        raise MechanismError(f"unknown noise mode {mode!r}")
    rng = np.random.default_rng(rng)
    lo, hi = domain.lo, domain.hi
    if mech == EXPONENTIAL:
        support = np.arange(lo, hi + 1)
        logw = -np.abs(support - value) / scale
        w = np.exp(logw - logw.max())
        return rng.choice(support, size=n, p=w / w.sum())
    if mech == LAPLACE:
        draw = lambda k: rng.laplace(0.0, scale, k)
    elif mech == GAUSS:
        draw = lambda k: rng.normal(0.0, scale, k)
    else:
        raise MechanismError(f"unknown noise mechanism {mech!r}")
    out = np.rint(value + draw(n)).astype(np.int64)
    if mode == "resample":
        for _ in range(max_tries):
            bad = (out < lo) | (out > hi)
            if not bad.any():
                break
            out[bad] = np.rint(value + draw(int(bad.sum()))).astype(np.int64)
    return np.clip(out, lo, hi)


def bounded_noise(value, mech: str, scale: float, domain: IntInterval, rng, **kw) -> Number:
    return Number(int(bounded_noise_samples(value, mech, scale, domain, rng, 1, **kw)[0]))
