"""Rooted taxonomy trees and the Wu-Palmer based node metric."""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np


class TaxonomyError(ValueError):
    pass


class Taxonomy:
    """A rooted tree of uniquely labelled nodes.

    Depth counts nodes on the root path, both ends included, so the root
    has depth 1.
    """

    def __init__(self, name: str, parent: Mapping[str, str | None]):
        self.name = name
        self._parent: dict[str, str | None] = dict(parent)
        roots = [x for x, p in self._parent.items() if p is None]
        if len(roots) != 1:
            raise TaxonomyError(f"taxonomy {name!r} needs exactly one root, found {len(roots)}")
        self.root = roots[0]
        for x, p in self._parent.items():
            if p is not None and p not in self._parent:
                raise TaxonomyError(f"taxonomy {name!r}: parent {p!r} of {x!r} is not a node")
        self._depth: dict[str, int] = {}
        for x in self._parent:
            self._compute_depth(x)

    def _compute_depth(self, x: str) -> int:
        path = []
        node: str | None = x
        seen = set()
        while node is not None and node not in self._depth:
            if node in seen:
                raise TaxonomyError(f"taxonomy {self.name!r} has a cycle through {node!r}")
            seen.add(node)
            path.append(node)
            node = self._parent[node]
        base = 0 if node is None else self._depth[node]
        for i, n in enumerate(reversed(path), start=1):
            self._depth[n] = base + i
        return self._depth[x]

    @classmethod
    def from_nested(cls, name: str, tree: Mapping) -> "Taxonomy":
        """Build from ``{root: {child: {grandchild: {}}, ...}}``."""
        if len(tree) != 1:
            raise TaxonomyError(f"taxonomy {name!r} needs exactly one root")
        parent: dict[str, str | None] = {}

        def walk(label, children, up):
            label = str(label)
            if label in parent:
                raise TaxonomyError(f"taxonomy {name!r}: duplicate label {label!r}")
            parent[label] = up
            for child, sub in (children or {}).items():
                walk(child, sub, label)

        (root, children), = tree.items()
        walk(root, children, None)
        return cls(name, parent)

    @classmethod
    def from_parent_array(cls, name: str, parents: Iterable[int], prefix: str = "n") -> "Taxonomy":
        """Node ``i`` gets label ``f"{prefix}{i}"``; a negative parent marks the root."""
        parent = {}
        for i, p in enumerate(parents):
            parent[f"{prefix}{i}"] = None if p < 0 else f"{prefix}{p}"
        return cls(name, parent)

    # identity -------------------------------------------------------------

    @cached_property
    def _key(self):
        return (self.name, tuple(sorted(self._parent.items(), key=lambda kv: kv[0])))

    def __eq__(self, other):
        return isinstance(other, Taxonomy) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Taxonomy({self.name!r}, {len(self)} nodes)"

    def __len__(self):
        return len(self._parent)

    def __contains__(self, label):
        return label in self._parent

    @property
    def labels(self) -> list[str]:
        return list(self._parent)

    def parent(self, x: str) -> str | None:
        self._check(x)
        return self._parent[x]

    def children(self, x: str) -> list[str]:
        self._check(x)
        return [c for c, p in self._parent.items() if p == x]

    def _check(self, *labels: str) -> None:
        for x in labels:
            if x not in self._parent:
                raise TaxonomyError(f"unknown label {x!r} in taxonomy {self.name!r}")

    # structure -------------------------------------------------------------

    def depth(self, x: str) -> int:
        self._check(x)
        return self._depth[x]

    def path(self, x: str) -> list[str]:
        """Nodes from the root down to ``x``."""
        self._check(x)
        out = []
        node: str | None = x
        while node is not None:
            out.append(node)
            node = self._parent[node]
        return out[::-1]

    def is_ancestor(self, a: str, x: str) -> bool:
        """True when ``a`` lies on the root path of ``x`` (``x`` itself included)."""
        self._check(a, x)
        node: str | None = x
        while node is not None:
            if node == a:
                return True
            node = self._parent[node]
        return False

    def deepest_common_ancestor(self, x: str, y: str) -> str:
        px, py = self.path(x), self.path(y)
        dca = px[0]
        for a, b in zip(px, py):
            if a != b:
                break
            dca = a
        return dca

    def wu_palmer(self, x: str, y: str) -> Fraction:
        cxy = self.depth(self.deepest_common_ancestor(x, y))
        return Fraction(2 * cxy, self.depth(x) + self.depth(y))

    def d_wp(self, x: str, y: str) -> Fraction:
        """``1 - WP(x, y)``; a metric on the nodes, with values in [0, 1)."""
        return 1 - self.wu_palmer(x, y)

    def distance_matrix(self, order: list[str] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Exact ``d_wp`` for all node pairs as integer (numerator, denominator) arrays.

        ``d_wp(x, y) = (c_x + c_y - 2 c_xy) / (c_x + c_y)``.
        """
        order = self.labels if order is None else list(order)
        if sorted(order) != sorted(self._parent):
            raise TaxonomyError("order must list every node exactly once")
        index = {x: i for i, x in enumerate(order)}
        n = len(order)
        depth = np.array([self._depth[x] for x in order], dtype=np.int64)
        # ancestor indicator: anc[i, j] = 1 when node j is on the root path of
        # node i; rows are filled parents first, each copying its parent's row
        anc = np.zeros((n, n), dtype=np.float64)
        for x in sorted(order, key=self._depth.__getitem__):
            i, p = index[x], self._parent[x]
            if p is not None:
                anc[i] = anc[index[p]]
            anc[i, i] = 1.0
        # the common ancestors of x and y form the root path of their dca, so
        # their count is c_xy; float products of 0/1 entries are exact here
        cxy = np.rint(anc @ anc.T).astype(np.int64)
        den = depth[:, None] + depth[None, :]
        return den - 2 * cxy, den
