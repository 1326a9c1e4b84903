"""Agglomerative hierarchical clustering with the ward.D2 criterion.

At each step the two closest clusters merge; dissimilarities to the merged
cluster follow the Lance-Williams recurrence with squared dissimilarities
inside and a square root at the end:

    d(m,k) = sqrt(((n_i+n_k) d(i,k)^2 + (n_j+n_k) d(j,k)^2 - n_k d(i,j)^2)
                  / (n_i+n_j+n_k))

Ties between candidate merges break lexicographically on the pair of
smallest leaf labels, so runs are deterministic regardless of input order.
The O(n^3) loop is deliberate: the matrices here have at most 50 rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DataError
from .metrics import DistanceMatrix


@dataclass
class Dendrogram:
    """Binary merge tree. Nodes 0..n-1 are the leaves (in ``leaves`` order);
    merge i creates node n+i. Heights are non-decreasing in merge order."""

    leaves: list[str]
    merges: list[tuple[int, int, float, int]] = field(default_factory=list)  # (left, right, height, size)

    @property
    def n(self) -> int:
        return len(self.leaves)

    def node_leaves(self, node: int) -> list[str]:
        if node < self.n:
            return [self.leaves[node]]
        left, right, _, _ = self.merges[node - self.n]
        return self.node_leaves(left) + self.node_leaves(right)

    def to_json(self) -> dict:
        return {
            "leaves": self.leaves,
            "merges": [[l, r, h, s] for l, r, h, s in self.merges],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Dendrogram":
        return cls(
            leaves=list(doc["leaves"]),
            merges=[(int(l), int(r), float(h), int(s)) for l, r, h, s in doc["merges"]],
        )

    def to_newick(self) -> str:
        """Newick text with branch lengths derived from merge heights."""
        heights = [0.0] * self.n + [m[2] for m in self.merges]

        def render(node: int, parent_height: float) -> str:
            length = parent_height - heights[node]
            if node < self.n:
                return f"{self.leaves[node]}:{length:.9g}"
            left, right, h, _ = self.merges[node - self.n]
            a, b = _ordered_children(self, left, right)
            return f"({render(a, h)},{render(b, h)}):{length:.9g}"

        left, right, root_h, _ = self.merges[-1]
        a, b = _ordered_children(self, left, right)
        return f"({render(a, root_h)},{render(b, root_h)});"


def tie_break(candidates: Iterable[tuple[str, str]]) -> tuple[str, str]:
    """Pick the canonical pair among equally-close candidates: minimal under
    lexicographic order of (smaller label, larger label)."""
    best = None
    for pair in candidates:
        key = (min(pair), max(pair))
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("no candidates")
    return best


def ward_cluster(dm: DistanceMatrix) -> Dendrogram:
    """Cluster a validated distance matrix; merge heights are checked for
    monotonicity and any inversion fails loudly."""
    n = len(dm.labels)
    if n < 2:
        raise DataError(f"clustering needs at least 2 institutions, got {n}")
    if np.any(np.isnan(dm.d)):
        raise DataError("distance matrix contains NaN")

    d = dm.d.astype(float).copy()
    active = list(range(n))  # node ids currently mergeable
    size = {i: 1 for i in range(n)}
    rep = {i: dm.labels[i] for i in range(n)}  # smallest leaf label per cluster
    # dissimilarity lookup between active nodes
    dis: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dis[(i, j)] = d[i, j]

    def get(i: int, j: int) -> float:
        return dis[(i, j) if i < j else (j, i)]

    dend = Dendrogram(leaves=list(dm.labels))
    next_node = n
    last_height = 0.0
    while len(active) > 1:
        # closest pair; exact ties resolved by representative-label order
        best_pair = None
        best_key = None
        for ai in range(len(active)):
            for aj in range(ai + 1, len(active)):
                i, j = active[ai], active[aj]
                dij = get(i, j)
                labels = (rep[i], rep[j]) if rep[i] < rep[j] else (rep[j], rep[i])
                key = (dij, labels)
                if best_key is None or key < best_key:
                    best_key = key
                    best_pair = (i, j)
        i, j = best_pair
        height = get(i, j)
        if height < last_height - 1e-12 * max(1.0, last_height):
            raise DataError(
                f"ward.D2 produced a height inversion: {height} after {last_height}"
            )
        last_height = max(last_height, height)

        m = next_node
        next_node += 1
        n_i, n_j = size[i], size[j]
        for k in active:
            if k in (i, j):
                continue
            n_k = size[k]
            dik, djk, dij_ = get(i, k), get(j, k), height
            val = math.sqrt(
                max(0.0, ((n_i + n_k) * dik * dik + (n_j + n_k) * djk * djk
                          - n_k * dij_ * dij_) / (n_i + n_j + n_k))
            )
            dis[(k, m) if k < m else (m, k)] = val
        size[m] = n_i + n_j
        rep[m] = min(rep[i], rep[j])
        active = [a for a in active if a not in (i, j)] + [m]
        dend.merges.append((i, j, height, size[m]))
    return dend


def _min_leaf(dend: Dendrogram, node: int) -> str:
    return min(dend.node_leaves(node))


def _ordered_children(dend: Dendrogram, left: int, right: int) -> tuple[int, int]:
    if _min_leaf(dend, left) <= _min_leaf(dend, right):
        return left, right
    return right, left


def leaf_order(dend: Dendrogram) -> list[str]:
    """Display order for circular layout: in-order traversal, placing at each
    internal node the child with the lexicographically smaller minimum leaf
    label first. Adjacent leaves always share their merge subtree."""
    order: list[str] = []

    def visit(node: int) -> None:
        if node < dend.n:
            order.append(dend.leaves[node])
            return
        left, right, _, _ = dend.merges[node - dend.n]
        a, b = _ordered_children(dend, left, right)
        visit(a)
        visit(b)

    visit(dend.n + len(dend.merges) - 1)
    return order
