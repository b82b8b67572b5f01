"""Closed-form pricing of the weighted assignment program and its tie graph.

For a weight vector w on the simplex and offset eta, the assignment
program that maximizes sum_i sum_j (w_i + eta) v[i][j] x[ij] has a dual
whose unique optimum is the itemwise maximum p_j = max_i (w_i + eta) v[i][j].
The equality (tie) graph connects agent i to item j exactly when i
attains p_j; on non-degenerate instances it is a forest, forced bundles
are the degree-1 items, and the optimal face of the program is the set
of allocations sandwiched between forced bundles and tie adjacency.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DegeneracyError, InputError, SizeGuardError, SoundnessError
from .model import Allocation, Bundle
from .preprocess import ItemClass, PerturbedInstance

DEFAULT_FACE_GUARD = 10**6


def validate_weight(w: Sequence[Fraction], n: int) -> tuple[Fraction, ...]:
    wt = tuple(Fraction(x) for x in w)
    if len(wt) != n:
        raise InputError(f"weight vector has {len(wt)} coordinates for {n} agents")
    if any(x < 0 for x in wt) or sum(wt) != 1:
        raise InputError("weight vector must be nonnegative and sum to exactly 1")
    return wt


def support(w: Sequence[Fraction]) -> frozenset[int]:
    return frozenset(i for i, x in enumerate(w) if x > 0)


def dual_prices(p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction) -> tuple[Fraction, ...]:
    """Unique dual optimum: componentwise maximum of (w_i + eta) * value.

    Positive for goods and zero-positive items, negative for chores;
    exactly zero only on dead (all-zero) items.
    """
    wt = validate_weight(w, p.n)
    mult = [wi + eta for wi in wt]
    prices = tuple(
        max(mult[i] * p.pvalues[i][j] for i in range(p.n)) for j in range(p.m + 1)
    )
    classes = p.classes()
    for j, cls in classes.items():
        if cls is ItemClass.CHORE:
            if prices[j] >= 0:
                raise SoundnessError(f"chore item {j} received nonnegative price {prices[j]}")
        elif prices[j] <= 0:
            raise SoundnessError(f"item {j} of class {cls.value} received nonpositive price {prices[j]}")
    return prices


@dataclass(frozen=True)
class TieGraph:
    """Equality graph of price-attaining (agent, item) pairs at a fixed weight.

    ``forced`` holds each agent's degree-1 items; ``tie_items`` the
    items with degree >= 2; ``gamma`` each agent's tie neighborhood;
    ``item_neighbors`` each tie item's agents. ``components`` maps every
    node (agents: 0..n-1, item j: n + j) to a component id. Dead items
    carry no edges and appear in none of these.
    """

    n: int
    aux_item: int
    weights: tuple[Fraction, ...]
    eta: Fraction
    prices: tuple[Fraction, ...]
    edges: frozenset[tuple[int, int]]
    forced: tuple[Bundle, ...]
    tie_items: frozenset[int]
    gamma: tuple[Bundle, ...]
    item_neighbors: Mapping[int, tuple[int, ...]]
    components: Mapping[int, int]
    zero_items: frozenset[int]

    def item_node(self, j: int) -> int:
        return self.n + j

    def live_items(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.aux_item + 1) if j not in self.zero_items)


def build_tie_graph(
    p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction, prices: Sequence[Fraction]
) -> TieGraph:
    """Construct the equality graph and assert it is a forest.

    A cycle here means the perturbation draw was degenerate after all;
    the error carries the cycle so the caller can re-draw.
    """
    wt = validate_weight(w, p.n)
    mult = [wi + eta for wi in wt]
    zero = p.zero_items
    edges: set[tuple[int, int]] = set()
    item_neighbors: dict[int, list[int]] = {}
    for j in range(p.m + 1):
        if j in zero:
            continue
        holders = [i for i in range(p.n) if mult[i] * p.pvalues[i][j] == prices[j]]
        if not holders:
            raise SoundnessError(f"no agent attains the price of item {j}")
        for i in holders:
            if p.pvalues[i][j] == 0:
                raise SoundnessError(f"tie edge ({i},{j}) would carry a zero value")
            edges.add((i, j))
        item_neighbors[j] = holders

    # union-find over agents (0..n-1) and items (n + j) with cycle detection
    parent = list(range(p.n + p.m + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    adjacency: dict[int, list[int]] = {}
    for i, j in sorted(edges):
        a, b = find(i), find(p.n + j)
        if a == b:
            raise DegeneracyError(
                f"equality graph contains a cycle through agent {i} and item {j}",
                cycle=_recover_cycle(adjacency, i, p.n + j, p.n),
            )
        parent[a] = b
        adjacency.setdefault(i, []).append(p.n + j)
        adjacency.setdefault(p.n + j, []).append(i)

    forced = tuple(
        frozenset(j for j, hs in item_neighbors.items() if len(hs) == 1 and hs[0] == i)
        for i in range(p.n)
    )
    tie_items = frozenset(j for j, hs in item_neighbors.items() if len(hs) >= 2)
    if len(tie_items) > p.n - 1:
        raise SoundnessError(f"{len(tie_items)} tie items exceed the forest bound {p.n - 1}")
    gamma = tuple(
        frozenset(j for j in tie_items if (i, j) in edges) for i in range(p.n)
    )

    components: dict[int, int] = {}
    labels: dict[int, int] = {}
    nodes = list(range(p.n)) + [p.n + j for j in item_neighbors]
    for node in nodes:
        root = find(node)
        if root not in labels:
            labels[root] = len(labels)
        components[node] = labels[root]

    return TieGraph(
        n=p.n,
        aux_item=p.aux_item,
        weights=wt,
        eta=eta,
        prices=tuple(prices),
        edges=frozenset(edges),
        forced=forced,
        tie_items=tie_items,
        gamma=gamma,
        item_neighbors={j: tuple(hs) for j, hs in item_neighbors.items()},
        components=components,
        zero_items=zero,
    )


def _recover_cycle(adjacency: dict[int, list[int]], a: int, b: int, n: int) -> tuple:
    """Path a..b through already-linked edges, labelled as agents/items."""
    prev: dict[int, int | None] = {a: None}
    queue = [a]
    while queue:
        x = queue.pop(0)
        if x == b:
            break
        for y in adjacency.get(x, ()):
            if y not in prev:
                prev[y] = x
                queue.append(y)
    path = []
    cur: int | None = b
    while cur is not None:
        path.append(cur)
        cur = prev.get(cur)
    path.reverse()
    return tuple(("agent", x) if x < n else ("item", x - n) for x in path)


def price_of(prices: Sequence[Fraction], bundle: Iterable[int]) -> Fraction:
    return sum((prices[t] for t in bundle), Fraction(0))


def enumerate_opt(tg: TieGraph, guard: int = DEFAULT_FACE_GUARD) -> tuple[Allocation, ...]:
    """All optimal-face allocations over live items, lexicographic by tie assignment.

    Forced bundles are fixed; each tie item independently goes to one
    of its graph neighbors, so the count is the product of tie-item
    degrees. Dead items are excluded here and pinned at output time.
    """
    ties = sorted(tg.tie_items)
    count = 1
    for j in ties:
        count *= len(tg.item_neighbors[j])
        if count > guard:
            raise SizeGuardError(f"optimal face larger than guard {guard}")
    out: list[Allocation] = []
    for choice in itertools.product(*(tg.item_neighbors[j] for j in ties)):
        bundles = [set(tg.forced[i]) for i in range(tg.n)]
        for j, holder in zip(ties, choice):
            bundles[holder].add(j)
        out.append(tuple(frozenset(b) for b in bundles))
    return tuple(out)


def lp_objective(
    p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction, alloc: Allocation
) -> Fraction:
    """Weighted welfare of an allocation; equals the price total iff on the optimal face."""
    wt = validate_weight(w, p.n)
    total = Fraction(0)
    for i in range(p.n):
        mult = wt[i] + eta
        for j in alloc[i]:
            total += mult * p.pvalues[i][j]
    return total


def on_optimal_face(
    p: PerturbedInstance,
    w: Sequence[Fraction],
    eta: Fraction,
    prices: Sequence[Fraction],
    alloc: Allocation,
) -> bool:
    return lp_objective(p, w, eta, alloc) == sum(prices)
