"""Search for a simplex weight where every agent can top the bundle prices.

For each agent i, the membership region C_i collects the weights w for
which some optimal-face allocation gives agent i a maximum-price
bundle. These regions are closed and cover the simplex in the
supported-coordinate sense, so they intersect; the solver must actually
locate a rational point of the intersection and certify it by direct
membership tests.

Two strategies are provided. The exact strategy (n <= 3) enumerates a
finite candidate set built from the arrangement of critical lines:
item-tie loci where two agents price an item equally, and bundle-tie
loci where two bundle prices of a locally-constant optimal allocation
coincide. Membership is constant on the relative interior of every
face of this arrangement and the regions are closed, so any nonempty
intersection contains an arrangement vertex; the candidate set
therefore consists of vertices (plus cheap interior representatives for
robustness). The subdivision strategy (any n) refines barycentric
subdivisions around fully-labeled simplices and tests all vertices and
centroids exactly; it reports failure rather than approximating.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import (
    DegeneracyError,
    InputError,
    SearchUnresolvedError,
    SizeGuardError,
    SoundnessError,
)
from .model import Allocation
from .preprocess import PerturbedInstance
from .pricing import (
    DEFAULT_FACE_GUARD,
    TieGraph,
    build_tie_graph,
    dual_prices,
    enumerate_opt,
    price_of,
    support,
    validate_weight,
)

Weight = tuple[Fraction, ...]

DEFAULT_MAX_DEPTH = 24
DEFAULT_SIMPLEX_BUDGET = 20_000


@dataclass(frozen=True)
class CellWitness:
    """Evidence that a weight lies in an agent's membership region."""

    agent: int
    w: Weight
    allocation: Allocation
    max_price: Fraction


@dataclass(frozen=True)
class StarPoint:
    """A certified common point: one membership witness per agent."""

    w_star: Weight
    witnesses: tuple[CellWitness, ...]
    prices: tuple[Fraction, ...]
    tie_graph: TieGraph


@dataclass(frozen=True)
class MembershipSummary:
    w: Weight
    prices: tuple[Fraction, ...]
    winners: frozenset[int]
    witnesses: Mapping[int, Allocation]
    tie_items: tuple[int, ...]
    face_size: int


def _lean_structure(p: PerturbedInstance, w: Weight, eta: Fraction):
    """Prices, per-item attaining agents, and a forest check, without dataclass overhead."""
    mult = [wi + eta for wi in w]
    n = p.n
    live = p.live_items
    prices: list[Fraction] = [Fraction(0)] * (p.m + 1)
    holders: dict[int, list[int]] = {}
    parent = list(range(n + p.m + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j in live:
        best = None
        hs: list[int] = []
        for i in range(n):
            val = mult[i] * p.pvalues[i][j]
            if best is None or val > best:
                best, hs = val, [i]
            elif val == best:
                hs.append(i)
        prices[j] = best
        holders[j] = hs
        jn = n + j
        for i in hs:
            a, b = find(i), find(jn)
            if a == b:
                raise DegeneracyError(
                    f"equality graph cycle at weight {tuple(map(str, w))} via agent {i}, item {j}"
                )
            parent[a] = b
    ties = sorted(j for j, hs in holders.items() if len(hs) >= 2)
    if len(ties) > n - 1:
        raise SoundnessError(f"{len(ties)} tie items exceed the forest bound {n - 1}")
    return tuple(prices), holders, ties


def membership_summary(
    p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction, face_guard: int = DEFAULT_FACE_GUARD
) -> MembershipSummary:
    """Enumerate the optimal face at ``w`` and record which agents can top it."""
    wt = validate_weight(w, p.n)
    prices, holders, ties = _lean_structure(p, wt, eta)
    n = p.n
    base = [Fraction(0)] * n
    forced: list[list[int]] = [[] for _ in range(n)]
    for j, hs in holders.items():
        if len(hs) == 1:
            base[hs[0]] += prices[j]
            forced[hs[0]].append(j)
    face_size = 1
    for j in ties:
        face_size *= len(holders[j])
        if face_size > face_guard:
            raise SizeGuardError(f"optimal face larger than guard {face_guard}")
    winners: set[int] = set()
    witnesses: dict[int, Allocation] = {}
    for choice in itertools.product(*(holders[j] for j in ties)):
        bundle_price = list(base)
        for j, holder in zip(ties, choice):
            bundle_price[holder] += prices[j]
        top = max(bundle_price)
        argmax = [i for i in range(n) if bundle_price[i] == top]
        fresh = [i for i in argmax if i not in winners]
        if fresh:
            winners.update(fresh)
            alloc = _materialize(n, forced, ties, choice)
            for i in fresh:
                witnesses[i] = alloc
    return MembershipSummary(
        w=wt,
        prices=prices,
        winners=frozenset(winners),
        witnesses=witnesses,
        tie_items=tuple(ties),
        face_size=face_size,
    )


def _materialize(n: int, forced: list[list[int]], ties: list[int], choice: tuple[int, ...]) -> Allocation:
    bundles = [set(forced[i]) for i in range(n)]
    for j, holder in zip(ties, choice):
        bundles[holder].add(j)
    return tuple(frozenset(b) for b in bundles)


def cell_membership(
    p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction, agent: int
) -> CellWitness | None:
    """Witness allocation making ``agent`` a global price maximum, or None."""
    summary = membership_summary(p, w, eta)
    if agent not in summary.winners:
        return None
    alloc = summary.witnesses[agent]
    return CellWitness(
        agent=agent,
        w=summary.w,
        allocation=alloc,
        max_price=price_of(summary.prices, alloc[agent]),
    )


def covering_label(p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction) -> int:
    """Smallest supported agent whose membership holds at ``w``; always exists."""
    summary = membership_summary(p, w, eta)
    candidates = sorted(summary.winners & support(summary.w))
    if not candidates:
        raise SoundnessError(
            f"no supported agent covers weight {tuple(map(str, w))}; degenerate or buggy instance"
        )
    return candidates[0]


def build_star_point(p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction) -> StarPoint:
    """Assemble the full certified object at a weight that passed all memberships."""
    wt = validate_weight(w, p.n)
    prices = dual_prices(p, wt, eta)
    tg = build_tie_graph(p, wt, eta, prices)
    witnesses = []
    allocs = enumerate_opt(tg)
    for i in range(p.n):
        chosen: Allocation | None = None
        for alloc in allocs:
            bp = [price_of(prices, b) for b in alloc]
            if bp[i] == max(bp):
                chosen = alloc
                break
        if chosen is None:
            raise SoundnessError(f"agent {i} lost its membership witness during assembly")
        witnesses.append(
            CellWitness(agent=i, w=wt, allocation=chosen, max_price=price_of(prices, chosen[i]))
        )
    return StarPoint(w_star=wt, witnesses=tuple(witnesses), prices=prices, tie_graph=tg)


# ---------------------------------------------------------------------------
# exact strategy, n = 2: breakpoints on the segment w = (t, 1 - t)


def _segment_candidates(p: PerturbedInstance, eta: Fraction) -> list[Weight]:
    live = p.live_items
    pts: set[Fraction] = {Fraction(0), Fraction(1)}
    for j in live:
        a, b = p.pvalues[0][j], p.pvalues[1][j]
        if a + b == 0:
            continue
        t = (b + eta * (b - a)) / (a + b)
        if 0 <= t <= 1:
            pts.add(t)
    breakpoints = sorted(pts)
    roots: set[Fraction] = set()
    for lo, hi in zip(breakpoints, breakpoints[1:]):
        mid = (lo + hi) / 2
        sigma = _argmax_map_at(p, (mid, 1 - mid), eta)
        # bundle price gap f(t) = sum_{holder 0} (t+eta) v - sum_{holder 1} (1-t+eta) v
        alpha = Fraction(0)
        beta = Fraction(0)
        for j, holder in sigma.items():
            v = p.pvalues[holder][j]
            if holder == 0:
                alpha += v
                beta += eta * v
            else:
                alpha += v
                beta -= (1 + eta) * v
        if alpha != 0:
            t = -beta / alpha
            if lo < t < hi:
                roots.add(t)
    pts |= roots
    ordered = sorted(pts)
    mids = [(a + b) / 2 for a, b in zip(ordered, ordered[1:])]
    final = sorted(set(ordered) | set(mids))
    return [(t, 1 - t) for t in final]


def _argmax_map_at(p: PerturbedInstance, w: Weight, eta: Fraction) -> dict[int, int]:
    """Unique price-attaining agent per live item; raises if any item ties."""
    mult = [wi + eta for wi in w]
    sigma: dict[int, int] = {}
    for j in p.live_items:
        vals = [mult[i] * p.pvalues[i][j] for i in range(p.n)]
        top = max(vals)
        holders = [i for i in range(p.n) if vals[i] == top]
        if len(holders) != 1:
            raise SoundnessError(f"cell representative unexpectedly lies on a tie locus (item {j})")
        sigma[j] = holders[0]
    return sigma


# ---------------------------------------------------------------------------
# exact strategy, n = 3: line arrangement in the plane w = (x, y, 1 - x - y)

Form = tuple[Fraction, Fraction, Fraction]  # cx * x + cy * y + c0
Line = tuple[Fraction, Fraction, Fraction]  # A * x + B * y = C, canonical


def _price_form(p: PerturbedInstance, agent: int, item: int, eta: Fraction) -> Form:
    v = p.pvalues[agent][item]
    if agent == 0:
        return (v, Fraction(0), eta * v)
    if agent == 1:
        return (Fraction(0), v, eta * v)
    return (-v, -v, (1 + eta) * v)


def _form_sub(a: Form, b: Form) -> Form:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _form_add(a: Form, b: Form) -> Form:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _form_eval(f: Form, pt: tuple[Fraction, Fraction]) -> Fraction:
    return f[0] * pt[0] + f[1] * pt[1] + f[2]


def _line_of(form: Form) -> Line | None:
    cx, cy, c0 = form
    if cx == 0 and cy == 0:
        return None
    if cx != 0:
        return (Fraction(1), cy / cx, -c0 / cx)
    return (Fraction(0), Fraction(1), -c0 / cy)


def _intersect(l1: Line, l2: Line) -> tuple[Fraction, Fraction] | None:
    a1, b1, c1 = l1
    a2, b2, c2 = l2
    det = a1 * b2 - a2 * b1
    if det == 0:
        return None
    x = (c1 * b2 - c2 * b1) / det
    y = (a1 * c2 - a2 * c1) / det
    return (x, y)


def _in_triangle(pt: tuple[Fraction, Fraction]) -> bool:
    x, y = pt
    return x >= 0 and y >= 0 and x + y <= 1


def _plane_candidates(p: PerturbedInstance, eta: Fraction) -> list[Weight]:
    live = p.live_items
    lines: set[Line] = {
        (Fraction(1), Fraction(0), Fraction(0)),  # x = 0
        (Fraction(0), Fraction(1), Fraction(0)),  # y = 0
        (Fraction(1), Fraction(1), Fraction(1)),  # x + y = 1
    }
    for j in live:
        for a, b in itertools.combinations(range(3), 2):
            line = _line_of(_form_sub(_price_form(p, a, j, eta), _price_form(p, b, j, eta)))
            if line is not None:
                lines.add(line)
    line_list = sorted(lines)

    corners = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))]
    vertices: set[tuple[Fraction, Fraction]] = set(corners)
    for l1, l2 in itertools.combinations(line_list, 2):
        pt = _intersect(l1, l2)
        if pt is not None and _in_triangle(pt):
            vertices.add(pt)

    candidates: set[tuple[Fraction, Fraction]] = set(vertices)

    # 1-dimensional faces: walk each line's in-triangle segments
    for line in line_list:
        a, b, c = line
        on_line = sorted(
            (pt for pt in vertices if a * pt[0] + b * pt[1] == c),
            key=lambda q: (-b * q[0] + a * q[1]),
        )
        for p1, p2 in zip(on_line, on_line[1:]):
            if p1 == p2:
                continue
            mid = ((p1[0] + p2[0]) / 2, (p1[1] + p2[1]) / 2)
            candidates.add(mid)
            for f in _bundle_tie_forms_at(p, mid, eta):
                v1, v2 = _form_eval(f, p1), _form_eval(f, p2)
                if v1 == v2:
                    continue
                u = v1 / (v1 - v2)
                if 0 < u < 1:
                    candidates.add((p1[0] + u * (p2[0] - p1[0]), p1[1] + u * (p2[1] - p1[1])))

    # 2-dimensional cells: slab interior representatives, then their
    # all-bundles-equal points
    xs = sorted({pt[0] for pt in vertices})
    sigmas: dict[tuple[int, ...], tuple[Fraction, Fraction]] = {}
    for x1, x2 in zip(xs, xs[1:]):
        xm = (x1 + x2) / 2
        ylim = 1 - xm
        crossings: set[Fraction] = set()
        for a, b, c in line_list:
            if b == 0:
                continue
            y = (c - a * xm) / b
            if 0 <= y <= ylim:
                crossings.add(y)
        ys = sorted(crossings)
        for y1, y2 in zip(ys, ys[1:]):
            rep = (xm, (y1 + y2) / 2)
            sigma = tuple(
                _argmax_map_at(p, (rep[0], rep[1], 1 - rep[0] - rep[1]), eta)[j] for j in live
            )
            sigmas.setdefault(sigma, rep)
    for sigma, rep in sorted(sigmas.items()):
        candidates.add(rep)
        bundle_forms = [
            (Fraction(0), Fraction(0), Fraction(0)) for _ in range(3)
        ]
        for j, holder in zip(live, sigma):
            bundle_forms[holder] = _form_add(bundle_forms[holder], _price_form(p, holder, j, eta))
        f01 = _form_sub(bundle_forms[0], bundle_forms[1])
        f02 = _form_sub(bundle_forms[0], bundle_forms[2])
        l01, l02 = _line_of(f01), _line_of(f02)
        if l01 is None and f01[2] != 0:
            continue
        if l02 is None and f02[2] != 0:
            continue
        if l01 is not None and l02 is not None:
            pt = _intersect(l01, l02)
            if pt is None or not _in_triangle(pt):
                continue
            if _sigma_attains(p, pt, eta, live, sigma):
                candidates.add(pt)
        # one degenerate pair: the all-equal locus is a whole line whose
        # triangle crossings are already covered by the 1-face pass

    ordered = sorted(candidates)
    out: list[Weight] = []
    for x, y in ordered:
        out.append((x, y, 1 - x - y))
    return out


def _bundle_tie_forms_at(
    p: PerturbedInstance, pt: tuple[Fraction, Fraction], eta: Fraction
) -> list[Form]:
    """Bundle price difference forms of every optimal-face allocation at a point."""
    w = (pt[0], pt[1], 1 - pt[0] - pt[1])
    mult = [wi + eta for wi in w]
    holders: dict[int, list[int]] = {}
    for j in p.live_items:
        vals = [mult[i] * p.pvalues[i][j] for i in range(p.n)]
        top = max(vals)
        holders[j] = [i for i in range(p.n) if vals[i] == top]
    ties = sorted(j for j, hs in holders.items() if len(hs) >= 2)
    forms: list[Form] = []
    price_forms = {j: _price_form(p, min(holders[j]), j, eta) for j in p.live_items}
    for choice in itertools.product(*(holders[j] for j in ties)):
        assign = {j: holders[j][0] for j in p.live_items if len(holders[j]) == 1}
        assign.update(dict(zip(ties, choice)))
        bundle_forms = [(Fraction(0), Fraction(0), Fraction(0)) for _ in range(3)]
        for j, holder in assign.items():
            bundle_forms[holder] = _form_add(bundle_forms[holder], price_forms[j])
        for a, b in itertools.combinations(range(3), 2):
            forms.append(_form_sub(bundle_forms[a], bundle_forms[b]))
    return forms


def _sigma_attains(
    p: PerturbedInstance,
    pt: tuple[Fraction, Fraction],
    eta: Fraction,
    live: tuple[int, ...],
    sigma: tuple[int, ...],
) -> bool:
    w = (pt[0], pt[1], 1 - pt[0] - pt[1])
    mult = [wi + eta for wi in w]
    for j, holder in zip(live, sigma):
        val = mult[holder] * p.pvalues[holder][j]
        if any(mult[i] * p.pvalues[i][j] > val for i in range(3)):
            return False
    return True


# ---------------------------------------------------------------------------
# candidate driver and subdivision strategy


def _thread_count() -> int:
    raw = os.environ.get("MANNA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _first_success(
    candidates: Sequence[Weight],
    evaluate: Callable[[Weight], frozenset[int]],
    needed: frozenset[int],
) -> Weight | None:
    """First candidate (in the given order) covered by every agent.

    Evaluation may run on a thread pool; results are always consumed in
    candidate order, so the outcome never depends on the worker count.
    """
    threads = _thread_count()
    if threads <= 1:
        for w in candidates:
            if evaluate(w) == needed:
                return w
        return None

    def safe(w: Weight):
        try:
            return ("ok", evaluate(w))
        except Exception as exc:  # re-raised in candidate order below
            return ("err", exc)

    chunk = max(4 * threads, 16)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, len(candidates), chunk):
            block = candidates[start : start + chunk]
            for w, (status, result) in zip(block, pool.map(safe, block)):
                if status == "err":
                    raise result
                if result == needed:
                    return w
    return None


def find_wstar(
    p: PerturbedInstance,
    eta: Fraction,
    strategy: str = "auto",
    *,
    face_guard: int = DEFAULT_FACE_GUARD,
    max_depth: int = DEFAULT_MAX_DEPTH,
    simplex_budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> StarPoint:
    """Locate and certify a weight in the intersection of all membership regions.

    ``strategy`` is "exact", "subdivision", or "auto" (exact when
    n <= 3). The exact strategy is complete for its supported sizes; an
    exhausted candidate set is a soundness violation worth reporting
    with the instance attached. The subdivision strategy reports an
    unresolved search rather than returning an uncertified point.
    """
    if strategy == "auto":
        strategy = "exact" if p.n <= 3 else "subdivision"
    if strategy == "exact":
        if p.n > 3:
            raise InputError("exact strategy supports at most 3 agents; use subdivision")
        candidates = (
            _segment_candidates(p, eta) if p.n == 2 else _plane_candidates(p, eta)
        )
        needed = frozenset(range(p.n))

        def evaluate(w: Weight) -> frozenset[int]:
            return membership_summary(p, w, eta, face_guard).winners

        found = _first_success(candidates, evaluate, needed)
        if found is None:
            raise SoundnessError(
                f"exact search exhausted {len(candidates)} candidates without a common point "
                f"(n={p.n}, m={p.m}, seed={p.seed}); this indicates degeneracy or a bug"
            )
        return build_star_point(p, found, eta)
    if strategy == "subdivision":
        return _subdivision_search(
            p, eta, face_guard=face_guard, max_depth=max_depth, simplex_budget=simplex_budget
        )
    raise InputError(f"unknown strategy {strategy!r}")


def _subdivision_search(
    p: PerturbedInstance,
    eta: Fraction,
    *,
    face_guard: int,
    max_depth: int,
    simplex_budget: int,
) -> StarPoint:
    n = p.n
    needed = frozenset(range(n))
    unit = [
        tuple(Fraction(1) if k == i else Fraction(0) for k in range(n)) for i in range(n)
    ]
    root = tuple(unit)

    winners_cache: dict[Weight, frozenset[int]] = {}
    labels_cache: dict[Weight, int] = {}

    def winners(w: Weight) -> frozenset[int]:
        if w not in winners_cache:
            winners_cache[w] = membership_summary(p, w, eta, face_guard).winners
        return winners_cache[w]

    def label(w: Weight) -> int:
        if w not in labels_cache:
            sup = support(w)
            cands = sorted(winners(w) & sup)
            if not cands:
                raise SoundnessError(f"covering failed at weight {tuple(map(str, w))}")
            labels_cache[w] = cands[0]
        return labels_cache[w]

    def centroid(simplex: tuple[Weight, ...]) -> Weight:
        return tuple(sum(v[k] for v in simplex) / n for k in range(n))

    def diameter(simplex: tuple[Weight, ...]) -> Fraction:
        return max(
            sum(abs(a[k] - b[k]) for k in range(n))
            for a, b in itertools.combinations(simplex, 2)
        )

    best: tuple[Fraction, tuple[Weight, ...]] | None = None
    stack: list[tuple[int, tuple[Weight, ...]]] = [(0, root)]
    processed = 0
    while stack:
        depth, simplex = stack.pop()
        processed += 1
        if processed > simplex_budget:
            break
        for w in list(simplex) + [centroid(simplex)]:
            if winners(w) == needed:
                return build_star_point(p, w, eta)
        if len({label(v) for v in simplex}) != n:
            continue
        d = diameter(simplex)
        if best is None or d < best[0]:
            best = (d, simplex)
        if depth >= max_depth:
            continue
        children = []
        for perm in itertools.permutations(range(n)):
            chain = []
            acc = [Fraction(0)] * n
            for idx, vi in enumerate(perm, start=1):
                acc = [a + c for a, c in zip(acc, simplex[vi])]
                chain.append(tuple(a / idx for a in acc))
            children.append(tuple(chain))
        for child in reversed(children):
            stack.append((depth + 1, child))
    raise SearchUnresolvedError(
        "subdivision reached its depth limit without certifying a common point",
        best_simplex=None if best is None else best[1],
        diameter=None if best is None else best[0],
    )
