"""Independent brute-force ground truth and full certificate verification.

Everything here recomputes results definitionally: allocation
enumeration, dominance scans, threshold recomputation by filtering the
whole allocation space on objective equality, and the certificate
checker that re-derives prices and constants from first principles.
None of it shares code paths with the solver's structural shortcuts,
so agreement is meaningful evidence.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Sequence

from .certificate import Certificate, instance_digest
from .errors import SizeGuardError, VerificationError
from .leveling import p_plus
from .model import (
    Allocation,
    Instance,
    SwapWitness,
    bundle_value,
    format_rat,
    ief1_witnesses,
    validate_allocation,
)
from .preprocess import (
    DEFAULT_ENUM_GUARD,
    Constants,
    ItemClass,
    PerturbedInstance,
    compute_eta,
    compute_lambda,
    compute_omega,
    choose_epsilon,
    normalize_mixed,
    omega_lower_bound,
    restrict,
    value_cap,
)
from .pricing import build_tie_graph, dual_prices, enumerate_opt, lp_objective, price_of, support


def assignments(n: int, m: int, guard: int = DEFAULT_ENUM_GUARD) -> Iterator[tuple[int, ...]]:
    """All item-to-agent assignment vectors in mixed-radix order (item 0 fastest)."""
    if n ** m > guard:
        raise SizeGuardError(f"{n}^{m} assignments exceed guard {guard}")
    vec = [0] * m
    while True:
        yield tuple(vec)
        j = 0
        while j < m:
            vec[j] += 1
            if vec[j] < n:
                break
            vec[j] = 0
            j += 1
        if j == m:
            return


def enumerate_allocations(n: int, m: int, guard: int = DEFAULT_ENUM_GUARD) -> Iterator[Allocation]:
    """Stream of all complete allocations, never materialized as a list."""
    if n < 2 or m < 2:
        from .errors import InputError

        raise InputError(f"need n >= 2 and m >= 2, got n={n}, m={m}")
    for vec in assignments(n, m, guard):
        bundles: list[set[int]] = [set() for _ in range(n)]
        for j, holder in enumerate(vec):
            bundles[holder].add(j)
        yield tuple(frozenset(b) for b in bundles)


def _int_matrix(values: Sequence[Sequence[Fraction]]) -> tuple[list[list[int]], int]:
    lcm = 1
    for row in values:
        for v in row:
            lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
    return [[int(v * lcm) for v in row] for row in values], lcm


def brute_po(inst: Instance, alloc: Allocation, guard: int = DEFAULT_ENUM_GUARD) -> bool:
    """Pareto optimality by exhaustive dominance scan."""
    validate_allocation(inst, alloc, complete=True)
    if inst.n ** inst.m > guard:
        raise SizeGuardError(f"{inst.n}^{inst.m} allocations exceed guard {guard}")
    ints, _ = _int_matrix(inst.values)
    own = [sum(ints[i][t] for t in alloc[i]) for i in range(inst.n)]
    for vec in assignments(inst.n, inst.m, guard):
        vals = [0] * inst.n
        for j, holder in enumerate(vec):
            vals[holder] += ints[holder][j]
        if all(vals[i] >= own[i] for i in range(inst.n)) and any(
            vals[i] > own[i] for i in range(inst.n)
        ):
            return False
    return True


def _ief1_ok_int(ints: list[list[int]], n: int, m: int, vec: tuple[int, ...]) -> bool:
    bundle_vals = [[0] * n for _ in range(n)]  # [viewer][holder]
    for j, holder in enumerate(vec):
        for i in range(n):
            bundle_vals[i][holder] += ints[i][j]
    for i in range(n):
        target = max(bundle_vals[i])
        own = bundle_vals[i][i]
        if own >= target:
            continue
        best = own
        for j in range(m):
            adj = own - ints[i][j] if vec[j] == i else own + ints[i][j]
            if adj > best:
                best = adj
        if best < target:
            return False
    return True


def brute_find_ief1_po(
    inst: Instance, guard: int = DEFAULT_ENUM_GUARD, *, collect_all: bool = False
) -> Allocation | None | tuple[Allocation, ...]:
    """First (or, with ``collect_all``, every) allocation that is fair and efficient.

    Valid instances always admit one, so an empty result is itself a
    reportable finding rather than a normal outcome.
    """
    n, m = inst.n, inst.m
    if n ** m > guard:
        raise SizeGuardError(f"{n}^{m} allocations exceed guard {guard}")
    ints, _ = _int_matrix(inst.values)
    vectors = list(assignments(n, m, guard))
    value_table = []
    for vec in vectors:
        vals = [0] * n
        for j, holder in enumerate(vec):
            vals[holder] += ints[holder][j]
        value_table.append(vals)

    def is_po(idx: int) -> bool:
        own = value_table[idx]
        for other in value_table:
            if all(other[i] >= own[i] for i in range(n)) and any(
                other[i] > own[i] for i in range(n)
            ):
                return False
        return True

    def to_alloc(vec: tuple[int, ...]) -> Allocation:
        bundles: list[set[int]] = [set() for _ in range(n)]
        for j, holder in enumerate(vec):
            bundles[holder].add(j)
        return tuple(frozenset(b) for b in bundles)

    found: list[Allocation] = []
    for idx, vec in enumerate(vectors):
        if _ief1_ok_int(ints, n, m, vec) and is_po(idx):
            if not collect_all:
                return to_alloc(vec)
            found.append(to_alloc(vec))
    if collect_all:
        return tuple(found)
    return None


def brute_tau(
    p: PerturbedInstance, w: Sequence[Fraction], eta: Fraction, guard: int = DEFAULT_ENUM_GUARD
) -> Fraction:
    """Threshold recomputed definitionally over the whole allocation space.

    Optimal-face membership is decided by objective equality alone (not
    via the tie-graph structure), giving an independent route to the
    same min-max value.
    """
    mbar = p.m + 1
    if p.n ** mbar > guard:
        raise SizeGuardError(f"{p.n}^{mbar} allocations exceed guard {guard}")
    mult = [Fraction(wi) + eta for wi in w]
    weighted = [[mult[i] * p.pvalues[i][j] for j in range(mbar)] for i in range(p.n)]
    ints, lcm = _int_matrix(weighted)
    price_int = [max(ints[i][j] for i in range(p.n)) for j in range(mbar)]
    total = sum(price_int)
    best: int | None = None
    for vec in assignments(p.n, mbar, guard):
        objective = 0
        bundle_price = [0] * p.n
        for j, holder in enumerate(vec):
            objective += ints[holder][j]
            bundle_price[holder] += price_int[j]
        if objective != total:
            continue
        top = max(bundle_price)
        if best is None or top < best:
            best = top
    if best is None:
        raise VerificationError("no allocation attains the dual total; prices are inconsistent")
    return Fraction(best, lcm)


def local_search_ief1(
    inst: Instance,
    rng: random.Random,
    *,
    restarts: int = 40,
    max_steps: int = 400,
) -> Allocation | None:
    """Greedy descent on envy shortfall until a one-swap-fair allocation appears."""
    n, m = inst.n, inst.m
    ints, _ = _int_matrix(inst.values)

    def score(vec: list[int]) -> tuple[int, int]:
        bundle_vals = [[0] * n for _ in range(n)]
        for j, holder in enumerate(vec):
            for i in range(n):
                bundle_vals[i][holder] += ints[i][j]
        bad = 0
        shortfall = 0
        for i in range(n):
            target = max(bundle_vals[i])
            own = bundle_vals[i][i]
            best = own
            if own < target:
                for j in range(m):
                    adj = own - ints[i][j] if vec[j] == i else own + ints[i][j]
                    if adj > best:
                        best = adj
            if best < target:
                bad += 1
                shortfall += target - best
        return bad, shortfall

    for _ in range(restarts):
        vec = [rng.randrange(n) for _ in range(m)]
        current = score(vec)
        for _ in range(max_steps):
            if current[0] == 0:
                bundles: list[set[int]] = [set() for _ in range(n)]
                for j, holder in enumerate(vec):
                    bundles[holder].add(j)
                return tuple(frozenset(b) for b in bundles)
            improved = False
            for j in range(m):
                original = vec[j]
                for a in range(n):
                    if a == original:
                        continue
                    vec[j] = a
                    trial = score(vec)
                    if trial < current:
                        current = trial
                        improved = True
                        break
                    vec[j] = original
                if improved:
                    break
            if not improved:
                break
    return None


# ---------------------------------------------------------------------------
# certificate verification


@dataclass
class VerificationReport:
    """Structured verdicts; ``overall`` is the conjunction of every part."""

    consistency: dict[str, bool] = field(default_factory=dict)
    ief1_on_perturbed: dict[str, Any] | None = None
    ief1_on_original: dict[str, Any] | None = None
    po_on_original: dict[str, Any] | None = None
    opt_membership: bool | None = None
    tau_check: bool | None = None
    boundary_checks: list[dict[str, Any]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    overall: bool = False

    def fail(self, clause: str) -> None:
        self.failures.append(clause)

    def finish(self) -> VerificationReport:
        self.overall = not self.failures
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "consistency": self.consistency,
            "ief1_on_perturbed": self.ief1_on_perturbed,
            "ief1_on_original": self.ief1_on_original,
            "po_on_original": self.po_on_original,
            "opt_membership": self.opt_membership,
            "tau_check": self.tau_check,
            "boundary_checks": self.boundary_checks,
            "failures": self.failures,
            "overall": self.overall,
        }


def _witness_dicts(witnesses: Sequence[SwapWitness | None], aux: int | None) -> list[dict | None]:
    out: list[dict | None] = []
    for w in witnesses:
        if w is None:
            out.append(None)
        else:
            swap = ["aux" if aux is not None and t == aux else t + 1 for t in sorted(w.swap)]
            out.append({"agent": w.agent, "swap": swap, "value": format_rat(w.applied_bundle_value)})
    return out


def _check_swaps(
    inst: Instance, alloc: Allocation, swaps: Sequence[frozenset[int]]
) -> bool:
    """Stored per-agent swap sets must each certify dominance directly."""
    if len(swaps) != inst.n:
        return False
    for i, swap in enumerate(swaps):
        if len(swap) > 1:
            return False
        adjusted = bundle_value(inst, i, alloc[i] ^ swap)
        target = max(bundle_value(inst, i, alloc[j]) for j in range(inst.n))
        if adjusted < target:
            return False
    return True


def verify_certificate(
    inst: Instance, cert: Certificate, guard: int = DEFAULT_ENUM_GUARD
) -> VerificationReport:
    """Re-derive and re-check everything a certificate claims.

    Prices, constants, the threshold, optimal-face membership, the
    price-level fairness chain, value-level fairness on both instances,
    Pareto optimality on the original by exhaustive scan, and the
    boundary properties when the certified weight has a strict support.
    Failures never raise; they are named in the report.
    """
    report = VerificationReport()

    def check(name: str, ok: bool) -> bool:
        report.consistency[name] = bool(ok)
        if not ok:
            report.fail(name)
        return bool(ok)

    check("digest", cert.instance_digest == instance_digest(inst))

    try:
        validate_allocation(inst, cert.allocation_original, complete=True)
    except Exception:
        check("allocation-original-shape", False)
        return report.finish()
    check("allocation-original-shape", True)

    if cert.trivial:
        normalized = normalize_mixed(inst)
        check("trivial-instance", compute_lambda(normalized) is None)
        _value_level_checks(report, inst, cert, guard)
        return report.finish()

    normalized = normalize_mixed(inst)
    lam = compute_lambda(normalized)
    ok_shape = (
        cert.perturbed_values is not None
        and len(cert.perturbed_values) == inst.n
        and all(len(row) == inst.m + 1 for row in cert.perturbed_values)
        and cert.allocation_perturbed is not None
        and cert.w_star is not None
        and cert.prices is not None
        and len(cert.prices) == inst.m + 1
        and cert.tau is not None
        and cert.eta is not None
        and cert.epsilon is not None
        and cert.swaps_perturbed is not None
    )
    if not check("certificate-shape", ok_shape):
        return report.finish()

    check("lambda", lam is not None and cert.lam == lam)
    if lam is None:
        return report.finish()

    try:
        omega = compute_omega(normalized, guard)
        if cert.omega_exact:
            check("omega", cert.omega == omega)
        else:
            check(
                "omega",
                cert.omega is not None
                and cert.omega == omega_lower_bound(normalized)
                and (omega is None or cert.omega <= omega),
            )
    except SizeGuardError:
        # an exact omega claim cannot be refuted below the guard; the
        # bound-mode formula still can be checked
        check(
            "omega",
            cert.omega_exact or cert.omega == omega_lower_bound(normalized),
        )

    cap = value_cap(normalized)
    check("epsilon", cert.epsilon == choose_epsilon(lam, cert.omega, inst.n, inst.m, cap))

    ok_signs = True
    eps = cert.epsilon
    for i in range(inst.n):
        for j in range(inst.m):
            v, vbar = normalized.values[i][j], cert.perturbed_values[i][j]
            if v == 0:
                ok_signs &= vbar == 0
            else:
                ok_signs &= 0 < v - vbar <= eps and (v > 0) == (vbar > 0)
    ok_signs &= all(cert.perturbed_values[i][inst.m] == lam / 2 for i in range(inst.n))
    check("perturbation-bounds", ok_signs)

    epsilons = tuple(
        tuple(normalized.values[i][j] - cert.perturbed_values[i][j] for j in range(inst.m))
        for i in range(inst.n)
    )
    constants = Constants(
        lam=lam,
        omega=cert.omega,
        omega_exact=cert.omega_exact,
        epsilon=cert.epsilon,
        eta=cert.eta,
        value_cap=cap,
    )
    p = PerturbedInstance(
        base=normalized,
        pvalues=cert.perturbed_values,
        epsilons=epsilons,
        constants=constants,
        seed=cert.seed,
    )
    check("eta", cert.eta == compute_eta(p))

    try:
        w_star = tuple(cert.w_star)
        prices = dual_prices(p, w_star, cert.eta)
        tg = build_tie_graph(p, w_star, cert.eta, prices)
    except Exception:
        check("pricing-rebuild", False)
        return report.finish()
    check("pricing-rebuild", True)

    from .leveling import compute_tau

    tau_ok = prices == cert.prices and compute_tau(tg, prices) == cert.tau
    report.tau_check = tau_ok
    if not tau_ok:
        report.fail("tau")

    alloc_bar = cert.allocation_perturbed
    try:
        validate_allocation(p.as_instance(), alloc_bar, complete=True)
        member = lp_objective(p, w_star, cert.eta, alloc_bar) == sum(prices)
    except Exception:
        member = False
    report.opt_membership = member
    if not member:
        report.fail("opt-membership")

    live = frozenset(p.live_items)
    chain_ok = True
    try:
        for i in range(inst.n):
            bundle = alloc_bar[i] & live
            if price_of(prices, bundle) > cert.tau:
                chain_ok = False
            if p_plus(tg, prices, i, bundle) < cert.tau:
                chain_ok = False
    except Exception:
        chain_ok = False
    pbar_inst = p.as_instance()
    witnesses_bar = ief1_witnesses(pbar_inst, alloc_bar)
    value_bar = all(w is not None for w in witnesses_bar)
    swaps_bar_ok = _check_swaps(pbar_inst, alloc_bar, cert.swaps_perturbed)
    report.ief1_on_perturbed = {
        "verdict": chain_ok and value_bar and swaps_bar_ok,
        "price_chain": chain_ok,
        "value_check": value_bar,
        "stored_swaps": swaps_bar_ok,
        "witnesses": _witness_dicts(witnesses_bar, p.aux_item),
    }
    if not report.ief1_on_perturbed["verdict"]:
        report.fail("ief1-on-perturbed")

    check("restriction", restrict(alloc_bar, p.aux_item) == cert.allocation_original)
    check(
        "swap-restriction",
        tuple(s - {p.aux_item} for s in cert.swaps_perturbed) == cert.swaps_original,
    )

    _value_level_checks(report, inst, cert, guard)

    if support(w_star) != frozenset(range(inst.n)):
        report.boundary_checks = _boundary_checks(p, tg, prices, w_star)
        for entry in report.boundary_checks:
            if not entry["ok"]:
                report.fail(f"boundary:{entry['name']}")

    return report.finish()


def _value_level_checks(
    report: VerificationReport, inst: Instance, cert: Certificate, guard: int
) -> None:
    alloc = cert.allocation_original
    witnesses = ief1_witnesses(inst, alloc)
    value_ok = all(w is not None for w in witnesses)
    swaps_ok = _check_swaps(inst, alloc, cert.swaps_original)
    report.ief1_on_original = {
        "verdict": value_ok and swaps_ok,
        "value_check": value_ok,
        "stored_swaps": swaps_ok,
        "witnesses": _witness_dicts(witnesses, None),
    }
    if not report.ief1_on_original["verdict"]:
        report.fail("ief1-on-original")
    try:
        po = brute_po(inst, alloc, guard)
        report.po_on_original = {"verdict": "pass" if po else "fail", "method": "enumeration"}
        if not po:
            report.fail("po-on-original")
    except SizeGuardError:
        report.po_on_original = {"verdict": "unverified", "method": "guard-exceeded"}


def _boundary_checks(
    p: PerturbedInstance,
    tg,
    prices: Sequence[Fraction],
    w_star: Sequence[Fraction],
) -> list[dict[str, Any]]:
    sup = support(w_star)
    classes = p.classes()
    goods = {j for j, c in classes.items() if c is ItemClass.GOOD}
    chores = {j for j, c in classes.items() if c is ItemClass.CHORE}
    top_weight = max(w_star)
    argmax_w = {i for i, x in enumerate(w_star) if x == top_weight}
    goods_ok = True
    aux_ok = True
    price_ok = True
    for alloc in enumerate_opt(tg):
        holders = {j: i for i in range(p.n) for j in alloc[i]}
        for j in goods:
            if holders[j] not in sup:
                goods_ok = False
        ell = holders[p.aux_item]
        if ell not in argmax_w or (alloc[ell] & chores):
            aux_ok = False
        bundle_prices = [price_of(prices, b) for b in alloc]
        outside = [bundle_prices[i] for i in range(p.n) if i not in sup]
        inside = [bundle_prices[i] for i in range(p.n) if i in sup]
        if outside and not (max(outside) <= bundle_prices[ell] <= max(inside)):
            price_ok = False
    return [
        {"name": "goods-stay-supported", "ok": goods_ok},
        {"name": "aux-holder-top-weight-no-chores", "ok": aux_ok},
        {"name": "unsupported-prices-below-holder", "ok": price_ok},
    ]
