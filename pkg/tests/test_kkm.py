from __future__ import annotations

import random
from fractions import Fraction as F

import pytest

from manna.errors import InputError, SearchUnresolvedError
from manna.kkm import (
    build_star_point,
    cell_membership,
    covering_label,
    find_wstar,
    membership_summary,
)
from manna.preprocess import ItemClass, compute_constants, perturb
from manna.pricing import dual_prices, enumerate_opt, price_of, support, build_tie_graph

from test_pricing import HALF, ETA, random_perturbed, random_weight


class TestCellMembership:
    def test_worked_example(self, ebar):
        witness = cell_membership(ebar, HALF, ETA, 0)
        assert witness is not None
        prices = dual_prices(ebar, HALF, ETA)
        bundle_prices = [price_of(prices, b) for b in witness.allocation]
        assert witness.max_price == max(bundle_prices) == bundle_prices[0]
        assert cell_membership(ebar, HALF, ETA, 1) is None

    def test_symmetric_instance_both_members(self, disjoint_support):
        eta = F(1, 12)
        assert cell_membership(disjoint_support, HALF, eta, 0) is not None
        assert cell_membership(disjoint_support, HALF, eta, 1) is not None


class TestCoveringLabel:
    def test_worked_example(self, ebar):
        assert covering_label(ebar, HALF, ETA) == 0

    def test_vertex_weight_labels_the_supported_agent(self, ebar):
        assert covering_label(ebar, (F(1), F(0)), ETA) == 0
        assert covering_label(ebar, (F(0), F(1)), ETA) == 1

    def test_never_fails_on_random_weights(self):
        rng = random.Random(23)
        for seed in range(20):
            n = 2 + seed % 2
            p = random_perturbed(500 + seed, n, 2 + seed % 4)
            for _ in range(10):
                w = random_weight(rng, n)
                label = covering_label(p, w, p.constants.eta)
                assert label in support(w)


class TestBoundaryBehavior:
    def test_unsupported_agents_never_get_goods_and_aux_tops(self):
        rng = random.Random(31)
        checked = 0
        for seed in range(24):
            n = 2 + seed % 2
            p = random_perturbed(600 + seed, n, 2 + seed % 4)
            eta = p.constants.eta
            classes = p.classes()
            goods = {j for j, c in classes.items() if c is ItemClass.GOOD}
            chores = {j for j, c in classes.items() if c is ItemClass.CHORE}
            for _ in range(8):
                w = list(random_weight(rng, n))
                w[rng.randrange(n)] = F(0)
                total = sum(w)
                if total == 0:
                    continue
                w = tuple(x / total for x in w)
                sup = support(w)
                if sup == frozenset(range(n)):
                    continue
                prices = dual_prices(p, w, eta)
                tg = build_tie_graph(p, w, eta, prices)
                top = max(w)
                argmax_w = {i for i in range(n) if w[i] == top}
                for alloc in enumerate_opt(tg):
                    holders = {j: i for i in range(n) for j in alloc[i]}
                    assert all(holders[j] in sup for j in goods)
                    ell = holders[p.aux_item]
                    assert ell in argmax_w
                    assert not (alloc[ell] & chores)
                    bundle_prices = [price_of(prices, b) for b in alloc]
                    outside = [bundle_prices[i] for i in range(n) if i not in sup]
                    if outside:
                        assert max(outside) <= bundle_prices[ell]
                        assert bundle_prices[ell] <= max(
                            bundle_prices[i] for i in sup
                        )
                    checked += 1
        assert checked > 50


class TestFindWstar:
    def test_symmetric_instance_half_half(self, disjoint_support):
        eta = F(1, 12)
        star = find_wstar(disjoint_support, eta, "exact")
        summary = membership_summary(disjoint_support, star.w_star, eta)
        assert summary.winners == frozenset({0, 1})
        # the symmetric midpoint is itself certified
        assert membership_summary(disjoint_support, HALF, eta).winners == frozenset({0, 1})

    def test_e1_end_to_end_membership(self, e1):
        consts = compute_constants(e1)
        p = perturb(e1, 7, consts)
        eta = p.constants.eta
        star = find_wstar(p, eta, "exact")
        for i in range(2):
            assert cell_membership(p, star.w_star, eta, i) is not None
        for witness in star.witnesses:
            prices = star.prices
            bundle_prices = [price_of(prices, b) for b in witness.allocation]
            assert bundle_prices[witness.agent] == max(bundle_prices)

    def test_deterministic_output(self, e1):
        consts = compute_constants(e1)
        p = perturb(e1, 3, consts)
        eta = p.constants.eta
        a = find_wstar(p, eta, "exact")
        b = find_wstar(p, eta, "exact")
        assert a.w_star == b.w_star

    def test_thread_count_does_not_change_result(self, e1, monkeypatch):
        consts = compute_constants(e1)
        p = perturb(e1, 3, consts)
        eta = p.constants.eta
        monkeypatch.setenv("MANNA_THREADS", "1")
        a = find_wstar(p, eta, "exact")
        monkeypatch.setenv("MANNA_THREADS", "4")
        b = find_wstar(p, eta, "exact")
        assert a.w_star == b.w_star

    def test_three_agents_exact(self):
        p = random_perturbed(777, 3, 4)
        star = find_wstar(p, p.constants.eta, "exact")
        assert membership_summary(p, star.w_star, p.constants.eta).winners == frozenset(
            range(3)
        )

    def test_exact_rejects_large_n(self):
        p = random_perturbed(800, 4, 2)
        with pytest.raises(InputError):
            find_wstar(p, p.constants.eta, "exact")

    def test_subdivision_resolves_symmetric(self, disjoint_support):
        star = find_wstar(disjoint_support, F(1, 12), "subdivision")
        assert star.w_star == HALF

    def test_subdivision_reports_unresolved(self, e1):
        consts = compute_constants(e1)
        p = perturb(e1, 7, consts)
        with pytest.raises(SearchUnresolvedError) as err:
            find_wstar(p, p.constants.eta, "subdivision", max_depth=10)
        assert err.value.diameter is not None

    def test_chain_fixture_is_star_point(self, chain_fixture):
        p, w, eta = chain_fixture
        star = build_star_point(p, w, eta)
        assert {cw.agent for cw in star.witnesses} == {0, 1, 2}
