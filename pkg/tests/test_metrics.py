import math
import random

import pytest

from rplsim.metrics import (
    DEFAULT_WORST_ETX,
    DivisionByZeroHistory,
    EmptyHistory,
    EstimatorParams,
    InvalidQueue,
    KEEP,
    LinkStats,
    MetricError,
    ParentView,
    QofHistory,
    beta_ewqof,
    beta_maxqof,
    etx,
    etx_or_worst,
    hdlac,
    local_qof,
    parent_score,
    propagated_qof,
    rank_from_hops,
    select_parent,
)


def unrolled_beta(samples, alpha):
    """Independent oracle: explicit weighted sum with w1 = alpha^(k-1) and
    wj = (1-alpha)*alpha^(k-j) for j >= 2."""
    k = len(samples)
    total = alpha ** (k - 1) * samples[0]
    for j in range(2, k + 1):
        total += (1.0 - alpha) * alpha ** (k - j) * samples[j - 1]
    return total


def view(parent_id=1, rank=2, qof=0.0, beta=0.0, tnop=0, tnopss=0):
    return ParentView(
        parent_id=parent_id,
        rank=rank,
        advertised_qof=qof,
        advertised_beta=beta,
        link=LinkStats(tnop=tnop, tnopss=tnopss),
    )


class TestRankFromHops:
    @pytest.mark.parametrize("hops,expected", [(0, 1), (1, 2), (5, 6)])
    def test_rank(self, hops, expected):
        assert rank_from_hops(hops) == expected

    def test_negative_rejected(self):
        with pytest.raises(MetricError):
            rank_from_hops(-1)


class TestEtx:
    def test_lossless(self):
        assert etx(LinkStats(10, 10)) == 1.0

    def test_half_rate(self):
        assert etx(LinkStats(10, 5)) == 2.0

    def test_no_history_prior(self):
        assert etx(LinkStats(0, 0)) == 1.0

    def test_zero_success_raises(self):
        with pytest.raises(DivisionByZeroHistory):
            etx(LinkStats(5, 0))

    def test_zero_success_clamped(self):
        assert etx_or_worst(LinkStats(5, 0)) == DEFAULT_WORST_ETX
        assert etx_or_worst(LinkStats(5, 0), worst_etx=8.0) == 8.0

    def test_inconsistent_counters_rejected(self):
        with pytest.raises(MetricError):
            etx(LinkStats(3, 4))

    def test_at_least_one(self):
        rng = random.Random(7)
        for _ in range(200):
            tnop = rng.randint(0, 50)
            tnopss = rng.randint(0, tnop) if tnop else 0
            assert etx_or_worst(LinkStats(tnop, tnopss)) >= 1.0


class TestLocalQof:
    @pytest.mark.parametrize("nontp,ql,expected", [(0, 10, 0.0), (10, 10, 1.0), (5, 10, 0.5)])
    def test_values(self, nontp, ql, expected):
        assert local_qof(nontp, ql) == expected

    def test_zero_capacity_rejected(self):
        with pytest.raises(InvalidQueue):
            local_qof(0, 0)

    def test_overfull_rejected(self):
        with pytest.raises(InvalidQueue):
            local_qof(11, 10)


class TestPropagatedQof:
    @pytest.mark.parametrize("own,parent,expected", [(0.3, 0.8, 0.8), (0.8, 0.3, 0.8), (0.5, 0.5, 0.5)])
    def test_max(self, own, parent, expected):
        assert propagated_qof(own, parent) == expected

    def test_root_has_no_parent(self):
        assert propagated_qof(0.4, None) == 0.4

    def test_path_fold_equals_path_max(self):
        # folding up a chain must equal the maximum local occupancy on the path
        rng = random.Random(11)
        for _ in range(200):
            locals_ = [rng.random() for _ in range(rng.randint(1, 8))]
            folded = locals_[0]
            for q in locals_[1:]:
                folded = propagated_qof(q, folded)
            assert folded == pytest.approx(max(locals_), abs=0.0)


class TestBetaEwqof:
    def test_constant_window_reproduced(self):
        for c in (0.0, 0.25, 0.7, 1.0):
            for n in (1, 3, 8):
                assert beta_ewqof([c] * n, 0.5) == pytest.approx(c, abs=1e-12)

    def test_two_sample_window(self):
        # oracle: 0.5*0.4 + 0.5*0.8 = 0.6
        assert unrolled_beta([0.4, 0.8], 0.5) == pytest.approx(0.6, abs=1e-15)
        assert beta_ewqof([0.4, 0.8], 0.5) == pytest.approx(0.6, abs=1e-12)

    def test_three_sample_window(self):
        # oracle: 0.25*0 + 0.25*0 + 0.5*1 = 0.5
        assert unrolled_beta([0.0, 0.0, 1.0], 0.5) == pytest.approx(0.5, abs=1e-15)
        assert beta_ewqof([0.0, 0.0, 1.0], 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_matches_unrolled_oracle(self):
        rng = random.Random(42)
        for _ in range(500):
            samples = [rng.random() for _ in range(rng.randint(1, 16))]
            alpha = rng.uniform(0.05, 0.95)
            assert beta_ewqof(samples, alpha) == pytest.approx(
                unrolled_beta(samples, alpha), abs=1e-12
            )

    def test_empty_rejected(self):
        with pytest.raises(EmptyHistory):
            beta_ewqof([], 0.5)

    def test_bad_alpha_rejected(self):
        for alpha in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(MetricError):
                beta_ewqof([0.5], alpha)

    def test_result_in_unit_interval(self):
        rng = random.Random(1)
        for _ in range(300):
            samples = [rng.random() for _ in range(rng.randint(1, 12))]
            b = beta_ewqof(samples, rng.uniform(0.05, 0.95))
            assert 0.0 <= b <= 1.0

    def test_accepts_qof_history(self):
        h = QofHistory(4)
        for v in (0.0, 0.0, 1.0):
            h.append(v)
        assert beta_ewqof(h, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_single_append_sensitivity(self):
        # below capacity, appending q moves the estimate by exactly
        # (1 - alpha) * |q - previous|
        rng = random.Random(3)
        for _ in range(200):
            samples = [rng.random() for _ in range(rng.randint(1, 6))]
            alpha = rng.uniform(0.05, 0.95)
            q = rng.random()
            before = beta_ewqof(samples, alpha)
            after = beta_ewqof(samples + [q], alpha)
            assert abs(after - before) <= (1.0 - alpha) * abs(q - before) + 1e-12

    def test_monotone_in_each_sample(self):
        rng = random.Random(5)
        for _ in range(200):
            samples = [rng.random() for _ in range(rng.randint(1, 8))]
            alpha = rng.uniform(0.05, 0.95)
            base = beta_ewqof(samples, alpha)
            idx = rng.randrange(len(samples))
            bumped = list(samples)
            bumped[idx] = min(1.0, bumped[idx] + rng.random() * (1 - bumped[idx]))
            assert beta_ewqof(bumped, alpha) >= base - 1e-12


class TestBetaMaxqof:
    def test_burst_peak_dominates(self):
        assert beta_maxqof([0.1, 0.9, 0.1]) == 0.9

    def test_singleton(self):
        assert beta_maxqof([0.37]) == 0.37

    def test_monotone_tail(self):
        assert beta_maxqof([0.2, 0.3, 0.4]) == 0.4

    def test_empty_rejected(self):
        with pytest.raises(EmptyHistory):
            beta_maxqof([])

    def test_dominates_ewqof(self):
        rng = random.Random(9)
        for _ in range(500):
            samples = [rng.random() for _ in range(rng.randint(1, 12))]
            alpha = rng.uniform(0.05, 0.95)
            assert beta_ewqof(samples, alpha) <= beta_maxqof(samples) + 1e-12

    def test_monotone_in_each_sample(self):
        rng = random.Random(13)
        for _ in range(200):
            samples = [rng.random() for _ in range(rng.randint(1, 8))]
            base = beta_maxqof(samples)
            idx = rng.randrange(len(samples))
            bumped = list(samples)
            bumped[idx] = min(1.0, bumped[idx] + 0.3)
            assert beta_maxqof(bumped) >= base


class TestQofHistory:
    def test_capacity_evicts_oldest(self):
        h = QofHistory(3)
        for v in (0.1, 0.2, 0.3, 0.4):
            h.append(v)
        assert h.values() == (0.2, 0.3, 0.4)
        assert len(h) == 3

    def test_order_preserved(self):
        h = QofHistory(5)
        for v in (0.5, 0.1, 0.9):
            h.append(v)
        assert h.values() == (0.5, 0.1, 0.9)

    def test_out_of_range_rejected(self):
        h = QofHistory(2)
        with pytest.raises(MetricError):
            h.append(1.5)
        with pytest.raises(MetricError):
            h.append(-0.1)

    def test_bad_capacity_rejected(self):
        with pytest.raises(MetricError):
            QofHistory(0)


class TestHdlac:
    def test_lossless_link(self):
        assert hdlac(view(rank=2, tnop=10, tnopss=10)) == 3.0

    def test_no_history_default(self):
        assert hdlac(view(rank=1)) == 2.0

    def test_half_rate_link(self):
        # hand evaluation: 3 + 10/5
        assert hdlac(view(rank=3, tnop=10, tnopss=5)) == 5.0

    def test_zero_success_uses_worst(self):
        assert hdlac(view(rank=2, tnop=4, tnopss=0)) == 2.0 + DEFAULT_WORST_ETX


class TestParentScore:
    def test_weighted_occupancy(self):
        # hand evaluation: 2 + 1.5 + 0.25 * 0.5
        v = view(rank=2, qof=0.5, tnop=3, tnopss=2)
        assert parent_score(v, eta=0.25) == pytest.approx(3.625)

    def test_zero_occupancy_term_vanishes(self):
        v = view(rank=1, qof=0.0, tnop=10, tnopss=10)
        for eta in (0.25, 1.0, 5.0):
            assert parent_score(v, eta=eta) == 2.0

    def test_full_queue_heavy_weight(self):
        v = view(rank=2, qof=1.0, tnop=10, tnopss=10)
        assert parent_score(v, eta=2.0) == 5.0


class TestEstimatorParams:
    def test_defaults_valid(self):
        p = EstimatorParams()
        assert p.alpha == 0.5 and p.theta_th == 0.5

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"theta_th": 0.0},
            {"theta_th": 1.0},
            {"delta_th": -0.1},
            {"eta": 0.0},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(MetricError):
            EstimatorParams(**kwargs)


def oracle_select(current, candidates, params, worst_etx=DEFAULT_WORST_ETX):
    """Brute-force reference for select_parent: explicit filter and scan."""

    def o_etx(link):
        if link.tnop == 0:
            return 1.0
        if link.tnopss == 0:
            return worst_etx
        return link.tnop / link.tnopss

    def o_hdlac(v):
        return v.rank + o_etx(v.link)

    def o_ps(v):
        return o_hdlac(v) + params.eta * v.advertised_qof

    if not current.advertised_beta > params.theta_th:
        return (False, None)
    eligible = [c for c in candidates if o_hdlac(current) - o_hdlac(c) > params.delta_th]
    if not eligible:
        return (False, None)
    best_key = None
    best_cand = None
    for c in eligible:
        key = (o_ps(c), c.rank, c.parent_id)
        if best_key is None or key < best_key:
            best_key = key
            best_cand = c
    return (True, best_cand.parent_id)


class TestSelectParent:
    def params(self, **kwargs):
        return EstimatorParams(**kwargs)

    def test_uncongested_parent_kept(self):
        current = view(parent_id=1, rank=2, beta=0.4)
        cands = [view(parent_id=2, rank=1, qof=0.0)]
        assert select_parent(current, cands, self.params()) == KEEP

    def test_boundary_congestion_not_a_trigger(self):
        current = view(parent_id=1, rank=2, beta=0.5)
        cands = [view(parent_id=2, rank=1)]
        assert select_parent(current, cands, self.params(theta_th=0.5)) == KEEP

    def test_hysteresis_filters_before_score(self):
        # current hdlac 4.0; candidate B has the lower score but misses the
        # hysteresis margin (4.0 - 3.6 = 0.4 <= 0.5), so A wins despite a
        # higher score.
        current = view(parent_id=1, rank=3, beta=0.6, tnop=10, tnopss=10)
        a = view(parent_id=2, rank=2, qof=0.5, tnop=6, tnopss=5)  # hdlac 3.2, ps 4.2
        b = view(parent_id=3, rank=2, qof=0.1, tnop=8, tnopss=5)  # hdlac 3.6, ps 3.8
        params = self.params(eta=2.0)
        assert parent_score(a, params.eta) == pytest.approx(4.2)
        assert parent_score(b, params.eta) == pytest.approx(3.8)
        decision = select_parent(current, [a, b], params)
        assert decision.swap and decision.new_parent == 2

    def test_no_eligible_candidate_keeps(self):
        current = view(parent_id=1, rank=2, beta=0.6, tnop=10, tnopss=10)
        cands = [view(parent_id=2, rank=2), view(parent_id=3, rank=2)]
        assert select_parent(current, cands, self.params()) == KEEP

    def test_empty_candidate_set_keeps(self):
        current = view(parent_id=1, rank=2, beta=0.9)
        assert select_parent(current, [], self.params()) == KEEP

    def test_tie_breaks_by_rank_then_id(self):
        current = view(parent_id=1, rank=4, beta=0.8, tnop=10, tnopss=5)
        # both candidates score 3.0; rank decides
        a = view(parent_id=5, rank=2, qof=0.0)
        b = view(parent_id=2, rank=1, qof=0.0, tnop=2, tnopss=1)
        decision = select_parent(current, [a, b], self.params())
        assert decision.new_parent == 2
        # equal rank and score; id decides
        c = view(parent_id=7, rank=2, qof=0.0)
        d = view(parent_id=4, rank=2, qof=0.0)
        decision = select_parent(current, [c, d], self.params())
        assert decision.new_parent == 4

    def test_matches_bruteforce_oracle(self):
        rng = random.Random(2024)
        qof_grid = (0.0, 0.25, 0.5, 0.75, 1.0)
        beta_grid = (0.3, 0.45, 0.5, 0.55, 0.8, 1.0)
        for _ in range(2000):
            params = EstimatorParams(
                alpha=0.5,
                theta_th=0.5,
                delta_th=rng.choice((0.0, 0.25, 0.5, 1.0)),
                eta=rng.choice((0.25, 1.0, 2.0)),
            )
            own_rank = rng.randint(2, 6)

            def rand_view(pid):
                tnop = rng.choice((0, 2, 4, 5, 8, 10, 16))
                tnopss = rng.randint(0, tnop) if tnop else 0
                return view(
                    parent_id=pid,
                    rank=rng.randint(1, own_rank - 1),
                    qof=rng.choice(qof_grid),
                    beta=rng.choice(beta_grid),
                    tnop=tnop,
                    tnopss=tnopss,
                )

            current = rand_view(0)
            cands = [rand_view(pid) for pid in range(1, rng.randint(1, 7))]
            got = select_parent(current, cands, params)
            want_swap, want_id = oracle_select(current, cands, params)
            assert got.swap == want_swap
            assert got.new_parent == want_id

    def test_occupancy_scaling_preserves_order(self):
        # with rank and ETX equal across candidates, scaling every advertised
        # occupancy by a common positive factor never changes the argmin
        rng = random.Random(77)
        for _ in range(200):
            params = EstimatorParams(eta=rng.choice((0.25, 1.0, 2.0)))
            current = view(parent_id=0, rank=4, beta=0.9, tnop=10, tnopss=5)
            qofs = [rng.random() for _ in range(4)]
            scale = rng.uniform(0.05, 1.0)
            base = [view(parent_id=i + 1, rank=2, qof=q) for i, q in enumerate(qofs)]
            scaled = [
                view(parent_id=i + 1, rank=2, qof=q * scale)
                for i, q in enumerate(qofs)
            ]
            d1 = select_parent(current, base, params)
            d2 = select_parent(current, scaled, params)
            assert d1.new_parent == d2.new_parent
