import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowfit.demand import (
    DegenerateStratumError,
    DemandStratum,
    FurnessConvergenceError,
    FurnessInfeasibleError,
    ODMatrix,
    TripEnds,
    Zone,
    derive_jobs,
    deterrence,
    distribute,
    furness_balance,
    generate_trip_ends,
    seed_matrix,
)
from flowfit.network import CostMatrix, free_flow_times, skim_matrix
from flowfit.sample_models import eight_zone_star, toy_strata


def costs_of(values, zone_ids=None):
    values = np.asarray(values, dtype=float)
    zone_ids = tuple(zone_ids or (f"z{i}" for i in range(values.shape[0])))
    return CostMatrix(zone_ids, values)


def pop_zones(pops):
    return [Zone(f"z{i}", attributes={"population": float(p)})
            for i, p in enumerate(pops)]


class TestDeriveJobs:
    def test_above_cutoff(self):
        # sqrt(13000**2 - 5000**2) = sqrt(144e6)
        assert derive_jobs(13000.0, 5000.0) == 12000.0

    def test_below_cutoff_is_residential(self):
        assert derive_jobs(4000.0, 5000.0) == 1.0

    def test_exactly_at_cutoff(self):
        # the formula is taken literally, jump at the cutoff included
        assert derive_jobs(5000.0, 5000.0) == 0.0

    @given(st.floats(5000.0, 1e7), st.floats(5000.0, 1e7))
    def test_increasing_above_cutoff(self, p1, p2):
        lo, hi = sorted((p1, p2))
        assert derive_jobs(lo) <= derive_jobs(hi)

    def test_continuous_above_cutoff(self):
        # difference quotient stays bounded just above the cutoff
        for pop in np.linspace(5000.0, 6000.0, 50):
            a, b = derive_jobs(pop), derive_jobs(pop + 1e-3)
            assert b - a < 10.0


class TestGenerateTripEnds:
    def test_single_zone_direct_arithmetic(self):
        stratum = DemandStratum("s", "population", "population", 1.5, 0.1)
        ends = generate_trip_ends(pop_zones([1000]), stratum)
        assert ends.origins.tolist() == [1500.0]
        assert ends.destinations.tolist() == [1500.0]

    def test_rescale_is_identity_when_totals_match(self):
        stratum = DemandStratum("s", "population", "population", 1.0, 0.0)
        ends = generate_trip_ends(pop_zones([100, 300]), stratum)
        assert ends.origins.tolist() == [100.0, 300.0]
        assert ends.destinations.tolist() == [100.0, 300.0]

    def test_occupancy_divides_origins(self):
        stratum = DemandStratum("s", "population", "population", 1.5, 0.1,
                                occupancy=1.5)
        ends = generate_trip_ends(pop_zones([1000]), stratum)
        assert ends.origins.tolist() == [1000.0]

    def test_attraction_rescaled_to_origin_total(self):
        zones = [
            Zone("a", attributes={"population": 1000.0, "jobs": 10.0}),
            Zone("b", attributes={"population": 0.0, "jobs": 30.0}),
        ]
        stratum = DemandStratum("s", "population", "jobs", 1.0, 0.1)
        ends = generate_trip_ends(zones, stratum)
        assert ends.origins.sum() == 1000.0
        assert ends.destinations.tolist() == [250.0, 750.0]

    def test_mu_zero_yields_zero_ends_with_warning(self, caplog):
        stratum = DemandStratum("s", "population", "population", 0.0, 0.1)
        with caplog.at_level("WARNING"):
            ends = generate_trip_ends(pop_zones([1000, 2000]), stratum)
        assert ends.origins.tolist() == [0.0, 0.0]
        assert ends.destinations.tolist() == [0.0, 0.0]
        assert any("no trips" in r.message for r in caplog.records)

    def test_all_zero_production_is_degenerate(self):
        stratum = DemandStratum("s", "population", "population", 1.0, 0.1)
        with pytest.raises(DegenerateStratumError, match="production"):
            generate_trip_ends(pop_zones([0, 0]), stratum)

    def test_all_zero_attraction_is_degenerate(self):
        zones = [Zone("a", attributes={"population": 10.0, "jobs": 0.0})]
        stratum = DemandStratum("s", "population", "jobs", 1.0, 0.1)
        with pytest.raises(DegenerateStratumError, match="attraction"):
            generate_trip_ends(zones, stratum)

    def test_missing_attribute_warns_and_counts_as_zero(self, caplog):
        zones = [Zone("a", attributes={"population": 10.0}), Zone("b")]
        stratum = DemandStratum("s", "population", "population", 1.0, 0.1)
        with caplog.at_level("WARNING"):
            ends = generate_trip_ends(zones, stratum)
        assert ends.origins.tolist() == [10.0, 0.0]
        assert any("missing" in r.message for r in caplog.records)

    def test_stratum_invariants_enforced(self):
        with pytest.raises(ValueError, match="mu"):
            DemandStratum("s", "p", "p", -1.0, 0.1)
        with pytest.raises(ValueError, match="occupancy"):
            DemandStratum("s", "p", "p", 1.0, 0.1, occupancy=0.0)
        with pytest.raises(ValueError, match="deterrence"):
            DemandStratum("s", "p", "p", 1.0, 0.1, deterrence_kind="sigmoid")


class TestDeterrence:
    def test_exponential_hand_value(self):
        assert deterrence(10.0, 0.1, "exponential") == pytest.approx(math.e, rel=1e-12)

    def test_beta_zero_is_identity(self):
        assert deterrence(37.3, 0.0, "exponential") == 1.0

    def test_power_hand_value(self):
        assert deterrence(3.0, 2.0, "power") == pytest.approx(9.0, rel=1e-12)

    def test_power_clamps_zero_cost(self):
        assert deterrence(0.0, 2.0, "power") == pytest.approx(1e-12, rel=1e-9)
        assert deterrence(0.0, 2.0, "power") > 0.0

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            deterrence(-1.0, 0.1, "exponential")

    @given(st.floats(0.0, 500.0), st.floats(0.0, 1.0),
           st.sampled_from(["exponential", "power"]))
    def test_always_positive(self, cost, beta, kind):
        assert deterrence(cost, beta, kind) > 0.0


class TestSeedMatrix:
    def test_beta_zero_gives_pure_product(self):
        ends = TripEnds(np.array([10.0, 20.0]), np.array([15.0, 15.0]))
        seed = seed_matrix(ends, costs_of([[1.0, 2.0], [2.0, 1.0]]), 0.0, "exponential")
        assert np.array_equal(seed.trips, np.outer([10.0, 20.0], [15.0, 15.0]))

    def test_one_by_one_direct_product(self):
        ends = TripEnds(np.array([10.0]), np.array([10.0]))
        seed = seed_matrix(ends, costs_of([[2.0]]), 0.0, "exponential")
        assert seed.trips.tolist() == [[100.0]]

    def test_symmetric_inputs_give_symmetric_seed(self):
        ends = TripEnds(np.array([5.0, 5.0]), np.array([5.0, 5.0]))
        seed = seed_matrix(ends, costs_of([[1.0, 3.0], [3.0, 1.0]]), 0.2, "exponential")
        assert np.array_equal(seed.trips, seed.trips.T)

    def test_dimension_mismatch(self):
        ends = TripEnds(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0]))
        with pytest.raises(ValueError, match="do not match"):
            seed_matrix(ends, costs_of([[1.0]]), 0.0, "exponential")


class TestFurnessBalance:
    def test_already_balanced_is_fixed_point(self):
        seed = ODMatrix(("a", "b"), np.ones((2, 2)))
        ends = TripEnds(np.array([2.0, 2.0]), np.array([2.0, 2.0]))
        out = furness_balance(seed, ends)
        assert np.array_equal(out.trips, np.ones((2, 2)))

    def test_one_row_scaling_suffices(self):
        seed = ODMatrix(("a", "b"), np.ones((2, 2)))
        ends = TripEnds(np.array([3.0, 1.0]), np.array([2.0, 2.0]))
        out = furness_balance(seed, ends)
        assert np.array_equal(out.trips, np.array([[1.5, 1.5], [0.5, 0.5]]))

    def test_random_margins_hit_tolerance(self, rng):
        for _ in range(5):
            seed = ODMatrix(tuple(f"z{i}" for i in range(50)),
                            rng.uniform(0.1, 5.0, (50, 50)))
            O = rng.uniform(1.0, 100.0, 50)
            D = rng.uniform(1.0, 100.0, 50)
            D *= O.sum() / D.sum()
            out = furness_balance(seed, TripEnds(O, D), tol=1e-8)
            # independent margin check, not the loop's own deviation
            assert np.abs(out.trips.sum(axis=1) - O).max() <= 1e-8 * O.max()
            assert np.abs(out.trips.sum(axis=0) / D - 1.0).max() <= 1e-8

    def test_output_is_diagonal_rescaling_of_seed(self, rng):
        seed_vals = rng.uniform(0.1, 5.0, (20, 20))
        O = rng.uniform(1.0, 50.0, 20)
        D = rng.uniform(1.0, 50.0, 20)
        D *= O.sum() / D.sum()
        out = furness_balance(ODMatrix(tuple(f"z{i}" for i in range(20)), seed_vals),
                              TripEnds(O, D))
        ratio = out.trips / seed_vals
        a = ratio[:, 0] / ratio[0, 0]
        b = ratio[0, :]
        assert np.allclose(ratio, np.outer(a, b), rtol=1e-6)

    def test_preserves_zero_pattern(self, rng):
        seed_vals = rng.uniform(0.5, 2.0, (10, 10))
        seed_vals[rng.random((10, 10)) < 0.2] = 0.0
        np.fill_diagonal(seed_vals, 1.0)  # keep the system feasible
        O = seed_vals.sum(axis=1)
        D = seed_vals.sum(axis=0)
        out = furness_balance(ODMatrix(tuple(f"z{i}" for i in range(10)), seed_vals),
                              TripEnds(O, D))
        assert np.all(out.trips[seed_vals == 0.0] == 0.0)

    def test_invariant_under_seed_rescaling(self, rng):
        seed_vals = rng.uniform(0.1, 3.0, (8, 8))
        O = rng.uniform(1.0, 20.0, 8)
        D = rng.uniform(1.0, 20.0, 8)
        D *= O.sum() / D.sum()
        ids = tuple(f"z{i}" for i in range(8))
        ends = TripEnds(O, D)
        out1 = furness_balance(ODMatrix(ids, seed_vals), ends)
        out2 = furness_balance(ODMatrix(ids, 37.5 * seed_vals), ends)
        assert np.allclose(out1.trips, out2.trips, rtol=1e-8)

    def test_inconsistent_totals_rejected(self):
        seed = ODMatrix(("a", "b"), np.ones((2, 2)))
        with pytest.raises(ValueError, match="must agree"):
            furness_balance(seed, TripEnds(np.array([2.0, 2.0]), np.array([1.0, 2.0])))

    def test_zero_row_with_positive_target_is_infeasible(self):
        seed = ODMatrix(("a", "b"), np.array([[0.0, 0.0], [1.0, 1.0]]))
        ends = TripEnds(np.array([2.0, 2.0]), np.array([2.0, 2.0]))
        with pytest.raises(FurnessInfeasibleError, match="'a'"):
            furness_balance(seed, ends)

    def test_nonconvergence_carries_last_deviation(self):
        # block-diagonal support with cross-block margins never balances
        seed = ODMatrix(("a", "b"), np.array([[1.0, 0.0], [0.0, 1.0]]))
        ends = TripEnds(np.array([3.0, 1.0]), np.array([1.0, 3.0]))
        with pytest.raises(FurnessConvergenceError) as err:
            furness_balance(seed, ends, tol=1e-12, max_iter=50)
        assert err.value.iterations == 50
        assert err.value.deviation > 0.0


class TestDistribute:
    def test_beta_zero_closed_form(self, rng):
        zones = pop_zones([100, 250, 400])
        stratum = DemandStratum("s", "population", "population", 1.2, 0.0)
        costs = costs_of(rng.uniform(1.0, 30.0, (3, 3)))
        out = distribute(zones, stratum, costs)
        O = 1.2 * np.array([100.0, 250.0, 400.0])
        expected = np.outer(O, O) / O.sum()
        assert np.allclose(out.trips, expected, rtol=1e-12)

    def test_symmetric_system_gives_symmetric_matrix(self):
        zones = pop_zones([500, 500])
        stratum = DemandStratum("s", "population", "population", 1.0, 0.1)
        costs = costs_of([[2.0, 4.0], [4.0, 2.0]])
        out = distribute(zones, stratum, costs)
        assert np.allclose(out.trips, out.trips.T, rtol=1e-12)

    def test_toy_margins_match_targets(self):
        zones, net = eight_zone_star()
        costs = skim_matrix(net, free_flow_times(net))
        stratum = toy_strata(1.5, 0.1)[0]
        out = distribute(zones, stratum, costs)
        pops = {z.zone_id: z.attributes["population"] for z in zones}
        O = np.array([1.5 * pops[z] for z in costs.zone_ids])
        assert np.abs(out.trips.sum(axis=1) / O - 1.0).max() <= 1e-8

    def test_mu_zero_returns_zero_matrix(self):
        zones = pop_zones([100, 200])
        stratum = DemandStratum("s", "population", "population", 0.0, 0.1)
        out = distribute(zones, stratum, costs_of([[1.0, 2.0], [2.0, 1.0]]))
        assert np.array_equal(out.trips, np.zeros((2, 2)))

    def test_zone_set_must_match_costs(self):
        zones = pop_zones([100, 200])
        stratum = DemandStratum("s", "population", "population", 1.0, 0.1)
        with pytest.raises(ValueError, match="zone set"):
            distribute(zones, stratum, costs_of(np.ones((3, 3))))

    def test_mean_trip_cost_weakly_decreases_in_beta(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 9))
            zones = pop_zones(rng.uniform(100.0, 5000.0, n))
            base = rng.uniform(2.0, 40.0, (n, n))
            costs = costs_of((base + base.T) / 2.0)
            betas = np.sort(rng.uniform(0.0, 0.3, 3))
            means = []
            for beta in betas:
                stratum = DemandStratum("s", "population", "population", 1.0,
                                        float(beta))
                out = distribute(zones, stratum, costs)
                means.append((out.trips * costs.values).sum() / out.trips.sum())
            assert means[0] + 1e-9 >= means[1] >= means[2] - 1e-9
