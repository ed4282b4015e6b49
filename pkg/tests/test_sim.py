import itertools

import numpy as np
import pytest

from assort_knap.core import Assortment, InputError, InventoryState, ModelInstance, assortment_revenue
from assort_knap.fluid import solve_phi
from assort_knap.harness import generate_instance
from assort_knap.policy import EpochPlan, PolicyKind
from assort_knap.sim import (
    SimulationError,
    TraceAccumulator,
    check_delta_centered,
    check_geometric_law,
    check_recursion,
    cumulative_deltas,
    make_trace,
    run_trajectory,
    simulate_period,
    tiny_dp_value,
)


def desk_instance(T=256, seed=3):
    return generate_instance(10, 5, 3, T, np.random.default_rng(seed))


# ---------------------------------------------------------------- one period

def test_empty_assortment_never_sells():
    inst = ModelInstance(1, 1, 1, 5, [1.0], [1.0], [[0.5]], [1.0])
    inv = InventoryState.initial(inst)
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert simulate_period(inst, Assortment(), inv, rng) is None
    assert inv.remaining.tolist() == [1.0] and inv.periods_elapsed == 5


def test_huge_preference_almost_always_sells():
    inst = ModelInstance(1, 1, 1, 1000, [1.0], [1e6], [[0.0]], [1.0])
    inv = InventoryState.initial(inst)
    rng = np.random.default_rng(1)
    sold = sum(simulate_period(inst, Assortment((0,)), inv, rng) == 0 for _ in range(1000))
    assert sold >= 999


def test_purchase_frequency_half():
    """[DERIVED] v = 1 alone sells with probability 1/2; 1e5 draws within 0.005."""
    inst = ModelInstance(1, 1, 1, 10 ** 5, [1.0], [1.0], [[0.0]], [1.0])
    inv = InventoryState.initial(inst)
    rng = np.random.default_rng(2)
    sold = sum(simulate_period(inst, Assortment((0,)), inv, rng) == 0 for _ in range(10 ** 5))
    assert sold / 1e5 == pytest.approx(0.5, abs=0.005)


def test_scan_order_and_deduction():
    inst = ModelInstance(2, 1, 2, 5, [1.0, 1.0], [1.0, 2.0], [[0.25], [0.5]], [1.0])
    # denominator 4: u*4 < 1 buys product 0, < 3 buys product 1, otherwise nothing
    for u, want in ((0.2, 0), (0.5, 1), (0.74, 1), (0.8, None)):
        inv = InventoryState.initial(inst)
        assert simulate_period(inst, Assortment((0, 1)), inv, u=u) == want
        used = 0.0 if want is None else inst.consumption[want, 0]
        assert inv.remaining[0] == pytest.approx(1.0 - used)


def test_infeasible_member_raises():
    inst = ModelInstance(1, 1, 1, 5, [1.0], [1.0], [[0.5]], [1.0])
    inv = InventoryState(np.array([0.4]), 0)
    with pytest.raises(SimulationError):
        simulate_period(inst, Assortment((0,)), inv, np.random.default_rng(0))


# ---------------------------------------------------------------- trajectories

def test_zero_preferences_earn_nothing():
    inst = ModelInstance(2, 1, 1, 20, [1.0, 1.0], [0.0, 0.0], [[0.1], [0.1]], [1.0])
    for kind in PolicyKind:
        res = run_trajectory(inst, kind, 5)
        assert res.total_revenue == 0.0 and res.periods_used == 20
        assert res.epochs_completed == 20
        for ep in res.epochs:
            assert not ep.delta_i.any()


def test_inventory_caps_revenue():
    inst = ModelInstance(1, 1, 1, 10, [1.0], [1.0], [[1.0]], [2.0])
    for seed in range(200):
        for kind in PolicyKind:
            res = run_trajectory(inst, kind, seed)
            assert res.total_revenue <= 2.0
            assert res.final_inventory[0] >= 0


def test_depletion_stops_early():
    # expected sales match the stock of 5, so about half the runs sell out
    inst = ModelInstance(1, 1, 1, 30, [1.0], [5.0], [[1.0]], [5.0])
    early = 0
    for seed in range(100):
        res = run_trajectory(inst, "resolving", seed)
        if res.termination == "inventory_depleted":
            assert res.total_revenue == 5.0 and res.final_inventory[0] == 0.0
            early += res.periods_used < 30
        else:
            assert res.periods_used == 30
    assert early > 0


def test_trajectory_is_deterministic():
    inst = desk_instance()
    a = run_trajectory(inst, "resolving", 11)
    b = run_trajectory(inst, "resolving", 11)
    assert a.total_revenue == b.total_revenue and a.purchases.tolist() == b.purchases.tolist()
    assert a.final_inventory.tobytes() == b.final_inventory.tobytes()
    assert len(a.epochs) == len(b.epochs)
    for x, y in zip(a.epochs, b.epochs):
        assert x.x_tau.tobytes() == y.x_tau.tobytes() and x.support == y.support


@pytest.mark.parametrize("kind", list(PolicyKind))
def test_fast_path_equals_stepwise(kind):
    rng = np.random.default_rng(12)
    for k in range(15):
        inst = generate_instance(6, 3, 2, 64 + 13 * k, rng)
        a = run_trajectory(inst, kind, k)
        b = run_trajectory(inst, kind, k, stepwise=True)
        assert a.total_revenue == b.total_revenue
        assert a.purchases.tolist() == b.purchases.tolist()
        assert a.final_inventory.tobytes() == b.final_inventory.tobytes()
        assert (a.periods_used, a.termination, a.epochs_completed) == \
               (b.periods_used, b.termination, b.epochs_completed)
        assert len(a.epochs) == len(b.epochs)
        for x, y in zip(a.epochs, b.epochs):
            assert (x.length, x.complete, x.purchases.tolist()) == (y.length, y.complete, y.purchases.tolist())


def test_conservation_and_regret_definition():
    inst = desk_instance()
    phi = solve_phi(inst, inst.gamma0, 1 / inst.horizon).objective
    for seed in range(20):
        res = run_trajectory(inst, "resolving", seed, fluid_value=phi)
        used = inst.initial_inventory - res.final_inventory
        np.testing.assert_allclose(used, inst.consumption.T @ res.purchases, atol=1e-9)
        assert res.regret == pytest.approx(inst.horizon * phi - res.total_revenue)
        assert sum(ep.length for ep in res.epochs) == res.periods_used
        assert res.total_revenue == pytest.approx(sum(ep.revenue for ep in res.epochs))


# ---------------------------------------------------------------- trace checks

def test_recursion_holds_on_simulated_paths():
    """[DERIVED] the pathwise recursion holds surely; 100 seeded trajectories."""
    inst = desk_instance(T=512)
    pairs = 0
    for seed in range(100):
        res = run_trajectory(inst, "resolving", seed)
        chk = check_recursion(res.epochs, inst)
        assert chk.ok, chk.detail
        pairs += chk.pairs_checked
    assert pairs > 1000


def synthetic(tau, t_tau, gamma, purchases, length, x=(0.0,), complete=True):
    inst = ModelInstance(1, 1, 1, 100, [1.0], [1.0], [[0.1]], [10.0])
    s_raw = t_tau / tau
    plan = EpochPlan(tau, t_tau, np.array([gamma]), max(s_raw, 1.0), s_raw, np.array(x), Assortment((0,)))
    return make_trace(inst, plan, [purchases], length, complete)


def test_recursion_zero_delta_reduces_to_monotone_s():
    # Delta = 0 at tau = 3 with s = 10: the next epoch needs s >= 10 and gamma >= 0.1
    a = synthetic(3, 30, 0.1, 0, 1)
    assert a.delta == 0.0 and not a.eps_j.any()
    ok = check_recursion([a, synthetic(2, 29, 0.1, 0, 1)])
    assert ok.ok and ok.pairs_checked == 1


def test_recursion_violation_reported():
    a = synthetic(3, 30, 0.1, 0, 1)
    bad_s = check_recursion([a, synthetic(2, 18, 0.1, 0, 1)])
    assert not bad_s.ok and bad_s.failed_epoch == 0 and bad_s.detail.startswith("s")
    bad_g = check_recursion([synthetic(4, 40, 0.1, 0, 1), a, synthetic(2, 29, 0.05, 0, 1)])
    assert not bad_g.ok and bad_g.failed_epoch == 1 and bad_g.detail.startswith("gamma")


def test_recursion_skips_incomplete_and_clamped():
    a = synthetic(3, 30, 0.1, 0, 1, complete=False)
    assert check_recursion([a, synthetic(2, 18, 0.1, 0, 1)]).pairs_checked == 0
    clamped = synthetic(50, 30, 0.1, 0, 1)
    assert check_recursion([clamped, synthetic(49, 29, 0.0, 0, 1)]).pairs_checked == 0


def test_delta_arithmetic():
    ep = synthetic(3, 30, 0.1, 4, 5, x=(1.0,))
    # n = 4 purchases against v x = 1
    assert ep.delta_i.tolist() == [3.0] and ep.delta == 3.0
    # eps = (A delta - min(gamma, A0 B0 K) delta) / t_next = (0.3 - 0.1 * 3) / 25
    assert ep.eps_j[0] == pytest.approx(0.0, abs=1e-15)
    total, eps = cumulative_deltas([ep, ep])
    assert total[-1] == 6.0


def test_geometric_law_single_product():
    """[DERIVED] one product offered for the whole epoch: n ~ Geometric, mean v."""
    inst = ModelInstance(1, 1, 1, 400, [1.0], [1.5], [[0.001]], [400.0])
    results = [run_trajectory(inst, "resolving", seed) for seed in range(300)]
    checks = check_geometric_law(results, inst)
    tested = [c for c in checks if c.tested]
    assert tested and all(c.ok for c in tested)
    assert tested[0].target == pytest.approx(1.5)
    assert tested[0].count > 1000


def test_first_epoch_delta_centered():
    inst = desk_instance(T=256)
    results = [run_trajectory(inst, "resolving", seed) for seed in range(400)]
    checks = check_delta_centered(results)
    assert all(c.ok for c in checks if c.tested)
    acc = TraceAccumulator(inst.n_products, inst.preferences, inst.consumption)
    for res in results:
        acc.add(res)
    streamed = acc.delta_checks()
    assert [(c.mean, c.count) for c in streamed] == [(c.mean, c.count) for c in checks]
    assert acc.recursion_failures == [] and acc.pairs_checked > 0


# ---------------------------------------------------------------- DP oracle

def test_dp_two_period_hand_value():
    inst = ModelInstance(1, 1, 1, 2, [1.0], [1.0], [[1.0]], [1.0])
    assert tiny_dp_value(inst) == pytest.approx(0.75)


def test_dp_one_period_is_best_assortment():
    rng = np.random.default_rng(20)
    for _ in range(10):
        r, v = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        inst = ModelInstance(3, 1, 2, 1, r, v, [[0.1], [0.2], [0.3]], [1.0])
        best = max(assortment_revenue(inst, Assortment(S))
                   for k in (1, 2) for S in itertools.combinations(range(3), k))
        assert tiny_dp_value(inst) == pytest.approx(max(best, 0.0), abs=1e-12)


def test_fluid_dominates_dp():
    rng = np.random.default_rng(21)
    for _ in range(10):
        N, M, T = 3, 2, int(rng.integers(2, 9))
        A = rng.integers(0, 3, (N, M)) / 4
        C0 = rng.integers(1, 6, M) / 4
        inst = ModelInstance(N, M, 2, T, rng.uniform(0, 1, N), rng.uniform(0, 1.5, N), A, C0)
        phi = solve_phi(inst, inst.gamma0, 1e-9).objective
        assert T * phi >= tiny_dp_value(inst) - 1e-6


def test_dp_rejects_large_instances():
    with pytest.raises(InputError):
        tiny_dp_value(ModelInstance(4, 1, 1, 5, [1] * 4, [1] * 4, [[0.5]] * 4, [1.0]))
    with pytest.raises(InputError):
        tiny_dp_value(ModelInstance(1, 1, 1, 5, [1], [1], [[1 / 7 + 1e-3]], [1.0]))
