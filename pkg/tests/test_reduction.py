import itertools

import numpy as np
import pytest

from netmor import numkernels as nk
from netmor.errors import DegenerateGramian, NearSingularBalance, SingularFastBlock
from netmor.gramians import GENERALIZED, STRUCTURED, GramianPair
from netmor.network import NetworkMatrix, close_loop, closed_loop_error
from netmor.random_systems import random_interconnection, stable_system
from netmor.reduction import (PERTURBATION, TRUNCATION, BalancedRealization, BalancedSubsystem,
                              balance, balance_blocks, compute_gramians, hankel_comparison,
                              reduce_network, residualize, singular_perturbation, suggest_orders,
                              error_bound, truncate)
from netmor.sysmodel import StateSpaceModel, aggregate

GRID = list(itertools.product((8, 6, 4, 2), (10, 8, 6, 4, 2)))


def test_balance_already_balanced():
    T, Tinv, s = balance_blocks(np.array([[0.5]]), np.array([[0.5]]))
    np.testing.assert_allclose(T, [[1.0]])
    np.testing.assert_allclose(s, [0.5])


def test_balance_equal_hankel_values():
    T, Tinv, s = balance_blocks(np.diag([4.0, 1.0]), np.diag([1.0, 4.0]))
    np.testing.assert_allclose(s, [2.0, 2.0])


@pytest.mark.parametrize("seed", range(5))
def test_balance_invariants_and_product_oracle(seed):
    sys = stable_system(np.random.default_rng(seed), 6, 2, 2)
    P = nk.solve_lyapunov(sys.A, sys.B @ sys.B.T)
    Q = nk.solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    T, Tinv, s = balance_blocks(P, Q)
    S = np.diag(s)
    assert np.linalg.norm(T @ P @ T.T - S) <= 1e-8 * np.linalg.norm(S)
    assert np.linalg.norm(Tinv.T @ Q @ Tinv - S) <= 1e-8 * np.linalg.norm(S)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    ref = np.sort(np.sqrt(np.abs(np.linalg.eigvals(P @ Q))))[::-1]
    np.testing.assert_allclose(s, ref, rtol=1e-8)
    np.testing.assert_allclose(T @ Tinv, np.eye(6), atol=1e-10)


def test_balanced_subsystems_keep_transfer_function(demo, demo_balanced):
    plant = demo[0]
    for orig, b in zip(plant.subsystems, demo_balanced.subsystems):
        for w in np.geomspace(1e-2, 1e3, 20):
            G = nk.freq_response(orig, w)
            H = nk.freq_response(b.model, w)
            assert np.linalg.norm(G - H) <= 1e-8 * np.linalg.norm(G)


def test_degenerate_gramian():
    with pytest.raises(DegenerateGramian):
        balance_blocks(np.diag([1.0, 1e-14]), np.eye(2))


def test_full_order_is_exact(demo, demo_balanced):
    plant, _, net = demo
    for method in (TRUNCATION, PERTURBATION):
        red = reduce_network(plant, net, (8, 10), method, bal=demo_balanced)
        assert red.error <= 1e-10


def test_zero_order_is_static_gain(demo, demo_balanced):
    red = truncate(demo_balanced, (0, 0))
    for s, b in zip(red.plant.subsystems, demo_balanced.subsystems):
        assert s.n == 0
        assert np.array_equal(s.D, b.model.D)


def test_truncation_6_3_matches_at_infinity(demo, demo_balanced):
    plant, _, net = demo
    red = reduce_network(plant, net, (6, 3), TRUNCATION, bal=demo_balanced)
    assert red.plant.state_dims == (6, 3)
    assert red.plant.input_dims == plant.input_dims
    assert np.isfinite(red.error) and red.error > 0
    assert np.array_equal(close_loop(plant, net).D, close_loop(red.plant, net).D)
    assert red.extract_subsystem(2).n == 3


def test_perturbation_scalar_fast_block():
    M = StateSpaceModel([[-1.0, 1.0], [1.0, -3.0]], [[1.0], [1.0]], [[1.0, 1.0]], [[0.0]])
    R = residualize(M, 1)
    np.testing.assert_allclose(R.A, [[-2.0 / 3.0]])
    np.testing.assert_allclose(R.B, [[4.0 / 3.0]])
    np.testing.assert_allclose(R.C, [[4.0 / 3.0]])
    np.testing.assert_allclose(R.D, [[1.0 / 3.0]])
    np.testing.assert_allclose(nk.freq_response(R, 0.0), nk.freq_response(M, 0.0), rtol=1e-14)


def test_perturbation_full_order_is_identity(demo_balanced):
    red = singular_perturbation(demo_balanced, (8, 10))
    for s, b in zip(red.plant.subsystems, demo_balanced.subsystems):
        assert s is b.model


def test_perturbation_6_3_matches_dc(demo, demo_balanced):
    plant, _, net = demo
    red = singular_perturbation(demo_balanced, (6, 3))
    g0 = nk.freq_response(close_loop(plant, net).model(), 0.0)
    h0 = nk.freq_response(close_loop(red.plant, net).model(), 0.0)
    assert np.linalg.norm(g0 - h0) <= 1e-8 * max(1.0, np.linalg.norm(g0))


def test_singular_fast_block():
    M = StateSpaceModel([[-1.0, 0.0], [0.0, 0.0]], [[1.0], [1.0]], [[1.0, 1.0]], [[0.0]])
    with pytest.raises(SingularFastBlock):
        residualize(M, 1)


def test_near_singular_balance_warning():
    sub = StateSpaceModel(np.diag([-1.0, -2.0]), np.eye(2), np.eye(2), np.zeros((2, 2)))
    bal = BalancedRealization(
        (BalancedSubsystem(np.eye(2), np.eye(2), np.array([1.0, 1e-13]), sub),),
        aggregate([sub]), STRUCTURED)
    with pytest.warns(NearSingularBalance):
        red = truncate(bal, (2,))
    assert red.plant.state_dims == (2,)


def test_bound_zero_at_full_order(demo_balanced):
    b = error_bound(demo_balanced, (8, 10))
    assert b.value == 0.0 and b.tails == (0.0, 0.0)
    assert b.heuristic


def test_bound_value_is_twice_tail_sum(demo_balanced):
    s1, s2 = demo_balanced.sigmas
    b = error_bound(demo_balanced, (6, 3))
    assert b.value == pytest.approx(2 * (s1[6:].sum() + s2[3:].sum()), rel=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_single_subsystem_classical_bound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    plant = aggregate([stable_system(rng, n, 2, 2)])
    net = NetworkMatrix(np.zeros((2, 2)), np.eye(2), np.eye(2), np.zeros((2, 2)))
    bal = balance(plant, compute_gramians(plant, net, GENERALIZED))
    for r in range(n):
        bound = error_bound(bal, (r,))
        assert not bound.heuristic
        err = closed_loop_error(net, plant, truncate(bal, (r,)).plant)
        assert err <= bound.value


@pytest.mark.parametrize("sigma, ratio, r", [
    ((10.0, 9.0, 0.01, 0.001), 100.0, 2),
    ((1.0, 1.0, 1.0), 100.0, 3),
    ((1.0, 0.5, 0.001), 2.0, 1),
])
def test_suggest_orders(sigma, ratio, r):
    sub = StateSpaceModel(-np.eye(len(sigma)), np.ones((len(sigma), 1)), np.ones((1, len(sigma))),
                          [[0.0]])
    bal = BalancedRealization((BalancedSubsystem(None, None, np.array(sigma), sub),),
                              aggregate([sub]), STRUCTURED)
    assert tuple(suggest_orders(bal, ratio)) == (r,)


def test_suggest_orders_rejects_bad_ratio(demo_balanced):
    with pytest.raises(ValueError):
        suggest_orders(demo_balanced, 1.0)


def test_demo_suggestion_is_printed(demo_balanced, capsys):
    r = suggest_orders(demo_balanced)
    print("suggested orders for the stand-in model:", tuple(r))
    assert len(r) == 2


def test_hankel_comparison_single_subsystem(rng):
    plant = aggregate([stable_system(rng, 5, 2, 2)])
    net = NetworkMatrix(np.zeros((2, 2)), np.eye(2), np.eye(2), np.zeros((2, 2)))
    structured, regular = hankel_comparison(plant, net)
    np.testing.assert_allclose(structured[0], regular[0], rtol=1e-8)


def test_hankel_comparison_decoupled(rng):
    plant = aggregate([stable_system(rng, 3, 1, 1), stable_system(rng, 4, 2, 1)])
    net = NetworkMatrix(np.zeros((2, 3)), np.eye(2), np.eye(3), np.zeros((3, 2)))
    structured, regular = hankel_comparison(plant, net)
    for s, r in zip(structured, regular):
        np.testing.assert_allclose(s, r, rtol=1e-8)


def test_demo_hankel_counts(demo):
    plant, _, net = demo
    structured, regular = hankel_comparison(plant, net)
    assert [len(s) for s in structured] == [8, 10]
    for s in structured + regular:
        assert np.all(np.diff(s) <= 0)


@pytest.mark.parametrize("r", GRID)
def test_method_signatures_on_grid(demo, demo_balanced, r):
    plant, _, net = demo
    full = close_loop(plant, net)
    tr = truncate(demo_balanced, r)
    assert np.array_equal(close_loop(tr.plant, net).D, full.D)
    try:
        sp = singular_perturbation(demo_balanced, r)
    except SingularFastBlock:
        pytest.skip("fast block singular")
    g0 = nk.freq_response(full.model(), 0.0)
    h0 = nk.freq_response(close_loop(sp.plant, net).model(), 0.0)
    assert np.linalg.norm(g0 - h0) <= 1e-8 * max(1.0, np.linalg.norm(g0))


def test_random_interconnection_truncation_matches_infinity(rng):
    plant, net = random_interconnection(rng, q=3, max_order=4)
    bal = balance(plant, compute_gramians(plant, net))
    red = truncate(bal, tuple(max(n - 1, 0) for n in plant.state_dims))
    assert np.array_equal(close_loop(red.plant, net).D, close_loop(plant, net).D)


def test_gramian_partition_mismatch(demo):
    plant = demo[0]
    g = GramianPair((np.eye(18),), (np.eye(18),), STRUCTURED)
    with pytest.raises(ValueError):
        balance(plant, g)
