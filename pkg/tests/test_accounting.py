"""Privacy accountant: composition bookkeeping and the subsampled-Gaussian
RDP curve, cross-checked against quadrature and plain-precision summation
oracles that share no code with the implementation."""

import math

import pytest

from feo2.accounting import (
    DEFAULT_ORDERS,
    InfinitePrivacyLoss,
    PrivacyLedger,
    account_round,
    epsilon_at_delta,
    rdp_increment,
    solve_z,
)

import oracles


def test_default_order_grid_shape():
    assert DEFAULT_ORDERS[0] == 1.25
    assert DEFAULT_ORDERS[-1] == 512
    assert 63.75 in DEFAULT_ORDERS
    assert 64 in DEFAULT_ORDERS and 128 in DEFAULT_ORDERS and 256 in DEFAULT_ORDERS
    diffs = {round(b - a, 10) for a, b in zip(DEFAULT_ORDERS[:250], DEFAULT_ORDERS[1:251])}
    assert diffs == {0.25}


def test_full_batch_reduces_to_gaussian_rdp():
    for z in (0.5, 1.0, 3.3, 10.0):
        inc = rdp_increment(1.0, z, DEFAULT_ORDERS)
        for a, got in zip(DEFAULT_ORDERS, inc):
            want = a / (2.0 * z * z)
            assert abs(got - want) <= 1e-12 * max(1.0, want), (z, a)


def test_increment_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rdp_increment(0.0, 1.0, DEFAULT_ORDERS)
    with pytest.raises(ValueError):
        rdp_increment(1.2, 1.0, DEFAULT_ORDERS)
    with pytest.raises(InfinitePrivacyLoss):
        rdp_increment(0.1, 0.0, DEFAULT_ORDERS)


def test_ledger_accumulates_by_pure_addition():
    inc = rdp_increment(0.02, 1.1, DEFAULT_ORDERS)
    ledger = PrivacyLedger()
    expected = tuple(0.0 for _ in DEFAULT_ORDERS)
    for t in range(7):
        ledger = account_round(ledger, 0.02, 1.1)
        expected = tuple(e + i for e, i in zip(expected, inc))
        assert ledger.cumulative_rdp == expected  # exact float equality
        assert ledger.rounds_recorded == t + 1


def test_account_round_leaves_input_ledger_untouched():
    ledger = account_round(PrivacyLedger(), 0.1, 1.0)
    before = ledger.cumulative_rdp
    account_round(ledger, 0.1, 1.0)
    assert ledger.cumulative_rdp == before
    assert ledger.rounds_recorded == 1


def _eps(q, z, rounds, delta=1e-5):
    ledger = PrivacyLedger()
    for _ in range(rounds):
        ledger = account_round(ledger, q, z)
    return epsilon_at_delta(ledger, delta)[0]


def test_epsilon_monotone_in_noise_and_rounds():
    zs = [0.6, 1.0, 2.0, 4.0, 8.0]
    ts = [1, 5, 20, 60, 120]
    grid = {(z, t): _eps(0.05, z, t) for z in zs for t in ts}
    for t in ts:
        col = [grid[(z, t)] for z in zs]
        assert all(a > b for a, b in zip(col, col[1:])), f"not decreasing in z at T={t}"
    for z in zs:
        row = [grid[(z, t)] for t in ts]
        assert all(a < b for a, b in zip(row, row[1:])), f"not increasing in T at z={z}"


@pytest.mark.parametrize("q", [0.001, 0.02, 0.3, 0.9])
@pytest.mark.parametrize("z", [0.7, 1.3, 5.0])
def test_matches_quadrature_oracle_at_fractional_orders(q, z):
    for alpha in (1.25, 1.75, 3.5, 7.25, 31.5, 63.75):
        got = rdp_increment(q, z, (alpha,))[0]
        want = oracles.rdp_subsampled_gaussian_quadrature(q, z, alpha)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want)), (q, z, alpha)


@pytest.mark.parametrize("q", [0.001, 0.02, 0.3, 0.9])
@pytest.mark.parametrize("z", [0.7, 1.3, 5.0])
def test_matches_binomial_oracle_at_integer_orders(q, z):
    for alpha in (2, 3, 16, 64, 256):
        got = rdp_increment(q, z, (float(alpha),))[0]
        want = oracles.rdp_subsampled_gaussian_binomial(q, z, alpha)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want)), (q, z, alpha)


def test_epsilon_conversion_picks_best_order():
    ledger = account_round(PrivacyLedger(), 0.01, 1.0)
    eps, order = epsilon_at_delta(ledger, 1e-5)
    by_hand = min(
        r + math.log(1e5) / (a - 1.0) for a, r in zip(ledger.orders, ledger.cumulative_rdp)
    )
    assert eps == pytest.approx(by_hand, abs=0)
    assert order in ledger.orders


def test_epsilon_delta_validation():
    with pytest.raises(ValueError):
        epsilon_at_delta(PrivacyLedger(), 0.0)


@pytest.mark.parametrize("target", [0.5, 2.0, 8.0])
def test_solve_z_roundtrip(target):
    z = solve_z(target, 1e-5, 0.02, 100)
    assert abs(_eps(0.02, z, 100) - target) <= 1e-3


def test_solve_z_unreachable_target():
    with pytest.raises(ValueError, match="reachable"):
        solve_z(1e-9, 1e-5, 1.0, 10_000)
    with pytest.raises(ValueError):
        solve_z(-1.0, 1e-5, 0.1, 10)
