"""Rényi-DP accounting for the Poisson-subsampled Gaussian mechanism.

The ledger stores cumulative RDP at a fixed grid of orders; each noised round
adds the per-order RDP of one subsampled Gaussian release (sampling rate q,
noise multiplier z). Conversion to (epsilon, delta) takes the minimum over
orders of ``rdp(a) + log(1/delta)/(a - 1)``.

Integer orders use the exact binomial expansion of the log moment; fractional
orders use the two-sided series with Gaussian tail terms. Both are computed
in log space to stay finite at large orders (the raw moment overflows float64
around order 64 already for modest q/z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Orders 1.25, 1.50, ..., 63.75 plus sparse large orders. Fractional steps keep
# the epsilon curve tight at small budgets; the large tail covers tiny q*T.
DEFAULT_ORDERS: tuple[float, ...] = tuple(
    float(x) for x in np.arange(1.25, 63.75 + 1e-9, 0.25)
) + (64.0, 128.0, 256.0, 512.0)


class InfinitePrivacyLoss(ValueError):
    """Raised when accounting is requested for an unnoised (z = 0) release."""


@dataclass(frozen=True)
class PrivacyLedger:
    orders: tuple[float, ...] = DEFAULT_ORDERS
    cumulative_rdp: tuple[float, ...] = field(default=None)
    rounds_recorded: int = 0

    def __post_init__(self):
        if len(self.orders) == 0:
            raise ValueError("order grid must be nonempty")
        if any(a <= 1.0 for a in self.orders):
            raise ValueError("RDP orders must be > 1")
        if self.cumulative_rdp is None:
            object.__setattr__(self, "cumulative_rdp", tuple(0.0 for _ in self.orders))
        if len(self.cumulative_rdp) != len(self.orders):
            raise ValueError("orders and cumulative_rdp must have equal length")

    def to_dict(self) -> dict:
        return {
            "orders": list(self.orders),
            "rdp": list(self.cumulative_rdp),
            "rounds_recorded": self.rounds_recorded,
        }


def _log_add(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a > b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _log_sub(a: float, b: float) -> float:
    """log(exp(a) - exp(b)) for a >= b."""
    if b == -math.inf:
        return a
    if a == b:
        return -math.inf
    if a < b:
        raise ValueError("_log_sub needs a >= b")
    return a + math.log1p(-math.exp(b - a))


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_erfc(x: float) -> float:
    if x <= 8.0:
        return math.log(math.erfc(x))
    # asymptotic expansion; erfc underflows float64 near x ~ 26.6
    return (
        -(x**2)
        - math.log(x)
        - 0.5 * math.log(math.pi)
        + math.log1p(-0.5 / x**2 + 0.75 / x**4)
    )


def _log_a_int(q: float, sigma: float, alpha: int) -> float:
    """log E[(...)^alpha] via the exact binomial sum at integer alpha."""
    log_a = -math.inf
    for i in range(alpha + 1):
        term = (
            _log_comb(alpha, i)
            + i * math.log(q)
            + (alpha - i) * math.log1p(-q)
            + (i * i - i) / (2.0 * sigma**2)
        )
        log_a = _log_add(log_a, term)
    return log_a


def _log_a_frac(q: float, sigma: float, alpha: float) -> float:
    """log moment at fractional alpha: two-sided series split at z0."""
    log_a0 = -math.inf
    log_a1 = -math.inf
    z0 = sigma**2 * math.log(1.0 / q - 1.0) + 0.5
    # running log|binom(alpha, i)| and its sign, built by the product rule
    log_coef = 0.0
    sign = 1.0
    i = 0
    while True:
        if i > 0:
            ratio = (alpha - i + 1.0) / i
            if ratio == 0.0:
                break
            log_coef += math.log(abs(ratio))
            sign *= math.copysign(1.0, ratio)
        j = alpha - i
        log_t0 = log_coef + i * math.log(q) + j * math.log1p(-q)
        log_t1 = log_coef + j * math.log(q) + i * math.log1p(-q)
        log_e0 = math.log(0.5) + _log_erfc((i - z0) / (math.sqrt(2.0) * sigma))
        log_e1 = math.log(0.5) + _log_erfc((z0 - j) / (math.sqrt(2.0) * sigma))
        log_s0 = log_t0 + (i * i - i) / (2.0 * sigma**2) + log_e0
        log_s1 = log_t1 + (j * j - j) / (2.0 * sigma**2) + log_e1
        if sign > 0:
            log_a0 = _log_add(log_a0, log_s0)
            log_a1 = _log_add(log_a1, log_s1)
        else:
            log_a0 = _log_sub(log_a0, log_s0)
            log_a1 = _log_sub(log_a1, log_s1)
        i += 1
        if max(log_s0, log_s1) < -30.0 and i > alpha:
            break
    return _log_add(log_a0, log_a1)


def _rdp_one_order(q: float, sigma: float, alpha: float) -> float:
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return alpha / (2.0 * sigma**2)
    if float(alpha).is_integer():
        log_a = _log_a_int(q, sigma, int(alpha))
    else:
        log_a = _log_a_frac(q, sigma, alpha)
    return max(log_a / (alpha - 1.0), 0.0)


@lru_cache(maxsize=256)
def rdp_increment(q: float, z: float, orders: tuple[float, ...]) -> tuple[float, ...]:
    """Per-order RDP of a single subsampled Gaussian round."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must be in (0, 1]")
    if z <= 0.0:
        raise InfinitePrivacyLoss("z = 0 gives no privacy; nothing to account")
    return tuple(_rdp_one_order(q, z, a) for a in orders)


def account_round(ledger: PrivacyLedger, q: float, z: float) -> PrivacyLedger:
    """Return a new ledger with one more (q, z) round composed in."""
    inc = rdp_increment(q, z, ledger.orders)
    total = tuple(c + i for c, i in zip(ledger.cumulative_rdp, inc))
    return PrivacyLedger(ledger.orders, total, ledger.rounds_recorded + 1)


def epsilon_at_delta(ledger: PrivacyLedger, delta: float) -> tuple[float, float]:
    """(epsilon, best_order) from the ledger via the standard RDP conversion."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    log_inv = math.log(1.0 / delta)
    best_eps = math.inf
    best_order = ledger.orders[0]
    for a, r in zip(ledger.orders, ledger.cumulative_rdp):
        eps = r + log_inv / (a - 1.0)
        if eps < best_eps:
            best_eps = eps
            best_order = a
    return best_eps, best_order


def solve_z(
    target_epsilon: float,
    delta: float,
    q: float,
    rounds: int,
    z_lo: float = 0.1,
    z_hi: float = 100.0,
    tol: float = 1e-3,
) -> float:
    """Invert the accountant: smallest-noise z with epsilon(z) ~ target (bisection).

    epsilon is strictly decreasing in z, so the root is unique when the target
    lies between epsilon(z_hi) and epsilon(z_lo).
    """
    if target_epsilon <= 0:
        raise ValueError("target epsilon must be > 0")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")

    def eps_of(z: float) -> float:
        ledger = PrivacyLedger()
        inc = rdp_increment(q, z, ledger.orders)
        total = tuple(rounds * i for i in inc)
        return epsilon_at_delta(PrivacyLedger(ledger.orders, total, rounds), delta)[0]

    lo, hi = z_lo, z_hi
    eps_lo, eps_hi = eps_of(lo), eps_of(hi)
    if not (eps_hi <= target_epsilon <= eps_lo):
        raise ValueError(
            f"target epsilon {target_epsilon} outside reachable range "
            f"[{eps_hi:.4g}, {eps_lo:.4g}] for z in [{z_lo}, {z_hi}]"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = eps_of(mid)
        if abs(e - target_epsilon) < tol:
            return mid
        if e > target_epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
