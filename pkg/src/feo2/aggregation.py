"""Server-side two-group aggregation and its degenerate baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .privacy import gaussian_noise_vector


class RoundSkipped(RuntimeError):
    """No usable update this round (e.g. r=0 with no opted-out client sampled)."""


@dataclass
class RoundCohort:
    private_updates: list
    nonprivate_updates: list
    indicators: list
    N_p_t: int
    N_np_t: int

    def __post_init__(self):
        if self.N_p_t != len(self.private_updates) or self.N_np_t != len(self.nonprivate_updates):
            raise ValueError("cohort counts disagree with update lists")
        if self.N_p_t + self.N_np_t < 1:
            raise ValueError("cohort must contain at least one client")


def group_mean(updates: Sequence[np.ndarray]) -> np.ndarray:
    if len(updates) == 0:
        raise RoundSkipped("empty group has no mean")
    stack = np.stack([np.asarray(u, dtype=np.float64) for u in updates])
    return stack.mean(axis=0)


def dp_group_mean(
    updates: Sequence[np.ndarray], S: float, z: float, rng: np.random.Generator
) -> np.ndarray:
    """Mean of clipped private updates plus N(0, (z*S/N_p)^2) per coordinate."""
    mean = group_mean(updates)
    for u in updates:
        if np.linalg.norm(u) > S + 1e-9:
            raise ValueError(f"private update norm {np.linalg.norm(u):.6g} exceeds clip bound {S}")
    n = len(updates)
    return mean + gaussian_noise_vector(mean.shape[0], z * S / n, rng)


def feo2_combine(
    delta_np: Optional[np.ndarray],
    delta_p: Optional[np.ndarray],
    N_np_t: int,
    N_p_t: int,
    r: float,
) -> np.ndarray:
    """Combine the group means with weights N_np : r*N_p (renormalized).

    r=1 is count-weighted averaging of everyone (plain federated averaging);
    r=0 drops the private group entirely. A missing group gets weight zero;
    if nothing remains the round is skipped.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must be in [0, 1]")
    if N_np_t < 0 or N_p_t < 0:
        raise ValueError("group counts must be >= 0")
    w_np = float(N_np_t) if delta_np is not None else 0.0
    w_p = r * float(N_p_t) if delta_p is not None else 0.0
    total = w_np + w_p
    if total <= 0.0:
        raise RoundSkipped("no group carries weight this round")
    if delta_np is None:
        return (w_p / total) * delta_p
    if delta_p is None:
        return (w_np / total) * delta_np
    return (w_np / total) * delta_np + (w_p / total) * delta_p


def apply_update(theta: np.ndarray, delta: np.ndarray, lr: float = 1.0) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if theta.shape != delta.shape:
        raise ValueError("model/update dimension mismatch")
    return theta + lr * delta
