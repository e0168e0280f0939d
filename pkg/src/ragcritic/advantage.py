"""Group-relative advantages over sampled critique rewards."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AdvantageSet:
    advantages: list[float]
    mean: float
    std: float
    degenerate: bool


def compute_advantages(rewards, epsilon: float = 1e-8, ddof: int = 0) -> AdvantageSet:
    """Standardize a group of rewards by its own mean and standard deviation.

    ``ddof=0`` gives the population deviation; groups whose deviation falls
    below ``epsilon`` carry no signal and get all-zero advantages.
    """
    rewards = [float(r) for r in rewards]
    n = len(rewards)
    if n == 0:
        raise ValueError("cannot compute advantages of an empty group")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if n - ddof <= 0:
        raise ValueError(f"group of {n} too small for ddof={ddof}")
    mean = math.fsum(rewards) / n
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in rewards) / (n - ddof))
    if std < epsilon:
        return AdvantageSet([0.0] * n, mean, std, True)
    return AdvantageSet([(r - mean) / std for r in rewards], mean, std, False)
