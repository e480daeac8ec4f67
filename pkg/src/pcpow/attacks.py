"""Closed-form success probabilities for difficulty-manipulation attacks.

Units follow the double-spend analysis: the genesis difficulty is the
difficulty unit, the expected honest inter-block time is the time unit,
``n`` and ``t`` are honest and adversarial hash queries per time unit.
"""

from __future__ import annotations

import math


def simple_attack_prob(n: float, t: float, k: float) -> float:
    """Probability that one adversarial block of difficulty k is mined
    within the k time units the honest chain needs to grow k unit blocks:
    1 - (1 - 1/(n k))^(t k).

    Constant in k (for large n k), so no confirmation depth defeats it
    when miners may pick their own difficulty.
    """
    if n <= 0 or t < 0 or k <= 0:
        raise ValueError("rates must be positive and t nonnegative")
    if n * k < 1:
        raise ValueError("n*k must be at least one query per block")
    return -math.expm1(t * k * math.log1p(-1.0 / (n * k)))


def simple_attack_limit(n: float, t: float) -> float:
    """Large-(n k) limit of simple_attack_prob: 1 - exp(-t/n)."""
    if n <= 0 or t < 0:
        raise ValueError("rates must be positive and t nonnegative")
    return -math.expm1(-t / n)


def raising_attack_prob(n: float, t: float, phi: float, x: float) -> float:
    """Probability of the timestamp-compression attack without a damping
    bound: after privately completing one epoch of phi unit blocks, the
    adversary needs one block of difficulty x within phi + x - n*phi/t
    time units: 1 - (1 - 1/(n x))^(x t - (n - t) phi).

    Zero (by convention) when the exponent is not positive; approaches the
    simple-attack limit as x grows.
    """
    if min(n, t, phi, x) <= 0:
        raise ValueError("all arguments must be positive")
    exponent = x * t - (n - t) * phi
    if exponent <= 0:
        return 0.0
    return -math.expm1(exponent * math.log1p(-1.0 / (n * x)))


def dampened_catchup_deficit(n: float, t: float, damping: float,
                             phi: float) -> float:
    """Blocks the adversary still owes after raising difficulty by the
    damping bound every epoch: (n - t) * phi / (t * (damping - 1)).

    The deficit grows linearly in the epoch length, which is what defeats
    the raising attack once per-epoch changes are bounded.
    """
    if damping <= 1:
        raise ValueError("damping must exceed 1 for the deficit to be finite")
    if t <= 0:
        raise ValueError("adversarial rate must be positive")
    return (n - t) * phi / (t * (damping - 1))
