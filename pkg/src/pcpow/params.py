"""Protocol parameter record.

All knobs shared by the protocols and the simulator live here, validated
once at construction.  Quantities that enter exact consensus arithmetic
(targets, mining rate, damping) are stored as rationals; purely analytic
quantities (fluctuation bounds, slack) stay floats.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

Rational = Fraction


def _frac(x) -> Fraction:
    # str round-trip keeps literals like 0.1 exact (1/10, not the float).
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class ProtocolParams:
    """Shared parameters for the variable-difficulty parallel-chain family.

    num_chains counts the non-pivot chains; the pivot chain (chain id 0)
    is always present, so a run uses num_chains + 1 chains in total.
    blocks_per_round is the expected per-chain mining rate at the initial
    operating point (initial party count at the initial target).
    """

    num_chains: int = 10
    max_delay_rounds: int = 1          # network delay bound, in rounds
    hash_bits: int = 256               # bit length of the hash output
    epoch_length: int = 2016           # pivot blocks per difficulty epoch
    damping: Rational = Fraction(4)    # per-epoch target change bound, >= 1
    blocks_per_round: Rational = Fraction(1, 5)
    hashrate_ratio_bound: float = 1.1  # max party-count ratio in any window
    hashrate_window_rounds: int = 0    # window for the ratio bound (0 = derive)
    honest_advantage: float = 0.5      # adversary fraction < (1 - this)
    concentration_slack: float = 0.05
    security_level: float = 30.0       # exponent in the failure probability
    initial_target: Rational = Fraction(1)
    initial_parties: Optional[Rational] = None   # derived from rate if None
    query_success_density: Optional[Rational] = None  # default 2^-hash_bits
    fruit_recency_rounds: Optional[int] = None   # FruitChains R; None = derive
    fairness_slack: Optional[float] = None       # None = 4 * concentration_slack
    total_rounds: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "damping", _frac(self.damping))
        object.__setattr__(self, "blocks_per_round", _frac(self.blocks_per_round))
        object.__setattr__(self, "initial_target", _frac(self.initial_target))
        if self.query_success_density is None:
            object.__setattr__(
                self, "query_success_density", Fraction(1, 2**self.hash_bits)
            )
        else:
            object.__setattr__(
                self, "query_success_density", _frac(self.query_success_density)
            )
        if self.initial_parties is None:
            # Rate identity: blocks_per_round = p * n0 * T0.
            n0 = self.blocks_per_round / (
                self.query_success_density * self.initial_target
            )
            object.__setattr__(self, "initial_parties", n0)
        else:
            object.__setattr__(self, "initial_parties", _frac(self.initial_parties))
        if self.fairness_slack is None:
            object.__setattr__(self, "fairness_slack", 4 * self.concentration_slack)

        if self.num_chains < 0:
            raise ValueError("num_chains must be >= 0")
        if self.max_delay_rounds < 0:
            raise ValueError("max_delay_rounds must be >= 0")
        if self.epoch_length < 1:
            raise ValueError("epoch_length must be >= 1")
        if self.damping < 1:
            raise ValueError("damping must be >= 1")
        for name in (
            "blocks_per_round",
            "initial_target",
            "initial_parties",
            "query_success_density",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.honest_advantage <= 1:
            raise ValueError("honest_advantage must be in (0, 1]")
        if not 0 < self.concentration_slack < 1:
            raise ValueError("concentration_slack must be in (0, 1)")
        if self.hashrate_ratio_bound < 1:
            raise ValueError("hashrate_ratio_bound must be >= 1")
        if self.security_level <= 0:
            raise ValueError("security_level must be positive")
        if self.total_rounds < 1:
            raise ValueError("total_rounds must be >= 1")

    def with_updates(self, **kwargs) -> "ProtocolParams":
        return replace(self, **kwargs)

    @property
    def ideal_epoch_duration(self) -> Fraction:
        """Rounds an epoch takes when parties and target sit at the
        initial operating point."""
        return Fraction(self.epoch_length) / self.blocks_per_round
