"""Monte-Carlo race harnesses for the difficulty-manipulation attacks.

Each harness simulates the stochastic race the closed forms in
``attacks`` approximate, using its own counter-based stream, and serves as
an independent oracle for those formulas.  The stale-reference harness
additionally routes the attack block through the real voter-block
validator, so the monotonicity switch is exercised by actual protocol
code, not by the race arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ADVERSARY_MINER, Block, IdFactory
from .params import ProtocolParams
from .prism import MONOTONICITY, PrismState, VoterPayload


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=[seed & (2**64 - 1), tag])
    )


def simple_attack_race(n: float, t: float, k: int, trials: int,
                       seed: int) -> float:
    """Empirical frequency of the one-heavy-block double spend: the
    adversary makes t*k queries, each succeeding with probability
    1/(n*k), inside the honest chain's k-block window."""
    rng = _rng(seed, 1)
    queries = int(round(t * k))
    hits = rng.binomial(queries, 1.0 / (n * k), size=trials)
    return float(np.mean(hits >= 1))


def raising_attack_race(n: float, t: float, phi: int, x: float,
                        trials: int, seed: int) -> float:
    """Empirical frequency of the private-epoch raising attack: complete
    phi unit-difficulty blocks privately (stochastic duration), then mine
    one block of difficulty x before the public chain accumulates phi + x
    difficulty."""
    rng = _rng(seed, 2)
    epoch_time = rng.gamma(shape=phi, scale=n / t, size=trials)
    heavy_time = rng.exponential(scale=n * x / t, size=trials)
    return float(np.mean(epoch_time + heavy_time < phi + x))


@dataclass
class StaleRefOutcome:
    trials: int
    successes: int
    rejected_by_validator: bool
    violation: str | None

    @property
    def frequency(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def stale_ref_attack(
    adversary_ratio: float,
    k: int,
    trials: int,
    seed: int,
    enforce_m2: bool = True,
) -> StaleRefOutcome:
    """The stale-reference safety attack on a voter chain.

    Setup: the proposer tree holds an old block of difficulty k + 2 on a
    side branch that the public chain has since outgrown (the yield of a
    completed timestamp-compression phase).  The adversary derives a
    voter-block target from that stale block and forks around a victim
    voter block, racing to overtake the public voter chain with one heavy
    block while the victim heads toward k-deep confirmation.

    The attack block is run through the real voter-block validator: with
    the monotonicity rule on it is rejected outright and every trial
    fails; with the rule off, a trial succeeds when the adversary (with a
    t/n = adversary_ratio query share) mines its one heavy block before
    the public voter chain accumulates more than k + 1 unit blocks past
    the fork point.
    """
    if adversary_ratio <= 0:
        raise ValueError("adversary_ratio must be positive")
    heavy = k + 2
    params = ProtocolParams(num_chains=1, epoch_length=10**6)
    state = PrismState(params, enforce_m2=enforce_m2)
    ids = IdFactory(seed)
    view = state.view

    # Public proposer chain: unit-target blocks, strictly heavier than the
    # stale branch by attack time.
    for ts in range(1, 2 * heavy + 2):
        view.add_block(Block(
            id=ids.new_id(), chain_id=0, parent=view.heaviest_tip(0),
            timestamp=ts, target=Fraction(1),
        ))
    # Old heavy proposer block on a lighter side branch.
    heavy_block = Block(
        id=ids.new_id(), chain_id=0, parent=view.genesis(0), timestamp=1,
        target=Fraction(1, heavy), miner=ADVERSARY_MINER,
    )
    view.add_block(heavy_block)
    assert view.heaviest_tip(0) != heavy_block.id

    # Voter chain: an honest block referencing the public tip, then the
    # victim block the adversary wants to reverse.
    now = 2 * heavy + 2
    v1 = Block(
        id=ids.new_id(), chain_id=1, parent=view.heaviest_tip(1),
        timestamp=now, target=Fraction(1), pivot_ref=state.proposer_tip(),
        payload=VoterPayload(state.votes_for(1, state.proposer_tip())),
    )
    assert state.add_voter_block(v1) is None
    victim = Block(
        id=ids.new_id(), chain_id=1, parent=v1.id, timestamp=now + 1,
        target=Fraction(1), pivot_ref=state.proposer_tip(),
        payload=VoterPayload(()),
    )
    assert state.add_voter_block(victim) is None

    # The attack block forks around the victim, deriving its target from
    # the stale heavy proposer block.
    attack = Block(
        id=ids.new_id(), chain_id=1, parent=v1.id, timestamp=now + 2,
        target=Fraction(1, heavy), pivot_ref=heavy_block.id,
        miner=ADVERSARY_MINER, payload=VoterPayload(()),
    )
    violation = state.validate_voter_block(attack)
    if enforce_m2:
        if violation != MONOTONICITY:
            raise AssertionError(
                f"expected monotonicity rejection, got {violation!r}"
            )
        return StaleRefOutcome(trials, 0, True, violation)
    if violation is not None:
        raise AssertionError(f"unexpected violation {violation!r}")

    # Race past the fork point: the public chain grows unit blocks at rate
    # one per time unit (the victim already counts for one); the heavy
    # block of difficulty k + 2 wins while the public weight is <= k + 1,
    # i.e. before the (k+1)-th further public block.
    rng = _rng(seed, 3)
    honest_done = rng.gamma(shape=k + 1, scale=1.0, size=trials)
    adversary_hit = rng.exponential(scale=heavy / adversary_ratio, size=trials)
    successes = int(np.sum(adversary_hit < honest_done))
    return StaleRefOutcome(trials, successes, False, None)
