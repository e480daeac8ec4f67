"""Rank-ordered parallel-chain protocol: m+1 chains merged into one ledger.

Every block carries a (rank, next_rank) pair.  A block's rank is its
parent's next_rank; its next_rank is the maximum of rank + its own block
difficulty and the next_rank of the heaviest tips the miner saw, recorded
via a trailing reference so validators can recompute the pair.  The
sequence of confirmed blocks orders partially-confirmed blocks across all
chains by rank, breaking ties toward smaller chain ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .core import Block, BlockId, ChainView, Rational
from .difficulty import nonpivot_target
from .params import ProtocolParams

UNKNOWN_REFERENCE = "unknown-reference"
TARGET_MISMATCH = "target-mismatch"
MONOTONICITY = "monotonicity"
RANK_MISMATCH = "rank-mismatch"


@dataclass(frozen=True)
class OhieMeta:
    """Ordering fields carried by a block."""

    rank: Rational
    next_rank: Rational
    trailing_ref: BlockId   # block whose next_rank was folded in
    chain0_parent: BlockId  # pivot block the target was derived from


def compute_rank(
    parent_meta: OhieMeta,
    block_difficulty: Rational,
    trailing_ref: BlockId,
    trailing_next_rank: Rational,
) -> tuple[Rational, Rational]:
    """Rank pair for a new block: rank is the parent's next_rank, and
    next_rank = max(rank + difficulty, trailing tip's next_rank)."""
    rank = parent_meta.next_rank
    return rank, max(rank + block_difficulty, trailing_next_rank)


class OhieState:
    """One party's view of all chains with rank bookkeeping.

    Chain 0 is the pivot; genesis blocks all have rank 0 and next_rank 1.
    """

    def __init__(self, params: ProtocolParams):
        self.params = params
        self.view = ChainView.create(params.num_chains + 1, params.initial_target)
        self.meta: dict[BlockId, OhieMeta] = {}
        g0 = self.view.genesis(0)
        for c in self.view.chain_ids():
            g = self.view.genesis(c)
            self.meta[g] = OhieMeta(
                rank=Fraction(0), next_rank=Fraction(1),
                trailing_ref=g, chain0_parent=g0,
            )

    # -- mining ----------------------------------------------------------

    def trailing_tip(self) -> BlockId:
        """Tip with the maximal next_rank among all heaviest tips (the
        reference a miner embeds); deterministic tie-break by chain id."""
        best = None
        for c in self.view.chain_ids():
            tip = self.view.heaviest_tip(c)
            nr = self.meta[tip].next_rank
            if best is None or nr > best[0]:
                best = (nr, tip)
        return best[1]

    def make_block(
        self,
        chain_id: int,
        timestamp: int,
        id_: BlockId,
        miner=None,
        parent: Optional[BlockId] = None,
        chain0_parent: Optional[BlockId] = None,
        trailing_ref: Optional[BlockId] = None,
        target: Optional[Rational] = None,
    ) -> Block:
        """Honest mining template; the optional overrides exist for
        adversarial construction."""
        parent = parent or self.view.heaviest_tip(chain_id)
        chain0_parent = chain0_parent or self.view.heaviest_tip(0)
        trailing_ref = trailing_ref or self.trailing_tip()
        target = target or nonpivot_target(chain0_parent, self.view, self.params)
        kwargs = {} if miner is None else {"miner": miner}
        return Block(
            id=id_, chain_id=chain_id, parent=parent, timestamp=timestamp,
            target=target, pivot_ref=chain0_parent,
            payload=trailing_ref, **kwargs,
        )

    # -- validation / intake ----------------------------------------------

    def validate_block(self, block: Block) -> Optional[str]:
        """All reference, target, monotonicity and rank checks; returns a
        violation reason or None."""
        view = self.view
        trailing_ref = block.payload
        if (
            block.parent not in view
            or block.pivot_ref is None
            or block.pivot_ref not in view
            or not isinstance(trailing_ref, bytes)
            or trailing_ref not in view
        ):
            return UNKNOWN_REFERENCE
        if view.block(block.pivot_ref).chain_id != 0:
            return UNKNOWN_REFERENCE
        if block.target != nonpivot_target(block.pivot_ref, view, self.params):
            return TARGET_MISMATCH
        parent_ref = self.meta[block.parent].chain0_parent
        if view.chain_difficulty(block.pivot_ref) < view.chain_difficulty(parent_ref):
            return MONOTONICITY
        return None

    def add_block(self, block: Block) -> Optional[str]:
        reason = self.validate_block(block)
        if reason is not None:
            return reason
        trailing_ref = block.payload
        rank, next_rank = compute_rank(
            self.meta[block.parent],
            block.difficulty,
            trailing_ref,
            self.meta[trailing_ref].next_rank,
        )
        self.view.add_block(block)
        self.meta[block.id] = OhieMeta(
            rank=rank, next_rank=next_rank,
            trailing_ref=trailing_ref, chain0_parent=block.pivot_ref,
        )
        return None

    def check_rank_claim(
        self, block: Block, claimed_rank: Rational, claimed_next_rank: Rational
    ) -> Optional[str]:
        """Recompute the rank pair from the embedded references and compare
        with a claimed pair (validators never trust miner arithmetic)."""
        trailing_ref = block.payload
        rank, next_rank = compute_rank(
            self.meta[block.parent],
            block.difficulty,
            trailing_ref,
            self.meta[trailing_ref].next_rank,
        )
        if (rank, next_rank) != (claimed_rank, claimed_next_rank):
            return RANK_MISMATCH
        return None


# -- confirmation ----------------------------------------------------------


def k_deep_rule(k: int) -> Callable[[OhieState, Sequence[Block], int], int]:
    """Partially confirmed = at least k deep in its chain (the tip itself
    is 1 deep)."""

    def rule(state, chain, now):
        return max(0, len(chain) - k + 1)

    return rule


def time_rule(window: int) -> Callable[[OhieState, Sequence[Block], int], int]:
    """Partially confirmed = timestamp at least ``window`` rounds old."""

    def rule(state, chain, now):
        n = 0
        for b in chain:
            if b.timestamp <= now - window:
                n += 1
            else:
                break
        return n

    return rule


@dataclass
class ScbResult:
    blocks: list[Block]          # fully-confirmed, ordered
    confirm_bar: Rational
    last_partial_next_rank: dict[int, Rational]  # y_i per chain


def generate_scb(
    state: OhieState,
    partial_confirm_rule: Callable[[OhieState, Sequence[Block], int], int],
    now: int = 0,
) -> ScbResult:
    """Sequence of confirmed blocks across all chains.

    y_i is the next_rank of the last partially-confirmed block on chain i's
    heaviest chain; confirm_bar is the minimum y_i; the output is every
    partially-confirmed block with rank below confirm_bar, ordered by rank
    with ties favoring smaller chain ids.
    """
    partial: list[tuple[Rational, int, Block]] = []
    y: dict[int, Rational] = {}
    for c in state.view.chain_ids():
        chain = state.view.heaviest_chain(c)
        n = partial_confirm_rule(state, chain, now)
        # Genesis blocks are protocol constants and always count as
        # partially confirmed.
        n = min(max(n, 1), len(chain))
        y[c] = state.meta[chain[n - 1].id].next_rank
        for b in chain[:n]:
            partial.append((state.meta[b.id].rank, c, b))
    confirm_bar = min(y.values())
    confirmed = [
        (rank, c, b) for rank, c, b in partial if rank < confirm_bar
    ]
    confirmed.sort(key=lambda t: (t[0], t[1]))
    return ScbResult(
        blocks=[b for _, _, b in confirmed],
        confirm_bar=confirm_bar,
        last_partial_next_rank=y,
    )
