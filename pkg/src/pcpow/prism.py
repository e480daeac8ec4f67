"""Voting-based parallel-chain protocol: proposer tree plus m voter trees.

Voter blocks vote for proposer blocks by difficulty interval rather than
by tree level.  Votes along one voter chain are sanitized into disjoint
intervals, a leader is elected per difficulty by plurality across voter
chains, and the ledger is the proposer blocks ordered by the infimum
difficulty at which they lead.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .core import Block, BlockId, ChainView, Rational
from .difficulty import next_target, nonpivot_target
from .params import ProtocolParams

# Violation reason codes returned by validate_voter_block.
TARGET_MISMATCH = "target-mismatch"
MONOTONICITY = "monotonicity"
VOTE_GAP = "vote-gap"
VOTE_TERMINUS = "vote-terminus"
VOTE_INTERVAL = "vote-interval"
UNKNOWN_REFERENCE = "unknown-reference"


@dataclass(frozen=True)
class Vote:
    """A pointer from a voter block to one proposer block, together with
    the proposer block's covered difficulty interval."""

    voter_chain: int
    proposer_block: BlockId
    interval: tuple[Rational, Rational]


@dataclass(frozen=True)
class VoterPayload:
    votes: tuple[Vote, ...]


@dataclass
class LeaderAssignment:
    """Leader election result over the atomic interval partition."""

    atomic_intervals: list[tuple[Rational, Rational]]
    leaders: list[Optional[BlockId]]  # one per atomic interval
    grades: dict[BlockId, Rational]   # infimum difficulty led; absent = never


class PrismState:
    """One party's protocol state: chain 0 is the proposer tree, chains
    1..m are voter trees.  Tracks, per voter block, the rightmost
    difficulty its chain has voted for (used for vote continuity)."""

    def __init__(self, params: ProtocolParams, enforce_m2: bool = True):
        self.params = params
        self.enforce_m2 = enforce_m2
        self.view = ChainView.create(params.num_chains + 1, params.initial_target)
        self._last_voted: dict[BlockId, Rational] = {}
        self._ref: dict[BlockId, BlockId] = {}
        pg = self.view.genesis(0)
        # Both genesis blocks are common knowledge: a fresh voter chain is
        # treated as having voted through the proposer genesis already.
        for i in range(1, params.num_chains + 1):
            vg = self.view.genesis(i)
            self._last_voted[vg] = self.view.chain_difficulty(pg)
            self._ref[vg] = pg

    # -- queries ---------------------------------------------------------

    def proposer_tip(self) -> BlockId:
        return self.view.heaviest_tip(0)

    def last_voted(self, voter_block: BlockId) -> Rational:
        """Rightmost difficulty voted by the voter chain ending at the block."""
        return self._last_voted[voter_block]

    def pivot_ref_of(self, voter_block: BlockId) -> BlockId:
        return self._ref[voter_block]

    # -- block intake ----------------------------------------------------

    def add_proposer_block(self, block: Block) -> Optional[str]:
        """Validate and insert a proposer block; returns a violation reason
        or None.  Proposer targets must follow the recalculation rule along
        the block's own branch."""
        if block.parent not in self.view:
            return UNKNOWN_REFERENCE
        expected = nonpivot_target(block.parent, self.view, self.params)
        if block.target != expected:
            return TARGET_MISMATCH
        self.view.add_block(block)
        return None

    def validate_voter_block(self, block: Block) -> Optional[str]:
        """Check a voter block without inserting it.

        Enforced: the target equals the one derived from the referenced
        proposer block; the referenced proposer block's chain difficulty is
        not below the one referenced by the voter parent (when the
        monotonicity rule is on); votes carry the true covered intervals,
        leave no gap against the chain's previous coverage, advance
        strictly, and never exceed the referenced proposer block's chain
        difficulty.  (Honest miners additionally vote all the way up to
        their proposer parent; validity only bounds votes from above.)
        """
        view = self.view
        if (
            block.parent not in view
            or block.pivot_ref is None
            or block.pivot_ref not in view
        ):
            return UNKNOWN_REFERENCE
        if view.block(block.pivot_ref).chain_id != 0:
            return UNKNOWN_REFERENCE
        if block.target != nonpivot_target(block.pivot_ref, view, self.params):
            return TARGET_MISMATCH
        if self.enforce_m2:
            parent_ref = self._ref[block.parent]
            if view.chain_difficulty(block.pivot_ref) < view.chain_difficulty(
                parent_ref
            ):
                return MONOTONICITY

        payload = block.payload
        votes = payload.votes if isinstance(payload, VoterPayload) else ()
        b_star = view.chain_difficulty(block.pivot_ref)
        prev_b = self._last_voted[block.parent]
        for v in votes:
            if v.proposer_block not in view:
                return UNKNOWN_REFERENCE
            if v.interval != view.covered_interval(v.proposer_block):
                return VOTE_INTERVAL
            lo, hi = v.interval
            # No gap against the previous right endpoint, strict advance.
            if lo > prev_b or hi <= prev_b:
                return VOTE_GAP
            prev_b = hi
        if votes and votes[-1].interval[1] > b_star:
            return VOTE_TERMINUS
        return None

    def add_voter_block(self, block: Block) -> Optional[str]:
        reason = self.validate_voter_block(block)
        if reason is not None:
            return reason
        self.register_voter_block(block)
        return None

    def register_voter_block(self, block: Block) -> None:
        """Insert a voter block without validation (trusted input)."""
        self.view.add_block(block)
        votes = block.payload.votes if isinstance(block.payload, VoterPayload) else ()
        self._last_voted[block.id] = (
            votes[-1].interval[1] if votes else self._last_voted[block.parent]
        )
        self._ref[block.id] = block.pivot_ref

    # -- honest templates --------------------------------------------------

    def proposer_timestamps(self, tip: BlockId) -> list[int]:
        return [b.timestamp for b in self.view.chain(tip)[1:]]

    def next_proposer_target(self) -> Rational:
        return next_target(self.proposer_timestamps(self.proposer_tip()), self.params)

    def votes_for(self, voter_chain: int, proposer_parent: BlockId) -> tuple[Vote, ...]:
        """Honest vote list for a voter block on the given chain: votes for
        the proposer-parent branch blocks covering everything past the
        chain's last-voted difficulty."""
        view = self.view
        tip = view.heaviest_tip(voter_chain)
        b0 = self._last_voted[tip]
        picked: list[Block] = []
        b = view.block(proposer_parent)
        while view.chain_difficulty(b.id) > b0 and b.parent is not None:
            picked.append(b)
            b = view.block(b.parent)
        picked.reverse()
        return tuple(
            Vote(voter_chain, blk.id, view.covered_interval(blk.id))
            for blk in picked
        )


def sanitize_votes(
    votes: Sequence[tuple[BlockId, Rational, Rational]]
) -> list[tuple[BlockId, Rational, Rational]]:
    """Sanitize consecutive valid votes into disjoint intervals.

    (a1,b1],(a2,b2],...,(an,bn] becomes (a1,b1],(b1,b2],...,(b_{n-1},bn]:
    every difficulty keeps the first vote that covered it, and the output
    tiles (a1, bn] with no overlap.
    """
    out: list[tuple[BlockId, Rational, Rational]] = []
    prev_hi: Optional[Rational] = None
    for blk, lo, hi in votes:
        cut = lo if prev_hi is None else prev_hi
        if prev_hi is not None and hi <= prev_hi:
            raise ValueError("votes must advance strictly")
        out.append((blk, cut, hi))
        prev_hi = hi
    return out


def _sanitized_chain_votes(
    state: PrismState, voter_chain: int
) -> list[tuple[BlockId, Rational, Rational]]:
    """Disjoint vote intervals along the heaviest chain of one voter tree."""
    raw: list[tuple[BlockId, Rational, Rational]] = []
    for b in state.view.heaviest_chain(voter_chain):
        if isinstance(b.payload, VoterPayload):
            for v in b.payload.votes:
                raw.append((v.proposer_block, v.interval[0], v.interval[1]))
    return sanitize_votes(raw)


def leader_at(d: Rational, state: PrismState) -> Optional[BlockId]:
    """Plurality winner among the per-chain sanitized votes at difficulty
    d; ties go to the smaller block id; None when no chain votes at d."""
    if d <= 0:
        raise ValueError("difficulty must be positive")
    counts: dict[BlockId, int] = {}
    for i in range(1, state.params.num_chains + 1):
        for blk, lo, hi in _sanitized_chain_votes(state, i):
            if lo < d <= hi:
                counts[blk] = counts.get(blk, 0) + 1
                break
    if not counts:
        return None
    best = max(counts.values())
    return min(b for b, c in counts.items() if c == best)


def leader_assignment(state: PrismState) -> LeaderAssignment:
    """Elect a leader on every atomic interval of the proposer tree.

    The leader function is constant on each atomic interval (all vote
    interval endpoints are proposer-block interval endpoints), so
    evaluating it at the right endpoint of each interval is exact.
    """
    view = state.view
    endpoints = set()
    for b in view.blocks_on_chain(0):
        lo, hi = view.covered_interval(b.id)
        endpoints.add(lo)
        endpoints.add(hi)
    cuts = sorted(endpoints)
    intervals = [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]
    per_chain = [
        _sanitized_chain_votes(state, i)
        for i in range(1, state.params.num_chains + 1)
    ]
    leaders: list[Optional[BlockId]] = []
    grades: dict[BlockId, Rational] = {}
    for lo, hi in intervals:
        counts: dict[BlockId, int] = {}
        for chain_votes in per_chain:
            for blk, vlo, vhi in chain_votes:
                if vlo < hi <= vhi:
                    counts[blk] = counts.get(blk, 0) + 1
                    break
        if counts:
            best = max(counts.values())
            winner = min(b for b, c in counts.items() if c == best)
            leaders.append(winner)
            if winner not in grades:
                grades[winner] = lo
        else:
            leaders.append(None)
    return LeaderAssignment(intervals, leaders, grades)


def leader_sequence(state: PrismState) -> list[BlockId]:
    """Proposer blocks ordered by the infimum difficulty at which they
    lead; blocks that never lead are dropped."""
    assignment = leader_assignment(state)
    return [b for b, _ in sorted(assignment.grades.items(), key=lambda kv: kv[1])]


def leader_sequence_below(state: PrismState, d: Rational) -> list[BlockId]:
    """Leader sequence restricted to grades strictly below difficulty d
    (the stabilized prefix used by persistence checks)."""
    assignment = leader_assignment(state)
    return [
        b for b, g in sorted(assignment.grades.items(), key=lambda kv: kv[1])
        if g < d
    ]


def intervals_vs_levels(view: ChainView) -> Fraction:
    """Confirmation overhead of difficulty-interval bookkeeping: how many
    more atomic intervals the proposer tree has than tree levels,
    relative to the level count.  A genesis-only tree has overhead 0.
    """
    genesis = view.genesis(0)
    genesis_diff = view.chain_difficulty(genesis)
    endpoints = {genesis_diff}
    levels = 0
    for b in view.blocks_on_chain(0):
        if b.parent is None:
            continue
        lo, hi = view.covered_interval(b.id)
        endpoints.add(lo)
        endpoints.add(hi)
        levels = max(levels, view.height(b.id))
    if levels == 0:
        return Fraction(0)
    atomic = len(endpoints) - 1
    return Fraction(atomic - levels, levels)
