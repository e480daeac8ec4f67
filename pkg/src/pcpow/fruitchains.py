"""Fruit-bearing single-chain protocol with difficulty-weighted fairness.

Blocks form one heaviest chain; fruits are mined concurrently (same
target, or a fixed ratio of it) and are included by blocks subject to a
recency condition on the fruit's stabilized anchor block.  Reward
accounting reduces to attributing fruit difficulty to miners inside a
window of the chain.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .core import Block, BlockId, ChainView, Miner, Rational
from .params import ProtocolParams


class ZeroFruitWindowError(ValueError):
    """Fairness fraction requested over a window containing no fruit."""


@dataclass(frozen=True)
class Fruit:
    """A concurrently mined unit hanging from a stabilized chain block."""

    id: BlockId
    fruit_parent: BlockId   # recently stabilized block it hangs from
    block_parent: BlockId   # heaviest tip at mining time
    target: Rational
    timestamp: int
    miner: Miner

    @property
    def difficulty(self) -> Rational:
        return 1 / self.target


class FruitPool:
    """Fruits known to a miner and not yet included in its heaviest chain."""

    def __init__(self):
        self._fruits: dict[BlockId, Fruit] = {}

    def __len__(self):
        return len(self._fruits)

    def __contains__(self, fruit_id: BlockId):
        return fruit_id in self._fruits

    def add(self, fruit: Fruit) -> None:
        self._fruits[fruit.id] = fruit

    def remove_all(self, fruit_ids: Iterable[BlockId]) -> None:
        for fid in fruit_ids:
            self._fruits.pop(fid, None)

    def fruits(self) -> list[Fruit]:
        return list(self._fruits.values())


def is_recent(
    fruit: Fruit, view: ChainView, tip: BlockId, now: int, recency: int
) -> bool:
    """True iff the fruit's anchor is on the chain ending at ``tip`` and
    carries a timestamp at least ``now - recency``.  Unknown anchors are
    simply not recent."""
    if fruit.fruit_parent not in view:
        return False
    if not view.is_ancestor(fruit.fruit_parent, tip):
        return False
    return view.block(fruit.fruit_parent).timestamp >= now - recency


class FruitchainState:
    """One party's chain view plus fruit bookkeeping.

    ``stable_window`` is the pruning depth (in rounds) an honest miner
    applies before picking a fruit anchor, and ``recency`` is the maximum
    anchor age accepted at inclusion time.
    """

    def __init__(self, params: ProtocolParams, stable_window: int, recency: int):
        self.params = params
        self.stable_window = stable_window
        self.recency = recency
        self.view = ChainView.create(1, params.initial_target)
        self.pool = FruitPool()
        self.fruits: dict[BlockId, Fruit] = {}
        self._included: set[BlockId] = set()   # fruit ids on the heaviest chain
        self._included_tip: BlockId = self.view.heaviest_tip(0)
        # Incremental copy of the heaviest chain (honest timestamps are
        # non-decreasing along it, so anchors bisect on timestamps).
        self._main: list[Block] = [self.view.block(self._included_tip)]
        self._main_ids: set[BlockId] = {self._included_tip}
        self._main_ts: list[int] = [0]

    # -- fruit intake ------------------------------------------------------

    def add_fruit(self, fruit: Fruit) -> None:
        if fruit.id in self.fruits:
            return
        self.fruits[fruit.id] = fruit
        if fruit.id not in self._included:
            self.pool.add(fruit)

    # -- mining ------------------------------------------------------------

    def fruit_anchor(self, now: int) -> BlockId:
        """Honest anchor choice: tip of the heaviest chain pruned by the
        stability window."""
        cutoff = now - self.stable_window
        i = bisect.bisect_right(self._main_ts, cutoff, lo=1) - 1
        return self._main[max(i, 0)].id

    def assemble_block(
        self, now: int, id_: BlockId, miner: Miner = Miner(0), target=None
    ) -> Block:
        """Honest block template: extends the heaviest tip and includes
        every known recent fruit that the chain does not already carry."""
        tip = self.view.heaviest_tip(0)
        picked = tuple(
            sorted(
                f.id
                for f in self.pool.fruits()
                if self._recent_on(f, tip, now)
            )
        )
        return Block(
            id=id_, chain_id=0, parent=tip, timestamp=now,
            target=target if target is not None else self.view.block(tip).target,
            miner=miner, payload=picked,
        )

    # -- validation / intake -------------------------------------------------

    def validate_block(self, block: Block) -> Optional[str]:
        if block.parent not in self.view:
            return "unknown-reference"
        carried = block.payload or ()
        if carried:
            seen_on_chain = self._chain_fruit_ids(block.parent)
            for fid in carried:
                f = self.fruits.get(fid)
                if f is None:
                    return "unknown-fruit"
                if fid in seen_on_chain:
                    return "duplicate-fruit"
                if not self._recent_on(f, block.parent, block.timestamp):
                    return "stale-fruit"
        return None

    def add_block(self, block: Block) -> Optional[str]:
        reason = self.validate_block(block)
        if reason is not None:
            return reason
        self.view.add_block(block)
        if self.view.heaviest_tip(0) != self._included_tip:
            self._refresh_included()
        return None

    def _recent_on(self, fruit: Fruit, tip: BlockId, now: int) -> bool:
        if tip == self._included_tip:
            if fruit.fruit_parent not in self._main_ids:
                return False
            return (
                self.view.block(fruit.fruit_parent).timestamp
                >= now - self.recency
            )
        return is_recent(fruit, self.view, tip, now, self.recency)

    def _chain_fruit_ids(self, tip: BlockId) -> set[BlockId]:
        if tip == self._included_tip:
            return self._included
        out: set[BlockId] = set()
        for b in self.view.chain(tip):
            out.update(b.payload or ())
        return out

    def _refresh_included(self) -> None:
        tip = self.view.heaviest_tip(0)
        prev = self._included_tip
        new_tip_block = self.view.block(tip)
        if new_tip_block.parent == prev:
            self._included |= set(new_tip_block.payload or ())
            self._main.append(new_tip_block)
            self._main_ids.add(tip)
            self._main_ts.append(new_tip_block.timestamp)
        else:
            self._main = self.view.chain(tip)
            self._main_ids = {b.id for b in self._main}
            self._main_ts = [b.timestamp for b in self._main]
            self._included = self._chain_fruit_ids(tip)
        self._included_tip = tip
        self.pool.remove_all(self._included)


def fairness_fraction(
    chain: Sequence[Block],
    fruits: dict[BlockId, Fruit],
    window: tuple[int, int],
    subset: set[int],
) -> Fraction:
    """Fraction of fruit difficulty, inside the chain segment whose block
    timestamps fall in [window[0], window[1]], mined by the given parties.

    Raises ZeroFruitWindowError when the segment carries no fruit at all.
    """
    lo, hi = window
    total = Fraction(0)
    mine = Fraction(0)
    for b in chain:
        if not lo <= b.timestamp <= hi:
            continue
        for fid in b.payload or ():
            f = fruits[fid]
            total += f.difficulty
            if f.miner.party in subset:
                mine += f.difficulty
    if total == 0:
        raise ZeroFruitWindowError("no fruit difficulty in the window")
    return mine / total
