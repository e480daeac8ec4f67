"""Block and chain data model shared by all protocols.

Difficulty bookkeeping is exact: targets are rationals, the block
difficulty is 1/target, and the chain difficulty of a block is the sum of
block difficulties from genesis up to and including that block.  Every
block therefore covers a half-open interval of chain difficulty, and fork
choice (heaviest chain) compares exact rationals, never floats.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

# Exact rational difficulty arithmetic.  fractions.Fraction already keeps
# values reduced with a positive denominator and compares exactly.
Rational = Fraction

# Opaque 32-byte block identifier; lexicographic order on the raw bytes is
# the deterministic tie-break order.
BlockId = bytes

GENESIS_TIMESTAMP = 0


class UnknownBlockError(KeyError):
    """Lookup of a block id that is not in the view."""


class ChainError(ValueError):
    """Structurally invalid insertion (duplicate id, bad parent, ...)."""


class IdFactory:
    """Deterministic 32-byte block-id source, unique within one run."""

    def __init__(self, seed: int = 0):
        self._seed = seed
        self._counter = 0

    def new_id(self) -> BlockId:
        h = hashlib.sha256()
        h.update(self._seed.to_bytes(16, "big", signed=True))
        h.update(self._counter.to_bytes(16, "big"))
        self._counter += 1
        return h.digest()


@dataclass(frozen=True)
class Miner:
    party: int
    adversary: bool = False


HONEST_MINER = Miner(0, adversary=False)
ADVERSARY_MINER = Miner(1, adversary=True)


@dataclass(frozen=True)
class Block:
    """A mined unit on one of the parallel chains.

    chain_id 0 is the pivot chain; non-pivot blocks carry a ``pivot_ref``
    to the pivot block their target was derived from, pivot blocks do not.
    ``timestamp`` is the round index claimed by the miner (honest miners
    use the mining round; the adversary may lie).
    """

    id: BlockId
    chain_id: int
    parent: Optional[BlockId]  # None only for genesis blocks
    timestamp: int
    target: Rational
    pivot_ref: Optional[BlockId] = None
    miner: Miner = HONEST_MINER
    payload: object = None

    def __post_init__(self):
        if self.target <= 0:
            raise ChainError(f"target must be positive, got {self.target}")

    @property
    def difficulty(self) -> Rational:
        return 1 / self.target


def make_genesis(chain_id: int, initial_target: Rational, tag: bytes = b"") -> Block:
    gid = hashlib.sha256(b"genesis:%d:" % chain_id + tag).digest()
    return Block(
        id=gid,
        chain_id=chain_id,
        parent=None,
        timestamp=GENESIS_TIMESTAMP,
        target=Fraction(initial_target),
    )


class ChainView:
    """A party's view of all chains, with cached exact difficulties.

    The view is a per-chain tree of blocks.  For every block we cache its
    height, its chain difficulty (sum of 1/target from genesis through the
    block, genesis included) and the covered interval.  The heaviest tip of
    each chain is maintained incrementally; ties are broken by earliest
    arrival, then by smaller block id, so identical arrival sequences give
    identical views.

    Single-writer: a ChainView belongs to one simulation instance.
    """

    def __init__(self, genesis_blocks: Iterable[Block]):
        self._blocks: dict[BlockId, Block] = {}
        self._height: dict[BlockId, int] = {}
        self._diff: dict[BlockId, Rational] = {}
        self._arrival: dict[BlockId, int] = {}
        self._tips: dict[int, BlockId] = {}
        self._genesis: dict[int, BlockId] = {}
        self._seq = 0
        for g in genesis_blocks:
            if g.parent is not None:
                raise ChainError("genesis block must have no parent")
            if g.chain_id in self._genesis:
                raise ChainError(f"duplicate genesis for chain {g.chain_id}")
            self._blocks[g.id] = g
            self._height[g.id] = 0
            self._diff[g.id] = g.difficulty
            self._arrival[g.id] = self._seq
            self._seq += 1
            self._genesis[g.chain_id] = g.id
            self._tips[g.chain_id] = g.id

    @classmethod
    def create(cls, num_chains: int, initial_target: Rational) -> "ChainView":
        """Fresh view with one genesis per chain id in [0, num_chains)."""
        return cls(make_genesis(i, initial_target) for i in range(num_chains))

    # -- queries ---------------------------------------------------------

    def __contains__(self, block_id: BlockId) -> bool:
        return block_id in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def block(self, block_id: BlockId) -> Block:
        try:
            return self._blocks[block_id]
        except KeyError:
            raise UnknownBlockError(block_id.hex()) from None

    def height(self, block_id: BlockId) -> int:
        self.block(block_id)
        return self._height[block_id]

    def arrival_index(self, block_id: BlockId) -> int:
        self.block(block_id)
        return self._arrival[block_id]

    def genesis(self, chain_id: int) -> BlockId:
        return self._genesis[chain_id]

    def chain_ids(self) -> list[int]:
        return sorted(self._genesis)

    def blocks_on_chain(self, chain_id: int) -> list[Block]:
        """All known blocks of one chain, in arrival order."""
        return [b for b in self._blocks.values() if b.chain_id == chain_id]

    def chain_difficulty(self, tip: BlockId) -> Rational:
        """Sum of 1/target over genesis..tip inclusive (cached)."""
        self.block(tip)
        return self._diff[tip]

    def covered_interval(self, block_id: BlockId) -> tuple[Rational, Rational]:
        """Half-open difficulty interval (diff(parent chain), diff(chain to b)]."""
        b = self.block(block_id)
        hi = self._diff[block_id]
        lo = self._diff[b.parent] if b.parent is not None else Fraction(0)
        return lo, hi

    def heaviest_tip(self, chain_id: int) -> BlockId:
        """Tip of maximal chain difficulty on the chain (deterministic)."""
        return self._tips[chain_id]

    def chain(self, tip: BlockId) -> list[Block]:
        """Blocks from genesis to tip inclusive."""
        out = []
        b = self.block(tip)
        while True:
            out.append(b)
            if b.parent is None:
                break
            b = self.block(b.parent)
        out.reverse()
        return out

    def heaviest_chain(self, chain_id: int) -> list[Block]:
        return self.chain(self.heaviest_tip(chain_id))

    def ancestor_ids(self, block_id: BlockId) -> set[BlockId]:
        """Ids of block_id and all its ancestors."""
        out = set()
        b = self.block(block_id)
        while True:
            out.add(b.id)
            if b.parent is None:
                return out
            b = self.block(b.parent)

    def is_ancestor(self, maybe_ancestor: BlockId, descendant: BlockId) -> bool:
        """True iff maybe_ancestor lies on the path genesis..descendant."""
        target_h = self.height(maybe_ancestor)
        b = self.block(descendant)
        while self._height[b.id] > target_h:
            b = self.block(b.parent)
        return b.id == maybe_ancestor

    def common_ancestor(self, a: BlockId, b: BlockId) -> BlockId:
        x, y = self.block(a), self.block(b)
        if x.chain_id != y.chain_id:
            raise ChainError("blocks on different chains share no ancestor")
        while self._height[x.id] > self._height[y.id]:
            x = self.block(x.parent)
        while self._height[y.id] > self._height[x.id]:
            y = self.block(y.parent)
        while x.id != y.id:
            x = self.block(x.parent)
            y = self.block(y.parent)
        return x.id

    # -- mutation --------------------------------------------------------

    def add_block(self, block: Block) -> None:
        """Insert a block whose parent is already known.

        Updates the difficulty caches and, if the block is strictly heavier
        than the current heaviest tip of its chain, adopts it.  Adding a
        block never decreases the heaviest-tip difficulty.
        """
        if block.id in self._blocks:
            raise ChainError(f"duplicate block id {block.id.hex()}")
        if block.parent is None:
            raise ChainError("only genesis blocks may omit a parent")
        parent = self.block(block.parent)
        if parent.chain_id != block.chain_id:
            raise ChainError("parent is on a different chain")
        self._blocks[block.id] = block
        self._height[block.id] = self._height[parent.id] + 1
        self._diff[block.id] = self._diff[parent.id] + block.difficulty
        self._arrival[block.id] = self._seq
        self._seq += 1
        tip = self._tips[block.chain_id]
        if self._heavier(block.id, tip):
            self._tips[block.chain_id] = block.id

    def _heavier(self, a: BlockId, b: BlockId) -> bool:
        da, db = self._diff[a], self._diff[b]
        if da != db:
            return da > db
        if self._arrival[a] != self._arrival[b]:
            return self._arrival[a] < self._arrival[b]
        return a < b


# -- chain functions -----------------------------------------------------
# A "chain" here is a genesis-rooted block sequence, as returned by
# ChainView.chain().


def common_prefix(chain1: Sequence[Block], chain2: Sequence[Block]) -> list[Block]:
    """Maximal shared prefix of two chains rooted at the same genesis."""
    if not chain1 or not chain2 or chain1[0].id != chain2[0].id:
        raise ChainError("chains do not share a genesis")
    out = []
    for a, b in zip(chain1, chain2):
        if a.id != b.id:
            break
        out.append(a)
    return out


def prune_recent(chain: Sequence[Block], ell: int, now: int) -> list[Block]:
    """Drop the chain suffix holding blocks with timestamps in the last
    ``ell`` rounds, i.e. timestamps > now - ell.

    The cut is made at the first (deepest) offending block so the result is
    a prefix.  The genesis block is always retained.
    """
    cutoff = now - ell
    out = []
    for i, b in enumerate(chain):
        if i > 0 and b.timestamp > cutoff:
            break
        out.append(b)
    return out
