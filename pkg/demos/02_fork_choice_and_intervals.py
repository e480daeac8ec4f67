"""Exact chain difficulty, covered intervals, and heaviest-chain fork
choice on a hand-built block tree.
"""

from fractions import Fraction

from pcpow import Block, ChainView, IdFactory

ids = IdFactory(7)
view = ChainView.create(1, initial_target=Fraction(1))
genesis = view.genesis(0)

# Trunk: three unit-target blocks.
tip = genesis
for ts in (1, 2, 3):
    b = Block(id=ids.new_id(), chain_id=0, parent=tip, timestamp=ts,
              target=Fraction(1))
    view.add_block(b)
    tip = b.id

print("trunk difficulty:", view.chain_difficulty(tip))
for blk in view.chain(tip):
    lo, hi = view.covered_interval(blk.id)
    print(f"  height {view.height(blk.id)} covers ({lo}, {hi}]")

# A one-block fork with target 1/2 carries difficulty 2: heavier than two
# unit blocks would be only if the trunk were shorter; here it loses.
fork = Block(id=ids.new_id(), chain_id=0,
             parent=view.chain(tip)[1].id, timestamp=2,
             target=Fraction(1, 2))
view.add_block(fork)
print("fork difficulty:", view.chain_difficulty(fork.id),
      "| trunk:", view.chain_difficulty(tip))
print("heaviest tip is still the trunk:", view.heaviest_tip(0) == tip)

# A second heavy block tips the balance: fork weight 2 + 2 + 1 = 5 > 4.
fork2 = Block(id=ids.new_id(), chain_id=0, parent=fork.id, timestamp=3,
              target=Fraction(1, 2))
view.add_block(fork2)
print("after extending the fork, heaviest tip moved:",
      view.heaviest_tip(0) == fork2.id,
      "with difficulty", view.chain_difficulty(fork2.id))
