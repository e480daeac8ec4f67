"""The difficulty-indexed voting ledger.

Voter chains vote for proposer blocks by difficulty interval; overlapping
votes along one chain are sanitized into disjoint intervals, a leader is
elected per atomic interval by plurality, and proposer blocks are ordered
by the infimum difficulty at which they lead.
"""

from fractions import Fraction

from pcpow import Block, IdFactory, ProtocolParams
from pcpow.prism import (
    PrismState,
    Vote,
    VoterPayload,
    leader_assignment,
    leader_sequence,
    sanitize_votes,
)

print("sanitize (0,2],(1,3],(2,5] ->",
      [(str(lo), str(hi)) for _, lo, hi in sanitize_votes([
          (b"a", Fraction(0), Fraction(2)),
          (b"b", Fraction(1), Fraction(3)),
          (b"c", Fraction(2), Fraction(5)),
      ])])

state = PrismState(ProtocolParams(num_chains=1, epoch_length=10**6))
ids = IdFactory(3)
view = state.view


def proposer(parent, difficulty, ts):
    b = Block(id=ids.new_id(), chain_id=0,
              parent=parent.id if parent else view.genesis(0),
              timestamp=ts, target=Fraction(1, difficulty))
    view.add_block(b)
    return b


def vote(blocks, ts):
    payload = VoterPayload(tuple(
        Vote(1, b.id, view.covered_interval(b.id)) for b in blocks
    ))
    blk = Block(id=ids.new_id(), chain_id=1, parent=view.heaviest_tip(1),
                timestamp=ts, target=Fraction(1), pivot_ref=blocks[-1].id,
                payload=payload)
    state.register_voter_block(blk)


# The heaviest proposer chain reaches difficulty 5, with a fork block the
# voter chain backed first and later abandoned.
a = proposer(None, 1, ts=1)   # covers (1,2]
x = proposer(a, 1, ts=2)      # fork:  (2,3]
b = proposer(a, 2, ts=2)      # main:  (2,4]
c = proposer(b, 1, ts=3)      # main:  (4,5]
vote([a, x], ts=3)
vote([b, c], ts=4)

names = {a.id: "a", x.id: "x", b.id: "b", c.id: "c"}
asg = leader_assignment(state)
for (lo, hi), leader in zip(asg.atomic_intervals, asg.leaders):
    who = names.get(leader, "-") if leader else "-"
    print(f"atomic ({lo}, {hi}] -> leader {who}")
print("grades:", {names[k]: str(v) for k, v in asg.grades.items()})
print("leader sequence:", [names[i] for i in leader_sequence(state)])
print("note: the abandoned fork block x still leads (2,3], where the")
print("voter chain's first vote covering that range pointed at it")
