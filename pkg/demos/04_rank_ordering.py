"""Rank-based cross-chain ordering: the fixed-difficulty 14-block
instance, then a variable-difficulty twist.

Each block's rank is its parent's next_rank; next_rank folds in the
heaviest tips the miner saw.  Partially-confirmed blocks below the
minimum per-chain frontier are fully confirmed, ordered by rank with
chain-id tie-break.
"""

from fractions import Fraction

from pcpow import IdFactory, ProtocolParams
from pcpow.ohie import OhieState, generate_scb, k_deep_rule

state = OhieState(ProtocolParams(num_chains=2, epoch_length=10**6,
                                 blocks_per_round=Fraction(1, 5)))
ids = IdFactory(42)
names = {
    state.view.genesis(0): "B00",
    state.view.genesis(1): "B10",
    state.view.genesis(2): "B20",
}
arrival = ["B01", "B02", "B03", "B04", "B11", "B12", "B13", "B14",
           "B21", "B22", "B23"]
for ts, name in enumerate(arrival, start=1):
    block = state.make_block(int(name[1]), timestamp=ts, id_=ids.new_id())
    state.add_block(block)
    names[block.id] = name

for name, bid in sorted((v, k) for k, v in names.items()):
    meta = state.meta[bid]
    print(f"{name}: rank={meta.rank} next_rank={meta.next_rank}")

res = generate_scb(state, k_deep_rule(2))
print("per-chain frontiers:", dict(res.last_partial_next_rank))
print("confirm bar:", res.confirm_bar)
print("confirmed sequence:", [names[b.id] for b in res.blocks])

# With real-valued difficulty the same arithmetic runs on fractions: a
# block of difficulty 5/2 extending rank 3 gets next_rank 11/2 unless a
# heavier tip is known.
from pcpow.ohie import OhieMeta, compute_rank

rank, next_rank = compute_rank(
    OhieMeta(Fraction(2), Fraction(3), b"\0" * 32, b"\0" * 32),
    Fraction(5, 2), b"\1" * 32, Fraction(3),
)
print(f"fractional-difficulty block: rank={rank}, next_rank={next_rank}")
