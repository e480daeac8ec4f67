"""Fruit mining with recency and difficulty-weighted fairness.

Fruits hang from a recently stabilized chain block and are included by
the next blocks while fresh.  Reward accounting attributes fruit
difficulty to miners inside a window: a party with 30% of the mining
power ends up with ~30% of the fruit difficulty.
"""

from fractions import Fraction

from pcpow import ProtocolParams
from pcpow.fruitchains import fairness_fraction
from pcpow.sim import SimConfig, run

params = ProtocolParams(
    num_chains=0,
    epoch_length=10**9,           # no recalculation inside this short run
    blocks_per_round=Fraction(1, 5),
    fruit_recency_rounds=1200,
    total_rounds=20_000,
)
cfg = SimConfig(
    protocol="fruitchains",
    params=params,
    seed=5,
    duration=20_000,
    fairness_shares=(0.3, 0.7),   # party 0 holds 30% of honest power
    stable_window=30,
)
res = run(cfg)
engine = res.engine
state = engine.state

chain = state.view.heaviest_chain(0)
fruit_count = sum(len(b.payload or ()) for b in chain)
print(f"chain blocks: {len(chain) - 1}, fruits included: {fruit_count}")
print(f"fruits mined: {len(engine.fruits_mined)}, "
      f"permanently lost: {engine.lost_fruit_count()}")

window = (2_000, 18_000)
for party, share in enumerate(cfg.fairness_shares):
    frac = fairness_fraction(chain, state.fruits, window, {party})
    print(f"party {party}: power share {share:.0%}, "
          f"fruit-difficulty share {float(frac):.3f}")
