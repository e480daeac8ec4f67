"""Difficulty-manipulation attacks: closed forms and simulated races.

With self-chosen difficulty, one lucky heavy block reverses arbitrarily
deep confirmations with constant probability; epoch-based adjustment
without a damping bound falls to timestamp compression; the damping
bound turns the catch-up into a linear deficit.  The stale-reference
variant on a voter chain is stopped cold by the monotone-reference rule.
"""

from pcpow.attacks import (
    dampened_catchup_deficit,
    raising_attack_prob,
    simple_attack_limit,
    simple_attack_prob,
)
from pcpow.races import (
    raising_attack_race,
    simple_attack_race,
    stale_ref_attack,
)

n, t = 1e4, 3e3  # honest and adversarial queries per block interval

print("one-heavy-block double spend at t/n = 0.3:")
for k in (10, 20, 40, 1000):
    print(f"  depth {k:4d}: exact {simple_attack_prob(n, t, k):.4f}")
print(f"  limit 1 - exp(-t/n) = {simple_attack_limit(n, t):.4f}")
print(f"  simulated race (k=20): "
      f"{simple_attack_race(n, t, 20, trials=20000, seed=1):.4f}")

print("\ntimestamp-compression (raising) attack, epoch length 500:")
for x in (2_000, 20_000, 2e6):
    exact = raising_attack_prob(n, t, 500, x)
    print(f"  raised difficulty {x:>9.0f}: exact {exact:.4f}")
print(f"  simulated race (x=20000): "
      f"{raising_attack_race(n, t, 500, 20000, trials=20000, seed=2):.4f}")

print("\nwith the damping bound the raiser owes "
      f"{dampened_catchup_deficit(2, 1, 4, 2016):.0f} extra blocks "
      "(half the power, factor-4 bound, epoch 2016)")

print("\nstale-reference attack on a voter chain (t/n = 0.3, 4000 trials):")
for enforce in (False, True):
    out = stale_ref_attack(0.3, k=20, trials=4000, seed=3,
                           enforce_m2=enforce)
    rule = "on " if enforce else "off"
    if out.rejected_by_validator:
        print(f"  monotonicity {rule}: validator rejected the attack block "
              f"({out.violation}); {out.successes} successes")
    else:
        print(f"  monotonicity {rule}: success frequency {out.frequency:.4f}")
