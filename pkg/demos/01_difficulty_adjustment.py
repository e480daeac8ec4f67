"""Walk through the epoch-based target recalculation.

The pivot chain recalculates its target every `epoch_length` blocks from
the measured epoch duration; the per-epoch change is clamped into
[T/damping, damping*T].  Non-pivot blocks inherit the target a child of
their referenced pivot block would use.
"""

from fractions import Fraction

from pcpow import ProtocolParams, next_target, recalc_target, validate_params

params = ProtocolParams(
    num_chains=10,
    epoch_length=8,
    damping=4,
    blocks_per_round=Fraction(1, 5),  # 0.1 blocks/s at 2 s rounds
)

ideal = params.ideal_epoch_duration
print(f"epoch of {params.epoch_length} blocks should take {ideal} rounds")

# An epoch mined exactly on schedule leaves the target unchanged.
on_schedule = [int(ideal * (i + 1) / params.epoch_length)
               for i in range(params.epoch_length)]
print("on-schedule epoch  ->", next_target(on_schedule, params))

# Twice as fast: the raw target halves (difficulty doubles).
fast = [max(1, t // 2) for t in on_schedule]
print("2x-fast epoch      ->", next_target(fast, params))

# Forty times as fast: the raw value would be T0/40, but the damping
# bound clamps the step to a factor of 4.
compressed = [1] * params.epoch_length
print("40x-fast epoch     ->", next_target(compressed, params),
      "(clamped, raw would be 1/40)")

# The same step function, iterated across epochs, drives the target as a
# bounded multiplicative walk.
t = params.initial_target
for lam in (40, 40, 10, 160, 40):
    t = recalc_target(t, lam, params)
    print(f"after epoch lasting {lam:4d} rounds -> target {t}")

# The analytic parameter conditions, with their numeric margins.  The
# simulation operating point (0.1 blocks/s/chain) is far too aggressive
# for the sufficient conditions, which want a tiny per-round rate and a
# long epoch; both reports are shown.
print("\nsimulation operating point:")
for line in validate_params(params).lines():
    print(line)

conservative = params.with_updates(
    blocks_per_round=Fraction(1, 1000),
    epoch_length=120_000_000,
    concentration_slack=0.05,
    honest_advantage=0.5,
)
print("\nconservative operating point:")
for line in validate_params(conservative).lines():
    print(line)
