"""Epoch-based target recalculation and parameter-condition checks.

The pivot chain adjusts its target every ``epoch_length`` blocks from the
measured epoch duration, with the per-epoch change clamped into
[T/damping, damping*T].  Non-pivot blocks inherit the target a child of
their referenced pivot block would use.  All target arithmetic is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .core import BlockId, ChainView, Rational
from .params import ProtocolParams


@dataclass
class EpochState:
    """Where a pivot chain stands between recalculation points."""

    epoch_index: int            # 1-based epoch number of the next block
    epoch_start_timestamp: int  # timestamp of the last recalculation block
    current_target: Rational
    blocks_in_epoch: int        # mined blocks since the last boundary, < epoch_length

    @classmethod
    def from_timestamps(
        cls, timestamps: Sequence[int], params: ProtocolParams
    ) -> "EpochState":
        """State after a pivot chain whose mined-block timestamps are given
        (genesis excluded)."""
        phi = params.epoch_length
        v = len(timestamps)
        completed = v // phi
        start_ts = timestamps[completed * phi - 1] if completed > 0 else 0
        return cls(
            epoch_index=completed + 1,
            epoch_start_timestamp=start_ts,
            current_target=next_target(timestamps, params),
            blocks_in_epoch=v - completed * phi,
        )


def recalc_target(
    current: Rational, duration: int, params: ProtocolParams
) -> Rational:
    """One recalculation step: new epoch target from the previous target and
    the measured epoch duration in rounds.

    The raw value estimates the party count from the duration,
    n(T, duration) = 2^kappa * epoch_length / (T * duration), rescales the
    initial target by initial_parties / n(T, duration), and is then clamped
    into [T/damping, damping*T].  Non-positive durations (possible only with
    adversarial timestamps) are floored to one round, which lands on the
    protective clamp.
    """
    if duration <= 0:
        duration = 1
    t = Fraction(current)
    estimated_parties = (
        Fraction(2**params.hash_bits) * params.epoch_length / (t * duration)
    )
    raw = params.initial_parties * params.initial_target / estimated_parties
    lo = t / params.damping
    hi = t * params.damping
    if raw < lo:
        return lo
    if raw > hi:
        return hi
    return raw


def next_target(timestamps: Sequence[int], params: ProtocolParams) -> Rational:
    """Target for the next pivot block after a chain with the given
    mined-block timestamps (genesis excluded; its timestamp is round 0).

    Mid-epoch this is the current epoch's target; at a boundary (chain
    length a positive multiple of epoch_length) the target is recalculated
    from the last epoch's duration.
    """
    phi = params.epoch_length
    v = len(timestamps)
    target = params.initial_target
    prev_boundary_ts = 0
    for e in range(1, v // phi + 1):
        boundary_ts = timestamps[e * phi - 1]
        target = recalc_target(target, boundary_ts - prev_boundary_ts, params)
        prev_boundary_ts = boundary_ts
    return target


def child_target(
    parent_height: int,
    parent_timestamp: int,
    parent_target: Rational,
    boundary_ancestor_timestamp: Optional[int],
    params: ProtocolParams,
) -> Rational:
    """Target for a child of a pivot block, given the parent's position.

    ``boundary_ancestor_timestamp`` is the timestamp of the ancestor one
    epoch above the parent (needed only when the parent closes an epoch).
    """
    if parent_height == 0 or parent_height % params.epoch_length != 0:
        return parent_target
    assert boundary_ancestor_timestamp is not None
    return recalc_target(
        parent_target, parent_timestamp - boundary_ancestor_timestamp, params
    )


def nonpivot_target(
    pivot_ref: BlockId, view: ChainView, params: ProtocolParams
) -> Rational:
    """Target a hypothetical child of ``pivot_ref`` on the pivot chain would
    use; this is the mining target every block referencing ``pivot_ref``
    must carry."""
    ref = view.block(pivot_ref)
    if ref.chain_id != 0:
        raise ValueError("pivot_ref must be on chain 0")
    h = view.height(pivot_ref)
    if h == 0 or h % params.epoch_length != 0:
        return ref.target
    anc = ref
    for _ in range(params.epoch_length):
        anc = view.block(anc.parent)
    return recalc_target(ref.target, ref.timestamp - anc.timestamp, params)


# -- parameter conditions --------------------------------------------------


@dataclass
class ConditionCheck:
    name: str
    satisfied: bool
    margin: float
    informational: bool = False


@dataclass
class ParamReport:
    min_concentration_rounds: Optional[float]  # the concentration window length
    fruit_min_concentration_rounds: Optional[float]
    conditions: list[ConditionCheck]

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.conditions if not c.informational)

    def lines(self) -> list[str]:
        ell = self.min_concentration_rounds
        out = [
            "min_concentration_rounds = "
            + ("undefined" if ell is None else f"{ell:.6g}")
        ]
        for c in self.conditions:
            status = "ok" if c.satisfied else "FAIL"
            extra = " (informational)" if c.informational else ""
            out.append(f"  {c.name:24s} {status:4s} margin={c.margin:+.6g}{extra}")
        return out


def min_concentration_rounds(
    params: ProtocolParams, hashrate_exponent: int = 3
) -> Optional[float]:
    """Minimum window length, in rounds, for the concentration bounds to be
    meaningful.  Returns None when the per-round mining rate is too high for
    the window to exist.  The fruit-fairness analysis needs one extra power
    of the hashrate ratio bound (hashrate_exponent=4)."""
    eps = params.concentration_slack
    f = float(params.blocks_per_round)
    gamma = params.hashrate_ratio_bound
    delta = params.honest_advantage
    dilution = 1.0 - (1.0 + delta) * gamma**2 * f
    if dilution <= 0.0:
        return None
    return (
        4.0
        * (1.0 + 3.0 * eps)
        / (eps**2 * f * dilution ** (params.max_delay_rounds + 1))
        * max(params.max_delay_rounds, float(params.damping))
        * gamma**hashrate_exponent
        * params.security_level
    )


def validate_params(params: ProtocolParams) -> ParamReport:
    """Check the analytic sufficient conditions on the parameter set and
    report each with its numeric margin.

    Checked: the per-round rate leaves headroom for the window length to be
    defined; the epoch is long enough relative to the window (the stronger
    1/slack scaling is the binding check, the slack-scaled variant is
    reported informationally); the delay dilution bound; and the advantage
    band 8*slack <= advantage <= 1.
    """
    eps = params.concentration_slack
    f = float(params.blocks_per_round)
    gamma = params.hashrate_ratio_bound
    delta = params.honest_advantage
    delay = params.max_delay_rounds
    phi = params.epoch_length

    conditions: list[ConditionCheck] = []
    rate = (1.0 + delta) * gamma**2 * f
    conditions.append(ConditionCheck("rate-headroom", rate < 1.0, 1.0 - rate))

    ell = min_concentration_rounds(params)
    fruit_ell = min_concentration_rounds(params, hashrate_exponent=4)
    if ell is None:
        conditions.append(
            ConditionCheck("epoch-length", False, float("-inf"))
        )
    else:
        base = 4.0 * (1.0 + delta) * gamma**2 * f * (ell + 3.0 * delay)
        conditions.append(
            ConditionCheck("epoch-length", phi >= base / eps, phi - base / eps)
        )
        conditions.append(
            ConditionCheck(
                "epoch-length-scaled",
                phi >= base * eps,
                phi - base * eps,
                informational=True,
            )
        )

    dilution = (1.0 - rate) ** delay if rate < 1.0 else float("-inf")
    conditions.append(
        ConditionCheck("delay-slack", dilution >= 1.0 - eps, dilution - (1.0 - eps))
    )
    conditions.append(
        ConditionCheck(
            "advantage-band",
            8.0 * eps <= delta <= 1.0,
            min(delta - 8.0 * eps, 1.0 - delta),
        )
    )
    return ParamReport(ell, fruit_ell, conditions)


def default_fruit_recency(params: ProtocolParams) -> int:
    """Recency bound R = 3*window + 7*delay from the fairness analysis."""
    if params.fruit_recency_rounds is not None:
        return params.fruit_recency_rounds
    ell = min_concentration_rounds(params, hashrate_exponent=4)
    if ell is None:
        raise ValueError("concentration window undefined; set fruit_recency_rounds")
    return math.ceil(3 * ell + 7 * params.max_delay_rounds)


def good_round_fraction(
    samples: Iterable[tuple[float, float, float]], params: ProtocolParams
) -> float:
    """Fraction of rounds whose honest mining targets sit in the good band.

    Each sample is (parties, min_target, max_target) for one round; a round
    is good when f/(2 gamma^2) <= p*n*T_min and p*n*T_max <= (1+delta)*
    gamma^2*f.  Diagnostic only, evaluated in floats.
    """
    p = float(params.query_success_density)
    f = float(params.blocks_per_round)
    gamma = params.hashrate_ratio_bound
    delta = params.honest_advantage
    lo = f / (2.0 * gamma**2)
    hi = (1.0 + delta) * gamma**2 * f
    total = 0
    good = 0
    for parties, t_min, t_max in samples:
        total += 1
        if lo <= p * parties * t_min and p * parties * t_max <= hi:
            good += 1
    if total == 0:
        return 1.0
    return good / total
