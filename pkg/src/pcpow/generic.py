"""Lean round-based engine for the protocol-agnostic parallel-chain
skeleton: one pivot chain plus m non-pivot chains carrying only the
target-derivation and monotone-reference metadata.

Designed for long runs (10^5..10^6 rounds, 100+ chains): block columns are
compact arrays inside the event log, the hot path is integer-only, and
exact rational difficulty comparisons happen only at fork resolutions, by
summing 1/target over the two branch segments past the common ancestor.

Honest mining power is split across a few sub-views: a miner sees its own
blocks immediately and everyone else's one network delay later, so
propagation races can extend competing branches, as with many independent
miners.  The adversary is rushing: it observes each round's honest blocks
before acting and delivers its own with any delay from zero to the bound.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .difficulty import recalc_target
from .eventlog import (
    KLASS_ADVERSARY,
    KLASS_GENESIS,
    KLASS_HONEST,
    NO_REF,
    STATUS_REJECTED,
    EventLog,
)
from .params import ProtocolParams

CHUNK_ROUNDS = 256

STRATEGY_NONE = "none"
STRATEGY_EPOCH_DELAYER = "epoch-delayer"
STRATEGY_GENESIS_REFERRER = "genesis-referrer"
STRATEGY_PRIVATE_MINER = "private-miner"
STRATEGY_DIFFICULTY_RAISER = "difficulty-raiser"

GENERIC_STRATEGIES = (
    STRATEGY_NONE,
    STRATEGY_EPOCH_DELAYER,
    STRATEGY_GENESIS_REFERRER,
    STRATEGY_PRIVATE_MINER,
    STRATEGY_DIFFICULTY_RAISER,
)


class PoissonChunks:
    """Counter-based per-class block arrivals, drawn in round chunks.

    Streams are keyed by (seed, stream tag, chunk start round), so draws
    never depend on how much randomness other consumers used.  A chunk is
    redrawn from the current round whenever the caller bumps the rate
    version (difficulty adoption), keeping runs deterministic in
    (seed, config).
    """

    def __init__(self, seed: int, tag: int, mult: np.ndarray, base_mean: float):
        self._seed = seed & (2**64 - 1)
        self._tag = tag
        self._mult = mult
        self._base = base_mean
        self._start = -1
        self._end = -1
        self._version = -1
        self._cols = self._vals = None
        self._row_ptr = None

    def _redraw(self, u: int, ratios: np.ndarray, version: int) -> None:
        size = min(CHUNK_ROUNDS, len(self._mult) - u)
        lam = self._base * self._mult[u:u + size, None] * ratios[None, :]
        gen = np.random.Generator(
            np.random.Philox(key=[self._seed, self._tag],
                             counter=[0, 0, 0, u])
        )
        counts = gen.poisson(lam)
        rows, cols = np.nonzero(counts)
        self._cols = cols
        self._vals = counts[rows, cols]
        self._row_ptr = np.searchsorted(rows, np.arange(size + 1))
        self._start, self._end = u, u + size
        self._version = version

    def counts(self, u: int, ratios: np.ndarray, version: int):
        """(chain, blocks) pairs mined by this stream in round u; chain
        ids ascend within a round."""
        if u >= self._end or u < self._start or version != self._version:
            self._redraw(u, ratios, version)
        r = u - self._start
        lo, hi = self._row_ptr[r], self._row_ptr[r + 1]
        if lo == hi:
            return ()
        cols, vals = self._cols, self._vals
        return [(int(cols[i]), int(vals[i])) for i in range(lo, hi)]


class GenericEngine:
    """One deterministic run of the generic parallel-chain skeleton."""

    def __init__(
        self,
        params: ProtocolParams,
        duration: int,
        seed: int,
        round_interval: Fraction,
        multipliers: np.ndarray,
        adversary_fraction: float = 0.0,
        strategy: str = STRATEGY_NONE,
        enforce_m2: bool = True,
        fixed_difficulty: bool = False,
        honest_views: int = 2,
        meta: Optional[dict] = None,
    ):
        if strategy not in GENERIC_STRATEGIES:
            raise ValueError(f"unsupported generic strategy {strategy!r}")
        if len(multipliers) < duration + 1:
            raise ValueError("multiplier stream shorter than duration")
        self.p = params
        self.duration = duration
        self.seed = seed
        self.n_chains = params.num_chains + 1
        self.n_views = max(1, honest_views)
        self.enforce_m2 = enforce_m2
        self.fixed_difficulty = fixed_difficulty
        self.strategy = strategy
        self.beta = adversary_fraction
        self.delay = params.max_delay_rounds

        self.log = EventLog(meta=dict(meta or {}))
        self.log.meta.update(
            duration=duration,
            seed=seed,
            round_interval=float(round_interval),
            protocol="generic-parallel",
            num_chains=params.num_chains,
            epoch_length=params.epoch_length,
            adversary_fraction=adversary_fraction,
            adversary_strategy=strategy,
            enforce_m2=enforce_m2,
            fixed_difficulty=fixed_difficulty,
            honest_views=self.n_views,
            initial_parties=float(params.initial_parties),
        )
        self.height = self.log.height
        self._honest_ok = bytearray()
        self._t0 = params.initial_target
        self._t0_id = self.log.intern_target(params.initial_target)
        self._inv: list[Fraction] = [1 / params.initial_target]
        self._genesis: list[int] = []
        for c in range(self.n_chains):
            idx = self.log.append(c, NO_REF, self._t0_id, 0, KLASS_GENESIS)
            self.log.mark_delivered(idx, 0)
            self._honest_ok.append(1)
            self._genesis.append(idx)

        self.view_tips = [list(self._genesis) for _ in range(self.n_views)]
        self.adv_tips = list(self._genesis)
        # Receipt queues keyed by receipt round: (idx, origin view).  The
        # rushing adversary's deliveries are processed before honest
        # receipts of the same round, winning equal-difficulty ties.
        self._sched: dict[int, list[tuple[int, int]]] = {}
        self._sched_rush: dict[int, list[tuple[int, int]]] = {}
        self._child_tid: dict[int, int] = {}
        self._honest_changes: list[tuple[int, int, int]] = [
            (0, self._t0_id, self._t0_id)
        ]
        self._mult = multipliers
        f = float(params.blocks_per_round)
        self._honest_chunks = [
            PoissonChunks(seed, 16 + v, multipliers,
                          f * (1.0 - adversary_fraction) / self.n_views)
            for v in range(self.n_views)
        ]
        self._adv_chunks = (
            PoissonChunks(seed, 1, multipliers, f * adversary_fraction)
            if adversary_fraction > 0 else None
        )
        self._view_tid = [self._t0_id] * self.n_views
        self._view_ratios = [np.ones(self.n_chains) for _ in range(self.n_views)]
        self._view_version = [0] * self.n_views
        self._adv_ratios = np.ones(self.n_chains)
        self._adv_version = 0
        # private-fork state (private-miner / difficulty-raiser)
        self._private_anchor: Optional[int] = None
        self._private_tip: int = -1
        self._private_withheld: list[int] = []
        self._fake_ts = 0
        self._releases = 0

    # -- exact fork choice -----------------------------------------------

    def _segment_weights(self, a: int, b: int) -> tuple[dict, dict]:
        """Per-target block counts on the two branch segments above the
        common ancestor of a and b."""
        parent, height, tid = self.log.parent, self.height, self.log.target_id
        wa: dict[int, int] = {}
        wb: dict[int, int] = {}
        while height[a] > height[b]:
            wa[tid[a]] = wa.get(tid[a], 0) + 1
            a = parent[a]
        while height[b] > height[a]:
            wb[tid[b]] = wb.get(tid[b], 0) + 1
            b = parent[b]
        while a != b:
            wa[tid[a]] = wa.get(tid[a], 0) + 1
            wb[tid[b]] = wb.get(tid[b], 0) + 1
            a = parent[a]
            b = parent[b]
        return wa, wb

    def _heavier_than(self, a: int, b: int) -> bool:
        """diff(chain to a) > diff(chain to b), exactly."""
        wa, wb = self._segment_weights(a, b)
        if wa == wb:
            return False
        if len(wa) == 1 and len(wb) == 1:
            (ta, ca), = wa.items()
            (tb, cb), = wb.items()
            if ta == tb:
                return ca > cb
        da = Fraction(0)
        for t, c in wa.items():
            da += self._inv[t] * c
        db = Fraction(0)
        for t, c in wb.items():
            db += self._inv[t] * c
        return da > db

    def _consider(self, tips: list[int], idx: int) -> bool:
        c = self.log.chain[idx]
        cur = tips[c]
        if idx == cur:
            return False
        if self.log.parent[idx] == cur:
            tips[c] = idx
            return True
        if self._heavier_than(idx, cur):
            tips[c] = idx
            return True
        return False

    def _is_pivot_ancestor(self, anc: int, idx: int) -> bool:
        parent, height = self.log.parent, self.height
        h = height[anc]
        while height[idx] > h:
            idx = parent[idx]
        return idx == anc

    def _m2_ok(self, new_ref: int, old_ref: int) -> bool:
        """Chain difficulty of the new pivot reference is not below the
        parent's reference."""
        if new_ref == old_ref:
            return True
        hn, ho = self.height[new_ref], self.height[old_ref]
        if hn > ho and self._is_pivot_ancestor(old_ref, new_ref):
            return True
        if hn < ho and self._is_pivot_ancestor(new_ref, old_ref):
            return False
        return not self._heavier_than(old_ref, new_ref)

    # -- target derivation --------------------------------------------------

    def _child_target_id(self, pivot_idx: int) -> int:
        """Target id a child of the given pivot block must use."""
        if self.fixed_difficulty:
            return self._t0_id
        h = self.height[pivot_idx]
        phi = self.p.epoch_length
        if h == 0 or h % phi != 0:
            return self.log.target_id[pivot_idx]
        cached = self._child_tid.get(pivot_idx)
        if cached is not None:
            return cached
        anc = pivot_idx
        parent = self.log.parent
        for _ in range(phi):
            anc = parent[anc]
        lam = self.log.mined_round[pivot_idx] - self.log.mined_round[anc]
        new = recalc_target(self.log.target_of(pivot_idx), lam, self.p)
        tid = self.log.intern_target(new)
        while len(self._inv) < len(self.log.targets):
            self._inv.append(1 / self.log.targets[len(self._inv)])
        self._child_tid[pivot_idx] = tid
        return tid

    def _ratio(self, tid: int) -> float:
        return float(self.log.targets[tid] / self._t0)

    # -- block production ------------------------------------------------

    def _append_block(self, chain, parent, tid, round_, klass, ref,
                      timestamp=None) -> int:
        idx = self.log.append(chain, parent, tid, round_, klass, ref)
        self._honest_ok.append(0)
        if timestamp is not None:
            # Fake timestamps replace the round stamp in the block record.
            self.log.mined_round[idx] = timestamp
        return idx

    def _schedule(self, idx: int, round_: int, origin: int = -1,
                  rush: bool = False) -> None:
        q = self._sched_rush if rush else self._sched
        q.setdefault(round_, []).append((idx, origin))

    def _validate(self, idx: int) -> bool:
        """Honest intake: target derivation along the referenced pivot
        block (all chains) and reference monotonicity (non-pivot)."""
        chain = self.log.chain[idx]
        if chain == 0:
            return self.log.target_id[idx] == self._child_target_id(
                self.log.parent[idx]
            )
        ref = self.log.pivot_ref[idx]
        if self.log.target_id[idx] != self._child_target_id(ref):
            return False
        if self.enforce_m2:
            parent_ref = self.log.pivot_ref[self.log.parent[idx]]
            if parent_ref == NO_REF:
                parent_ref = self._genesis[0]
            if not self._m2_ok(ref, parent_ref):
                return False
        return True

    def _receive(self, idx: int, origin: int, received: int) -> None:
        """Process one receipt into the honest sub-views, buffering when
        the block's timestamp is in the future or its parent or reference
        has not been accepted yet."""
        log = self.log
        if log.mined_round[idx] > received:
            self._schedule(idx, log.mined_round[idx], origin)
            return
        if not self._honest_ok[idx]:
            parent = log.parent[idx]
            ref = log.pivot_ref[idx]
            for dep in (parent, ref):
                if dep == NO_REF or self._honest_ok[dep]:
                    continue
                if log.status[dep] == STATUS_REJECTED:
                    log.mark_rejected(idx, received)
                    return
                self._schedule(idx, received + 1, origin)
                return
            if log.klass[idx] == KLASS_ADVERSARY and not self._validate(idx):
                log.mark_rejected(idx, received)
                return
            log.mark_delivered(idx, received)
            self._honest_ok[idx] = 1
        for v in range(self.n_views):
            if v != origin:
                self._consider(self.view_tips[v], idx)

    # -- main loop ------------------------------------------------------------

    def run(self) -> EventLog:
        duration = self.duration
        delay = self.delay
        view_tips = self.view_tips
        n_views = self.n_views
        sched, rushq = self._sched, self._sched_rush
        changes = self._honest_changes

        for u in range(1, duration + 1):
            # Blocks received in round u-1 enter this round's mining view.
            received = u - 1
            arrivals = rushq.pop(received, None)
            if arrivals:
                for idx, origin in arrivals:
                    self._receive(idx, origin, received)
            arrivals = sched.pop(received, None)
            if arrivals:
                for idx, origin in arrivals:
                    self._receive(idx, origin, received)

            # Per-view honest templates.
            changed = False
            for v in range(n_views):
                tid = self._child_target_id(view_tips[v][0])
                if tid != self._view_tid[v]:
                    self._view_tid[v] = tid
                    self._view_ratios[v] = np.full(self.n_chains,
                                                   self._ratio(tid))
                    self._view_version[v] += 1
                    changed = True
            if changed:
                targets = self.log.targets
                lo = min(self._view_tid, key=lambda t: targets[t])
                hi = max(self._view_tid, key=lambda t: targets[t])
                if (changes[-1][1], changes[-1][2]) != (lo, hi):
                    changes.append((u, lo, hi))

            # With several sub-views, same-round draws inside one view are
            # simultaneous independent miners (siblings); a lone view is a
            # literal single miner, which chains its own blocks even
            # within a round, so it never forks against itself.
            sequential = n_views == 1
            for v in range(n_views):
                counts = self._honest_chunks[v].counts(
                    u, self._view_ratios[v], self._view_version[v]
                )
                if not counts:
                    continue
                tips = view_tips[v]
                tid = self._view_tid[v]
                tip0 = tips[0]
                for chain, count in counts:
                    parent = tips[chain]
                    ref = tip0 if chain != 0 else NO_REF
                    for _ in range(count):
                        if sequential:
                            parent = tips[chain]
                        idx = self._append_block(chain, parent, tid, u,
                                                 KLASS_HONEST, ref)
                        self._schedule(idx, u + delay, origin=v)
                        self._consider(tips, idx)
                        self._consider(self.adv_tips, idx)

            if self._adv_chunks is not None:
                self._adversary_round(u)

        self._finalize()
        return self.log

    def _merged_tips(self) -> list[int]:
        tips = list(self.view_tips[0])
        for v in range(1, self.n_views):
            for c in range(self.n_chains):
                cand = self.view_tips[v][c]
                if cand != tips[c] and self._heavier_than(cand, tips[c]):
                    tips[c] = cand
        return tips

    def _finalize(self) -> None:
        # Blocks still in flight at the end keep their scheduled receipt
        # round; withheld private blocks stay recorded as withheld.
        for q in (self._sched_rush, self._sched):
            for round_ in sorted(q):
                for idx, _origin in q[round_]:
                    if self.log.mined_round[idx] <= round_:
                        self.log.mark_delivered(idx, round_)
            q.clear()
        self.log.meta["honest_target_changes"] = [
            list(x) for x in self._honest_changes
        ]
        self.log.meta["final_tips_honest"] = [
            int(t) for t in self._merged_tips()
        ]
        self.log.meta["private_releases"] = self._releases

    # -- adversary strategies ----------------------------------------------

    def _set_adv_ratios(self, ratios: np.ndarray) -> None:
        if not np.array_equal(ratios, self._adv_ratios):
            self._adv_ratios = ratios
            self._adv_version += 1

    def _adv_counts(self, u: int):
        return self._adv_chunks.counts(u, self._adv_ratios, self._adv_version)

    def _adversary_round(self, u: int) -> None:
        strat = self.strategy
        if strat == STRATEGY_NONE:
            self._protocol_following_round(u)
        elif strat == STRATEGY_EPOCH_DELAYER:
            self._epoch_delayer_round(u)
        elif strat == STRATEGY_GENESIS_REFERRER:
            self._genesis_referrer_round(u)
        elif strat == STRATEGY_PRIVATE_MINER:
            self._private_miner_round(u)
        elif strat == STRATEGY_DIFFICULTY_RAISER:
            self._difficulty_raiser_round(u)

    def _mine_adv(self, chain: int, parent: int, tid: int, u: int, ref: int,
                  deliver_delay: int = 0, withhold: bool = False,
                  timestamp: Optional[int] = None) -> int:
        idx = self._append_block(chain, parent, tid, u, KLASS_ADVERSARY, ref,
                                 timestamp=timestamp)
        if withhold:
            self._private_withheld.append(idx)
        else:
            self._schedule(idx, u + deliver_delay, rush=True)
        self._consider(self.adv_tips, idx)
        return idx

    def _protocol_following_round(self, u: int) -> None:
        """Adversary that follows the protocol on its own (rushing) view."""
        tip0 = self.adv_tips[0]
        tid = self._child_target_id(tip0)
        self._set_adv_ratios(np.full(self.n_chains, self._ratio(tid)))
        for chain, count in self._adv_counts(u):
            for _ in range(count):
                parent = self.adv_tips[chain]
                ref = self.adv_tips[0] if chain != 0 else NO_REF
                ctid = self._child_target_id(ref if chain != 0 else parent)
                self._mine_adv(chain, parent, ctid, u, ref)

    def _epoch_delayer_round(self, u: int) -> None:
        """Reference the newest previous-epoch pivot block that still
        passes the monotonicity check; adopt the new epoch only when
        forced."""
        phi = self.p.epoch_length
        tip0 = self.adv_tips[0]
        h0 = self.height[tip0]
        boundary = (h0 // phi) * phi
        stale_ref = None
        if boundary >= phi:
            idx = tip0
            while self.height[idx] > boundary - 1:
                idx = self.log.parent[idx]
            stale_ref = idx
        pivot_tid = self._child_target_id(tip0)
        stale_tid = (
            self._child_target_id(stale_ref)
            if stale_ref is not None else pivot_tid
        )
        ratios = np.full(self.n_chains, self._ratio(stale_tid))
        ratios[0] = self._ratio(pivot_tid)
        self._set_adv_ratios(ratios)
        for chain, count in self._adv_counts(u):
            for _ in range(count):
                parent = self.adv_tips[chain]
                if chain == 0:
                    ref, tid = NO_REF, self._child_target_id(parent)
                else:
                    parent_ref = self.log.pivot_ref[parent]
                    if parent_ref == NO_REF:
                        parent_ref = self._genesis[0]
                    if stale_ref is not None and self._m2_ok(stale_ref,
                                                             parent_ref):
                        ref, tid = stale_ref, stale_tid
                    else:
                        ref = self.adv_tips[0]
                        tid = self._child_target_id(ref)
                self._mine_adv(chain, parent, tid, u, ref)

    def _genesis_referrer_round(self, u: int) -> None:
        """Derive every non-pivot target from the pivot genesis; such
        blocks are valid only when the monotonicity check is disabled."""
        g0 = self._genesis[0]
        tip0 = self.adv_tips[0]
        pivot_tid = self._child_target_id(tip0)
        ratios = np.ones(self.n_chains)
        ratios[0] = self._ratio(pivot_tid)
        self._set_adv_ratios(ratios)
        for chain, count in self._adv_counts(u):
            for _ in range(count):
                parent = self.adv_tips[chain]
                if chain == 0:
                    ref, tid = NO_REF, self._child_target_id(parent)
                else:
                    ref, tid = g0, self._t0_id
                self._mine_adv(chain, parent, tid, u, ref)

    def _private_miner_round(self, u: int) -> None:
        """Withhold a private fork of one non-pivot chain anchored at the
        public tip; release it the moment it is strictly heavier."""
        chain_target = 1 if self.n_chains > 1 else 0
        public_tip = self._merged_tips()[chain_target]
        if self._private_anchor is None:
            self._private_anchor = public_tip
            self._private_tip = self._private_anchor
        ref0 = self._merged_tips()[0]
        tid = self._child_target_id(ref0)
        ratios = np.zeros(self.n_chains)
        ratios[chain_target] = self._ratio(tid)
        self._set_adv_ratios(ratios)
        for chain, count in self._adv_counts(u):
            for _ in range(count):
                ref = ref0 if chain_target != 0 else NO_REF
                idx = self._mine_adv(chain_target, self._private_tip, tid, u,
                                     ref, withhold=True)
                self._private_tip = idx
        if self._private_withheld and self._heavier_than(
            self._private_tip, public_tip
        ):
            for idx in self._private_withheld:
                self._schedule(idx, u, rush=True)
            self._private_withheld.clear()
            self._releases += 1
            self._private_anchor = None

    def _difficulty_raiser_round(self, u: int) -> None:
        """Grow a private pivot chain whose timestamps sit one round apart,
        raising its difficulty at every recalculation point; release when
        heavier than the public pivot chain."""
        public_tip = self._merged_tips()[0]
        if self._private_anchor is None:
            self._private_anchor = public_tip
            self._private_tip = self._private_anchor
            self._fake_ts = self.log.mined_round[self._private_anchor]
        tid = self._child_target_id(self._private_tip)
        ratios = np.zeros(self.n_chains)
        ratios[0] = self._ratio(tid)
        self._set_adv_ratios(ratios)
        for chain, count in self._adv_counts(u):
            for _ in range(count):
                tid = self._child_target_id(self._private_tip)
                self._fake_ts += 1
                idx = self._mine_adv(0, self._private_tip, tid, u, NO_REF,
                                     withhold=True,
                                     timestamp=min(self._fake_ts, u))
                self._private_tip = idx
        if self._private_withheld and self._heavier_than(
            self._private_tip, public_tip
        ):
            for idx in self._private_withheld:
                self._schedule(idx, u, rush=True)
            self._private_withheld.clear()
            self._releases += 1
            self._private_anchor = None
