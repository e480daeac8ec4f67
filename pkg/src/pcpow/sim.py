"""Deterministic round-based mining simulator.

One configuration fully determines a run: per round and per chain, block
arrivals are drawn from counter-based Poisson streams whose means scale
with the round interval, the per-chain rate, the replayed hashrate
multiplier, the class's power share, and the current target; mined blocks
are delivered into the (aggregated) honest view after the network delay
and validated on receipt.

The protocol-agnostic skeleton runs in the lean engine; the voting-,
rank- and fruit-based protocols run in object engines over the full data
model.  Adversarial miner strategies attach to the skeleton; the
stale-reference safety attack has a dedicated trial harness in
``races``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .core import Block, IdFactory, Miner
from .difficulty import nonpivot_target
from .eventlog import (
    KLASS_HONEST,
    NO_REF,
    EventLog,
)
from .fruitchains import Fruit, FruitchainState
from .generic import GENERIC_STRATEGIES, STRATEGY_NONE, GenericEngine, PoissonChunks
from .metrics import MetricsReport
from .ohie import OhieState
from .params import ProtocolParams
from .prism import PrismState, VoterPayload
from .trace import HashrateTrace, replay_trace, trace_covers

PROTOCOLS = ("generic-parallel", "prism", "ohie", "fruitchains")

_STRATEGIES_BY_PROTOCOL = {
    "generic-parallel": GENERIC_STRATEGIES,
    "prism": (STRATEGY_NONE,),
    "ohie": (STRATEGY_NONE,),
    "fruitchains": (STRATEGY_NONE,),
}


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    """Everything one run depends on.  ``seed`` has no default: runs must
    be explicitly reproducible."""

    protocol: str
    params: ProtocolParams
    seed: int
    duration: Optional[int] = None          # rounds; default params.total_rounds
    round_interval: float = 2.0             # seconds per round
    adversary_fraction: float = 0.0
    adversary_strategy: str = STRATEGY_NONE
    enforce_m2: bool = True
    fixed_difficulty: bool = False
    trace: Optional[HashrateTrace] = None
    fairness_shares: tuple[float, ...] = ()  # honest sub-party power split
    stable_window: Optional[int] = None      # fruit anchor pruning, rounds
    fruit_target_ratio: float = 1.0          # fruit target / block target
    honest_views: int = 2                    # 1 = a literal single miner
    metrics_windows: int = 10

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.seed is None:
            raise ConfigError("a seed is required; runs must be reproducible")
        if self.duration is None:
            self.duration = self.params.total_rounds
        if self.duration < 1:
            raise ConfigError("duration must be >= 1 round")
        if not 0 <= self.adversary_fraction < 1:
            raise ConfigError("adversary_fraction must be in [0, 1)")
        allowed = _STRATEGIES_BY_PROTOCOL[self.protocol]
        if self.adversary_strategy not in allowed:
            raise ConfigError(
                f"strategy {self.adversary_strategy!r} is not available for "
                f"protocol {self.protocol!r} (the stale-reference attack has "
                f"a dedicated harness in pcpow.races)"
            )
        if self.adversary_fraction > 0 and self.protocol != "generic-parallel":
            raise ConfigError(
                "adversarial mining is modeled in the generic-parallel "
                "skeleton; protocol engines run honest-only"
            )
        if self.trace is not None and not trace_covers(
            self.trace, self.duration, self.round_interval
        ):
            raise ConfigError("trace is shorter than the simulated duration")
        if self.fairness_shares:
            if self.protocol != "fruitchains":
                raise ConfigError("fairness_shares apply to fruitchains only")
            if abs(sum(self.fairness_shares) - 1.0) > 1e-9:
                raise ConfigError("fairness_shares must sum to 1")

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)

    def multipliers(self) -> np.ndarray:
        """Per-round hashrate multipliers, padded so index u serves round u
        (rounds run 1..duration)."""
        if self.trace is None:
            return np.ones(self.duration + 1)
        m = replay_trace(self.trace, self.duration, self.round_interval)
        return np.concatenate([[m[0]], m])

    def base_meta(self) -> dict:
        meta = {
            "blocks_per_round": float(self.params.blocks_per_round),
            "initial_parties": float(self.params.initial_parties),
        }
        if self.trace is not None:
            meta["trace_samples"] = self.trace.to_samples()
        return meta


@dataclass
class SimResult:
    metrics: MetricsReport
    log: EventLog
    engine: object = None


def run(config: SimConfig,
        observer: Optional[Callable[[int, object], None]] = None) -> SimResult:
    """Execute one run and compute its metrics from the event log.

    ``observer(round, engine)``, when given, is called after every round of
    a protocol engine (snapshot hook for persistence checks); the lean
    skeleton does not support observers.
    """
    if config.protocol == "generic-parallel":
        if observer is not None:
            raise ConfigError("observers require a protocol engine")
        engine = GenericEngine(
            params=config.params,
            duration=config.duration,
            seed=config.seed,
            round_interval=Fraction(str(config.round_interval)),
            multipliers=config.multipliers(),
            adversary_fraction=config.adversary_fraction,
            strategy=config.adversary_strategy,
            enforce_m2=config.enforce_m2,
            fixed_difficulty=config.fixed_difficulty,
            honest_views=config.honest_views,
            meta=config.base_meta(),
        )
        log = engine.run()
    else:
        engine = {
            "prism": PrismEngine,
            "ohie": OhieEngine,
            "fruitchains": FruitEngine,
        }[config.protocol](config)
        log = engine.run(observer=observer)
    metrics = MetricsReport.compute(log, config.params,
                                    num_windows=config.metrics_windows)
    return SimResult(metrics=metrics, log=log, engine=engine)


# -- protocol engines -------------------------------------------------------


class _ObjectEngine:
    """Round driver shared by the protocol engines: counter-based draws,
    delayed delivery into a single aggregated honest view (miners see even
    their own blocks only after the delay, the many-small-miners limit)."""

    protocol = "object"

    def __init__(self, config: SimConfig, streams: int):
        self.config = config
        self.p = config.params
        self.duration = config.duration
        self.delay = self.p.max_delay_rounds
        self.ids = IdFactory(config.seed)
        self.log = EventLog(meta=config.base_meta())
        self.log.meta.update(
            duration=self.duration,
            seed=config.seed,
            round_interval=config.round_interval,
            protocol=self.protocol,
            num_chains=streams - 1,
            epoch_length=self.p.epoch_length,
            adversary_fraction=0.0,
            adversary_strategy=STRATEGY_NONE,
            enforce_m2=config.enforce_m2,
            fixed_difficulty=config.fixed_difficulty,
        )
        self.streams = streams
        mult = config.multipliers()
        self.chunks = PoissonChunks(
            config.seed, 0, mult, float(self.p.blocks_per_round)
        )
        self._ratio_cache: Optional[np.ndarray] = None
        self._ratio_version = 0
        self._sched: dict[int, list] = {}
        self._index_of: dict[bytes, int] = {}
        self._t0 = self.p.initial_target

    def _log_genesis(self, view) -> None:
        from .eventlog import KLASS_GENESIS

        t0_id = self.log.intern_target(self._t0)
        for c in view.chain_ids():
            g = view.genesis(c)
            idx = self.log.append(c, NO_REF, t0_id, 0, KLASS_GENESIS,
                                  block_id=g)
            self.log.mark_delivered(idx, 0)
            self._index_of[g] = idx

    def _log_block(self, block: Block, mined_round: int,
                   party: int = -1) -> int:
        tid = self.log.intern_target(block.target)
        parent = self._index_of.get(block.parent, NO_REF)
        ref = self._index_of.get(block.pivot_ref, NO_REF) \
            if block.pivot_ref else NO_REF
        idx = self.log.append(block.chain_id, parent, tid, mined_round,
                              KLASS_HONEST, ref, block_id=block.id)
        self._index_of[block.id] = idx
        return idx

    def _schedule(self, item, round_: int) -> None:
        self._sched.setdefault(round_, []).append(item)

    def run(self, observer=None) -> EventLog:
        for u in range(1, self.duration + 1):
            # Blocks received in round u-1 join this round's mining view.
            for item in self._sched.pop(u - 1, ()):
                self.deliver(item, u - 1)
            ratios = self.rate_ratios(u)
            if self._ratio_cache is None or not np.array_equal(
                ratios, self._ratio_cache
            ):
                self._ratio_cache = ratios
                self._ratio_version += 1
            for stream, count in self.chunks.counts(u, ratios,
                                                    self._ratio_version):
                for _ in range(count):
                    self.mine(stream, u)
            if observer is not None:
                observer(u, self)
        self.finalize()
        return self.log

    # subclass hooks
    def rate_ratios(self, u: int) -> np.ndarray:
        raise NotImplementedError

    def mine(self, stream: int, u: int) -> None:
        raise NotImplementedError

    def deliver(self, item, u: int) -> None:
        raise NotImplementedError

    def finalize(self) -> None:
        raise NotImplementedError


class PrismEngine(_ObjectEngine):
    """Honest-only voting-protocol run: stream 0 mines proposer blocks,
    streams 1..m mine voter blocks with full vote payloads."""

    protocol = "prism"

    def __init__(self, config: SimConfig):
        super().__init__(config, streams=config.params.num_chains + 1)
        self.state = PrismState(self.p, enforce_m2=config.enforce_m2)
        self._log_genesis(self.state.view)

    def rate_ratios(self, u: int) -> np.ndarray:
        t = nonpivot_target(self.state.proposer_tip(), self.state.view, self.p)
        self._template_target = t
        return np.full(self.streams, float(t / self._t0))

    def mine(self, stream: int, u: int) -> None:
        state = self.state
        tip = state.proposer_tip()
        if stream == 0:
            b = Block(
                id=self.ids.new_id(), chain_id=0,
                parent=state.view.heaviest_tip(0), timestamp=u,
                target=self._template_target,
            )
        else:
            b = Block(
                id=self.ids.new_id(), chain_id=stream,
                parent=state.view.heaviest_tip(stream), timestamp=u,
                target=self._template_target, pivot_ref=tip,
                payload=VoterPayload(state.votes_for(stream, tip)),
            )
        self._log_block(b, u)
        self._schedule(b, u + self.delay)

    def deliver(self, block: Block, u: int) -> None:
        if block.chain_id == 0:
            reason = self.state.add_proposer_block(block)
        else:
            reason = self.state.add_voter_block(block)
        idx = self._index_of[block.id]
        if reason is None:
            self.log.mark_delivered(idx, u)
        else:
            self.log.mark_rejected(idx, u)

    def finalize(self) -> None:
        view = self.state.view
        self.log.meta["final_tips_honest"] = [
            self._index_of[view.heaviest_tip(c)] for c in view.chain_ids()
        ]
        self.log.meta["honest_target_changes"] = [[0, 0]]
        for r in sorted(self._sched):
            for b in self._sched[r]:
                self.log.mark_delivered(self._index_of[b.id], r)


class OhieEngine(_ObjectEngine):
    """Honest-only rank-protocol run over m+1 chains."""

    protocol = "ohie"

    def __init__(self, config: SimConfig):
        super().__init__(config, streams=config.params.num_chains + 1)
        self.state = OhieState(self.p)
        self._log_genesis(self.state.view)

    def rate_ratios(self, u: int) -> np.ndarray:
        t = nonpivot_target(
            self.state.view.heaviest_tip(0), self.state.view, self.p
        )
        return np.full(self.streams, float(t / self._t0))

    def mine(self, stream: int, u: int) -> None:
        b = self.state.make_block(stream, timestamp=u, id_=self.ids.new_id())
        self._log_block(b, u)
        self._schedule(b, u + self.delay)

    def deliver(self, block: Block, u: int) -> None:
        reason = self.state.add_block(block)
        idx = self._index_of[block.id]
        if reason is None:
            self.log.mark_delivered(idx, u)
        else:
            self.log.mark_rejected(idx, u)

    def finalize(self) -> None:
        view = self.state.view
        self.log.meta["final_tips_honest"] = [
            self._index_of[view.heaviest_tip(c)] for c in view.chain_ids()
        ]
        self.log.meta["honest_target_changes"] = [[0, 0]]
        for r in sorted(self._sched):
            for b in self._sched[r]:
                self.log.mark_delivered(self._index_of[b.id], r)


class FruitEngine(_ObjectEngine):
    """Honest-only fruit-protocol run: stream 0 mines chain blocks, stream
    1 mines fruits; fruit miners are split across the configured power
    shares for fairness accounting."""

    protocol = "fruitchains"

    def __init__(self, config: SimConfig):
        super().__init__(config, streams=2)
        from .difficulty import default_fruit_recency

        stable = config.stable_window
        if stable is None:
            stable = 4 * self.p.max_delay_rounds + 4
        recency = self.p.fruit_recency_rounds
        if recency is None:
            recency = default_fruit_recency(self.p)
        self.state = FruitchainState(self.p, stable_window=stable,
                                     recency=recency)
        self.log.meta["num_chains"] = 0
        self.log.meta["fruit_recency_rounds"] = recency
        self.log.meta["stable_window"] = stable
        self._log_genesis(self.state.view)
        shares = config.fairness_shares or (1.0,)
        self._share_edges = np.cumsum(shares)
        self._party_rng = np.random.Generator(
            np.random.Philox(key=[config.seed & (2**64 - 1), 4])
        )
        self.fruits_mined: list[Fruit] = []

    def rate_ratios(self, u: int) -> np.ndarray:
        tip = self.state.view.heaviest_tip(0)
        t = nonpivot_target(tip, self.state.view, self.p)
        self._template_target = t
        r = float(t / self._t0)
        return np.array([r, r * self.config.fruit_target_ratio])

    def mine(self, stream: int, u: int) -> None:
        state = self.state
        if stream == 0:
            b = state.assemble_block(u, self.ids.new_id(),
                                     target=self._template_target)
            self._log_block(b, u)
            self._schedule(b, u + self.delay)
        else:
            party = int(
                np.searchsorted(self._share_edges, self._party_rng.random(),
                                side="right")
            )
            fruit = Fruit(
                id=self.ids.new_id(),
                fruit_parent=state.fruit_anchor(u),
                block_parent=state.view.heaviest_tip(0),
                target=self._template_target
                / Fraction(str(self.config.fruit_target_ratio)),
                timestamp=u,
                miner=Miner(party),
            )
            tid = self.log.intern_target(fruit.target)
            idx = self.log.append(
                1, NO_REF, tid, u, KLASS_HONEST,
                self._index_of.get(fruit.fruit_parent, NO_REF),
                block_id=fruit.id,
            )
            self.log.party[idx] = party
            self._index_of[fruit.id] = idx
            self.fruits_mined.append(fruit)
            self._schedule(fruit, u + self.delay)

    def deliver(self, item, u: int) -> None:
        idx = self._index_of[item.id]
        if isinstance(item, Fruit):
            self.state.add_fruit(item)
            self.log.mark_delivered(idx, u)
            return
        reason = self.state.add_block(item)
        if reason is None:
            self.log.mark_delivered(idx, u)
        else:
            self.log.mark_rejected(idx, u)

    def finalize(self) -> None:
        view = self.state.view
        self.log.meta["final_tips_honest"] = [
            self._index_of[view.heaviest_tip(0)]
        ]
        self.log.meta["honest_target_changes"] = [[0, 0]]
        for r in sorted(self._sched):
            for item in self._sched[r]:
                self.log.mark_delivered(self._index_of[item.id], r)

    # -- fruit accounting -------------------------------------------------

    def included_fruit_ids(self) -> set:
        out = set()
        for b in self.state.view.heaviest_chain(0):
            out.update(b.payload or ())
        return out

    def lost_fruit_count(self, now: Optional[int] = None) -> int:
        """Fruits that can never be included anymore: not on the main
        chain and anchored too far in the past for the recency rule."""
        now = self.duration if now is None else now
        included = self.included_fruit_ids()
        view = self.state.view
        lost = 0
        for f in self.fruits_mined:
            if f.id in included:
                continue
            anchor_ts = (
                view.block(f.fruit_parent).timestamp
                if f.fruit_parent in view else 0
            )
            if anchor_ts < now - self.state.recency:
                lost += 1
        return lost
