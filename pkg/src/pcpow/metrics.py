"""Metrics over event logs.

Every function here is a pure function of one EventLog, so any report can
be regenerated offline, bit for bit, from the stored log.  Counts are
exact; only derived rates use floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .difficulty import good_round_fraction
from .eventlog import KLASS_GENESIS, NO_REF, EventLog
from .params import ProtocolParams


def _main_chain_indices(log: EventLog) -> list[list[int]]:
    """Per chain: block indices of the final heaviest chain, ascending
    (genesis first)."""
    tips = log.meta["final_tips_honest"]
    chains = []
    for tip in tips:
        path = []
        idx = tip
        while idx != NO_REF:
            path.append(idx)
            idx = log.parent[idx]
        path.reverse()
        chains.append(path)
    return chains


def _on_main_mask(log: EventLog, chains: list[list[int]]) -> bytearray:
    mask = bytearray(len(log))
    for path in chains:
        for idx in path:
            mask[idx] = 1
    return mask


@dataclass
class ForkingRate:
    on_chain: int
    off_chain: int
    windows: list[tuple[int, int, int, int]]  # (start, end, on, off)

    @property
    def overall(self) -> Fraction:
        if self.on_chain == 0:
            return Fraction(0)
        return Fraction(self.off_chain, self.on_chain)

    def window_rates(self) -> list[float]:
        return [off / on if on else 0.0 for _, _, on, off in self.windows]


def forking_rate(log: EventLog, num_windows: int = 10,
                 chains: Optional[list[list[int]]] = None) -> ForkingRate:
    """Blocks off the final heaviest chains over blocks on them, aggregated
    across all parallel chains, plus a windowed time series by mining
    round."""
    if chains is None:
        chains = _main_chain_indices(log)
    mask = _on_main_mask(log, chains)
    duration = log.meta["duration"]
    edges = [round(duration * i / num_windows) for i in range(num_windows + 1)]
    on_w = [0] * num_windows
    off_w = [0] * num_windows
    on = off = 0
    for idx in range(len(log)):
        if log.klass[idx] == KLASS_GENESIS:
            continue
        r = log.mined_round[idx]
        w = min(num_windows - 1, max(0, int(r * num_windows / max(duration, 1))))
        if w >= num_windows:
            w = num_windows - 1
        if mask[idx]:
            on += 1
            on_w[w] += 1
        else:
            off += 1
            off_w[w] += 1
    windows = [
        (edges[i], edges[i + 1], on_w[i], off_w[i]) for i in range(num_windows)
    ]
    return ForkingRate(on_chain=on, off_chain=off, windows=windows)


@dataclass
class AdoptionSample:
    chain: int
    transition: int         # epoch index adopted (boundary height / epoch_length)
    boundary_round: int     # timestamp of the closing pivot block
    adopt_round: int        # timestamp of the first new-epoch block
    delay_rounds: int
    delay_block_intervals: float  # delay in units of 1/f rounds
    delay_block_count: int  # main-chain blocks from the boundary through adoption


def epoch_adoption_delay(log: EventLog,
                        chains: Optional[list[list[int]]] = None
                        ) -> list[AdoptionSample]:
    """How soon each non-pivot chain adopts a new pivot epoch.

    For every pivot main-chain epoch boundary and every non-pivot chain,
    the delay runs from the last block of the closing epoch to the first
    main-chain block referencing the new epoch, reported in rounds, in
    expected block intervals (1/f rounds), and as a count of main-chain
    blocks (the adopting block included).
    """
    phi = log.meta["epoch_length"]
    f = log.meta.get("blocks_per_round")
    if f is None:
        f = float(ProtocolParams().blocks_per_round)
    if chains is None:
        chains = _main_chain_indices(log)
    pivot = chains[0]
    boundaries = []  # (height, timestamp)
    for h, idx in enumerate(pivot):
        if h > 0 and h % phi == 0:
            boundaries.append((h, log.mined_round[idx]))
    samples: list[AdoptionSample] = []
    for c, path in enumerate(chains[1:], start=1):
        bi = 0
        count_since = 0
        for idx in path[1:]:
            if bi >= len(boundaries):
                break
            bh, bts = boundaries[bi]
            if log.mined_round[idx] > bts:
                count_since += 1
            ref = log.pivot_ref[idx]
            if ref != NO_REF and log.height[ref] >= bh:
                delay = log.mined_round[idx] - bts
                samples.append(
                    AdoptionSample(
                        chain=c,
                        transition=bh // phi,
                        boundary_round=bts,
                        adopt_round=log.mined_round[idx],
                        delay_rounds=delay,
                        delay_block_intervals=delay * f,
                        delay_block_count=count_since,
                    )
                )
                bi += 1
                count_since = 0
                # The same block may already reference an even newer epoch.
                while bi < len(boundaries) and log.height[ref] >= boundaries[bi][0]:
                    samples.append(
                        AdoptionSample(
                            chain=c,
                            transition=boundaries[bi][0] // phi,
                            boundary_round=boundaries[bi][1],
                            adopt_round=log.mined_round[idx],
                            delay_rounds=log.mined_round[idx] - boundaries[bi][1],
                            delay_block_intervals=(log.mined_round[idx]
                                                   - boundaries[bi][1]) * f,
                            delay_block_count=1,
                        )
                    )
                    bi += 1
    return samples


def adoption_histogram(samples: list[AdoptionSample],
                       by: str = "count") -> dict[int, int]:
    """Histogram of adoption delays in integer block intervals.  ``by`` is
    either 'count' (main-chain blocks to adoption) or 'time' (delay in
    1/f-round units, rounded up)."""
    hist: dict[int, int] = {}
    for s in samples:
        if by == "count":
            b = max(1, s.delay_block_count)
        else:
            b = max(1, int(np.ceil(s.delay_block_intervals)))
        hist[b] = hist.get(b, 0) + 1
    return dict(sorted(hist.items()))


def difficulty_change_frequency(log: EventLog, chain: int,
                                chains: Optional[list[list[int]]] = None
                                ) -> float:
    """Changes per second: parent-child target inequalities along the
    chain's final heaviest chain, over the simulated wall-clock span."""
    if chains is None:
        chains = _main_chain_indices(log)
    path = chains[chain]
    changes = 0
    for a, b in zip(path, path[1:]):
        if log.target_id[a] != log.target_id[b]:
            changes += 1
    seconds = log.meta["duration"] * log.meta["round_interval"]
    return changes / seconds if seconds > 0 else 0.0


def mid_epoch_change_count(log: EventLog, chain: int,
                           chains: Optional[list[list[int]]] = None) -> int:
    """Target changes on the chain's main chain whose referenced pivot
    blocks sit inside one epoch (no boundary crossed): zero under the
    monotone-reference rule."""
    phi = log.meta["epoch_length"]
    if chains is None:
        chains = _main_chain_indices(log)
    path = chains[chain]
    count = 0
    for a, b in zip(path[1:], path[2:]):
        if log.target_id[a] == log.target_id[b]:
            continue
        ra, rb = log.pivot_ref[a], log.pivot_ref[b]
        if ra == NO_REF or rb == NO_REF:
            continue
        if log.height[ra] // phi == log.height[rb] // phi:
            count += 1
    return count


def pivot_interval_overhead(log: EventLog) -> Fraction:
    """Atomic-interval overhead of the pivot tree relative to its level
    count (the confirmation overhead of difficulty-indexed bookkeeping)."""
    inv = [1 / t for t in log.targets]
    diff: dict[int, Fraction] = {}
    endpoints: set[Fraction] = set()
    levels = 0
    genesis_diff = None
    for idx in range(len(log)):
        if log.chain[idx] != 0:
            continue
        parent = log.parent[idx]
        if parent == NO_REF:
            d = inv[log.target_id[idx]]
            diff[idx] = d
            genesis_diff = d
            endpoints.add(d)
            continue
        lo = diff[parent]
        hi = lo + inv[log.target_id[idx]]
        diff[idx] = hi
        endpoints.add(lo)
        endpoints.add(hi)
        h = log.height[idx]
        if h > levels:
            levels = h
    if levels == 0:
        return Fraction(0)
    atomic = sum(1 for e in endpoints if e > genesis_diff)
    return Fraction(atomic - levels, levels)


def difficulty_band(log: EventLog, resolution: int = 500,
                    chains: Optional[list[list[int]]] = None):
    """Min/max mining difficulty across chains sampled over time, plus the
    hashrate multiplier, all normalized to their initial values.

    Returns (rounds, multiplier, min_difficulty, max_difficulty) arrays.
    """
    duration = log.meta["duration"]
    if chains is None:
        chains = _main_chain_indices(log)
    inv = [float(1 / t) for t in log.targets]
    base = inv[0]
    grid = np.linspace(1, duration, num=min(resolution, duration), dtype=np.int64)
    mins = np.empty(len(grid))
    maxs = np.empty(len(grid))
    series = []
    for path in chains:
        ts = np.array([log.mined_round[i] for i in path])
        dv = np.array([inv[log.target_id[i]] / base for i in path])
        series.append((ts, dv))
    for gi, r in enumerate(grid):
        lo, hi = np.inf, -np.inf
        for ts, dv in series:
            j = np.searchsorted(ts, r, side="right") - 1
            v = dv[max(j, 0)]
            lo = min(lo, v)
            hi = max(hi, v)
        mins[gi] = lo
        maxs[gi] = hi
    mult = log.multipliers()
    mult_grid = mult[np.minimum(grid, len(mult) - 1)]
    return grid, mult_grid, mins, maxs


def fairness_shares_mined(log: EventLog) -> dict[int, float]:
    """Per-party share of delivered fruit difficulty (runs whose miners
    carry sub-party ids; empty otherwise)."""
    from .eventlog import STATUS_DELIVERED

    totals: dict[int, float] = {}
    grand = 0.0
    inv = [float(1 / t) for t in log.targets]
    for idx in range(len(log)):
        party = log.party[idx]
        if party < 0 or log.status[idx] != STATUS_DELIVERED:
            continue
        d = inv[log.target_id[idx]]
        totals[party] = totals.get(party, 0.0) + d
        grand += d
    if grand == 0.0:
        return {}
    return {p: v / grand for p, v in sorted(totals.items())}


@dataclass
class MetricsReport:
    """Bundle of every metric computed from one event log."""

    forking: ForkingRate
    adoption: list[AdoptionSample]
    change_frequency: dict[int, float]
    interval_overhead: Fraction
    good_rounds: float
    band: tuple
    fairness: dict[int, float]
    mined_blocks: int
    delivered_blocks: int
    withheld_blocks: int
    rejected_blocks: int
    private_releases: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def compute(cls, log: EventLog, params: Optional[ProtocolParams] = None,
                num_windows: int = 10) -> "MetricsReport":
        from .eventlog import STATUS_DELIVERED, STATUS_REJECTED, STATUS_WITHHELD

        if params is None:
            params = ProtocolParams(
                num_chains=log.meta["num_chains"],
                epoch_length=log.meta["epoch_length"],
            )
        main_chains = _main_chain_indices(log)
        n_chains = log.meta["num_chains"]
        freq = {
            c: difficulty_change_frequency(log, c, chains=main_chains)
            for c in range(min(n_chains + 1, len(main_chains)))
        }
        mined = delivered = withheld = rejected = 0
        for idx in range(len(log)):
            if log.klass[idx] == KLASS_GENESIS:
                continue
            mined += 1
            st = log.status[idx]
            if st == STATUS_DELIVERED:
                delivered += 1
            elif st == STATUS_WITHHELD:
                withheld += 1
            elif st == STATUS_REJECTED:
                rejected += 1
        return cls(
            forking=forking_rate(log, num_windows, chains=main_chains),
            adoption=epoch_adoption_delay(log, chains=main_chains),
            change_frequency=freq,
            interval_overhead=pivot_interval_overhead(log),
            good_rounds=good_round_fraction(log.good_round_samples(), params),
            band=difficulty_band(log, chains=main_chains),
            fairness=fairness_shares_mined(log),
            mined_blocks=mined,
            delivered_blocks=delivered,
            withheld_blocks=withheld,
            rejected_blocks=rejected,
            private_releases=log.meta.get("private_releases", 0),
            meta=dict(log.meta),
        )

    # -- serialization -----------------------------------------------------

    def summary(self) -> dict:
        out = {
            "forking_rate": float(self.forking.overall),
            "forking_on_chain": self.forking.on_chain,
            "forking_off_chain": self.forking.off_chain,
            "adoption_samples": len(self.adoption),
            "difficulty_changes_per_second": self.change_frequency,
            "interval_overhead": float(self.interval_overhead),
            "good_round_fraction": self.good_rounds,
            "mined_blocks": self.mined_blocks,
            "delivered_blocks": self.delivered_blocks,
            "withheld_blocks": self.withheld_blocks,
            "rejected_blocks": self.rejected_blocks,
            "private_releases": self.private_releases,
        }
        if self.fairness:
            out["fairness_fractions"] = {
                str(p): v for p, v in self.fairness.items()
            }
        return out

    def write_csvs(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        p = outdir / "forking_rate.csv"
        lines = ["window_start_round,window_end_round,on_chain,off_chain,forking_rate"]
        for (s, e, on, off) in self.forking.windows:
            rate = off / on if on else 0.0
            lines.append(f"{s},{e},{on},{off},{rate:.10g}")
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)

        p = outdir / "adoption_delay.csv"
        lines = [
            "chain,transition,boundary_round,adopt_round,delay_rounds,"
            "delay_block_intervals,delay_block_count"
        ]
        for s in self.adoption:
            lines.append(
                f"{s.chain},{s.transition},{s.boundary_round},{s.adopt_round},"
                f"{s.delay_rounds},{s.delay_block_intervals:.10g},"
                f"{s.delay_block_count}"
            )
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)

        p = outdir / "difficulty_changes.csv"
        lines = ["chain,changes_per_second"]
        for c, v in sorted(self.change_frequency.items()):
            lines.append(f"{c},{v:.10g}")
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)

        p = outdir / "difficulty_band.csv"
        rounds, mult, mins, maxs = self.band
        interval = self.meta.get("round_interval", 1.0)
        lines = ["round,seconds,hashrate_multiplier,min_difficulty,max_difficulty"]
        for i in range(len(rounds)):
            lines.append(
                f"{int(rounds[i])},{rounds[i] * interval:.10g},"
                f"{mult[i]:.10g},{mins[i]:.10g},{maxs[i]:.10g}"
            )
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(p)

        p = outdir / "summary.json"
        p.write_text(
            json.dumps(self.summary(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        written.append(p)
        return written
