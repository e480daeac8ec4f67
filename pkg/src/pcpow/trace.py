"""Hashrate traces: time-indexed relative mining power with step-function
semantics, CSV ingestion, and per-round replay."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class TraceError(ValueError):
    pass


CSV_HEADER = "unix_seconds,relative_hashrate"


@dataclass(frozen=True)
class HashrateTrace:
    """Ordered (time_seconds, relative_hashrate) samples; the rate holds
    constant from each sample time until the next."""

    times: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if not self.times:
            raise TraceError("empty trace")
        if len(self.times) != len(self.rates):
            raise TraceError("times and rates must have equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise TraceError("times must be strictly increasing")
        if any(r <= 0 for r in self.rates):
            raise TraceError("hashrate samples must be positive")

    @classmethod
    def constant(cls, rate: float = 1.0) -> "HashrateTrace":
        return cls((0.0,), (float(rate),))

    @classmethod
    def ramp(
        cls, factor: float, duration_seconds: float, steps: int = 200
    ) -> "HashrateTrace":
        """Piecewise-constant approximation of a linear ramp from 1 to
        ``factor`` over the given time span (endpoint included)."""
        if steps < 1:
            raise TraceError("steps must be >= 1")
        times = tuple(duration_seconds * i / steps for i in range(steps + 1))
        rates = tuple(
            1.0 + (factor - 1.0) * (i / steps) for i in range(steps + 1)
        )
        return cls(times, rates)

    def rate_at(self, t: float) -> float:
        i = bisect.bisect_right(self.times, t) - 1
        if i < 0:
            # Before the first sample the first rate applies.
            i = 0
        return self.rates[i]

    # -- CSV ----------------------------------------------------------------

    @classmethod
    def read_csv(cls, path) -> "HashrateTrace":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != CSV_HEADER:
            raise TraceError(f"expected header '{CSV_HEADER}'")
        times, rates = [], []
        for ln in lines[1:]:
            if not ln.strip():
                continue
            t, r = ln.split(",")
            times.append(float(t))
            rates.append(float(r))
        return cls(tuple(times), tuple(rates))

    def write_csv(self, path) -> None:
        out = [CSV_HEADER]
        out.extend(f"{t:.17g},{r:.17g}" for t, r in zip(self.times, self.rates))
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")

    def to_samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.rates))

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]]) -> "HashrateTrace":
        return cls(tuple(s[0] for s in samples), tuple(s[1] for s in samples))


def replay_trace(
    trace: HashrateTrace, duration_rounds: int, round_interval: float
) -> np.ndarray:
    """Per-round hashrate multiplier stream, normalized so that round 0 has
    multiplier 1.  Round r samples the trace at time r * round_interval,
    relative to the trace start."""
    if duration_rounds < 1:
        raise TraceError("duration must be >= 1 round")
    if not trace_covers(trace, duration_rounds, round_interval):
        raise TraceError("trace is shorter than the simulated duration")
    t0 = trace.times[0]
    out = np.empty(duration_rounds, dtype=np.float64)
    for r in range(duration_rounds):
        out[r] = trace.rate_at(t0 + r * round_interval)
    return out / out[0]


def trace_covers(trace: HashrateTrace, duration_rounds: int,
                 round_interval: float) -> bool:
    """A multi-sample trace covers a run iff its sample span reaches the
    run's last round; a single-sample (constant) trace covers anything."""
    if len(trace.times) == 1:
        return True
    span = (duration_rounds - 1) * round_interval
    return trace.times[-1] - trace.times[0] >= span
