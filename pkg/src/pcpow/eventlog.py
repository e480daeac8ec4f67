"""Columnar event log: the full record of one simulation.

Every metric is a pure function of this log, so a run can be recomputed
offline bit-for-bit.  In memory the log is column arrays indexed by a
global block index; on disk it is newline-delimited records

    round,kind,block,chain,class,target,parent,pivot_ref

with one ``mine`` record per block plus a ``deliver``/``withhold``/
``reject`` record for its fate.  Genesis blocks appear as ``genesis``
records at round 0.  Targets are serialized exactly as num/den.
"""

from __future__ import annotations

import hashlib
import json
from array import array
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional

KLASS_HONEST = 0
KLASS_ADVERSARY = 1
KLASS_GENESIS = 2

STATUS_DELIVERED = 0
STATUS_WITHHELD = 1
STATUS_REJECTED = 2

_KIND_BY_KLASS = {KLASS_GENESIS: "genesis", KLASS_HONEST: "mine",
                  KLASS_ADVERSARY: "mine"}
_CLASS_NAMES = {KLASS_HONEST: "honest", KLASS_ADVERSARY: "adversary",
                KLASS_GENESIS: "genesis"}
_CLASS_CODES = {v: k for k, v in _CLASS_NAMES.items()}
_STATUS_KINDS = {STATUS_DELIVERED: "deliver", STATUS_WITHHELD: "withhold",
                 STATUS_REJECTED: "reject"}
_STATUS_CODES = {v: k for k, v in _STATUS_KINDS.items()}

NO_REF = -1


class EventLog:
    """Append-only block table plus run metadata.

    Columns (one entry per block, genesis rows first):
      chain, parent (global index, -1 for genesis), target_id, mined_round,
      klass, pivot_ref (global index or -1), deliver_round (-1 if not
      delivered), status.
    """

    def __init__(self, meta: Optional[dict] = None):
        self.meta: dict = meta or {}
        self.targets: list[Fraction] = []
        self._target_ids: dict[Fraction, int] = {}
        self.chain = array("i")
        self.parent = array("q")
        self.target_id = array("i")
        self.mined_round = array("i")
        self.klass = array("b")
        self.pivot_ref = array("q")
        self.deliver_round = array("i")
        self.status = array("b")
        self.height = array("i")           # derived: parent height + 1
        self.party = array("i")            # sub-party id, -1 when unused
        self.block_ids: list[bytes] = []   # optional explicit ids

    # -- construction --------------------------------------------------------

    def intern_target(self, target: Fraction) -> int:
        tid = self._target_ids.get(target)
        if tid is None:
            tid = len(self.targets)
            self.targets.append(target)
            self._target_ids[target] = tid
        return tid

    def append(
        self,
        chain: int,
        parent: int,
        target_id: int,
        mined_round: int,
        klass: int,
        pivot_ref: int = NO_REF,
        block_id: bytes = b"",
    ) -> int:
        idx = len(self.chain)
        self.chain.append(chain)
        self.parent.append(parent)
        self.target_id.append(target_id)
        self.mined_round.append(mined_round)
        self.klass.append(klass)
        self.pivot_ref.append(pivot_ref)
        self.deliver_round.append(-1)
        self.status.append(STATUS_WITHHELD)
        self.height.append(0 if parent == NO_REF else self.height[parent] + 1)
        self.party.append(-1)
        self.block_ids.append(block_id)
        return idx

    def mark_delivered(self, idx: int, round_: int) -> None:
        self.deliver_round[idx] = round_
        self.status[idx] = STATUS_DELIVERED

    def mark_rejected(self, idx: int, round_: int) -> None:
        self.deliver_round[idx] = round_
        self.status[idx] = STATUS_REJECTED

    # -- access ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.chain)

    def target_of(self, idx: int) -> Fraction:
        return self.targets[self.target_id[idx]]

    def block_id_of(self, idx: int) -> bytes:
        bid = self.block_ids[idx]
        if bid:
            return bid
        seed = self.meta.get("seed", 0)
        h = hashlib.sha256()
        h.update(b"block:%d:%d" % (seed, idx))
        return h.digest()

    def mined_count(self) -> int:
        """Blocks actually mined (genesis rows excluded)."""
        return sum(1 for k in self.klass if k != KLASS_GENESIS)

    def multipliers(self):
        """Per-round hashrate multiplier stream recorded for the run."""
        import numpy as np

        from .trace import HashrateTrace, replay_trace

        samples = self.meta.get("trace_samples")
        duration = self.meta["duration"]
        interval = self.meta["round_interval"]
        if not samples:
            return np.ones(duration, dtype=np.float64)
        return replay_trace(
            HashrateTrace.from_samples(samples), duration, float(interval)
        )

    def honest_target_changes(self) -> list[tuple[int, int, int]]:
        """(round, min target id, max target id) change points of the
        honest template targets across views."""
        out = []
        for x in self.meta.get("honest_target_changes", []):
            if len(x) == 2:
                out.append((x[0], x[1], x[1]))
            else:
                out.append(tuple(x))
        return out

    def good_round_samples(self) -> Iterator[tuple[float, float, float]]:
        """(parties, min target, max target) per round, for the good-round
        diagnostic."""
        mult = self.multipliers()
        changes = self.honest_target_changes()
        n0 = float(self.meta["initial_parties"])
        duration = self.meta["duration"]
        ci = 0
        lo_id, hi_id = (changes[0][1], changes[0][2]) if changes else (0, 0)
        for r in range(duration):
            while ci + 1 < len(changes) and changes[ci + 1][0] <= r:
                ci += 1
                lo_id, hi_id = changes[ci][1], changes[ci][2]
            yield (
                n0 * mult[r],
                float(self.targets[lo_id]),
                float(self.targets[hi_id]),
            )

    # -- serialization ---------------------------------------------------------

    def write(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write("#meta " + json.dumps(self.meta, sort_keys=True) + "\n")
            fh.write(
                "#targets "
                + json.dumps([f"{t.numerator}/{t.denominator}" for t in self.targets])
                + "\n"
            )
            fh.write("round,kind,block,chain,class,target,parent,pivot_ref\n")
            for idx in range(len(self)):
                kind = _KIND_BY_KLASS[self.klass[idx]]
                t = self.targets[self.target_id[idx]]
                parent = self.parent[idx]
                ref = self.pivot_ref[idx]
                cls_name = _CLASS_NAMES[self.klass[idx]]
                if self.party[idx] >= 0:
                    cls_name = f"{cls_name}:{self.party[idx]}"
                fh.write(
                    f"{self.mined_round[idx]},{kind},"
                    f"{self.block_id_of(idx).hex()},{self.chain[idx]},"
                    f"{cls_name},"
                    f"{t.numerator}/{t.denominator},"
                    f"{'' if parent == NO_REF else self.block_id_of(parent).hex()},"
                    f"{'' if ref == NO_REF else self.block_id_of(ref).hex()}\n"
                )
                if self.klass[idx] != KLASS_GENESIS:
                    kind = _STATUS_KINDS[self.status[idx]]
                    rd = self.deliver_round[idx]
                    fh.write(
                        f"{rd if rd >= 0 else self.meta.get('duration', 0)},"
                        f"{kind},{self.block_id_of(idx).hex()},"
                        f"{self.chain[idx]},{_CLASS_NAMES[self.klass[idx]]},,,\n"
                    )

    @classmethod
    def read(cls, path) -> "EventLog":
        path = Path(path)
        log = cls()
        index_of: dict[str, int] = {}
        with path.open("r", encoding="utf-8") as fh:
            line = fh.readline()
            if not line.startswith("#meta "):
                raise ValueError("missing #meta header")
            log.meta = json.loads(line[len("#meta "):])
            line = fh.readline()
            if not line.startswith("#targets "):
                raise ValueError("missing #targets header")
            for entry in json.loads(line[len("#targets "):]):
                num, den = entry.split("/")
                log.intern_target(Fraction(int(num), int(den)))
            header = fh.readline().strip()
            if header != "round,kind,block,chain,class,target,parent,pivot_ref":
                raise ValueError("bad column header")
            for line in fh:
                parts = line.rstrip("\n").split(",")
                if len(parts) != 8:
                    raise ValueError(f"malformed record: {line!r}")
                rnd, kind, block, chain, klass, target, parent, ref = parts
                if kind in ("genesis", "mine"):
                    if parent and parent not in index_of:
                        raise ValueError("parent record missing")
                    if ref and ref not in index_of:
                        raise ValueError("pivot_ref record missing")
                    num, den = target.split("/")
                    tid = log.intern_target(Fraction(int(num), int(den)))
                    party = -1
                    if ":" in klass:
                        klass, party_s = klass.split(":")
                        party = int(party_s)
                    idx = log.append(
                        chain=int(chain),
                        parent=index_of[parent] if parent else NO_REF,
                        target_id=tid,
                        mined_round=int(rnd),
                        klass=_CLASS_CODES[klass],
                        pivot_ref=index_of[ref] if ref else NO_REF,
                        block_id=bytes.fromhex(block),
                    )
                    log.party[idx] = party
                    index_of[block] = idx
                    if kind == "genesis":
                        log.mark_delivered(idx, 0)
                elif kind in _STATUS_CODES:
                    if block not in index_of:
                        raise ValueError("fate record for unknown block")
                    idx = index_of[block]
                    code = _STATUS_CODES[kind]
                    log.status[idx] = code
                    if code != STATUS_WITHHELD:
                        log.deliver_round[idx] = int(rnd)
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
        return log
