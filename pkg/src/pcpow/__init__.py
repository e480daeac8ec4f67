"""Variable-difficulty parallel-chain proof-of-work toolkit.

A library and simulation harness for parallel-chain protocols whose
mining difficulty is steered by a single pivot chain: difficulty
derivation for non-pivot blocks, monotone pivot referencing, ledger
formation for voting-, rank- and fruit-based protocols, adversarial miner
strategies, and a deterministic round-based mining simulator.
"""

from .core import (
    Block,
    BlockId,
    ChainView,
    ChainError,
    IdFactory,
    Miner,
    Rational,
    UnknownBlockError,
    common_prefix,
    make_genesis,
    prune_recent,
)
from .params import ProtocolParams
from .difficulty import (
    EpochState,
    ParamReport,
    good_round_fraction,
    next_target,
    nonpivot_target,
    recalc_target,
    validate_params,
)
from .sim import SimConfig, SimResult, run
from .trace import HashrateTrace

__all__ = [
    "Block",
    "BlockId",
    "ChainView",
    "ChainError",
    "EpochState",
    "HashrateTrace",
    "IdFactory",
    "Miner",
    "ParamReport",
    "ProtocolParams",
    "Rational",
    "SimConfig",
    "SimResult",
    "UnknownBlockError",
    "common_prefix",
    "good_round_fraction",
    "make_genesis",
    "next_target",
    "nonpivot_target",
    "prune_recent",
    "recalc_target",
    "run",
    "validate_params",
]

__version__ = "0.1.0"
