"""semrel: semantic relation graphs from EVM bytecode.

Pipeline: disassemble creation bytecode, lift to single-assignment RTL,
recover the CFG by constant-stack jump resolution, and emit a typed
dependence graph (control / data / effect edges) ready for serialization,
statistics, perturbation experiments, and graph learning.
"""

from .disasm import Instruction, Opcode, disassemble, opcode_info
from .errors import SemrelError
from .graphio import encode, from_json, make_splits, to_dot, to_json
from .ingest import (
    ContractRecord,
    DatasetManifest,
    detect_creation,
    fetch_bytecode,
    hex_decode,
    load_manifest,
)
from .lifter import fold_constants, lift_program, split_blocks
from .perturb import flip_edges, flip_labels, inject_nodes
from .srg import SRG, build_srg, build_srg_from_bytes, graph_stats

__version__ = "0.1.0"

__all__ = [
    "Instruction",
    "Opcode",
    "disassemble",
    "opcode_info",
    "SemrelError",
    "encode",
    "from_json",
    "make_splits",
    "to_dot",
    "to_json",
    "ContractRecord",
    "DatasetManifest",
    "detect_creation",
    "fetch_bytecode",
    "hex_decode",
    "load_manifest",
    "fold_constants",
    "lift_program",
    "split_blocks",
    "flip_edges",
    "flip_labels",
    "inject_nodes",
    "SRG",
    "build_srg",
    "build_srg_from_bytes",
    "graph_stats",
]
