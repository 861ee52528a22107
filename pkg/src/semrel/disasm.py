"""Linear EVM disassembler over the Shanghai opcode table.

Decoding is total: every byte of input is consumed exactly once, undefined
byte values decode as INVALID, and a PUSH whose immediate runs off the end
of the code is zero-padded and flagged truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

__all__ = [
    "Opcode",
    "Instruction",
    "opcode_info",
    "disassemble",
    "format_instruction",
    "dump_listing",
    "OPCODE_TABLE",
    "STACK_NOISE_OPS",
    "BLOCK_TERMINATORS",
]


@dataclass(frozen=True)
class Opcode:
    """One row of the EVM opcode table."""

    mnemonic: str
    byte: int
    stack_in: int
    stack_out: int
    immediate_len: int = 0


def _table() -> dict[int, Opcode]:
    rows: list[tuple[int, str, int, int]] = [
        (0x00, "STOP", 0, 0),
        (0x01, "ADD", 2, 1),
        (0x02, "MUL", 2, 1),
        (0x03, "SUB", 2, 1),
        (0x04, "DIV", 2, 1),
        (0x05, "SDIV", 2, 1),
        (0x06, "MOD", 2, 1),
        (0x07, "SMOD", 2, 1),
        (0x08, "ADDMOD", 3, 1),
        (0x09, "MULMOD", 3, 1),
        (0x0A, "EXP", 2, 1),
        (0x0B, "SIGNEXTEND", 2, 1),
        (0x10, "LT", 2, 1),
        (0x11, "GT", 2, 1),
        (0x12, "SLT", 2, 1),
        (0x13, "SGT", 2, 1),
        (0x14, "EQ", 2, 1),
        (0x15, "ISZERO", 1, 1),
        (0x16, "AND", 2, 1),
        (0x17, "OR", 2, 1),
        (0x18, "XOR", 2, 1),
        (0x19, "NOT", 1, 1),
        (0x1A, "BYTE", 2, 1),
        (0x1B, "SHL", 2, 1),
        (0x1C, "SHR", 2, 1),
        (0x1D, "SAR", 2, 1),
        (0x20, "KECCAK256", 2, 1),
        (0x30, "ADDRESS", 0, 1),
        (0x31, "BALANCE", 1, 1),
        (0x32, "ORIGIN", 0, 1),
        (0x33, "CALLER", 0, 1),
        (0x34, "CALLVALUE", 0, 1),
        (0x35, "CALLDATALOAD", 1, 1),
        (0x36, "CALLDATASIZE", 0, 1),
        (0x37, "CALLDATACOPY", 3, 0),
        (0x38, "CODESIZE", 0, 1),
        (0x39, "CODECOPY", 3, 0),
        (0x3A, "GASPRICE", 0, 1),
        (0x3B, "EXTCODESIZE", 1, 1),
        (0x3C, "EXTCODECOPY", 4, 0),
        (0x3D, "RETURNDATASIZE", 0, 1),
        (0x3E, "RETURNDATACOPY", 3, 0),
        (0x3F, "EXTCODEHASH", 1, 1),
        (0x40, "BLOCKHASH", 1, 1),
        (0x41, "COINBASE", 0, 1),
        (0x42, "TIMESTAMP", 0, 1),
        (0x43, "NUMBER", 0, 1),
        (0x44, "PREVRANDAO", 0, 1),
        (0x45, "GASLIMIT", 0, 1),
        (0x46, "CHAINID", 0, 1),
        (0x47, "SELFBALANCE", 0, 1),
        (0x48, "BASEFEE", 0, 1),
        (0x50, "POP", 1, 0),
        (0x51, "MLOAD", 1, 1),
        (0x52, "MSTORE", 2, 0),
        (0x53, "MSTORE8", 2, 0),
        (0x54, "SLOAD", 1, 1),
        (0x55, "SSTORE", 2, 0),
        (0x56, "JUMP", 1, 0),
        (0x57, "JUMPI", 2, 0),
        (0x58, "PC", 0, 1),
        (0x59, "MSIZE", 0, 1),
        (0x5A, "GAS", 0, 1),
        (0x5B, "JUMPDEST", 0, 0),
        (0x5F, "PUSH0", 0, 1),
        (0xF0, "CREATE", 3, 1),
        (0xF1, "CALL", 7, 1),
        (0xF2, "CALLCODE", 7, 1),
        (0xF3, "RETURN", 2, 0),
        (0xF4, "DELEGATECALL", 6, 1),
        (0xF5, "CREATE2", 4, 1),
        (0xFA, "STATICCALL", 6, 1),
        (0xFD, "REVERT", 2, 0),
        (0xFE, "INVALID", 0, 0),
        (0xFF, "SELFDESTRUCT", 1, 0),
    ]
    table = {b: Opcode(m, b, si, so) for b, m, si, so in rows}
    for n in range(1, 33):
        b = 0x5F + n
        table[b] = Opcode(f"PUSH{n}", b, 0, 1, immediate_len=n)
    for n in range(1, 17):
        table[0x80 + n - 1] = Opcode(f"DUP{n}", 0x80 + n - 1, n, n + 1)
        table[0x90 + n - 1] = Opcode(f"SWAP{n}", 0x90 + n - 1, n + 1, n + 1)
    for n in range(0, 5):
        table[0xA0 + n] = Opcode(f"LOG{n}", 0xA0 + n, n + 2, 0)
    return table


OPCODE_TABLE: dict[int, Opcode] = _table()

_INVALID = OPCODE_TABLE[0xFE]

# Pure stack plumbing; these never carry program semantics of their own.
STACK_NOISE_OPS = frozenset(
    {"POP"}
    | {f"PUSH{n}" for n in range(0, 33)}
    | {f"DUP{n}" for n in range(1, 17)}
    | {f"SWAP{n}" for n in range(1, 17)}
)

# Opcodes that end a basic block.
BLOCK_TERMINATORS = frozenset(
    {"JUMP", "JUMPI", "STOP", "RETURN", "REVERT", "SELFDESTRUCT", "INVALID"}
)


def opcode_info(byte: int) -> Opcode:
    """Table lookup; undefined byte values map to INVALID."""
    return OPCODE_TABLE.get(byte, _INVALID)


@dataclass(frozen=True)
class Instruction:
    """A decoded instruction at a fixed byte offset.

    ``immediate`` always has length ``opcode.immediate_len`` (zero-padded at
    the tail when truncated); ``present_len`` counts the immediate bytes that
    were actually present in the code, so ``1 + present_len`` is the number
    of input bytes this instruction consumed.
    """

    pc: int
    opcode: Opcode
    immediate: bytes = b""
    truncated: bool = False
    present_len: int = 0
    raw_byte: int = -1  # original byte; differs from opcode.byte for INVALID

    @property
    def size(self) -> int:
        return 1 + self.present_len

    @property
    def immediate_value(self) -> int | None:
        if self.opcode.immediate_len == 0:
            return None
        return int.from_bytes(self.immediate, "big")

    def reassemble(self) -> bytes:
        byte = self.raw_byte if self.raw_byte >= 0 else self.opcode.byte
        return bytes([byte]) + self.immediate[: self.present_len]


def disassemble(code: bytes) -> list[Instruction]:
    """Decode raw bytes into a linear instruction stream.

    Total over arbitrary input; anomalies are reported as flags, never
    exceptions.
    """
    out: list[Instruction] = []
    pc = 0
    n = len(code)
    while pc < n:
        op = opcode_info(code[pc])
        want = op.immediate_len
        raw = bytes(code[pc + 1 : pc + 1 + want])
        present = len(raw)
        truncated = present < want
        imm = raw + b"\x00" * (want - present)
        out.append(Instruction(pc, op, imm, truncated, present, code[pc]))
        pc += 1 + present
    return out


def format_instruction(ins: Instruction) -> str:
    """Render one instruction as ``PC: MNEMONIC [0xIMM]``."""
    if ins.opcode.immediate_len:
        text = f"{ins.pc:02x}: {ins.opcode.mnemonic} 0x{ins.immediate.hex()}"
    else:
        text = f"{ins.pc:02x}: {ins.opcode.mnemonic}"
    if ins.truncated:
        text += " (truncated)"
    return text


def dump_listing(instructions: Iterable[Instruction]) -> Iterator[str]:
    for ins in instructions:
        yield format_instruction(ins)
