"""Lift EVM instruction streams into single-assignment register transfer
statements, with jump targets recovered by constant-stack abstract
interpretation.

Every instruction that carries semantics becomes exactly one statement;
PUSHes become ``Vk = CONST c`` and stack shuffling (POP/DUP/SWAP) only
moves values around the abstract stack. Register ids are keyed to the pc
of their defining instruction, so lifting is deterministic and stable
across fixed-point passes.

Statement arguments are stored bottom-to-top in stack order: for a
two-operand instruction the earlier-pushed operand comes first, so the
top-of-stack operand is ``args[-1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .disasm import BLOCK_TERMINATORS, Instruction, STACK_NOISE_OPS

__all__ = [
    "Const",
    "Reg",
    "UNKNOWN",
    "Value",
    "RtlStatement",
    "BasicBlock",
    "LiftedProgram",
    "split_blocks",
    "lift_block",
    "lift_program",
    "fold_constants",
    "resolve_value",
    "block_successors",
    "format_statement",
    "WORD_MASK",
    "STACK_LIMIT",
    "MAX_FIXPOINT_PASSES",
]

WORD_MASK = (1 << 256) - 1
STACK_LIMIT = 1024
MAX_FIXPOINT_PASSES = 16

HALT_OPS = frozenset({"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Reg:
    id: int


class _Unknown:
    __slots__ = ()

    def __repr__(self) -> str:
        return "Unknown"


UNKNOWN = _Unknown()

Value = Union[Const, Reg, _Unknown]


@dataclass(frozen=True)
class RtlStatement:
    """One lifted statement: ``def_reg = op(args)`` (def may be absent)."""

    pc: int
    def_reg: Optional[int]
    op: str
    args: tuple[Value, ...] = ()
    value: Optional[int] = None  # CONST payload


@dataclass
class BasicBlock:
    entry_pc: int
    instructions: list[Instruction]
    statements: list[RtlStatement] = field(default_factory=list)

    @property
    def terminator_op(self) -> Optional[str]:
        """Mnemonic of the terminating instruction, if the block has one."""
        last = self.instructions[-1].opcode.mnemonic
        return last if last in BLOCK_TERMINATORS else None

    @property
    def terminator_pc(self) -> Optional[int]:
        return self.instructions[-1].pc if self.terminator_op else None


@dataclass
class LiftedProgram:
    blocks: list[BasicBlock]
    env: dict[int, int]  # register id -> folded constant value
    jump_targets: dict[int, tuple[int, ...]]  # jump pc -> resolved targets
    cfg_edges: list[tuple[int, int]]  # (block entry pc, block entry pc)
    unresolved_jumps: int = 0
    stack_underflows: int = 0

    @property
    def statements(self) -> list[RtlStatement]:
        return [s for b in self.blocks for s in b.statements]


def split_blocks(instructions: Sequence[Instruction]) -> list[BasicBlock]:
    """Partition a stream at JUMPDESTs and after terminators."""
    blocks: list[BasicBlock] = []
    current: list[Instruction] = []
    for ins in instructions:
        if ins.opcode.mnemonic == "JUMPDEST" and current:
            blocks.append(BasicBlock(current[0].pc, current))
            current = []
        current.append(ins)
        if ins.opcode.mnemonic in BLOCK_TERMINATORS:
            blocks.append(BasicBlock(current[0].pc, current))
            current = []
    if current:
        blocks.append(BasicBlock(current[0].pc, current))
    return blocks


def _assign_registers(instructions: Sequence[Instruction]) -> dict[int, int]:
    """Map each defining instruction's pc to a dense register id."""
    reg_of_pc: dict[int, int] = {}
    next_id = 0
    for ins in instructions:
        op = ins.opcode
        defines = op.mnemonic.startswith("PUSH") or (
            op.mnemonic not in STACK_NOISE_OPS and op.stack_out == 1
        )
        if defines:
            reg_of_pc[ins.pc] = next_id
            next_id += 1
    return reg_of_pc


class _Stack:
    """Bounded abstract stack; underflows yield Unknown and are counted."""

    def __init__(self, slots: Sequence[Value] = ()):  # bottom-to-top
        self.slots: list[Value] = list(slots)
        self.underflows = 0

    def push(self, v: Value) -> None:
        self.slots.append(v)
        if len(self.slots) > STACK_LIMIT:
            del self.slots[0]

    def pop(self) -> Value:
        if self.slots:
            return self.slots.pop()
        self.underflows += 1
        return UNKNOWN

    def peek(self, depth: int) -> Value:
        """1-based depth from the top; pads with Unknown on underflow."""
        if depth <= len(self.slots):
            return self.slots[-depth]
        self.underflows += 1
        return UNKNOWN

    def swap(self, n: int) -> None:
        while len(self.slots) < n + 1:
            self.slots.insert(0, UNKNOWN)
            self.underflows += 1
        self.slots[-1], self.slots[-n - 1] = self.slots[-n - 1], self.slots[-1]


def lift_block(
    block: BasicBlock,
    entry_stack: Sequence[Value],
    reg_of_pc: dict[int, int],
) -> tuple[list[RtlStatement], list[Value], int]:
    """Lift one block given its entry stack.

    Returns (statements, exit stack, underflow count).
    """
    stack = _Stack(entry_stack)
    stmts: list[RtlStatement] = []
    for ins in block.instructions:
        op = ins.opcode
        m = op.mnemonic
        if m.startswith("PUSH"):
            rid = reg_of_pc[ins.pc]
            literal = ins.immediate_value if op.immediate_len else 0
            stmts.append(RtlStatement(ins.pc, rid, "CONST", (), literal))
            stack.push(Reg(rid))
        elif m.startswith("DUP"):
            stack.push(stack.peek(int(m[3:])))
        elif m.startswith("SWAP"):
            stack.swap(int(m[4:]))
        elif m == "POP":
            stack.pop()
        else:
            popped = [stack.pop() for _ in range(op.stack_in)]
            args = tuple(reversed(popped))
            rid = reg_of_pc.get(ins.pc) if op.stack_out == 1 else None
            stmts.append(RtlStatement(ins.pc, rid, m, args))
            if rid is not None:
                stack.push(Reg(rid))
    return stmts, stack.slots, stack.underflows


_FOLDABLE = frozenset(
    {"ADD", "SUB", "MUL", "DIV", "AND", "OR", "XOR", "NOT", "SHL", "SHR", "EXP"}
)


def resolve_value(v: Value, env: dict[int, int]) -> Optional[int]:
    """Constant value of ``v`` under ``env``, or None."""
    if isinstance(v, Const):
        return v.value
    if isinstance(v, Reg):
        return env.get(v.id)
    return None


def fold_constants(stmt: RtlStatement, env: dict[int, int]) -> Value:
    """Evaluate a statement over 256-bit wrapping arithmetic when possible.

    Unknown operands make the result Unknown, except for the absorbing
    cases AND-with-zero and MUL-by-zero.
    """
    if stmt.op == "CONST":
        return Const(stmt.value or 0)
    if stmt.op not in _FOLDABLE:
        return UNKNOWN
    vals = [resolve_value(a, env) for a in stmt.args]
    if stmt.op == "AND" and any(v == 0 for v in vals):
        return Const(0)
    if stmt.op == "MUL" and any(v == 0 for v in vals):
        return Const(0)
    if any(v is None for v in vals):
        return UNKNOWN
    # Operand order: vals is bottom-to-top, so the top of stack is vals[-1].
    if stmt.op == "NOT":
        return Const(~vals[0] & WORD_MASK)
    b, a = vals[0], vals[1]  # a = top of stack
    if stmt.op == "ADD":
        return Const((a + b) & WORD_MASK)
    if stmt.op == "SUB":
        return Const((a - b) & WORD_MASK)
    if stmt.op == "MUL":
        return Const((a * b) & WORD_MASK)
    if stmt.op == "DIV":
        return Const(a // b if b else 0)
    if stmt.op == "AND":
        return Const(a & b)
    if stmt.op == "OR":
        return Const(a | b)
    if stmt.op == "XOR":
        return Const(a ^ b)
    if stmt.op == "SHL":
        return Const((b << a) & WORD_MASK if a < 256 else 0)
    if stmt.op == "SHR":
        return Const(b >> a if a < 256 else 0)
    if stmt.op == "EXP":
        return Const(pow(a, b, 1 << 256))
    return UNKNOWN


def _fold_env(blocks: Sequence[BasicBlock]) -> dict[int, int]:
    env: dict[int, int] = {}
    for b in blocks:
        for s in b.statements:
            if s.def_reg is None:
                continue
            folded = fold_constants(s, env)
            if isinstance(folded, Const):
                env[s.def_reg] = folded.value
    return env


def _join_values(a: Value, b: Value, env: dict[int, int]) -> Value:
    if a == b:
        return a
    ca, cb = resolve_value(a, env), resolve_value(b, env)
    if ca is not None and ca == cb:
        return Const(ca)
    return UNKNOWN


def _join_stacks(
    a: Optional[list[Value]], b: list[Value], env: dict[int, int]
) -> list[Value]:
    if a is None:
        return list(b)
    if len(a) != len(b):
        # Align at the top; pad the shorter stack's bottom with Unknown.
        depth = max(len(a), len(b))
        a = [UNKNOWN] * (depth - len(a)) + a
        b = [UNKNOWN] * (depth - len(b)) + list(b)
    return [_join_values(x, y, env) for x, y in zip(a, b)]


def _resolve_targets(
    blocks: Sequence[BasicBlock],
    env: dict[int, int],
    jumpdest_pcs: frozenset[int],
) -> tuple[dict[int, tuple[int, ...]], int]:
    """Fold each JUMP/JUMPI target operand to a constant destination."""
    targets: dict[int, tuple[int, ...]] = {}
    unresolved = 0
    for b in blocks:
        term = b.terminator_op
        if term not in ("JUMP", "JUMPI"):
            continue
        stmt = b.statements[-1]
        dest = resolve_value(stmt.args[-1], env) if stmt.args else None
        if dest is not None and dest in jumpdest_pcs:
            targets[stmt.pc] = (dest,)
        else:
            targets[stmt.pc] = ()
            unresolved += 1
    return targets, unresolved


def block_successors(
    blocks: Sequence[BasicBlock],
    jump_targets: dict[int, tuple[int, ...]],
) -> list[tuple[int, int]]:
    """Block-level CFG edges (entry pc -> entry pc), deterministic order."""
    next_of = {
        blocks[i].entry_pc: blocks[i + 1].entry_pc for i in range(len(blocks) - 1)
    }
    edges: list[tuple[int, int]] = []
    for b in blocks:
        term = b.terminator_op
        if term == "JUMP":
            for t in jump_targets.get(b.terminator_pc or -1, ()):
                edges.append((b.entry_pc, t))
        elif term == "JUMPI":
            for t in jump_targets.get(b.terminator_pc or -1, ()):
                edges.append((b.entry_pc, t))
            if b.entry_pc in next_of:
                edges.append((b.entry_pc, next_of[b.entry_pc]))
        elif term is None and b.entry_pc in next_of:
            edges.append((b.entry_pc, next_of[b.entry_pc]))
        # Halting terminators contribute no edges.
    return edges


def lift_program(instructions: Sequence[Instruction]) -> LiftedProgram:
    """Lift a whole instruction stream to fixpoint.

    Entry stacks propagate along discovered CFG edges until stable or
    until the pass cap; unreachable blocks lift from an empty stack.
    """
    blocks = split_blocks(instructions)
    if not blocks:
        return LiftedProgram([], {}, {}, [])
    reg_of_pc = _assign_registers(instructions)
    jumpdest_pcs = frozenset(
        i.pc for i in instructions if i.opcode.mnemonic == "JUMPDEST"
    )
    by_entry = {b.entry_pc: b for b in blocks}

    entry_stacks: dict[int, list[Value]] = {b.entry_pc: [] for b in blocks}
    env: dict[int, int] = {}
    targets: dict[int, tuple[int, ...]] = {}
    unresolved = 0
    underflows = 0

    def one_pass() -> tuple[int, dict[int, list[Value]]]:
        nonlocal env, targets, unresolved
        uf_total = 0
        exit_stacks: dict[int, list[Value]] = {}
        for b in blocks:
            stmts, exit_stack, uf = lift_block(b, entry_stacks[b.entry_pc], reg_of_pc)
            b.statements = stmts
            exit_stacks[b.entry_pc] = exit_stack
            uf_total += uf
        env = _fold_env(blocks)
        targets, unresolved = _resolve_targets(blocks, env, jumpdest_pcs)
        edges = block_successors(blocks, targets)
        new_entries: dict[int, Optional[list[Value]]] = {
            b.entry_pc: None for b in blocks
        }
        new_entries[blocks[0].entry_pc] = []  # execution starts on an empty stack
        for src, dst in edges:
            new_entries[dst] = _join_stacks(new_entries[dst], exit_stacks[src], env)
        return uf_total, {
            pc: (stack if stack is not None else []) for pc, stack in new_entries.items()
        }

    for _ in range(MAX_FIXPOINT_PASSES):
        underflows, new_entries = one_pass()
        if new_entries == entry_stacks:
            break
        entry_stacks = new_entries
    else:
        # Pass cap hit: widen the still-unstable slots to Unknown (the join
        # of the last two entry maps) and settle with one final pass.
        entry_stacks = {
            pc: _join_stacks(entry_stacks[pc], new_entries[pc], env)
            for pc in entry_stacks
        }
        underflows, _ = one_pass()

    return LiftedProgram(
        blocks=blocks,
        env=env,
        jump_targets=targets,
        cfg_edges=block_successors(blocks, targets),
        unresolved_jumps=unresolved,
        stack_underflows=underflows,
    )


def _format_value(v: Value) -> str:
    if isinstance(v, Reg):
        return f"V{v.id}"
    if isinstance(v, Const):
        return hex(v.value)
    return "?"


def format_statement(stmt: RtlStatement) -> str:
    """Render as ``PC: Vk = OP args`` (CONSTs print their literal)."""
    head = f"{stmt.pc:02x}: "
    if stmt.op == "CONST":
        return f"{head}V{stmt.def_reg} = {hex(stmt.value or 0)}"
    rhs = stmt.op + "".join(" " + _format_value(a) for a in stmt.args)
    if stmt.def_reg is not None:
        return f"{head}V{stmt.def_reg} = {rhs}"
    return head + rhs
