"""Boolean signal signatures, letters, and guard expressions.

A letter assigns a value to every signal of a signature.  Letters are encoded
as integers: the concatenated bit string (inputs first, in declaration order,
then outputs) read as an unsigned number.  The input part therefore occupies
the high bits and the output part the low bits, so

    letter = (input_letter << n_outputs) | output_letter

and integer order is the canonical letter order used for tie-breaking.

Guards are compiled to *letter masks*: Python integers with one bit per
letter of the alphabet, so conjunction, disjunction and negation are plain
bit operations.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_'.\[\]]*")


class FormatError(Exception):
    """Malformed input text, with an optional source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class UnknownSignalError(FormatError):
    pass


@dataclass(frozen=True)
class SignalSignature:
    """Ordered input and output signal names."""

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        names = self.inputs + self.outputs
        if not names:
            raise ValueError("a signature needs at least one signal")
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate signal names: {', '.join(dup)}")

    @property
    def names(self) -> tuple[str, ...]:
        return self.inputs + self.outputs

    @property
    def n_in(self) -> int:
        return len(self.inputs)

    @property
    def n_out(self) -> int:
        return len(self.outputs)

    @property
    def width(self) -> int:
        return len(self.inputs) + len(self.outputs)

    @property
    def n_letters(self) -> int:
        return 1 << self.width

    @property
    def n_input_letters(self) -> int:
        return 1 << self.n_in

    @property
    def n_output_letters(self) -> int:
        return 1 << self.n_out

    def join(self, in_letter: int, out_letter: int) -> int:
        return (in_letter << self.n_out) | out_letter

    def split(self, letter: int) -> tuple[int, int]:
        return letter >> self.n_out, letter & ((1 << self.n_out) - 1)

    def input_part(self) -> SignalSignature:
        return SignalSignature(self.inputs, ())

    def letter_from_values(self, values: dict[str, bool | int]) -> int:
        """Encode a full assignment ``{name: value}``; every signal is required."""
        letter = 0
        for name in self.names:
            if name not in values:
                raise UnknownSignalError(f"missing value for signal {name!r}")
            letter = (letter << 1) | (1 if values[name] else 0)
        unknown = set(values) - set(self.names)
        if unknown:
            raise UnknownSignalError(f"unknown signal(s): {', '.join(sorted(unknown))}")
        return letter

    def values(self, letter: int) -> dict[str, int]:
        w = self.width
        return {n: (letter >> (w - 1 - j)) & 1 for j, n in enumerate(self.names)}


def bits(value: int, width: int) -> str:
    """``bits(5, 3) == '101'``; empty string for width 0."""
    return format(value, f"0{width}b") if width else ""


def format_letter(sig: SignalSignature, letter: int) -> str:
    """Input bits and output bits separated by a space, e.g. ``'0 10'``."""
    i, o = sig.split(letter)
    if not sig.n_in:
        return bits(o, sig.n_out)
    if not sig.n_out:
        return bits(i, sig.n_in)
    return f"{bits(i, sig.n_in)} {bits(o, sig.n_out)}"


def full_mask(width: int) -> int:
    return (1 << (1 << width)) - 1


def var_mask(width: int, index: int) -> int:
    """Mask of all letters in which signal ``index`` (0 = most significant) is 1."""
    b = width - 1 - index
    block = 1 << b
    unit = ((1 << block) - 1) << block
    period = block << 1
    n_letters = 1 << width
    # repeat `unit` every `period` bits across the whole alphabet
    rep = ((1 << n_letters) - 1) // ((1 << period) - 1)
    return unit * rep


def iter_mask(mask: int) -> Iterator[int]:
    """Letters contained in ``mask``, in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# -- guard expressions -------------------------------------------------------
#
#   expr   := equiv
#   equiv  := impl ('<->' impl)*
#   impl   := or ('->' impl)?
#   or     := and ('|' and)*
#   and    := unary ('&' unary)*
#   unary  := '!' unary | atom
#   atom   := 'true' | 'false' | '1' | '0' | NAME | '(' expr ')'

_TOKEN = re.compile(r"\s*(?:(<->|->|[!&|()~])|(" + IDENT.pattern + r")|([01])(?![A-Za-z0-9_]))")


class _Parser:
    def __init__(self, text: str, names: Sequence[str], line: int | None, col0: int):
        self.text = text
        self.index = {n: j for j, n in enumerate(names)}
        self.width = len(names)
        self.line = line
        self.col0 = col0
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        stripped = text.rstrip()
        while pos < len(stripped):
            m = _TOKEN.match(stripped, pos)
            if not m or m.end() == pos:
                self.error("unexpected character " + repr(stripped[pos:].lstrip()[:1]), pos)
            start = m.start(m.lastindex)
            if m.group(1):
                tok = m.group(1)
                self.toks.append(("op", "!" if tok == "~" else tok, start))
            elif m.group(2):
                self.toks.append(("name", m.group(2), start))
            else:
                self.toks.append(("const", m.group(3), start))
            pos = m.end()
        self.toks.append(("end", "", len(stripped)))
        self.i = 0

    def error(self, msg: str, pos: int, cls=FormatError):
        raise cls(msg, self.line, self.col0 + pos + 1)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            self.error(f"expected {op!r}", pos)

    def parse(self) -> int:
        if self.peek()[0] == "end":
            self.error("empty expression", self.peek()[2])
        mask = self.equiv()
        kind, val, pos = self.peek()
        if kind != "end":
            self.error(f"unexpected {val!r}", pos)
        return mask

    def equiv(self) -> int:
        left = self.impl()
        full = full_mask(self.width)
        while self.peek()[1] == "<->" and self.peek()[0] == "op":
            self.take()
            right = self.impl()
            left = full & ~(left ^ right)
        return left

    def impl(self) -> int:
        left = self.disj()
        if self.peek()[1] == "->" and self.peek()[0] == "op":
            self.take()
            right = self.impl()
            return (full_mask(self.width) & ~left) | right
        return left

    def disj(self) -> int:
        left = self.conj()
        while self.peek()[1] == "|" and self.peek()[0] == "op":
            self.take()
            left |= self.conj()
        return left

    def conj(self) -> int:
        left = self.unary()
        while self.peek()[1] == "&" and self.peek()[0] == "op":
            self.take()
            left &= self.unary()
        return left

    def unary(self) -> int:
        kind, val, pos = self.peek()
        if kind == "op" and val == "!":
            self.take()
            return full_mask(self.width) & ~self.unary()
        return self.atom()

    def atom(self) -> int:
        kind, val, pos = self.take()
        if kind == "op" and val == "(":
            mask = self.equiv()
            self.expect_op(")")
            return mask
        if kind == "const" or val in ("true", "false"):
            return full_mask(self.width) if val in ("1", "true") else 0
        if kind == "name":
            if val not in self.index:
                self.error(f"unknown signal {val!r}", pos, UnknownSignalError)
            return var_mask(self.width, self.index[val])
        self.error("expected a signal name, constant or '('" if kind != "end"
                   else "unexpected end of expression", pos)


def guard_mask(text: str, names: Sequence[str], line: int | None = None, column: int = 0) -> int:
    """Compile a guard over ``names`` into a letter mask.

    ``column`` is the 0-based offset of ``text`` within its source line and is
    used only for error positions.
    """
    return _Parser(text, names, line, column).parse()


def mask_to_expr(mask: int, names: Sequence[str]) -> str:
    """Render a letter mask as a sum of cubes over ``names``.

    Cubes are merged pairwise (prime implicants) and covered greedily; the
    result is readable, not minimal.
    """
    width = len(names)
    if mask == 0:
        return "false"
    if mask == full_mask(width):
        return "true"
    # cube = (care, value): bits in `care` are fixed to the bits in `value`
    full = (1 << width) - 1
    cubes = {(full, m) for m in iter_mask(mask)}
    primes: set[tuple[int, int]] = set()
    while cubes:
        merged: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        by_care: dict[int, list[int]] = {}
        for care, val in cubes:
            by_care.setdefault(care, []).append(val)
        for care, vals in by_care.items():
            vs = set(vals)
            for v in vals:
                b = care
                while b:
                    bit = b & -b
                    b ^= bit
                    if not v & bit and (v | bit) in vs:
                        merged.add((care & ~bit, v))
                        used.add((care, v))
                        used.add((care, v | bit))
        primes |= cubes - used
        cubes = merged
    minterms = set(iter_mask(mask))

    def covers(cube, m):
        return (m & cube[0]) == cube[1]

    chosen = []
    remaining = set(minterms)
    ordered = sorted(primes)
    while remaining:
        best = max(ordered, key=lambda c: (sum(1 for m in remaining if covers(c, m)), -bin(c[0]).count("1")))
        chosen.append(best)
        remaining = {m for m in remaining if not covers(best, m)}
    parts = []
    for care, val in sorted(chosen, key=lambda c: (-c[0], c[1])):
        lits = []
        for j, n in enumerate(names):
            bit = 1 << (width - 1 - j)
            if care & bit:
                lits.append(n if val & bit else "!" + n)
        parts.append(" & ".join(lits))
    if len(parts) == 1:
        return parts[0]
    return " | ".join(f"({p})" if " & " in p else p for p in parts)


def cube_expr(value: int, names: Sequence[str]) -> str:
    """Full cube fixing every signal in ``names`` to the bits of ``value``."""
    if not names:
        return "true"
    w = len(names)
    return " & ".join(n if (value >> (w - 1 - j)) & 1 else "!" + n for j, n in enumerate(names))
