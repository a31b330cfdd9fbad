"""Complete Mealy machines and their text format.

The format extends the automaton format with an ``emit:`` clause::

    inputs: p h f
    outputs: h' f'
    states: X Y Z
    init: X
    X -> Y : !h & !f  emit: !h' & !f'

Guards range over the inputs.  The emit expression may mention inputs and
outputs; for every input letter matched by the guard it must hold for
exactly one output letter, so ``emit: h' <-> h`` copies an input.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .automata import NondeterminismError, _split_source, _signature_of, _state_ref, _state_table
from .signals import FormatError, SignalSignature, bits, cube_expr, guard_mask, iter_mask, mask_to_expr


class MalformedLetter(ValueError):
    pass


@dataclass(frozen=True)
class MealyMachine:
    """``delta[q][i]`` is the successor and ``out[q][i]`` the output letter."""

    signature: SignalSignature
    states: tuple[str, ...]
    init: int
    delta: tuple[tuple[int, ...], ...]
    out: tuple[tuple[int, ...], ...]
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: j for j, n in enumerate(self.states)})
        n = self.signature.n_input_letters
        if len(self.delta) != len(self.states) or len(self.out) != len(self.states):
            raise ValueError("tables must have one row per state")
        if any(len(r) != n for r in self.delta) or any(len(r) != n for r in self.out):
            raise ValueError(f"every state needs {n} input-letter entries")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def index(self, name: str) -> int:
        return self._index[name]

    def step(self, q: int, letter: int) -> tuple[int, int]:
        if not 0 <= letter < self.signature.n_input_letters:
            raise MalformedLetter(f"input letter {letter} out of range")
        return self.delta[q][letter], self.out[q][letter]

    def run(self, inputs: Iterable[int]) -> list[int]:
        q = self.init
        outs = []
        for a in inputs:
            q, o = self.step(q, a)
            outs.append(o)
        return outs

    def reachable(self) -> list[int]:
        seen = {self.init}
        order = [self.init]
        queue = deque([self.init])
        while queue:
            q = queue.popleft()
            for t in self.delta[q]:
                if t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
        return order

    def restrict(self) -> MealyMachine:
        """Drop unreachable states (breadth-first renumbering)."""
        order = self.reachable()
        if len(order) == self.n_states and order == list(range(self.n_states)):
            return self
        new = {q: j for j, q in enumerate(order)}
        return MealyMachine(self.signature, tuple(self.states[q] for q in order), 0,
                            tuple(tuple(new[t] for t in self.delta[q]) for q in order),
                            tuple(self.out[q] for q in order))


def canonical_form(m: MealyMachine) -> tuple:
    index = {m.init: 0}
    order = [m.init]
    rows = []
    queue = deque([m.init])
    while queue:
        q = queue.popleft()
        row = []
        for t in m.delta[q]:
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
            row.append(index[t])
        rows.append((tuple(row), m.out[q]))
    return m.signature, tuple(rows)


def isomorphic(a: MealyMachine, b: MealyMachine) -> bool:
    return canonical_form(a) == canonical_form(b)


def parse_mealy(text: str, signature: SignalSignature | None = None) -> MealyMachine:
    src = _split_source(text, allow_emit=True)
    if "safe" in src.headers:
        raise FormatError("'safe:' is not allowed in a Mealy machine", src.headers["safe"][0].number)
    sig = _signature_of(src, signature)
    states, index, init = _state_table(src)
    n_in = sig.n_input_letters
    n_out = sig.n_output_letters
    delta: list[list[int | None]] = [[None] * n_in for _ in states]
    out: list[list[int | None]] = [[None] * n_in for _ in states]
    for ln, s, d, guard, gcol, emit, ecol in src.edges:
        q = _state_ref(index, s, ln)
        t = _state_ref(index, d, ln)
        gmask = guard_mask(guard, sig.inputs, ln.number, gcol)
        emask = guard_mask(emit, sig.names, ln.number, ecol)
        for i in iter_mask(gmask):
            if delta[q][i] is not None:
                raise NondeterminismError(s, bits(i, sig.n_in) or "()", ln.number, gcol + 1)
            choices = (emask >> (i << sig.n_out)) & ((1 << n_out) - 1)
            if choices == 0 or choices & (choices - 1):
                what = "no" if choices == 0 else "more than one"
                raise FormatError(f"emit clause allows {what} output letter for input {bits(i, sig.n_in)}",
                                  ln.number, ecol + 1)
            delta[q][i] = t
            out[q][i] = choices.bit_length() - 1
    for q, row in enumerate(delta):
        for i, t in enumerate(row):
            if t is None:
                raise FormatError(f"state {states[q]} has no transition for input {bits(i, sig.n_in)}")
    return MealyMachine(sig, tuple(states), init, tuple(map(tuple, delta)), tuple(map(tuple, out)))


def format_mealy(m: MealyMachine, comments: Sequence[str] = (), state_notes: dict[int, str] | None = None) -> str:
    """Native text format; transitions sharing (source, target, output) are merged."""
    sig = m.signature
    lines = [f"# {c}" for c in comments]
    lines += [f"inputs: {' '.join(sig.inputs)}".rstrip(),
              f"outputs: {' '.join(sig.outputs)}".rstrip(),
              f"states: {' '.join(m.states)}",
              f"init: {m.states[m.init]}"]
    for q in range(m.n_states):
        if state_notes and q in state_notes:
            lines.append(f"# {m.states[q]} = {state_notes[q]}")
        groups: dict[tuple[int, int], int] = {}
        for i in range(sig.n_input_letters):
            key = (m.delta[q][i], m.out[q][i])
            groups[key] = groups.get(key, 0) | (1 << i)
        for (t, o), mask in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            guard = mask_to_expr(mask, sig.inputs)
            lines.append(f"{m.states[q]} -> {m.states[t]} : {guard}  emit: {cube_expr(o, sig.outputs)}")
    return "\n".join(lines) + "\n"


def to_dot(m: MealyMachine, name: str = "mealy") -> str:
    sig = m.signature
    lines = [f"digraph {_dot_id(name)} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for q in m.reachable():
        lines.append(f'  {_dot_id(m.states[q])} [shape=circle];')
    lines.append(f"  __start -> {_dot_id(m.states[m.init])};")
    for q in m.reachable():
        groups: dict[tuple[int, int], int] = {}
        for i in range(sig.n_input_letters):
            key = (m.delta[q][i], m.out[q][i])
            groups[key] = groups.get(key, 0) | (1 << i)
        for (t, o), mask in sorted(groups.items()):
            guard = mask_to_expr(mask, sig.inputs)
            label = f"{guard} / {bits(o, sig.n_out)}".replace('"', '\\"')
            lines.append(f'  {_dot_id(m.states[q])} -> {_dot_id(m.states[t])} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_id(name: str) -> str:
    return '"' + name.replace('"', '\\"') + '"'
