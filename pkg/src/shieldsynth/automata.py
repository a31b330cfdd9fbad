"""Deterministic safety automata over Boolean signal alphabets.

Text format (UTF-8, ``#`` starts a comment)::

    inputs: p
    outputs: h f
    states: H B F
    init: H
    safe: H B F          # optional, defaults to all declared states
    H -> H : !p & h & !f
    H -> B : !h & !f

Letters not covered by any guard of a state lead to the implicit unsafe,
absorbing trap state ``__trap``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .signals import (
    IDENT,
    FormatError,
    SignalSignature,
    UnknownSignalError,
    format_letter,
    guard_mask,
    iter_mask,
)

TRAP = "__trap"
_HEADERS = ("inputs", "outputs", "states", "init", "safe")


class NondeterminismError(FormatError):
    def __init__(self, state: str, letter: str, line: int | None = None, column: int | None = None):
        self.state = state
        self.letter = letter
        super().__init__(f"state {state} has overlapping guards on letter {letter}", line, column)


class SignatureMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SafetyAutomaton:
    """``delta[q][letter]`` is the successor index, or ``None`` while incomplete."""

    signature: SignalSignature
    states: tuple[str, ...]
    init: int
    delta: tuple[tuple[int | None, ...], ...]
    safe: frozenset[int]
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: j for j, n in enumerate(self.states)})
        if not 0 <= self.init < len(self.states):
            raise ValueError("init state out of range")
        if not set(self.safe) <= set(range(len(self.states))):
            raise ValueError("safe states out of range")
        if len(self.delta) != len(self.states):
            raise ValueError("transition table does not match state count")
        n = self.signature.n_letters
        if any(len(row) != n for row in self.delta):
            raise ValueError(f"every state needs {n} letter entries")

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def is_complete(self) -> bool:
        return all(t is not None for row in self.delta for t in row)

    @property
    def trap(self) -> int | None:
        return self._index.get(TRAP)

    def step(self, q: int, letter: int) -> int:
        nxt = self.delta[q][letter]
        if nxt is None:
            raise ValueError(f"state {self.states[q]} has no edge on letter {letter}")
        return nxt

    def run(self, letters: Iterable[int]) -> list[int]:
        """State sequence visited on ``letters``, starting with ``init``."""
        q = self.init
        out = [q]
        for a in letters:
            q = self.step(q, a)
            out.append(q)
        return out

    def accepts(self, letters: Iterable[int]) -> bool:
        return all(q in self.safe for q in self.run(letters))

    def reachable(self) -> set[int]:
        seen = {self.init}
        todo = [self.init]
        while todo:
            q = todo.pop()
            for t in self.delta[q]:
                if t is not None and t not in seen:
                    seen.add(t)
                    todo.append(t)
        return seen


def trivial(signature: SignalSignature) -> SafetyAutomaton:
    """One safe state looping on every letter (the neutral element of ``product``)."""
    return SafetyAutomaton(signature, ("true",), 0, ((0,) * signature.n_letters,), frozenset({0}))


# -- parsing -----------------------------------------------------------------

@dataclass
class _Line:
    number: int
    text: str  # comment stripped, right-stripped


def _lines(text: str) -> list[_Line]:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].rstrip()
        if body.strip():
            out.append(_Line(n, body))
    return out


def _names(ln: _Line, start: int) -> list[str]:
    names = []
    rest = ln.text[start:]
    pos = start
    for tok in rest.split():
        col = ln.text.index(tok, pos)
        if not IDENT.fullmatch(tok):
            raise FormatError(f"invalid name {tok!r}", ln.number, col + 1)
        names.append(tok)
        pos = col + len(tok)
    return names


@dataclass
class _Source:
    headers: dict[str, tuple[_Line, list[str]]]
    edges: list[tuple[_Line, str, str, str, int, str | None, int]]


def _split_source(text: str, allow_emit: bool) -> _Source:
    headers: dict[str, tuple[_Line, list[str]]] = {}
    edges = []
    for ln in _lines(text):
        stripped = ln.text.lstrip()
        indent = len(ln.text) - len(stripped)
        key = stripped.split(":", 1)[0].strip()
        if key in _HEADERS and "->" not in stripped.split(":", 1)[0]:
            if key in headers:
                raise FormatError(f"duplicate '{key}:' line", ln.number, indent + 1)
            colon = ln.text.index(":")
            headers[key] = (ln, _names(ln, colon + 1))
            continue
        if "->" not in stripped:
            raise FormatError("expected a header ('inputs:', 'states:', ...) or a transition 'A -> B : guard'",
                              ln.number, indent + 1)
        arrow = ln.text.index("->")
        src = ln.text[:arrow].strip()
        colon = ln.text.find(":", arrow)
        if colon < 0:
            raise FormatError("missing ':' before the guard", ln.number, len(ln.text) + 1)
        dst = ln.text[arrow + 2:colon].strip()
        for name, col in ((src, indent), (dst, arrow + 2)):
            if not IDENT.fullmatch(name):
                raise FormatError(f"invalid state name {name!r}", ln.number, col + 1)
        guard = ln.text[colon + 1:]
        emit = None
        emit_col = 0
        k = guard.find("emit:")
        if k >= 0:
            if not allow_emit:
                raise FormatError("'emit:' is only allowed in Mealy machine files", ln.number, colon + 2 + k)
            emit = guard[k + 5:]
            emit_col = colon + 1 + k + 5
            guard = guard[:k]
        elif allow_emit:
            raise FormatError("transition is missing an 'emit:' clause", ln.number, len(ln.text) + 1)
        edges.append((ln, src, dst, guard, colon + 1, emit, emit_col))
    return _Source(headers, edges)


def _declared(src: _Source, key: str, required: bool) -> list[str] | None:
    if key not in src.headers:
        if required:
            raise FormatError(f"missing '{key}:' line", 1)
        return None
    return src.headers[key][1]


def _signature_of(src: _Source, signature: SignalSignature | None) -> SignalSignature:
    ins = _declared(src, "inputs", False)
    outs = _declared(src, "outputs", False)
    if signature is not None:
        if (ins is not None and tuple(ins) != signature.inputs) or (
                outs is not None and tuple(outs) != signature.outputs):
            ln = src.headers.get("inputs", src.headers.get("outputs"))[0]
            raise SignatureMismatch(f"line {ln.number}: declared signals differ from the expected signature")
        return signature
    try:
        return SignalSignature(tuple(ins or ()), tuple(outs or ()))
    except ValueError as e:
        ln = (src.headers.get("inputs") or src.headers.get("outputs") or (_Line(1, ""), []))[0]
        raise FormatError(str(e), ln.number) from None


def _state_table(src: _Source) -> tuple[list[str], dict[str, int], int]:
    states = _declared(src, "states", True)
    ln = src.headers["states"][0]
    if not states:
        raise FormatError("at least one state is required", ln.number)
    if len(set(states)) != len(states):
        raise FormatError("duplicate state names", ln.number)
    index = {n: j for j, n in enumerate(states)}
    init_names = _declared(src, "init", True)
    init_ln = src.headers["init"][0]
    if len(init_names) != 1:
        raise FormatError("'init:' needs exactly one state", init_ln.number)
    if init_names[0] not in index:
        raise FormatError(f"unknown init state {init_names[0]!r}", init_ln.number)
    return states, index, index[init_names[0]]


def _state_ref(index: dict[str, int], name: str, ln: _Line) -> int:
    if name not in index:
        raise FormatError(f"undeclared state {name!r}", ln.number, ln.text.find(name) + 1)
    return index[name]


def parse_automaton(text: str, signature: SignalSignature | None = None,
                    complete_missing: bool = True) -> SafetyAutomaton:
    """Parse the automaton text format.

    With ``complete_missing`` (the default) uncovered letters go to the
    implicit trap; otherwise they are left undefined.
    """
    src = _split_source(text, allow_emit=False)
    sig = _signature_of(src, signature)
    states, index, init = _state_table(src)
    if TRAP in index:
        raise FormatError(f"state name {TRAP!r} is reserved", src.headers["states"][0].number)
    safe_names = _declared(src, "safe", False)
    if safe_names is None:
        safe = frozenset(range(len(states)))
    else:
        safe = frozenset(_state_ref(index, n, src.headers["safe"][0]) for n in safe_names)

    n = sig.n_letters
    delta: list[list[int | None]] = [[None] * n for _ in states]
    for ln, s, d, guard, gcol, _, _ in src.edges:
        q = _state_ref(index, s, ln)
        t = _state_ref(index, d, ln)
        mask = guard_mask(guard, sig.names, ln.number, gcol)
        row = delta[q]
        for a in iter_mask(mask):
            if row[a] is not None:
                raise NondeterminismError(s, format_letter(sig, a), ln.number, gcol + 1)
            row[a] = t
    aut = SafetyAutomaton(sig, tuple(states), init, tuple(map(tuple, delta)), safe)
    return complete(aut) if complete_missing else aut


def format_automaton(aut: SafetyAutomaton) -> str:
    """Render in the text format; one transition line per (source, target) pair."""
    from .signals import mask_to_expr

    sig = aut.signature
    names = [n for n in aut.states if n != TRAP]
    lines = [f"inputs: {' '.join(sig.inputs)}".rstrip(),
             f"outputs: {' '.join(sig.outputs)}".rstrip(),
             f"states: {' '.join(names)}",
             f"init: {aut.states[aut.init]}",
             f"safe: {' '.join(aut.states[q] for q in sorted(aut.safe) if aut.states[q] != TRAP)}".rstrip()]
    for q, row in enumerate(aut.delta):
        if aut.states[q] == TRAP:
            continue
        masks: dict[int, int] = {}
        for a, t in enumerate(row):
            if t is not None and aut.states[t] != TRAP:
                masks[t] = masks.get(t, 0) | (1 << a)
        for t in sorted(masks):
            lines.append(f"{aut.states[q]} -> {aut.states[t]} : {mask_to_expr(masks[t], sig.names)}")
    return "\n".join(lines) + "\n"


# -- operations --------------------------------------------------------------

def complete(aut: SafetyAutomaton) -> SafetyAutomaton:
    """Route every missing edge to a fresh absorbing unsafe trap; idempotent."""
    if aut.is_complete:
        return aut
    trap = aut.trap
    states = aut.states
    if trap is None:
        trap = len(states)
        states = states + (TRAP,)
    n = aut.signature.n_letters
    delta = [tuple(trap if t is None else t for t in row) for row in aut.delta]
    if trap == len(aut.states):
        delta.append((trap,) * n)
    safe = aut.safe - {trap}
    return SafetyAutomaton(aut.signature, states, aut.init, tuple(delta), frozenset(safe))


def product(auts: Sequence[SafetyAutomaton]) -> SafetyAutomaton:
    """Synchronous product restricted to reachable state tuples.

    A product state is safe iff every component is safe.  A one-element
    product keeps the component's state names.
    """
    if not auts:
        raise ValueError("product of an empty list")
    sig = auts[0].signature
    for a in auts[1:]:
        if a.signature != sig:
            raise SignatureMismatch(f"signature {a.signature} differs from {sig}")
    for a in auts:
        if not a.is_complete:
            raise ValueError("product requires complete automata")
    n = sig.n_letters
    start = tuple(a.init for a in auts)
    index = {start: 0}
    order = [start]
    delta: list[tuple[int, ...]] = []
    i = 0
    while i < len(order):
        cur = order[i]
        row = []
        for letter in range(n):
            nxt = tuple(a.delta[q][letter] for a, q in zip(auts, cur))
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(order)
                order.append(nxt)
            row.append(j)
        delta.append(tuple(row))
        i += 1
    if len(auts) == 1:
        names = tuple(auts[0].states[t[0]] for t in order)
    else:
        names = tuple(",".join(a.states[q] for a, q in zip(auts, t)) for t in order)
    safe = frozenset(j for j, t in enumerate(order) if all(q in a.safe for a, q in zip(auts, t)))
    return SafetyAutomaton(sig, names, 0, tuple(delta), safe)


@dataclass
class Diagnostics:
    n_states: int
    n_edges: int
    complete: bool
    deterministic: bool
    missing: list[tuple[str, str]]
    reachable_states: int
    unsafe_reachable: bool
    has_trap: bool
    n_inputs: int
    n_outputs: int

    def messages(self) -> list[str]:
        out = []
        if self.complete:
            out.append(f"complete, deterministic, {self.n_states} states")
        else:
            shown = ", ".join(f"state {s} missing letter {a}" for s, a in self.missing[:5])
            more = f" (+{len(self.missing) - 5} more)" if len(self.missing) > 5 else ""
            out.append(f"incomplete: {shown}{more}")
        if not self.unsafe_reachable:
            out.append("unsafe states unreachable")
        return out

    def summary(self) -> str:
        trap = " (incl. trap)" if self.has_trap else ""
        i = f"{self.n_inputs} input" + ("" if self.n_inputs == 1 else "s")
        o = f"{self.n_outputs} output" + ("" if self.n_outputs == 1 else "s")
        return f"{self.n_states} states{trap}, {i}, {o}"


def validate(aut: SafetyAutomaton) -> Diagnostics:
    sig = aut.signature
    missing = [(aut.states[q], format_letter(sig, a))
               for q, row in enumerate(aut.delta) for a, t in enumerate(row) if t is None]
    reach = aut.reachable()
    return Diagnostics(
        n_states=aut.n_states,
        n_edges=sum(t is not None for row in aut.delta for t in row),
        complete=not missing,
        deterministic=True,  # the table representation admits one successor per letter
        missing=missing,
        reachable_states=len(reach),
        unsafe_reachable=any(q not in aut.safe for q in reach),
        has_trap=aut.trap is not None,
        n_inputs=sig.n_in,
        n_outputs=sig.n_out,
    )


def canonical_form(aut: SafetyAutomaton) -> tuple:
    """Relabel the reachable part in breadth-first, letter order.

    Two deterministic automata with the same signature are isomorphic on
    their reachable parts iff their canonical forms are equal.
    """
    index = {aut.init: 0}
    order = [aut.init]
    rows = []
    queue = deque([aut.init])
    while queue:
        q = queue.popleft()
        row = []
        for t in aut.delta[q]:
            if t is None:
                row.append(None)
                continue
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
            row.append(index[t])
        rows.append(tuple(row))
    safe = tuple(q in aut.safe for q in order)
    return aut.signature, tuple(rows), safe


def isomorphic(a: SafetyAutomaton, b: SafetyAutomaton) -> bool:
    return canonical_form(a) == canonical_form(b)
