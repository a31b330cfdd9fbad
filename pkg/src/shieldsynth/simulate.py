"""Composition, trace replay, trace evaluation and explicit model checking."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .automata import SafetyAutomaton, SignatureMismatch, complete
from .mealy import MalformedLetter, MealyMachine
from .monitors import MonitorMode, MonitorState, build_violation_monitor
from .signals import FormatError, SignalSignature, bits


def projection(src: SignalSignature, names: Sequence[str]) -> tuple[int, ...]:
    """Table mapping every letter of ``src`` to the letter over ``names``."""
    where = []
    for n in names:
        if n not in src.names:
            raise SignatureMismatch(f"signal {n!r} is not provided")
        where.append(src.width - 1 - src.names.index(n))
    table = []
    for letter in range(src.n_letters):
        v = 0
        for shift in where:
            v = (v << 1) | ((letter >> shift) & 1)
        table.append(v)
    return tuple(table)


def _shield_view(design_sig: SignalSignature, shield_sig: SignalSignature) -> tuple[int, ...]:
    if shield_sig.n_out != design_sig.n_out:
        raise SignatureMismatch(
            f"shield writes {shield_sig.n_out} signals, the design has {design_sig.n_out} outputs")
    return projection(design_sig, shield_sig.inputs)


def _spec_view(sig: SignalSignature, spec: SafetyAutomaton) -> tuple[int, ...]:
    """Project machine letters onto ``spec``; its inputs and outputs must be the machine's."""
    ss = spec.signature
    if not set(ss.inputs) <= set(sig.inputs) or ss.outputs != sig.outputs:
        raise SignatureMismatch("specification signals do not match the machine's inputs and outputs")
    return projection(sig, ss.names)


def compose(design: MealyMachine, shield: MealyMachine) -> MealyMachine:
    """Serial composition: the shield reads the design's input and output.

    The shield's inputs are matched to the design's signals by name; its
    outputs replace the design's outputs in order.  The result keeps the
    design's signature and contains only reachable state pairs, named
    ``design_state|shield_state``.
    """
    sig = design.signature
    view = _shield_view(sig, shield.signature)
    init = (design.init, shield.init)
    index = {init: 0}
    order = [init]
    delta, out = [], []
    i = 0
    while i < len(order):
        q, s = order[i]
        row, orow = [], []
        for a in range(sig.n_input_letters):
            q2, o = design.delta[q][a], design.out[q][a]
            letter = view[sig.join(a, o)]
            nxt = (q2, shield.delta[s][letter])
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(order)
                order.append(nxt)
            row.append(j)
            orow.append(shield.out[s][letter])
        delta.append(tuple(row))
        out.append(tuple(orow))
        i += 1
    names = tuple(f"{design.states[q]}|{shield.states[s]}" for q, s in order)
    return MealyMachine(sig, names, 0, tuple(delta), tuple(out))


def chain_shields(first: MealyMachine, second: MealyMachine) -> MealyMachine:
    """One shield that behaves like ``first`` followed by ``second``."""
    s1, s2 = first.signature, second.signature
    if s1.n_in != s2.n_in or s1.n_out != s2.n_out:
        raise SignatureMismatch("shields must have the same shape to be chained")
    n_out = s1.n_out
    out_mask = (1 << n_out) - 1
    init = (first.init, second.init)
    index = {init: 0}
    order = [init]
    delta, out = [], []
    i = 0
    while i < len(order):
        a, b = order[i]
        row, orow = [], []
        for letter in range(s1.n_input_letters):
            o1 = first.out[a][letter]
            letter2 = (letter & ~out_mask) | o1
            nxt = (first.delta[a][letter], second.delta[b][letter2])
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(order)
                order.append(nxt)
            row.append(j)
            orow.append(second.out[b][letter2])
        delta.append(tuple(row))
        out.append(tuple(orow))
        i += 1
    names = tuple(f"{first.states[a]}|{second.states[b]}" for a, b in order)
    return MealyMachine(s1, names, 0, tuple(delta), tuple(out))


def run_trace(machine: MealyMachine, inputs: Iterable[int]) -> list[int]:
    return machine.run(inputs)


@dataclass(frozen=True)
class TraceStep:
    input: int
    design_out: int
    shield_out: int
    deviated: bool
    monitor: MonitorState   # violation monitor before the step
    violation: bool         # the design's letter is a violation in this step
    spec_state: int         # specification state after the shield's letter


@dataclass
class TraceReport:
    signature: SignalSignature
    recovery_states: tuple[str, ...]   # names used in monitor labels
    spec_states: tuple[str, ...]
    steps: list[TraceStep] = field(default_factory=list)
    fail_safe_entered: bool = False
    illegal_deviation: bool = False
    spec_violated_by_composition: bool = False

    @property
    def deviations(self) -> list[int]:
        return [j for j, s in enumerate(self.steps) if s.deviated]

    @property
    def violations(self) -> list[int]:
        return [j for j, s in enumerate(self.steps) if s.violation]

    def csv_lines(self) -> list[str]:
        sig, names = self.signature, self.recovery_states
        lines = ["step,design_out,shield_out,deviated,monitor"]
        for j, s in enumerate(self.steps):
            lines.append(f"{j},{bits(s.design_out, sig.n_out)},{bits(s.shield_out, sig.n_out)},"
                         f"{int(s.deviated)},{s.monitor.label(names).replace(',', ' ')}")
        return lines

    def table(self) -> str:
        """Aligned table: one row per quantity, one column per step."""
        sig, names = self.signature, self.recovery_states
        rows = [("step", [str(j) for j in range(len(self.steps))])]
        for k, name in enumerate(sig.inputs):
            rows.append((name, [str((s.input >> (sig.n_in - 1 - k)) & 1) for s in self.steps]))
        rows.append(("design", [bits(s.design_out, sig.n_out) + ("!" if s.violation else "")
                                for s in self.steps]))
        rows.append(("shield", [bits(s.shield_out, sig.n_out) for s in self.steps]))
        rows.append(("deviated", ["*" if s.deviated else "." for s in self.steps]))
        rows.append(("monitor", [_subset_label(s.monitor, names) for s in self.steps]))
        rows.append(("spec", [self.spec_states[s.spec_state] for s in self.steps]))
        head = max(len(r[0]) for r in rows)
        widths = [max(len(r[1][j]) for r in rows) for j in range(len(self.steps))]
        lines = []
        for label, cells in rows:
            parts = [label.ljust(head)] + [c.rjust(w) for c, w in zip(cells, widths)]
            lines.append("  ".join(parts).rstrip())
        verdict = []
        if self.fail_safe_entered:
            verdict.append("fail-safe entered")
        if self.illegal_deviation:
            verdict.append("illegal deviation")
        if self.spec_violated_by_composition:
            verdict.append("specification violated by the composition")
        lines.append("verdict: " + (", ".join(verdict) if verdict else "ok"))
        return "\n".join(lines) + "\n"


def _subset_label(st: MonitorState, names: Sequence[str]) -> str:
    if st.fail_safe:
        return "uE"
    return ",".join(names[q] for q in sorted(st.subset))


def evaluate_trace(design: MealyMachine, shield: MealyMachine, spec_r: SafetyAutomaton, k: int,
                   inputs: Sequence[int], mode: MonitorMode = MonitorMode.FAIL_SAFE,
                   spec: SafetyAutomaton | None = None) -> TraceReport:
    """Run design and shield in lockstep and apply the two-valued distance.

    The violation monitor for ``spec_r`` reads the design's letters.  A
    deviation is legal only if the monitor's next state has a positive
    counter or is the fail-safe state.  ``spec`` (default ``spec_r``) is
    checked against the composition's letters.
    """
    sig = design.signature
    view = _shield_view(sig, shield.signature)
    spec_r = complete(spec_r)
    spec = complete(spec) if spec is not None else spec_r
    r_view = _spec_view(sig, spec_r)
    q_view = _spec_view(sig, spec)
    U = build_violation_monitor(spec_r, k, mode)
    report = TraceReport(sig, spec_r.states, spec.states)
    q, s, u, p = design.init, shield.init, U.states[U.init], spec.init
    for a in inputs:
        if not 0 <= a < sig.n_input_letters:
            raise MalformedLetter(f"input letter {a} out of range")
        q2, o = design.step(q, a)
        letter = view[sig.join(a, o)]
        s2, o2 = shield.delta[s][letter], shield.out[s][letter]
        u2, bad = U.step(u, r_view[sig.join(a, o)])
        p2 = spec.delta[p][q_view[sig.join(a, o2)]]
        deviated = o != o2
        report.steps.append(TraceStep(a, o, o2, deviated, u, bad, p2))
        if u2.fail_safe:
            report.fail_safe_entered = True
        if deviated and not u2.fail_safe and u2.counter == 0:
            report.illegal_deviation = True
        if p2 not in spec.safe:
            report.spec_violated_by_composition = True
        q, s, u, p = q2, s2, u2, p2
    return report


@dataclass(frozen=True)
class Verdict:
    safe: bool
    # (input letter, output letter) per step; the last step enters an unsafe state
    counterexample: tuple[tuple[int, int], ...] | None = None


def model_check_safety(machine: MealyMachine, spec: SafetyAutomaton) -> Verdict:
    """Breadth-first reachability on ``machine x spec``; shortest counterexample."""
    sig = machine.signature
    spec = complete(spec)
    view = _spec_view(sig, spec)
    init = (machine.init, spec.init)
    if spec.init not in spec.safe:
        return Verdict(False, ())
    parent: dict[tuple[int, int], tuple | None] = {init: None}
    queue = deque([init])
    while queue:
        node = queue.popleft()
        q, p = node
        for a in range(sig.n_input_letters):
            o = machine.out[q][a]
            nxt = (machine.delta[q][a], spec.delta[p][view[sig.join(a, o)]])
            if nxt in parent:
                continue
            parent[nxt] = (node, a, o)
            if nxt[1] not in spec.safe:
                return Verdict(False, _path(parent, nxt))
            queue.append(nxt)
    return Verdict(True)


def _path(parent, node) -> tuple[tuple[int, int], ...]:
    steps = []
    while parent[node] is not None:
        node, a, o = parent[node]
        steps.append((a, o))
    return tuple(reversed(steps))


def parse_trace(text: str, signature: SignalSignature) -> list[int]:
    """One step per line, ``name=0`` or ``name=1`` for every input signal."""
    letters = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        values = {}
        for item in line.split():
            name, eq, val = item.partition("=")
            if not eq or val not in ("0", "1"):
                raise FormatError(f"expected name=0 or name=1, got {item!r}", number)
            if name not in signature.inputs:
                raise FormatError(f"{name!r} is not an input signal", number)
            if name in values:
                raise FormatError(f"{name!r} assigned twice", number)
            values[name] = val == "1"
        missing = [n for n in signature.inputs if n not in values]
        if missing:
            raise FormatError(f"missing value for {', '.join(missing)}", number)
        letter = 0
        for name in signature.inputs:
            letter = (letter << 1) | values[name]
        letters.append(letter)
    return letters


def format_counterexample(sig: SignalSignature, steps: Sequence[tuple[int, int]]) -> list[str]:
    lines = []
    for j, (a, o) in enumerate(steps):
        ins = " ".join(f"{n}={(a >> (sig.n_in - 1 - k)) & 1}" for k, n in enumerate(sig.inputs))
        outs = " ".join(f"{n}={(o >> (sig.n_out - 1 - k)) & 1}" for k, n in enumerate(sig.outputs))
        lines.append(f"{j}: {ins} / {outs}".replace(":  /", ": /"))
    return lines

