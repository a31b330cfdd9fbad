"""Monitors composed into the shield game.

* the violation monitor tracks the set of specification states the design
  may still be in, a recovery counter, and an absorbing fail-safe state;
* the validity monitor remembers whether the design has left the winning
  region of the properties it is assumed to satisfy;
* the deviation monitor remembers whether the shield changed the design's
  output in the previous step.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .automata import SafetyAutomaton
from .games import GameArena, SafeSet, solve_safety


class MonitorMode(enum.Enum):
    FAIL_SAFE = "failsafe"      # second violation inside a recovery period -> fail-safe
    RESET = "reset"             # second violation restarts the recovery period
    ALL_STATES = "allstates"    # after a violation, track every winning state


class UnrealizableSpecError(ValueError):
    """The initial specification state is outside the specification's winning region."""


def spec_game(spec: SafetyAutomaton) -> GameArena:
    """Read ``spec`` as a game: environment picks inputs, system picks outputs."""
    sig = spec.signature
    n_out = sig.n_output_letters
    delta = tuple(
        tuple(tuple(row[sig.join(i, o)] for o in range(n_out)) for i in range(sig.n_input_letters))
        for row in spec.delta
    )
    return GameArena(spec.n_states, spec.init, sig.n_input_letters, n_out, delta,
                     SafeSet(frozenset(spec.safe)), labels=spec.states)


def winning_region_of_spec(spec: SafetyAutomaton) -> frozenset[int]:
    if not spec.is_complete:
        raise ValueError("winning_region_of_spec requires a complete automaton")
    return solve_safety(spec_game(spec)).winning


@dataclass(frozen=True)
class MonitorState:
    """Tracked specification states plus counter, or the fail-safe state."""

    subset: frozenset[int] = frozenset()
    counter: int = 0
    fail_safe: bool = False

    def label(self, names=None) -> str:
        if self.fail_safe:
            return "uE"
        parts = [names[q] if names else str(q) for q in sorted(self.subset)]
        return "{" + ",".join(parts) + f"}}:{self.counter}"


FAIL_SAFE_STATE = MonitorState(fail_safe=True)


@dataclass(frozen=True)
class ViolationMonitor:
    """Reachable part of the violation monitor.

    In stabilizing mode the counter ranges over {0, 1, 2} and every letter is
    paired with the shield's auxiliary recovery-done flag: the table index is
    ``(letter << 1) | flag``.
    """

    spec: SafetyAutomaton
    winning: frozenset[int]
    k: int
    mode: MonitorMode
    stabilizing: bool
    states: tuple[MonitorState, ...]
    delta: tuple[tuple[int, ...], ...]
    violation: tuple[tuple[bool, ...], ...]
    init: int = 0

    def index(self, state: MonitorState) -> int:
        return self.states.index(state)

    def step(self, state: MonitorState, letter: int, done: bool = False) -> tuple[MonitorState, bool]:
        return _step(self.spec, self.winning, self.k, self.mode, self.stabilizing, state, letter, done)

    def counter_zero(self, u: int) -> bool:
        s = self.states[u]
        return not s.fail_safe and s.counter == 0

    def table(self) -> dict[tuple[frozenset[int], int], tuple[frozenset[int] | None, bool]]:
        """``{(subset, letter): (next subset or None for fail-safe, violation)}``, ignoring counters."""
        out = {}
        for u, st in enumerate(self.states):
            if st.fail_safe:
                continue
            for a in range(self.spec.signature.n_letters):
                col = (a << 1) if self.stabilizing else a
                nxt = self.states[self.delta[u][col]]
                out[(st.subset, a)] = (None if nxt.fail_safe else nxt.subset, self.violation[u][col])
        return out

    def to_dot(self) -> str:
        names = self.spec.states
        lines = ["digraph violation_monitor {", "  rankdir=LR;"]
        for u, st in enumerate(self.states):
            shape = "doubleoctagon" if st.fail_safe else "ellipse"
            lines.append(f'  u{u} [label="{st.label(names)}", shape={shape}];')
        for u, row in enumerate(self.delta):
            by_target: dict[tuple[int, bool], list[str]] = {}
            for col, t in enumerate(row):
                by_target.setdefault((t, self.violation[u][col]), []).append(str(col))
            for (t, bad), cols in sorted(by_target.items()):
                style = ", color=red, style=dashed" if bad else ""
                lines.append(f'  u{u} -> u{t} [label="{" ".join(cols)}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _step(spec: SafetyAutomaton, win: frozenset[int], k: int, mode: MonitorMode,
          stabilizing: bool, st: MonitorState, letter: int, done: bool) -> tuple[MonitorState, bool]:
    if st.fail_safe:
        return st, False
    delta = spec.delta
    succ = frozenset(t for r in st.subset if (t := delta[r][letter]) in win)
    top = 2 if stabilizing else k
    if succ:
        c = st.counter
        if stabilizing:
            nc = 1 if (c == 2 and done) else (2 if c == 2 else 0)
        else:
            nc = c - 1 if c > 0 else 0
        return MonitorState(succ, nc), False
    # violation: every tracked state leaves the winning region
    if st.counter > 1 and mode is not MonitorMode.RESET:
        return FAIL_SAFE_STATE, True
    if mode is MonitorMode.ALL_STATES:
        guess = win
    else:
        sig = spec.signature
        i, _ = sig.split(letter)
        base = i << sig.n_out
        guess = frozenset(t for r in st.subset for o in range(sig.n_output_letters)
                          if (t := delta[r][base | o]) in win)
    return MonitorState(guess, top), True


def build_violation_monitor(spec_r: SafetyAutomaton, k: int,
                            mode: MonitorMode = MonitorMode.FAIL_SAFE,
                            stabilizing: bool = False) -> ViolationMonitor:
    """Construct the reachable violation monitor for ``spec_r``.

    Transitions, for a tracked state ``(u, c)`` and letter ``a``:

    * fail-safe is absorbing;
    * if some state of ``u`` has a winning successor under ``a``, track those
      successors and decrement the counter;
    * otherwise (a violation) with ``c > 1``: enter fail-safe (``RESET`` mode
      restarts the counter instead);
    * otherwise track every winning successor reachable under the same input
      with any output (``ALL_STATES``: the whole winning region) and set the
      counter to ``k``.

    In stabilizing mode the counter is 2 during recovery and drops to 1 only
    when the shield raises its recovery-done flag; a violation takes
    precedence over the flag.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not spec_r.is_complete:
        raise ValueError("the specification must be complete")
    win = winning_region_of_spec(spec_r)
    if spec_r.init not in win:
        raise UnrealizableSpecError("initial specification state is not winning")
    n = spec_r.signature.n_letters
    init = MonitorState(frozenset({spec_r.init}), 0)
    index = {init: 0}
    states = [init]
    delta, viol = [], []
    queue = deque([init])
    flags = (False, True) if stabilizing else (False,)
    while queue:
        st = queue.popleft()
        row, vrow = [], []
        for a in range(n):
            for done in flags:
                nxt, bad = _step(spec_r, win, k, mode, stabilizing, st, a, done)
                j = index.get(nxt)
                if j is None:
                    j = index[nxt] = len(states)
                    states.append(nxt)
                    queue.append(nxt)
                row.append(j)
                vrow.append(bad)
        delta.append(tuple(row))
        viol.append(tuple(vrow))
    return ViolationMonitor(spec_r, win, k, mode, stabilizing, tuple(states), tuple(delta), tuple(viol))


@dataclass(frozen=True)
class ValidityMonitor:
    """States are ``(left_winning_region, v)``; safe iff the flag is unset."""

    spec: SafetyAutomaton
    winning: frozenset[int]
    states: tuple[tuple[bool, int], ...]
    delta: tuple[tuple[int, ...], ...]
    init: int = 0

    @property
    def safe(self) -> frozenset[int]:
        return frozenset(j for j, (b, _) in enumerate(self.states) if not b)

    def is_safe(self, j: int) -> bool:
        return not self.states[j][0]


def build_validity_monitor(spec_v: SafetyAutomaton) -> ValidityMonitor:
    if not spec_v.is_complete:
        raise ValueError("the specification must be complete")
    win = winning_region_of_spec(spec_v)
    n = spec_v.signature.n_letters
    init = (False, spec_v.init)
    index = {init: 0}
    states = [init]
    delta = []
    i = 0
    while i < len(states):
        b, v = states[i]
        row = []
        for a in range(n):
            v2 = spec_v.delta[v][a]
            nxt = (b or v2 not in win, v2)
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(states)
                states.append(nxt)
            row.append(j)
        delta.append(tuple(row))
        i += 1
    return ValidityMonitor(spec_v, win, tuple(states), tuple(delta))


@dataclass(frozen=True)
class DeviationMonitor:
    """``t0`` (index 0) after equal outputs, ``t1`` (index 1) after a deviation."""

    n_output_letters: int
    states: tuple[str, str] = ("t0", "t1")
    init: int = 0

    def step(self, t: int, design_out: int, shield_out: int) -> int:
        return 0 if design_out == shield_out else 1


def build_deviation_monitor(signature) -> DeviationMonitor:
    return DeviationMonitor(signature.n_output_letters)
