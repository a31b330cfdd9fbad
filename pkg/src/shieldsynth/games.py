"""Two-player alternating games on explicit arenas.

In every state the environment picks a letter ``e`` first, then the system
picks ``s``; the successor is ``delta[g][e][s]``.  Safety and Büchi
objectives are solved by controllable-predecessor fixpoints.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SafeSet:
    states: frozenset[int]


@dataclass(frozen=True)
class BuchiSet:
    states: frozenset[int]


@dataclass(frozen=True)
class GameArena:
    num_states: int
    init: int
    num_env: int
    num_sys: int
    delta: Sequence[Sequence[Sequence[int]]]
    condition: SafeSet | BuchiSet
    labels: Optional[Sequence[str]] = None
    # product coordinates of each state, when the arena is a product
    components: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        if not 0 <= self.init < self.num_states:
            raise ValueError("init out of range")
        if len(self.delta) != self.num_states:
            raise ValueError("delta must have one row per state")

    def label(self, g: int) -> str:
        return self.labels[g] if self.labels else str(g)


@dataclass(frozen=True)
class StrategyRelation:
    """``allowed[g][e]`` lists the winning system letters (sorted) for ``g`` in the domain."""

    allowed: dict[int, tuple[tuple[int, ...], ...]]

    def moves(self, g: int, e: int) -> tuple[int, ...]:
        return self.allowed[g][e]

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.allowed)


@dataclass(frozen=True)
class SafetySolution:
    winning: frozenset[int]
    strategy: StrategyRelation
    iterations: int


@dataclass(frozen=True)
class BuchiSolution:
    winning: frozenset[int]
    strategy: StrategyRelation
    inner_iterations: int
    outer_iterations: int
    rank: dict[int, int]


def cpre(arena: GameArena, target: set[int] | frozenset[int],
         candidates: Iterable[int] | None = None) -> set[int]:
    """States from which the system can force the next state into ``target``."""
    states = range(arena.num_states) if candidates is None else candidates
    out = set()
    for g in states:
        if all(any(t in target for t in moves) for moves in arena.delta[g]):
            out.add(g)
    return out


def solve_safety(arena: GameArena) -> SafetySolution:
    """Greatest fixpoint ``W = F ∩ CPre(W)`` and the maximal winning relation."""
    if not isinstance(arena.condition, SafeSet):
        raise TypeError("solve_safety needs a SafeSet condition")
    win = set(arena.condition.states)
    iterations = 0
    while True:
        iterations += 1
        nxt = cpre(arena, win, win)
        if nxt == win:
            break
        win = nxt
    logger.debug("safety fixpoint: %d states winning after %d iterations", len(win), iterations)
    allowed = {
        g: tuple(tuple(s for s, t in enumerate(moves) if t in win) for moves in arena.delta[g])
        for g in sorted(win)
    }
    return SafetySolution(frozenset(win), StrategyRelation(allowed), iterations)


def _recurrence(arena: GameArena, accept: frozenset[int], outer: set[int]):
    """Inner least fixpoint ``μY. (B ∩ CPre(Z)) ∪ CPre(Y)`` with attractor ranks."""
    base = accept & cpre(arena, outer)
    rank = {g: 1 for g in base}
    reached = set(base)
    depth = 1 if base else 0
    while True:
        new = cpre(arena, reached) - reached
        if not new:
            break
        depth += 1
        for g in new:
            rank[g] = depth
        reached |= new
    return reached, rank, depth


def solve_buchi(arena: GameArena) -> BuchiSolution:
    """Nested fixpoint ``νZ. μY. (B ∩ CPre(Z)) ∪ CPre(Y)``.

    The strategy allows, in accepting states, every move that stays in the
    winning region, and elsewhere only moves that strictly decrease the
    attractor rank.  ``inner_iterations`` is the rank depth of the last
    inner fixpoint (0 when the region is empty).
    """
    if not isinstance(arena.condition, BuchiSet):
        raise TypeError("solve_buchi needs a BuchiSet condition")
    accept = frozenset(arena.condition.states)
    z = set(range(arena.num_states))
    outer = 0
    while True:
        outer += 1
        y, rank, depth = _recurrence(arena, accept, z)
        if y == z:
            break
        z = y
    logger.debug("buchi fixpoint: %d states winning, %d outer, depth %d", len(z), outer, depth)
    allowed = {}
    for g in sorted(z):
        r = rank[g]
        row = []
        for moves in arena.delta[g]:
            if r == 1:
                row.append(tuple(s for s, t in enumerate(moves) if t in z))
            else:
                row.append(tuple(s for s, t in enumerate(moves) if t in rank and rank[t] < r))
        allowed[g] = tuple(row)
    return BuchiSolution(frozenset(z), StrategyRelation(allowed), depth, outer, rank)


def determinize(strategy: StrategyRelation,
                prefer: Callable[[int, int], Optional[int]] | None = None) -> dict[int, tuple[int, ...]]:
    """Pick one system letter per ``(g, e)``.

    ``prefer(g, e)`` is used when it is allowed; otherwise the least allowed
    letter is chosen.  Returns ``{g: (s for each e)}``.
    """
    out = {}
    for g, row in strategy.allowed.items():
        picks = []
        for e, moves in enumerate(row):
            if not moves:
                raise ValueError(f"empty strategy entry for state {g}, env letter {e}")
            p = prefer(g, e) if prefer is not None else None
            picks.append(p if p is not None and p in moves else moves[0])
        out[g] = tuple(picks)
    return out


def to_dot(arena: GameArena, name: str = "game") -> str:
    """Graphviz rendering; edges are grouped per target and labelled ``env/sys``."""
    good = arena.condition.states
    shape = "doublecircle" if isinstance(arena.condition, BuchiSet) else "circle"
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for g in range(arena.num_states):
        attrs = [f'label="{arena.label(g)}"']
        attrs.append(f"shape={shape}" if g in good else "shape=box")
        if g == arena.init:
            attrs.append("penwidth=2")
        lines.append(f"  n{g} [{', '.join(attrs)}];")
    for g, row in enumerate(arena.delta):
        by_target: dict[int, list[str]] = {}
        for e, moves in enumerate(row):
            for s, t in enumerate(moves):
                by_target.setdefault(t, []).append(f"{e}/{s}")
        for t in sorted(by_target):
            lines.append(f'  n{g} -> n{t} [label="{" ".join(by_target[t])}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
