"""Shield synthesis: product game, k search, Büchi variant, Mealy extraction."""
from __future__ import annotations

import enum
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .automata import SafetyAutomaton, SignatureMismatch, complete, product, trivial
from .games import BuchiSet, GameArena, SafeSet, determinize, solve_buchi, solve_safety
from .mealy import MealyMachine, format_mealy, to_dot as mealy_to_dot
from .monitors import (
    DeviationMonitor,
    MonitorMode,
    ValidityMonitor,
    ViolationMonitor,
    build_deviation_monitor,
    build_validity_monitor,
    build_violation_monitor,
    winning_region_of_spec,
)
from .signals import SignalSignature

logger = logging.getLogger(__name__)


class Engine(enum.Enum):
    KSAFETY = "ksafety"
    BUCHI = "buchi"


@dataclass(frozen=True)
class SynthesisConfig:
    k_max: int = 10
    mode: MonitorMode = MonitorMode.FAIL_SAFE
    engine: Engine = Engine.KSAFETY
    use_validity: bool = True

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass
class SynthesisStats:
    spec_states: int = 0          # |Q|, product of all properties
    recovery_spec_states: int = 0  # |R|
    valid_spec_states: int = 0    # |V|
    monitor_states: int = 0
    validity_states: int = 0
    deviation_states: int = 2
    game_states: int = 0
    game_bound: int = 0
    winning_states: int = 0
    solver_iterations: int = 0
    inner_iterations: int = 0
    shield_states: int = 0
    k_tried: list[int] = field(default_factory=list)
    seconds: float = 0.0

    def lines(self) -> list[str]:
        out = []
        for name, value in self.__dict__.items():
            if name == "k_tried":
                value = ",".join(map(str, value))
            elif name == "seconds":
                value = f"{value:.4f}"
            out.append(f"{name}={value}")
        return out


@dataclass
class SynthesisResult:
    realizable: bool
    shield: MealyMachine | None
    k: int | None
    stats: SynthesisStats
    engine: Engine
    reason: str = ""
    max_k_tried: int | None = None
    game: GameArena | None = None
    # game state behind each shield state
    shield_game_states: tuple[int, ...] = ()
    monitor: ViolationMonitor | None = None
    validity: ValidityMonitor | None = None
    spec: SafetyAutomaton | None = None


def game_size_bound(k: int, r: int, v: int, stabilizing: bool = False) -> int:
    """Worst-case number of game states for |R| = r and |V| = v.

    Counter values: k + 1 (or 3 in stabilizing mode, which also carries two
    extra bits).
    """
    counters = 3 if stabilizing else k + 1
    x = (counters * 2 ** r + 1) * (2 * v) * 2 * (r * v)
    return x * 4 if stabilizing else x


def build_shield_game(U: ViolationMonitor, T: DeviationMonitor, Vp: ValidityMonitor,
                      Q: SafetyAutomaton, use_validity: bool = True) -> GameArena:
    """Reachable synchronous product of the monitors and the full specification.

    Environment letters are the design's letters (input and output), system
    letters are the shield's outputs (paired with the recovery-done flag in
    stabilizing mode).  A state is ``(u, t, v', q)``, extended by the bits
    ``(m, n)`` in stabilizing mode.
    """
    sig = Q.signature
    for aut in (U.spec, Vp.spec):
        if aut.signature != sig:
            raise SignatureMismatch("monitors and specification use different signatures")
    if T.n_output_letters != sig.n_output_letters:
        raise SignatureMismatch("deviation monitor does not match the output alphabet")
    stab = U.stabilizing
    n_env = sig.n_letters
    n_out = sig.n_output_letters
    n_sys = n_out * 2 if stab else n_out
    q_safe = Q.safe
    v_safe = Vp.safe
    out_mask = n_out - 1

    init = (U.init, T.init, Vp.init, Q.init) + ((False, False) if stab else ())
    index = {init: 0}
    order = [init]
    delta = []
    i = 0
    while i < len(order):
        g = order[i]
        u, t, vp, q = g[:4]
        if stab:
            m, n = g[4], g[5]
            m2 = m or q not in q_safe
            n2 = n or (U.counter_zero(u) and t == 1)
        urow, vrow, qrow = U.delta[u], Vp.delta[vp], Q.delta[q]
        row = []
        for e in range(n_env):
            o_design = e & out_mask
            base = e & ~out_mask
            vp2 = vrow[e]
            moves = []
            for s in range(n_sys):
                if stab:
                    o_shield, done = s >> 1, s & 1
                    u2 = urow[(e << 1) | done]
                else:
                    o_shield = s
                    u2 = urow[e]
                t2 = 0 if o_design == o_shield else 1
                q2 = qrow[base | o_shield]
                nxt = (u2, t2, vp2, q2) + ((m2, n2) if stab else ())
                j = index.get(nxt)
                if j is None:
                    j = index[nxt] = len(order)
                    order.append(nxt)
                moves.append(j)
            row.append(tuple(moves))
        delta.append(tuple(row))
        i += 1

    good = set()
    for j, g in enumerate(order):
        u, t, vp, q = g[:4]
        assumption_broken = use_validity and vp not in v_safe
        if stab:
            m, n = g[4], g[5]
            st = U.states[u]
            recovered = st.fail_safe or st.counter <= 1
            if assumption_broken or (not n and not m and recovered):
                good.add(j)
        elif assumption_broken or (q in q_safe and not (U.counter_zero(u) and t != 0)):
            good.add(j)
    cond = BuchiSet(frozenset(good)) if stab else SafeSet(frozenset(good))
    labels = tuple(_game_label(U, Vp, Q, g) for g in order)
    return GameArena(len(order), 0, n_env, n_sys, tuple(delta), cond, labels=labels, components=tuple(order))


def _game_label(U: ViolationMonitor, Vp: ValidityMonitor, Q: SafetyAutomaton, g: tuple) -> str:
    u, t, vp, q = g[:4]
    b, v = Vp.states[vp]
    parts = [U.states[u].label(U.spec.states), f"t{t}"]
    if len(Vp.spec.states) > 1 or b:
        parts.append(f"{'!' if b else ''}{Vp.spec.states[v]}")
    parts.append(Q.states[q])
    if len(g) > 4:
        parts.append(f"m{int(g[4])}n{int(g[5])}")
    return " ".join(parts)


def shield_signature(sig: SignalSignature) -> SignalSignature:
    """Shield interface: reads the design's inputs and outputs, writes primed outputs."""
    taken = set(sig.names)
    outs = []
    for o in sig.outputs:
        name = o + "'"
        while name in taken:
            name += "'"
        taken.add(name)
        outs.append(name)
    return SignalSignature(sig.names, tuple(outs))


def strategy_to_mealy(arena: GameArena, winning: frozenset[int], choice: dict[int, tuple[int, ...]],
                      signature: SignalSignature, drop_flag: bool = False) -> tuple[MealyMachine, tuple[int, ...]]:
    """Implement a determinized strategy as a Mealy machine on the reachable states.

    Returns the machine and the game state behind every machine state.
    With ``drop_flag`` the lowest bit of each system letter (the recovery-done
    flag) is projected away from the output.
    """
    if arena.init not in winning:
        raise ValueError("initial state is not winning")
    order = [arena.init]
    index = {arena.init: 0}
    queue = deque([arena.init])
    while queue:
        g = queue.popleft()
        for e in range(arena.num_env):
            t = arena.delta[g][e][choice[g][e]]
            if t not in winning:
                raise AssertionError(f"strategy leaves the winning region at game state {g}")
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
    delta = tuple(tuple(index[arena.delta[g][e][choice[g][e]]] for e in range(arena.num_env)) for g in order)
    out = tuple(tuple((choice[g][e] >> 1) if drop_flag else choice[g][e] for e in range(arena.num_env))
                for g in order)
    names = tuple(f"s{j}" for j in range(len(order)))
    return MealyMachine(signature, names, 0, delta, out), tuple(order)


def _check_inputs(phi: Sequence[SafetyAutomaton], phi_valid: Sequence[SafetyAutomaton]):
    if not phi:
        raise ValueError("at least one property is required")
    sig = phi[0].signature
    for a in phi:
        if a.signature != sig:
            raise SignatureMismatch("all properties must share one signature")
    for a in phi_valid:
        if not any(a is b for b in phi) and a not in phi:
            raise ValueError("phi_valid must be a sublist of phi")
    return sig


def _split_properties(phi, phi_valid, use_validity):
    valid_ids = {id(a) for a in phi_valid}
    valid_eq = list(phi_valid)
    if not use_validity:
        return list(phi), []
    rest = [a for a in phi if id(a) not in valid_ids and a not in valid_eq]
    return rest, list(phi_valid)


def synthesize(phi: Sequence[SafetyAutomaton], phi_valid: Sequence[SafetyAutomaton] = (),
               cfg: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
    """Synthesize a shield for ``phi`` assuming the design satisfies ``phi_valid``.

    The k-safety engine tries k = 1 .. k_max and returns the first success.
    The Büchi engine solves one game and reports the measured k.
    """
    started = time.perf_counter()
    sig = _check_inputs(phi, phi_valid)
    phi = [complete(a) for a in phi]
    phi_valid = [complete(a) for a in phi_valid]
    recover, valid = _split_properties(phi, phi_valid, cfg.use_validity)
    Q = product(phi)
    R = product(recover) if recover else trivial(sig)
    V = product(valid) if valid else trivial(sig)
    stats = SynthesisStats(spec_states=Q.n_states, recovery_spec_states=R.n_states, valid_spec_states=V.n_states)
    T = build_deviation_monitor(sig)
    Vp = build_validity_monitor(V)
    stats.validity_states = len(Vp.states)
    shield_sig = shield_signature(sig)

    def finish(**kw) -> SynthesisResult:
        stats.seconds = time.perf_counter() - started
        return SynthesisResult(stats=stats, engine=cfg.engine, spec=Q, validity=Vp, **kw)

    if R.init not in winning_region_of_spec(R):
        return finish(realizable=False, shield=None, k=None,
                      reason="the specification itself is unrealizable")

    stabilizing = cfg.engine is Engine.BUCHI
    ks = [2] if stabilizing else range(1, cfg.k_max + 1)
    for k in ks:
        U = build_violation_monitor(R, k, cfg.mode, stabilizing=stabilizing)
        game = build_shield_game(U, T, Vp, Q, use_validity=cfg.use_validity)
        bound = game_size_bound(k, R.n_states, V.n_states, stabilizing)
        if game.num_states > bound:
            raise AssertionError(f"game has {game.num_states} states, above the bound {bound}")
        stats.monitor_states = len(U.states)
        stats.game_states = game.num_states
        stats.game_bound = bound
        if not stabilizing:
            stats.k_tried.append(k)
        if stabilizing:
            sol = solve_buchi(game)
            stats.solver_iterations = sol.outer_iterations
            stats.inner_iterations = sol.inner_iterations
        else:
            sol = solve_safety(game)
            stats.solver_iterations = sol.iterations
        stats.winning_states = len(sol.winning)
        logger.info("k=%s: %d game states, %d winning", "buchi" if stabilizing else k,
                    game.num_states, len(sol.winning))
        if game.init not in sol.winning:
            continue
        prefer = _prefer_design_output(sig, sol.strategy, stabilizing)
        choice = determinize(sol.strategy, prefer)
        shield, behind = strategy_to_mealy(game, sol.winning, choice, shield_sig, drop_flag=stabilizing)
        stats.shield_states = shield.n_states
        achieved = sol.inner_iterations if stabilizing else k
        return finish(realizable=True, shield=shield, k=achieved, game=game,
                      shield_game_states=behind, monitor=U, max_k_tried=None if stabilizing else k)

    if stabilizing:
        return finish(realizable=False, shield=None, k=None, game=game, monitor=U,
                      reason="no stabilizing shield exists (Büchi game lost)")
    return finish(realizable=False, shield=None, k=None, max_k_tried=cfg.k_max, game=game, monitor=U,
                  reason=f"unrealizable for k <= {cfg.k_max}")


def _prefer_design_output(sig: SignalSignature, strategy, stabilizing: bool):
    """Minimum interference: keep the design's output whenever it is winning.

    In stabilizing mode the recovery-done flag is raised when possible.
    """
    out_mask = sig.n_output_letters - 1
    if not stabilizing:
        return lambda g, e: e & out_mask

    def prefer(g, e):
        o = e & out_mask
        moves = strategy.moves(g, e)
        return (o << 1) | 1 if ((o << 1) | 1) in moves else (o << 1)
    return prefer


def export_mealy(machine: MealyMachine, format: str = "native", notes: dict[int, str] | None = None,
                 comments: Sequence[str] = ()) -> str:
    if format == "native":
        return format_mealy(machine, comments=comments, state_notes=notes)
    if format == "dot":
        return mealy_to_dot(machine, name="shield")
    raise ValueError(f"unknown format {format!r}")


def shield_notes(result: SynthesisResult) -> dict[int, str]:
    """Human-readable game state behind each shield state (for comments in exports)."""
    if not result.realizable or result.game is None:
        return {}
    return {j: result.game.label(g) for j, g in enumerate(result.shield_game_states)}

