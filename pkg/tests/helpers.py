"""Fixture loading and random instance generators shared by the tests."""
from __future__ import annotations

import itertools
import random
from importlib.resources import files

from shieldsynth.automata import SafetyAutomaton, parse_automaton
from shieldsynth.games import BuchiSet, GameArena, SafeSet
from shieldsynth.mealy import MealyMachine, parse_mealy
from shieldsynth.signals import SignalSignature

FIXTURES = files("shieldsynth") / "fixtures"


def fixture_path(name: str):
    return FIXTURES / name


def load_aut(name: str) -> SafetyAutomaton:
    return parse_automaton((FIXTURES / name).read_text())


def load_mealy(name: str) -> MealyMachine:
    return parse_mealy((FIXTURES / name).read_text())


def letter(sig: SignalSignature, **values) -> int:
    return sig.letter_from_values(values)


def random_arena(rng: random.Random, buchi: bool = False, max_states: int = 6) -> GameArena:
    n = rng.randint(1, max_states)
    delta = tuple(tuple(tuple(rng.randrange(n) for _ in range(2)) for _ in range(2)) for _ in range(n))
    good = frozenset(g for g in range(n) if rng.random() < 0.6)
    cond = BuchiSet(good) if buchi else SafeSet(good)
    return GameArena(n, 0, 2, 2, delta, cond)


def random_spec(rng: random.Random, n_in: int = 1, n_out: int = 2, max_states: int = 3) -> SafetyAutomaton:
    """Complete random automaton; the last state is an absorbing unsafe sink."""
    sig = SignalSignature(tuple(f"i{j}" for j in range(n_in)), tuple(f"o{j}" for j in range(n_out)))
    n = rng.randint(1, max_states)
    sink = n
    delta = []
    for _ in range(n):
        delta.append(tuple(sink if rng.random() < 0.3 else rng.randrange(n) for _ in range(sig.n_letters)))
    delta.append(tuple(sink for _ in range(sig.n_letters)))
    states = tuple(f"q{j}" for j in range(n)) + ("bad",)
    return SafetyAutomaton(sig, states, 0, tuple(delta), frozenset(range(n)))


def all_sequences(alphabet: int, depth: int):
    for d in range(depth + 1):
        yield from itertools.product(range(alphabet), repeat=d)


def random_machine(rng: random.Random, sig: SignalSignature, n: int) -> MealyMachine:
    delta = tuple(tuple(rng.randrange(n) for _ in range(sig.n_input_letters)) for _ in range(n))
    out = tuple(tuple(rng.randrange(sig.n_output_letters) for _ in range(sig.n_input_letters)) for _ in range(n))
    return MealyMachine(sig, tuple(f"m{j}" for j in range(n)), 0, delta, out)
