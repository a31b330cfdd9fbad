"""Synthesis of k-stabilizing shields for safety specifications."""
from .automata import SafetyAutomaton, complete, parse_automaton, product
from .mealy import MealyMachine, parse_mealy
from .monitors import MonitorMode
from .shield import Engine, SynthesisConfig, SynthesisResult, synthesize
from .signals import FormatError, SignalSignature

__all__ = [
    "Engine",
    "FormatError",
    "MealyMachine",
    "MonitorMode",
    "SafetyAutomaton",
    "SignalSignature",
    "SynthesisConfig",
    "SynthesisResult",
    "complete",
    "parse_automaton",
    "parse_mealy",
    "product",
    "synthesize",
]
