import pytest

from helpers import load_mealy
from shieldsynth.automata import NondeterminismError
from shieldsynth.mealy import MalformedLetter, MealyMachine, format_mealy, isomorphic, parse_mealy, to_dot
from shieldsynth.signals import FormatError, SignalSignature

HEADER = "inputs: a\noutputs: x\nstates: s t\ninit: s\n"


def test_buggy_traffic_design():
    d = load_mealy("traffic_buggy.mealy")
    sig = d.signature
    assert d.n_states == 10
    s0 = d.index("S0")
    # preemption turns only the highway red
    assert d.step(s0, 0b00) == (d.index("S1"), 0b10)
    assert d.step(s0, 0b10) == (d.index("S1"), 0b00)
    s5 = d.index("S5")
    assert d.step(s5, 0b10)[1] == 0b01
    assert d.step(d.index("S6"), 0b00)[0] == s0
    assert sig.inputs == ("p", "car") and sig.outputs == ("h", "f")


def test_correct_design_differs_only_in_the_bugs():
    bug, ok = load_mealy("traffic_buggy.mealy"), load_mealy("traffic_correct.mealy")
    assert ok.delta[ok.index("S6")][0] == ok.index("S8")
    assert ok.out[ok.index("S6")][0b10] == 0


def test_emit_must_pick_one_output():
    with pytest.raises(FormatError, match="more than one"):
        parse_mealy(HEADER + "s -> t : true emit: true\nt -> s : true emit: x\n")
    with pytest.raises(FormatError, match="no output"):
        parse_mealy(HEADER + "s -> t : true emit: false\nt -> s : true emit: x\n")


def test_emit_may_copy_an_input():
    m = parse_mealy(HEADER + "s -> t : true emit: x <-> a\nt -> s : true emit: !x\n")
    assert m.run([1, 0, 0, 1]) == [1, 0, 0, 0]


def test_incomplete_or_nondeterministic_machines_rejected():
    with pytest.raises(FormatError, match="no transition"):
        parse_mealy(HEADER + "s -> t : a emit: x\nt -> s : true emit: x\n")
    with pytest.raises(NondeterminismError):
        parse_mealy(HEADER + "s -> t : true emit: x\ns -> s : a emit: x\nt -> s : true emit: x\n")
    with pytest.raises(FormatError, match="safe"):
        parse_mealy(HEADER + "safe: s\ns -> s : true emit: x\nt -> s : true emit: x\n")
    with pytest.raises(FormatError, match="emit"):
        parse_mealy(HEADER + "s -> s : true\nt -> s : true emit: x\n")


def test_step_rejects_malformed_letter():
    m = load_mealy("amba_buggy.mealy")
    with pytest.raises(MalformedLetter):
        m.step(0, 4)
    assert m.run([]) == []


def test_format_round_trip():
    for name in ("traffic_buggy.mealy", "traffic_correct.mealy", "amba_buggy.mealy", "amba_correct.mealy"):
        m = load_mealy(name)
        assert isomorphic(parse_mealy(format_mealy(m)), m)


def test_identity_machine_has_one_state_block():
    sig = SignalSignature(("a", "x"), ("x'",))
    ident = MealyMachine(sig, ("s0",), 0, ((0, 0, 0, 0),), ((0, 1, 0, 1),))
    text = format_mealy(ident)
    assert text.count("s0 -> ") == 2
    assert parse_mealy(text).out == ident.out


def test_restrict_and_dot():
    sig = SignalSignature(("a",), ("x",))
    m = MealyMachine(sig, ("u", "s", "t"), 1, ((0, 0), (2, 2), (1, 1)), ((0, 0), (1, 1), (0, 1)))
    r = m.restrict()
    assert r.states == ("s", "t") and r.init == 0
    assert isomorphic(r, m)
    dot = to_dot(m)
    assert dot.count("shape=circle") == 2
