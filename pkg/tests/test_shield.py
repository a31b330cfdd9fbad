import pytest

from helpers import load_aut, load_mealy
from shieldsynth.automata import SignatureMismatch, parse_automaton, trivial
from shieldsynth.games import SafeSet, solve_safety
from shieldsynth.mealy import isomorphic, parse_mealy
from shieldsynth.monitors import build_deviation_monitor, build_validity_monitor, build_violation_monitor
from shieldsynth.shield import (
    Engine,
    SynthesisConfig,
    build_shield_game,
    export_mealy,
    game_size_bound,
    shield_notes,
    shield_signature,
    strategy_to_mealy,
    synthesize,
)
from shieldsynth.signals import SignalSignature

TRAFFIC = load_aut("traffic.aut")
BUCHI = SynthesisConfig(engine=Engine.BUCHI)


def _game(spec, k, valid=None, **kw):
    valid = valid or trivial(spec.signature)
    U = build_violation_monitor(spec, k, **kw)
    return build_shield_game(U, build_deviation_monitor(spec.signature), build_validity_monitor(valid), spec)


def test_game_bound_formula():
    assert game_size_bound(1, 4, 1) == 33 * 2 * 2 * 4
    assert game_size_bound(2, 3, 2, stabilizing=True) == 4 * (3 * 8 + 1) * 4 * 2 * 6


def test_traffic_game_within_bound():
    for k in (1, 2, 3):
        game = _game(TRAFFIC, k)
        assert game.num_states <= game_size_bound(k, 4, 1)
        assert isinstance(game.condition, SafeSet)


def test_trivial_spec_game():
    sig = SignalSignature(("a",), ())
    t = trivial(sig)
    game = _game(t, 1)
    assert game.num_states == 1
    assert game.condition.states == {0}
    sig2 = SignalSignature(("a",), ("x",))
    game2 = _game(trivial(sig2), 1)
    # only a deviation while the counter is 0 is unsafe
    for g, (u, t, _, _) in enumerate(game2.components):
        assert (g in game2.condition.states) == (t == 0)


def test_copy_input_game_forces_deviation():
    copy_input = load_aut("copy_input.aut")
    game = _game(copy_input, 1)
    assert game.num_states <= 40
    sol = solve_safety(game)
    assert game.init in sol.winning
    sig = copy_input.signature
    bad = sig.letter_from_values({"i": 1, "o": 0})
    # copying o=0 leaves the winning region, only o'=1 remains
    assert sol.strategy.moves(game.init, bad) == (1,)
    assert game.delta[game.init][bad][0] not in sol.winning
    for e in (sig.letter_from_values({"i": 0, "o": 0}), sig.letter_from_values({"i": 1, "o": 1})):
        assert e & 1 in sol.strategy.moves(game.init, e)


def test_signature_mismatch_in_game():
    copy_input = load_aut("copy_input.aut")
    U = build_violation_monitor(copy_input, 1)
    with pytest.raises(SignatureMismatch):
        build_shield_game(U, build_deviation_monitor(copy_input.signature),
                          build_validity_monitor(trivial(TRAFFIC.signature)), copy_input)


def test_traffic_synthesis_k1():
    res = synthesize([TRAFFIC])
    assert res.realizable and res.k == 1
    assert res.stats.k_tried == [1]
    assert res.game.init in solve_safety(res.game).winning
    assert res.shield.signature == SignalSignature(("p", "h", "f"), ("h'", "f'"))
    assert res.stats.game_states <= res.stats.game_bound


def test_traffic_shield_copies_or_forces_all_red():
    """Compliant letters are copied; letters leaving the spec are rewritten to rr."""
    res = synthesize([TRAFFIC])
    Q = res.spec
    for j, g in enumerate(res.shield_game_states):
        q = res.game.components[g][3]
        for a in range(Q.signature.n_letters):
            out = res.shield.out[j][a]
            if Q.delta[q][a] in Q.safe:
                assert out == a & 3
            else:
                assert out == 0


def test_g3_synthesis_k1():
    res = synthesize([load_aut("amba_g3.aut")])
    assert res.realizable and res.k == 1


def test_o1o2_spec_unrealizable():
    spec = load_aut("o1o2_choice.aut")
    res = synthesize([spec], cfg=SynthesisConfig(k_max=10))
    assert not res.realizable
    assert res.max_k_tried == 10 and res.stats.k_tried == list(range(1, 11))
    assert res.reason == "unrealizable for k <= 10"
    res = synthesize([spec], cfg=BUCHI)
    assert not res.realizable and "Büchi" in res.reason


def test_unrealizable_recovery_spec():
    bad = parse_automaton("inputs: i\noutputs: o\nstates: a\ninit: a\na -> a : !i\n")
    res = synthesize([bad])
    assert not res.realizable and res.k is None


def test_two_truth_table_properties_give_combinational_shield():
    res = synthesize([load_aut("traffic_combinational.aut")])
    assert res.realizable and res.k == 1
    rows = {res.shield.out[q] for q in res.shield.reachable()}
    assert len(rows) == 1


def test_trivial_spec_gives_identity_shield():
    sig = SignalSignature(("a",), ("x", "y"))
    res = synthesize([trivial(sig)])
    assert res.shield.n_states == 1
    assert res.shield.out[0] == tuple(a & 3 for a in range(8))


def test_strategy_to_mealy_rejects_losing_init():
    copy_input = load_aut("copy_input.aut")
    game = _game(copy_input, 1)
    with pytest.raises(ValueError):
        strategy_to_mealy(game, frozenset(), {}, shield_signature(copy_input.signature))
    sol = solve_safety(game)
    choice = {g: tuple(0 for _ in range(game.num_env)) for g in sol.winning}
    with pytest.raises(AssertionError):
        strategy_to_mealy(game, sol.winning, choice, shield_signature(copy_input.signature))


def test_export_round_trip_and_dot():
    res = synthesize([TRAFFIC])
    text = export_mealy(res.shield, notes=shield_notes(res), comments=["k=1"])
    assert text.startswith("# k=1\n")
    assert isomorphic(parse_mealy(text), res.shield)
    dot = export_mealy(res.shield, "dot")
    assert dot.count("shape=circle") == len(res.shield.reachable())
    with pytest.raises(ValueError):
        export_mealy(res.shield, "verilog")


def test_synthesis_is_deterministic():
    a = export_mealy(synthesize([TRAFFIC]).shield)
    b = export_mealy(synthesize([load_aut("traffic.aut")]).shield)
    assert a == b


def test_buchi_engine_on_traffic():
    res = synthesize([TRAFFIC], cfg=BUCHI)
    assert res.realizable
    assert res.k >= 1
    assert res.shield.signature.outputs == ("h'", "f'")
    assert res.stats.game_states <= game_size_bound(2, 4, 1, stabilizing=True)


def test_validity_switch():
    g3 = load_aut("amba_g3.aut")
    res = synthesize([TRAFFIC, trivial(TRAFFIC.signature)], [TRAFFIC])
    assert res.realizable and res.stats.recovery_spec_states == 1
    res = synthesize([TRAFFIC], [TRAFFIC], SynthesisConfig(use_validity=False))
    assert res.realizable and res.stats.recovery_spec_states == 4 and res.stats.valid_spec_states == 1
    with pytest.raises(SignatureMismatch):
        synthesize([TRAFFIC, g3])
    with pytest.raises(ValueError):
        synthesize([TRAFFIC], [g3])
    with pytest.raises(ValueError):
        SynthesisConfig(k_max=0)


def test_other_modes_also_find_k1():
    from shieldsynth.monitors import MonitorMode
    for mode in MonitorMode:
        res = synthesize([TRAFFIC], cfg=SynthesisConfig(mode=mode))
        assert res.realizable and res.k == 1


def test_shield_protects_design_with_validity_assumption():
    from shieldsynth.simulate import compose, model_check_safety
    design = load_mealy("traffic_correct.mealy")
    res = synthesize([TRAFFIC], [TRAFFIC])
    assert model_check_safety(compose(design, res.shield), TRAFFIC).safe
