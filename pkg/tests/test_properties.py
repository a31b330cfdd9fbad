"""Bounded-exhaustive and randomized properties of synthesized shields."""
import random

import pytest

from helpers import load_aut, random_machine, random_spec
from shieldsynth.automata import complete, trivial
from shieldsynth.games import solve_safety
from shieldsynth.monitors import (
    MonitorMode,
    UnrealizableSpecError,
    build_deviation_monitor,
    build_validity_monitor,
    build_violation_monitor,
    winning_region_of_spec,
)
from shieldsynth.shield import Engine, SynthesisConfig, build_shield_game, game_size_bound, synthesize
from shieldsynth.simulate import compose, model_check_safety

FIXTURE_SPECS = ("traffic.aut", "amba_g3.aut", "traffic_combinational.aut", "copy_input.aut")


def _realizable_specs(n, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        spec = random_spec(rng)
        if spec.init in winning_region_of_spec(spec):
            out.append(spec)
    return out


def realizable_at(spec, k, mode=MonitorMode.FAIL_SAFE):
    spec = complete(spec)
    U = build_violation_monitor(spec, k, mode)
    game = build_shield_game(U, build_deviation_monitor(spec.signature),
                             build_validity_monitor(trivial(spec.signature)), spec)
    assert game.num_states <= game_size_bound(k, spec.n_states, 1)
    return game.init in solve_safety(game).winning


def walk(spec, shield, depth, k, mode=MonitorMode.FAIL_SAFE):
    """Every design-letter sequence up to ``depth``: yields the per-step records.

    A record is ``(violation, deviated, monitor_after, spec_state_after)``.
    Prefixes are shared, so the cost is linear in the number of sequences.
    """
    spec = complete(spec)
    U = build_violation_monitor(spec, k, mode)
    n_out = spec.signature.n_output_letters
    out_mask = n_out - 1

    def rec(s, u, q, path):
        yield path
        if len(path) == depth:
            return
        for a in range(spec.signature.n_letters):
            o = shield.out[s][a]
            u2, bad = U.step(u, a)
            q2 = spec.delta[q][(a & ~out_mask) | o]
            yield from rec(shield.delta[s][a], u2, q2, path + ((a, bad, o != a & out_mask, u2, q2),))

    yield from rec(shield.init, U.states[U.init], spec.init, ())


@pytest.mark.parametrize("name", ["traffic.aut", "amba_g3.aut", "traffic_combinational.aut"])
def test_minimum_interference(name):
    """No deviation on any violation-free trace up to depth 6."""
    spec = load_aut(name)
    res = synthesize([spec])
    checked = 0
    for path in walk(spec, res.shield, 6, res.k):
        if path and not any(step[1] for step in path):
            assert not path[-1][2]
            checked += 1
    assert checked > 100


@pytest.mark.parametrize("name", ["traffic.aut", "amba_g3.aut", "copy_input.aut"])
def test_no_illegal_deviation_and_no_unsafe_state(name):
    spec = complete(load_aut(name))
    res = synthesize([spec])
    for path in walk(spec, res.shield, 5, res.k):
        if not path:
            continue
        _, _, deviated, u, q = path[-1]
        assert q in spec.safe
        if deviated:
            assert u.fail_safe or u.counter > 0


@pytest.mark.parametrize("name", ["traffic.aut", "amba_g3.aut", "copy_input.aut", "traffic_combinational.aut"])
def test_one_stabilizing_shields_deviate_only_on_violations(name):
    spec = load_aut(name)
    res = synthesize([spec])
    assert res.k == 1
    for path in walk(spec, res.shield, 5, 1):
        if path:
            _, bad, deviated, _, _ = path[-1]
            assert bad or not deviated


def test_k_monotonicity_on_random_specs():
    specs = _realizable_specs(50, seed=11)
    seen_realizable = 0
    for spec in specs:
        ok = [realizable_at(spec, k) for k in range(1, 6)]
        for a, b in zip(ok, ok[1:]):
            assert b or not a
        seen_realizable += ok[-1]
    assert seen_realizable > 0


@pytest.mark.parametrize("name", FIXTURE_SPECS + ("o1o2_choice.aut",))
def test_k_monotonicity_on_fixtures(name):
    spec = load_aut(name)
    ok = [realizable_at(spec, k) for k in range(1, 5)]
    for a, b in zip(ok, ok[1:]):
        assert b or not a


def test_game_bound_holds_on_every_run():
    for spec in _realizable_specs(25, seed=5):
        for cfg in (SynthesisConfig(k_max=4), SynthesisConfig(engine=Engine.BUCHI),
                    SynthesisConfig(k_max=3, mode=MonitorMode.RESET)):
            res = synthesize([spec], cfg=cfg)
            assert res.stats.game_states <= res.stats.game_bound


def _recoveries_within(spec, shield, k, depth):
    """Every deviation lies within ``k`` steps of the latest violation.

    Returns the number of deviating steps seen, or -1 on a late deviation.
    """
    seen = 0
    for path in walk(spec, shield, depth, k):
        last = None
        for j, (_, bad, deviated, u, _) in enumerate(path):
            if u.fail_safe:
                break
            if bad:
                last = j
            if deviated:
                if last is None or j - last >= k:
                    return -1
                if j == len(path) - 1:
                    seen += 1
    return seen


def _shield_alone_is_safe(spec, shield) -> bool:
    """No design letter sequence drives the shield's own outputs out of ``spec``."""
    mask = spec.signature.n_output_letters - 1
    start = (shield.init, spec.init)
    seen, stack = {start}, [start]
    while stack:
        s, q = stack.pop()
        for a in range(spec.signature.n_letters):
            q2 = spec.delta[q][(a & ~mask) | shield.out[s][a]]
            if q2 not in spec.safe:
                return False
            nxt = (shield.delta[s][a], q2)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return True


@pytest.mark.parametrize("name", ["traffic.aut", "amba_g3.aut", "copy_input.aut"])
def test_buchi_measured_k_is_valid(name):
    spec = load_aut(name)
    kres = synthesize([spec])
    bres = synthesize([spec], cfg=SynthesisConfig(engine=Engine.BUCHI))
    assert bres.realizable
    assert bres.k >= kres.k
    assert _recoveries_within(spec, bres.shield, bres.k, 5) > 0
    assert _shield_alone_is_safe(complete(spec), bres.shield)


def test_buchi_agrees_with_ksafety_on_random_specs():
    checked = 0
    for spec in _realizable_specs(30, seed=23):
        kres = synthesize([spec], cfg=SynthesisConfig(k_max=4))
        bres = synthesize([spec], cfg=SynthesisConfig(engine=Engine.BUCHI))
        if not kres.realizable:
            continue
        assert bres.realizable
        assert bres.k >= kres.k
        assert _recoveries_within(spec, bres.shield, bres.k, 4) >= 0
        assert _shield_alone_is_safe(spec, bres.shield)
        checked += 1
    assert checked >= 10


def test_shielded_random_designs_satisfy_the_spec():
    spec = load_aut("traffic.aut")
    shield = synthesize([spec]).shield
    rng = random.Random(99)
    for _ in range(50):
        design = random_machine(rng, spec.signature, rng.randint(1, 6))
        assert model_check_safety(compose(design, shield), spec).safe


def test_unrealizable_random_specs_are_reported():
    rng = random.Random(4)
    hits = 0
    for _ in range(200):
        spec = random_spec(rng)
        if spec.init in winning_region_of_spec(spec):
            continue
        with pytest.raises(UnrealizableSpecError):
            build_violation_monitor(spec, 1)
        assert not synthesize([spec]).realizable
        hits += 1
    assert hits > 0
