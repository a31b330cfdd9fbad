"""Command-line front end.

Exit codes: 0 success (realizable, safe), 1 unrealizable or unsafe,
2 usage, I/O or format errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .automata import SignatureMismatch, complete, parse_automaton, product, validate
from .games import to_dot as game_to_dot
from .mealy import MealyMachine, parse_mealy
from .monitors import MonitorMode
from .shield import Engine, SynthesisConfig, export_mealy, shield_notes, synthesize
from .signals import FormatError
from .simulate import compose, evaluate_trace, format_counterexample, model_check_safety, parse_trace

OK, FAILED, ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from exc


def _load_automata(paths):
    auts = []
    for p in paths:
        try:
            auts.append(parse_automaton(_read(p)))
        except FormatError as exc:
            raise UsageError(f"{p}: {exc}") from exc
    sig = auts[0].signature
    for p, a in zip(paths, auts):
        if a.signature != sig:
            raise UsageError(f"{p}: signals differ from {paths[0]}")
    return auts


def _load_mealy(path: str) -> MealyMachine:
    try:
        return parse_mealy(_read(path))
    except FormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _write(path: str, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from exc


def _config(args) -> SynthesisConfig:
    if args.k_max < 1:
        raise UsageError("--k-max must be at least 1")
    return SynthesisConfig(k_max=args.k_max, mode=MonitorMode(args.mode), engine=Engine(args.engine),
                           use_validity=not args.no_validity)


def cmd_synth(args) -> int:
    auts = _load_automata(args.spec)
    valid_paths = args.valid or []
    resolved = [str(Path(p).resolve()) for p in args.spec]
    valid = []
    for p in valid_paths:
        try:
            valid.append(auts[resolved.index(str(Path(p).resolve()))])
        except ValueError:
            raise UsageError(f"--valid {p} is not one of the specification files") from None
    cfg = _config(args)
    result = synthesize(auts, valid, cfg)

    stats = [f"realizable={int(result.realizable)}",
             f"k={result.k if result.k is not None else ''}",
             f"engine={cfg.engine.value}", f"mode={cfg.mode.value}"] + result.stats.lines()
    stats_text = "\n".join(stats) + "\n"
    outputs = {}
    if args.stats:
        _write(args.stats, stats_text)
        outputs["stats"] = args.stats
    else:
        sys.stdout.write(stats_text)
    if args.game_dot and result.game is not None:
        _write(args.game_dot, game_to_dot(result.game))
        outputs["game_dot"] = args.game_dot

    if not result.realizable:
        print(f"unrealizable: {result.reason}", file=sys.stderr)
        _manifest(args, cfg, outputs, result)
        return FAILED

    comments = [f"shield for {' '.join(Path(p).name for p in args.spec)}",
                f"k={result.k} engine={cfg.engine.value} mode={cfg.mode.value}"]
    text = export_mealy(result.shield, "native", notes=shield_notes(result), comments=comments)
    if args.out:
        _write(args.out, text)
        outputs["shield"] = args.out
    else:
        sys.stdout.write("\n" + text)
    if args.dot:
        _write(args.dot, export_mealy(result.shield, "dot"))
        outputs["dot"] = args.dot
    _manifest(args, cfg, outputs, result)
    return OK


def _manifest(args, cfg: SynthesisConfig, outputs: dict, result):
    if not args.out:
        return
    manifest = {
        "command": "synth",
        "inputs": {"spec": list(args.spec), "valid": list(args.valid or [])},
        "config": {"k_max": cfg.k_max, "mode": cfg.mode.value, "engine": cfg.engine.value,
                   "use_validity": cfg.use_validity},
        "outputs": outputs,
        "realizable": result.realizable,
        "k": result.k,
        "stats": {k: v for k, v in vars(result.stats).items() if k != "seconds"},
    }
    _write(args.out + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


_K_COMMENT = re.compile(r"^#.*\bk=(\d+)", re.M)


def cmd_simulate(args) -> int:
    auts = _load_automata(args.spec)
    spec = product([complete(a) for a in auts])
    design = _load_mealy(args.design)
    k = args.k
    if args.shield:
        shield_text = _read(args.shield)
        try:
            shield = parse_mealy(shield_text)
        except FormatError as exc:
            raise UsageError(f"{args.shield}: {exc}") from exc
        if k is None:
            m = _K_COMMENT.search(shield_text)
            k = int(m.group(1)) if m else 1
    else:
        result = synthesize(auts)
        if not result.realizable:
            print(f"no shield: {result.reason}", file=sys.stderr)
            return FAILED
        shield = result.shield
        k = k or result.k
    try:
        inputs = parse_trace(_read(args.trace), design.signature)
        report = evaluate_trace(design, shield, spec, k, inputs, MonitorMode(args.mode))
    except FormatError as exc:
        raise UsageError(f"{args.trace}: {exc}") from exc
    except SignatureMismatch as exc:
        raise UsageError(str(exc)) from exc
    if report.steps:
        sys.stdout.write(report.table())
    else:
        print("empty trace")
    if args.csv:
        _write(args.csv, "\n".join(report.csv_lines()) + "\n")
    return FAILED if report.spec_violated_by_composition else OK


def cmd_check(args) -> int:
    auts = _load_automata(args.spec)
    spec = product([complete(a) for a in auts])
    machine = _load_mealy(args.machine)
    try:
        if args.shield:
            machine = compose(machine, _load_mealy(args.shield))
        verdict = model_check_safety(machine, spec)
    except SignatureMismatch as exc:
        raise UsageError(str(exc)) from exc
    if verdict.safe:
        print(f"safe ({machine.n_states} machine states)")
        return OK
    print("unsafe, counterexample:")
    for line in format_counterexample(machine.signature, verdict.counterexample):
        print("  " + line)
    return FAILED


def cmd_info(args) -> int:
    for path in args.files:
        text = _read(path)
        try:
            if re.search(r"\bemit\s*:", text):
                m = parse_mealy(text)
                sig = m.signature
                print(f"{path}: mealy machine, {m.n_states} states ({len(m.reachable())} reachable), "
                      f"{_plural(sig.n_in, 'input')}, {_plural(sig.n_out, 'output')}")
                print(f"  inputs: {' '.join(sig.inputs)}; outputs: {' '.join(sig.outputs)}")
                continue
            raw = parse_automaton(text, complete_missing=False)
        except FormatError as exc:
            raise UsageError(f"{path}: {exc}") from exc
        full = validate(complete(raw))
        sig = raw.signature
        print(f"{path}: {full.summary()}")
        print(f"  inputs: {' '.join(sig.inputs) or '-'}; outputs: {' '.join(sig.outputs) or '-'}")
        print(f"  {full.n_edges} letter transitions, {full.reachable_states} reachable states")
        for msg in validate(raw).messages():
            print(f"  {msg}")
    return OK


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" + ("" if n == 1 else "s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shieldsynth", description="Synthesize and check k-stabilizing shields.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="synthesize a shield")
    s.add_argument("spec", nargs="+", help="safety automata, composed in order")
    s.add_argument("--valid", action="append", metavar="SPEC", help="a spec file the design is assumed to satisfy")
    s.add_argument("--k-max", type=int, default=10)
    s.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.KSAFETY.value)
    s.add_argument("--mode", choices=[m.value for m in MonitorMode], default=MonitorMode.FAIL_SAFE.value)
    s.add_argument("--no-validity", action="store_true", help="drop the validity monitor")
    s.add_argument("--out", help="shield file (native format); stdout if omitted")
    s.add_argument("--dot", help="shield as Graphviz")
    s.add_argument("--stats", help="key=value statistics file; stdout if omitted")
    s.add_argument("--game-dot", help="last game arena as Graphviz")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("simulate", help="replay a trace through design and shield")
    s.add_argument("spec", nargs="+")
    s.add_argument("--design", required=True)
    s.add_argument("--shield", help="shield file; synthesized from SPEC if omitted")
    s.add_argument("--trace", required=True)
    s.add_argument("--k", type=int, help="recovery bound for the report (default: from the shield file)")
    s.add_argument("--mode", choices=[m.value for m in MonitorMode], default=MonitorMode.FAIL_SAFE.value)
    s.add_argument("--csv", help="write step,design_out,shield_out,deviated,monitor lines")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check", help="model-check a Mealy machine against safety automata")
    s.add_argument("machine")
    s.add_argument("spec", nargs="+")
    s.add_argument("--shield", help="compose the machine with this shield first")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("info", help="describe automaton or Mealy machine files")
    s.add_argument("files", nargs="+")
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ERROR if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
