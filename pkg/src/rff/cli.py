"""Command-line entry point: ``rff solve | bench | variants | gen``.

Exit codes: 0 success (for ``solve``: Solved), 1 not solved, 2 bad
configuration or arguments, 3 input/output error, 4 endpoint failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .bench import METHODS, Instance, RunSpec, format_table, run_batch, run_one, summarize, AdapterFactory
from .core import BackwardMode, ConfigError, EngineConfig
from .game24 import NumberSet, add_redundant_one, brute_force_solvable, load_puzzles, write_puzzles
from .mathdag import DagProblem, generate_problem, load_problems, write_problems

log = logging.getLogger("rff")

EXIT_OK, EXIT_UNSOLVED, EXIT_CONFIG, EXIT_IO, EXIT_ENDPOINT = 0, 1, 2, 3, 4


def _engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", dest="methods", action="append", choices=METHODS,
                   help="method to run (repeatable; default rff-t, or rff-g for math problems)")
    p.add_argument("--adapter", choices=("oracle", "llm"), default="oracle")
    p.add_argument("-L", "--max-steps", type=int, default=20, help="depth bound L")
    p.add_argument("-n", "--width", type=int, default=5, help="attempts per depth n")
    p.add_argument("--mode", choices=[m.value for m in BackwardMode], default="pair",
                   help="backward reasoning: pair (interleaved) or single (whole chain first)")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--beam", type=int, default=5, help="ForwardTree beam width b")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--goal", default=None, help="Game24 goal value (default 24)")
    # LLM endpoint
    p.add_argument("--base-url", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--api-key-env", default="OPENAI_API_KEY", help="environment variable holding the API key")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=60.0, help="per-call timeout in seconds")
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--max-concurrency", type=int, default=8)
    p.add_argument("--cassette", default=None, help="record/replay file for model calls")
    p.add_argument("--cassette-mode", choices=("record", "replay"), default="replay")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rff", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults; command-line flags win")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one puzzle or problem")
    s.add_argument("numbers", nargs="*", help="Game24 numbers, e.g. 1 2 12 12")
    s.add_argument("--problems", help="JSONL problem file (DAG or GSM8K records)")
    s.add_argument("--index", type=int, default=1, help="1-based record in --problems")
    s.add_argument("--dag-seed", type=int, help="solve a generated DAG problem with this seed")
    s.add_argument("--dag-depth", type=int, default=3)
    s.add_argument("--dag-width", type=int, default=1)
    s.add_argument("--trace", help="write the JSONL trace here")
    _engine_args(s)

    b = sub.add_parser("bench", help="run methods over a dataset")
    b.add_argument("--dataset", help="puzzle file (one puzzle per line) or JSONL problem file; "
                                     "default: the bundled 4-number puzzles")
    b.add_argument("--range", dest="index_range", default=None, help="1-based inclusive range, e.g. 901-1000")
    b.add_argument("--variant", choices=("none", "add-one"), default="none")
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", default="bench_out", help="output directory")
    _engine_args(b)

    v = sub.add_parser("variants", help="write a transformed puzzle file")
    v.add_argument("dataset")
    v.add_argument("output")
    v.add_argument("--transform", choices=("add_one",), default="add_one")

    g = sub.add_parser("gen", help="generate DAG word problems")
    g.add_argument("output")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--depth-min", type=int, default=1)
    g.add_argument("--depth-max", type=int, default=8)
    g.add_argument("--width", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(defaults, dict):
            raise ConfigError("config file must hold a JSON object")
        for sp in parser._subparsers._group_actions[0].choices.values():
            sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    return args


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(max_steps=args.max_steps, width=args.width, backward_mode=BackwardMode(args.mode),
                        seed=args.seed, per_call_timeout=args.timeout, max_iterations=args.max_iterations)


def _llm(args: argparse.Namespace):
    """(LlmConfig, ChatClient, Cassette) for the llm adapter, else Nones."""
    if args.adapter != "llm":
        return None, None, None
    from .llm.client import Cassette, CassetteTransport, ChatClient, LlmConfig
    if not (args.base_url or args.cassette):
        raise ConfigError("the llm adapter needs --base-url (or a --cassette to replay)")
    kw = {k: v for k, v in dict(base_url=args.base_url, model=args.model).items() if v}
    cfg = LlmConfig(api_key_env=args.api_key_env, temperature=args.temperature, max_retries=args.max_retries,
                    timeout=args.timeout, shots=args.shots, max_concurrency=args.max_concurrency, **kw)
    cassette = transport = None
    if args.cassette:
        cassette = Cassette(args.cassette, args.cassette_mode)
        transport = CassetteTransport(cassette)
    return cfg, ChatClient(cfg, transport), cassette


def _spec(args: argparse.Namespace, default_method: str, llm_cfg, **kw) -> RunSpec:
    return RunSpec(methods=tuple(args.methods or [default_method]), adapter=args.adapter,
                   engine=_engine_config(args), llm=llm_cfg, beam=args.beam, **kw)


def _goal(args: argparse.Namespace) -> int:
    return int(args.goal) if args.goal is not None else 24


def _load_instances(args: argparse.Namespace) -> List[Instance]:
    path = args.dataset
    lo, hi = 1, None
    if args.index_range:
        a, _, b = args.index_range.partition("-")
        lo, hi = int(a), int(b or a)
    if path and path.endswith((".jsonl", ".json")):
        problems = load_problems(path)
        return [Instance(k, p, p.goal if isinstance(p, DagProblem) else "answer")
                for k, p in enumerate(problems, start=1) if k >= lo and (hi is None or k <= hi)]
    out = []
    for idx, ns in load_puzzles(path, lo, hi):
        if args.variant == "add-one":
            ns = add_redundant_one(ns)
        out.append(Instance(idx, tuple(ns.values), _goal(args)))
    return out


def cmd_solve(args: argparse.Namespace) -> int:
    if args.numbers:
        inst = Instance(0, tuple(NumberSet.parse(" ".join(args.numbers)).values), _goal(args))
    elif args.dag_seed is not None:
        p = generate_problem(args.dag_seed, args.dag_depth, args.dag_width)
        inst = Instance(args.dag_seed, p, p.goal)
    elif args.problems:
        problems = load_problems(args.problems)
        if not 1 <= args.index <= len(problems):
            raise ConfigError(f"--index must be in 1..{len(problems)}")
        p = problems[args.index - 1]
        inst = Instance(args.index, p, p.goal if isinstance(p, DagProblem) else "answer")
    else:
        raise ConfigError("give Game24 numbers, --dag-seed or --problems")
    default = "rff-t" if inst.domain == "game24" else "rff-g"
    llm_cfg, client, cassette = _llm(args)
    spec = _spec(args, default, llm_cfg)
    factory = AdapterFactory(spec, client)
    code = EXIT_OK
    for method in spec.methods:
        res = run_one(inst, method, args.seed, spec, factory)
        trace = res.trace
        if inst.domain == "math" and isinstance(inst.x, DagProblem) and inst.x.surface_text:
            print(inst.x.surface_text)
        print(f"{method}: {res.outcome}" + (f"  {res.answer}" if res.answer else "")
              + ("" if res.outcome == "Solved" else f"  ({trace.outcome.reason})"))
        print(f"  visited_states={res.visited_states} iterations={res.iterations} duration={res.duration_s:.3f}s")
        if args.trace:
            path = Path(args.trace) if len(spec.methods) == 1 else Path(args.trace).with_suffix(f".{method}.jsonl")
            path.write_text(trace.to_jsonl())
        if res.outcome != "Solved":
            code = EXIT_UNSOLVED
    if cassette is not None and cassette.mode == "record":
        cassette.save()
    return code


def cmd_bench(args: argparse.Namespace) -> int:
    instances = _load_instances(args)
    default = "rff-g" if instances and instances[0].domain == "math" else "rff-t"
    llm_cfg, client, cassette = _llm(args)
    spec = _spec(args, default, llm_cfg, repeat=args.repeat, workers=args.workers, out_dir=Path(args.out))
    results = run_batch(instances, spec, client)
    if cassette is not None and cassette.mode == "record":
        cassette.save()
    print(format_table(summarize(results, spec.methods), spec))
    print(f"wrote {len(results)} runs to {Path(args.out) / 'runs.csv'}")
    return EXIT_OK


def cmd_variants(args: argparse.Namespace) -> int:
    puzzles = [ns for _, ns in load_puzzles(args.dataset)]
    out, violations = [], 0
    for ns in puzzles:
        if len(ns) != 4:
            log.warning("puzzle %s has %d numbers; adding a 1 anyway", ns, len(ns))
        new = add_redundant_one(ns)
        if len(new) <= 6 and brute_force_solvable(ns) and not brute_force_solvable(new):
            violations += 1
            log.error("solvability lost: %s -> %s", ns, new)
        out.append(new)
    write_puzzles(args.output, out)
    print(f"wrote {len(out)} puzzles to {args.output}; solvability violations: {violations}")
    return EXIT_OK if violations == 0 else EXIT_UNSOLVED


def cmd_gen(args: argparse.Namespace) -> int:
    if not 1 <= args.depth_min <= args.depth_max:
        raise ConfigError("need 1 <= depth-min <= depth-max")
    span = args.depth_max - args.depth_min + 1
    problems = [generate_problem(args.seed + k, args.depth_min + k % span, args.width) for k in range(args.count)]
    write_problems(args.output, problems)
    print(f"wrote {len(problems)} problems to {args.output}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "variants": cmd_variants, "gen": cmd_gen}


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .llm.client import LlmError

    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LlmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
