"""Batch runner: methods × instances × seeds, with CSV output and per-run traces."""
from __future__ import annotations

import csv
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .baselines import run_cot, run_forward_tree
from .core import ConfigError, EngineConfig, RffError, SearchTrace, Unsolved
from .engines import run_rff_g, run_rff_t
from .game24 import Game24Adapter, NumberSet, check_expression
from .mathdag import DagProblem, MathDagAdapter, WordProblem

log = logging.getLogger(__name__)

METHODS = ("rff-t", "rff-g", "cot", "forward-tree")
CSV_FIELDS = ("puzzle_id", "method", "seed", "outcome", "answer", "correct", "visited_states",
              "iterations", "duration_s")


@dataclass(frozen=True)
class Instance:
    """One problem: a dataset id plus the engine input and goal."""

    puzzle_id: int
    x: Any
    goal: Any

    @property
    def domain(self) -> str:
        return "math" if isinstance(self.x, (DagProblem, WordProblem)) else "game24"


@dataclass(frozen=True)
class RunSpec:
    methods: Tuple[str, ...] = ("rff-t",)
    adapter: str = "oracle"
    engine: EngineConfig = field(default_factory=EngineConfig)
    llm: Any = None
    beam: int = 5
    repeat: int = 1
    workers: int = 1
    out_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if self.adapter not in ("oracle", "llm"):
            raise ConfigError(f"unknown adapter {self.adapter!r}")
        if self.adapter == "llm" and self.llm is None:
            raise ConfigError("the llm adapter needs an LLM configuration")
        if self.adapter == "oracle" and self.llm is not None:
            raise ConfigError("the oracle adapter takes no LLM configuration")
        if self.repeat < 1 or self.workers < 1 or self.beam < 1:
            raise ConfigError("repeat, workers and beam must be >= 1")


@dataclass
class RunResult:
    puzzle_id: int
    method: str
    seed: int
    outcome: str
    answer: Optional[str]
    correct: bool
    visited_states: int
    iterations: int
    duration_s: float
    trace: Optional[SearchTrace] = None

    def row(self) -> Dict[str, Any]:
        return {
            "puzzle_id": self.puzzle_id, "method": self.method, "seed": self.seed,
            "outcome": self.outcome, "answer": "" if self.answer is None else self.answer,
            "correct": int(self.correct), "visited_states": self.visited_states,
            "iterations": self.iterations, "duration_s": f"{self.duration_s:.4f}",
        }


def is_correct(inst: Instance, trace: SearchTrace) -> bool:
    """Independent check of a Solved answer against the instance."""
    if not trace.solved or trace.outcome.answer is None:
        return False
    if inst.domain == "game24":
        return check_expression(trace.outcome.answer, NumberSet.of(*inst.x), inst.goal)
    truth = inst.x.answer
    if truth is None:
        return False
    try:
        return Fraction(trace.outcome.answer.replace(",", "")) == truth
    except (ValueError, ZeroDivisionError):
        return False


class AdapterFactory:
    """Builds adapters per run; oracle adapters are shared, LLM adapters are not."""

    def __init__(self, spec: RunSpec, client: Any = None):
        self.spec = spec
        self.client = client
        self._game24 = Game24Adapter()
        self._math = MathDagAdapter()

    def tree(self, inst: Instance):
        if self.spec.adapter == "oracle":
            return self._game24 if inst.domain == "game24" else self._math
        from .llm.adapters import LlmGame24Adapter, LlmMathAdapter
        return LlmGame24Adapter(self.client) if inst.domain == "game24" else LlmMathAdapter(self.client)

    def forward(self, inst: Instance):
        if self.spec.adapter == "oracle":
            return self._game24 if inst.domain == "game24" else self._math
        from .llm.adapters import LlmGame24Forward, LlmMathAdapter
        return LlmGame24Forward(self.client) if inst.domain == "game24" else LlmMathAdapter(self.client)


def run_one(inst: Instance, method: str, seed: int, spec: RunSpec, factory: AdapterFactory) -> RunResult:
    cfg = replace(spec.engine, seed=seed)
    start = time.perf_counter()
    try:
        if method == "rff-t":
            trace = run_rff_t(factory.tree(inst), inst.x, inst.goal, cfg)
        elif method == "rff-g":
            trace = run_rff_g(factory.tree(inst), inst.x, inst.goal, cfg)
        elif method == "cot":
            trace = run_cot(factory.forward(inst), inst.x, inst.goal, cfg)
        else:
            trace = run_forward_tree(factory.forward(inst), inst.x, inst.goal, cfg, spec.beam)
    except (RffError, ValueError) as exc:
        # a failing run never aborts the batch
        log.warning("run %s/%s/%d failed: %s", inst.puzzle_id, method, seed, exc)
        trace = SearchTrace(method).finish(Unsolved(f"adapter failure: {exc}"))
    took = time.perf_counter() - start
    out = trace.outcome
    return RunResult(inst.puzzle_id, method, seed, out.status, out.answer, is_correct(inst, trace),
                     trace.visited_states, trace.iterations, took, trace)


def trace_name(puzzle_id: int, method: str, seed: int) -> str:
    return f"{puzzle_id}_{method}_{seed}.jsonl"


def run_batch(instances: Sequence[Instance], spec: RunSpec, client: Any = None) -> List[RunResult]:
    """Run every (instance, method, seed); results come back in a fixed order."""
    factory = AdapterFactory(spec, client)
    jobs = [(inst, m, spec.engine.seed + r) for inst in instances for m in spec.methods for r in range(spec.repeat)]
    if spec.workers == 1:
        results = [run_one(i, m, s, spec, factory) for i, m, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(lambda job: run_one(*job[:3], spec, factory), jobs))
    results.sort(key=lambda r: (r.puzzle_id, spec.methods.index(r.method), r.seed))
    if spec.out_dir is not None:
        write_outputs(results, spec)
    return results


@dataclass(frozen=True)
class SummaryRow:
    method: str
    runs: int
    accuracy: float
    mean_visited: float
    mean_time_s: float


def summarize(results: Iterable[RunResult], methods: Sequence[str] = METHODS) -> List[SummaryRow]:
    by: Dict[str, List[RunResult]] = {}
    for r in results:
        by.setdefault(r.method, []).append(r)
    rows = []
    for m in [m for m in methods if m in by] + sorted(set(by) - set(methods)):
        rs = by[m]
        rows.append(SummaryRow(m, len(rs), sum(r.correct for r in rs) / len(rs),
                               statistics.fmean(r.visited_states for r in rs),
                               statistics.fmean(r.duration_s for r in rs)))
    return rows


def summary_from_csv(path: Union[str, Path]) -> List[SummaryRow]:
    """Recompute the aggregate table from a runs CSV alone."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    results = [RunResult(int(r["puzzle_id"]), r["method"], int(r["seed"]), r["outcome"], r["answer"] or None,
                         bool(int(r["correct"])), int(r["visited_states"]), int(r["iterations"]),
                         float(r["duration_s"])) for r in rows]
    return summarize(results, list(dict.fromkeys(r.method for r in results)))


def format_table(rows: Sequence[SummaryRow], spec: Optional[RunSpec] = None) -> str:
    head = f"{'method':<14} {'runs':>5} {'acc':>7} {'visited':>9} {'time_s':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.method:<14} {r.runs:>5} {r.accuracy:>7.3f} {r.mean_visited:>9.2f} {r.mean_time_s:>8.3f}")
    if spec is not None:
        e = spec.engine
        lines.append(f"adapter={spec.adapter} L={e.max_steps} n={e.width} mode={e.backward_mode.value} "
                     f"beam={spec.beam} repeat={spec.repeat}")
    return "\n".join(lines)


def write_outputs(results: Sequence[RunResult], spec: RunSpec) -> None:
    out = Path(spec.out_dir)
    traces = out / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in results:
            w.writerow(r.row())
            if r.trace is not None:
                (traces / trace_name(r.puzzle_id, r.method, r.seed)).write_text(r.trace.to_jsonl())
    rows = summarize(results, spec.methods)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "runs", "accuracy", "mean_visited", "mean_time_s", "adapter", "L", "n", "mode", "beam"])
        for r in rows:
            w.writerow([r.method, r.runs, f"{r.accuracy:.6f}", f"{r.mean_visited:.6f}", f"{r.mean_time_s:.6f}",
                        spec.adapter, spec.engine.max_steps, spec.engine.width, spec.engine.backward_mode.value,
                        spec.beam])
