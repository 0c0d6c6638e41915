"""Forward-only baselines under the same visited-state accounting as the RFF engines.

* CoT: one unguided forward chain, counted as a single visited state.
* ForwardTree(b): layer-by-layer forward search keeping the ``b`` best-valued
  nodes per layer (ToT-style BFS); every generated child is one visited state.

Cumulative Reasoning is deliberately not reimplemented.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, List, Union

from .core import (
    AdapterFailure,
    ConfigError,
    DeadEnd,
    EngineConfig,
    EventKind,
    SearchTrace,
    Solved,
    Task,
    Unsolved,
)


@dataclass(frozen=True)
class CoT:
    pass


@dataclass(frozen=True)
class ForwardTree:
    width: int = 5

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ConfigError("ForwardTree width must be >= 1")


BaselineKind = Union[CoT, ForwardTree]


class ForwardAdapter(ABC):
    """Hooks a domain provides for forward-only search."""

    @abstractmethod
    def root(self, task: Task) -> Any:
        ...

    @abstractmethod
    def propose(self, task: Task, node: Any) -> List[Any]:
        """Children of ``node``; an empty list means ``node`` is a leaf."""

    @abstractmethod
    def evaluate(self, task: Task, node: Any) -> float:
        """Higher is more promising."""

    @abstractmethod
    def greedy_chain(self, task: Task) -> Any:
        """A single complete forward chain from the root, without backtracking."""

    @abstractmethod
    def is_solution(self, task: Task, node: Any) -> bool:
        ...

    @abstractmethod
    def answer(self, task: Task, node: Any) -> str:
        ...

    @abstractmethod
    def render(self, payload: Any) -> Any:
        ...


def _emit(trace: SearchTrace, adapter: ForwardAdapter, kind: EventKind, depth: int, **detail: Any) -> None:
    drain = getattr(adapter, "drain_calls", None)
    calls = drain() if drain else []
    if calls:
        detail["llm"] = calls
    trace.emit(kind, depth, **detail)


def run_cot(adapter: ForwardAdapter, x: Any, t: Any, cfg: EngineConfig = EngineConfig()) -> SearchTrace:
    task = Task(x, t)
    trace = SearchTrace("cot")
    trace.iterations = 1
    try:
        node = adapter.greedy_chain(task)
        _emit(trace, adapter, EventKind.FORWARD, 1, state=adapter.render(node))
        ok = adapter.is_solution(task, node)
        _emit(trace, adapter, EventKind.VERIFY, 1, valid=ok)
        if not ok:
            return trace.finish(Unsolved("chain does not verify"))
        answer = adapter.answer(task, node)
    except (AdapterFailure, DeadEnd) as exc:
        return trace.finish(Unsolved(f"adapter failure: {exc}"))
    _emit(trace, adapter, EventKind.OUTPUT, 1, answer=answer)
    return trace.finish(Solved(answer))


def run_forward_tree(adapter: ForwardAdapter, x: Any, t: Any, cfg: EngineConfig = EngineConfig(),
                     b: int = 5) -> SearchTrace:
    kind = ForwardTree(b)
    task = Task(x, t)
    trace = SearchTrace(f"forward-tree-{kind.width}")
    try:
        beam = [adapter.root(task)]
        for layer in range(1, cfg.max_steps + 1):
            trace.iterations = layer
            children = []
            for node in beam:
                for child in adapter.propose(task, node):
                    _emit(trace, adapter, EventKind.FORWARD, layer, state=adapter.render(child))
                    if adapter.is_solution(task, child):
                        _emit(trace, adapter, EventKind.VERIFY, layer, valid=True)
                        answer = adapter.answer(task, child)
                        _emit(trace, adapter, EventKind.OUTPUT, layer, answer=answer)
                        return trace.finish(Solved(answer))
                    children.append(child)
            if not children:
                return trace.finish(Unsolved("search exhausted"))
            scored = sorted(enumerate(children), key=lambda ic: (-adapter.evaluate(task, ic[1]), ic[0]))
            beam = [c for _, c in scored[:kind.width]]
    except (AdapterFailure, DeadEnd) as exc:
        return trace.finish(Unsolved(f"adapter failure: {exc}"))
    return trace.finish(Unsolved(f"no solution within {cfg.max_steps} layers"))
