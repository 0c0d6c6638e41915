"""The two search loops: RFF-T (target-guided tree search with backtracking)
and RFF-G (target-guided accumulation of facts).

Avoid-set indexing: ``A_d`` holds the failed ``(S_{d+1}, T_{d+1})`` attempts
made from the frame at depth ``d``; it is the set R consults when producing
depth ``d + 1`` and it is emptied whenever depth ``d`` is (re)entered.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

from .core import (
    AdapterFailure,
    AvoidSet,
    AvoidSlice,
    BackwardMode,
    Capability,
    ConfigError,
    DeadEnd,
    DomainAdapter,
    EngineConfig,
    EventKind,
    Frame,
    Outcome,
    ProblemState,
    SearchTrace,
    Solved,
    StepLimit,
    TargetState,
    Task,
    Unsolved,
    set_backward_mode,
)

log = logging.getLogger(__name__)

RffTFrame = Frame

__all__ = ["run_rff_t", "run_rff_g", "set_backward_mode", "RffTFrame", "RffGAccumulator"]


def _emit(trace: SearchTrace, adapter: DomainAdapter, kind: EventKind, depth: int, **detail: Any) -> None:
    calls = adapter.drain_calls()
    if calls:
        detail["llm"] = calls
    trace.emit(kind, depth, **detail)


def _check_cfg(cfg: EngineConfig) -> None:
    if not isinstance(cfg, EngineConfig):
        raise ConfigError(f"expected EngineConfig, got {type(cfg).__name__}")


def _root(adapter: DomainAdapter, task: Task):
    s0 = ProblemState(adapter.canonicalize(adapter.initial_state(task)), 0, "input")
    t0 = TargetState(adapter.canonicalize(adapter.initial_target(task)), 0, "")
    return s0, t0


def _canon_target(adapter: DomainAdapter, t: TargetState, depth: int) -> TargetState:
    return TargetState(adapter.canonicalize(t.payload), depth, t.transition_note)


def _canon_state(adapter: DomainAdapter, s: ProblemState, depth: int) -> ProblemState:
    return ProblemState(adapter.canonicalize(s.payload), depth, s.provenance)


class _TreeSearch:
    """Mutable bookkeeping for one RFF-T run."""

    def __init__(self, adapter: DomainAdapter, task: Task, cfg: EngineConfig, trace: SearchTrace,
                 next_target: Callable[[Frame, AvoidSlice, int], TargetState]):
        self.adapter = adapter
        self.task = task
        self.cfg = cfg
        self.trace = trace
        self.next_target = next_target
        self.avoid = AvoidSet(adapter.canonical_key)
        self.frames: List[Frame] = []

    def r(self, payload: Any) -> Any:
        return self.adapter.render(payload)

    def emit(self, kind: EventKind, depth: int, **detail: Any) -> None:
        _emit(self.trace, self.adapter, kind, depth, **detail)

    def pop_to(self, depth: int, reason: str) -> Optional[Outcome]:
        """Discard every frame deeper than ``depth``, recording the first one as failed."""
        here = self.frames[-1].depth
        if depth < 0:
            return Unsolved(f"search exhausted ({reason})")
        failed = self.frames[depth + 1]
        pair = self.avoid.add(depth, failed.state, failed.target)
        del self.frames[depth + 1:]
        self.emit(EventKind.BACKTRACK, here, to=depth, reason=reason,
                  recorded=[pair[0].decode(), pair[1].decode()])
        return None

    def solved(self) -> Outcome:
        answer = self.adapter.output(self.task, self.frames)
        self.emit(EventKind.OUTPUT, self.frames[-1].depth, answer=answer)
        return Solved(answer)

    def check_and_verify(self) -> Optional[Outcome]:
        top = self.frames[-1]
        i = top.depth
        ok = self.adapter.state_check(self.task, top.state, top.target)
        self.emit(EventKind.CHECK, i, result=ok)
        if not ok:
            return None
        j = self.adapter.verify(self.task, self.frames)
        self.emit(EventKind.VERIFY, i, result=j, valid=j == i)
        if j == i:
            return self.solved()
        if i == 0:
            return Unsolved("input fails verification")
        j = min(max(j, 0), i - 1)
        return self.pop_to(j, "verify")

    def run(self, s0: ProblemState, t0: TargetState) -> Outcome:
        self.frames = [Frame(0, s0, t0)]
        # degenerate input: check before spending a G call
        out = self.check_and_verify()
        if out is not None:
            return out
        budget = self.cfg.iteration_budget
        while True:
            i = self.frames[-1].depth
            if self.trace.iterations >= budget:
                return StepLimit(f"iteration budget {budget} reached")
            if i >= self.cfg.max_steps:
                return StepLimit(f"depth limit L={self.cfg.max_steps} reached")
            self.trace.iterations += 1
            parent = self.frames[-1]
            i += 1
            self.avoid.clear(i)
            tried = self.avoid.slice(i - 1)
            if len(tried) >= self.cfg.width:
                out = self.pop_to(i - 2, f"width {self.cfg.width} exhausted at depth {i - 1}")
                if out is not None:
                    return out
                continue
            try:
                target = _canon_target(self.adapter, self.next_target(parent, tried, i), i)
            except DeadEnd as exc:
                out = self.pop_to(i - 2, f"G: {exc}")
                if out is not None:
                    return out
                continue
            self.emit(EventKind.BACKWARD, i, parent=self.r(parent.target.payload),
                      target=self.r(target.payload), transition=target.transition_note)
            try:
                state = self.adapter.forward_step(self.task, parent.state, target, tried)
            except DeadEnd as exc:
                out = self.pop_to(i - 2, f"R: {exc}")
                if out is not None:
                    return out
                continue
            state = _canon_state(self.adapter, state, i)
            if self.avoid.pair_key(state, target) in tried:
                raise AdapterFailure("forward step repeated an avoided attempt")
            self.emit(EventKind.FORWARD, i, state=self.r(state.payload), target=self.r(target.payload),
                      move=state.provenance, avoid=tried.rendered())
            self.frames.append(Frame(i, state, target))
            out = self.check_and_verify()
            if out is not None:
                return out


def run_rff_t(adapter: DomainAdapter, x: Any, t: Any, cfg: EngineConfig = EngineConfig()) -> SearchTrace:
    """Target-guided tree search with verification-driven backtracking.

    Each iteration asks G for the pre-target of the current target, asks R for
    one forward step toward it (skipping recorded failures), and, when C says
    the two have met, asks V whether the whole path is right.  A wrong path,
    a dead end from G or R, or ``width`` failed attempts at one depth sends the
    search back to a shallower frame.

    The returned trace carries the final frame stack as ``trace.frames``.
    """
    _check_cfg(cfg)
    if adapter.capability is not Capability.TREE_SEARCH:
        raise ConfigError("run_rff_t needs a TreeSearch adapter")
    task = Task(x, t)
    trace = SearchTrace("rff-t")
    s0, t0 = _root(adapter, task)

    if cfg.backward_mode is BackwardMode.PAIR:
        def next_target(parent: Frame, tried: AvoidSlice, depth: int) -> TargetState:
            return adapter.last_step(task, parent.state, parent.target, tried)
    else:
        chain: List[TargetState] = [t0]

        def next_target(parent: Frame, tried: AvoidSlice, depth: int) -> TargetState:
            if depth >= len(chain):
                raise DeadEnd("frozen target chain is shorter than the path")
            return chain[depth]

    search = _TreeSearch(adapter, task, cfg, trace, next_target)
    search.frames = [Frame(0, s0, t0)]
    try:
        if cfg.backward_mode is BackwardMode.SINGLE:
            grounded = _backward_chain(adapter, task, cfg, trace, s0, chain)
            if not grounded:
                return trace.finish(Unsolved("backward chain not grounded"))
        outcome = search.run(s0, t0)
    except (AdapterFailure, DeadEnd) as exc:
        outcome = Unsolved(f"adapter failure: {exc}")
    trace.frames = list(search.frames)
    return trace.finish(outcome)


def _backward_chain(adapter: DomainAdapter, task: Task, cfg: EngineConfig, trace: SearchTrace,
                    s0: ProblemState, chain: List[TargetState]) -> bool:
    """Single mode: decompose from the goal using only the input, up to L calls."""
    empty = AvoidSlice()
    while not adapter.is_grounded(task, s0, chain[-1]):
        if len(chain) - 1 >= cfg.max_steps:
            return False
        depth = len(chain)
        target = _canon_target(adapter, adapter.last_step(task, s0, chain[-1], empty), depth)
        _emit(trace, adapter, EventKind.BACKWARD, depth, parent=adapter.render(chain[-1].payload),
              target=adapter.render(target.payload), transition=target.transition_note)
        chain.append(target)
    return True


@dataclass
class RffGAccumulator:
    """Growing fact state; refuses any update that would drop information."""

    adapter: DomainAdapter
    facts: Any
    step: int = 0
    history: List[Any] = field(default_factory=list)

    def extend(self, new: Any) -> Any:
        merged = self.adapter.canonicalize(self.adapter.accumulate(self.facts, new))
        if not self.adapter.includes(merged, self.facts):
            raise AdapterFailure("accumulation dropped an established fact")
        self.history.append(self.facts)
        self.facts = merged
        self.step += 1
        return merged


def run_rff_g(adapter: DomainAdapter, x: Any, t: Any, cfg: EngineConfig = EngineConfig()) -> SearchTrace:
    """Target-guided accumulation: facts only grow and there is no backtracking.

    Each iteration asks G for the step just before the current target, asks R
    for the facts that step yields, merges them into the state, and stops as
    soon as C reports the goal established.
    """
    _check_cfg(cfg)
    if adapter.capability is not Capability.DAG_ACCUMULATION:
        raise ConfigError("run_rff_g needs a DagAccumulation adapter")
    task = Task(x, t)
    trace = SearchTrace("rff-g")
    s0, t0 = _root(adapter, task)
    acc = RffGAccumulator(adapter, s0.payload)
    empty = AvoidSlice()
    r = adapter.render

    def done(state: ProblemState, target: TargetState, depth: int) -> bool:
        ok = adapter.state_check(task, state, target)
        _emit(trace, adapter, EventKind.CHECK, depth, result=ok)
        return ok

    def finish_solved(state: ProblemState, depth: int) -> SearchTrace:
        answer = adapter.output(task, [Frame(depth, state, t0)])
        _emit(trace, adapter, EventKind.OUTPUT, depth, answer=answer)
        return trace.finish(Solved(answer))

    def step(state: ProblemState, target: TargetState, i: int) -> ProblemState:
        new = adapter.forward_step(task, state, target, empty)
        before = acc.facts
        merged = acc.extend(new.payload)
        _emit(trace, adapter, EventKind.FORWARD, i, target=r(target.payload), added=r(new.payload),
              facts=r(merged), grew=not adapter.includes(before, merged))
        return ProblemState(merged, i, new.provenance)

    try:
        state = s0
        if done(state, t0, 0):
            return finish_solved(state, 0)

        if cfg.backward_mode is BackwardMode.PAIR:
            target = t0
            for i in range(1, cfg.max_steps + 1):
                trace.iterations = i
                target = _canon_target(adapter, adapter.last_step(task, state, target, empty), i)
                _emit(trace, adapter, EventKind.BACKWARD, i, target=r(target.payload), transition=target.transition_note)
                state = step(state, target, i)
                if done(state, target, i):
                    return finish_solved(state, i)
            return trace.finish(StepLimit(f"goal not established within L={cfg.max_steps} steps"))

        chain = [t0]
        if not _backward_chain(adapter, task, cfg, trace, s0, chain):
            return trace.finish(Unsolved("backward chain not grounded"))
        i = 0
        for target in reversed(chain):
            while not adapter.target_reached(task, state, target):
                if i >= cfg.max_steps:
                    return trace.finish(StepLimit(f"goal not established within L={cfg.max_steps} steps"))
                i += 1
                trace.iterations = i
                state = step(state, target, i)
                if done(state, target, i):
                    return finish_solved(state, i)
        return trace.finish(Unsolved("frozen target chain completed without reaching the goal"))
    except (AdapterFailure, DeadEnd) as exc:
        return trace.finish(Unsolved(f"adapter failure: {exc}"))

