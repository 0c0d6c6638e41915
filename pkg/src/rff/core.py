"""Domain-neutral types shared by the search engines.

States and targets are immutable snapshots around an opaque, adapter-owned
payload.  Everything the engines need to know about a problem family goes
through :class:`DomainAdapter`.
"""
from __future__ import annotations

import enum
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

Key = bytes
KeyPair = Tuple[Key, Key]


class RffError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(RffError, ValueError):
    """Invalid engine or run configuration."""


class AdapterFailure(RffError):
    """An adapter call failed or produced content that could not be used."""


class DeadEnd(RffError):
    """Nothing further can be tried from the current frame.

    Adapters raise this (or a subclass) from G or R; the tree engine treats it
    as a signal to backtrack, not as a failure of the run.
    """


class Capability(enum.Enum):
    TREE_SEARCH = "TreeSearch"
    DAG_ACCUMULATION = "DagAccumulation"


class BackwardMode(enum.Enum):
    PAIR = "pair"
    SINGLE = "single"


@dataclass(frozen=True)
class ProblemState:
    payload: Any
    depth: int = 0
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be non-negative")


@dataclass(frozen=True)
class TargetState:
    payload: Any
    depth: int = 0
    transition_note: str = ""

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.depth >= 1 and not self.transition_note:
            raise ValueError("targets below the root need an explicit transition")


@dataclass(frozen=True)
class Task:
    """The run's input ``x`` and goal ``t``."""

    input: Any
    goal: Any


@dataclass(frozen=True)
class Frame:
    """One level of the tree engine's stack: ``(S_i, T_i)`` at depth ``i``."""

    depth: int
    state: ProblemState
    target: TargetState


@dataclass(frozen=True)
class AvoidSlice:
    """Read-only view of the avoid entries at one depth, as canonical key pairs."""

    pairs: FrozenSet[KeyPair] = frozenset()

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def target_keys(self) -> Set[Key]:
        return {t for _, t in self.pairs}

    def rendered(self) -> List[List[str]]:
        return sorted([s.decode(), t.decode()] for s, t in self.pairs)


class AvoidSet:
    """Per-depth record of failed ``(state, target)`` attempts.

    Entries are stored by canonical key, so membership is exact on canonical
    payloads.  ``key`` is normally ``adapter.canonical_key``.
    """

    def __init__(self, key: Callable[[Any], Key]):
        self._key = key
        self.entries: Dict[int, Set[KeyPair]] = {}

    def pair_key(self, state: ProblemState, target: TargetState) -> KeyPair:
        return self._key(state.payload), self._key(target.payload)

    def add(self, depth: int, state: ProblemState, target: TargetState) -> KeyPair:
        pair = self.pair_key(state, target)
        self.entries.setdefault(depth, set()).add(pair)
        return pair

    def contains(self, depth: int, state: ProblemState, target: TargetState) -> bool:
        return self.pair_key(state, target) in self.entries.get(depth, ())

    def clear(self, depth: int) -> None:
        self.entries.pop(depth, None)

    def size(self, depth: int) -> int:
        return len(self.entries.get(depth, ()))

    def slice(self, depth: int) -> AvoidSlice:
        return AvoidSlice(frozenset(self.entries.get(depth, ())))


def avoid_contains(avoid: AvoidSet, depth: int, s: ProblemState, t: TargetState) -> bool:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    return avoid.contains(depth, s, t)


class EventKind(str, enum.Enum):
    BACKWARD = "BackwardStep"
    FORWARD = "ForwardStep"
    CHECK = "StateCheck"
    VERIFY = "Verify"
    BACKTRACK = "Backtrack"
    OUTPUT = "Output"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: EventKind
    depth: int
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_line(self) -> str:
        # field order is part of the file format: seq, kind, depth, detail
        head = json.dumps({"seq": self.seq, "kind": self.kind.value, "depth": self.depth})
        return head[:-1] + ', "detail": ' + json.dumps(self.detail, sort_keys=True) + "}"


SOLVED = "Solved"
UNSOLVED = "Unsolved"
STEP_LIMIT = "StepLimit"


@dataclass(frozen=True)
class Outcome:
    status: str
    answer: Optional[str] = None
    reason: Optional[str] = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def Solved(answer: str) -> Outcome:
    return Outcome(SOLVED, answer=answer)


def Unsolved(reason: str) -> Outcome:
    return Outcome(UNSOLVED, reason=reason)


def StepLimit(reason: str = "step limit reached") -> Outcome:
    return Outcome(STEP_LIMIT, reason=reason)


class SearchTrace:
    """Ordered log of engine events plus the visited-state counter.

    Serialized as JSON lines: one line per event with keys in the order
    ``seq, kind, depth, detail`` (detail keys sorted), followed by a single
    summary line with keys ``outcome, answer, reason, visited_states,
    iterations``.
    """

    def __init__(self, method: str = ""):
        self.method = method
        self.events: List[TraceEvent] = []
        self.visited_states = 0
        self.iterations = 0
        self.outcome: Optional[Outcome] = None

    def emit(self, kind: EventKind, depth: int, **detail: Any) -> TraceEvent:
        if self.outcome is not None:
            raise RuntimeError("trace already finished")
        event = TraceEvent(len(self.events), kind, depth, detail)
        self.events.append(event)
        if kind is EventKind.FORWARD:
            self.visited_states += 1
        return event

    def finish(self, outcome: Outcome) -> "SearchTrace":
        self.outcome = outcome
        return self

    @property
    def solved(self) -> bool:
        return self.outcome is not None and self.outcome.solved

    def of_kind(self, kind: EventKind) -> List[TraceEvent]:
        return [e for e in self.events if e.kind is kind]

    def to_jsonl(self) -> str:
        lines = [e.to_line() for e in self.events]
        out = self.outcome or Outcome("Running")
        lines.append(json.dumps({
            "outcome": out.status,
            "answer": out.answer,
            "reason": out.reason,
            "visited_states": self.visited_states,
            "iterations": self.iterations,
        }))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SearchTrace":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        trace = cls()
        for row in rows[:-1]:
            trace.events.append(TraceEvent(row["seq"], EventKind(row["kind"]), row["depth"], row["detail"]))
        summary = rows[-1]
        trace.visited_states = summary["visited_states"]
        trace.iterations = summary["iterations"]
        trace.outcome = Outcome(summary["outcome"], summary["answer"], summary["reason"])
        return trace


@dataclass(frozen=True)
class EngineConfig:
    """Search limits.

    ``max_steps`` is the depth bound L, ``width`` the per-depth attempt bound n.
    ``max_iterations`` caps outer loop iterations; ``None`` means ``L * n * n``.
    """

    max_steps: int = 20
    width: int = 5
    backward_mode: BackwardMode = BackwardMode.PAIR
    seed: int = 0
    per_call_timeout: float = 60.0
    max_iterations: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.max_steps, int) or self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps!r}")
        if not isinstance(self.width, int) or self.width < 1:
            raise ConfigError(f"width must be >= 1, got {self.width!r}")
        if not isinstance(self.backward_mode, BackwardMode):
            raise ConfigError(f"unknown backward mode {self.backward_mode!r}")
        if not -(2**63) <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if self.per_call_timeout <= 0:
            raise ConfigError("per_call_timeout must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")

    @property
    def iteration_budget(self) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return self.max_steps * self.width * self.width


def set_backward_mode(cfg: EngineConfig, mode: BackwardMode | str) -> EngineConfig:
    return replace(cfg, backward_mode=BackwardMode(mode))


class DomainAdapter(ABC):
    """G, R, C, V and O for one problem family.

    Every hook receives the run's :class:`Task` so adapters can stay
    stateless and shareable across concurrent runs.  Tree-search adapters
    must implement :meth:`verify`; accumulation adapters must implement
    :meth:`accumulate` and :meth:`includes` instead.
    """

    capability: Capability = Capability.TREE_SEARCH
    shareable: bool = True

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        # ABCMeta has not computed __abstractmethods__ yet at this point
        if any(getattr(getattr(cls, name, None), "__isabstractmethod__", False) for name in dir(cls)):
            return
        if cls.capability is Capability.TREE_SEARCH and cls.verify is DomainAdapter.verify:
            raise TypeError(f"{cls.__name__} is a TreeSearch adapter but does not implement verify")

    @abstractmethod
    def canonicalize(self, payload: Any) -> Any:
        ...

    @abstractmethod
    def canonical_key(self, payload: Any) -> Key:
        ...

    def render(self, payload: Any) -> Any:
        """JSON-friendly rendering of a payload for trace details."""
        return self.canonical_key(payload).decode()

    @abstractmethod
    def initial_state(self, task: Task) -> Any:
        ...

    @abstractmethod
    def initial_target(self, task: Task) -> Any:
        ...

    @abstractmethod
    def last_step(self, task: Task, state: ProblemState, target: TargetState,
                  avoid: AvoidSlice) -> TargetState:
        ...

    @abstractmethod
    def forward_step(self, task: Task, state: ProblemState, target: TargetState,
                     avoid: AvoidSlice) -> ProblemState:
        ...

    @abstractmethod
    def state_check(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        ...

    def verify(self, task: Task, frames: Sequence[Frame]) -> int:
        """Return ``len(frames) - 1`` if the path is correct, else the depth to resume from."""
        raise NotImplementedError

    @abstractmethod
    def output(self, task: Task, frames: Sequence[Frame]) -> str:
        ...

    def is_grounded(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        """Whether a backward chain ending at ``target`` can start from ``state``."""
        return self.state_check(task, state, target)

    def target_reached(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        """Whether ``state`` already establishes ``target`` (used by single-mode accumulation)."""
        return self.state_check(task, state, target)

    def drain_calls(self) -> List[dict]:
        """Model calls made since the last drain, for the trace (empty for local adapters)."""
        return []

    def accumulate(self, old: Any, new: Any) -> Any:
        raise NotImplementedError

    def includes(self, big: Any, small: Any) -> bool:
        raise NotImplementedError
