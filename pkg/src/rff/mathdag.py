"""Synthetic arithmetic word problems whose solutions form a DAG of facts.

A problem is a list of variables, each either a literal or a binary
operation over earlier variables.  Facts start empty; every forward step
binds exactly one variable, literals included (reading a number off the
problem text counts as a step).
"""
from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .baselines import ForwardAdapter
from .core import (
    AvoidSlice,
    Capability,
    DeadEnd,
    DomainAdapter,
    Frame,
    ProblemState,
    RffError,
    TargetState,
    Task,
)

log = logging.getLogger(__name__)

DAG_OPS = ("+", "-", "*", "/")
TEMPLATE_VERSION = 1
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class NoProgress(RffError):
    """G could not find a dependency to work on; the problem is malformed."""


class Stuck(DeadEnd):
    """R found nothing computable toward the target."""


@dataclass(frozen=True)
class Literal:
    value: Fraction

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: str
    rhs: str

    def __post_init__(self) -> None:
        if self.op not in DAG_OPS:
            raise ValueError(f"unknown operator {self.op!r}")

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


Definition = Union[Literal, BinOp]


def _apply(op: str, a: Fraction, b: Fraction) -> Fraction:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise ZeroDivisionError("division by zero in problem definition")
    return a / b


def deps(defn: Definition) -> Tuple[str, ...]:
    return () if isinstance(defn, Literal) else (defn.lhs, defn.rhs)


@dataclass(frozen=True)
class DagProblem:
    variables: Tuple[Tuple[str, Definition], ...]
    goal: str
    depth: int = 0
    surface_text: Optional[str] = None
    answer: Optional[Fraction] = None

    def __post_init__(self) -> None:
        seen: Set[str] = set()
        for name, defn in self.variables:
            if not _NAME.match(name):
                raise ValueError(f"bad variable name {name!r}")
            if name in seen:
                raise ValueError(f"variable {name!r} defined twice")
            for d in deps(defn):
                if d not in seen:
                    raise ValueError(f"{name} refers to {d!r} before it is defined")
            seen.add(name)
        if self.goal not in seen:
            raise ValueError(f"goal {self.goal!r} is not defined")
        if not self.depth:
            object.__setattr__(self, "depth", self.chain_length(self.goal))
        if self.answer is None:
            object.__setattr__(self, "answer", self.evaluate()[self.goal])

    @property
    def defs(self) -> Dict[str, Definition]:
        return dict(self.variables)

    @property
    def order(self) -> Dict[str, int]:
        return {name: k for k, (name, _) in enumerate(self.variables)}

    def evaluate(self) -> Dict[str, Fraction]:
        """Topological evaluation of every variable."""
        env: Dict[str, Fraction] = {}
        for name, defn in self.variables:
            if isinstance(defn, Literal):
                env[name] = defn.value
            else:
                env[name] = _apply(defn.op, env[defn.lhs], env[defn.rhs])
        return env

    def chain_length(self, name: str) -> int:
        """Longest dependency chain ending at ``name``, counting ``name`` itself."""
        memo: Dict[str, int] = {}
        for var, defn in self.variables:
            memo[var] = 1 + max((memo[d] for d in deps(defn)), default=0)
            if var == name:
                break
        return memo[name]

    def ancestry(self, name: str) -> Set[str]:
        """``name`` and everything it transitively depends on."""
        defs = self.defs
        out: Set[str] = set()
        todo = [name]
        while todo:
            v = todo.pop()
            if v not in out:
                out.add(v)
                todo.extend(deps(defs[v]))
        return out

    def render_definition(self, name: str) -> str:
        return f"{name} = {self.defs[name]}"


@dataclass(frozen=True)
class FactSet:
    bindings: Tuple[Tuple[str, Fraction], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", tuple(sorted(self.bindings)))

    @classmethod
    def of(cls, mapping: Optional[Mapping[str, Union[int, str, Fraction]]] = None, **kw) -> "FactSet":
        items = dict(mapping or {}, **kw)
        return cls(tuple((k, Fraction(v)) for k, v in items.items()))

    def as_dict(self) -> Dict[str, Fraction]:
        return dict(self.bindings)

    def __contains__(self, name: object) -> bool:
        return any(k == name for k, _ in self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)

    def get(self, name: str) -> Optional[Fraction]:
        return self.as_dict().get(name)

    def merged(self, other: "FactSet") -> "FactSet":
        mine = self.as_dict()
        for k, v in other.bindings:
            if k in mine and mine[k] != v:
                raise ValueError(f"conflicting values for {k}: {mine[k]} vs {v}")
            mine[k] = v
        return FactSet(tuple(mine.items()))

    def includes(self, other: "FactSet") -> bool:
        mine = self.as_dict()
        return all(mine.get(k) == v for k, v in other.bindings)

    def key(self) -> bytes:
        return ";".join(f"{k}={v}" for k, v in self.bindings).encode()

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}={v}" for k, v in self.bindings) + "}"


@dataclass(frozen=True)
class MathTarget:
    needed: str
    rationale: str = ""

    def key(self) -> bytes:
        return self.needed.encode()


# --- generator --------------------------------------------------------------

def generate_problem(seed: int, depth: int, width: int = 1, max_literal: int = 12) -> DagProblem:
    """A random problem whose goal sits at the end of a dependency chain of length ``depth``.

    The goal's ancestry is a chain of ``depth`` variables plus at most one
    extra literal, so it never needs more than ``depth + 1`` bindings.  Each
    level gets ``width - 1`` distractor variables the goal does not use.
    """
    if depth < 1 or width < 1:
        raise ValueError("depth and width must be >= 1")
    rng = random.Random(f"mathdag:{seed}:{depth}:{width}")
    variables: List[Tuple[str, Definition]] = []
    env: Dict[str, Fraction] = {}
    counter = iter(range(10**6))

    def fresh() -> str:
        return f"v{next(counter)}"

    def add(name: str, defn: Definition) -> None:
        variables.append((name, defn))
        env[name] = defn.value if isinstance(defn, Literal) else _apply(defn.op, env[defn.lhs], env[defn.rhs])

    def lit() -> Literal:
        return Literal(Fraction(rng.randint(1, max_literal)))

    def pick_op(a: str, b: str) -> Optional[BinOp]:
        ops = ["+", "-", "*"]
        if env[b] != 0 and (env[a] / env[b]).denominator == 1:
            ops.append("/")
        op = rng.choice(ops)
        # keep numbers small and readable
        if op == "*" and abs(env[a] * env[b]) > 10**4:
            op = "+"
        return BinOp(op, a, b)

    head = fresh()
    add(head, lit())
    ancestry = [head]
    spare_literal = True
    for level in range(2, depth + 1):
        for _ in range(width - 1):
            pool = [n for n, _ in variables]
            if rng.random() < 0.5 or len(pool) < 2:
                add(fresh(), lit())
            else:
                a, b = rng.sample(pool, 2)
                add(fresh(), pick_op(a, b))
        if spare_literal and rng.random() < 0.5:
            other = fresh()
            add(other, lit())
            ancestry.append(other)
            spare_literal = False
        else:
            other = rng.choice(ancestry[:-1] or ancestry)
        a, b = (head, other) if rng.random() < 0.5 else (other, head)
        name = fresh()
        add(name, pick_op(a, b))
        ancestry.append(name)
        head = name
    for _ in range(width - 1 if depth == 1 else 0):
        add(fresh(), lit())
    problem = DagProblem(tuple(variables), head, depth)
    return DagProblem(problem.variables, head, depth, render_surface(problem), problem.answer)


# --- surface text -----------------------------------------------------------

_SURFACE = {
    "literal": "{name} is {value}.",
    "+": "{name} is the sum of {lhs} and {rhs}.",
    "-": "{name} is {lhs} minus {rhs}.",
    "*": "{name} is {lhs} times {rhs}.",
    "/": "{name} is {lhs} divided by {rhs}.",
    "question": "What is {goal}?",
}


def render_surface(problem: DagProblem) -> str:
    lines = []
    for name, defn in problem.variables:
        if isinstance(defn, Literal):
            lines.append(_SURFACE["literal"].format(name=name, value=defn.value))
        else:
            lines.append(_SURFACE[defn.op].format(name=name, lhs=defn.lhs, rhs=defn.rhs))
    lines.append(_SURFACE["question"].format(goal=problem.goal))
    return " ".join(lines)


# --- G, R, C ----------------------------------------------------------------

def _ready(name: str, facts: Mapping[str, Fraction], defs: Mapping[str, Definition]) -> bool:
    return name not in facts and all(d in facts for d in deps(defs[name]))


def _unbound_ancestry(name: str, facts: Mapping[str, Fraction], problem: DagProblem) -> Set[str]:
    return {v for v in problem.ancestry(name) if v not in facts}


def dag_last_step(facts: FactSet, target: MathTarget, problem: DagProblem) -> MathTarget:
    """The dependency of the wanted variable that is closest to being computable.

    The wanted variable is ``target.needed`` while it is unbound, otherwise
    the goal.  If it can be computed now it is returned itself; otherwise the
    unbound direct dependency with the fewest unbound transitive
    dependencies wins, ties broken by definition order.
    """
    have = facts.as_dict()
    defs = problem.defs
    want = target.needed if target.needed not in have else problem.goal
    if want not in defs:
        raise NoProgress(f"unknown variable {want!r}")
    if want in have:
        raise NoProgress(f"{want} is already known")
    if _ready(want, have, defs):
        return MathTarget(want, problem.render_definition(want))
    order = problem.order
    options = [d for d in dict.fromkeys(deps(defs[want])) if d not in have]
    if not options:
        raise NoProgress(f"no unbound dependency of {want}")
    best = min(options, key=lambda d: (len(_unbound_ancestry(d, have, problem)), order[d]))
    return MathTarget(best, problem.render_definition(want))


def dag_forward_step(facts: FactSet, target: MathTarget, problem: DagProblem) -> FactSet:
    """Bind ``target.needed`` if it is computable, else one ready ancestor of it."""
    have = facts.as_dict()
    defs = problem.defs
    if target.needed in have:
        raise Stuck(f"{target.needed} is already bound")
    order = problem.order
    ready = sorted((v for v in problem.ancestry(target.needed) if _ready(v, have, defs)), key=order.__getitem__)
    if not ready:
        raise Stuck(f"nothing computable toward {target.needed}")
    name = target.needed if target.needed in ready else ready[0]
    defn = defs[name]
    value = defn.value if isinstance(defn, Literal) else _apply(defn.op, have[defn.lhs], have[defn.rhs])
    return facts.merged(FactSet(((name, value),)))


def dag_state_check(facts: FactSet, goal: str) -> bool:
    return goal in facts


# --- adapter ----------------------------------------------------------------

def _problem(task: Task) -> DagProblem:
    x = task.input
    return x if isinstance(x, DagProblem) else x[0]


def _initial_facts(task: Task) -> FactSet:
    x = task.input
    return FactSet() if isinstance(x, DagProblem) else x[1]


@dataclass(frozen=True)
class DagNode:
    """Forward-only search node for the baselines."""

    facts: FactSet
    steps: Tuple[str, ...] = ()


class MathDagAdapter(DomainAdapter, ForwardAdapter):
    """Deterministic accumulation adapter.

    The task input is a :class:`DagProblem` (or a ``(problem, facts)`` pair
    to start from given facts); the task goal is the goal variable name.
    """

    capability = Capability.DAG_ACCUMULATION

    def canonicalize(self, payload):
        return payload

    def canonical_key(self, payload) -> bytes:
        if isinstance(payload, DagNode):
            return payload.facts.key()
        return payload.key()

    def render(self, payload) -> str:
        if isinstance(payload, MathTarget):
            return payload.needed
        if isinstance(payload, DagNode):
            return str(payload.facts)
        return str(payload)

    def initial_state(self, task: Task) -> FactSet:
        return _initial_facts(task)

    def initial_target(self, task: Task) -> MathTarget:
        return MathTarget(task.goal or _problem(task).goal)

    def last_step(self, task: Task, state: ProblemState, target: TargetState,
                  avoid: AvoidSlice) -> TargetState:
        t = dag_last_step(state.payload, target.payload, _problem(task))
        return TargetState(t, target.depth + 1, t.rationale)

    def forward_step(self, task: Task, state: ProblemState, target: TargetState,
                     avoid: AvoidSlice) -> ProblemState:
        new = dag_forward_step(state.payload, target.payload, _problem(task))
        added = FactSet(tuple(b for b in new.bindings if b[0] not in state.payload))
        name = added.bindings[0][0]
        return ProblemState(added, state.depth + 1, _problem(task).render_definition(name))

    def state_check(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        return dag_state_check(state.payload, task.goal or _problem(task).goal)

    def target_reached(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        return target.payload.needed in state.payload

    def is_grounded(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        return _ready(target.payload.needed, state.payload.as_dict(), _problem(task).defs) or \
            target.payload.needed in state.payload

    def output(self, task: Task, frames: Sequence[Frame]) -> str:
        facts = frames[-1].state.payload
        return str(facts.get(task.goal or _problem(task).goal))

    def accumulate(self, old: FactSet, new: FactSet) -> FactSet:
        return old.merged(new)

    def includes(self, big: FactSet, small: FactSet) -> bool:
        return big.includes(small)

    # forward-only baselines: bind ready variables in definition order
    def root(self, task: Task) -> DagNode:
        return DagNode(_initial_facts(task))

    def propose(self, task: Task, node: DagNode) -> List[DagNode]:
        problem = _problem(task)
        have = node.facts.as_dict()
        defs = problem.defs
        out = []
        for name, defn in problem.variables:
            if _ready(name, have, defs):
                value = defn.value if isinstance(defn, Literal) else _apply(defn.op, have[defn.lhs], have[defn.rhs])
                out.append(DagNode(node.facts.merged(FactSet(((name, value),))), node.steps + (name,)))
        return out

    def evaluate(self, task: Task, node: DagNode) -> float:
        problem = _problem(task)
        need = problem.ancestry(task.goal or problem.goal)
        return float(sum(1 for k, _ in node.facts.bindings if k in need))

    def greedy_chain(self, task: Task) -> DagNode:
        node = self.root(task)
        goal = task.goal or _problem(task).goal
        while goal not in node.facts:
            kids = self.propose(task, node)
            if not kids:
                break
            node = kids[0]
        return node

    def is_solution(self, task: Task, node: DagNode) -> bool:
        problem = _problem(task)
        goal = task.goal or problem.goal
        return node.facts.get(goal) == problem.answer

    def answer(self, task: Task, node: DagNode) -> str:
        return str(node.facts.get(task.goal or _problem(task).goal))


# --- problem files ----------------------------------------------------------

def problem_to_record(problem: DagProblem) -> dict:
    return {
        "variables": [[name, str(d) if isinstance(d, Literal) else [d.op, d.lhs, d.rhs]]
                      for name, d in problem.variables],
        "goal": problem.goal,
        "depth": problem.depth,
        "answer": str(problem.answer),
        "surface_text": problem.surface_text,
    }


def problem_from_record(rec: dict) -> DagProblem:
    variables = []
    for name, d in rec["variables"]:
        variables.append((name, Literal(Fraction(d)) if isinstance(d, (str, int)) else BinOp(*d)))
    problem = DagProblem(tuple(variables), rec["goal"], rec.get("depth", 0), rec.get("surface_text"))
    if "answer" in rec and Fraction(rec["answer"]) != problem.answer:
        raise ValueError(f"stored answer {rec['answer']} disagrees with evaluation {problem.answer}")
    return problem


@dataclass(frozen=True)
class WordProblem:
    """A free-text problem (GSM8K style) with its reference answer."""

    question: str
    answer: Optional[Fraction] = None
    solution: str = ""


def parse_gsm8k(rec: dict) -> WordProblem:
    text = rec.get("answer", "")
    m = re.search(r"####\s*([-\d,./]+)\s*$", text.strip())
    value = Fraction(m.group(1).replace(",", "")) if m else None
    return WordProblem(rec["question"], value, text[: m.start()].strip() if m else text)


def load_problems(path: Union[str, Path]) -> List[Union[DagProblem, WordProblem]]:
    """Read a JSONL problem file; structured DAG records and GSM8K records may be mixed."""
    out: List[Union[DagProblem, WordProblem]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "variables" in rec:
                out.append(problem_from_record(rec))
            elif "question" in rec:
                out.append(parse_gsm8k(rec))
            else:
                raise ValueError(f"{path}:{lineno}: neither a DAG problem nor a GSM8K record")
    return out


def write_problems(path: Union[str, Path], problems: Iterable[DagProblem]) -> int:
    n = 0
    with open(path, "w") as fh:
        for p in problems:
            fh.write(json.dumps(problem_to_record(p)) + "\n")
            n += 1
    return n
