"""G, R, C, V and O backed by a chat model.

Model output is never trusted on arithmetic: every Game24 pre-target and
move is rechecked with exact rationals before it is accepted, and a run is
only Solved when the final chain passes :func:`rff.game24.verify_chain`.
A rejected reply gets one retry with the rejection reason appended; a
second rejection is a failed attempt for the engine.

Adapters keep the run's call log, so create one adapter per run and share
the :class:`ChatClient` between them.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..baselines import ForwardAdapter
from ..core import (
    AdapterFailure,
    AvoidSlice,
    Capability,
    DeadEnd,
    DomainAdapter,
    Frame,
    ProblemState,
    TargetState,
    Task,
)
from ..game24 import (
    ArithMove,
    Game24Node,
    NoCandidates,
    NumberSet,
    apply_op,
    as_numberset,
    chain_from_frames,
    check_expression,
    format_solution,
    to_fraction,
    verify_chain,
)
from ..mathdag import DagProblem, FactSet, Literal, MathTarget, WordProblem, _apply
from .client import CallRecord, ChatClient, Message
from .prompts import (
    ParseError,
    PromptTemplate,
    load_templates,
    parse_answer,
    parse_backtrack,
    parse_fact,
    parse_forward,
    parse_need,
    parse_target,
    parse_verdict,
)

log = logging.getLogger(__name__)

NONE = "(none)"


class LocalValidationError(AdapterFailure, DeadEnd):
    """The model's step failed the local exact-arithmetic recheck (twice)."""


class _Rejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _LlmBase:
    domain = ""
    shareable = False

    def __init__(self, client: ChatClient, templates: Optional[Dict[Tuple[str, str], PromptTemplate]] = None,
                 shots: Optional[int] = None):
        self.client = client
        self.templates = templates if templates is not None else load_templates()
        self.shots = client.cfg.shots if shots is None else shots
        self.temperature = client.cfg.temperature_for(self.domain)
        self.calls: List[CallRecord] = []
        self._pending: List[dict] = []

    def template(self, role: str) -> PromptTemplate:
        try:
            return self.templates[(self.domain, role)]
        except KeyError:
            raise AdapterFailure(f"no {self.domain} template for {role}") from None

    def drain_calls(self) -> List[dict]:
        out, self._pending = self._pending, []
        return out

    def ask(self, role: str, values: Dict[str, str], extra: Sequence[Message] = ()) -> str:
        messages = self.template(role).messages(values, self.shots) + list(extra)
        reply = self.client.chat(messages, self.temperature)
        rec = CallRecord(messages, reply.text, reply.retries)
        self.calls.append(rec)
        self._pending.append(dict(rec.as_detail(), role=role))
        return reply.text

    def ask_checked(self, role: str, values: Dict[str, str], accept: Callable[[str], Any],
                    error: type = LocalValidationError) -> Any:
        """Ask, validate with ``accept``; on rejection retry once with the reason spelled out."""
        text = self.ask(role, values)
        try:
            return accept(text)
        except (_Rejected, ParseError) as exc:
            reason = exc.reason if isinstance(exc, _Rejected) else str(exc)
            log.info("%s reply rejected: %s", role, reason)
        extra = [("assistant", text),
                 ("user", f"That reply was rejected: {reason}. Follow the required line format exactly, "
                          "check the arithmetic, and do not repeat anything already tried.")]
        text = self.ask(role, values, extra)
        try:
            return accept(text)
        except ParseError:
            raise
        except _Rejected as exc:
            raise error(f"{role}: {exc.reason}") from None


def _nums(ns: NumberSet) -> str:
    return str(ns) if len(ns) else NONE


def _steps(chain: Sequence[ArithMove]) -> str:
    return "\n".join(f"{k}. {m}" for k, m in enumerate(chain, start=1))


class LlmGame24Adapter(_LlmBase, DomainAdapter):
    """Game24 through a chat model, with local arithmetic checks."""

    domain = "Game24"
    capability = Capability.TREE_SEARCH

    canonicalize = staticmethod(as_numberset)

    def canonical_key(self, payload) -> bytes:
        return as_numberset(payload).key()

    def render(self, payload) -> str:
        return str(as_numberset(payload))

    def initial_state(self, task: Task) -> NumberSet:
        return as_numberset(task.input)

    def initial_target(self, task: Task) -> NumberSet:
        return NumberSet.of(task.goal)

    def last_step(self, task: Task, state: ProblemState, target: TargetState,
                  avoid: AvoidSlice) -> TargetState:
        current, parent = as_numberset(state.payload), as_numberset(target.payload)
        if len(current) < len(parent) + 2:
            raise NoCandidates(f"{current} cannot meet a decomposition of {parent}")
        tried = avoid.target_keys()
        tried_text = "; ".join(k.decode().replace(",", " ") for k in sorted(tried)) or NONE

        def accept(text: str) -> TargetState:
            fields = parse_target(text).fields
            a, op, b, c = fields["move"]
            if apply_op(a, op, b) != c:
                raise _Rejected(f"{a} {op} {b} is not {c}")
            if c not in parent.values:
                raise _Rejected(f"{c} is not one of the target numbers {parent}")
            expected = parent.without(c).with_(a, b)
            proposed = NumberSet(tuple(fields["numbers"]))
            if proposed != expected:
                raise _Rejected(f"replacing {c} by {a} and {b} gives {expected}, not {proposed}")
            if expected.key() in tried:
                raise _Rejected(f"target {expected} was already tried")
            return TargetState(expected, target.depth + 1, str(ArithMove(a, b, op, c)))

        return self.ask_checked("LastStepGenerator",
                                {"state": str(current), "target": str(parent), "avoid": tried_text}, accept)

    def forward_step(self, task: Task, state: ProblemState, target: TargetState,
                     avoid: AvoidSlice) -> ProblemState:
        current, tgt = as_numberset(state.payload), as_numberset(target.payload)
        if len(current) < 2:
            raise NoCandidates(f"no move possible on {current}")
        avoid_text = "; ".join(f"({s.decode().replace(',', ' ')} -> {t.decode().replace(',', ' ')})"
                               for s, t in sorted(avoid.pairs)) or NONE

        def accept(text: str) -> ProblemState:
            fields = parse_forward(text).fields
            a, op, b, c = fields["move"]
            if apply_op(a, op, b) != c:
                raise _Rejected(f"{a} {op} {b} is not {c}")
            if not current.contains_all([a, b]):
                raise _Rejected(f"{a} and {b} are not both available in {current}")
            after = current.without(a, b).with_(c)
            if fields["leaving"] is not None and NumberSet(tuple(fields["leaving"])) != after:
                raise _Rejected(f"that move leaves {after}, not {NumberSet(tuple(fields['leaving']))}")
            if (after.key(), tgt.key()) in avoid:
                raise _Rejected(f"leaving {after} toward {tgt} was already tried")
            return ProblemState(after, state.depth + 1, str(ArithMove(a, b, op, c)))

        return self.ask_checked("ForwardReason", {"state": str(current), "target": str(tgt), "avoid": avoid_text},
                                accept)

    def state_check(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        text = self.ask("StateCheck", {"state": str(as_numberset(state.payload)),
                                       "target": str(as_numberset(target.payload))})
        return bool(parse_verdict(text).fields["verdict"])

    def verify(self, task: Task, frames: Sequence[Frame]) -> int:
        i = frames[-1].depth
        try:
            chain, owner = chain_from_frames(frames)
        except (AdapterFailure, ValueError):
            # the state cannot reach the target at all; nothing for the model to judge
            return max(i - 1, 0)
        text = self.ask("Verifier", {"input": str(as_numberset(task.input)), "goal": str(task.goal),
                                     "steps": _steps(chain)})
        verdict = parse_backtrack(text, i).fields
        if not verdict["valid"]:
            return int(verdict["j"])
        bad = verify_chain(chain, as_numberset(task.input), task.goal)
        if bad is None:
            return i
        # the model approved a wrong chain; the local check decides
        return max(owner[bad - 1] - 1, 0)

    def output(self, task: Task, frames: Sequence[Frame]) -> str:
        chain, _ = chain_from_frames(frames)
        original = as_numberset(task.input)
        if verify_chain(chain, original, task.goal) is not None:
            raise AdapterFailure("refusing to output an unverified chain")
        fallback = format_solution(chain, original)
        text = self.ask("Output", {"input": str(original), "steps": _steps(chain)})
        try:
            expr = str(parse_answer(text).fields["answer"])
        except ParseError:
            return fallback
        return expr if check_expression(expr, original, task.goal) else fallback


# --- math -------------------------------------------------------------------

def _question(task: Task) -> str:
    x = task.input
    if isinstance(x, WordProblem):
        return x.question
    if isinstance(x, DagProblem):
        return x.surface_text or ""
    return str(x)


def _facts_text(facts: FactSet) -> str:
    return ", ".join(f"{k} = {v}" for k, v in facts.bindings) or NONE


class LlmMathAdapter(_LlmBase, DomainAdapter, ForwardAdapter):
    """Word problems through a chat model (accumulation engine and forward baselines).

    Facts are ``name = value`` bindings named by the model.  On generated
    DAG problems a fact naming a defined variable is rechecked against its
    definition; free-text problems have nothing to recheck against.
    """

    domain = "Math"
    capability = Capability.DAG_ACCUMULATION

    def canonicalize(self, payload):
        return payload

    def canonical_key(self, payload) -> bytes:
        return payload.key() if hasattr(payload, "key") else str(payload).encode()

    def render(self, payload) -> str:
        if isinstance(payload, MathTarget):
            return payload.needed
        if isinstance(payload, Game24Node):
            return str(payload)
        return str(payload)

    def initial_state(self, task: Task) -> FactSet:
        return FactSet()

    def initial_target(self, task: Task) -> MathTarget:
        return MathTarget(self.goal(task))

    def goal(self, task: Task) -> str:
        if task.goal:
            return str(task.goal)
        return task.input.goal if isinstance(task.input, DagProblem) else "answer"

    def last_step(self, task: Task, state: ProblemState, target: TargetState,
                  avoid: AvoidSlice) -> TargetState:
        want = target.payload.needed
        if want in state.payload:
            want = self.goal(task)
        text = self.ask("LastStepGenerator", {"question": _question(task), "facts": _facts_text(state.payload),
                                              "target": want, "avoid": NONE})
        fields = parse_need(text).fields
        t = MathTarget(str(fields["needed"]), str(fields["rationale"]))
        return TargetState(t, target.depth + 1, t.rationale)

    def forward_step(self, task: Task, state: ProblemState, target: TargetState,
                     avoid: AvoidSlice) -> ProblemState:
        facts: FactSet = state.payload
        problem = task.input if isinstance(task.input, DagProblem) else None

        def accept(text: str) -> ProblemState:
            fields = parse_fact(text).fields
            name, value = str(fields["name"]), Fraction(fields["value"])
            if name in facts:
                raise _Rejected(f"{name} is already known")
            if problem is not None and name in problem.defs:
                defn = problem.defs[name]
                have = facts.as_dict()
                if isinstance(defn, Literal):
                    true = defn.value
                elif defn.lhs in have and defn.rhs in have:
                    true = _apply(defn.op, have[defn.lhs], have[defn.rhs])
                else:
                    raise _Rejected(f"{name} needs {defn.lhs} and {defn.rhs} first")
                if value != true:
                    raise _Rejected(f"{name} = {defn} is {true}, not {value}")
            return ProblemState(FactSet(((name, value),)), state.depth + 1, f"{name} = {value}")

        return self.ask_checked("ForwardReason", {"question": _question(task), "facts": _facts_text(facts),
                                                  "target": target.payload.needed}, accept)

    def state_check(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        if self.goal(task) in state.payload:
            return True
        text = self.ask("StateCheck", {"question": _question(task), "facts": _facts_text(state.payload),
                                       "goal": self.goal(task)})
        return bool(parse_verdict(text).fields["verdict"])

    def target_reached(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        return target.payload.needed in state.payload

    def is_grounded(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        if isinstance(task.input, DagProblem):
            problem = task.input
            name = target.payload.needed
            if name in problem.defs:
                return isinstance(problem.defs[name], Literal)
        note = target.transition_note.lower()
        return target.depth > 0 and ("given" in note or "stated" in note)

    def output(self, task: Task, frames: Sequence[Frame]) -> str:
        facts: FactSet = frames[-1].state.payload
        text = self.ask("Output", {"question": _question(task), "facts": _facts_text(facts),
                                   "goal": self.goal(task)})
        return str(parse_answer(text).fields["answer"])

    def accumulate(self, old: FactSet, new: FactSet) -> FactSet:
        return old.merged(new)

    def includes(self, big: FactSet, small: FactSet) -> bool:
        return big.includes(small)

    # forward-only baselines: a chain is a run of Fact steps
    def root(self, task: Task) -> FactSet:
        return FactSet()

    def propose(self, task: Task, node: FactSet) -> List[FactSet]:
        goal = self.goal(task)
        state = ProblemState(node, 0)
        try:
            step = self.forward_step(task, state, TargetState(MathTarget(goal)), AvoidSlice())
        except (DeadEnd, AdapterFailure):
            return []
        return [node.merged(step.payload)]

    def evaluate(self, task: Task, node: FactSet) -> float:
        return float(len(node))

    def greedy_chain(self, task: Task) -> FactSet:
        text = self.ask("ChainOfThought", {"question": _question(task), "goal": self.goal(task)})
        facts = FactSet()
        for line in text.splitlines():
            try:
                f = parse_fact(line).fields
            except ParseError:
                continue
            if str(f["name"]) not in facts:
                facts = facts.merged(FactSet(((str(f["name"]), Fraction(f["value"])),)))
        try:
            ans = parse_answer(text).fields["answer"]
            facts = facts.merged(FactSet(((self.goal(task), to_fraction(str(ans).replace(",", ""))),)))
        except (ParseError, ValueError):
            pass
        return facts

    def is_solution(self, task: Task, node: FactSet) -> bool:
        return self.goal(task) in node

    def answer(self, task: Task, node: FactSet) -> str:
        return str(node.get(self.goal(task)))


class LlmGame24Forward(_LlmBase, ForwardAdapter):
    """Forward-only Game24 baselines through a chat model (CoT and ToT-style propose/value)."""

    domain = "Game24"

    def root(self, task: Task) -> Game24Node:
        return Game24Node(as_numberset(task.input))

    def render(self, payload) -> str:
        if isinstance(payload, Game24Node):
            return str(payload.numbers) + (" | " + "; ".join(map(str, payload.moves)) if payload.moves else "")
        return str(payload)

    def _move(self, node: Game24Node, text: str) -> Optional[Game24Node]:
        try:
            a, op, b, c = parse_forward(text).fields["move"]
        except ParseError:
            return None
        if apply_op(a, op, b) != c or not node.numbers.contains_all([a, b]):
            return None
        return Game24Node(node.numbers.without(a, b).with_(c), node.moves + (ArithMove(a, b, op, c),))

    def propose(self, task: Task, node: Game24Node) -> List[Game24Node]:
        if len(node.numbers) < 2:
            return []
        text = self.ask("Propose", {"state": str(node.numbers)})
        out, seen = [], set()
        for line in text.splitlines():
            child = self._move(node, line)
            if child is not None and child.numbers not in seen:
                seen.add(child.numbers)
                out.append(child)
        return out

    def evaluate(self, task: Task, node: Game24Node) -> float:
        text = self.ask("Value", {"state": str(node.numbers), "goal": str(task.goal)})
        low = text.lower()
        for word, score in (("sure", 20.0), ("likely", 1.0), ("impossible", 0.001)):
            if word in low:
                return score
        return 0.0

    def greedy_chain(self, task: Task) -> Game24Node:
        node = self.root(task)
        text = self.ask("ChainOfThought", {"input": str(node.numbers), "goal": str(task.goal)})
        for line in text.splitlines():
            child = self._move(node, line)
            if child is not None:
                node = child
        return node

    def is_solution(self, task: Task, node: Game24Node) -> bool:
        return verify_chain(node.moves, as_numberset(task.input), task.goal) is None

    def answer(self, task: Task, node: Game24Node) -> str:
        return format_solution(node.moves, as_numberset(task.input))
