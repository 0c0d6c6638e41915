from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rff.core import (
    AvoidSet,
    BackwardMode,
    ConfigError,
    DomainAdapter,
    EngineConfig,
    EventKind,
    ProblemState,
    SearchTrace,
    Solved,
    StepLimit,
    TargetState,
    Unsolved,
    avoid_contains,
    set_backward_mode,
)
from rff.game24 import Game24Adapter, NumberSet
from rff.mathdag import FactSet, MathDagAdapter

small = st.integers(min_value=-30, max_value=30)
fractions = st.builds(Fraction, small, st.integers(min_value=1, max_value=12))


def test_canonical_key_ignores_order():
    g = Game24Adapter()
    assert g.canonical_key(NumberSet.of(12, 2, 12, 1)) == g.canonical_key(NumberSet.of(1, 2, 12, 12))


def test_canonical_key_normalizes_rationals():
    g = Game24Adapter()
    assert g.canonical_key(NumberSet.of(Fraction(24, 1))) == g.canonical_key(NumberSet.of(Fraction(48, 2)))
    assert g.canonical_key(NumberSet.of("48/2")) == g.canonical_key(NumberSet.of(24))


def test_canonical_key_for_fact_maps():
    d = MathDagAdapter()
    assert d.canonical_key(FactSet.of(a=2, b=3)) == d.canonical_key(FactSet.of(b=3, a=2))
    assert d.canonical_key(FactSet.of(a=2, b=3)) == b"a=2;b=3"


@given(st.lists(fractions, max_size=6))
def test_game24_canonicalize_is_idempotent(values):
    g = Game24Adapter()
    once = g.canonicalize(NumberSet(tuple(values)))
    assert g.canonicalize(once) == once
    assert g.canonical_key(once) == g.canonical_key(NumberSet(tuple(reversed(values))))


@given(st.dictionaries(st.sampled_from("abcdefg"), fractions, max_size=7))
def test_fact_canonicalize_is_idempotent(bindings):
    d = MathDagAdapter()
    facts = FactSet.of(bindings)
    assert d.canonicalize(d.canonicalize(facts)) == facts
    assert d.canonical_key(facts) == d.canonical_key(FactSet(tuple(reversed(facts.bindings))))


def _pair(a, b):
    return ProblemState(NumberSet.of(*a)), TargetState(NumberSet.of(*b))


def test_avoid_set_membership_and_clear():
    avoid = AvoidSet(Game24Adapter().canonical_key)
    s, t = _pair((1, 2, 12), (12, 12))
    assert not avoid_contains(avoid, 2, s, t)
    avoid.add(2, s, t)
    assert avoid_contains(avoid, 2, s, t)
    assert not avoid_contains(avoid, 1, s, t)
    # a semantically equal pair collides
    s2, t2 = _pair((12, 2, 1), (12, 12))
    assert avoid_contains(avoid, 2, s2, t2)
    # backtrack to depth 1, then depth 2 is re-entered and cleared
    avoid.clear(2)
    assert not avoid_contains(avoid, 2, s, t)


def test_avoid_contains_rejects_negative_depth():
    with pytest.raises(ValueError):
        avoid_contains(AvoidSet(bytes), -1, ProblemState(b""), TargetState(b""))


def test_states_validate():
    with pytest.raises(ValueError):
        ProblemState(NumberSet.of(1), depth=-1)
    with pytest.raises(ValueError):
        TargetState(NumberSet.of(1), depth=1)
    assert TargetState(NumberSet.of(4, 6), 1, "4 * 6 = 24").transition_note


@pytest.mark.parametrize("kw", [dict(max_steps=0), dict(width=0), dict(per_call_timeout=0),
                                dict(max_iterations=0), dict(seed=2**64), dict(backward_mode="pair")])
def test_engine_config_rejects(kw):
    with pytest.raises(ConfigError):
        EngineConfig(**kw)


def test_iteration_budget_and_mode():
    cfg = EngineConfig(max_steps=4, width=3)
    assert cfg.iteration_budget == 36
    assert EngineConfig(max_iterations=7).iteration_budget == 7
    single = set_backward_mode(cfg, "single")
    assert single.backward_mode is BackwardMode.SINGLE and cfg.backward_mode is BackwardMode.PAIR


def test_trace_counts_forward_events_and_round_trips():
    trace = SearchTrace("x")
    trace.emit(EventKind.BACKWARD, 1, target="4 6")
    trace.emit(EventKind.FORWARD, 1, state="4 6")
    trace.emit(EventKind.CHECK, 1, result=True)
    trace.emit(EventKind.FORWARD, 2, state="24")
    trace.finish(Solved("4*6"))
    assert trace.visited_states == 2 == len(trace.of_kind(EventKind.FORWARD))
    text = trace.to_jsonl()
    first = text.splitlines()[0]
    assert first.startswith('{"seq": 0, "kind": "BackwardStep", "depth": 1, "detail": ')
    back = SearchTrace.from_jsonl(text)
    assert back.to_jsonl() == text
    assert [e.seq for e in back.events] == [0, 1, 2, 3]
    with pytest.raises(RuntimeError):
        trace.emit(EventKind.OUTPUT, 2)


def test_outcomes():
    assert Solved("x").solved and not Unsolved("r").solved
    assert StepLimit().status == "StepLimit"


def test_tree_adapter_must_implement_verify():
    with pytest.raises(TypeError, match="verify"):
        class NoVerify(DomainAdapter):
            def canonicalize(self, p): return p
            def canonical_key(self, p): return b""
            def initial_state(self, task): return None
            def initial_target(self, task): return None
            def last_step(self, task, s, t, a): return t
            def forward_step(self, task, s, t, a): return s
            def state_check(self, task, s, t): return True
            def output(self, task, frames): return ""
