import pytest

from rff.baselines import CoT, ForwardTree, run_cot, run_forward_tree
from rff.core import AdapterFailure, ConfigError, EngineConfig, EventKind
from rff.game24 import Game24Adapter, NumberSet, check_expression
from rff.mathdag import generate_problem

from trace_checks import visited_matches_forward_count


def test_cot_counts_one_visited_state(g24):
    trace = run_cot(g24, (4, 6, 1, 1), 24)
    assert trace.solved and trace.outcome.answer == "1*(1*(4*6))"
    assert trace.visited_states == 1 and trace.iterations == 1


@pytest.mark.parametrize("numbers", [(12, 12, 2, 1), (1, 1, 1, 1), (1, 1, 1, 3, 13)])
def test_cot_greedy_chain_can_miss(g24, numbers):
    trace = run_cot(g24, numbers, 24)
    assert trace.outcome.status == "Unsolved"
    assert trace.outcome.reason == "chain does not verify"
    assert trace.visited_states == 1


@pytest.mark.parametrize("numbers,b,answer,visited", [
    ((12, 12, 2, 1), 1, "(2-1)*(12+12)", 44),
    ((12, 12, 2, 1), 5, "(2-1)*(12+12)", 92),
    ((4, 6, 1, 1), 5, "(1-1)+(4*6)", 103),
    ((1, 1, 1, 3, 13), 5, "1+(((1+1)*13)-3)", 221),
])
def test_forward_tree_frozen(g24, wide, numbers, b, answer, visited):
    trace = run_forward_tree(g24, numbers, 24, wide, b)
    assert trace.solved and trace.outcome.answer == answer
    assert check_expression(answer, NumberSet.of(*numbers))
    assert trace.visited_states == visited
    assert visited_matches_forward_count(trace)


def test_forward_tree_unsolvable(g24, wide):
    trace = run_forward_tree(g24, (1, 1, 1, 1), 24, wide, 5)
    assert trace.outcome.status == "Unsolved"
    assert trace.outcome.reason == "search exhausted"
    assert trace.visited_states == 56


def test_wider_beam_never_visits_fewer(g24, wide):
    for numbers in [(12, 12, 2, 1), (1, 1, 1, 1), (4, 6, 1, 1)]:
        narrow = run_forward_tree(g24, numbers, 24, wide, 1)
        broad = run_forward_tree(g24, numbers, 24, wide, 5)
        assert broad.visited_states >= narrow.visited_states


def test_forward_tree_layer_limit(g24):
    trace = run_forward_tree(g24, (1, 1, 1, 3, 13), 24, EngineConfig(max_steps=2), 5)
    assert trace.outcome.status == "Unsolved"
    assert trace.outcome.reason == "no solution within 2 layers"


def test_baselines_on_dags(dag):
    p = generate_problem(1, 6, 2)
    cot = run_cot(dag, p, p.goal)
    assert cot.solved and cot.outcome.answer == "1192" and cot.visited_states == 1
    tree = run_forward_tree(dag, p, p.goal, EngineConfig(max_steps=20), 2)
    assert tree.solved and tree.outcome.answer == "1192"
    assert tree.visited_states == 61


def test_baseline_kinds():
    assert CoT() == CoT()
    assert ForwardTree().width == 5
    with pytest.raises(ConfigError):
        ForwardTree(0)
    with pytest.raises(ConfigError):
        run_forward_tree(Game24Adapter(), (1, 2), 24, b=0)


class _Broken(Game24Adapter):
    def propose(self, task, node):
        raise AdapterFailure("offline")

    def greedy_chain(self, task):
        raise AdapterFailure("offline")


def test_adapter_failures_become_unsolved(wide):
    for trace in (run_cot(_Broken(), (4, 6, 1, 1), 24), run_forward_tree(_Broken(), (4, 6, 1, 1), 24, wide)):
        assert trace.outcome.status == "Unsolved"
        assert "adapter failure" in trace.outcome.reason


def test_cot_event_shape(g24):
    trace = run_cot(g24, (4, 6, 1, 1), 24)
    assert [e.kind for e in trace.events] == [EventKind.FORWARD, EventKind.VERIFY, EventKind.OUTPUT]
