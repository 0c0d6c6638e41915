import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rff.mathdag import (
    BinOp,
    DagProblem,
    FactSet,
    Literal,
    MathTarget,
    NoProgress,
    Stuck,
    WordProblem,
    dag_forward_step,
    dag_last_step,
    dag_state_check,
    generate_problem,
    load_problems,
    parse_gsm8k,
    problem_from_record,
    problem_to_record,
    write_problems,
)


def L(v):
    return Literal(Fraction(v))


def e_problem():
    """a = 2, b = 3, c = a + b, d = 4, e = c * d."""
    return DagProblem((("a", L(2)), ("b", L(3)), ("c", BinOp("+", "a", "b")), ("d", L(4)),
                       ("e", BinOp("*", "c", "d"))), "e")


def test_problem_validation():
    with pytest.raises(ValueError, match="before it is defined"):
        DagProblem((("c", BinOp("+", "a", "b")),), "c")
    with pytest.raises(ValueError, match="goal"):
        DagProblem((("a", L(1)),), "z")
    with pytest.raises(ValueError, match="twice"):
        DagProblem((("a", L(1)), ("a", L(2))), "a")
    with pytest.raises(ValueError):
        BinOp("^", "a", "b")


def test_problem_evaluation_and_depth():
    p = e_problem()
    assert p.answer == 20
    assert p.depth == 3
    assert p.ancestry("e") == {"a", "b", "c", "d", "e"}
    assert p.render_definition("c") == "c = a + b"


def test_generate_base_case():
    p = generate_problem(0, 1, 1)
    assert len(p.variables) == 1 and p.goal == "v0"
    assert isinstance(p.defs["v0"], Literal) and p.answer == p.defs["v0"].value == 7
    assert p.surface_text == "v0 is 7. What is v0?"


def test_generate_is_deterministic():
    assert generate_problem(11, 5, 2) == generate_problem(11, 5, 2)
    assert generate_problem(11, 5, 2) != generate_problem(12, 5, 2)


def test_generated_frozen_values():
    assert (generate_problem(0, 3).goal, generate_problem(0, 3).answer) == ("v2", -3)
    p = generate_problem(1, 6, 2)
    assert (p.goal, p.answer, len(p.variables)) == ("v11", 1192, 12)
    p = generate_problem(7, 8, 3)
    assert (p.goal, p.answer, len(p.variables)) == ("v22", 96, 23)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 8), st.integers(1, 3))
def test_generated_structure(seed, depth, width):
    p = generate_problem(seed, depth, width)
    assert p.depth == depth == p.chain_length(p.goal)
    assert len(p.ancestry(p.goal)) <= depth + 1
    assert p.answer == p.evaluate()[p.goal]
    for _, d in p.variables:
        if isinstance(d, BinOp):
            assert d.op in "+-*/"
        else:
            assert 1 <= d.value <= 12
    if depth >= 3:
        # the goal cannot be bound in fewer steps than its chain length
        steps, facts = 0, FactSet()
        while not dag_state_check(facts, p.goal):
            facts = dag_forward_step(facts, MathTarget(p.goal), p)
            steps += 1
        assert steps >= 3


def test_last_step_ready_target():
    t = dag_last_step(FactSet.of(a=2, b=3), MathTarget("c"), e_problem())
    assert t == MathTarget("c", "c = a + b")


def test_last_step_prefers_fewest_unbound():
    # c still needs b; d is a literal, so d is closer
    t = dag_last_step(FactSet.of(a=2), MathTarget("e"), e_problem())
    assert t.needed == "d" and t.rationale == "e = c * d"


def test_last_step_ties_by_definition_order():
    t = dag_last_step(FactSet(), MathTarget("c"), e_problem())
    assert t.needed == "a"


def test_last_step_falls_back_to_goal_when_target_bound():
    t = dag_last_step(FactSet.of(a=2, b=3, c=5, d=4), MathTarget("c"), e_problem())
    assert t.needed == "e"


def test_last_step_unknown_variable():
    with pytest.raises(NoProgress):
        dag_last_step(FactSet(), MathTarget("zz"), e_problem())


def test_forward_step_examples():
    p = e_problem()
    assert dag_forward_step(FactSet.of(a=2, b=3), MathTarget("c"), p) == FactSet.of(a=2, b=3, c=5)
    assert dag_forward_step(FactSet(), MathTarget("c"), p) == FactSet.of(a=2)
    with pytest.raises(Stuck):
        dag_forward_step(FactSet.of(c=5), MathTarget("c"), p)


def test_repeated_forward_steps_terminate():
    p = generate_problem(3, 8, 3)
    facts, steps = FactSet(), 0
    while p.goal not in facts:
        facts = dag_forward_step(facts, MathTarget(p.goal), p)
        steps += 1
    assert steps <= len(p.variables)
    assert facts.get(p.goal) == p.answer


def test_state_check():
    assert dag_state_check(FactSet.of(answer=20), "answer")
    assert not dag_state_check(FactSet(), "answer")


def test_factset_merge_conflict():
    with pytest.raises(ValueError):
        FactSet.of(a=1).merged(FactSet.of(a=2))
    assert FactSet.of(a=1, b=2).includes(FactSet.of(b=2))
    assert str(FactSet.of(b="1/2", a=1)) == "{a=1, b=1/2}"


def test_record_round_trip(tmp_path):
    problems = [generate_problem(s, 1 + s % 8, 1 + s % 3) for s in range(10)]
    path = tmp_path / "p.jsonl"
    assert write_problems(path, problems) == 10
    assert load_problems(path) == problems
    rec = problem_to_record(problems[4])
    rec["answer"] = str(problems[4].answer + 1)
    with pytest.raises(ValueError, match="disagrees"):
        problem_from_record(rec)


def test_gsm8k_records(tmp_path):
    rec = {"question": "Tom has 3 apples and buys 4. How many?", "answer": "3 + 4 = 7\n#### 7"}
    wp = parse_gsm8k(rec)
    assert wp == WordProblem(rec["question"], Fraction(7), "3 + 4 = 7")
    assert parse_gsm8k({"question": "q", "answer": "#### 1,250"}).answer == 1250
    path = tmp_path / "mixed.jsonl"
    path.write_text(json.dumps(rec) + "\n\n" + json.dumps(problem_to_record(e_problem())) + "\n")
    loaded = load_problems(path)
    assert loaded[0] == wp and loaded[1] == e_problem()
    path.write_text('{"x": 1}\n')
    with pytest.raises(ValueError, match="neither"):
        load_problems(path)
