from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from rff.llm.prompts import (
    BASELINE_ROLES,
    ROLES,
    ParseError,
    PromptTemplate,
    TemplateError,
    load_templates,
    parse_answer,
    parse_backtrack,
    parse_fact,
    parse_forward,
    parse_move,
    parse_need,
    parse_target,
    parse_template,
    parse_verdict,
)

TEMPLATES = load_templates()


def test_bundled_templates_cover_all_roles():
    assert len(TEMPLATES) == 13
    for role in ROLES:
        assert ("Game24", role) in TEMPLATES
    for role in ("LastStepGenerator", "ForwardReason", "StateCheck", "Output", "ChainOfThought"):
        assert ("Math", role) in TEMPLATES
    assert {r for _, r in TEMPLATES} <= set(ROLES + BASELINE_ROLES)


@pytest.mark.parametrize("key", sorted(TEMPLATES))
def test_examples_render_and_extract(key):
    tpl = TEMPLATES[key]
    assert tpl.example, f"{key} has no example values"
    values = {s: tpl.example[s] for s in tpl.slots if s != "shots"}
    text = tpl.render(values, shots=len(tpl.shots))
    assert "{" not in text.replace("{none}", "")
    got = tpl.extract(text)
    for name, value in values.items():
        assert got[name] == value


@given(st.text(alphabet="0123456789 /()", min_size=1, max_size=20),
       st.text(alphabet="0123456789 ", min_size=1, max_size=8))
def test_extract_inverts_render(state, target):
    tpl = TEMPLATES[("Game24", "LastStepGenerator")]
    text = tpl.render({"state": state, "target": target, "avoid": "(none)"})
    got = tpl.extract(text)
    assert (got["state"], got["target"]) == (state, target)


def test_template_parsing_errors():
    with pytest.raises(TemplateError, match="no '--- template'"):
        parse_template("role: Output\ndomain: Game24\n")
    with pytest.raises(TemplateError, match="unknown role"):
        parse_template("role: Oracle\ndomain: Game24\n--- template\nx")
    with pytest.raises(TemplateError, match="bad header"):
        parse_template("role Output\n--- template\nx")
    with pytest.raises(TemplateError, match="missing header"):
        parse_template("role: Output\n--- template\nx")
    tpl = PromptTemplate("Output", "Game24", "numbers {state}")
    with pytest.raises(TemplateError, match="no value"):
        tpl.render({})
    with pytest.raises(TemplateError, match="lacks slots"):
        tpl.require(["state", "avoid"])
    with pytest.raises(TemplateError):
        tpl.extract("something else")


def test_user_template_directory(tmp_path):
    (tmp_path / "a.txt").write_text("role: Output\ndomain: Math\nsystem: be brief\n"
                                    "--- shot\nQ\n--- template\n{shots}\nFacts: {facts}\n")
    tpl = load_templates(tmp_path)[("Math", "Output")]
    assert tpl.messages({"facts": "x=1"}, shots=1) == [("system", "be brief"), ("user", "Q\nFacts: x=1")]


# --- reply grammar ----------------------------------------------------------

def test_parse_target():
    r = parse_target("Target: 12 12, because 12+12=24")
    assert r.fields["numbers"] == [12, 12]
    assert r.fields["move"] == (12, "+", 12, 24)
    r = parse_target("Sure.\n**Target**: 4 6 since 4 × 6 = 24")
    assert r.fields["move"] == (4, "*", 6, 24)


@pytest.mark.parametrize("raw", ["Target: 12 12", "I think 12 and 12.", "Target: because 12+12=24",
                                 "Target: 12 12, because they add up"])
def test_parse_target_rejects(raw):
    with pytest.raises(ParseError):
        parse_target(raw)


def test_parse_forward_and_move():
    r = parse_forward("Move: 2 * 3 = 6, leaving 4 6")
    assert r.fields["move"] == (2, "*", 3, 6) and r.fields["leaving"] == [4, 6]
    assert parse_forward("12 - 1/2 = 23/2").fields["move"] == (12, "-", Fraction(1, 2), Fraction(23, 2))
    assert parse_move("7 ÷ 2 = 7/2")[1] == "/"
    with pytest.raises(ParseError):
        parse_forward("no numbers here")


def test_parse_need_and_fact():
    r = parse_need("Need: total_cost, since answer = total_cost - discount")
    assert r.fields == {"needed": "total_cost", "rationale": "answer = total_cost - discount"}
    with pytest.raises(ParseError):
        parse_need("Need: total_cost")
    assert parse_fact("Fact: v3 = -7/2").fields == {"name": "v3", "value": Fraction(-7, 2)}
    assert parse_fact("Fact: x = 2.5").fields["value"] == Fraction(5, 2)
    with pytest.raises(ParseError):
        parse_fact("Fact: seven")


@pytest.mark.parametrize("raw,verdict", [("Yes", True), ("Yes, 4 and 6 make 24 with 4 * 6.", True),
                                         ("Verdict: no", False), ("  no.", False)])
def test_parse_verdict(raw, verdict):
    assert parse_verdict(raw).fields["verdict"] is verdict


def test_parse_verdict_rejects_hedging():
    with pytest.raises(ParseError):
        parse_verdict("Maybe, hard to say.")


@pytest.mark.parametrize("raw,depth,j,valid,clamped", [
    ("Valid", 3, 3, True, False),
    ("Correct, every step checks out.", 2, 2, True, False),
    ("Backtrack: 2", 5, 2, False, False),
    ("step 2 is wrong", 5, 2, False, False),
    ("Backtrack: 9", 5, 4, False, True),
    ("Backtrack: 0", 5, 1, False, True),
    ("Invalid chain", 5, 4, False, True),
    ("asdf qwerty", 5, 4, False, True),
])
def test_parse_backtrack(raw, depth, j, valid, clamped):
    f = parse_backtrack(raw, depth).fields
    assert (f["j"], f["valid"], f["clamped"]) == (j, valid, clamped)


@given(st.text(max_size=40), st.integers(2, 20))
def test_backtrack_always_in_range(raw, depth):
    f = parse_backtrack(raw, depth).fields
    assert 1 <= f["j"] <= depth


def test_parse_answer():
    assert parse_answer("Answer: (12+12)*(2-1).").fields["answer"] == "(12+12)*(2-1)"
    with pytest.raises(ParseError):
        parse_answer("24")
