"""Prompt templates and the line grammar used to read model replies.

Template files live in ``rff/llm/templates`` (or any directory passed to
:func:`load_templates`) and look like::

    role: ForwardReason
    domain: Game24
    system: You are careful with arithmetic.
    example.state: 2 3 4
    example.target: 4 6
    --- shot
    <a worked example; repeated sections give more shots>
    --- template
    Current numbers: {state}
    ...

Slots are ``{name}`` fields.  ``{shots}`` is filled with the first
``LlmConfig.shots`` shot sections.

Reply grammar (one directive per line, case-insensitive keywords):

* ``Target: <numbers>, because <a op b = c>``: a Game24 pre-target.
* ``Need: <variable>, since <reason>``: a math pre-target.
* ``Move: <a op b = c>[, leaving <numbers>]``: one Game24 move.  The
  ``Move:`` keyword may be omitted; the first ``a op b = c`` is used.
* ``Fact: <name> = <value>``: one derived math fact.
* ``Verdict: yes|no``: state check.  A reply starting with yes/no also counts.
* ``Backtrack: <j>`` or ``Valid``: verifier.  ``step <j>`` is accepted too.
* ``Answer: <text>``: final answer.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from ..core import AdapterFailure, DeadEnd

ROLES = ("LastStepGenerator", "ForwardReason", "StateCheck", "Verifier", "Output")
# prompts used only by the forward baselines
BASELINE_ROLES = ("ChainOfThought", "Propose", "Value")
DOMAINS = ("Game24", "Math")


class ParseError(AdapterFailure, DeadEnd):
    """A reply did not follow the line grammar.

    It is also a :class:`DeadEnd`, so the tree engine treats it as a failed
    attempt and backtracks rather than abandoning the run.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(f"{message}: {raw[:120]!r}" if raw else message)
        self.raw = raw


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    domain: str
    text: str
    system: str = ""
    shots: Tuple[str, ...] = ()
    example: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.role not in ROLES + BASELINE_ROLES:
            raise TemplateError(f"unknown role {self.role!r}")
        if self.domain not in DOMAINS:
            raise TemplateError(f"unknown domain {self.domain!r}")

    @property
    def slots(self) -> List[str]:
        out = []
        for _, name, _, _ in string.Formatter().parse(self.text):
            if name and name not in out:
                out.append(name)
        return out

    def require(self, names) -> None:
        missing = [n for n in names if n not in self.slots]
        if missing:
            raise TemplateError(f"{self.domain}/{self.role} template lacks slots {missing}")

    def render(self, values: Mapping[str, str], shots: int = 0) -> str:
        vals = dict(values)
        if "shots" in self.slots and "shots" not in vals:
            vals["shots"] = "\n\n".join(self.shots[:shots])
        missing = [s for s in self.slots if s not in vals]
        if missing:
            raise TemplateError(f"no value for slots {missing}")
        return self.text.format(**vals)

    def messages(self, values: Mapping[str, str], shots: int = 0) -> List[Tuple[str, str]]:
        msgs = [("system", self.system)] if self.system else []
        msgs.append(("user", self.render(values, shots)))
        return msgs

    def extract(self, rendered: str) -> Dict[str, str]:
        """Recover slot values from a rendered prompt (inverse of :meth:`render`)."""
        parts = []
        seen = set()
        for literal, name, _, _ in string.Formatter().parse(self.text):
            parts.append(re.escape(literal))
            if name is None:
                continue
            if name in seen:
                parts.append(f"(?P={name})")
            else:
                parts.append(f"(?P<{name}>.*?)")
                seen.add(name)
        m = re.fullmatch("".join(parts), rendered, re.DOTALL)
        if m is None:
            raise TemplateError("text was not rendered from this template")
        return m.groupdict()


def parse_template(text: str) -> PromptTemplate:
    header: Dict[str, str] = {}
    example: Dict[str, str] = {}
    shots: List[str] = []
    body: Optional[str] = None
    lines = text.splitlines()
    k = 0
    while k < len(lines) and not lines[k].startswith("---"):
        line = lines[k]
        k += 1
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise TemplateError(f"bad header line {line!r}")
        key, value = key.strip(), value.strip().replace("\\n", "\n")
        if key.startswith("example."):
            example[key[len("example."):]] = value
        else:
            header[key] = value
    section: Optional[str] = None
    buf: List[str] = []

    def flush() -> None:
        nonlocal body
        chunk = "\n".join(buf).strip("\n")
        if section == "shot":
            shots.append(chunk)
        elif section == "template":
            body = chunk
    for line in lines[k:]:
        if line.startswith("--- "):
            flush()
            section, buf = line[4:].strip(), []
            if section not in ("shot", "template"):
                raise TemplateError(f"unknown section {section!r}")
        else:
            buf.append(line)
    flush()
    if body is None:
        raise TemplateError("template has no '--- template' section")
    try:
        return PromptTemplate(header["role"], header["domain"], body, header.get("system", ""),
                              tuple(shots), example)
    except KeyError as exc:
        raise TemplateError(f"missing header field {exc}") from None


def default_template_dir() -> Path:
    return Path(str(resources.files("rff.llm") / "templates"))


def load_templates(path: Union[str, Path, None] = None) -> Dict[Tuple[str, str], PromptTemplate]:
    """Read every ``*.txt`` template in a directory; call again to pick up edits."""
    root = Path(path) if path is not None else default_template_dir()
    out = {}
    for f in sorted(root.glob("*.txt")):
        tpl = parse_template(f.read_text())
        out[(tpl.domain, tpl.role)] = tpl
    return out


# --- reply grammar ----------------------------------------------------------

NUM = r"-?\d+(?:/\d+)?"
_OPS = {"+": "+", "-": "-", "−": "-", "*": "*", "×": "*", "x": "*", "/": "/", "÷": "/"}
MOVE_RE = re.compile(rf"({NUM})\s*([-+*/×÷−x])\s*({NUM})\s*=\s*({NUM})")
_NUMS_RE = re.compile(rf"{NUM}")


def _lines(raw: str, keyword: str) -> List[str]:
    pat = re.compile(rf"^\s*\**{keyword}\**\s*:\s*(.*)$", re.IGNORECASE)
    return [m.group(1).strip() for m in map(pat.match, raw.splitlines()) if m]


def parse_numbers(text: str) -> List[Fraction]:
    return [Fraction(t) for t in _NUMS_RE.findall(text)]


def parse_move(text: str) -> Tuple[Fraction, str, Fraction, Fraction]:
    m = MOVE_RE.search(text)
    if m is None:
        raise ParseError("no 'a op b = c' move found", text)
    a, op, b, c = m.groups()
    return Fraction(a), _OPS[op], Fraction(b), Fraction(c)


@dataclass(frozen=True)
class ParsedReply:
    raw: str
    fields: Mapping[str, object]


def parse_target(raw: str) -> ParsedReply:
    """``Target: 12 12, because 12+12=24``."""
    found = _lines(raw, "target")
    if not found:
        raise ParseError("no 'Target:' line", raw)
    line = found[0]
    m = re.match(r"(.*?)[,;]?\s*\b(?:because|since)\b\s*(.*)$", line, re.IGNORECASE)
    if m is None or not m.group(2):
        raise ParseError("target has no explicit transition ('because ...')", raw)
    numbers = parse_numbers(m.group(1))
    if not numbers:
        raise ParseError("target lists no numbers", raw)
    return ParsedReply(raw, {"numbers": numbers, "move": parse_move(m.group(2)), "transition": m.group(2).strip()})


def parse_need(raw: str) -> ParsedReply:
    """``Need: total_cost, since answer = total_cost - discount``."""
    found = _lines(raw, "need")
    if not found:
        raise ParseError("no 'Need:' line", raw)
    m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*[,;]?\s*\b(?:since|because)\b\s*(.+)$", found[0], re.IGNORECASE)
    if m is None:
        raise ParseError("need has no explicit reason ('since ...')", raw)
    return ParsedReply(raw, {"needed": m.group(1), "rationale": m.group(2).strip()})


def parse_forward(raw: str) -> ParsedReply:
    """``Move: 2 * 3 = 6, leaving 4 6`` (the keyword is optional)."""
    found = _lines(raw, "move")
    text = found[0] if found else raw
    move = parse_move(text)
    leaving = None
    m = re.search(r"\bleaving\b(.*)$", text, re.IGNORECASE | re.MULTILINE)
    if m:
        leaving = parse_numbers(m.group(1))
    return ParsedReply(raw, {"move": move, "leaving": leaving})


def parse_fact(raw: str) -> ParsedReply:
    """``Fact: name = value``."""
    found = _lines(raw, "fact")
    if not found:
        raise ParseError("no 'Fact:' line", raw)
    m = re.match(rf"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*({NUM}(?:\.\d+)?)", found[0])
    if m is None:
        raise ParseError("fact is not 'name = value'", raw)
    return ParsedReply(raw, {"name": m.group(1), "value": Fraction(m.group(2))})


def parse_verdict(raw: str) -> ParsedReply:
    found = _lines(raw, "verdict")
    text = (found[0] if found else raw).strip().lower()
    m = re.match(r"\W*(yes|no)\b", text)
    if m is None:
        raise ParseError("no yes/no verdict", raw)
    return ParsedReply(raw, {"verdict": m.group(1) == "yes"})


def parse_backtrack(raw: str, depth: int) -> ParsedReply:
    """Verifier reply at path depth ``depth``.

    ``Valid`` gives ``j = depth``.  A step number is clamped to
    ``[1, depth - 1]``; anything unreadable falls back to ``depth - 1``.
    The ``clamped`` field says whether the fallback or clamp applied.
    """
    lo, hi = min(1, depth - 1), depth - 1
    found = _lines(raw, "backtrack")
    m = re.search(r"-?\d+", found[0]) if found else re.search(r"\bstep\s+(-?\d+)", raw, re.IGNORECASE)
    if m is None:
        if re.search(r"(?<!in)\bvalid\b", raw, re.IGNORECASE) or re.match(r"\W*correct\b", raw, re.IGNORECASE):
            return ParsedReply(raw, {"j": depth, "valid": True, "clamped": False})
        return ParsedReply(raw, {"j": hi, "valid": False, "clamped": True})
    j = int(m.group(1) if m.groups() else m.group(0))
    jj = min(max(j, lo), hi)
    return ParsedReply(raw, {"j": jj, "valid": False, "clamped": jj != j})


def parse_answer(raw: str) -> ParsedReply:
    found = _lines(raw, "answer")
    if not found:
        raise ParseError("no 'Answer:' line", raw)
    return ParsedReply(raw, {"answer": found[0].strip().rstrip(".")})
