"""Exact-arithmetic Game of 24: numbers, moves, the oracle adapter, and a brute-force solver.

All arithmetic is over :class:`fractions.Fraction`.  Intermediate values may
be negative or fractional; only the final value has to equal the goal.
"""
from __future__ import annotations

import ast
import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .baselines import ForwardAdapter
from .core import (
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

log = logging.getLogger(__name__)

Number = Union[int, Fraction, str]

OPS = ("+", "-", "*", "/")
# order in which backward decompositions are listed
BACKWARD_OP_ORDER = ("*", "+", "-", "/")
CARD_RANGE = range(1, 14)


class NoCandidates(DeadEnd):
    """The target admits no (further) decomposition under the pool bounds."""


class Exhausted(DeadEnd):
    """Every legal forward move is in the avoid set."""


def to_fraction(value: Number) -> Fraction:
    if isinstance(value, float):
        raise TypeError("floats are not allowed; use int, str or Fraction")
    return Fraction(value)


def fmt(value: Fraction) -> str:
    return str(value)


@dataclass(frozen=True)
class NumberSet:
    """A sorted multiset of exact rationals."""

    values: Tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        vals = tuple(sorted(to_fraction(v) for v in self.values))
        object.__setattr__(self, "values", vals)

    @classmethod
    def of(cls, *values: Number) -> "NumberSet":
        return cls(tuple(to_fraction(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "NumberSet":
        return cls.of(*text.replace(",", " ").split())

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.values)

    def __str__(self) -> str:
        return " ".join(fmt(v) for v in self.values)

    def key(self) -> bytes:
        return ",".join(fmt(v) for v in self.values).encode()

    def counter(self) -> Counter:
        return Counter(self.values)

    def without(self, *vals: Fraction) -> "NumberSet":
        rest = list(self.values)
        for v in vals:
            rest.remove(v)
        return NumberSet(tuple(rest))

    def with_(self, *vals: Fraction) -> "NumberSet":
        return NumberSet(self.values + tuple(vals))

    def overlap(self, other: "NumberSet") -> int:
        return sum((self.counter() & other.counter()).values())

    def contains_all(self, vals: Iterable[Fraction]) -> bool:
        need = Counter(vals)
        have = self.counter()
        return all(have[v] >= c for v, c in need.items())


def apply_op(a: Fraction, op: str, b: Fraction) -> Optional[Fraction]:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return None if b == 0 else a / b
    raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class ArithMove:
    lhs: Fraction
    rhs: Fraction
    op: str
    result: Fraction

    @classmethod
    def make(cls, lhs: Number, op: str, rhs: Number) -> "ArithMove":
        a, b = to_fraction(lhs), to_fraction(rhs)
        result = apply_op(a, op, b)
        if result is None:
            raise ZeroDivisionError(f"{fmt(a)} / 0")
        return cls(a, b, op, result)

    @classmethod
    def parse(cls, text: str) -> "ArithMove":
        """Parse the ``"a op b = c"`` form produced by ``str(move)``."""
        parts = text.split()
        if len(parts) != 5 or parts[3] != "=" or parts[1] not in OPS:
            raise ValueError(f"not a move: {text!r}")
        return cls(to_fraction(parts[0]), to_fraction(parts[2]), parts[1], to_fraction(parts[4]))

    @property
    def exact(self) -> bool:
        return apply_op(self.lhs, self.op, self.rhs) == self.result

    def sort_key(self) -> Tuple:
        return (OPS.index(self.op), self.lhs, self.rhs)

    def __str__(self) -> str:
        return f"{fmt(self.lhs)} {self.op} {fmt(self.rhs)} = {fmt(self.result)}"


@dataclass(frozen=True)
class Game24Target:
    values: NumberSet
    transition: Optional[ArithMove] = None


def legal_moves(numbers: NumberSet) -> List[Tuple[ArithMove, NumberSet]]:
    """Every distinct move on two of ``numbers``, in canonical move order."""
    return list(_legal_moves(numbers))


@lru_cache(maxsize=65536)
def _legal_moves(numbers: NumberSet) -> Tuple[Tuple[ArithMove, NumberSet], ...]:
    seen = set()
    out = []
    vals = numbers.values
    for i, j in combinations(range(len(vals)), 2):
        a, b = vals[i], vals[j]
        for lhs, op, rhs in ((a, "+", b), (a, "-", b), (b, "-", a), (a, "*", b), (a, "/", b), (b, "/", a)):
            result = apply_op(lhs, op, rhs)
            if result is None:
                continue
            if op in "+*" and lhs > rhs:
                lhs, rhs = rhs, lhs
            move = ArithMove(lhs, rhs, op, result)
            if move in seen:
                continue
            seen.add(move)
            out.append((move, numbers.without(a, b).with_(result)))
    out.sort(key=lambda mv: mv[0].sort_key())
    return tuple(out)


def one_move_values(numbers: NumberSet) -> set:
    return {m.result for m, _ in _legal_moves(numbers)}


def connecting_move(current: NumberSet, target: NumberSet) -> Optional[ArithMove]:
    """The first move (canonical order) that turns ``current`` into ``target``."""
    if len(current) != len(target) + 1:
        return None
    for move, after in legal_moves(current):
        if after == target:
            return move
    return None


def state_check(current: NumberSet, target: Union[Game24Target, NumberSet]) -> bool:
    goal = target.values if isinstance(target, Game24Target) else target
    return current == goal or connecting_move(current, goal) is not None


def _decompositions(v: Fraction, pool: Iterable[Fraction]) -> Iterator[Tuple[str, Fraction, Fraction]]:
    for p in pool:
        if p != 0:
            a, b = sorted((p, v / p))
            yield "*", a, b
        a, b = sorted((p, v - p))
        yield "+", a, b
        yield "-", v + p, p
        yield "-", p, p - v
        if p != 0:
            yield "/", v * p, p
            if v != 0:
                yield "/", p, p / v


@lru_cache(maxsize=1 << 18)
def _plausibility(current: Tuple[Fraction, ...], values: Tuple[Fraction, ...]) -> int:
    """How plausibly ``current`` can grow into ``values``; lower is better.

    Each target value is matched to a number on hand, to a pair on hand
    combined by one move, to a triple combined by two moves (when more than
    three numbers are on hand), or left uncovered.  Tier 0 covers everything
    with singles and pairs and nothing left over; tier 1 needs a triple.
    Tier 2 covers everything with singles and pairs and leaves spare
    numbers that collapse to 0 or 1 (absorbed by +0 or *1).  Tier 3 is a
    triple cover with such spares, or leaves at least three spare numbers
    per uncovered value.  Tier 4 is everything else.
    """
    n = len(current)
    makers = _makers(current)

    @lru_cache(maxsize=None)
    def rec(used: int, k: int, uncovered: int, deep: int) -> int:
        if k == len(values):
            spare = tuple(current[i] for i in range(n) if not used >> i & 1)
            if uncovered:
                return 3 if len(spare) >= 3 * uncovered else 4
            if not spare:
                return 1 if deep else 0
            return 2 if _absorbable(spare) and not deep else (3 if _absorbable(spare) else 4)
        best = rec(used, k + 1, uncovered + 1, deep)
        for mask in makers.get(values[k], ()):
            if best and not used & mask:
                best = min(best, rec(used | mask, k + 1, uncovered, deep + (bin(mask).count("1") > 2)))
        return best

    return rec(0, 0, 0, 0)


def _absorbable(spare: Tuple[Fraction, ...]) -> bool:
    """Whether leftover numbers can be folded away: a lone 0 or 1, or a pair making one."""
    if len(spare) == 1:
        return spare[0] in (0, 1)
    if len(spare) == 2:
        return bool(_pair_results(*spare) & {Fraction(0), Fraction(1)})
    return False


@lru_cache(maxsize=4096)
def _makers(current: Tuple[Fraction, ...]) -> Dict[Fraction, List[int]]:
    """Value -> bitmasks of the numbers (one, a pair or a triple) that produce it."""
    makers: Dict[Fraction, List[int]] = {}
    for i, v in enumerate(current):
        makers.setdefault(v, []).append(1 << i)
    for i, j in combinations(range(len(current)), 2):
        for r in _pair_results(current[i], current[j]):
            makers.setdefault(r, []).append(1 << i | 1 << j)
    if len(current) > 3:
        for trio in combinations(range(len(current)), 3):
            mask = sum(1 << i for i in trio)
            made = set()
            for x, y, z in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
                for r in _pair_results(current[trio[x]], current[trio[y]]):
                    made |= _pair_results(r, current[trio[z]])
            for r in made:
                makers.setdefault(r, []).append(mask)
    return makers


def _pair_results(a: Fraction, b: Fraction) -> set:
    out = {a + b, a - b, b - a, a * b}
    if b:
        out.add(a / b)
    if a:
        out.add(b / a)
    return out


def _odd_fraction(x: Fraction, current: Sequence[Fraction]) -> bool:
    """A fraction whose denominator divides none of the integers on hand."""
    if x.denominator == 1:
        return False
    return not any(c.denominator == 1 and c.numerator % x.denominator == 0 for c in current)


def backward_candidates(current: NumberSet, target: Union[Game24Target, NumberSet],
                        width: int) -> List[Game24Target]:
    """Up to ``width`` pre-targets of ``target``, each replacing one value by a pair.

    Pairs are drawn from a bounded pool: card values 1..13, the values in
    ``current`` and everything one move away from ``current``.  Candidates
    are ranked by how plausibly ``current`` can grow into them (see
    :func:`_plausibility`), then pairs with negative members go last, then
    fractions whose denominator divides no number on hand, then the
    operator (×, +, −, ÷) and finally the larger magnitude.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    tvals = target.values if isinstance(target, Game24Target) else target
    if not len(tvals):
        raise ValueError("target must be non-empty")
    out = list(_ranked_candidates(current, tvals)[:width])
    if not out:
        raise NoCandidates(f"no decomposition of {tvals}")
    return out


@lru_cache(maxsize=8192)
def _ranked_candidates(current: NumberSet, tvals: NumberSet) -> Tuple[Game24Target, ...]:
    cur = current.values
    near = set(cur) | one_move_values(current)
    pool = sorted(set(map(Fraction, CARD_RANGE)) | near)

    ranked = []
    for v in sorted(set(tvals.values)):
        parent_rest = tvals.without(v)
        for op, a, b in _decompositions(v, pool):
            if op == "/" and b == 0:
                continue
            values = parent_rest.with_(a, b)
            rank = (a < 0 or b < 0, _odd_fraction(a, cur) or _odd_fraction(b, cur),
                    BACKWARD_OP_ORDER.index(op), max(abs(a), abs(b)), a, b)
            ranked.append((rank, values, ArithMove(a, b, op, v)))
    ranked.sort(key=lambda r: r[0])

    tiers: List[List[Game24Target]] = [[] for _ in range(5)]
    seen = set()
    for _, values, move in ranked:
        k = values.key()
        if k in seen:
            continue
        seen.add(k)
        tiers[_plausibility(cur, values.values)].append(Game24Target(values, move))
    return tuple(t for tier in tiers for t in tier)


def forward_step(current: NumberSet, target: Union[Game24Target, NumberSet],
                 avoid: Iterable[Tuple[bytes, bytes]] = ()) -> Tuple[NumberSet, ArithMove]:
    """One move from ``current`` toward ``target``.

    Moves whose result already passes the state check come first, then
    moves ranked by overlap with the target values (multiset intersection
    size), then canonical move order.  Results whose
    ``(new, target)`` key pair is in ``avoid`` are skipped.
    """
    if len(current) < 2:
        raise Exhausted(f"no move possible on {current}")
    tvals = target.values if isinstance(target, Game24Target) else target
    tkey = tvals.key()
    blocked = set(avoid)
    best = None
    for move, after in legal_moves(current):
        if (after.key(), tkey) in blocked:
            continue
        rank = (not state_check(after, tvals), -after.overlap(tvals), move.sort_key())
        if best is None or rank < best[0]:
            best = (rank, after, move)
    if best is None:
        raise Exhausted(f"every move on {current} toward {tvals} is avoided")
    return best[1], best[2]


def verify_chain(chain: Sequence[ArithMove], original: NumberSet, goal: Number = 24) -> Optional[int]:
    """Check a move chain against the original numbers.

    Returns ``None`` when the chain is valid: each move is exact and consumes
    two live values, every original number is used, and the only value left
    is ``goal``.  Otherwise returns the 1-based index of the deepest invalid
    step (the last step when the failure is about usage or the final value).
    """
    goal = to_fraction(goal)
    live = original.counter()
    bad = []
    for k, move in enumerate(chain, start=1):
        ok = move.exact
        need = Counter([move.lhs, move.rhs])
        if all(live[v] >= c for v, c in need.items()):
            live -= need
        else:
            ok = False
        live[move.result] += 1
        if not ok:
            bad.append(k)
    if bad:
        return max(bad)
    if +live != Counter([goal]):
        return max(len(chain), 1)
    return None


def format_solution(chain: Sequence[ArithMove], original: NumberSet) -> str:
    """Fold a valid chain into one infix expression over the original numbers."""
    live: List[Tuple[Fraction, str, bool]] = [(v, fmt(v), False) for v in original]

    def take(value: Fraction) -> Tuple[str, bool]:
        for idx, (v, text, compound) in enumerate(live):
            if v == value:
                del live[idx]
                return text, compound
        raise ValueError(f"value {fmt(value)} not available")

    for move in chain:
        lt, lc = take(move.lhs)
        rt, rc = take(move.rhs)
        if lc:
            lt = f"({lt})"
        if rc:
            rt = f"({rt})"
        live.append((move.result, f"{lt}{move.op}{rt}", True))
    if len(live) != 1:
        raise ValueError("chain does not reduce to a single value")
    return live[0][1]


def evaluate_expression(text: str) -> Tuple[Fraction, List[Fraction]]:
    """Evaluate an infix expression exactly; returns the value and its leaf numbers."""
    leaves: List[Fraction] = []

    def ev(node: ast.AST) -> Fraction:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            leaves.append(Fraction(node.value))
            return Fraction(node.value)
        if isinstance(node, ast.BinOp):
            ops = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}
            op = ops.get(type(node.op))
            if op is None:
                raise ValueError("unsupported operator")
            res = apply_op(ev(node.left), op, ev(node.right))
            if res is None:
                raise ZeroDivisionError("division by zero")
            return res
        raise ValueError(f"unsupported expression element: {ast.dump(node)}")

    cleaned = text.replace("×", "*").replace("÷", "/").replace("−", "-")
    return ev(ast.parse(cleaned.strip(), mode="eval")), leaves


def check_expression(text: str, original: NumberSet, goal: Number = 24) -> bool:
    try:
        value, leaves = evaluate_expression(text)
    except (SyntaxError, ValueError, ZeroDivisionError):
        return False
    return value == to_fraction(goal) and NumberSet(tuple(leaves)) == original


@lru_cache(maxsize=None)
def _reachable(values: Tuple[Fraction, ...]) -> Dict[Fraction, str]:
    """All values of expression trees over the multiset, each with one witness.

    Splits the multiset into two non-empty sub-multisets in every way and
    combines their value sets with every operator in both operand orders;
    trees are therefore enumerated by their top-level split, which is
    independent of the engines' move sequencing.
    """
    if len(values) == 1:
        return {values[0]: fmt(values[0])}
    out: Dict[Fraction, str] = {}
    n = len(values)
    seen_splits = set()
    # the first number always goes left; swapped operands cover the other side
    for mask in range(1, 2 ** n - 1, 2):
        left = tuple(values[i] for i in range(n) if mask >> i & 1)
        right = tuple(values[i] for i in range(n) if not mask >> i & 1)
        if (left, right) in seen_splits:
            continue
        seen_splits.add((left, right))
        lvals, rvals = _reachable(left), _reachable(right)
        for a, ea in lvals.items():
            for b, eb in rvals.items():
                for r, text in ((a + b, f"({ea}+{eb})"), (a * b, f"({ea}*{eb})"),
                                (a - b, f"({ea}-{eb})"), (b - a, f"({eb}-{ea})")):
                    if r not in out:
                        out[r] = text
                if b and a / b not in out:
                    out[a / b] = f"({ea}/{eb})"
                if a and b / a not in out:
                    out[b / a] = f"({eb}/{ea})"
    return out


def _expression_for(values: Tuple[Fraction, ...], goal: Fraction) -> Optional[str]:
    """One expression over ``values`` equal to ``goal``, or ``None``.

    The top-level split is solved backwards: for every value ``a`` of the
    left part, the right part only has to contain the single ``b`` that
    completes ``a op b = goal``, so the full top-level table is never built.
    """
    if len(values) == 1:
        return fmt(values[0]) if values[0] == goal else None
    n = len(values)
    seen_splits = set()
    for mask in range(1, 2 ** n - 1, 2):
        left = tuple(values[i] for i in range(n) if mask >> i & 1)
        right = tuple(values[i] for i in range(n) if not mask >> i & 1)
        if (left, right) in seen_splits:
            continue
        seen_splits.add((left, right))
        rvals = _reachable(right)
        for a, ea in _reachable(left).items():
            wanted = [(goal - a, "{a}+{b}"), (a - goal, "{a}-{b}"), (a + goal, "{b}-{a}")]
            if a:
                wanted += [(goal / a, "{a}*{b}"), (goal * a, "{b}/{a}")]
                if goal:
                    wanted.append((a / goal, "{a}/{b}"))
            for b, shape in wanted:
                eb = rvals.get(b)
                if eb is not None:
                    return shape.format(a=ea, b=eb)
    return None


def brute_force_solvable(numbers: Union[NumberSet, Sequence[Number]], goal: Number = 24,
                         witness: bool = False):
    """Exhaustive check whether some expression over ``numbers`` equals ``goal``.

    With ``witness=True`` returns ``(solvable, expression_or_None)``.
    """
    ns = numbers if isinstance(numbers, NumberSet) else NumberSet.of(*numbers)
    if not 1 <= len(ns) <= 6:
        raise ValueError("brute_force_solvable supports 1 to 6 numbers")
    expr = _expression_for(ns.values, to_fraction(goal))
    return (expr is not None, expr) if witness else expr is not None


def add_redundant_one(numbers: NumberSet) -> NumberSet:
    return numbers.with_(Fraction(1))


# --- puzzle files -----------------------------------------------------------

def default_puzzle_file() -> Path:
    return Path(str(resources.files("rff") / "data" / "puzzles_4nums.txt"))


def load_puzzles(path: Union[str, Path, None] = None, start: int = 1,
                 end: Optional[int] = None) -> List[Tuple[int, NumberSet]]:
    """Read puzzles ``start..end`` (1-based, inclusive line numbers)."""
    p = Path(path) if path is not None else default_puzzle_file()
    out = []
    with open(p) as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno < start:
                continue
            if end is not None and lineno > end:
                break
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append((lineno, NumberSet.of(*(int(t) for t in line.split()))))
    return out


def write_puzzles(path: Union[str, Path], puzzles: Iterable[NumberSet]) -> int:
    n = 0
    with open(path, "w") as fh:
        for ns in puzzles:
            fh.write(str(ns) + "\n")
            n += 1
    return n


# --- oracle adapter ---------------------------------------------------------

@dataclass(frozen=True)
class Game24Node:
    """Forward-only search node: remaining numbers plus the moves so far."""

    numbers: NumberSet
    moves: Tuple[ArithMove, ...] = ()


def as_numberset(payload) -> NumberSet:
    if isinstance(payload, NumberSet):
        return payload
    if isinstance(payload, Game24Node):
        return payload.numbers
    if isinstance(payload, str):
        return NumberSet.parse(payload)
    if isinstance(payload, (int, Fraction)):
        return NumberSet.of(payload)
    return NumberSet.of(*payload)


def chain_from_frames(frames: Sequence[Frame]) -> Tuple[List[ArithMove], List[int]]:
    """Full move chain for a path, and the depth each chain step belongs to.

    The chain is the forward moves, then the move linking the last state to
    the last target (if they differ), then the target transitions replayed
    from the deepest target back up to the root.
    """
    chain: List[ArithMove] = []
    owner: List[int] = []
    for f in frames[1:]:
        chain.append(ArithMove.parse(f.state.provenance))
        owner.append(f.depth)
    last = frames[-1]
    s, t = as_numberset(last.state.payload), as_numberset(last.target.payload)
    if s != t:
        link = connecting_move(s, t)
        if link is None:
            raise AdapterFailure(f"state {s} does not reach target {t} in one move")
        chain.append(link)
        owner.append(last.depth)
    for f in reversed(frames[1:]):
        chain.append(ArithMove.parse(f.target.transition_note))
        owner.append(f.depth)
    return chain, owner


class Game24Adapter(DomainAdapter, ForwardAdapter):
    """Deterministic Game of 24 adapter for both the RFF engines and the forward baselines."""

    capability = Capability.TREE_SEARCH

    def __init__(self, width: Optional[int] = None):
        # the engine already bounds attempts per depth; this only trims G's ranking
        self.width = width

    # payloads
    def canonicalize(self, payload) -> NumberSet:
        return as_numberset(payload)

    def canonical_key(self, payload) -> bytes:
        if isinstance(payload, Game24Node):
            moves = ";".join(str(m) for m in payload.moves)
            return payload.numbers.key() + b"|" + moves.encode()
        return as_numberset(payload).key()

    def render(self, payload) -> str:
        return str(as_numberset(payload))

    def initial_state(self, task: Task) -> NumberSet:
        return as_numberset(task.input)

    def initial_target(self, task: Task) -> NumberSet:
        return NumberSet.of(task.goal)

    # G, R, C, V, O
    def last_step(self, task: Task, state: ProblemState, target: TargetState,
                  avoid: AvoidSlice) -> TargetState:
        current = as_numberset(state.payload)
        parent = as_numberset(target.payload)
        # the forward state shrinks by one per step and the target grows by one;
        # once the state is smaller than the next target they can never meet
        if len(current) < len(parent) + 2:
            raise NoCandidates(f"{current} cannot meet a decomposition of {parent}")
        tried = avoid.target_keys()
        cands = backward_candidates(current, parent, self.width or 10**9)
        # fresh targets first; a tried target comes back only while some
        # forward move toward it has not been attempted yet
        fresh = [c for c in cands if c.values.key() not in tried]
        retry = [c for c in cands if c.values.key() in tried
                 and any((after.key(), c.values.key()) not in avoid for _, after in legal_moves(current))]
        for cand in fresh + retry:
            return TargetState(cand.values, target.depth + 1, str(cand.transition))
        raise NoCandidates(f"all decompositions of {parent} already tried")

    def forward_step(self, task: Task, state: ProblemState, target: TargetState,
                     avoid: AvoidSlice) -> ProblemState:
        new, move = forward_step(as_numberset(state.payload), as_numberset(target.payload), avoid.pairs)
        return ProblemState(new, state.depth + 1, str(move))

    def state_check(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        return state_check(as_numberset(state.payload), as_numberset(target.payload))

    def is_grounded(self, task: Task, state: ProblemState, target: TargetState) -> bool:
        # the forward state reaching this depth would be within one move of the target
        return len(as_numberset(state.payload)) - target.depth <= len(as_numberset(target.payload)) + 1

    def verify(self, task: Task, frames: Sequence[Frame]) -> int:
        i = frames[-1].depth
        try:
            chain, owner = chain_from_frames(frames)
        except AdapterFailure:
            return max(i - 1, 0)
        bad = verify_chain(chain, as_numberset(task.input), task.goal)
        if bad is None:
            return i
        return max(owner[bad - 1] - 1, 0) if owner else 0

    def output(self, task: Task, frames: Sequence[Frame]) -> str:
        chain, _ = chain_from_frames(frames)
        return format_solution(chain, as_numberset(task.input))

    # forward-only baselines
    def root(self, task: Task) -> Game24Node:
        return Game24Node(as_numberset(task.input))

    def propose(self, task: Task, node: Game24Node) -> List[Game24Node]:
        return [Game24Node(after, node.moves + (move,)) for move, after in legal_moves(node.numbers)]

    def evaluate(self, task: Task, node: Game24Node) -> float:
        # a perfect "sure / impossible" judgement, then closeness to the goal
        if not brute_force_solvable(node.numbers, task.goal):
            return 0.0
        g = to_fraction(task.goal)
        return 1.0 + 1.0 / (1.0 + float(min(abs(v - g) for v in node.numbers)))

    def greedy_chain(self, task: Task) -> Game24Node:
        node = self.root(task)
        g = to_fraction(task.goal)
        while len(node.numbers) > 1:
            move, after = min(legal_moves(node.numbers), key=lambda mv: (abs(mv[0].result - g), mv[0].sort_key()))
            node = Game24Node(after, node.moves + (move,))
        return node

    def is_solution(self, task: Task, node: Game24Node) -> bool:
        return verify_chain(node.moves, as_numberset(task.input), task.goal) is None

    def answer(self, task: Task, node: Game24Node) -> str:
        return format_solution(node.moves, as_numberset(task.input))
