"""Invariant checks that read a SearchTrace alone (no access to engine internals)."""
from __future__ import annotations

from typing import Callable, Dict, List, Set, Tuple

from rff.core import EventKind, SearchTrace

Pair = Tuple[str, str]


def game24_key(rendered: str) -> str:
    return rendered.replace(" ", ",")


def avoid_contract_violations(trace: SearchTrace, key: Callable[[str], str] = game24_key) -> List[str]:
    """Replay the avoid bookkeeping from Backtrack events and compare it with what R saw.

    * every Backtrack(j) has j below the depth it fires at;
    * the next R call at depth j+1 consults a set containing the recorded pair;
    * each R call at depth d+1 consults exactly the pairs recorded at depth d
      since depth d was last re-entered (deeper records are gone);
    * no R call returns a pair that was in the set it consulted.
    """
    bad: List[str] = []
    live: Dict[int, Set[Pair]] = {}
    pending: Dict[int, Pair] = {}
    for e in trace.events:
        if e.kind is EventKind.BACKTRACK:
            j = e.detail["to"]
            if not j < e.depth:
                bad.append(f"seq {e.seq}: Backtrack({j}) at depth {e.depth}")
            for d in [d for d in live if d > j]:
                del live[d]
            for d in [d for d in pending if d > j]:
                del pending[d]
            pair = tuple(e.detail["recorded"])
            live.setdefault(j, set()).add(pair)
            pending[j] = pair
        elif e.kind is EventKind.FORWARD:
            seen = {tuple(p) for p in e.detail["avoid"]}
            parent = e.depth - 1
            if parent in pending:
                if pending.pop(parent) not in seen:
                    bad.append(f"seq {e.seq}: recorded pair missing from A_{parent}")
            if seen != live.get(parent, set()):
                bad.append(f"seq {e.seq}: A_{parent} is {sorted(seen)}, expected {sorted(live.get(parent, set()))}")
            made = (key(e.detail["state"]), key(e.detail["target"]))
            if made in seen:
                bad.append(f"seq {e.seq}: R repeated avoided pair {made}")
    return bad


def visited_matches_forward_count(trace: SearchTrace) -> bool:
    count = 0
    for e in trace.events:
        if e.kind is EventKind.FORWARD:
            count += 1
    return count == trace.visited_states and [e.seq for e in trace.events] == list(range(len(trace.events)))
