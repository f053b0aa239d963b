"""Translation of LTL bodies to Büchi automata and lasso acceptance.

The translation is the classic on-the-fly tableau: nodes carry obligations
split into "to process now", "processed" and "postponed to the next instant";
disjunctions and the until/release unfoldings fork nodes, contradictory
literal sets are dropped, and nodes agreeing on processed and postponed
obligations merge.  Acceptance is generalized (one set per until subformula,
ensuring its right side is not postponed forever) and then reduced to plain
Büchi with the usual counter construction.

Letters are sets of trace-anchored atoms; a transition guard lists the atoms
the consumed letter must contain and the ones it must not.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .formula import (
    And,
    Atom,
    Bottom,
    Next,
    Not,
    Or,
    Release,
    Top,
    Until,
    desugar,
)

INIT = -1  # virtual initial tableau node


def nnf(node):
    """Negation normal form of a desugared body."""
    t = type(node)
    if t in (Atom, Top, Bottom):
        return node
    if t is Not:
        s = node.sub
        ts = type(s)
        if ts is Atom:
            return node
        if ts is Top:
            return Bottom()
        if ts is Bottom:
            return Top()
        if ts is Not:
            return nnf(s.sub)
        if ts is And:
            return Or(nnf(Not(s.left)), nnf(Not(s.right)))
        if ts is Or:
            return And(nnf(Not(s.left)), nnf(Not(s.right)))
        if ts is Next:
            return Next(nnf(Not(s.sub)))
        if ts is Until:
            return Release(nnf(Not(s.left)), nnf(Not(s.right)))
        if ts is Release:
            return Until(nnf(Not(s.left)), nnf(Not(s.right)))
        raise TypeError(f"cannot normalize negated {ts.__name__}; desugar first")
    if t in (And, Or, Until, Release):
        return t(nnf(node.left), nnf(node.right))
    if t is Next:
        return Next(nnf(node.sub))
    raise TypeError(f"cannot normalize {t.__name__}; desugar first")


@dataclass(frozen=True)
class Guard:
    pos: frozenset
    neg: frozenset

    def admits(self, letter):
        return self.pos <= letter and not (self.neg & letter)


@dataclass
class BuchiAutomaton:
    """Plain Büchi automaton with guards consumed on edges."""
    states: tuple
    initial: object
    edges: dict             # state -> tuple of (guard, target)
    accepting: frozenset


class _Open:
    __slots__ = ("incoming", "new", "old", "nxt")

    def __init__(self, incoming, new, old, nxt):
        self.incoming = set(incoming)
        self.new = list(new)
        self.old = dict(old)    # ordered set: formula -> None
        self.nxt = dict(nxt)

    def fork(self, extra_new):
        return _Open(self.incoming, self.new + list(extra_new), self.old, self.nxt)


def _tableau(phi):
    """Expand the obligation graph; returns node data and until subformulas."""
    closed = {}        # (frozenset old, frozenset nxt) -> id
    old_of = []        # id -> tuple of processed formulas (insertion order)
    nxt_of = []
    incoming = []      # id -> set of predecessor ids (INIT allowed)
    untils = []        # first-appearance order

    work = deque([_Open({INIT}, [phi], {}, {})])
    while work:
        node = work.popleft()
        dead = False
        while node.new:
            f = node.new.pop(0)
            if f in node.old:
                continue
            t = type(f)
            if t is Top:
                continue
            if t is Bottom:
                dead = True
                break
            if t is Atom:
                if Not(f) in node.old:
                    dead = True
                    break
                node.old[f] = None
            elif t is Not:
                if f.sub in node.old:
                    dead = True
                    break
                node.old[f] = None
            elif t is And:
                node.old[f] = None
                node.new.extend((f.left, f.right))
            elif t is Or:
                node.old[f] = None
                work.append(node.fork([f.right]))
                node.new.append(f.left)
            elif t is Until:
                node.old[f] = None
                work.append(node.fork([f.right]))
                node.new.append(f.left)
                node.nxt[f] = None
            elif t is Release:
                node.old[f] = None
                work.append(node.fork([f.left, f.right]))
                node.new.append(f.right)
                node.nxt[f] = None
            elif t is Next:
                node.old[f] = None
                node.nxt[f.sub] = None
            else:
                raise TypeError(f"unexpected {t.__name__} in tableau")
        if dead:
            continue
        key = (frozenset(node.old), frozenset(node.nxt))
        if key in closed:
            incoming[closed[key]] |= node.incoming
            continue
        qid = len(old_of)
        closed[key] = qid
        old_of.append(tuple(node.old))
        nxt_of.append(tuple(node.nxt))
        incoming.append(set(node.incoming))
        for f in node.old:
            if type(f) is Until and f not in untils:
                untils.append(f)
        work.append(_Open({qid}, list(node.nxt), {}, {}))
    return old_of, nxt_of, incoming, untils


def ltl_to_buchi(body) -> BuchiAutomaton:
    """Büchi automaton for a macro-expanded body (sugar handled here)."""
    phi = nnf(desugar(body))
    old_of, _, incoming, untils = _tableau(phi)
    n = len(old_of)

    guards = []
    for old in old_of:
        pos = frozenset(f for f in old if type(f) is Atom)
        neg = frozenset(f.sub for f in old if type(f) is Not)
        guards.append(Guard(pos, neg))

    raw_edges = {INIT: []}
    for qid in range(n):
        raw_edges[qid] = []
    for qid in range(n):
        for pred in sorted(incoming[qid]):
            raw_edges[pred].append(qid)

    k = max(1, len(untils))
    old_sets = [frozenset(old) for old in old_of]
    fair = []
    for u in untils:
        if type(u.right) is Top:
            # a trivially true right side never shows up in the processed
            # set, but it also discharges the until at every instant
            fair.append(frozenset(range(n)))
        else:
            fair.append(frozenset(q for q in range(n)
                                  if u not in old_sets[q] or u.right in old_sets[q]))
    if not fair:
        fair.append(frozenset(range(n)))

    initial = (INIT, 0)
    states = [initial]
    seen = {initial}
    edges = {}
    queue = deque([initial])
    while queue:
        q, i = queue.popleft()
        advance = q != INIT and q in fair[i]
        j = (i + 1) % k if advance else i
        out = []
        for t in raw_edges[q]:
            target = (t, j)
            out.append((guards[t], target))
            if target not in seen:
                seen.add(target)
                states.append(target)
                queue.append(target)
        edges[(q, i)] = tuple(out)
    accepting = frozenset(s for s in states if s[0] != INIT and s[1] == 0 and s[0] in fair[0])
    return BuchiAutomaton(states=tuple(states), initial=initial,
                          edges=edges, accepting=accepting)


def accepts_lasso(ba: BuchiAutomaton, stem_letters, cycle_letters) -> bool:
    """Whether some run of `ba` over the ultimately periodic word is accepting."""
    if not cycle_letters:
        raise ValueError("a lasso needs a nonempty cycle")
    letters = list(stem_letters) + list(cycle_letters)
    n = len(letters)
    wrap = len(stem_letters)

    def npos(p):
        return p + 1 if p + 1 < n else wrap

    start = (ba.initial, 0)
    succ = {}
    queue = deque([start])
    seen = {start}
    while queue:
        q, p = queue.popleft()
        out = []
        for guard, t in ba.edges[q]:
            if guard.admits(letters[p]):
                nxt = (t, npos(p))
                out.append(nxt)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        succ[(q, p)] = out

    return _has_accepting_cycle(start, succ, lambda node: node[0] in ba.accepting)


def _has_accepting_cycle(start, succ, is_accepting):
    """Reachable strongly connected component with an edge and an accepting node."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    counter = [0]
    work = [(start, iter(succ[start]))]
    index[start] = low[start] = counter[0]
    counter[0] += 1
    stack.append(start)
    on_stack.add(start)
    while work:
        node, it = work[-1]
        advanced = False
        for nxt in it:
            if nxt not in index:
                index[nxt] = low[nxt] = counter[0]
                counter[0] += 1
                stack.append(nxt)
                on_stack.add(nxt)
                work.append((nxt, iter(succ[nxt])))
                advanced = True
                break
            if nxt in on_stack:
                low[node] = min(low[node], index[nxt])
        if advanced:
            continue
        work.pop()
        if work:
            parent = work[-1][0]
            low[parent] = min(low[parent], low[node])
        if low[node] == index[node]:
            comp = []
            while True:
                member = stack.pop()
                on_stack.discard(member)
                comp.append(member)
                if member == node:
                    break
            members = set(comp)
            has_edge = any(t in members for m in comp for t in succ[m])
            if has_edge and any(is_accepting(m) for m in comp):
                return True
    return False
