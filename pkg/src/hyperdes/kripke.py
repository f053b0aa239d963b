"""Kripke encodings of partially observed automata.

A node pairs an automaton state with the observation that entered it (no
observation yet for initial nodes).  Successors of (x, o) are exactly the
pairs (x', o') where x' is reachable from x by one observable event masked o'
padded with unobservable events on both sides, so infinite node paths
correspond to runs of the automaton sampled at observation instants.

The modified encoding adds, for every node, a twin labeled with the pause
proposition "tau" and connected back and forth with its original; a path may
therefore stall at any instant, which is what delayed estimation and the
corresponding properties quantify over.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .des import EPS, observable_step, unobservable_reach, validate_fsa
from .errors import AlreadyModified, StringNotInLanguage


class KNode(NamedTuple):
    state: str
    obs: Optional[str]      # None on nodes not yet entered by an observation
    copy: bool = False      # True for the stalling twin in the modified form

    def pretty(self):
        o = "eps" if self.obs is None else self.obs
        if self.copy:
            return f"({self.state}^c,{o}^c)"
        return f"({self.state},{o})"


@dataclass(frozen=True)
class Lasso:
    """Ultimately periodic node path: stem then cycle repeated forever."""
    stem: tuple
    cycle: tuple

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("a lasso needs a nonempty cycle")

    def node_at(self, i):
        if i < len(self.stem):
            return self.stem[i]
        return self.cycle[(i - len(self.stem)) % len(self.cycle)]


def canonical_lasso(lasso: Lasso) -> Lasso:
    """Shortest stem, primitive cycle form of the same infinite path.

    The cycle is cut to its smallest period and stem entries that merely
    pre-play the cycle are absorbed into it by rotation, so two lassos
    denote the same path iff their canonical forms are equal.
    """
    cycle = list(lasso.cycle)
    for period in range(1, len(cycle) + 1):
        if len(cycle) % period == 0 and cycle == cycle[:period] * (len(cycle) // period):
            cycle = cycle[:period]
            break
    stem = list(lasso.stem)
    while stem and stem[-1] == cycle[-1]:
        cycle = [cycle[-1]] + cycle[:-1]
        stem.pop()
    return Lasso(stem=tuple(stem), cycle=tuple(cycle))


class KripkeStructure:
    """Finite Kripke structure with set-of-proposition labels.

    Propositions use the same surface syntax as the formula language:
    "x:<state>", "o:<observation>" and "tau".
    """

    def __init__(self, fsa, nodes, initial, succ, label, modified):
        self.fsa = fsa
        self.nodes = tuple(nodes)
        self.initial = tuple(initial)
        self.succ = succ
        self.label = label
        self.modified = modified
        self.index = {q: i for i, q in enumerate(self.nodes)}
        self.state_props = tuple(f"x:{x}" for x in fsa.states)
        self.obs_props = tuple(f"o:{o}" for o in fsa.observations)

    def __repr__(self):
        kind = "modified Kripke" if self.modified else "Kripke"
        return f"<{kind}: {len(self.nodes)} nodes, {sum(len(s) for s in self.succ.values())} edges>"


def build_kripke(fsa) -> KripkeStructure:
    """Reachable observation-sampled encoding of a validated automaton."""
    if not fsa.validated:
        validate_fsa(fsa)

    step = {}

    def targets(x, o):
        if (x, o) not in step:
            step[(x, o)] = fsa.sort_states(observable_step(fsa, [x], o))
        return step[(x, o)]

    initial = tuple(KNode(x, EPS) for x in fsa.sort_states(unobservable_reach(fsa, fsa.initial)))
    nodes = list(initial)
    seen = set(initial)
    succ = {}
    queue = list(initial)
    while queue:
        q = queue.pop(0)
        out = []
        for o in fsa.observations:
            for y in targets(q.state, o):
                nxt = KNode(y, o)
                out.append(nxt)
                if nxt not in seen:
                    seen.add(nxt)
                    nodes.append(nxt)
                    queue.append(nxt)
        succ[q] = tuple(out)

    label = {}
    for q in nodes:
        if q.obs is EPS:
            label[q] = frozenset({f"x:{q.state}"})
        else:
            label[q] = frozenset({f"x:{q.state}", f"o:{q.obs}"})
    return KripkeStructure(fsa, nodes, initial, succ, label, modified=False)


def build_modified_kripke(k: KripkeStructure) -> KripkeStructure:
    """Add a stalling twin per node, labeled with "tau"."""
    if k.modified:
        raise AlreadyModified("structure already carries stalling twins")
    twins = {q: KNode(q.state, q.obs, copy=True) for q in k.nodes}
    nodes = list(k.nodes) + [twins[q] for q in k.nodes]
    succ = {}
    for q in k.nodes:
        succ[q] = tuple(k.succ[q]) + (twins[q],)
        succ[twins[q]] = (q,)
    label = dict(k.label)
    for q in k.nodes:
        label[twins[q]] = frozenset({f"x:{q.state}", "tau"})
    return KripkeStructure(k.fsa, nodes, k.initial, succ, label, modified=True)


def compatible_runs(fsa, k: KripkeStructure, s, x0, max_runs=None):
    """Node paths of `k` compatible with executing the string `s` from `x0`.

    The concrete trajectory is cut into segments at observable events; a
    compatible path picks one visited state per segment.  Every combination
    is a path of `k`, and these are all of them.
    """
    if x0 not in fsa.initial:
        raise StringNotInLanguage(f"{x0!r} is not an initial state")
    segments = [[x0]]
    seg_obs = [EPS]
    x = x0
    for e in s:
        y = fsa.transitions.get((x, e))
        if y is None:
            raise StringNotInLanguage(f"event {e!r} is not enabled after the prefix ending in state {x!r}")
        if fsa.observable(e):
            segments.append([y])
            seg_obs.append(fsa.mask[e])
        else:
            segments[-1].append(y)
        x = y

    choice_sets = []
    for seg, o in zip(segments, seg_obs):
        uniq = []
        for state in seg:
            q = KNode(state, o)
            if q not in uniq:
                uniq.append(q)
        choice_sets.append(uniq)

    runs = [()]
    for choices in choice_sets:
        runs = [r + (q,) for r in runs for q in choices]
        if max_runs is not None and len(runs) > max_runs:
            runs = runs[:max_runs]
    return runs


def export_dot(k: KripkeStructure) -> str:
    """Deterministic DOT rendering; initial nodes get a doubled border."""
    lines = ["digraph kripke {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    initial = set(k.initial)
    for q in k.nodes:
        props = sorted(k.label[q], key=_prop_order)
        shape = ", peripheries=2" if q in initial else ""
        lines.append(f'  "{q.pretty()}" [label="{{{",".join(props)}}}"{shape}];')
    for q in k.nodes:
        for t in k.succ[q]:
            lines.append(f'  "{q.pretty()}" -> "{t.pretty()}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _prop_order(p):
    # state prop first, then observation, then the pause marker
    if p.startswith("x:"):
        return (0, p)
    if p.startswith("o:"):
        return (1, p)
    return (2, p)
