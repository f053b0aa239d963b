"""Hyperproperty checking engines over Kripke encodings.

Three engines cover the quantifier prefixes that occur in the built-in
properties:

- forall/forall: classic automata route.  The negated body is translated to a
  Büchi automaton, composed with the two-fold self-composition of the
  structure, and searched for an accepting lasso with a nested DFS.
- forall/exists: the built-in formulas of this shape all lie in a synchronous
  fragment (observation agreement up to a single distinguished instant plus
  membership obligations there), which admits an exact subset-tracking walk:
  the set of still-viable witness candidates for the existential trace is
  advanced along every universal trace, and a property violation is exactly a
  reachable instant where the candidate set has died.
- exists/forall: bounded candidate enumeration; a found witness is conclusive,
  exhaustion is reported as inconclusive.  verify() prefers the exact
  observer-based route for weak detectability and falls back here on request.
"""

from __future__ import annotations

import os
import time
from collections import deque
from dataclasses import dataclass

from .buchi import ltl_to_buchi
from .des import boundary_states, refine_fault_partition, validate_fsa
from .errors import (
    MissingAnnotation,
    NotARun,
    NotSynchronousFragment,
    PrefixMismatch,
)
from .formula import (
    Always,
    And,
    Atom,
    Bottom,
    Eventually,
    HyperFormula,
    Implies,
    Not,
    ObsEq,
    Once,
    Or,
    StateEq,
    Until,
    _disj,
    eval_body,
    expand_macros,
    property_formula,
)
from .kripke import (KNode, KripkeStructure, Lasso, build_kripke,
                     build_modified_kripke, canonical_lasso)

DEFAULT_BOUND_ENV = "HYPERDES_BOUND"


@dataclass
class Verdict:
    property: str
    holds: object               # True, False or "inconclusive"
    mode: str                   # "exact" or "bounded"
    engine: str
    bound: int = None
    witness: tuple = None       # (pi1 Lasso, pi2 Lasso or None)
    details: dict = None
    seconds: float = None


# ---------------------------------------------------------------------------
# shared helpers


def _node_atoms(k, node, var):
    return frozenset(Atom(p, var) for p in k.label[node])


def _pair_order(items):
    """Pairs of initial nodes, misaligned pairs first.

    Distinct start states are where the interesting counterexamples live, so
    they are explored first; this also fixes the reported witness
    deterministically.
    """
    n = len(items)
    out = []
    for i in range(n):
        for d in range(1, n + 1):
            out.append((items[i], items[(i + d) % n]))
    seen = []
    for p in out:
        if p not in seen:
            seen.append(p)
    return seen


def _project(k, product_path, coord):
    return tuple(q[0][coord] for q in product_path)


def _check_prefix(formula, expected):
    got = formula.quantifiers()
    if got != expected:
        raise PrefixMismatch(
            f"engine handles prefix {'/'.join(expected)}, formula has {'/'.join(got)}")


# ---------------------------------------------------------------------------
# forall/forall engine


def check_forall_forall(k: KripkeStructure, formula: HyperFormula) -> Verdict:
    """Exact check of a two-trace universal formula via nested DFS."""
    _check_prefix(formula, ("forall", "forall"))
    (q1, v1), (q2, v2) = formula.prefix
    body = expand_macros(formula.body, k)
    ba = ltl_to_buchi(Not(body))

    succ_cache = {}

    def comp_succ(c):
        if c not in succ_cache:
            u, v = c
            succ_cache[c] = tuple((a, b) for a in k.succ[u] for b in k.succ[v])
        return succ_cache[c]

    letter_cache = {}

    def letter(c):
        if c not in letter_cache:
            u, v = c
            letter_cache[c] = _node_atoms(k, u, v1) | _node_atoms(k, v, v2)
        return letter_cache[c]

    def successors(state):
        c, b = state
        lab = letter(c)
        out = []
        for c2 in comp_succ(c):
            for guard, b2 in ba.edges[b]:
                if guard.admits(lab):
                    out.append((c2, b2))
        return out

    roots = [((u, v), ba.initial) for u, v in _pair_order(list(k.initial))]
    accepting = ba.accepting
    hit = _nested_dfs(roots, successors, lambda s: s[1] in accepting)
    if hit is None:
        return Verdict(property=None, holds=True, mode="exact",
                       engine="hyper-forall-forall")
    stem, cycle = hit
    pi1 = canonical_lasso(Lasso(stem=_project(k, stem, 0), cycle=_project(k, cycle, 0)))
    pi2 = canonical_lasso(Lasso(stem=_project(k, stem, 1), cycle=_project(k, cycle, 1)))
    return Verdict(property=None, holds=False, mode="exact",
                   engine="hyper-forall-forall", witness=(pi1, pi2))


def _nested_dfs(roots, successors, is_accepting):
    """Search for a reachable accepting cycle; returns (stem, cycle) or None.

    Standard two-color nested DFS: the outer search runs in post-order and
    seeds an inner search from every accepting state; the inner search
    succeeds when it closes back into the outer search path.
    """
    cyan = set()
    blue = set()
    red = set()
    path = []
    succ_cache = {}

    def succ_of(state):
        if state not in succ_cache:
            succ_cache[state] = tuple(successors(state))
        return succ_cache[state]

    def red_search(seed):
        # returns path seed -> ... -> some cyan node, or None
        parent = {seed: None}
        stack = [seed]
        while stack:
            node = stack.pop()
            for nxt in succ_of(node):
                if nxt in cyan:
                    chain = [nxt, node]
                    cur = node
                    while parent[cur] is not None:
                        cur = parent[cur]
                        chain.append(cur)
                    chain.reverse()  # seed ... node nxt
                    return chain
                if nxt not in red:
                    red.add(nxt)
                    parent[nxt] = node
                    stack.append(nxt)
        return None

    for root in roots:
        if root in blue:
            continue
        stack = [(root, iter(succ_of(root)))]
        cyan.add(root)
        path.append(root)
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in cyan and nxt not in blue:
                    cyan.add(nxt)
                    path.append(nxt)
                    stack.append((nxt, iter(succ_of(nxt))))
                    advanced = True
                    break
            if advanced:
                continue
            if is_accepting(node):
                found = red_search(node)
                if found is not None:
                    # found = node ... w with w on the current path
                    w = found[-1]
                    i = path.index(w)
                    j = path.index(node)
                    stem = list(path[:i])
                    cycle = list(path[i:j + 1]) + found[1:-1]
                    # found[1:-1] is the detour node -> ... -> just before w
                    return tuple(stem), tuple(cycle)
            stack.pop()
            path.pop()
            cyan.discard(node)
            blue.add(node)
    return None


# ---------------------------------------------------------------------------
# forall/exists engine (synchronous fragment)


@dataclass(frozen=True)
class SyncShape:
    """Normal form of the supported forall/exists bodies."""
    anchor: str                 # "instant0" or "tau_once"
    v1: str
    v2: str
    p1_sets: tuple              # state sets; the universal trace must meet each at the anchor
    p2_sets: tuple              # state sets; witness candidates must meet each at the anchor
    eq_scope: str               # "always" or "until_anchor"


def _conjuncts(node):
    if isinstance(node, And):
        return _conjuncts(node.left) + _conjuncts(node.right)
    return [node]


def _state_disj(node, var):
    """Set of states from a disjunction of x-atoms over `var`, else None."""
    if isinstance(node, Bottom):
        return frozenset()
    states = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Or):
            stack.extend([cur.left, cur.right])
        elif isinstance(cur, Atom) and cur.trace == var and cur.prop.startswith("x:"):
            states.append(cur.prop[2:])
        else:
            return None
    return frozenset(states)


def match_sync_shape(k: KripkeStructure, formula: HyperFormula) -> SyncShape:
    """Recognize a supported forall/exists body or explain why not."""
    _check_prefix(formula, ("forall", "exists"))
    (_, v1), (_, v2) = formula.prefix
    body = expand_macros(formula.body, k)
    if not isinstance(body, Implies):
        raise NotSynchronousFragment("body must be an implication")
    obseq = expand_macros(ObsEq(v1, v2), k)
    ante = _conjuncts(body.left)
    cons = _conjuncts(body.right)
    tau1 = Atom("tau", v1)
    tau2 = Atom("tau", v2)
    pause_marker = _conjuncts(expand_macros(Once(tau1), k))

    if any(c in pause_marker for c in ante):
        # pause-anchored shape: the universal trace stalls exactly once, at a
        # constrained state; the witness must stall there too.
        leftovers = [c for c in ante if c not in pause_marker]
        if (len(leftovers) != 1 or len(ante) != len(pause_marker) + 1
                or any(m not in ante for m in pause_marker)):
            raise NotSynchronousFragment("antecedent must pair the single-pause marker "
                                         "with one pause constraint")
        guard = leftovers[0]
        if not (isinstance(guard, Always) and isinstance(guard.sub, Implies)
                and guard.sub.left == tau1):
            raise NotSynchronousFragment("pause constraint must condition on the pause marker")
        p1_states = _state_disj(guard.sub.right, v1)
        if p1_states is None:
            raise NotSynchronousFragment("pause constraint must be a state disjunction")
        scope = None
        duty_states = None
        if len(cons) != 2:
            raise NotSynchronousFragment("consequent must pair agreement with a pause obligation")
        for c in cons:
            if isinstance(c, Until) and c.left == obseq and c.right == tau1:
                scope = "until_anchor"
            elif isinstance(c, Always) and c.sub == obseq:
                scope = "always"
            elif (isinstance(c, Always) and isinstance(c.sub, Implies)
                    and c.sub.left == tau1 and isinstance(c.sub.right, And)
                    and c.sub.right.left == tau2):
                duty_states = _state_disj(c.sub.right.right, v2)
        if scope is None:
            raise NotSynchronousFragment("agreement must hold always or until the pause")
        if duty_states is None:
            raise NotSynchronousFragment("witness obligation at the pause is missing "
                                         "or not a state disjunction")
        return SyncShape(anchor="tau_once", v1=v1, v2=v2,
                         p1_sets=(p1_states,), p2_sets=(duty_states,),
                         eq_scope=scope)

    # instant-0 shape: requirements and obligations are checked at the first
    # instant and agreement holds forever.
    p1_sets = tuple(_state_disj(c, v1) for c in ante)
    if any(s is None for s in p1_sets):
        raise NotSynchronousFragment("antecedent must be state disjunctions at instant 0")
    p2_sets = []
    eq_seen = False
    for c in cons:
        if isinstance(c, Always) and c.sub == obseq:
            eq_seen = True
            continue
        s = _state_disj(c, v2)
        if s is None:
            raise NotSynchronousFragment("consequent must be state disjunctions plus agreement")
        p2_sets.append(s)
    if not eq_seen:
        raise NotSynchronousFragment("consequent must require observation agreement")
    return SyncShape(anchor="instant0", v1=v1, v2=v2,
                     p1_sets=p1_sets, p2_sets=tuple(p2_sets), eq_scope="always")


def _originals(k):
    return [q for q in k.nodes if not q.copy]


def check_forall_exists_sync(k: KripkeStructure, formula: HyperFormula) -> Verdict:
    """Exact check of the synchronous forall/exists fragment."""
    shape = match_sync_shape(k, formula)
    if shape.anchor == "tau_once" and not k.modified:
        raise NotSynchronousFragment("pause-anchored formulas need the structure with stalling twins")

    orig_succ = {q: tuple(t for t in k.succ[q] if not t.copy) for q in k.nodes
                 if not q.copy}
    initials = list(k.initial)

    def meets(state, sets):
        return all(state in s for s in sets)

    def d_step(dset, obs):
        return frozenset(t for d in dset for t in orig_succ[d] if t.obs == obs)

    parents = {}

    if shape.anchor == "instant0":
        d0_all = frozenset(q for q in initials if meets(q.state, shape.p2_sets))
        queue = deque()
        seen = set()
        for q1 in initials:
            if not meets(q1.state, shape.p1_sets):
                continue
            node = ("post", q1, d0_all)
            if d0_all == frozenset():
                return _sync_violation(orig_succ, [q1])
            parents[node] = None
            seen.add(node)
            queue.append(node)
        while queue:
            node = queue.popleft()
            _, q1, dset = node
            for t1 in orig_succ[q1]:
                d2 = d_step(dset, t1.obs)
                if not d2:
                    path = _walk_path(parents, node) + [t1]
                    return _sync_violation(orig_succ, path)
                nxt = ("post", t1, d2)
                if nxt not in seen:
                    seen.add(nxt)
                    parents[nxt] = (node, "step", t1)
                    queue.append(nxt)
        return Verdict(property=None, holds=True, mode="exact",
                       engine="hyper-forall-exists")

    # pause-anchored walk
    d0 = frozenset(initials)
    queue = deque()
    seen = set()
    for q1 in initials:
        node = ("pre", q1, d0)
        parents[node] = None
        seen.add(node)
        queue.append(node)
    while queue:
        node = queue.popleft()
        phase, q1, dset = node
        if phase == "pre" and meets(q1.state, shape.p1_sets):
            d_anchor = frozenset(d for d in dset if meets(d.state, shape.p2_sets))
            if not d_anchor:
                path = _walk_path(parents, node)
                path = path + [KNode(q1.state, q1.obs, copy=True), q1]
                return _sync_violation(orig_succ, path)
            if shape.eq_scope == "always":
                nxt = ("post", q1, d_anchor)
                if nxt not in seen:
                    seen.add(nxt)
                    parents[nxt] = (node, "anchor", q1)
                    queue.append(nxt)
        for t1 in orig_succ[q1]:
            d2 = d_step(dset, t1.obs)
            if phase == "post" and not d2:
                path = _walk_path(parents, node) + [t1]
                return _sync_violation(orig_succ, path)
            nxt = (phase, t1, d2)
            if nxt not in seen:
                seen.add(nxt)
                parents[nxt] = (node, "step", t1)
                queue.append(nxt)
    return Verdict(property=None, holds=True, mode="exact",
                   engine="hyper-forall-exists")


def _walk_path(parents, node):
    """Universal-trace node sequence leading to a walk state."""
    segments = []
    cur = node
    while cur is not None:
        entry = parents[cur]
        if entry is None:
            segments.append([cur[1]])
            break
        prev, move, q = entry
        if move == "anchor":
            segments.append([KNode(q.state, q.obs, copy=True), q])
        else:
            segments.append([q])
        cur = prev
    segments.reverse()
    return [q for seg in segments for q in seg]


def _sync_violation(orig_succ, path):
    """Package a violating universal trace: extend the path into a lasso."""
    tail = path[-1]
    cont = [tail]
    seen_at = {tail: 0}
    while True:
        nxt = orig_succ[cont[-1]][0]
        if nxt in seen_at:
            cut = seen_at[nxt]
            stem = tuple(path[:-1]) + tuple(cont[:cut])
            cycle = tuple(cont[cut:])
            break
        seen_at[nxt] = len(cont)
        cont.append(nxt)
    pi1 = canonical_lasso(Lasso(stem=stem, cycle=cycle))
    return Verdict(property=None, holds=False, mode="exact",
                   engine="hyper-forall-exists", witness=(pi1, None))


def forall_exists_refutes(k: KripkeStructure, formula: HyperFormula,
                          pi1: Lasso) -> bool:
    """Check that no witness trace exists for this particular universal trace."""
    shape = match_sync_shape(k, formula)
    nodes = list(pi1.stem) + list(pi1.cycle)
    initials = list(k.initial)
    orig_succ = {q: tuple(t for t in k.succ[q] if not t.copy) for q in k.nodes
                 if not q.copy}

    def meets(state, sets):
        return all(state in s for s in sets)

    def d_step(dset, obs):
        return frozenset(t for d in dset for t in orig_succ[d] if t.obs == obs)

    if shape.anchor == "instant0":
        if nodes[0] not in k.initial or not meets(nodes[0].state, shape.p1_sets):
            return False
        dset = frozenset(q for q in initials if meets(q.state, shape.p2_sets))
        anchor_index = 0
    else:
        twins = [i for i, q in enumerate(nodes) if q.copy]
        if len(twins) != 1 or any(q.copy for q in pi1.cycle):
            return False
        anchor_index = twins[0]
        paused = nodes[anchor_index]
        if not meets(paused.state, shape.p1_sets):
            return False
        dset = frozenset(initials)
        for i in range(1, anchor_index):
            dset = d_step(dset, nodes[i].obs)
        dset = frozenset(d for d in dset if meets(d.state, shape.p2_sets))
        if shape.eq_scope == "until_anchor":
            return not dset

    # survive the rest of the lasso; periodic repetition means survival forever
    pos = anchor_index + 1
    if shape.anchor == "tau_once":
        pos += 1  # skip the return to the original, which is nodes[anchor+1]
        if not dset:
            return True
    seen = set()
    stem_len = len(pi1.stem)
    cycle_len = len(pi1.cycle)
    while True:
        if pos >= len(nodes):
            wrapped = stem_len + (pos - stem_len) % cycle_len if cycle_len else stem_len
            pos = wrapped
        key = (pos, dset)
        if key in seen:
            return False  # candidates survive the loop: a witness exists
        seen.add(key)
        dset = d_step(dset, nodes[pos].obs)
        if not dset:
            return True
        pos += 1


# ---------------------------------------------------------------------------
# exists/forall engine (bounded)


def _collapse_body(k, formula):
    """The expanded body: always obs-equal implies eventually always
    state-equal, over the formula's two trace variables."""
    (_, v1), (_, v2) = formula.prefix
    return Implies(Always(expand_macros(ObsEq(v1, v2), k)),
                   Eventually(Always(expand_macros(StateEq(v1, v2), k))))


def _estimate_walk_accepts(k, pi1):
    """Decide the collapse body for one candidate by tracking every node the
    structure can reach while matching the candidate's observations, and
    requiring that the tracked set is eventually a singleton forever.

    The tracked set is exactly the state estimate for the candidate's
    observation sequence, so it also covers matching runs that die out after
    finitely many steps.  A product check over infinite traces alone is
    weaker: it can certify a candidate whose estimate stays ambiguous at
    every instant because each ambiguous branch eventually fails to match
    the next observation.  Such a candidate never pins down the state and
    must not count."""
    nodes = list(pi1.stem) + list(pi1.cycle)
    n = len(nodes)
    wrap = len(pi1.stem)
    pos = 0
    dset = frozenset(k.initial)
    first_at = {}
    singleton = []
    while (pos, dset) not in first_at:
        first_at[(pos, dset)] = len(singleton)
        singleton.append(len(dset) == 1)
        pos = pos + 1 if pos + 1 < n else wrap
        obs = nodes[pos].obs
        dset = frozenset(t for d in dset for t in k.succ[d] if t.obs == obs)
    start = first_at[(pos, dset)]
    return all(singleton[start:])


def _inner_universal_holds(k, pi1, formula, nbody_ba):
    """With the existential trace fixed, check all traces satisfy the body."""
    (_, v1), (_, v2) = formula.prefix
    nodes = list(pi1.stem) + list(pi1.cycle)
    n = len(nodes)
    wrap = len(pi1.stem)

    def npos(p):
        return p + 1 if p + 1 < n else wrap

    pi1_atoms = [_node_atoms(k, q, v1) for q in nodes]

    def successors(state):
        p, q2, b = state
        lab = pi1_atoms[p] | _node_atoms(k, q2, v2)
        out = []
        q2succ = k.succ[q2]
        for guard, b2 in nbody_ba.edges[b]:
            if guard.admits(lab):
                for t in q2succ:
                    out.append((npos(p), t, b2))
        return out

    roots = [(0, q2, nbody_ba.initial) for q2 in k.initial]
    hit = _nested_dfs(roots, successors, lambda s: s[2] in nbody_ba.accepting)
    return hit is None


def check_exists_forall_bounded(k: KripkeStructure, formula: HyperFormula,
                                bound=None, max_candidates=20000) -> Verdict:
    """Semi-decision for exists/forall: try candidate lassos up to a length
    bound; success is conclusive, exhaustion is not.

    Candidates for the collapse body (always obs-equal implies eventually
    always state-equal) are accepted with the estimate walk, which also
    quantifies over finite matching runs; every other body is checked by
    testing emptiness of the product of the candidate, the structure and the
    Büchi automaton of the negated body."""
    _check_prefix(formula, ("exists", "forall"))
    body = expand_macros(formula.body, k)
    if bound is None:
        bound = len(k.nodes) + 1
    collapse = body == _collapse_body(k, formula)
    nbody_ba = None if collapse else ltl_to_buchi(Not(body))

    def accepts(cand):
        if collapse:
            return _estimate_walk_accepts(k, cand)
        return _inner_universal_holds(k, cand, formula, nbody_ba)

    tried = 0
    stack = []
    for q0 in k.initial:
        stack = [([q0], {q0})]
        while stack:
            path, onpath = stack.pop()
            last = path[-1]
            for t in k.succ[last]:
                if t in onpath:
                    i = path.index(t)
                    cand = canonical_lasso(
                        Lasso(stem=tuple(path[:i]), cycle=tuple(path[i:])))
                    tried += 1
                    if accepts(cand):
                        return Verdict(property=None, holds=True, mode="bounded",
                                       engine="hyper-exists-forall",
                                       bound=bound, witness=(cand, None))
                    if tried >= max_candidates:
                        return Verdict(property=None, holds="inconclusive",
                                       mode="bounded", bound=bound,
                                       engine="hyper-exists-forall",
                                       details={"candidates_tried": tried})
                elif len(path) < bound:
                    stack.append((path + [t], onpath | {t}))
    return Verdict(property=None, holds="inconclusive", mode="bounded",
                   bound=bound, engine="hyper-exists-forall",
                   details={"candidates_tried": tried})


# ---------------------------------------------------------------------------
# orchestration


def _structures(fsa, needed):
    plain = build_kripke(fsa)
    if needed == "modified":
        return build_modified_kripke(plain)
    return plain


def _decision_formula(kind, target, part):
    """Formula actually used to decide a property.

    Same as property_formula for every kind except predictability.  The
    predictability body property_formula builds triggers at the first
    faulted instant and requires the compared trace to agree on
    observations strictly before that instant.  An encoded step bundles one
    observable event with the unobservable events that follow it, so the
    step introducing the fault can itself carry an observation, emitted
    before the fault event; an alarm may rest on that observation, yet that
    trigger never asks the compared trace to match it, which produces
    spurious violations.  Anchoring the trigger at the boundary states,
    the last normal states from which a fault is enabled next, requires
    agreement on every observation preceding the fault and matches the
    alarm-based reading exactly.  On runs where the faulted step carries
    no fresh observation the two triggers coincide.
    """
    if kind != "predictability":
        return property_formula(kind, target, part)
    obseq = expand_macros(ObsEq("p1", "p2"), target)
    at_boundary = _disj(target.sort_states(boundary_states(target, part)), "p1")
    fault2 = _disj(target.sort_states(part.fault_states), "p2")
    body = Implies(Until(obseq, And(at_boundary, obseq)), Eventually(fault2))
    return HyperFormula((("forall", "p1"), ("forall", "p2")), body), "plain"


def _estimate_graph(k):
    """Subset walk of the structure: every reachable observation-consistent
    node set, with its one-observation transitions.

    Returns (root, order, succ) where order is the breadth-first discovery
    order and succ maps each set to its (observation, successor set) list.
    """
    symbols = sorted({q.obs for q in k.nodes if q.obs is not None})
    root = frozenset(k.initial)
    succ = {}
    order = []
    queue = deque([root])
    while queue:
        d = queue.popleft()
        if d in succ:
            continue
        order.append(d)
        succ[d] = []
        for o in symbols:
            t = frozenset(x for q in d for x in k.succ[q] if x.obs == o)
            if t:
                succ[d].append((o, t))
                queue.append(t)
    return root, order, succ


def _reaches(succ, sources, goal):
    seen = set(sources)
    queue = deque(seen)
    while queue:
        d = queue.popleft()
        if d == goal:
            return True
        for _, t in succ[d]:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return False


def _obs_path(succ, source, goal, allow_empty=True):
    """Shortest observation word moving the subset walk from source to goal;
    with allow_empty=False the word is nonempty even when they coincide."""
    if allow_empty and source == goal:
        return []
    parent = {}
    queue = deque()
    for o, t in succ[source]:
        if t not in parent:
            parent[t] = (None, o)
            queue.append(t)
    while queue:
        d = queue.popleft()
        if d == goal:
            word = []
            cur = d
            while True:
                prev, o = parent[cur]
                word.append(o)
                if prev is None:
                    break
                cur = prev
            word.reverse()
            return word
        for o, t in succ[d]:
            if t not in parent:
                parent[t] = (d, o)
                queue.append(t)
    return None


def _lasso_along(k, stem_obs, cycle_obs):
    """Some run of the structure whose observation sequence follows stem_obs
    and then repeats cycle_obs forever, or None if no run can.

    Searches the product of the structure with the positions of the
    observation word for a reachable cycle.
    """
    word = list(stem_obs) + list(cycle_obs)
    wrap = len(stem_obs)

    def succs(state):
        q, pos = state
        o = word[pos]
        npos = pos + 1 if pos + 1 < len(word) else wrap
        return [(t, npos) for t in k.succ[q] if t.obs == o]

    for q0 in k.initial:
        root = (q0, 0)
        stack = [(root, iter(succs(root)))]
        on_path = {root: 0}
        dead = set()
        while stack:
            state, it = stack[-1]
            step = next(it, None)
            if step is None:
                stack.pop()
                del on_path[state]
                dead.add(state)
                continue
            if step in on_path:
                i = on_path[step]
                nodes = [frame[0][0] for frame in stack]
                return canonical_lasso(
                    Lasso(stem=tuple(nodes[:i]), cycle=tuple(nodes[i:])))
            if step not in dead:
                on_path[step] = len(stack)
                stack.append((step, iter(succs(step))))
    return None


def _strong_detectability_gap(k):
    """Persistent ambiguity that no pair of infinite traces exhibits.

    The pair search certifies that every two observation-matched infinite
    runs eventually agree on the state.  The current-state estimate can
    still stay ambiguous at arbitrarily late instants: states kept alive by
    matching runs that die out after finitely many steps block detection
    without ever lying on an infinite matched companion.  This check
    inspects the estimates themselves: the property fails exactly when an
    estimate holding two or more states lies on or after a cycle of the
    subset walk.

    Returns a violation verdict, or None when the estimates confirm the
    pair verdict.  When an ambiguous estimate lies on a cycle, a single run
    keeps the uncertainty alive forever and is reported as the first
    witness trace with no companion.  Otherwise the ambiguity lives on
    finite observation records only; the verdict then carries a pumpable
    observation word (prefix, cycle, suffix) instead of a trace witness.
    """
    root, order, succ = _estimate_graph(k)
    on_cycle = {d for d in order
                if _reaches(succ, [t for _, t in succ[d]], d)}
    reach = set(on_cycle)
    queue = deque(on_cycle)
    while queue:
        d = queue.popleft()
        for _, t in succ[d]:
            if t not in reach:
                reach.add(t)
                queue.append(t)

    def ambiguous(d):
        return len({q.state for q in d}) >= 2

    target = next((d for d in order if d in on_cycle and ambiguous(d)), None)
    if target is not None:
        stem_obs = _obs_path(succ, root, target)
        cycle_obs = _obs_path(succ, target, target, allow_empty=False)
        pi1 = _lasso_along(k, stem_obs, cycle_obs)
        return Verdict(
            property=None, holds=False, mode="exact",
            engine="hyper-estimate-graph",
            witness=None if pi1 is None else (pi1, None),
            details={"ambiguous_states": sorted({q.state for q in target}),
                     "pump_prefix": stem_obs, "pump_cycle": cycle_obs,
                     "pump_suffix": []})
    target = next((d for d in order if d in reach and ambiguous(d)), None)
    if target is None:
        return None
    via = next(d for d in order
               if d in on_cycle and _reaches(succ, [d], target))
    stem_obs = _obs_path(succ, root, via)
    cycle_obs = _obs_path(succ, via, via, allow_empty=False)
    tail_obs = _obs_path(succ, via, target)
    return Verdict(
        property=None, holds=False, mode="exact",
        engine="hyper-estimate-graph", witness=None,
        details={"ambiguous_states": sorted({q.state for q in target}),
                 "pump_prefix": stem_obs, "pump_cycle": cycle_obs,
                 "pump_suffix": tail_obs})


def verify(fsa, kind, engine="hyper", bound=None, wd_route="observer") -> Verdict:
    """Decide one property of an automaton.

    engine: "hyper" (Kripke encodings) or "oracle" (definition unfoldings).
    wd_route: "observer" for the exact route, "bounded" for candidate search.

    Two properties take a route beyond the formula property_formula builds:
    predictability is decided with a boundary-anchored trigger
    (see _decision_formula) and a strong-detectability pass of the pair
    search is confirmed against the subset walk (see
    _strong_detectability_gap); both close blind spots of the two-trace
    formulations around matching runs that die out after finitely many
    steps.
    """
    started = time.perf_counter()
    if not fsa.validated:
        validate_fsa(fsa)
    if bound is None and os.environ.get(DEFAULT_BOUND_ENV):
        bound = int(os.environ[DEFAULT_BOUND_ENV])

    if engine == "oracle":
        from .oracle import OracleConfig, oracle_check
        config = OracleConfig() if bound is None else \
            OracleConfig(max_obs_len=bound, max_delay=bound)
        verdict = oracle_check(fsa, kind, config)
        verdict.seconds = time.perf_counter() - started
        return verdict

    part = None
    target = fsa
    if kind in ("diagnosability", "predictability"):
        if fsa.fault_events is None:
            raise MissingAnnotation("fault")
        target, part = refine_fault_partition(fsa)
    formula, structure_kind = _decision_formula(kind, target, part)
    k = _structures(target, structure_kind)

    quants = formula.quantifiers()
    if quants == ("forall", "forall"):
        verdict = check_forall_forall(k, formula)
        if kind == "strong-detectability" and verdict.holds is True:
            gap = _strong_detectability_gap(k)
            if gap is not None:
                verdict = gap
    elif quants == ("forall", "exists"):
        verdict = check_forall_exists_sync(k, formula)
    elif wd_route == "bounded":
        verdict = check_exists_forall_bounded(k, formula, bound=bound)
    else:
        from .oracle import weak_detectability_exact
        verdict = weak_detectability_exact(target)
    verdict.property = kind
    verdict.seconds = time.perf_counter() - started
    return verdict


def _require_run(k, lasso):
    nodes = list(lasso.stem) + list(lasso.cycle)
    if not nodes:
        raise NotARun("empty witness trace")
    for q in nodes:
        if q not in k.index:
            raise NotARun(f"{q!r} is not a node of the structure")
    if nodes[0] not in k.initial:
        raise NotARun(f"witness starts at non-initial node {nodes[0]!r}")
    for a, b in zip(nodes, nodes[1:]):
        if b not in k.succ[a]:
            raise NotARun(f"no edge from {a!r} to {b!r}")
    if lasso.cycle[0] not in k.succ[nodes[-1]]:
        raise NotARun("witness cycle does not close")


def _lasso_labels(k, lasso):
    return (tuple(k.label[q] for q in lasso.stem),
            tuple(k.label[q] for q in lasso.cycle))


def _replay_pump(k, details):
    """Check a pumpable ambiguous observation word against the structure.

    The word is prefix + cycle + suffix; the subset walk must return to the
    same set around the cycle part and end in the claimed ambiguous set.
    That certifies ambiguity at arbitrarily late instants: the cycle part
    can be repeated any number of times without changing the outcome.
    """
    if not details or "pump_cycle" not in details:
        raise NotARun("violation verdict carries neither a trace witness nor a pumpable word")
    if not details["pump_cycle"]:
        return False

    def advance(d, word):
        for o in word:
            d = frozenset(t for q in d for t in k.succ[q] if t.obs == o)
        return d

    before = advance(frozenset(k.initial), details["pump_prefix"])
    after = advance(before, details["pump_cycle"])
    if before != after:
        return False
    final = advance(after, details["pump_suffix"])
    return (len(details["ambiguous_states"]) >= 2
            and sorted({q.state for q in final}) == list(details["ambiguous_states"]))


def replay_witness(fsa, kind, verdict: Verdict) -> bool:
    """Re-validate a verdict's witness against the definitions of the
    structures, independently of the search that produced it."""
    if not fsa.validated:
        validate_fsa(fsa)
    part = None
    target = fsa
    if kind in ("diagnosability", "predictability"):
        target, part = refine_fault_partition(fsa)
    formula, structure_kind = _decision_formula(kind, target, part)
    k = _structures(target, structure_kind)
    quants = formula.quantifiers()

    if verdict.holds is False and quants == ("forall", "forall"):
        if verdict.witness is None:
            return _replay_pump(k, verdict.details)
        pi1, pi2 = verdict.witness
        if pi2 is None:
            body = expand_macros(formula.body, k)
            if body != _collapse_body(k, formula):
                raise NotARun("single-trace violation witness outside the collapse shape")
            _require_run(k, pi1)
            return not _estimate_walk_accepts(k, pi1)
        _require_run(k, pi1)
        _require_run(k, pi2)
        (_, v1), (_, v2) = formula.prefix
        assign = {v1: _lasso_labels(k, pi1), v2: _lasso_labels(k, pi2)}
        body = expand_macros(formula.body, k)
        return eval_body(body, assign) is False
    if verdict.holds is False and quants == ("forall", "exists"):
        pi1, pi2 = verdict.witness
        if pi2 is not None:
            raise NotARun("a forall/exists violation has no witness for the second trace")
        _require_run(k, pi1)
        return forall_exists_refutes(k, formula, pi1)
    if verdict.holds is True and quants == ("exists", "forall"):
        pi1, _ = verdict.witness
        _require_run(k, pi1)
        body = expand_macros(formula.body, k)
        if body == _collapse_body(k, formula):
            return _estimate_walk_accepts(k, pi1)
        return _inner_universal_holds(k, pi1, formula, ltl_to_buchi(Not(body)))
    raise NotARun(f"no witness replay defined for holds={verdict.holds!r} with prefix {quants}")
