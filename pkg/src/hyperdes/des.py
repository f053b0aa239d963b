"""Finite automata under partial observation: model, validation, state estimation.

The model is a finite-state automaton G = (X, Sigma, delta, X0) with a partial
deterministic transition function and an observation mask M mapping each event
to an observation symbol or to nothing (unobservable).  All estimation
operators work directly on the definitions: the initial-state estimate is the
set of initial states admitting a run with the observed string, the
current-state estimate is the set of states reachable under it, and the
delayed estimate refines a past instant using subsequent observations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    DanglingReference,
    NoFaultEvents,
    NotLive,
    ReservedSymbol,
    UnknownObservation,
    UnobservableCycle,
)

EPS = None  # internal marker for "unobservable" in masks and node observations


class Fsa:
    """Partially observed automaton with optional fault/secret annotations.

    States, events and observation symbols keep their declaration order; every
    operation below iterates in that order so outputs are reproducible.
    `fault_events` and `secret_states` distinguish "not declared" (None) from
    "declared empty" (empty set).
    """

    def __init__(self, states, events, transitions, initial, mask,
                 fault_events=None, secret_states=None, observations=None,
                 name=None):
        self.states = tuple(states)
        self.events = tuple(events)
        self.name = name
        if len(set(self.states)) != len(self.states):
            raise DanglingReference("duplicate state declarations")
        if len(set(self.events)) != len(self.events):
            raise DanglingReference("duplicate event declarations")
        self.state_index = {x: i for i, x in enumerate(self.states)}
        self.event_index = {e: i for i, e in enumerate(self.events)}

        self.transitions = dict(transitions)
        for (x, e), y in self.transitions.items():
            if x not in self.state_index or y not in self.state_index:
                raise DanglingReference(f"transition ({x!r},{e!r},{y!r}) references an undeclared state")
            if e not in self.event_index:
                raise DanglingReference(f"transition ({x!r},{e!r},{y!r}) references an undeclared event")

        self.initial = frozenset(initial)
        if not self.initial <= set(self.states):
            raise DanglingReference("initial states must be declared states")

        self.mask = {}
        for e in self.events:
            if e not in mask:
                raise DanglingReference(f"mask is not total: missing event {e!r}")
            self.mask[e] = mask[e]
        for e in mask:
            if e not in self.event_index:
                raise DanglingReference(f"mask references undeclared event {e!r}")
        if any(o == "eps" for o in self.mask.values()):
            raise ReservedSymbol("'eps' denotes the unobservable outcome and cannot name an observation")

        # observation alphabet: declared order if given, else first appearance
        used = []
        for e in self.events:
            o = self.mask[e]
            if o is not EPS and o not in used:
                used.append(o)
        if observations is None:
            self.observations = tuple(used)
        else:
            declared = tuple(observations)
            if len(set(declared)) != len(declared):
                raise DanglingReference("duplicate observation declarations")
            if "eps" in declared:
                raise ReservedSymbol("'eps' denotes the unobservable outcome and cannot name an observation")
            missing = [o for o in used if o not in declared]
            if missing:
                raise DanglingReference(f"mask uses undeclared observation {missing[0]!r}")
            self.observations = declared
        self.obs_index = {o: i for i, o in enumerate(self.observations)}

        self.fault_events = None if fault_events is None else frozenset(fault_events)
        if self.fault_events is not None and not self.fault_events <= set(self.events):
            raise DanglingReference("fault events must be declared events")
        self.secret_states = None if secret_states is None else frozenset(secret_states)
        if self.secret_states is not None and not self.secret_states <= set(self.states):
            raise DanglingReference("secret states must be declared states")

        # outgoing adjacency in declaration order, filled once
        self._out = {x: [] for x in self.states}
        for x in self.states:
            for e in self.events:
                y = self.transitions.get((x, e))
                if y is not None:
                    self._out[x].append((e, y))

        self.validated = False
        self.reachable = None

    def out_edges(self, state):
        """Outgoing (event, target) pairs from a state, in event order."""
        return self._out[state]

    def observable(self, event):
        return self.mask[event] is not EPS

    def sort_states(self, states):
        """States in declaration order (stable total order)."""
        return sorted(states, key=self.state_index.__getitem__)

    def __repr__(self):
        return f"Fsa({self.name or 'unnamed'}: {len(self.states)} states, {len(self.events)} events)"


@dataclass(frozen=True)
class FaultPartition:
    """Split of the state space into normal and fault states."""
    normal_states: frozenset
    fault_states: frozenset


@dataclass(frozen=True)
class Observer:
    """Subset automaton whose nodes are current-state estimates."""
    nodes: tuple            # estimate frozensets in discovery order
    initial: frozenset
    edges: dict             # (estimate, observation) -> estimate


def validate_fsa(fsa: Fsa) -> Fsa:
    """Check liveness and absence of unobservable cycles; cache reachability.

    Returns the same object marked validated.  Raises NotLive for the first
    state (in declaration order) without outgoing transitions and
    UnobservableCycle with one witness cycle if unobservable events loop.
    """
    for x in fsa.states:
        if not fsa.out_edges(x):
            raise NotLive(x)

    # cycle search restricted to unobservable edges, iterative DFS with colors
    color = {x: 0 for x in fsa.states}  # 0 unseen, 1 on stack, 2 done
    parent = {}
    for root in fsa.states:
        if color[root]:
            continue
        stack = [(root, iter(_uo_targets(fsa, root)))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for succ in it:
                if color[succ] == 1:
                    cycle = [succ]
                    cur = node
                    while cur != succ:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.append(succ)
                    cycle.reverse()
                    raise UnobservableCycle(cycle)
                if color[succ] == 0:
                    color[succ] = 1
                    parent[succ] = node
                    stack.append((succ, iter(_uo_targets(fsa, succ))))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()

    seen = set(fsa.sort_states(fsa.initial))
    frontier = list(fsa.sort_states(fsa.initial))
    while frontier:
        x = frontier.pop(0)
        for _, y in fsa.out_edges(x):
            if y not in seen:
                seen.add(y)
                frontier.append(y)
    fsa.reachable = frozenset(seen)
    fsa.validated = True
    return fsa


def _uo_targets(fsa, state):
    return [y for e, y in fsa.out_edges(state) if not fsa.observable(e)]


def unobservable_reach(fsa: Fsa, states) -> frozenset:
    """All states reachable from `states` via unobservable events only."""
    seen = set(states)
    frontier = fsa.sort_states(states)
    while frontier:
        x = frontier.pop(0)
        for y in _uo_targets(fsa, x):
            if y not in seen:
                seen.add(y)
                frontier.append(y)
    return frozenset(seen)


def observable_step(fsa: Fsa, states, o) -> frozenset:
    """States reachable from `states` by a string observed exactly as `o`.

    Composition of unobservable closure, one event with mask o, and another
    unobservable closure.
    """
    if o not in fsa.obs_index:
        raise UnknownObservation(o)
    inner = unobservable_reach(fsa, states)
    hits = set()
    for x in fsa.sort_states(inner):
        for e, y in fsa.out_edges(x):
            if fsa.mask[e] == o:
                hits.add(y)
    return unobservable_reach(fsa, hits)


def current_state_estimate(fsa: Fsa, alpha) -> frozenset:
    """States the system can be in after observing the sequence `alpha`."""
    est = unobservable_reach(fsa, fsa.initial)
    for o in alpha:
        est = observable_step(fsa, est, o)
    return est


def initial_state_estimate(fsa: Fsa, alpha) -> frozenset:
    """Initial states that admit a run observed exactly as `alpha`.

    Tracks (initial state, current state) pairs forward instead of
    enumerating strings.
    """
    tracks = {x0: unobservable_reach(fsa, [x0]) for x0 in fsa.sort_states(fsa.initial)}
    for o in alpha:
        tracks = {x0: observable_step(fsa, cur, o) for x0, cur in tracks.items()}
    return frozenset(x0 for x0, cur in tracks.items() if cur)


def delayed_state_estimate(fsa: Fsa, alpha, beta) -> frozenset:
    """States the system could have been in right after `alpha`, refined by
    the further observations `beta`.

    Tracks (state at the split instant, current state) pairs; with an empty
    `beta` this degenerates to the current-state estimate.
    """
    pairs = {(x, x) for x in current_state_estimate(fsa, alpha)}
    for o in beta:
        pairs = step_delayed_pairs(fsa, pairs, o)
    return frozenset(a for a, _ in pairs)


def step_delayed_pairs(fsa: Fsa, pairs, o):
    """Advance the current component of (anchor, current) pairs by one observation."""
    out = set()
    by_cur = {}
    for a, c in pairs:
        by_cur.setdefault(c, set()).add(a)
    for c in fsa.sort_states(by_cur):
        for y in observable_step(fsa, [c], o):
            for a in by_cur[c]:
                out.add((a, y))
    return frozenset(out)


def build_observer(fsa: Fsa) -> Observer:
    """Reachable subset automaton under the current-estimate recursion."""
    init = unobservable_reach(fsa, fsa.initial)
    nodes = [init]
    seen = {init}
    edges = {}
    queue = [init]
    while queue:
        est = queue.pop(0)
        for o in fsa.observations:
            nxt = observable_step(fsa, est, o)
            if not nxt:
                continue
            edges[(est, o)] = nxt
            if nxt not in seen:
                seen.add(nxt)
                nodes.append(nxt)
                queue.append(nxt)
    return Observer(nodes=tuple(nodes), initial=init, edges=edges)


def refine_fault_partition(fsa: Fsa):
    """Ensure fault states are an invariant of "a fault has occurred".

    Pairs each state with a has-fault-occurred bit and keeps reachable pairs.
    If no reachable state needs both bit values the input is returned
    unchanged together with the induced partition (unreachable states count
    as normal); otherwise a split automaton is returned whose fault copies
    are named "<state>#F".
    """
    if not fsa.fault_events:
        raise NoFaultEvents("no fault events declared")
    faults = fsa.fault_events

    seen = {}
    queue = []
    for x0 in fsa.sort_states(fsa.initial):
        if (x0, False) not in seen:
            seen[(x0, False)] = len(seen)
            queue.append((x0, False))
    while queue:
        x, bit = queue.pop(0)
        for e, y in fsa.out_edges(x):
            pair = (y, bit or e in faults)
            if pair not in seen:
                seen[pair] = len(seen)
                queue.append(pair)

    bits = {}
    for x, bit in seen:
        bits.setdefault(x, set()).add(bit)
    needs_split = any(len(b) > 1 for b in bits.values())

    if not needs_split:
        fault_states = frozenset(x for x, b in bits.items() if b == {True})
        normal_states = frozenset(fsa.states) - fault_states
        return fsa, FaultPartition(normal_states=normal_states, fault_states=fault_states)

    taken = set(fsa.states)

    def pair_name(x, bit):
        if len(bits.get(x, ())) == 1 or not bit:
            return x
        cand = f"{x}#F"
        n = 2
        while cand in taken:
            cand = f"{x}#F{n}"
            n += 1
        taken.add(cand)
        return cand

    order = sorted(seen, key=seen.__getitem__)
    names = {pair: pair_name(*pair) for pair in order}
    states = [names[p] for p in order]
    transitions = {}
    for x, bit in order:
        for e, y in fsa.out_edges(x):
            target = (y, bit or e in faults)
            transitions[(names[(x, bit)], e)] = names[target]
    initial = [names[(x0, False)] for x0 in fsa.sort_states(fsa.initial)]
    secret = None
    if fsa.secret_states is not None:
        secret = [names[(x, b)] for (x, b) in order if x in fsa.secret_states]
    refined = Fsa(states=states, events=fsa.events, transitions=transitions,
                  initial=initial, mask=fsa.mask, fault_events=fsa.fault_events,
                  secret_states=secret, name=fsa.name)
    validate_fsa(refined)
    fault_states = frozenset(names[(x, b)] for (x, b) in order if b)
    part = FaultPartition(normal_states=frozenset(states) - fault_states,
                          fault_states=fault_states)
    return refined, part


def boundary_states(fsa: Fsa, part: FaultPartition) -> frozenset:
    """Normal states from which a fault event can occur in the next step."""
    out = set()
    for x in part.normal_states:
        for e, _ in fsa.out_edges(x):
            if e in (fsa.fault_events or ()):
                out.add(x)
                break
    return frozenset(out)


def indicator_states(fsa: Fsa, part: FaultPartition) -> frozenset:
    """Normal states from which every long enough string ends in a fault state.

    A normal state escapes the indicator set exactly when it can reach a cycle
    from which a normal state is still reachable (such a cycle pumps
    arbitrarily long strings ending in normal states).
    """
    succ = {x: sorted({y for _, y in fsa.out_edges(x)}, key=fsa.state_index.__getitem__)
            for x in fsa.states}
    on_cycle = _cyclic_states(fsa.states, succ)

    pred = {x: [] for x in fsa.states}
    for x in fsa.states:
        for y in succ[x]:
            pred[y].append(x)
    reaches_normal = set(part.normal_states)
    queue = fsa.sort_states(part.normal_states)
    while queue:
        y = queue.pop(0)
        for x in pred[y]:
            if x not in reaches_normal:
                reaches_normal.add(x)
                queue.append(x)

    pumping = on_cycle & reaches_normal
    escaping = set(pumping)
    queue = fsa.sort_states(pumping)
    while queue:
        y = queue.pop(0)
        for x in pred[y]:
            if x not in escaping:
                escaping.add(x)
                queue.append(x)
    return frozenset(part.normal_states - escaping)


def _cyclic_states(nodes, succ):
    """States lying on some cycle (members of an SCC with an internal edge)."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = set()
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
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
                if len(comp) > 1 or any(m in succ[m] for m in comp):
                    out.update(comp)
    return out


def first_fault_strings(fsa: Fsa, part: FaultPartition, max_len: int):
    """Strings of length <= max_len whose last event is the first fault.

    Returned in lexicographic order of event indices, deduplicated across
    initial states.
    """
    faults = fsa.fault_events or frozenset()
    found = set()

    def walk(state, prefix):
        for e, y in fsa.out_edges(state):
            if e in faults:
                found.add(prefix + (e,))
            elif len(prefix) + 1 < max_len:
                walk(y, prefix + (e,))

    if max_len >= 1:
        for x0 in fsa.sort_states(fsa.initial):
            walk(x0, ())
    return sorted(found, key=lambda s: tuple(fsa.event_index[e] for e in s))
