"""Random generation of valid automata for fuzzing and property tests.

Generation is driven entirely by a caller-supplied random.Random instance, so
a fixed seed reproduces the exact same sequence of machines.  Invalid draws
(dead states are repaired, unobservable cycles are rejected) are retried.
"""

from __future__ import annotations

import string

from .des import Fsa, validate_fsa
from .errors import UnobservableCycle


def random_valid_fsa(rng, max_states=5, max_events=4, max_obs=3,
                     with_faults=True, with_secrets=True, max_attempts=500):
    """Draw a live automaton without unobservable cycles.

    States are named "0", "1", ...; events "a", "b", ...; observations
    "o1", "o2", ....  At least one event is observable, fault events and
    secret states are nonempty when requested.
    """
    for _ in range(max_attempts):
        fsa = _draw(rng, max_states, max_events, max_obs, with_faults, with_secrets)
        try:
            return validate_fsa(fsa)
        except UnobservableCycle:
            continue
    raise RuntimeError("could not draw a valid automaton; loosen the size limits")


def _draw(rng, max_states, max_events, max_obs, with_faults, with_secrets):
    n = rng.randint(2, max_states)
    m = rng.randint(1, max_events)
    k = rng.randint(1, max_obs)
    states = [str(i) for i in range(n)]
    events = list(string.ascii_lowercase[:m])
    obs = [f"o{i + 1}" for i in range(k)]

    mask = {}
    for e in events:
        if rng.random() < 2.0 / 3.0:
            mask[e] = rng.choice(obs)
        else:
            mask[e] = None
    if all(o is None for o in mask.values()):
        mask[rng.choice(events)] = rng.choice(obs)

    transitions = {}
    for _ in range(max(n, int(1.5 * n))):
        x = rng.choice(states)
        e = rng.choice(events)
        if (x, e) not in transitions:
            transitions[(x, e)] = rng.choice(states)
    for x in states:
        if not any((x, e) in transitions for e in events):
            transitions[(x, rng.choice(events))] = rng.choice(states)

    initial = sorted(rng.sample(states, rng.randint(1, min(2, n))), key=int)

    fault_events = None
    if with_faults:
        fault_events = sorted(rng.sample(events, rng.randint(1, min(2, m))))

    secret_states = None
    if with_secrets:
        secret_states = sorted(rng.sample(states, rng.randint(1, max(1, n - 1))), key=int)

    return Fsa(states=states, events=events, transitions=transitions,
               initial=initial, mask=mask, fault_events=fault_events,
               secret_states=secret_states, observations=obs)
