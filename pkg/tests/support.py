"""Seeded samplers and helpers shared between test modules.

Everything here is driven by an explicit random.Random so the acceptance
suite can enumerate a fixed, reproducible stream of cases without hypothesis.
"""

import math

from hyperdes.formula import (
    And,
    Atom,
    Bottom,
    Eventually,
    Always,
    Iff,
    Implies,
    Next,
    Not,
    Once,
    Or,
    Top,
    Until,
)

PROPS = ("a", "x:0", "x:1", "o:o1", "o:o2", "tau")
TRACES = ("p1", "p2")

_UNARY = (Not, Next, Eventually, Always, Once)
_BINARY = (And, Or, Implies, Iff, Until)


def random_body(rng, depth=3):
    """Random automaton-translatable body over two traces.

    The observation/state agreement helpers are left out on purpose; they
    expand over a concrete alphabet and are exercised by the template tests.
    """
    if depth == 0 or rng.random() < 0.3:
        roll = rng.random()
        if roll < 0.80:
            return Atom(rng.choice(PROPS), rng.choice(TRACES))
        if roll < 0.90:
            return Top()
        return Bottom()
    if rng.random() < 0.5:
        return rng.choice(_UNARY)(random_body(rng, depth - 1))
    op = rng.choice(_BINARY)
    return op(random_body(rng, depth - 1), random_body(rng, depth - 1))


def random_lasso_labels(rng, max_stem=3, max_cycle=3):
    stem = tuple(frozenset(rng.sample(PROPS, rng.randint(0, 3)))
                 for _ in range(rng.randint(0, max_stem)))
    cycle = tuple(frozenset(rng.sample(PROPS, rng.randint(0, 3)))
                  for _ in range(rng.randint(1, max_cycle)))
    return stem, cycle


def assignment_letters(assignment):
    """Flatten a per-trace label assignment into one tagged-letter lasso.

    Returns (stem_letters, cycle_letters) where each letter is the set of
    trace-anchored atoms true at that instant.
    """
    stems = {v: sc[0] for v, sc in assignment.items()}
    cycles = {v: sc[1] for v, sc in assignment.items()}
    stem_len = max((len(s) for s in stems.values()), default=0)
    period = math.lcm(*(len(c) for c in cycles.values())) if cycles else 1

    def label(v, i):
        s = stems[v]
        if i < len(s):
            return s[i]
        c = cycles[v]
        return c[(i - len(s)) % len(c)]

    def letter(i):
        return frozenset(Atom(p, v) for v in assignment for p in label(v, i))

    stem_letters = [letter(i) for i in range(stem_len)]
    cycle_letters = [letter(stem_len + j) for j in range(period)]
    return stem_letters, cycle_letters
