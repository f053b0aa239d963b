"""Tests for the hyperproperty checking engines."""

import pytest

from hyperdes.buchi import ltl_to_buchi
from hyperdes.des import Fsa, refine_fault_partition, validate_fsa
from hyperdes.errors import (
    MissingAnnotation,
    NotARun,
    NotSynchronousFragment,
    PrefixMismatch,
)
from hyperdes.formula import (
    Always,
    Atom,
    HyperFormula,
    Not,
    eval_body,
    expand_macros,
    property_formula,
)
from hyperdes.hyper import (
    Verdict,
    check_exists_forall_bounded,
    check_forall_exists_sync,
    check_forall_forall,
    forall_exists_refutes,
    match_sync_shape,
    replay_witness,
    verify,
    _estimate_walk_accepts,
    _inner_universal_holds,
    _nested_dfs,
)
from hyperdes.kripke import (
    KNode,
    Lasso,
    build_kripke,
    build_modified_kripke,
    canonical_lasso,
)


def node(state, obs=None, copy=False):
    return KNode(state, obs, copy)


def lasso(stem, cycle):
    return Lasso(stem=tuple(stem), cycle=tuple(cycle))


# ---------------------------------------------------------------------------
# canonical lasso form


def test_canonical_lasso_absorbs_preplayed_cycle():
    """Stem entries that just repeat the cycle are folded into it."""
    raw = lasso([node("0"), node("1", "o1"), node("2", "o2"), node("2", "o2")],
                [node("2", "o2")])
    assert canonical_lasso(raw) == lasso([node("0"), node("1", "o1")],
                                         [node("2", "o2")])


def test_canonical_lasso_cuts_cycle_to_primitive_period():
    """A doubled cycle is reduced to its smallest period."""
    raw = lasso([node("0")], [node("1", "o1"), node("2", "o2"),
                              node("1", "o1"), node("2", "o2")])
    assert canonical_lasso(raw) == lasso([node("0")],
                                         [node("1", "o1"), node("2", "o2")])


def test_canonical_lasso_rotation_lands_on_same_form():
    """Two spellings of one ultimately periodic path agree after
    canonicalization."""
    a = lasso([node("0"), node("1", "o1")], [node("2", "o2"), node("3", "o3")])
    b = lasso([node("0"), node("1", "o1"), node("2", "o2")],
              [node("3", "o3"), node("2", "o2")])
    assert canonical_lasso(a) == canonical_lasso(b)


# ---------------------------------------------------------------------------
# nested DFS


def test_nested_dfs_finds_reachable_accepting_cycle():
    """A graph with one accepting loop yields that loop as the witness."""
    succ = {"a": ["b"], "b": ["c"], "c": ["c"]}
    hit = _nested_dfs(["a"], lambda s: succ[s], lambda s: s == "c")
    assert hit == (("a", "b"), ("c",))


def test_nested_dfs_ignores_non_accepting_cycles():
    """Cycles that never touch an accepting state are not reported."""
    succ = {"a": ["a", "b"], "b": ["a"]}
    assert _nested_dfs(["a"], lambda s: succ[s], lambda s: False) is None


def test_nested_dfs_accepting_state_without_cycle():
    """Reaching an accepting dead end is not an accepting cycle."""
    succ = {"a": ["b"], "b": []}
    assert _nested_dfs(["a"], lambda s: succ[s], lambda s: s == "b") is None


# ---------------------------------------------------------------------------
# forall/forall fixture verdicts


def test_diagnosability_fixture_holds(g_diag):
    """The fault in the fixture is always identified after two observations."""
    verdict = verify(g_diag, "diagnosability")
    assert verdict.holds is True
    assert verdict.mode == "exact"
    assert verdict.engine == "hyper-forall-forall"
    assert verdict.witness is None
    assert verdict.property == "diagnosability"


def test_predictability_fixture_violated_with_pinned_witness(g_diag):
    """The boundary state is reachable while the estimate still allows the
    fault-free branch; the reported traces are the canonical pair."""
    verdict = verify(g_diag, "predictability")
    assert verdict.holds is False
    pi1, pi2 = verdict.witness
    assert pi1 == lasso([node("0"), node("1", "o1")], [node("2", "o2")])
    assert pi2 == lasso([node("3"), node("4", "o1")], [node("5", "o3")])


def test_i_detectability_fixture_holds(g_det):
    verdict = verify(g_det, "i-detectability")
    assert verdict.holds is True
    assert verdict.mode == "exact"


def test_strong_detectability_fixture_holds(g_det):
    verdict = verify(g_det, "strong-detectability")
    assert verdict.holds is True
    assert verdict.mode == "exact"


def test_delayed_detectability_fixture_violated_with_pinned_witness(g_det):
    """Hindsight never separates states 1 and 4 under the o1 o2 o3... trace."""
    verdict = verify(g_det, "delayed-detectability")
    assert verdict.holds is False
    pi1, pi2 = verdict.witness
    assert pi1 == lasso([node("0"), node("1", "o1"), node("2", "o2")],
                        [node("2", "o3")])
    assert pi2 == lasso([node("0"), node("4", "o1"), node("2", "o2")],
                        [node("2", "o3")])


def test_forall_forall_witness_violates_body(g_det):
    """The reported pair really falsifies the formula body pointwise."""
    verdict = verify(g_det, "delayed-detectability")
    formula, _ = property_formula("delayed-detectability", g_det)
    k = build_kripke(g_det)
    (_, v1), (_, v2) = formula.prefix
    pi1, pi2 = verdict.witness
    assign = {
        v1: (tuple(k.label[q] for q in pi1.stem), tuple(k.label[q] for q in pi1.cycle)),
        v2: (tuple(k.label[q] for q in pi2.stem), tuple(k.label[q] for q in pi2.cycle)),
    }
    assert eval_body(expand_macros(formula.body, k), assign) is False


# ---------------------------------------------------------------------------
# forall/exists fixture verdicts


def test_initial_state_opacity_fixture_holds(g_opa):
    verdict = verify(g_opa, "initial-state-opacity")
    assert verdict.holds is True
    assert verdict.engine == "hyper-forall-exists"


def test_current_state_opacity_fixture_holds(g_opa):
    verdict = verify(g_opa, "current-state-opacity")
    assert verdict.holds is True


def test_infinite_step_opacity_fixture_violated_with_pinned_witness(g_opa):
    """Observing o1 o4 reveals in hindsight that the system paused in the
    secret state 4; the witness pauses there via the stalling twin."""
    verdict = verify(g_opa, "infinite-step-opacity")
    assert verdict.holds is False
    pi1, pi2 = verdict.witness
    assert pi2 is None
    assert pi1 == lasso(
        [node("3"), node("4", "o1"), node("4", "o1", copy=True),
         node("4", "o1"), node("5", "o4")],
        [node("5", "o3")])


def test_sync_shape_of_instant0_formula(g_opa):
    """The initial-state formula matches the instant-0 shape with the right
    requirement and obligation sets."""
    formula, kind = property_formula("initial-state-opacity", g_opa)
    assert kind == "plain"
    k = build_kripke(g_opa)
    shape = match_sync_shape(k, formula)
    assert shape.anchor == "instant0"
    assert shape.eq_scope == "always"
    assert frozenset(["0", "3"]) in shape.p1_sets
    assert frozenset(["0", "4"]) in shape.p1_sets
    assert frozenset(["1", "2", "3", "5"]) in shape.p2_sets


def test_sync_shape_of_pause_formulas(g_opa):
    """Both hindsight formulas match the pause-anchored shape, differing only
    in how long observation agreement is required."""
    k = build_modified_kripke(build_kripke(g_opa))
    f_cso, kind_cso = property_formula("current-state-opacity", g_opa)
    f_ifo, kind_ifo = property_formula("infinite-step-opacity", g_opa)
    assert kind_cso == kind_ifo == "modified"
    s_cso = match_sync_shape(k, f_cso)
    s_ifo = match_sync_shape(k, f_ifo)
    assert s_cso.anchor == s_ifo.anchor == "tau_once"
    assert s_cso.eq_scope == "until_anchor"
    assert s_ifo.eq_scope == "always"
    assert s_cso.p1_sets == (frozenset(["0", "4"]),)
    assert s_cso.p2_sets == (frozenset(["1", "2", "3", "5"]),)


def test_sync_engine_rejects_pause_formula_on_plain_structure(g_opa):
    """Pause-anchored formulas need the twin-extended structure."""
    formula, _ = property_formula("current-state-opacity", g_opa)
    k = build_kripke(g_opa)
    with pytest.raises(NotSynchronousFragment):
        check_forall_exists_sync(k, formula)


def test_sync_engine_rejects_foreign_body(g_opa):
    """A forall/exists body outside the fragment is refused with a reason."""
    k = build_kripke(g_opa)
    formula = HyperFormula(
        prefix=(("forall", "p1"), ("exists", "p2")),
        body=Always(Atom("x:0", "p1")))
    with pytest.raises(NotSynchronousFragment) as err:
        check_forall_exists_sync(k, formula)
    assert "implication" in str(err.value)


def test_engines_reject_wrong_prefix(g_opa, g_diag):
    """Each engine refuses formulas with the other quantifier pattern."""
    refined, part = refine_fault_partition(g_diag)
    f_dia, _ = property_formula("diagnosability", refined, part)
    f_iso, _ = property_formula("initial-state-opacity", g_opa)
    k_opa = build_kripke(g_opa)
    k_dia = build_kripke(refined)
    with pytest.raises(PrefixMismatch):
        check_forall_forall(k_opa, f_iso)
    with pytest.raises(PrefixMismatch):
        check_forall_exists_sync(k_dia, f_dia)
    with pytest.raises(PrefixMismatch):
        check_exists_forall_bounded(k_dia, f_dia)


# ---------------------------------------------------------------------------
# exists/forall routes


def test_weak_detectability_routes_agree(g_det):
    """The exact observer route and the bounded candidate search agree on the
    fixture and both witnesses replay."""
    exact = verify(g_det, "weak-detectability")
    bounded = verify(g_det, "weak-detectability", wd_route="bounded")
    assert exact.holds is True
    assert exact.engine == "oracle-observer"
    assert bounded.holds is True
    assert bounded.engine == "hyper-exists-forall"
    assert replay_witness(g_det, "weak-detectability", exact) is True
    assert replay_witness(g_det, "weak-detectability", bounded) is True


def test_weak_detectability_observer_witness_is_pinned(g_det):
    """The lifted observer witness is the canonical singleton loop trace."""
    verdict = verify(g_det, "weak-detectability")
    pi1, pi2 = verdict.witness
    assert pi2 is None
    assert pi1 == lasso([node("0"), node("4", "o1")], [node("5", "o1")])


def test_bounded_route_inconclusive_when_no_witness_exists():
    """A machine whose estimate never narrows leaves the candidate search
    inconclusive while the observer route concludes false."""
    from tests.conftest import make_twin_branch
    fsa = make_twin_branch()
    validate_fsa(fsa)
    exact = verify(fsa, "weak-detectability")
    bounded = verify(fsa, "weak-detectability", wd_route="bounded")
    assert exact.holds is False
    assert bounded.holds == "inconclusive"
    assert bounded.mode == "bounded"


def make_dying_branch():
    """A machine whose estimate stays ambiguous although the ambiguity is
    carried only by runs that keep failing to match the next observation.

    From initial state 1 the estimate after every observation is {0, 1}: the
    unobservable move 0 -> 1 refills state 1 at each instant, yet state 1
    matches a next observation of o1 only, and that move collapses it back
    onto the main run.  So no observation sequence ever pins the current
    state, while every infinite observation-matched pair of runs agrees from
    some point on.
    """
    return validate_fsa(Fsa(
        states=["0", "1"],
        events=["a", "b", "u"],
        transitions={("0", "b"): "0", ("0", "u"): "1", ("1", "a"): "0"},
        initial=["1"],
        mask={"a": "o1", "b": "o2", "u": None},
        observations=["o1", "o2"],
    ))


def test_bounded_route_rejects_eternally_ambiguous_machine():
    """A candidate whose estimate never collapses must not be certified, even
    when every infinite observation-matched companion run converges onto
    it."""
    fsa = make_dying_branch()
    assert verify(fsa, "weak-detectability").holds is False
    bounded = verify(fsa, "weak-detectability", wd_route="bounded")
    assert bounded.holds == "inconclusive"


def test_estimate_walk_is_stricter_than_the_trace_product():
    """On the dying-branch machine the product over infinite traces accepts
    candidates, because each ambiguous branch dies out within a step; their
    estimates stay ambiguous regardless, so the walk rejects every one."""
    fsa = make_dying_branch()
    k = build_kripke(fsa)
    formula, _ = property_formula("weak-detectability", fsa)
    body = expand_macros(formula.body, k)
    nba = ltl_to_buchi(Not(body))
    cands = []
    for q0 in k.initial:
        stack = [([q0], {q0})]
        while stack:
            path, onpath = stack.pop()
            for t in k.succ[path[-1]]:
                if t in onpath:
                    i = path.index(t)
                    cands.append(canonical_lasso(
                        Lasso(stem=tuple(path[:i]), cycle=tuple(path[i:]))))
                elif len(path) <= len(k.nodes):
                    stack.append((path + [t], onpath | {t}))
    accepted = [c for c in cands if _inner_universal_holds(k, c, formula, nba)]
    assert accepted
    assert all(not _estimate_walk_accepts(k, c) for c in accepted)


# ---------------------------------------------------------------------------
# decision routes beyond the bare formulas


def make_phantom_branch():
    """A machine that spawns a doomed copy of itself at every observation.

    From state a each o1 step may stay at a or move to b, so the estimate
    after o1 o1 ... is always {a, b}.  But b only continues with o2, so a
    run sitting at b can never keep matching o1; every infinite pair of
    observation-matched runs agrees from some point on, while the current
    state is never pinned down.
    """
    return validate_fsa(Fsa(
        states=["a", "b"],
        events=["e1", "e2", "e3"],
        transitions={("a", "e1"): "a", ("a", "e2"): "b", ("b", "e3"): "a"},
        initial=["a"],
        mask={"e1": "o1", "e2": "o1", "e3": "o2"},
        observations=["o1", "o2"],
    ))


def test_strong_detectability_sees_ambiguity_without_a_diverging_pair():
    """The pair search passes on the phantom-branch machine, yet the estimate
    stays ambiguous forever; the subset-walk completion must catch it and
    report a run along which the uncertainty recurs."""
    fsa = make_phantom_branch()
    k = build_kripke(fsa)
    formula, _ = property_formula("strong-detectability", fsa)
    assert check_forall_forall(k, formula).holds is True
    verdict = verify(fsa, "strong-detectability")
    assert verdict.holds is False
    assert verdict.engine == "hyper-estimate-graph"
    pi1, pi2 = verdict.witness
    assert pi2 is None
    assert not _estimate_walk_accepts(k, pi1)
    assert verdict.details["ambiguous_states"] == ["a", "b"]
    assert verify(fsa, "strong-detectability", engine="oracle").holds is False
    assert replay_witness(fsa, "strong-detectability", verdict) is True


def test_strong_detectability_reports_pumpable_word_for_transient_ambiguity():
    """Here the ambiguous estimate {t, u} is left immediately: after o2 the
    next observation separates the states, so no single run carries the
    uncertainty forever.  It is still reached after arbitrarily many o1
    steps, so the property fails; the verdict then carries a pumpable
    observation word in place of a trace witness."""
    fsa = validate_fsa(Fsa(
        states=["s", "t", "u"],
        events=["e", "g", "h", "i", "j"],
        transitions={("s", "e"): "s", ("s", "g"): "t", ("s", "h"): "u",
                     ("t", "i"): "t", ("u", "j"): "u"},
        initial=["s"],
        mask={"e": "o1", "g": "o2", "h": "o2", "i": "o3", "j": "o4"},
        observations=["o1", "o2", "o3", "o4"],
    ))
    k = build_kripke(fsa)
    formula, _ = property_formula("strong-detectability", fsa)
    assert check_forall_forall(k, formula).holds is True
    verdict = verify(fsa, "strong-detectability")
    assert verdict.holds is False
    assert verdict.witness is None
    assert verdict.details["ambiguous_states"] == ["t", "u"]
    assert verdict.details["pump_cycle"]
    assert verify(fsa, "strong-detectability", engine="oracle").holds is False
    assert replay_witness(fsa, "strong-detectability", verdict) is True


def test_predictability_alarm_may_rest_on_the_faulted_steps_observation():
    """The fault b fires right after the observable c inside one encoded
    step, and the estimate after ... o3 is already fully indicating, so the
    fault is predictable.  A trigger placed at the faulted instant compares
    observations strictly before it and misses that o3; the boundary-anchored
    trigger used by verify must accept the machine."""
    fsa = validate_fsa(Fsa(
        states=["0", "1", "3"],
        events=["a", "b", "c"],
        transitions={("0", "a"): "0", ("0", "c"): "3", ("3", "b"): "1",
                     ("1", "a"): "1"},
        initial=["0"],
        mask={"a": "o2", "b": None, "c": "o3"},
        observations=["o2", "o3"],
        fault_events=["b"],
    ))
    refined, part = refine_fault_partition(fsa)
    formula, _ = property_formula("predictability", refined, part)
    assert check_forall_forall(build_kripke(refined), formula).holds is False
    assert verify(fsa, "predictability").holds is True
    assert verify(fsa, "predictability", engine="oracle").holds is True


def test_bound_env_var_overrides_default(g_det, monkeypatch):
    """The environment bound feeds the candidate search."""
    monkeypatch.setenv("HYPERDES_BOUND", "4")
    verdict = verify(g_det, "weak-detectability", wd_route="bounded")
    assert verdict.bound == 4
    assert verdict.holds is True


# ---------------------------------------------------------------------------
# verify orchestration


def test_verify_requires_fault_annotation(g_det):
    """Fault properties need declared fault events."""
    with pytest.raises(MissingAnnotation) as err:
        verify(g_det, "diagnosability")
    assert "fault" in str(err.value)


def test_verify_requires_secret_annotation(g_diag):
    """Opacity properties need declared secret states."""
    with pytest.raises(MissingAnnotation) as err:
        verify(g_diag, "current-state-opacity")
    assert "secret" in str(err.value)


def test_verify_oracle_engine_agrees_on_fixtures(g_diag, g_det, g_opa):
    """Both engines give the same answer on every fixture property."""
    cases = [
        (g_diag, "diagnosability"), (g_diag, "predictability"),
        (g_det, "i-detectability"), (g_det, "strong-detectability"),
        (g_det, "weak-detectability"), (g_det, "delayed-detectability"),
        (g_opa, "initial-state-opacity"), (g_opa, "current-state-opacity"),
        (g_opa, "infinite-step-opacity"),
    ]
    for fsa, kind in cases:
        hyper = verify(fsa, kind)
        oracle = verify(fsa, kind, engine="oracle")
        assert hyper.holds == oracle.holds, kind


def test_verdict_records_property_and_timing(g_diag):
    verdict = verify(g_diag, "diagnosability")
    assert verdict.property == "diagnosability"
    assert verdict.seconds is not None and verdict.seconds >= 0


# ---------------------------------------------------------------------------
# witness replay


def test_replay_rejects_non_edge(g_diag):
    """Corrupting a witness step breaks the run check."""
    verdict = verify(g_diag, "predictability")
    pi1, pi2 = verdict.witness
    broken = Lasso(stem=pi1.stem, cycle=(node("5", "o3"),))
    fake = Verdict(property="predictability", holds=False, mode="exact",
                   engine="hyper-forall-forall", witness=(broken, pi2))
    with pytest.raises(NotARun):
        replay_witness(g_diag, "predictability", fake)


def test_replay_rejects_non_initial_start(g_diag):
    verdict = verify(g_diag, "predictability")
    pi1, pi2 = verdict.witness
    shifted = Lasso(stem=pi1.stem[1:], cycle=pi1.cycle)
    fake = Verdict(property="predictability", holds=False, mode="exact",
                   engine="hyper-forall-forall", witness=(shifted, pi2))
    with pytest.raises(NotARun):
        replay_witness(g_diag, "predictability", fake)


def test_replay_refuses_satisfying_pair(g_diag):
    """A well-formed pair that does not violate the body is not accepted."""
    run = lasso([node("0"), node("1", "o1")], [node("2", "o2")])
    fake = Verdict(property="predictability", holds=False, mode="exact",
                   engine="hyper-forall-forall", witness=(run, run))
    assert replay_witness(g_diag, "predictability", fake) is False


def test_replay_validates_fixture_witnesses(g_diag, g_det, g_opa):
    """Every violated fixture verdict replays successfully."""
    for fsa, kind in [(g_diag, "predictability"),
                      (g_det, "delayed-detectability"),
                      (g_opa, "infinite-step-opacity")]:
        verdict = verify(fsa, kind)
        assert verdict.holds is False
        assert replay_witness(fsa, kind, verdict) is True


def test_forall_exists_refutation_is_trace_specific(g_opa):
    """The hindsight refutation accepts the real violating trace and rejects
    a trace whose pause sits at a non-secret state."""
    formula, _ = property_formula("infinite-step-opacity", g_opa)
    k = build_modified_kripke(build_kripke(g_opa))
    good = lasso([node("3"), node("4", "o1"), node("4", "o1", copy=True),
                  node("4", "o1"), node("5", "o4")],
                 [node("5", "o3")])
    assert forall_exists_refutes(k, formula, good) is True
    weak = lasso([node("3"), node("4", "o1"), node("2", "o2"),
                  node("2", "o2", copy=True), node("2", "o2")],
                 [node("2", "o3")])
    assert forall_exists_refutes(k, formula, weak) is False
