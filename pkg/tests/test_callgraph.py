"""Call extraction, composition, and the collapsed transitive closure."""

import random

import pytest

from helpers import (
    VALUE_PRELUDE,
    load,
    match_value,
    pattern_for_value,
    pipeline,
    random_call,
    random_value,
)
from totcheck import callgraph as cg
from totcheck import surface
from totcheck.callgraph import Call, ResourceError
from totcheck.sct import (
    DAIMON,
    ERR,
    IDENTITY,
    UNKNOWN,
    Chain,
    Ctor,
    Step,
    Weight,
    term_leq,
    weight_leq,
)


def call_strings(calls):
    return sorted(cg.format_call(c) for c in calls)


# ---------------------------------------------------------------------------
# extraction, frozen


def test_sums_calls_frozen():
    loaded = load("sums")
    calls = cg.extract_calls(loaded.group_of("sums"))
    assert len(calls) == 3
    assert call_strings(calls) == [
        "sums -> <-1@0> sums (.Tail^0 x1)",
        "sums -> <-1@0> sums (.Tail^0 x1)",
        "sums -> <> sums ({Head=Cons^1 {Fst=T; Snd=.Snd^0 Cons^1- "
        ".Snd^0 Cons^1- .Head^0 x1}^0; Tail=.Tail^0 x1}^0)",
    ]
    assert sorted(str(c.out_weight) for c in calls) == ["<-1@0>", "<-1@0>", "<>"]


def test_length_call_compose_and_closure_frozen():
    loaded = load("length")
    (call,) = cg.extract_calls(loaded.group_of("length"))
    assert cg.format_call(call) == "length -> <-1@1> length (.Snd^0 Cons^1- x1)"
    twice = cg.compose(call, call)
    assert twice.out_weight == Weight(((1, -2),))
    assert (
        cg.format_call(twice)
        == "length -> <-2@1> length (.Snd^0 Cons^1- .Snd^0 Cons^1- x1)"
    )
    closure = cg.transitive_closure([call], 2, 2, loaded.finite_priorities())
    assert call_strings(closure) == [
        "length -> <-1@1> length (.Snd^0 Cons^1- x1)",
        "length -> <-2@1> length (<-1@0,-1@1> (.Snd^0 Cons^1- x1))",
        "length -> <-2@1> length (<-2@0,-2@1> (.Snd^0 Cons^1- x1))",
    ]


def test_sums_closure_frozen():
    loaded = load("sums")
    calls = cg.extract_calls(loaded.group_of("sums"))
    closure = cg.transitive_closure(calls, 2, 2, loaded.finite_priorities())
    assert call_strings(closure) == [
        "sums -> <-1@0> sums (.Tail^0 x1)",
        "sums -> <-1@0> sums ({Head=Cons^1 (<-1@0,-2@1> (.Head^0 .Tail^0 x1)); "
        "Tail=.Tail^0 .Tail^0 x1}^0)",
        "sums -> <-1@0> sums ({Head=Cons^1 (<-2@0,-2@1> (.Head^0 .Tail^0 x1)); "
        "Tail=.Tail^0 .Tail^0 x1}^0)",
        "sums -> <-2@0> sums (.Tail^0 .Tail^0 x1)",
        "sums -> <-2@0> sums (<-1@0,+0@1> (.Tail^0 .Tail^0 x1))",
        "sums -> <-2@0> sums (<-2@0,+0@1> (.Tail^0 .Tail^0 x1))",
        "sums -> <-2@0> sums ({Head=Cons^1 (<-2@0,-2@1> (.Tail^0 .Tail^0 x1)); "
        "Tail=<-1@0,+0@1> (.Tail^0 .Tail^0 x1)}^0)",
        "sums -> <-2@0> sums ({Head=Cons^1 (<-2@0,-2@1> (.Tail^0 .Tail^0 x1)); "
        "Tail=<-2@0,+0@1> (.Tail^0 .Tail^0 x1)}^0)",
        "sums -> <> sums ({Head=Cons^1 (<-2@0,-2@1> (Cons^1- .Head^0 x1)); "
        "Tail=.Tail^0 x1}^0)",
        "sums -> <> sums ({Head=Cons^1 {Fst=T; Snd=.Snd^0 Cons^1- "
        ".Snd^0 Cons^1- .Head^0 x1}^0; Tail=.Tail^0 x1}^0)",
    ]


def test_nested_call_extraction_frozen():
    """An inner recursive call surfaces both as an opaque argument and as
    a daimon-weighted call of its own."""
    loaded = load("nested_call")
    calls = cg.extract_calls(loaded.group_of("f"))
    assert call_strings(calls) == [
        "f -> <> f (T)",
        "f -> <T> f (Succ^1- x1)",
    ]
    closure = cg.transitive_closure(calls, 2, 2, loaded.finite_priorities())
    assert call_strings(closure) == [
        "f -> <> f (T)",
        "f -> <T> f (<0@0,-1@1> (Succ^1- Succ^1- x1))",
        "f -> <T> f (<0@0,-2@1> (Succ^1- Succ^1- x1))",
        "f -> <T> f (Succ^1- Succ^1- x1)",
        "f -> <T> f (Succ^1- x1)",
        "f -> <T> f (T)",
    ]


def test_pattern_substitution_frozen():
    loaded = load("length")
    cons_clause = loaded.group_of("length").clauses_of("length")[1]
    sub = cg.pattern_substitution(cons_clause.patterns)
    assert {name: str(t) for name, t in sub.items()} == {
        "_1": ".Fst^0 Cons^1- x1",  # the wildcard still gets a chain
        "l": ".Snd^0 Cons^1- x1",
    }


def test_substitution_agrees_with_direct_matching():
    """The destructor chain assigned to each pattern variable, replayed
    against a value the pattern matches, lands on exactly the subvalue
    that variable binds."""
    rng = random.Random(20260815)
    checked = 0
    while checked < 520:
        ty = rng.choice(("nat", "list"))
        value = random_value(rng, ty, 5)
        pattern, bindings = pattern_for_value(rng, value, {})
        sig = "nat -> nat" if ty == "nat" else "list(nat) -> nat"
        src = VALUE_PRELUDE + f"\nval f : {sig}\n  | f {pattern} = 0\n"
        clause = pipeline(src).group_of("f").clauses_of("f")[0]
        sub = cg.pattern_substitution(clause.patterns)
        assert set(sub) == set(bindings)
        for name, chain in sub.items():
            assert match_value(chain, value) == bindings[name]
            checked += 1
    assert checked >= 500


# ---------------------------------------------------------------------------
# composition


def test_compose_is_associative():
    rng = random.Random(5150)
    for _ in range(600):
        a = random_call(rng, "f", "g")
        b = random_call(rng, "g", "h")
        c = random_call(rng, "h", "k")
        assert cg.compose(cg.compose(a, b), c) == cg.compose(a, cg.compose(b, c))


def test_compose_requires_meeting_endpoints():
    a = random_call(random.Random(1), "f", "g")
    b = random_call(random.Random(2), "h", "k")
    with pytest.raises(AssertionError, match="calls do not meet"):
        cg.compose(a, b)


def test_collapsed_compose_is_not_associative():
    """Clamping in between loses the cancellation that the plain sum
    would have performed: +1+1 overflows to inf before -1 can undo it."""
    up = Call("f", "f", Weight(((0, 1),)), ())
    down = Call("f", "f", Weight(((0, -1),)), ())
    left = cg.collapsed_compose(
        cg.collapsed_compose(up, up, 2, 2, {0}), down, 2, 2, {0}
    )
    right = cg.collapsed_compose(
        up, cg.collapsed_compose(up, down, 2, 2, {0}), 2, 2, {0}
    )
    assert cg.format_call(left) == "f -> <inf@0> f ()"
    assert cg.format_call(right) == "f -> <1@0> f ()"
    assert left != right


def test_collapsed_compose_below_plain_compose():
    rng = random.Random(33441)
    for _ in range(700):
        a = random_call(rng, "f", "g")
        b = random_call(rng, "g", "h")
        plain = cg.compose(a, b)
        collapsed = cg.collapsed_compose(a, b, 2, 2, {0, 1, 2})
        assert weight_leq(collapsed.out_weight, plain.out_weight)
        for lo, hi in zip(collapsed.args, plain.args):
            assert term_leq(lo, hi), f"{lo} not below {hi}"


# ---------------------------------------------------------------------------
# closure


def test_closure_is_idempotent():
    for name, fun in (("length", "length"), ("sums", "sums")):
        loaded = load(name)
        prios = loaded.finite_priorities()
        calls = cg.extract_calls(loaded.group_of(fun))
        once = cg.transitive_closure(calls, 2, 2, prios)
        assert cg.transitive_closure(once, 2, 2, prios) == once


def test_closure_respects_edge_budget():
    loaded = load("sums")
    calls = cg.extract_calls(loaded.group_of("sums"))
    with pytest.raises(ResourceError, match="exceeded 3 edges"):
        cg.transitive_closure(calls, 2, 2, loaded.finite_priorities(), max_edges=3)


def test_closure_drops_erroneous_compositions():
    """A composition whose argument collapses to the error term is not
    a realizable path and never enters the closure."""
    step_up = Call("f", "f", IDENTITY, (Ctor("C", 1, Chain((), "x1")),))
    peel_other = Call("f", "f", IDENTITY, (Chain((Step("inv", "K", 1),), "x1"),))
    closure = cg.transitive_closure([step_up, peel_other], 2, 2, {0, 1})
    assert all(not cg.is_dropped(c) for c in closure)
    dropped = cg.compose(step_up, peel_other)
    assert dropped.args == (ERR,)


def test_collapsed_call_space_is_finite_at_unit_bounds():
    """With B = D = 1 over two functions, two labels, and two priorities,
    the reachable collapsed calls form a finite set that is closed under
    composition — checked by exhausting every composable pair."""
    proj = Step("proj", "A", 0)
    peel = Step("inv", "C", 1)
    seeds = [
        Call("f", "g", IDENTITY, (Chain((proj,), "x1"), Chain((peel,), "x2"))),
        Call("g", "f", Weight(((0, -1),)), (Ctor("C", 1, Chain((), "x2")), Chain((), "x1"))),
        Call("f", "f", Weight(((1, -1),)), (Chain((peel, proj), "x1"), UNKNOWN)),
        Call("g", "g", DAIMON, (Chain((), "x1"), Ctor("C", 1, Chain((proj,), "x1")))),
    ]
    closure = cg.transitive_closure(seeds, 1, 1, {0, 1}, max_edges=100000)
    assert len(closure) == 16
    pairs = 0
    for c in closure:
        for d in closure:
            if c.target == d.source:
                pairs += 1
                again = cg.collapsed_compose(c, d, 1, 1, {0, 1})
                assert cg.is_dropped(again) or again in closure
    assert pairs == 144


# ---------------------------------------------------------------------------
# the decrease test on loops


def test_check_loop_on_output_weight():
    assert cg.check_loop(Call("f", "f", Weight(((0, -1),)), ()))  # even decrease
    assert not cg.check_loop(Call("f", "f", Weight(((1, -1),)), ()))  # odd top
    assert not cg.check_loop(Call("f", "f", DAIMON, (Chain((), "x1"),)))
    assert not cg.check_loop(Call("f", "f", IDENTITY, (Chain((), "x1"),)))


def test_check_loop_on_arguments():
    loaded = load("length")
    (call,) = cg.extract_calls(loaded.group_of("length"))
    assert cg.check_loop(call)  # one Cons peeled at odd priority 1
    identity_loop = load("sums")
    third = [
        c
        for c in cg.extract_calls(identity_loop.group_of("sums"))
        if c.out_weight == IDENTITY
    ]
    assert len(third) == 1 and cg.check_loop(third[0])  # Cons built once, peeled twice


def test_analyze_group_verdicts():
    length = load("length")
    result = cg.analyze_group(length.group_of("length"), length.finite_priorities())
    assert (result.verdict, result.reason, result.evidence) == ("TOTAL", None, None)
    bad = load("all_nats")
    result = cg.analyze_group(bad.group_of("all_nats"), bad.finite_priorities())
    assert result.verdict == "UNSAFE"
    assert result.reason == (
        "no decrease on the idempotent loop "
        "all_nats -> <-1@0,-1@1> all_nats (Succ^1 x1)"
    )
    assert cg.format_call(result.evidence) == (
        "all_nats -> <-1@0,-1@1> all_nats (Succ^1 x1)"
    )


# ---------------------------------------------------------------------------
# helpers on calls


def test_format_call_and_is_dropped():
    call = Call("f", "g", Weight(((1, -1),)), (Chain((), "x1"), UNKNOWN))
    assert cg.format_call(call) == "f -> <-1@1> g (x1, T)"
    assert not cg.is_dropped(call)
    assert cg.is_dropped(Call("f", "g", IDENTITY, (ERR,)))


def test_approx_term():
    sub = {"n": Chain((Step("inv", "Succ", 1),), "x1")}
    stamped_var = surface.Var("n")
    assert cg.approx_term(stamped_var, sub) == sub["n"]
    wrapped = surface.Ctor("Succ", stamped_var, prio=1)
    assert str(cg.approx_term(wrapped, sub)) == "Succ^1 (Succ^1- x1)"
    opaque = surface.App(surface.Fun("f"), stamped_var)
    assert cg.approx_term(opaque, sub) is UNKNOWN
    record = surface.Rec((("Head", opaque),), prio=0)
    assert str(cg.approx_term(record, sub)) == "{Head=T}^0"
