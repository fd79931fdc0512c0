import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqmin.terms import (
    App,
    BadPosition,
    Const,
    Equation,
    NoMatch,
    QuantifiedEquation,
    Var,
    alpha_equal,
    canonical_key,
    eq_variables,
    forall_closure,
    match_term,
    mk,
    parse_equation,
    parse_quantified,
    parse_term,
    positions,
    rename_apart,
    rewrite_at,
    rewrite_parallel,
    rewrite_parallel_eq,
    substitute,
    subterm_at,
    unify,
    variables,
)


def t(s):
    return parse_term(s)


def eq(s):
    return parse_equation(s)


class TestSubstitute:
    def test_example_h(self):
        sigma = {"x": t("a"), "y": t("b")}
        assert substitute(t("h(a,y)"), sigma) == t("h(a,b)")

    def test_identity(self):
        term = t("x◇(y◇x)")
        assert substitute(term, {}) == term

    def test_simultaneous(self):
        assert substitute(t("x◇x"), {"x": t("y◇z")}) == t("(y◇z)◇(y◇z)")

    def test_no_rewalk_of_images(self):
        # x -> y while y -> a must not turn x into a
        assert substitute(t("x"), {"x": t("y"), "y": t("a")}) == t("y")


class TestUnify:
    def test_paper_mgu(self):
        assert unify(t("h(a,y)"), t("h(x,b)")) == {"x": t("a"), "y": t("b")}

    def test_occurs_check(self):
        assert unify(t("x"), t("f(x)")) is None

    def test_renamed_self_application(self):
        assert unify(t("f(f(x))"), t("f(x1)")) == {"x1": t("f(x)")}

    def test_unifier_actually_unifies(self):
        a, b = t("x◇(y◇b)"), t("(f(z)◇w)◇(a◇b)")
        sigma = unify(a, b)
        assert substitute(a, sigma) == substitute(b, sigma)

    def test_idempotent(self):
        a, b = t("h(x,f(y))"), t("h(g(y),z)")
        sigma = unify(a, b)
        once = substitute(a, sigma)
        assert substitute(once, sigma) == once

    def test_symmetry_of_success(self):
        pairs = [("h(a,y)", "h(x,b)"), ("x", "f(x)"), ("a◇b", "b◇a"), ("x◇y", "a◇(b◇c)")]
        for left, right in pairs:
            assert (unify(t(left), t(right)) is None) == (unify(t(right), t(left)) is None)


class TestMatch:
    def test_simple(self):
        assert match_term(t("f(x)"), t("f(b)")) == {"x": t("b")}

    def test_subject_variable_not_instantiable(self):
        assert match_term(t("f(b)"), t("f(x)")) is None

    def test_round_trip(self):
        pattern, subject = t("x◇(y◇x)"), t("a◇(b◇a)")
        sigma = match_term(pattern, subject)
        assert substitute(pattern, sigma) == subject

    def test_nonlinear_pattern(self):
        assert match_term(t("x◇x"), t("a◇b")) is None
        assert match_term(t("x◇x"), t("a◇a")) == {"x": t("a")}


class TestRewrite:
    def test_right_to_left(self):
        assert rewrite_at(t("f(b)"), (0,), eq("a = b"), "r2l") == t("f(a)")

    def test_root(self):
        assert rewrite_at(t("f(a)"), (), eq("f(x) = x"), "l2r") == t("a")

    def test_inner_redex(self):
        # at (0,) the addressed subterm is f(f(x)), so y binds to x
        out = rewrite_at(t("f(f(f(x)))"), (0,), eq("f(f(y)) = g(y)"), "l2r")
        assert out == t("f(g(x))")
        assert match_term(t("g(y)"), subterm_at(out, (0,))) is not None

    def test_root_redex(self):
        out = rewrite_at(t("f(f(f(x)))"), (), eq("f(f(y)) = g(y)"), "l2r")
        assert out == t("g(f(x))")
        assert match_term(t("g(y)"), out) is not None

    def test_no_match(self):
        with pytest.raises(NoMatch):
            rewrite_at(t("f(b)"), (0,), eq("c = d"), "l2r")

    def test_bad_position(self):
        with pytest.raises(BadPosition):
            rewrite_at(t("f(b)"), (0, 0, 0), eq("a = b"), "l2r")

    def test_inverse_round_trip(self):
        term, rule = t("h(f(b),a)"), eq("f(x) = g(x)")
        there = rewrite_at(term, (0,), rule, "l2r")
        back = rewrite_at(there, (0,), rule, "r2l")
        assert back == term


class TestRewriteParallel:
    def test_paper_example(self):
        assert rewrite_parallel(t("h(b,a,b)"), eq("b = a"), "l2r") == t("h(a,a,a)")

    def test_both_sides_of_equation(self):
        before = parse_equation("h(f(b),a) != h(a,f(b))")
        after = rewrite_parallel_eq(before, eq("f(x) = x"), "l2r")
        assert after == parse_equation("h(b,a) != h(a,b)")

    def test_zero_matches_is_identity(self):
        assert rewrite_parallel(t("c"), eq("a = b"), "l2r") == t("c")

    def test_outermost_only(self):
        # f(f(a)): the outer occurrence is replaced, the inner one survives
        out = rewrite_parallel(t("f(f(a))"), eq("f(x) = g(x)"), "l2r")
        assert out == t("g(f(a))")


class TestAlpha:
    def test_renaming(self):
        assert alpha_equal(parse_quantified("∀x,y. x◇y = y"), parse_quantified("∀u,v. u◇v = v"))

    def test_not_a_bijection(self):
        assert not alpha_equal(
            parse_quantified("∀x,y. x◇y = y"), parse_quantified("∀x,y. y◇x = y")
        )

    def test_unordered_sides(self):
        assert alpha_equal(parse_quantified("∀x. x = a◇x"), parse_quantified("∀y. a◇y = y"))

    def test_skolem_flag_matters(self):
        ground = QuantifiedEquation((), Equation(Const("sk0", skolem=True), Const("a")))
        plain = QuantifiedEquation((), Equation(Const("sk0", skolem=False), Const("a")))
        assert not alpha_equal(ground, plain)

    def test_quantifier_kind_matters(self):
        mixed = parse_quantified("∀z. ∃x. h(x,z) = x")
        pure = parse_quantified("∀z,x. h(x,z) = x")
        assert not alpha_equal(mixed, pure)


def _random_term(rng, depth, vars_=("x", "y", "z")):
    if depth == 0 or rng.random() < 0.4:
        name = rng.choice(list(vars_) + ["a", "b"])
        return Var(name) if name in vars_ else Const(name)
    return mk(_random_term(rng, depth - 1, vars_), _random_term(rng, depth - 1, vars_))


def _random_universal(rng):
    return forall_closure(Equation(_random_term(rng, 2), _random_term(rng, 2)))


def test_alpha_is_an_equivalence_on_random_triples():
    rng = random.Random(42)
    for _ in range(200):
        qa, qb, qc = (_random_universal(rng) for _ in range(3))
        assert alpha_equal(qa, qa)
        assert alpha_equal(qa, qb) == alpha_equal(qb, qa)
        if alpha_equal(qa, qb) and alpha_equal(qb, qc):
            assert alpha_equal(qa, qc)


def test_alpha_agrees_with_canonical_oracle():
    # independent oracle: normalize variable order and side order by brute
    # force over both orientations, then compare rendered keys
    rng = random.Random(7)

    def oracle(q):
        best = None
        for body in (q.body, q.body.flipped()):
            names = {}

            def walk(term):
                if isinstance(term, Var):
                    if term.name not in names:
                        names[term.name] = f"n{len(names)}"
                    return names[term.name]
                if isinstance(term, Const):
                    return f"c:{term.name}:{term.skolem}"
                return "(" + term.op + " " + " ".join(walk(a) for a in term.args) + ")"

            key = walk(body.lhs) + "=" + walk(body.rhs)
            if best is None or key < best:
                best = key
        return best

    for _ in range(300):
        qa, qb = _random_universal(rng), _random_universal(rng)
        assert alpha_equal(qa, qb) == (oracle(qa) == oracle(qb))


class TestRenameApart:
    def test_paper_shape(self):
        out = rename_apart(eq("f(f(x)) = g(x)"), {"x"})
        assert alpha_equal(forall_closure(out), parse_quantified("f(f(x1)) = g(x1)"))
        assert "x" not in eq_variables(out)

    def test_ground_untouched(self):
        assert rename_apart(eq("a = b"), {"x"}) == eq("a = b")

    def test_partial_clash(self):
        out = rename_apart(eq("x◇y = y◇x"), {"x"})
        assert "y" in eq_variables(out)
        assert "x" not in eq_variables(out)
        assert alpha_equal(forall_closure(out), forall_closure(eq("x◇y = y◇x")))


@given(st.integers(0, 2**30), st.integers(0, 2**30))
@settings(max_examples=60, deadline=None)
def test_unify_produces_most_general_common_instance(seed_a, seed_b):
    rng = random.Random(seed_a * 2**31 + seed_b)
    a, b = _random_term(rng, 2), _random_term(rng, 2, vars_=("u", "v", "w"))
    sigma = unify(a, b)
    if sigma is not None:
        assert substitute(a, sigma) == substitute(b, sigma)


@given(st.integers(0, 2**30))
@settings(max_examples=60, deadline=None)
def test_match_is_one_sided(seed):
    rng = random.Random(seed)
    pattern = _random_term(rng, 2)
    image = substitute(
        pattern, {v: _random_term(rng, 1, vars_=()) for v in variables(pattern)}
    )
    sigma = match_term(pattern, image)
    assert sigma is not None
    assert substitute(pattern, sigma) == image


class TestParsing:
    @pytest.mark.parametrize(
        "text",
        ["x", "a◇b", "x◇(y◇x)", "f(a,b)", "h(f(b),a)", "(a◇b)◇(c◇d)", "sk0◇x"],
    )
    def test_round_trip(self, text):
        from eqmin.terms import format_term

        assert parse_term(format_term(parse_term(text))) == parse_term(text)

    def test_ambiguous_chain_rejected(self):
        from eqmin.terms import ParseError

        with pytest.raises(ParseError):
            parse_term("a◇b◇c")

    def test_skolem_flag(self):
        term = parse_term("sk0◇a")
        assert term.args[0] == Const("sk0", skolem=True)

    def test_quantified_prefix(self):
        q = parse_quantified("∀z. ∃x. h(x,z) = x")
        assert q.prefix == (("forall", "z"), ("exists", "x"))

    def test_unused_prefix_entry_rejected(self):
        with pytest.raises(ValueError):
            QuantifiedEquation((("forall", "x"), ("forall", "y")), eq("x = a"))
