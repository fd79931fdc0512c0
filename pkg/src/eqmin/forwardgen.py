"""Random unit-equality systems and forward-generated refutations.

The generator builds a rewrite system, optionally derives a few positive
lemmas by superposition, walks a ground term through random rewrites, and
packages the walk as a refutation of the universal closure of
(start = finish).  Every produced refutation passes the checker, which makes
these self-fixtures for parsers, redirection, and the batch corpus.

All randomness comes from an explicit random.Random instance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .calculus import ProofStep, RuleKind
from .proofio import ParsedDerivation, Problem, VariantKind
from .terms import (
    App,
    Const,
    Equation,
    Var,
    forall_closure,
    match_term,
    mk,
    positions,
    replace_at,
    substitute,
    subterm_at,
    variables,
)

CONSTANTS = ("a", "b", "c")
GEN_VARS = ("x", "y", "z")


def random_term(rng: random.Random, depth: int, vars_=GEN_VARS, consts=CONSTANTS):
    """A random magma term of at most the given depth."""
    if depth <= 0 or rng.random() < 0.35:
        pool = list(vars_) + list(consts)
        name = rng.choice(pool)
        return Var(name) if name in vars_ else Const(name)
    return mk(
        random_term(rng, depth - 1, vars_, consts),
        random_term(rng, depth - 1, vars_, consts),
    )


def random_rule(rng: random.Random, depth: int = 3) -> Equation:
    """A random rule whose right side only uses left-side variables, so it
    rewrites ground terms to ground terms left-to-right."""
    for _ in range(200):
        lhs = random_term(rng, depth)
        lhs_vars = sorted(variables(lhs))
        rhs = random_term(rng, depth - 1, vars_=lhs_vars or ())
        if lhs != rhs and not isinstance(lhs, Var):
            return Equation(lhs, rhs)
    raise RuntimeError("could not generate a rule")


def random_system(rng: random.Random, max_rules: int = 3, depth: int = 3):
    n = rng.randint(1, max_rules)
    return [(f"ax{i + 1}", forall_closure(random_rule(rng, depth))) for i in range(n)]


def _ground_rewrites(term, rules):
    """All (position, rule name, direction, result) ground rewrites of term."""
    out = []
    for name, qe in rules:
        body = qe.body
        for direction in ("l2r", "r2l"):
            source = body.lhs if direction == "l2r" else body.rhs
            target = body.rhs if direction == "l2r" else body.lhs
            if not variables(target) <= variables(source):
                continue
            for pos in positions(term):
                sigma = match_term(source, subterm_at(term, pos))
                if sigma is not None:
                    out.append(
                        (pos, name, direction, replace_at(term, pos, substitute(target, sigma)))
                    )
    return out


def random_walk(rng: random.Random, start, rules, steps: int):
    """Rewrite `start` up to `steps` times; returns the visited terms and the
    (rule name, direction, position) choices taken."""
    term = start
    trail = []
    for _ in range(steps):
        options = _ground_rewrites(term, rules)
        if not options:
            break
        pos, name, direction, result = rng.choice(options)
        trail.append((term, name, direction, pos, result))
        term = result
    return term, trail


@dataclass
class GeneratedRefutation:
    problem: Problem
    derivation: ParsedDerivation
    walk_length: int


def _derive_positive(rng: random.Random, rules):
    """Try to derive one extra positive rule by superposing two axioms."""
    from .calculus import NotUnifiable, PositionIsVariable, apply_superposition
    from .terms import BadPosition

    names = [n for n, _ in rules]
    for _ in range(30):
        r1 = rng.choice(names)
        r2 = rng.choice(names)
        rule = dict(rules)[r1].body
        target = dict(rules)[r2].body
        pos = rng.choice(
            [(s,) + p for s in (0, 1) for p in positions(target.side(s))]
        )
        try:
            conclusion = apply_superposition(rule, target, pos)
        except (NotUnifiable, PositionIsVariable, BadPosition):
            continue
        if conclusion.lhs == conclusion.rhs:
            continue
        return r1, r2, forall_closure(conclusion)
    return None


def generate_refutation(
    rng: random.Random,
    max_rules: int = 3,
    depth: int = 3,
    walk_steps: int = 4,
    with_variables: bool = True,
    with_derived_rule: bool = False,
    name: str = "gen",
) -> GeneratedRefutation | None:
    """One random problem plus a certifiable refutation of its conjecture.

    The conjecture is the universal closure of (start = finish) over a random
    walk; its negation Skolemizes the conjecture variables, and the walk
    becomes the refutation's disequation spine.  Returns None when the system
    turned out to be inert (no rewrite applies to the start term).
    """
    axioms = random_system(rng, max_rules, depth)
    rules = list(axioms)

    steps = []
    next_id = [0]

    def cid():
        next_id[0] += 1
        return f"c{next_id[0]}"

    name_to_step = {}
    for ax_name, qe in axioms:
        sid = cid()
        name_to_step[ax_name] = sid
        steps.append(ProofStep(sid, qe, RuleKind.AXIOM))

    if with_derived_rule:
        derived = _derive_positive(rng, rules)
        if derived is not None:
            r1, r2, qe = derived
            sid = cid()
            steps.append(
                ProofStep(
                    sid, qe, RuleKind.SUPERPOSITION,
                    (name_to_step[r1], name_to_step[r2]),
                )
            )
            rule_name = f"derived_{sid}"
            rules.append((rule_name, qe))
            name_to_step[rule_name] = sid

    # Ground start term over Skolem constants (for conjecture variables) and
    # plain constants.
    if with_variables:
        consts = tuple(Const(f"sk{i}", skolem=True) for i in range(rng.randint(1, 2)))
    else:
        consts = ()
    pool = [Const(c) for c in CONSTANTS] + list(consts)

    def ground_term(d):
        if d <= 0 or rng.random() < 0.4:
            return rng.choice(pool)
        return mk(ground_term(d - 1), ground_term(d - 1))

    start = ground_term(depth)
    finish, trail = random_walk(rng, start, rules, walk_steps)
    if not trail:
        return None

    # Conjecture: de-Skolemized closure of start = finish.
    sk_names = sorted(
        {c.name for c in consts}
        & ({c.name for c in _constants(start)} | {c.name for c in _constants(finish)})
    )
    unskolem = {n: Var(f"v{i}") for i, n in enumerate(sk_names)}
    conj_eq = _replace_constants(Equation(start, finish), unskolem)
    conjecture = forall_closure(conj_eq)

    neg_id = cid()
    steps.append(
        ProofStep(neg_id, forall_closure(Equation(start, finish, positive=False)),
                  RuleKind.NEGATED_CONJECTURE)
    )

    previous = neg_id
    current = start
    for term, rule_name, direction, pos, result in trail:
        sid = cid()
        statement = forall_closure(Equation(result, finish, positive=False))
        steps.append(
            ProofStep(
                sid, statement, RuleKind.SUPERPOSITION,
                (name_to_step[rule_name], previous),
            )
        )
        previous = sid
        current = result

    steps.append(ProofStep(cid(), None, RuleKind.EQUALITY_RESOLUTION, (previous,)))

    problem = Problem(name, tuple(axioms), ("goal", conjecture), VariantKind.BASELINE)
    derivation = ParsedDerivation(steps, "saturation")
    return GeneratedRefutation(problem, derivation, len(trail))


def _constants(term):
    out = []

    def go(t):
        if isinstance(t, Const):
            out.append(t)
        elif isinstance(t, App):
            for a in t.args:
                go(a)

    go(term)
    return out


def _replace_constants(e: Equation, mapping):
    def go(t):
        if isinstance(t, Const) and t.name in mapping:
            return mapping[t.name]
        if isinstance(t, App):
            return App(t.op, tuple(go(a) for a in t.args))
        return t

    return Equation(go(e.lhs), go(e.rhs), e.positive)
