"""Unit-equality inference rules and the proof checker.

The checker certifies soundness only: it recomputes every inference and every
chain link rather than trusting recorded conclusions.  Ordering restrictions
used by saturation provers to prune search are deliberately not enforced.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .terms import (
    EXISTS,
    FORALL,
    App,
    BadPosition,
    Const,
    Equation,
    Position,
    QuantifiedEquation,
    Term,
    Var,
    alpha_equal,
    eq_substitute,
    eq_variables,
    eq_variables_in_order,
    forall_closure,
    format_equation,
    fresh_names,
    positions,
    rename_apart,
    rewrite_reaches,
    substitute,
    subterm_at,
    unify,
)


class CalculusError(Exception):
    pass


class NotUnifiable(CalculusError):
    pass


class PositionIsVariable(CalculusError):
    """Superposing into a variable position is rejected."""


class RuleKind(enum.Enum):
    SUPERPOSITION = "superposition"
    PARALLEL_SUPERPOSITION = "parallel_superposition"
    EQUALITY_RESOLUTION = "equality_resolution"
    AXIOM = "axiom"
    NEGATED_CONJECTURE = "negated_conjecture"
    CHAIN = "chain"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ChainLink:
    """One rewrite in an equality chain: from --rule_ref@position--> to."""

    from_term: Term
    rule_ref: str
    direction: str
    position: Position
    to_term: Term


@dataclass(frozen=True)
class ProofStep:
    """One line of a linear derivation.

    statement is None for the contradiction marker.  rule_name preserves the
    producer's verbatim rule label when it differs from the mapped kind.
    contrapositive marks redirected steps whose original inference ran on the
    negated statements; tautology carries the virtual t = t premise that the
    redirection elides instead of materializing as a proof line.
    """

    id: str
    statement: QuantifiedEquation | None
    rule: RuleKind
    premises: tuple = ()
    chain: tuple = ()
    rule_name: str = ""
    contrapositive: bool = False
    tautology: QuantifiedEquation | None = None

    @property
    def is_contradiction(self) -> bool:
        return self.statement is None


# ---------------------------------------------------------------------------
# Inference rules


def _equation_position(target: Equation, pos: Position):
    if not pos or pos[0] not in (0, 1):
        raise BadPosition("equation positions start with the side index 0 or 1")
    side = target.side(pos[0])
    return side, pos[1:]


def _oriented_sides(rule: Equation):
    sides = [(rule.lhs, rule.rhs), (rule.rhs, rule.lhs)]
    # Prefer a non-variable source side: rewriting with a bare variable as the
    # source is never what a saturation prover records, though it is sound.
    sides.sort(key=lambda pair: isinstance(pair[0], Var))
    return sides


def _superposition_candidates(rule: Equation, target: Equation, pos: Position, parallel: bool):
    """Yield the conclusions of every viable rule orientation at pos."""
    if not rule.positive:
        raise CalculusError("the rewriting premise must be a positive equation")
    target = rename_apart_eq(target, eq_variables(rule))
    side_term, term_pos = _equation_position(target, pos)
    sub = subterm_at(side_term, term_pos)
    if not isinstance(sub, (App, Const)):
        raise PositionIsVariable(f"cannot superpose into variable {sub!r}")
    for source, produced in _oriented_sides(rule):
        mu = unify(source, sub)
        if mu is None:
            continue
        if parallel:
            instantiated = eq_substitute(target, mu)
            pattern = substitute(source, mu)
            image = substitute(produced, mu)
            yield _replace_everywhere(instantiated, pattern, image)
        else:
            new_side = replace_in_term(side_term, term_pos, substitute(produced, mu))
            out = [substitute(target.lhs, mu), substitute(target.rhs, mu)]
            out[pos[0]] = substitute(new_side, mu)
            yield Equation(out[0], out[1], target.positive)


def apply_superposition(rule: Equation, target: Equation, pos: Position) -> Equation:
    """Rewrite target at pos with rule, unifying rather than matching.

    pos addresses into the target equation: its first index selects the side.
    The target is renamed apart from the rule.  Both rule orientations are
    tried, non-variable source sides first.  The subterm may not be a variable.
    """
    for candidate in _superposition_candidates(rule, target, pos, parallel=False):
        return candidate
    raise NotUnifiable(
        f"{format_equation(rule)} does not unify at {list(pos)} of {format_equation(target)}"
    )


def apply_parallel_superposition(rule: Equation, target: Equation, pos: Position) -> Equation:
    """Like apply_superposition, but every occurrence of the unified subterm
    instance is replaced, on both sides of the target."""
    for candidate in _superposition_candidates(rule, target, pos, parallel=True):
        return candidate
    raise NotUnifiable(
        f"{format_equation(rule)} does not unify at {list(pos)} of {format_equation(target)}"
    )


def _replace_everywhere(e: Equation, pattern: Term, image: Term) -> Equation:
    def go(t):
        if t == pattern:
            return image
        if isinstance(t, App):
            return App(t.op, tuple(go(a) for a in t.args))
        return t

    return Equation(go(e.lhs), go(e.rhs), e.positive)


def replace_in_term(t: Term, pos: Position, new: Term) -> Term:
    from .terms import replace_at

    return replace_at(t, pos, new)


def rename_apart_eq(e: Equation, avoid) -> Equation:
    return rename_apart(e, avoid)


def apply_equality_resolution(d: Equation):
    """Derive the contradiction marker from a disequation with unifiable sides."""
    if d.positive:
        raise CalculusError("equality resolution needs a disequation")
    if unify(d.lhs, d.rhs) is None:
        raise NotUnifiable(f"sides of {format_equation(d)} do not unify")
    return None  # the ⊥ marker


# ---------------------------------------------------------------------------
# Negation bridging (shared by the checker and the redirection pass)


def skolem_name_for(var: str) -> str:
    return f"sk_{var}"


def negate_to_clause(qe: QuantifiedEquation) -> Equation:
    """Negate a quantified equation into clause form.

    Universal variables become Skolem constants (named deterministically from
    the variable), existential variables become free clause variables, and the
    polarity flips.  This inverts the de-negation performed by redirection as
    long as variable names are preserved.
    """
    sigma = {
        name: Const(skolem_name_for(name), skolem=True)
        for q, name in qe.prefix
        if q == FORALL
    }
    return eq_substitute(qe.body, sigma).negated()


def clause_to_quantified(e: Equation) -> QuantifiedEquation:
    """Universal closure of a clause, free variables in occurrence order."""
    return forall_closure(e)


def denegate_clause(e: Equation, skolem_var_names: dict) -> QuantifiedEquation:
    """De-negate a (dis)equation clause from a refutation.

    Skolem constants turn into universally quantified variables using the
    supplied name map; the clause's own variables turn into existentials;
    the polarity flips.  Skolem quantifiers come first.
    """
    body = e
    for sk, var in skolem_var_names.items():
        body = _replace_const(body, sk, Var(var))
    body = body.negated()
    kinds = {var: FORALL for var in skolem_var_names.values()}
    ordered = eq_variables_in_order(body)
    sk_vars = [v for v in ordered if kinds.get(v) == FORALL]
    ex_vars = [v for v in ordered if v not in kinds]
    prefix = tuple((FORALL, v) for v in sk_vars) + tuple((EXISTS, v) for v in ex_vars)
    return QuantifiedEquation(prefix, body)


def _replace_const(e: Equation, name: str, new: Term) -> Equation:
    def go(t):
        if isinstance(t, Const) and t.name == name:
            return new
        if isinstance(t, App):
            return App(t.op, tuple(go(a) for a in t.args))
        return t

    return Equation(go(e.lhs), go(e.rhs), e.positive)


# ---------------------------------------------------------------------------
# The checker


@dataclass(frozen=True)
class StepReport:
    step_id: str
    ok: bool
    checked: bool = True
    reason: str = ""


@dataclass
class CheckReport:
    accepted: bool
    fully_certified: bool
    steps: list = field(default_factory=list)
    reason: str = ""

    @property
    def first_invalid(self):
        for r in self.steps:
            if r.checked and not r.ok:
                return r
        return None


def _all_equation_positions(e: Equation):
    for side in (0, 1):
        for p in positions(e.side(side)):
            yield (side,) + p


def _search_superposition(rule_stmt, target_stmt, conclusion, parallel):
    """Does some position/orientation derive conclusion from rule and target?"""
    rule = rule_stmt.body
    if not rule.positive:
        return False
    target = target_stmt.body
    for pos in _all_equation_positions(target):
        try:
            for derived in _superposition_candidates(rule, target, pos, parallel):
                if alpha_equal(forall_closure(derived), conclusion):
                    return True
        except (PositionIsVariable, BadPosition):
            continue
    return False


def _search_contrapositive(rule_stmt, source_stmt, conclusion_stmt, parallel):
    """Validate a redirected step by re-running the original inference.

    The original inference rewrote the negation of the conclusion into the
    negation of the source.  Universal variables re-skolemize by name, so the
    spine statements must use consistent names for corresponding quantifiers.
    """
    d_conc = negate_to_clause(conclusion_stmt)
    d_src = negate_to_clause(source_stmt)
    return _search_superposition(
        rule_stmt, forall_closure(d_conc), forall_closure(d_src), parallel
    )


class _Checker:
    def __init__(self, steps, axioms, conjecture):
        self.steps = list(steps)
        self.axioms = list(axioms)
        self.conjecture = conjecture
        self.by_id = {}
        self.reports = []

    def run(self) -> CheckReport:
        ok_all = True
        uncheckable = False
        contradiction_seen = False
        for index, step in enumerate(self.steps):
            if contradiction_seen:
                return self._reject(f"step {step.id} appears after the contradiction")
            checked, ok, why = True, False, ""
            if any(p not in self.by_id for p in step.premises):
                ok, why = False, "forward or dangling premise reference"
            else:
                try:
                    checked, ok, why = self.check_step(step)
                except CalculusError as exc:
                    ok, why = False, str(exc)
            self.reports.append(StepReport(step.id, ok, checked, why))
            if checked and not ok:
                ok_all = False
            if not checked:
                uncheckable = True
            if step.is_contradiction:
                contradiction_seen = True
            self.by_id[step.id] = step

        if not self.steps:
            return self._finish(False, "empty proof")
        final = self.steps[-1]
        if final.is_contradiction:
            goal_ok = True
        elif self.conjecture is not None:
            goal_ok = alpha_equal(final.statement, self.conjecture)
        else:
            goal_ok = False
        if not goal_ok:
            ok_all = False
            self.reports.append(
                StepReport("<final>", False, True, "final statement is not the conjecture")
            )
        return self._finish(ok_all, "" if ok_all else "invalid step", uncheckable)

    def _reject(self, reason):
        self.reports.append(StepReport("<structure>", False, True, reason))
        return CheckReport(False, False, self.reports, reason)

    def _finish(self, ok, reason, uncheckable=False):
        return CheckReport(ok, ok and not uncheckable, self.reports, reason)

    def check_step(self, step: ProofStep):
        kind = step.rule
        if kind is RuleKind.AXIOM:
            if step.premises:
                return True, False, "axiom step with premises"
            if any(alpha_equal(step.statement, ax) for ax in self.axioms):
                return True, True, ""
            return True, False, "axiom not among the declared axioms"
        if kind is RuleKind.NEGATED_CONJECTURE:
            return self.check_negated_conjecture(step)
        if kind is RuleKind.EQUALITY_RESOLUTION:
            return self.check_equality_resolution(step)
        if kind in (RuleKind.SUPERPOSITION, RuleKind.PARALLEL_SUPERPOSITION):
            return self.check_superposition(step, kind is RuleKind.PARALLEL_SUPERPOSITION)
        if kind is RuleKind.CHAIN:
            return self.check_chain(step)
        return False, True, ""  # unknown rule: recorded but not certified

    def check_negated_conjecture(self, step):
        if step.premises:
            return True, False, "negated conjecture with premises"
        if self.conjecture is None:
            return True, False, "no conjecture declared"
        if step.statement is None or step.statement.body.positive:
            return True, False, "negated conjecture must be a disequation"
        body = step.statement.body
        skolems = _ordered_skolems(body)
        names = fresh_names(eq_variables(body), count=len(skolems)) if skolems else iter(())
        # Rebuild the de-negated form and compare with the conjecture.
        restored = denegate_clause(body, dict(zip(skolems, names)))
        if alpha_equal(restored, self.conjecture):
            return True, True, ""
        return True, False, "does not negate the conjecture"

    def check_equality_resolution(self, step):
        if len(step.premises) != 1:
            return True, False, "equality resolution takes one premise"
        premise = self.by_id[step.premises[0]]
        if premise.statement is None or premise.statement.body.positive:
            return True, False, "premise is not a disequation"
        if not step.is_contradiction:
            return True, False, "conclusion must be the contradiction marker"
        body = premise.statement.body
        if unify(body.lhs, body.rhs) is None:
            return True, False, "disequation sides do not unify"
        return True, True, ""

    def check_superposition(self, step, parallel):
        if len(step.premises) not in (1, 2):
            return True, False, "superposition takes two premises"
        stmts = [self.by_id[p].statement for p in step.premises]
        if any(s is None for s in stmts):
            return True, False, "premise is the contradiction marker"
        if step.contrapositive:
            rule_stmt = stmts[0]
            source = step.tautology if len(step.premises) == 1 else stmts[1]
            if source is None:
                return True, False, "redirected step without a source premise"
            if _search_contrapositive(rule_stmt, source, step.statement, parallel):
                return True, True, ""
            # The producer may have recorded the premises in the other order.
            if len(step.premises) == 2 and _search_contrapositive(
                stmts[1], stmts[0], step.statement, parallel
            ):
                return True, True, ""
            return True, False, "no contrapositive inference derives this statement"
        if len(step.premises) != 2:
            return True, False, "superposition takes two premises"
        for rule_stmt, target_stmt in (stmts, stmts[::-1]):
            if _search_superposition(rule_stmt, target_stmt, step.statement, parallel):
                return True, True, ""
        return True, False, "no position/orientation derives this statement"

    def check_chain(self, step):
        if step.statement is None:
            return True, False, "chain must prove an equation"
        body = step.statement.body
        if not body.positive:
            return True, False, "chain must prove a positive equation"
        if not step.chain:
            if body.lhs == body.rhs:
                return True, True, ""
            return True, False, "empty chain for distinct sides"
        if step.chain[0].from_term == body.lhs:
            want_last = body.rhs
        elif step.chain[0].from_term == body.rhs:
            want_last = body.lhs
        else:
            return True, False, "chain does not start at either side"
        current = step.chain[0].from_term
        for link in step.chain:
            if link.from_term != current:
                return True, False, f"link from {link.from_term!r} breaks the chain"
            ref = self.by_id.get(link.rule_ref)
            if ref is None or ref.statement is None:
                return True, False, f"link cites unknown rule {link.rule_ref!r}"
            if not ref.statement.body.positive:
                return True, False, "chain rewrites need positive rules"
            if not rewrite_reaches(
                current, link.position, ref.statement.body, link.direction, link.to_term
            ):
                return True, False, "recorded target disagrees with the recomputed rewrite"
            current = link.to_term
        if current != want_last:
            return True, False, "chain does not reach the other side"
        return True, True, ""


def _ordered_skolems(e: Equation):
    out = []

    def go(t):
        if isinstance(t, Const) and t.skolem and t.name not in out:
            out.append(t.name)
        elif isinstance(t, App):
            for a in t.args:
                go(a)

    go(e.lhs)
    go(e.rhs)
    return out


def check_proof(steps, axioms, conjecture) -> CheckReport:
    """Certify a derivation against declared axioms and a conjecture.

    Every step is recomputed.  A proof is accepted iff all checkable steps
    validate, axiom steps match declared axioms, and the final statement is
    the conjecture (direct proofs) or the contradiction marker (refutations).
    Steps with unknown rule names downgrade the report to not fully certified
    without rejecting the proof.
    """
    return _Checker(steps, axioms, conjecture).run()
