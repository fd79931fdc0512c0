"""Per-lemma problem variants for the minimization pipeline.

Every non-axiom step of the baseline direct proof is a lemma (the conjecture
included).  Each lemma yields up to three kinds of problems:

* big-step: the original axioms alone against the lemma;
* small-step: the original axioms plus every earlier baseline lemma;
* abstracted: big-step with one two-variable application of the magma
  operator replaced by a fresh universally quantified variable.

Lemma axioms inside generated problems are named ``lem_<step id>`` so proofs
over them can be resolved back to the lemma table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .proofio import Abstraction, Problem, VariantKind
from .redirect import DirectProof
from .terms import (
    OP,
    App,
    QuantifiedEquation,
    Var,
    canonical_key,
    eq_variables,
    forall_closure,
    fresh_names,
    positions,
    replace_at,
    subterm_at,
)

LEMMA_AXIOM_PREFIX = "lem_"


def lemma_axiom_name(lemma_id: str) -> str:
    return f"{LEMMA_AXIOM_PREFIX}{lemma_id}"


@dataclass
class BestProof:
    proof: "DirectProof"
    length: int
    variant: VariantKind
    backend: str
    generalized: QuantifiedEquation | None = None
    backend_index: int = 0
    discovery: int = 0

    @property
    def statement_proved(self):
        return self.proof.final.statement


@dataclass
class LemmaRecord:
    id: str
    statement: QuantifiedEquation
    baseline_index: int
    best: BestProof | None = None
    problems: dict = field(default_factory=dict)  # VariantKind -> list[Problem]
    needs_reprove: bool = False


@dataclass
class LemmaTable:
    """Single-writer table of lemma records, in baseline order."""

    problem: Problem
    records: list

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, lemma_id):
        for r in self.records:
            if r.id == lemma_id:
                return r
        raise KeyError(lemma_id)

    def by_statement(self, statement) -> "LemmaRecord | None":
        matches = self.records_by_statement(statement)
        return matches[0] if matches else None

    def records_by_statement(self, statement) -> list:
        """All records whose statement is alpha-equal to the given one."""
        key = canonical_key(statement)
        return [r for r in self.records if canonical_key(r.statement) == key]

    @property
    def conjecture_record(self):
        return self.records[-1]


def table_from_baseline(problem: Problem, baseline: DirectProof) -> LemmaTable:
    records = [
        LemmaRecord(step.id, step.statement, i)
        for i, step in enumerate(baseline.lemma_steps())
    ]
    return LemmaTable(problem, records)


def make_big_step(axioms, lemma: LemmaRecord, base_name: str = "p") -> Problem:
    return Problem(
        f"{base_name}__{lemma.id}__big",
        tuple(axioms),
        (lemma_axiom_name(lemma.id), lemma.statement),
        VariantKind.BIG_STEP,
    )


def make_small_step(axioms, baseline: DirectProof, i: int, base_name: str = "p") -> Problem:
    """Axioms plus every lemma derived before lemma i in the baseline proof."""
    lemmas = baseline.lemma_steps()
    if not 0 <= i < len(lemmas):
        raise IndexError(f"lemma index {i} out of range")
    extra = tuple(
        (lemma_axiom_name(step.id), step.statement) for step in lemmas[:i]
    )
    target = lemmas[i]
    return Problem(
        f"{base_name}__{target.id}__small",
        tuple(axioms) + extra,
        (lemma_axiom_name(target.id), target.statement),
        VariantKind.SMALL_STEP,
    )


def abstraction_candidates(statement: QuantifiedEquation):
    """Positions of subterms that apply the operator to two variables.

    A candidate has no nested applications by construction.  Occurrences of
    the same subterm are deduplicated; only the first (left-hand side first,
    pre-order) is kept.
    """
    out = []
    seen = set()
    for side in (0, 1):
        term = statement.body.side(side)
        for pos in positions(term):
            sub = subterm_at(term, pos)
            if (
                isinstance(sub, App)
                and sub.op == OP
                and len(sub.args) == 2
                and all(isinstance(a, Var) for a in sub.args)
            ):
                if sub in seen:
                    continue
                seen.add(sub)
                out.append((pos, side))
    return out


def abstract_statement(statement: QuantifiedEquation, pos, side):
    """Replace the subterm at (pos, side) by a fresh universal variable."""
    if not statement.is_universal:
        raise ValueError("abstraction needs a universally quantified lemma")
    body = statement.body
    replaced = subterm_at(body.side(side), pos)
    fresh = next(fresh_names(eq_variables(body)))
    new_side = replace_at(body.side(side), pos, Var(fresh))
    sides = [body.lhs, body.rhs]
    sides[side] = new_side
    new_body = type(body)(sides[0], sides[1], body.positive)
    return forall_closure(new_body), Abstraction(side, tuple(pos), fresh, replaced)


def make_abstracted(axioms, lemma: LemmaRecord, base_name: str = "p"):
    """One problem per abstraction candidate; empty list when there are none."""
    out = []
    for k, (pos, side) in enumerate(abstraction_candidates(lemma.statement)):
        generalized, info = abstract_statement(lemma.statement, pos, side)
        out.append(
            Problem(
                f"{base_name}__{lemma.id}__abs{k}",
                tuple(axioms),
                (lemma_axiom_name(lemma.id), generalized),
                VariantKind.ABSTRACTED,
                abstraction=info,
            )
        )
    return out


def generate_problems(table: LemmaTable, baseline: DirectProof, variants) -> None:
    """Populate each record's problem lists for the requested variant kinds."""
    axioms = table.problem.axioms
    base = table.problem.name
    for record in table:
        record.problems = {}
        if VariantKind.BIG_STEP in variants:
            record.problems[VariantKind.BIG_STEP] = [make_big_step(axioms, record, base)]
        if VariantKind.SMALL_STEP in variants:
            record.problems[VariantKind.SMALL_STEP] = [
                make_small_step(axioms, baseline, record.baseline_index, base)
            ]
        if VariantKind.ABSTRACTED in variants:
            record.problems[VariantKind.ABSTRACTED] = make_abstracted(axioms, record, base)


def propagate_generalization(table: LemmaTable, generalized: LemmaRecord) -> list:
    """Swap a generalized lemma into every small-step problem that carries the
    original as an axiom, and mark those problems for re-proving.

    Returns the ids of the affected records.
    """
    if generalized.best is None or generalized.best.generalized is None:
        raise ValueError(f"record {generalized.id} has no winning generalization")
    new_statement = generalized.best.generalized
    axiom_name = lemma_axiom_name(generalized.id)
    touched = []
    for record in table:
        if record.baseline_index <= generalized.baseline_index:
            continue
        updated = []
        for problem in record.problems.get(VariantKind.SMALL_STEP, []):
            names = [n for n, _ in problem.axioms]
            if axiom_name not in names:
                updated.append(problem)
                continue
            new_axioms = tuple(
                (n, new_statement if n == axiom_name else qe) for n, qe in problem.axioms
            )
            updated.append(
                Problem(problem.name, new_axioms, problem.conjecture, problem.variant)
            )
            if record.id not in touched:
                touched.append(record.id)
                record.needs_reprove = True
        if VariantKind.SMALL_STEP in record.problems:
            record.problems[VariantKind.SMALL_STEP] = updated
    return touched
