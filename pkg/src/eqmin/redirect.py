"""Turning refutations into direct proofs.

A unit-equality refutation rewrites the negated conjecture along a single
spine of disequations until both sides unify.  Reading that spine backwards,
with every statement de-negated and re-quantified, gives a forward derivation
of the conjecture.  Inferences on the positive side are copied unchanged;
only the disequation spine is flipped.  The final equality resolution becomes
a tautology, which is attached to its flipped step as an annotation instead
of a proof line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .calculus import ProofStep, RuleKind, denegate_clause
from .proofio import ParsedDerivation
from .terms import eq_variables, fresh_names


class RedirectError(Exception):
    pass


class NotARefutation(RedirectError):
    pass


class MultipleGoalPaths(RedirectError):
    """The disequations do not form a single linear spine."""


@dataclass
class DirectProof:
    """A forward derivation: axioms first, conjecture last, no disequations."""

    steps: list
    origin: str = "baseline"
    certified: bool = False

    def step_map(self):
        return {s.id: s for s in self.steps}

    @property
    def final(self) -> ProofStep:
        return self.steps[-1]

    def axiom_steps(self):
        return [s for s in self.steps if s.rule is RuleKind.AXIOM]

    def lemma_steps(self):
        """Non-axiom steps; their statements are the proof's lemmas."""
        return [s for s in self.steps if s.rule is not RuleKind.AXIOM]


def step_cost(step: ProofStep) -> int:
    if step.rule in (RuleKind.AXIOM, RuleKind.NEGATED_CONJECTURE):
        return 0
    if step.rule is RuleKind.CHAIN:
        return len(step.chain)
    return 1


def proof_length(proof) -> int:
    """Steps for derivations, cumulative chain links for chain proofs."""
    steps = proof.steps if isinstance(proof, DirectProof) else proof
    return sum(step_cost(s) for s in steps)


def _spine(derivation: ParsedDerivation):
    """Return the disequation steps from the negated conjecture to the last
    one, plus the rule premise id used at each spine step."""
    by_id = derivation.step_map()
    steps = derivation.steps
    if not steps or not steps[-1].is_contradiction:
        raise NotARefutation("derivation does not end in the contradiction")
    bottom = steps[-1]
    if any(s.is_contradiction for s in steps[:-1]):
        raise NotARefutation("contradiction derived before the final step")
    if len(bottom.premises) != 1:
        raise NotARefutation("the contradiction step must have one premise")

    disequations = {
        s.id for s in steps if s.statement is not None and not s.statement.body.positive
    }
    spine = []
    rules = []
    current = by_id[bottom.premises[0]]
    while True:
        spine.append(current)
        if current.rule is RuleKind.NEGATED_CONJECTURE:
            break
        neg_premises = [p for p in current.premises if p in disequations]
        pos_premises = [p for p in current.premises if p not in disequations]
        if len(neg_premises) != 1:
            raise MultipleGoalPaths(
                f"step {current.id} has {len(neg_premises)} disequation premises"
            )
        rules.append(pos_premises[0] if pos_premises else None)
        current = by_id[neg_premises[0]]
    spine.reverse()
    rules.reverse()
    on_spine = {s.id for s in spine}
    stray = disequations - on_spine
    if stray:
        raise MultipleGoalPaths(f"disequations off the spine: {sorted(stray)}")
    if sum(1 for s in steps if s.rule is RuleKind.NEGATED_CONJECTURE) != 1:
        raise MultipleGoalPaths("expected exactly one negated conjecture")
    return spine, rules


def to_direct(derivation: ParsedDerivation, origin: str = "baseline") -> DirectProof:
    """Convert a refutation into a direct proof of the original conjecture.

    Skolem constants on the spine are renamed to one fresh variable each,
    consistently across all spine statements, so the flipped steps stay
    checkable against each other.
    """
    spine, rules = _spine(derivation)

    taken = set()
    skolems = []
    for s in spine:
        body = s.statement.body
        taken |= eq_variables(body)
        for t in (body.lhs, body.rhs):
            from .terms import skolem_constants

            for name in skolem_constants(t):
                if name not in skolems:
                    skolems.append(name)
    names = fresh_names(taken, count=len(skolems)) if skolems else iter(())
    sk_map = dict(zip(skolems, names))

    denegated = [denegate_clause(s.statement.body, sk_map) for s in spine]

    new_id = _id_allocator()
    id_map = {}
    out = []
    for s in derivation.steps:
        if s.rule is RuleKind.AXIOM:
            nid = new_id()
            id_map[s.id] = nid
            out.append(ProofStep(nid, s.statement, RuleKind.AXIOM))
    for s in derivation.steps:
        if s.rule in (RuleKind.AXIOM, RuleKind.NEGATED_CONJECTURE, RuleKind.EQUALITY_RESOLUTION):
            continue
        if s.statement is not None and not s.statement.body.positive:
            continue  # spine steps are emitted flipped, below
        nid = new_id()
        id_map[s.id] = nid
        out.append(
            ProofStep(
                nid,
                s.statement,
                s.rule,
                tuple(id_map[p] for p in s.premises),
                rule_name=s.rule_name,
            )
        )

    # Flip the spine: the step that derived spine[i+1] from spine[i] becomes a
    # step deriving denegated[i] from denegated[i+1].
    k = len(spine) - 1
    previous_flipped = None  # id of the step proving denegated[i+1]
    for i in range(k - 1, -1, -1):
        producing = spine[i + 1]  # refutation step with conclusion spine[i+1]
        rule_id = rules[i]
        nid = new_id()
        premises = (id_map[rule_id],) if rule_id is not None else ()
        tautology = None
        if previous_flipped is None:
            tautology = denegated[k]
        else:
            premises = premises + (previous_flipped,)
        out.append(
            ProofStep(
                nid,
                denegated[i],
                producing.rule,
                premises,
                rule_name=producing.rule_name,
                contrapositive=True,
                tautology=tautology,
            )
        )
        previous_flipped = nid

    if k == 0:
        # The negated conjecture resolved immediately: the conjecture holds by
        # reflexivity, which an empty chain expresses.
        body = denegated[0].body
        if body.lhs != body.rhs:
            raise NotARefutation("irreflexive conjecture refuted without rewriting")
        out.append(ProofStep(new_id(), denegated[0], RuleKind.CHAIN))

    return DirectProof(out, origin)


def _id_allocator():
    counter = [0]

    def next_id():
        counter[0] += 1
        return str(counter[0])

    return next_id
