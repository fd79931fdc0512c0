"""Rendering final proofs: native JSON and two Lean-style texts.

The calc style declares one ``have lemmaN`` per step and expands every
equality chain into a ``calc`` block, one line per rewrite, each line closed
by an automation call naming the premises it may use.  The compact style
proves each lemma with a single automation call.  Neither output is
elaborated here; they are deterministic renderings of the checked proof.
"""

from __future__ import annotations

import enum

from .calculus import ProofStep, RuleKind
from .proofio import write_native_steps
from .redirect import DirectProof
from .terms import OP, App, QuantifiedEquation, Term, Var


class EmitError(Exception):
    pass


class UncertifiedProof(EmitError):
    pass


class RenderStyle(enum.Enum):
    NATIVE = "native"
    LEAN_CALC = "lean_calc"
    LEAN_COMPACT = "lean_compact"


def emit(proof: DirectProof, style: RenderStyle, theorem_name: str = "theorem_min") -> str:
    """Serialize a certified proof in the requested style."""
    if not proof.certified:
        raise UncertifiedProof("emit requires a proof that passed the checker")
    _assert_all_lemmas_used(proof)
    if style is RenderStyle.NATIVE:
        return write_native_steps(proof.steps, proof.origin)
    if style is RenderStyle.LEAN_CALC:
        return _lean(proof, theorem_name, compact=False)
    if style is RenderStyle.LEAN_COMPACT:
        return _lean(proof, theorem_name, compact=True)
    raise ValueError(f"unknown style {style!r}")


def _assert_all_lemmas_used(proof: DirectProof):
    used = set()
    for step in proof.steps:
        used.update(step.premises)
        used.update(l.rule_ref for l in step.chain)
    for step in proof.steps[:-1]:
        if step.id not in used:
            raise EmitError(f"unreferenced step {step.id}; prune before emitting")


# ---------------------------------------------------------------------------
# Lean rendering


def _lean_term(t: Term) -> str:
    if isinstance(t, (Var,)):
        return t.name
    if isinstance(t, App) and t.op == OP:
        return f"{_lean_atom(t.args[0])}{OP}{_lean_atom(t.args[1])}"
    if isinstance(t, App):
        return f"{t.op} {' '.join(_lean_atom(a) for a in t.args)}"
    return t.name


def _lean_atom(t: Term) -> str:
    s = _lean_term(t)
    if isinstance(t, App):
        return f"({s})"
    return s


def _binders(qe: QuantifiedEquation) -> str:
    names = [n for q, n in qe.prefix]
    return f" ({' '.join(names)} : G)" if names else ""


def _statement(qe: QuantifiedEquation) -> str:
    return f"{_lean_term(qe.body.lhs)} = {_lean_term(qe.body.rhs)}"


def _forall(qe: QuantifiedEquation) -> str:
    names = [n for _, n in qe.prefix]
    if not names:
        return _statement(qe)
    return f"∀ {' '.join(names)} : G, {_statement(qe)}"


class _LeanWriter:
    def __init__(self, proof: DirectProof, theorem_name: str, compact: bool):
        self.proof = proof
        self.theorem_name = theorem_name
        self.compact = compact
        self.names = {}
        self.lines = []

    def run(self) -> str:
        axioms = [s for s in self.proof.steps if s.rule is RuleKind.AXIOM]
        lemmas = [s for s in self.proof.steps if s.rule is not RuleKind.AXIOM]
        for i, step in enumerate(axioms):
            self.names[step.id] = "op_law" if len(axioms) == 1 else f"op_law{i + 1}"
        for i, step in enumerate(lemmas[:-1]):
            self.names[step.id] = f"lemma{i + 1}"
        final = lemmas[-1]
        self.names[final.id] = "goal"

        self.lines.append(f"theorem {self.theorem_name} (G : Type _) [Magma G]")
        for s in axioms:
            self.lines.append(f"    ({self.names[s.id]} : {_forall(s.statement)})")
        self.lines.append(f"    : {_forall(final.statement)} := by")
        for step in lemmas[:-1]:
            self.emit_step(step, final=False)
        self.emit_step(final, final=True)
        return "\n".join(self.lines) + "\n"

    def premises_of(self, step: ProofStep):
        refs = list(step.premises) + [l.rule_ref for l in step.chain]
        seen = []
        for r in refs:
            name = self.names[r]
            if name not in seen:
                seen.append(name)
        return seen

    def emit_step(self, step: ProofStep, final: bool):
        name = self.names[step.id]
        stmt = step.statement
        binder = _binders(stmt)
        if final:
            names = [n for _, n in stmt.prefix]
            if names:
                self.lines.append(f"  intro {' '.join(names)}")
        else:
            self.lines.append(f"  have {name}{binder} : {_statement(stmt)} := by")
        indent = "  " if final else "    "
        if step.rule is RuleKind.CHAIN and step.chain and not self.compact:
            self.emit_calc(step, indent)
        else:
            premises = self.premises_of(step)
            self.lines.append(f"{indent}duper [{', '.join(premises)}]")

    def emit_calc(self, step: ProofStep, indent: str):
        self.lines.append(f"{indent}calc")
        first = step.chain[0]
        lhs = _lean_term(first.from_term)
        for i, link in enumerate(step.chain):
            rule = self.names[link.rule_ref]
            rhs = _lean_term(link.to_term)
            head = lhs if i == 0 else "_"
            self.lines.append(f"{indent}  {head} = {rhs} := by duper [{rule}]")
        # A chain may prove the statement right-to-left; Lean's calc follows
        # the chain, so close with the recorded orientation either way.


def _lean(proof: DirectProof, theorem_name: str, compact: bool) -> str:
    text = _LeanWriter(proof, theorem_name, compact).run()
    _lint_balance(text)
    return text


def _lint_balance(text: str):
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if depth < 0:
            raise EmitError("unbalanced parentheses in emitted text")
    if depth != 0:
        raise EmitError("unbalanced parentheses in emitted text")
