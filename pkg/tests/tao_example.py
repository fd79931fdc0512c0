"""The Tao-challenge proof (650 => 448) rebuilt at full fidelity.

Seven lemmas derive by (parallel) superposition from the recorded premise
pairs; two lemmas and the goal are equality chains over the earlier lemmas.
Each chain is stored as its term sequence; link positions and directions are
recovered by search and the whole proof must pass the checker.  Total length:
7 derivation steps + 13 chain links.
"""

from eqmin.calculus import (
    ChainLink,
    ProofStep,
    RuleKind,
    check_proof,
)
from eqmin.redirect import DirectProof
from eqmin.terms import (
    BadPosition,
    NoMatch,
    parse_quantified,
    parse_term,
    positions,
    rewrite_reaches,
)

AXIOM_650 = "x = x◇(y◇((z◇x)◇y))"
GOAL_448 = "x = x◇(y◇(z◇(x◇z)))"

LEMMAS = {
    "lemma1": "x◇((y◇z)◇x) = (x◇((y◇z)◇x))◇(w◇(z◇w))",
    "lemma2": "x◇((y◇((z◇w)◇y))◇x) = (x◇((y◇((z◇w)◇y))◇x))◇(v◇((u◇(w◇u))◇v))",
    "lemma3": "x◇(y◇x) = (x◇(y◇x))◇(z◇((w◇((v◇y)◇w))◇z))",
    "lemma4": "x◇(y◇x) = (x◇(y◇x))◇((z◇(y◇z))◇(w◇((v◇y)◇w)))",
    "lemma5": "x◇((y◇((z◇y)◇y))◇x) = (x◇((y◇((z◇y)◇y))◇x))◇(w◇((y◇((z◇y)◇y))◇w))",
    "lemma6": "(x◇((y◇x)◇x))◇z = ((x◇((y◇x)◇x))◇z)◇((w◇((x◇((y◇x)◇x))◇w))◇(z◇((x◇((y◇x)◇x))◇z)))",
    "lemma7": "(x◇((y◇x)◇x))◇z = ((x◇((y◇x)◇x))◇z)◇(w◇((x◇((y◇x)◇x))◇w))",
    "lemma8": "((x◇((y◇x)◇x))◇z)◇((x◇((y◇x)◇x))◇w) = (x◇((y◇x)◇x))◇z",
    "lemma9": "x◇((y◇((z◇y)◇y))◇x) = x",
}

# (rule premise, target premise, equation position, parallel?)
DERIVATIONS = {
    "lemma1": ("op_law", "op_law", (1, 1, 1, 0), False),
    "lemma2": ("lemma1", "lemma1", (0, 1, 0), True),
    "lemma3": ("lemma1", "op_law", (1, 1, 1, 0), False),
    "lemma4": ("lemma1", "lemma3", (1, 1, 1), False),
    "lemma5": ("lemma2", "lemma4", (1, 1), False),
    "lemma6": ("lemma5", "op_law", (1, 1, 1), False),
    "lemma7": ("lemma5", "lemma6", (1, 1), False),
}

_T = "(x◇((y◇x)◇x))"
_X = f"(({_T}◇w)◇(w◇({_T}◇w)))"

CHAINS = {
    "lemma8": (
        ["op_law", "lemma7"],
        [
            f"({_T}◇z)◇({_T}◇w)",
            f"({_T}◇z)◇(({_T}◇w)◇(({_T}◇({_T}◇w))◇((w◇({_T}◇w))◇({_T}◇({_T}◇w)))))",
            f"({_T}◇z)◇(({_T}◇w)◇(({_T}◇({_T}◇w))◇((w◇({_T}◇w))◇({_T}◇{_X}))))",
            f"({_T}◇z)◇(({_T}◇w)◇(({_T}◇({_T}◇w))◇((w◇({_T}◇w))◇(({_T}◇{_X})◇({_X}◇({_T}◇{_X}))))))",
            f"({_T}◇z)◇(({_T}◇w)◇(({_T}◇({_T}◇w))◇(w◇({_T}◇w))))",
            f"({_T}◇z)◇(({_T}◇w)◇({_T}◇({_T}◇w)))",
            f"{_T}◇z",
        ],
    ),
    "lemma9": (
        ["lemma8", "op_law"],
        [
            "x◇((y◇((z◇y)◇y))◇x)",
            "x◇(((y◇((z◇y)◇y))◇x)◇((y◇((z◇y)◇y))◇x))",
            "x◇(((y◇((z◇y)◇y))◇x)◇(((y◇((z◇y)◇y))◇x)◇((y◇((z◇y)◇y))◇x)))",
            "x",
        ],
    ),
    "goal": (
        ["lemma9", "lemma5"],
        [
            "x",
            "x◇((x◇((y◇x)◇x))◇x)",
            "(x◇((x◇((y◇x)◇x))◇x))◇((y◇(z◇(x◇z)))◇((x◇((y◇x)◇x))◇(y◇(z◇(x◇z)))))",
            "x◇((y◇(z◇(x◇z)))◇((x◇((y◇x)◇x))◇(y◇(z◇(x◇z)))))",
            "x◇(y◇(z◇(x◇z)))",
        ],
    ),
}


def _find_link(src, dst, rules):
    """One rewrite turning src into dst using one of the named rules."""
    for name, body in rules:
        for direction in ("l2r", "r2l"):
            for pos in positions(src):
                if rewrite_reaches(src, pos, body, direction, dst):
                    return ChainLink(src, name, direction, pos, dst)
    raise AssertionError(f"no link from {src!r} to {dst!r}")


def build_proof() -> DirectProof:
    statements = {"op_law": parse_quantified(AXIOM_650)}
    for name, text in LEMMAS.items():
        statements[name] = parse_quantified(text)
    statements["goal"] = parse_quantified(GOAL_448)

    steps = [ProofStep("op_law", statements["op_law"], RuleKind.AXIOM)]
    for name, (rule, target, pos, parallel) in DERIVATIONS.items():
        kind = RuleKind.PARALLEL_SUPERPOSITION if parallel else RuleKind.SUPERPOSITION
        steps.append(ProofStep(name, statements[name], kind, (rule, target)))
    for name, (cited, term_texts) in CHAINS.items():
        terms = [parse_term(t) for t in term_texts]
        rules = [(c, statements[c].body) for c in cited]
        links = tuple(
            _find_link(src, dst, rules) for src, dst in zip(terms, terms[1:])
        )
        used = tuple(dict.fromkeys(l.rule_ref for l in links))
        steps.append(ProofStep(name, statements[name], RuleKind.CHAIN, used, links))

    proof = DirectProof(steps, origin="segment")
    report = check_proof(
        proof.steps, [statements["op_law"]], statements["goal"]
    )
    if not report.accepted:
        bad = report.first_invalid
        raise AssertionError(f"reconstruction invalid at {bad.step_id}: {bad.reason}")
    proof.certified = True
    return proof
