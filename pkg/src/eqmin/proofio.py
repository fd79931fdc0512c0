"""Problem files and proof transcripts.

Three text formats live here:

* TPTP first-order problems (read and write).  The magma operator is
  serialized as the binary function symbol ``m``.
* Saturation derivations in an annotated-clause (TSTP-like) dialect, pinned
  against the golden transcripts bundled with the test suite.
* Structured chain proofs in the lemma/goal layout of completion provers,
  same pinning.

Plus the native JSON proof schema (see ``write_native_steps``), which
round-trips losslessly up to alpha-equivalence.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .calculus import ChainLink, ProofStep, RuleKind
from .terms import (
    OP,
    App,
    Const,
    Equation,
    ParseError,
    QuantifiedEquation,
    Term,
    Var,
    forall_closure,
    format_term,
    match_term,
    parse_term,
    positions,
    rename_apart,
    rewrite_at,
    rewrite_reaches,
    variables,
)

TPTP_OP_NAME = "m"


class UnsupportedLogic(Exception):
    """Input steps outside the unit-equality fragment."""


class DanglingReference(Exception):
    """A chain cites an axiom or lemma that was never declared."""


class VariantKind(enum.Enum):
    BIG_STEP = "bigstep"
    SMALL_STEP = "smallstep"
    ABSTRACTED = "abstracted"
    BASELINE = "baseline"
    SEGMENT = "segment"


@dataclass(frozen=True)
class Abstraction:
    """Where an abstracted conjecture replaced a subterm by a fresh variable."""

    side: int
    position: tuple
    fresh_variable: str
    replaced: Term


@dataclass(frozen=True)
class Problem:
    name: str
    axioms: tuple  # of (name, QuantifiedEquation)
    conjecture: tuple  # (name, QuantifiedEquation)
    variant: VariantKind = VariantKind.BASELINE
    abstraction: Abstraction | None = None

    def __post_init__(self):
        names = [n for n, _ in self.axioms]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate axiom names: {names}")

    def axiom_statements(self):
        return [qe for _, qe in self.axioms]


@dataclass
class ParsedDerivation:
    steps: list
    source: str  # "saturation" or "completion"
    preprocessing_ids: set = field(default_factory=set)

    def step_map(self):
        return {s.id: s for s in self.steps}


def derivation_length(d: ParsedDerivation) -> int:
    """Proof length under the per-style metric.

    Saturation: inference steps that survive redirection (equality resolution
    of the final tautology is dropped there, so it is not counted).
    Completion: cumulative number of equalities in the chains.
    """
    if d.source == "completion":
        return sum(len(s.chain) for s in d.steps if s.rule is RuleKind.CHAIN)
    return sum(
        1
        for s in d.steps
        if s.rule
        not in (RuleKind.AXIOM, RuleKind.NEGATED_CONJECTURE, RuleKind.EQUALITY_RESOLUTION)
    )


def count_inference_steps(d: ParsedDerivation) -> int:
    """All inference steps, equality resolutions included."""
    return sum(
        1 for s in d.steps if s.rule not in (RuleKind.AXIOM, RuleKind.NEGATED_CONJECTURE)
    )


# ---------------------------------------------------------------------------
# TPTP problems


def _tptp_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name.upper()
    if isinstance(t, Const):
        return t.name
    op = TPTP_OP_NAME if t.op == OP else t.op
    return f"{op}({','.join(_tptp_term(a) for a in t.args)})"


def _tptp_formula(qe: QuantifiedEquation) -> str:
    eq = qe.body
    op = "=" if eq.positive else "!="
    atom = f"{_tptp_term(eq.lhs)} {op} {_tptp_term(eq.rhs)}"
    if not qe.prefix:
        return atom
    if not qe.is_universal:
        raise ValueError("TPTP output requires purely universal formulas")
    bound = ",".join(name.upper() for _, name in qe.prefix)
    return f"![{bound}]: {atom}"


def write_tptp(problem: Problem) -> str:
    """Serialize a problem deterministically, one formula per line."""
    lines = []
    for name, qe in problem.axioms:
        lines.append(f"fof({name}, axiom, {_tptp_formula(qe)}).")
    cname, cqe = problem.conjecture
    lines.append(f"fof({cname}, conjecture, {_tptp_formula(cqe)}).")
    return "\n".join(lines) + "\n"


class _TptpScanner:
    """Token scanner with line/column tracking."""

    TOKEN = re.compile(
        r"\s+|%[^\n]*|(?P<name>[A-Za-z0-9_$]+|'[^']*')|(?P<op>!=|=>|\?\[|!\[|[()\[\],:.=~|&])"
    )

    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        line, bol = 1, 0
        while pos < len(text):
            m = self.TOKEN.match(text, pos)
            if not m:
                raise ParseError(f"bad character {text[pos]!r}", line, pos - bol)
            line += text.count("\n", pos, m.end())
            nl = text.rfind("\n", pos, m.end())
            if nl >= 0:
                bol = nl + 1
            if m.lastgroup:
                self.tokens.append((m.group(), line, m.start() - bol))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self):
        if self.i >= len(self.tokens):
            last = self.tokens[-1] if self.tokens else ("", 1, 0)
            raise ParseError("unexpected end of input", last[1], last[2])
        tok = self.tokens[self.i]
        self.i += 1
        return tok[0]

    def expect(self, want):
        tok = self.next()
        if tok != want:
            where = self.tokens[self.i - 1]
            raise ParseError(f"expected {want!r}, found {tok!r}", where[1], where[2])
        return tok

    def here(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i][1], self.tokens[self.i][2]
        return 1, 0


def _parse_tptp_term(sc: _TptpScanner) -> Term:
    name = sc.next()
    if not re.fullmatch(r"[A-Za-z0-9_$]+", name or ""):
        line, col = sc.here()
        raise ParseError(f"expected a term, found {name!r}", line, col)
    if sc.peek() == "(":
        sc.next()
        args = [_parse_tptp_term(sc)]
        while sc.peek() == ",":
            sc.next()
            args.append(_parse_tptp_term(sc))
        sc.expect(")")
        op = OP if name == TPTP_OP_NAME else name
        return App(op, tuple(args))
    if name[0].isupper():
        return Var(name.lower())
    return Const(name, skolem=name.startswith("sk"))


def _parse_tptp_atom(sc: _TptpScanner) -> Equation:
    lhs = _parse_tptp_term(sc)
    op = sc.next()
    if op == "=":
        positive = True
    elif op == "!=":
        positive = False
    else:
        line, col = sc.here()
        raise ParseError(f"expected an equality, found {op!r}", line, col)
    rhs = _parse_tptp_term(sc)
    return Equation(lhs, rhs, positive)


def _parse_tptp_formula(sc: _TptpScanner) -> QuantifiedEquation:
    negate = False
    parens = 0
    while sc.peek() == "~":
        sc.next()
        negate = not negate
        if sc.peek() == "(":
            sc.next()
            parens += 1
    if sc.peek() == "![" or sc.peek() == "?[":
        if sc.next() == "?[":
            raise UnsupportedLogic("existential quantifiers are not unit-equality input")
        sc.next()
        while sc.peek() == ",":
            sc.next()
            sc.next()
        sc.expect("]")
        sc.expect(":")
    paren_inner = sc.peek() == "("
    if paren_inner:
        sc.next()
    eq = _parse_tptp_atom(sc)
    if paren_inner:
        sc.expect(")")
    for _ in range(parens):
        sc.expect(")")
    if sc.peek() in ("|", "&", "=>"):
        raise UnsupportedLogic("non-unit clause")
    if negate:
        eq = eq.negated()
    # cnf clauses leave variables free; either way the closure binds them all.
    return forall_closure(eq)


def parse_tptp_problem(text: str, name: str = "problem") -> Problem:
    """Parse a unit-equality TPTP problem written in fof form."""
    axioms = []
    conjecture = None
    for kind, label, role, formula, _ in _annotated_formulas(text):
        if role in ("axiom", "hypothesis"):
            axioms.append((label, formula))
        elif role == "conjecture":
            if conjecture is not None:
                raise ParseError("more than one conjecture")
            conjecture = (label, formula)
        else:
            raise ParseError(f"unexpected role {role!r} in a problem file")
    if conjecture is None:
        raise ParseError("problem has no conjecture")
    return Problem(name, tuple(axioms), conjecture)


def _annotated_formulas(text: str):
    """Yield (kw, name, role, formula, source) for each fof/cnf line."""
    sc = _TptpScanner(text)
    if not sc.tokens:
        raise ParseError("empty input")
    while sc.peek() is not None:
        kw = sc.next()
        if kw not in ("fof", "cnf"):
            line, col = sc.here()
            raise ParseError(f"expected fof or cnf, found {kw!r}", line, col)
        sc.expect("(")
        label = sc.next()
        sc.expect(",")
        role = sc.next()
        sc.expect(",")
        if sc.peek() == "$false":
            sc.next()
            formula = None
        else:
            formula = _parse_tptp_formula(sc)
        source = None
        if sc.peek() == ",":
            sc.next()
            source = _parse_source(sc)
        sc.expect(")")
        sc.expect(".")
        yield kw, label, role, formula, source


def _parse_source(sc: _TptpScanner):
    """Parse the source annotation, keeping only rule name and premise ids.

    inference(rule, [options...], [premises...]) yields (rule, premises);
    anything else (file(...), names) yields (head, []).
    """
    head = sc.next()
    if sc.peek() != "(":
        return (head, [])
    sc.expect("(")
    depth = 1
    rule = None
    premises = []
    groups_seen = 0  # top-level [...] lists inside inference(...)
    bracket = 0
    while depth > 0:
        tok = sc.next()
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
        elif tok == "[" and depth == 1:
            bracket += 1
            groups_seen += 1
        elif tok == "]" and depth == 1:
            bracket -= 1
        elif head == "inference":
            if rule is None and bracket == 0 and tok != ",":
                rule = tok
            elif bracket == 1 and groups_seen == 2 and depth == 1 and tok != ",":
                premises.append(tok)
    if head == "inference":
        return (rule or "", premises)
    return (head, [])


_PREPROCESSING_RULES = {
    "cnf_transformation",
    "negate_conjecture",
    "negated_conjecture",
    "skolemisation",
    "skolemization",
    "ennf_transformation",
    "nnf_transformation",
    "rectify",
    "flattening",
    "variable_rename",
    "fof_nnf",
    "fof_simplification",
    "split_conjunct",
    "assume_negation",
}

_RULE_KINDS = {
    "superposition": RuleKind.SUPERPOSITION,
    "parallel_superposition": RuleKind.PARALLEL_SUPERPOSITION,
    "paramodulation": RuleKind.SUPERPOSITION,
    "equality_resolution": RuleKind.EQUALITY_RESOLUTION,
    "reflexivity_resolution": RuleKind.EQUALITY_RESOLUTION,
}


def parse_saturation_proof(text: str) -> ParsedDerivation:
    """Parse a refutation transcript of annotated cnf/fof formulas.

    fof lines and clausification/Skolemization chains are recorded as
    preprocessing and folded away; their ids never appear as premises of the
    returned steps.  Unknown inference rule names are preserved verbatim and
    the step is marked uncheckable.
    """
    steps = []
    preprocessing = set()
    known = set()
    for kw, label, role, formula, source in _annotated_formulas(text):
        rule_name, premises = source if source else ("", [])
        if kw == "fof":
            preprocessing.add(label)
            continue
        if formula is not None and not formula.is_universal:
            raise UnsupportedLogic("quantified clause in a derivation")
        premises = tuple(p for p in premises if p not in preprocessing)
        if role == "axiom":
            step = ProofStep(label, formula, RuleKind.AXIOM)
        elif role == "negated_conjecture" and (
            rule_name in _PREPROCESSING_RULES or not premises
        ):
            step = ProofStep(label, formula, RuleKind.NEGATED_CONJECTURE)
        elif rule_name in _PREPROCESSING_RULES:
            preprocessing.add(label)
            continue
        else:
            kind = _RULE_KINDS.get(rule_name, RuleKind.UNKNOWN)
            step = ProofStep(label, formula, kind, premises, rule_name=rule_name)
        if any(p not in known for p in step.premises):
            raise ParseError(f"step {label} references an unknown premise")
        known.add(label)
        steps.append(step)
    if not steps:
        raise ParseError("no derivation steps found")
    return ParsedDerivation(steps, "saturation", preprocessing)


def write_saturation_transcript(problem: Problem, steps) -> str:
    """Render a refutation in the same dialect parse_saturation_proof reads.

    Used for golden self-fixtures and the bundled corpus baselines.
    """
    lines = []
    fof_ids = {}
    for name, qe in problem.axioms:
        fof_ids[name] = f"f_{name}"
        lines.append(f"fof(f_{name}, axiom, {_tptp_formula(qe)}, file('{problem.name}.p', {name})).")
    cname, cqe = problem.conjecture
    lines.append(f"fof(f_goal, conjecture, {_tptp_formula(cqe)}, file('{problem.name}.p', {cname})).")
    lines.append("fof(f_neg, negated_conjecture, ~({0}), inference(negate_conjecture, [], [f_goal])).".format(_tptp_formula(cqe)))
    axiom_origin = {}
    for name, qe in problem.axioms:
        axiom_origin[_canon(qe)] = fof_ids[name]
    for step in steps:
        if step.statement is None:
            body = "$false"
        else:
            body = _clause_formula(step.statement)
        if step.rule is RuleKind.AXIOM:
            origin = axiom_origin.get(_canon(step.statement), "f_unknown")
            src = f"inference(cnf_transformation, [], [{origin}])"
            role = "axiom"
        elif step.rule is RuleKind.NEGATED_CONJECTURE:
            src = "inference(cnf_transformation, [], [f_neg])"
            role = "negated_conjecture"
        else:
            rule = step.rule_name or step.rule.value
            src = f"inference({rule}, [], [{', '.join(step.premises)}])"
            role = "plain"
        lines.append(f"cnf({step.id}, {role}, {body}, {src}).")
    return "\n".join(lines) + "\n"


def _clause_formula(qe: QuantifiedEquation) -> str:
    eq = qe.body
    op = "=" if eq.positive else "!="
    return f"{_tptp_term(eq.lhs)} {op} {_tptp_term(eq.rhs)}"


def _canon(qe):
    from .terms import canonical_key

    return canonical_key(qe)


# ---------------------------------------------------------------------------
# Chain proofs


_SECTION_RE = re.compile(r"^(Axiom|Lemma|Goal)\s+(\d+)(\s*\([^)]*\))?:\s*(.+)$")
_JUST_RE = re.compile(r"^=\s*\{\s*by\s+(axiom|lemma)\s+(\d+)(.*?)\}\s*$")


def parse_chain_proof(text: str) -> ParsedDerivation:
    """Parse a structured lemma/goal proof with equality chains.

    Each lemma and the goal becomes one Chain step; every displayed equality
    becomes one or more links (a justification that only reproduces under a
    parallel rewrite is expanded into successive single rewrites).
    """
    lines = text.splitlines()
    declared = {}  # "axiom_1" -> step
    steps = []
    i = 0
    current = None  # (step id, statement) awaiting its proof body
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        m = _SECTION_RE.match(line)
        if m:
            if current is not None:
                raise ParseError(f"{current[0]} has no proof body", line=i)
            kind, number, _, eqtext = m.groups()
            statement = forall_closure(_parse_chain_equation(eqtext))
            key = f"{kind.lower()}_{number}"
            if kind == "Axiom":
                step = ProofStep(key, statement, RuleKind.AXIOM)
                declared[key] = step
                steps.append(step)
            else:
                current = (key, statement)
            continue
        if line.startswith("Proof"):
            if current is None:
                raise ParseError("proof body without a lemma or goal", line=i)
            key, statement = current
            links, used, i = _parse_chain_body(lines, i, declared)
            step = ProofStep(key, statement, RuleKind.CHAIN, tuple(used), tuple(links))
            declared[key] = step
            steps.append(step)
            current = None
    if current is not None:
        raise ParseError(f"{current[0]} has no proof body")
    if not any(s.rule is RuleKind.CHAIN for s in steps):
        raise ParseError("no lemma or goal proofs found")
    return ParsedDerivation(steps, "completion")


def _parse_chain_equation(text: str) -> Equation:
    from .terms import parse_equation

    return parse_equation(text)


def _parse_chain_body(lines, i, declared):
    """Parse term / justification line pairs until the next blank section."""
    terms = []
    justs = []
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            if terms:
                break
            i += 1
            continue
        if _SECTION_RE.match(line):
            break
        m = _JUST_RE.match(line)
        if m:
            kind, number, tail = m.groups()
            direction = "r2l" if ("right-to-left" in tail or "R->L" in tail) else "l2r"
            justs.append((f"{kind}_{number}", direction, i + 1))
        else:
            terms.append(_parse_chain_term(line, i + 1))
        i += 1
    if len(terms) != len(justs) + 1:
        raise ParseError(
            f"chain has {len(terms)} terms but {len(justs)} justifications", line=i
        )
    links = []
    used = []
    for (ref, direction, lineno), src, dst in zip(justs, terms, terms[1:]):
        if ref not in declared:
            raise DanglingReference(f"chain cites undeclared {ref.replace('_', ' ')}")
        if ref not in used:
            used.append(ref)
        rule = declared[ref].statement.body
        links.extend(_links_for(src, dst, rule, ref, direction, lineno))
    return links, used, i


def _parse_chain_term(line, lineno):
    try:
        return parse_term(line)
    except ParseError as exc:
        raise ParseError(f"bad chain term {line!r}: {exc}", line=lineno)


def _links_for(src, dst, rule, ref, direction, lineno):
    """Find how src rewrites to dst with the rule; one link per rewrite."""
    for pos in positions(src):
        if rewrite_reaches(src, pos, rule, direction, dst):
            return [ChainLink(src, ref, direction, pos, dst)]
    # A displayed equality may replace several occurrences at once; expand
    # such a step into successive single rewrites.
    renamed = rename_apart(rule, variables(src) | variables(dst))
    source_side = renamed.lhs if direction == "l2r" else renamed.rhs
    current = src
    links = []
    for pos in _outermost_matches(src, source_side):
        step_to = rewrite_at(current, pos, rule, direction)
        links.append(ChainLink(current, ref, direction, pos, step_to))
        current = step_to
        if current == dst:
            return links
    raise ParseError(
        f"no rewrite with {ref.replace('_', ' ')} turns {format_term(src)} into {format_term(dst)}",
        line=lineno,
    )


def _outermost_matches(t, pattern, prefix=()):
    if match_term(pattern, t) is not None:
        yield prefix
        return
    if isinstance(t, App):
        for k, a in enumerate(t.args):
            yield from _outermost_matches(a, pattern, prefix + (k,))


# ---------------------------------------------------------------------------
# Native proof JSON

NATIVE_FORMAT = "eqmin-proof/1"


def _statement_to_json(qe: QuantifiedEquation | None):
    if qe is None:
        return None
    return {
        "prefix": [[q, n] for q, n in qe.prefix],
        "lhs": format_term(qe.body.lhs),
        "rhs": format_term(qe.body.rhs),
        "positive": qe.body.positive,
    }


def _statement_from_json(obj):
    if obj is None:
        return None
    names = {n for _, n in obj["prefix"]}
    body = Equation(
        parse_term(obj["lhs"], names), parse_term(obj["rhs"], names), obj["positive"]
    )
    return QuantifiedEquation(tuple((q, n) for q, n in obj["prefix"]), body)


def _link_to_json(link: ChainLink):
    vars_ = sorted(variables(link.from_term) | variables(link.to_term))
    return {
        "from": format_term(link.from_term),
        "to": format_term(link.to_term),
        "rule": link.rule_ref,
        "dir": link.direction,
        "pos": list(link.position),
        "vars": vars_,
    }


def _link_from_json(obj):
    names = set(obj["vars"])
    return ChainLink(
        parse_term(obj["from"], names),
        obj["rule"],
        obj["dir"],
        tuple(obj["pos"]),
        parse_term(obj["to"], names),
    )


def write_native_steps(steps, origin: str = "") -> str:
    records = []
    for s in steps:
        rec = {
            "id": s.id,
            "statement": _statement_to_json(s.statement),
            "rule": s.rule.value,
            "premises": list(s.premises),
        }
        if s.rule_name and s.rule_name != s.rule.value:
            rec["rule_name"] = s.rule_name
        if s.chain:
            rec["chain"] = [_link_to_json(l) for l in s.chain]
        if s.contrapositive:
            rec["contrapositive"] = True
        if s.tautology is not None:
            rec["tautology"] = _statement_to_json(s.tautology)
        records.append(rec)
    doc = {"format": NATIVE_FORMAT, "origin": origin, "steps": records}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_native_steps(text: str):
    """Return (steps, origin) from native JSON."""
    doc = json.loads(text)
    if doc.get("format") != NATIVE_FORMAT:
        raise ParseError(f"not a native proof document: {doc.get('format')!r}")
    steps = []
    for rec in doc["steps"]:
        steps.append(
            ProofStep(
                rec["id"],
                _statement_from_json(rec["statement"]),
                RuleKind(rec["rule"]),
                tuple(rec.get("premises", ())),
                tuple(_link_from_json(l) for l in rec.get("chain", ())),
                rule_name=rec.get("rule_name", ""),
                contrapositive=rec.get("contrapositive", False),
                tautology=_statement_from_json(rec.get("tautology")),
            )
        )
    return steps, doc.get("origin", "")
