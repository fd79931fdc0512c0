"""First-order terms over a single binary (magma) operation.

Terms are immutable values: variables, constants (possibly Skolem), and
applications.  Positions are explicit index paths.  All operations are pure;
fresh names are derived from explicit avoid-sets, never from global state.
"""

from __future__ import annotations

from dataclasses import dataclass

OP = "◇"  # the magma operator; always binary, rendered infix

# Preferred variable names, in presentation order; after these we fall back
# to x1, x2, ...
VAR_NAME_SEQUENCE = ("x", "y", "z", "w", "v", "u")


class TermError(Exception):
    pass


class BadPosition(TermError):
    """A position path does not resolve inside the given term."""


class NoMatch(TermError):
    """A rewrite rule does not match the addressed subterm."""


class ParseError(TermError):
    def __init__(self, message, line=1, column=0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str
    skolem: bool = False

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class App:
    op: str
    args: tuple

    def __repr__(self):
        return format_term(self)


Term = Var | Const | App
Position = tuple
# Substitutions map variable names to terms and are kept in solved form:
# no variable in the domain occurs in any image (hence idempotent).
Subst = dict


def mk(left: Term, right: Term) -> App:
    """Apply the magma operator."""
    return App(OP, (left, right))


# ---------------------------------------------------------------------------
# Traversal


def variables(t: Term) -> set:
    """Set of variable names occurring in t."""
    out = set()
    _walk_vars(t, out)
    return out


def _walk_vars(t, out):
    if isinstance(t, Var):
        out.add(t.name)
    elif isinstance(t, App):
        for a in t.args:
            _walk_vars(a, out)


def variables_in_order(t: Term, acc=None) -> list:
    """Variable names in first-occurrence (pre-order) order."""
    out = [] if acc is None else acc
    if isinstance(t, Var):
        if t.name not in out:
            out.append(t.name)
    elif isinstance(t, App):
        for a in t.args:
            variables_in_order(a, out)
    return out


def skolem_constants(t: Term) -> list:
    """Skolem constant names in first-occurrence order."""
    out = []

    def go(s):
        if isinstance(s, Const) and s.skolem and s.name not in out:
            out.append(s.name)
        elif isinstance(s, App):
            for a in s.args:
                go(a)

    go(t)
    return out


def subterm_at(t: Term, pos: Position) -> Term:
    for i in pos:
        if not isinstance(t, App) or i >= len(t.args):
            raise BadPosition(f"no subterm at {list(pos)}")
        t = t.args[i]
    return t


def replace_at(t: Term, pos: Position, new: Term) -> Term:
    if not pos:
        return new
    if not isinstance(t, App) or pos[0] >= len(t.args):
        raise BadPosition(f"no subterm at {list(pos)}")
    i = pos[0]
    args = list(t.args)
    args[i] = replace_at(args[i], pos[1:], new)
    return App(t.op, tuple(args))


def positions(t: Term, prefix=()):
    """All positions of t in pre-order, the root first."""
    yield prefix
    if isinstance(t, App):
        for i, a in enumerate(t.args):
            yield from positions(a, prefix + (i,))


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


# ---------------------------------------------------------------------------
# Substitution, unification, matching


def substitute(t: Term, sigma: Subst) -> Term:
    """Apply sigma to t, replacing all bound variables simultaneously."""
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    if isinstance(t, App):
        return App(t.op, tuple(substitute(a, sigma) for a in t.args))
    return t


def compose_binding(sigma: Subst, name: str, image: Term) -> Subst:
    """Extend a solved-form substitution with name -> image, keeping it solved."""
    single = {name: image}
    out = {k: substitute(v, single) for k, v in sigma.items()}
    out[name] = image
    return out


def occurs_in(name: str, t: Term) -> bool:
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, App):
        return any(occurs_in(name, a) for a in t.args)
    return False


def unify(t: Term, u: Term) -> Subst | None:
    """Most general unifier of t and u, or None.

    The result is idempotent: applying it twice is the same as applying it
    once.  Failure (including occurs-check failure) is a value, not an error.
    """
    sigma: Subst = {}
    stack = [(t, u)]
    while stack:
        a, b = stack.pop()
        a = substitute(a, sigma)
        b = substitute(b, sigma)
        if a == b:
            continue
        if isinstance(a, Var):
            if occurs_in(a.name, b):
                return None
            sigma = compose_binding(sigma, a.name, b)
        elif isinstance(b, Var):
            if occurs_in(b.name, a):
                return None
            sigma = compose_binding(sigma, b.name, a)
        elif isinstance(a, App) and isinstance(b, App) and a.op == b.op and len(a.args) == len(b.args):
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return sigma


def match_term(pattern: Term, subject: Term) -> Subst | None:
    """One-sided unification: sigma with substitute(pattern, sigma) == subject.

    Only pattern variables are instantiated; a variable in the subject only
    matches an identical occurrence produced by an earlier binding.
    """
    sigma: Subst = {}
    stack = [(pattern, subject)]
    while stack:
        p, s = stack.pop()
        if isinstance(p, Var):
            bound = sigma.get(p.name)
            if bound is None:
                sigma[p.name] = s
            elif bound != s:
                return None
        elif isinstance(p, Const):
            if p != s:
                return None
        else:
            if not (isinstance(s, App) and s.op == p.op and len(s.args) == len(p.args)):
                return None
            stack.extend(zip(p.args, s.args))
    return sigma


# ---------------------------------------------------------------------------
# Equations


@dataclass(frozen=True)
class Equation:
    """A unit (dis)equation.  Premise matching treats the sides as unordered."""

    lhs: Term
    rhs: Term
    positive: bool = True

    def flipped(self) -> "Equation":
        return Equation(self.rhs, self.lhs, self.positive)

    def negated(self) -> "Equation":
        return Equation(self.lhs, self.rhs, not self.positive)

    def side(self, which: int) -> Term:
        return self.lhs if which == 0 else self.rhs

    def __repr__(self):
        return format_equation(self)


def eq_variables(e: Equation) -> set:
    return variables(e.lhs) | variables(e.rhs)


def eq_variables_in_order(e: Equation) -> list:
    out = variables_in_order(e.lhs)
    return variables_in_order(e.rhs, out)


def eq_substitute(e: Equation, sigma: Subst) -> Equation:
    return Equation(substitute(e.lhs, sigma), substitute(e.rhs, sigma), e.positive)


def fresh_names(avoid, count=None):
    """Yield variable names not in avoid: x, y, z, w, v, u, then x1, x2, ..."""
    produced = 0
    for name in VAR_NAME_SEQUENCE:
        if name not in avoid:
            yield name
            produced += 1
            if count is not None and produced == count:
                return
    for i in range(1, 10_000):
        name = f"x{i}"
        if name not in avoid:
            yield name
            produced += 1
            if count is not None and produced == count:
                return
    raise TermError("fresh name space exhausted")


def rename_apart(e: Equation, avoid) -> Equation:
    """Rename e's variables away from avoid; untouched names are kept."""
    avoid = set(avoid)
    mine = eq_variables_in_order(e)
    clashing = [v for v in mine if v in avoid]
    if not clashing:
        return e
    taken = avoid | set(mine)
    gen = fresh_names(taken)
    sigma = {v: Var(next(gen)) for v in clashing}
    return eq_substitute(e, sigma)


# ---------------------------------------------------------------------------
# Rewriting


def _rule_sides(rule: Equation, direction: str):
    if direction == "l2r":
        return rule.lhs, rule.rhs
    if direction == "r2l":
        return rule.rhs, rule.lhs
    raise ValueError(f"bad direction {direction!r}")


def rewrite_at(t: Term, pos: Position, rule: Equation, direction: str = "l2r") -> Term:
    """Rewrite the subterm of t at pos with rule, used in the given direction.

    The rule is renamed apart from t first, so unbound rule variables in the
    produced side come out fresh.  Raises BadPosition or NoMatch.
    """
    sub = subterm_at(t, pos)
    rule = rename_apart(rule, variables(t))
    source, target = _rule_sides(rule, direction)
    sigma = match_term(source, sub)
    if sigma is None:
        raise NoMatch(f"{format_term(sub)} does not match {format_term(source)}")
    return replace_at(t, pos, substitute(target, sigma))


def rewrite_parallel(t: Term, rule: Equation, direction: str = "l2r") -> Term:
    """Replace every outermost, non-overlapping match of the rule's source side.

    Zero matches returns t unchanged.  Occurrences are matched independently,
    each with its own instantiation.
    """
    rule = rename_apart(rule, variables(t))
    source, target = _rule_sides(rule, direction)

    def go(term):
        sigma = match_term(source, term)
        if sigma is not None:
            return substitute(target, sigma)
        if isinstance(term, App):
            return App(term.op, tuple(go(a) for a in term.args))
        return term

    return go(t)


def rewrite_parallel_eq(e: Equation, rule: Equation, direction: str = "l2r") -> Equation:
    return Equation(
        rewrite_parallel(e.lhs, rule, direction),
        rewrite_parallel(e.rhs, rule, direction),
        e.positive,
    )


def rewrite_reaches(t: Term, pos: Position, rule: Equation, direction: str, goal: Term) -> bool:
    """Does rewriting t at pos with the rule yield goal?

    Rule variables that the matched side leaves unbound surface as fresh
    variables in the rewritten term; instantiating those (and only those) to
    reach goal is sound, since the rule holds for every instance.
    """
    try:
        produced = rewrite_at(t, pos, rule, direction)
    except (NoMatch, BadPosition):
        return False
    if produced == goal:
        return True
    fresh = variables(produced) - variables(t)
    if not fresh:
        return False
    tau = match_term(produced, goal)
    if tau is None:
        return False
    return all(tau.get(v) in (None, Var(v)) for v in variables(produced) - fresh)


# ---------------------------------------------------------------------------
# Quantified equations and alpha-equivalence

FORALL = "forall"
EXISTS = "exists"


@dataclass(frozen=True)
class QuantifiedEquation:
    """An equation under an explicit quantifier prefix.

    Every body variable is bound by exactly one prefix entry and every prefix
    entry is used; violations are construction errors.
    """

    prefix: tuple  # of (quantifier, variable-name) pairs
    body: Equation

    def __post_init__(self):
        names = [n for _, n in self.prefix]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate prefix variable in {names}")
        body_vars = eq_variables(self.body)
        if set(names) != body_vars:
            raise ValueError(
                f"prefix {names} does not bind exactly the body variables {sorted(body_vars)}"
            )
        for q, _ in self.prefix:
            if q not in (FORALL, EXISTS):
                raise ValueError(f"bad quantifier {q!r}")

    @property
    def is_universal(self) -> bool:
        return all(q == FORALL for q, _ in self.prefix)

    def __repr__(self):
        return format_quantified(self)


def forall_closure(e: Equation) -> QuantifiedEquation:
    """Universally close e over its free variables, in occurrence order."""
    return QuantifiedEquation(tuple((FORALL, v) for v in eq_variables_in_order(e)), e)


def close_with(e: Equation, kinds: dict) -> QuantifiedEquation:
    """Close e with the given quantifier kind per variable (occurrence order)."""
    return QuantifiedEquation(
        tuple((kinds.get(v, FORALL), v) for v in eq_variables_in_order(e)), e
    )


def _term_key(t: Term, numbering: dict):
    if isinstance(t, Var):
        if t.name not in numbering:
            numbering[t.name] = len(numbering)
        return ("v", numbering[t.name])
    if isinstance(t, Const):
        return ("c", t.name, t.skolem)
    return ("a", t.op) + tuple(_term_key(a, numbering) for a in t.args)


def _prefix_blocks(prefix):
    blocks = []
    for q, name in prefix:
        if blocks and blocks[-1][0] == q:
            blocks[-1][1].append(name)
        else:
            blocks.append((q, [name]))
    return blocks


def canonical_key(qe: QuantifiedEquation):
    """A total canonical form, stable under variable renaming and side order.

    Variables are numbered by first occurrence in the lexicographically
    smaller orientation of (lhs, rhs); prefix entries are grouped into
    maximal same-quantifier blocks (order within a block is immaterial, the
    block structure is not).  Usable as a dictionary key for merging.
    """
    kind_of = dict((name, q) for q, name in qe.prefix)
    candidates = []
    for body in (qe.body, qe.body.flipped()):
        numbering: dict = {}
        lhs_key = _term_key(body.lhs, numbering)
        rhs_key = _term_key(body.rhs, numbering)
        blocks = tuple(
            (q, tuple(sorted(numbering[n] for n in names)))
            for q, names in _prefix_blocks(qe.prefix)
        )
        candidates.append((body.positive, blocks, lhs_key, rhs_key))
    return min(candidates)


def alpha_equal(a: QuantifiedEquation, b: QuantifiedEquation) -> bool:
    """Equality up to bijective variable renaming and unordered sides."""
    return canonical_key(a) == canonical_key(b)


# ---------------------------------------------------------------------------
# Concrete syntax
#
# Infix ◇ with explicit parentheses (no precedence), prefix application for
# every other symbol.  When no variable set is supplied, names x y z w v u
# with an optional digit suffix are variables, names starting with "sk" are
# Skolem constants, and anything else is a plain constant.


def _is_default_var(name: str) -> bool:
    if not name:
        return False
    head, tail = name[0], name[1:]
    return head in VAR_NAME_SEQUENCE and (tail == "" or tail.isdigit())


def format_term(t: Term) -> str:
    if isinstance(t, (Var, Const)):
        return t.name
    if t.op == OP:
        return f"{_atom(t.args[0])}{OP}{_atom(t.args[1])}"
    return f"{t.op}({','.join(format_term(a) for a in t.args)})"


def _atom(t: Term) -> str:
    s = format_term(t)
    if isinstance(t, App) and t.op == OP:
        return f"({s})"
    return s


def format_equation(e: Equation) -> str:
    op = "=" if e.positive else "!="
    return f"{format_term(e.lhs)} {op} {format_term(e.rhs)}"


def format_quantified(qe: QuantifiedEquation) -> str:
    if not qe.prefix:
        return format_equation(qe.body)
    parts = []
    for q, names in _prefix_blocks(qe.prefix):
        mark = "∀" if q == FORALL else "∃"
        parts.append(f"{mark}{','.join(names)}.")
    return f"{' '.join(parts)} {format_equation(qe.body)}"


class _Scanner:
    def __init__(self, text):
        self.text = text
        self.i = 0

    def skip_ws(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def take(self, ch):
        if self.peek() != ch:
            self.fail(f"expected {ch!r}")
        self.i += 1

    def name(self):
        self.skip_ws()
        j = self.i
        while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
            j += 1
        if j == self.i:
            self.fail("expected a name")
        word = self.text[self.i : j]
        self.i = j
        return word

    def fail(self, message):
        raise ParseError(message, column=self.i)


def parse_term(text: str, variables_=None) -> Term:
    sc = _Scanner(text)
    t = _parse_operand_chain(sc, variables_)
    sc.skip_ws()
    if sc.i != len(sc.text):
        sc.fail("trailing input")
    return t


def _parse_operand_chain(sc, vars_):
    left = _parse_operand(sc, vars_)
    if sc.peek() == OP:
        sc.take(OP)
        right = _parse_operand(sc, vars_)
        left = mk(left, right)
        if sc.peek() == OP:
            sc.fail(f"ambiguous chain of {OP}; add parentheses")
    return left


def _parse_operand(sc, vars_):
    if sc.peek() == "(":
        sc.take("(")
        t = _parse_operand_chain(sc, vars_)
        sc.take(")")
        return t
    word = sc.name()
    if sc.peek() == "(":
        sc.take("(")
        args = [_parse_operand_chain(sc, vars_)]
        while sc.peek() == ",":
            sc.take(",")
            args.append(_parse_operand_chain(sc, vars_))
        sc.take(")")
        return App(word, tuple(args))
    if vars_ is not None:
        return Var(word) if word in vars_ else Const(word, skolem=word.startswith("sk"))
    if _is_default_var(word):
        return Var(word)
    return Const(word, skolem=word.startswith("sk"))


def parse_equation(text: str, variables_=None) -> Equation:
    for op, positive in (("!=", False), ("≠", False), ("=", True)):
        if op in text:
            left, _, right = text.partition(op)
            return Equation(
                parse_term(left.strip(), variables_),
                parse_term(right.strip(), variables_),
                positive,
            )
    raise ParseError("no equality operator found")


def parse_quantified(text: str) -> QuantifiedEquation:
    """Parse '∀x,y. ∃z. lhs = rhs' (prefix optional; defaults to closure)."""
    rest = text.strip()
    prefix = []
    names = set()
    while rest[:1] in ("∀", "∃"):
        kind = FORALL if rest[0] == "∀" else EXISTS
        head, dot, rest = rest[1:].partition(".")
        if not dot:
            raise ParseError("quantifier prefix without '.'")
        for raw in head.split(","):
            name = raw.strip()
            prefix.append((kind, name))
            names.add(name)
        rest = rest.strip()
    body = parse_equation(rest, variables_=names if prefix else None)
    if prefix:
        return QuantifiedEquation(tuple(prefix), body)
    return forall_closure(body)
