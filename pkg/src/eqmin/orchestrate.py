"""Backend execution, the built-in bounded prover, and the best-proof table.

External provers run as subprocesses against serialized problem files and are
killed hard shortly after their time limit.  The built-in prover is a
bidirectional breadth-first rewrite search with a chain-length bound and a
node budget instead of wall time; it returns length-minimal chains.

A single coordinator applies results to the lemma table in job order, so runs
with deterministic backends are reproducible regardless of the worker pool.
"""

from __future__ import annotations

import enum
import json
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .calculus import ChainLink, ProofStep, RuleKind, check_proof
from .lemmas import BestProof, LemmaTable, propagate_generalization
from .proofio import (
    Problem,
    VariantKind,
    parse_chain_proof,
    parse_saturation_proof,
    write_tptp,
)
from .redirect import DirectProof, proof_length, to_direct
from .terms import (
    Const,
    QuantifiedEquation,
    alpha_equal,
    canonical_key,
    eq_substitute,
    match_term,
    positions,
    substitute,
    subterm_at,
    variables,
)

KILL_GRACE_SECONDS = 2.0


class Outcome(enum.Enum):
    PROVED = "proved"
    TIMEOUT = "timeout"
    GAVE_UP = "gave_up"
    ERROR = "error"


@dataclass(frozen=True)
class BackendSpec:
    """Configuration for one prover backend.

    kind is "saturation" (refutational, TSTP-style output), "completion"
    (structured chain output), or "builtin".  extra_args may use the
    placeholders {file} and {timeout}; without {file} the problem path is
    appended.
    """

    kind: str
    executable: str | None = None
    time_limit: float = 10.0
    extra_args: tuple = ()
    expansion_bound: int = 24
    node_cap: int = 200_000

    def __post_init__(self):
        if self.kind not in ("saturation", "completion", "builtin"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind != "builtin" and self.time_limit <= 0:
            raise ValueError("time limit must be positive")


@dataclass(frozen=True)
class RunBudget:
    overall_limit: float = 600.0
    max_parallel: int = 4

    def __post_init__(self):
        if self.overall_limit <= 0 or self.max_parallel < 1:
            raise ValueError("bad budget")


@dataclass
class BackendResult:
    outcome: Outcome
    proof: DirectProof | None = None
    seconds: float = 0.0
    detail: str = ""


@dataclass
class RunLogEntry:
    problem: str
    variant: str
    backend: str
    outcome: str
    seconds: float
    proof_length: int | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "problem": self.problem,
                "variant": self.variant,
                "backend": self.backend,
                "outcome": self.outcome,
                "seconds": round(self.seconds, 3),
                "proof_length": self.proof_length,
            }
        )


# ---------------------------------------------------------------------------
# The built-in prover


def _freeze_conjecture(qe: QuantifiedEquation):
    """Instantiate conjecture variables as fresh constants (ground-goal
    reduction; sound for universally quantified goals)."""
    sigma = {name: Const(f"fz_{name}") for _, name in qe.prefix}
    frozen = eq_substitute(qe.body, sigma)
    thaw = {f"fz_{name}": name for _, name in qe.prefix}
    return frozen, thaw


def _determinate_rewrites(rules):
    """(rule_name, rule, direction, source, target) tuples whose application
    by matching fully determines the result."""
    out = []
    for name, qe in rules:
        body = qe.body
        for direction in ("l2r", "r2l"):
            source = body.lhs if direction == "l2r" else body.rhs
            target = body.rhs if direction == "l2r" else body.lhs
            if variables(target) <= variables(source):
                out.append((name, body, direction, source, target))
    return out


def _neighbors(term, rewrites, counter, node_cap):
    for name, rule, direction, source, target in rewrites:
        for pos in positions(term):
            counter[0] += 1
            if counter[0] > node_cap:
                return
            sigma = match_term(source, subterm_at(term, pos))
            if sigma is None:
                continue
            from .terms import replace_at

            yield replace_at(term, pos, substitute(target, sigma)), name, direction, pos


def builtin_search(problem: Problem, bound: int, node_cap: int = 200_000) -> DirectProof | None:
    """Shortest equality chain from conjecture lhs to rhs, if one exists
    within the rewrite-count bound and node budget.

    Both ends expand breadth-first with determinate rewrites (rules usable
    in either direction whenever matching fixes the result); rewrites
    explored from the goal side enter the chain reversed, which lets the
    chain pass through rule applications that introduce variables.  The
    result is length-minimal over chains of that shape: a run of
    determinate rewrites from the left side meeting a reversed run from the
    right.  Returns None when the bound, the budget, or the search space is
    exhausted.
    """
    for _, qe in problem.axioms:
        if not qe.is_universal:
            raise ValueError("built-in search needs universally quantified axioms")
    _, conjecture = problem.conjecture
    frozen, thaw = _freeze_conjecture(conjecture)
    rewrites = _determinate_rewrites(problem.axioms)

    start, goal = frozen.lhs, frozen.rhs
    if start == goal:
        return _chain_proof(problem, [], thaw)

    # dist maps: term -> (depth, parent term, rule name, direction, position)
    fwd = {start: (0, None, None, None, None)}
    bwd = {goal: (0, None, None, None, None)}
    frontier_f, frontier_b = [start], [goal]
    depth_f = depth_b = 0
    counter = [0]
    best_total = None
    meet = None

    def scan_meets(new_terms, own, other):
        nonlocal best_total, meet
        for t in new_terms:
            if t in other:
                total = own[t][0] + other[t][0]
                if best_total is None or total < best_total:
                    best_total, meet = total, t

    while frontier_f and frontier_b:
        if best_total is not None and best_total <= depth_f + depth_b:
            break
        if depth_f + depth_b >= bound or counter[0] > node_cap:
            break
        expand_forward = len(frontier_f) <= len(frontier_b)
        frontier = frontier_f if expand_forward else frontier_b
        dist = fwd if expand_forward else bwd
        depth = (depth_f if expand_forward else depth_b) + 1
        new_frontier = []
        for term in frontier:
            for nxt, name, direction, pos in _neighbors(term, rewrites, counter, node_cap):
                if nxt in dist:
                    continue
                dist[nxt] = (depth, term, name, direction, pos)
                new_frontier.append(nxt)
        if expand_forward:
            frontier_f, depth_f = new_frontier, depth
            scan_meets(new_frontier, fwd, bwd)
        else:
            frontier_b, depth_b = new_frontier, depth
            scan_meets(new_frontier, bwd, fwd)

    if best_total is None or best_total > bound:
        return None

    links = []
    # Forward half: walk parents from the meet back to the start.
    node, half = meet, []
    while fwd[node][1] is not None:
        _, parent, name, direction, pos = fwd[node]
        half.append(ChainLink(parent, name, direction, pos, node))
        node = parent
    links.extend(reversed(half))
    # Backward half: edges were explored from the goal, so they flip.
    node = meet
    while bwd[node][1] is not None:
        _, parent, name, direction, pos = bwd[node]
        links.append(
            ChainLink(node, name, "r2l" if direction == "l2r" else "l2r", pos, parent)
        )
        node = parent
    return _chain_proof(problem, links, thaw)


def _chain_proof(problem: Problem, links, thaw) -> DirectProof:
    """Wrap raw chain links into a direct proof, un-freezing the goal."""

    def unfreeze(term):
        from .terms import App, Var

        if isinstance(term, Const) and term.name in thaw:
            return Var(thaw[term.name])
        if isinstance(term, App):
            return App(term.op, tuple(unfreeze(a) for a in term.args))
        return term

    used = []
    for link in links:
        if link.rule_ref not in used:
            used.append(link.rule_ref)
    steps = [
        ProofStep(name, qe, RuleKind.AXIOM)
        for name, qe in problem.axioms
        if name in used
    ]
    chain = tuple(
        ChainLink(unfreeze(l.from_term), l.rule_ref, l.direction, l.position, unfreeze(l.to_term))
        for l in links
    )
    cname, cqe = problem.conjecture
    steps.append(ProofStep(cname, cqe, RuleKind.CHAIN, tuple(used), chain))
    return DirectProof(steps, origin="builtin")


# ---------------------------------------------------------------------------
# Backends


class BuiltinBackend:
    kind = "builtin"

    def __init__(self, spec: BackendSpec | None = None):
        self.spec = spec or BackendSpec("builtin")
        self.name = "builtin"

    def prove(self, problem: Problem) -> BackendResult:
        started = time.monotonic()
        proof = builtin_search(problem, self.spec.expansion_bound, self.spec.node_cap)
        elapsed = time.monotonic() - started
        if proof is None:
            return BackendResult(Outcome.GAVE_UP, seconds=elapsed)
        return BackendResult(Outcome.PROVED, proof, elapsed)


class ExternalBackend:
    """Spawns a prover executable on a problem file and parses its output."""

    def __init__(self, spec: BackendSpec, name: str | None = None):
        if spec.kind == "builtin":
            raise ValueError("use BuiltinBackend for the built-in prover")
        if not spec.executable:
            raise ValueError("external backend needs an executable")
        self.spec = spec
        self.kind = spec.kind
        self.name = name or Path(spec.executable).stem

    def _command(self, path: str):
        args = [
            a.format(file=path, timeout=int(self.spec.time_limit))
            for a in self.spec.extra_args
        ]
        cmd = [self.spec.executable, *args]
        if not any("{file}" in a for a in self.spec.extra_args):
            cmd.append(path)
        return cmd

    def prove(self, problem: Problem) -> BackendResult:
        started = time.monotonic()
        with tempfile.TemporaryDirectory(prefix="eqmin_") as tmp:
            path = Path(tmp) / f"{problem.name}.p"
            path.write_text(write_tptp(problem), encoding="utf-8")
            try:
                completed = subprocess.run(
                    self._command(str(path)),
                    capture_output=True,
                    text=True,
                    timeout=self.spec.time_limit + KILL_GRACE_SECONDS,
                )
            except subprocess.TimeoutExpired:
                return BackendResult(Outcome.TIMEOUT, seconds=time.monotonic() - started)
            except OSError as exc:
                return BackendResult(
                    Outcome.ERROR, seconds=time.monotonic() - started, detail=f"process: {exc}"
                )
        elapsed = time.monotonic() - started
        output = completed.stdout
        if "Timeout" in output or "ResourceOut" in output:
            return BackendResult(Outcome.TIMEOUT, seconds=elapsed)
        if "GaveUp" in output or "Satisfiable" in output or "CounterSatisfiable" in output:
            return BackendResult(Outcome.GAVE_UP, seconds=elapsed)
        try:
            if self.kind == "saturation":
                derivation = parse_saturation_proof(output)
                proof = to_direct(derivation, origin="baseline")
            else:
                derivation = parse_chain_proof(output)
                proof = DirectProof(list(derivation.steps), origin="builtin")
        except Exception as exc:  # parse failures are reported, not raised
            return BackendResult(Outcome.ERROR, seconds=elapsed, detail=f"parse: {exc}")
        return BackendResult(Outcome.PROVED, proof, elapsed)


def make_backend(spec: BackendSpec):
    if spec.kind == "builtin":
        return BuiltinBackend(spec)
    return ExternalBackend(spec)


def run_backend(backend, problem: Problem) -> BackendResult:
    """Run one backend on one problem, certifying anything it claims to prove.

    A conjecture that is alpha-equal to an axiom short-circuits to a
    zero-length proof.  Errors distinguish process, parse, and certification
    failures via their detail string.
    """
    cname, conjecture = problem.conjecture
    for name, qe in problem.axioms:
        if alpha_equal(qe, conjecture):
            proof = DirectProof(
                [ProofStep(name, qe, RuleKind.AXIOM)], origin="builtin", certified=True
            )
            return BackendResult(Outcome.PROVED, proof)
    result = backend.prove(problem)
    if result.outcome is not Outcome.PROVED:
        return result
    report = check_proof(
        result.proof.steps, problem.axiom_statements(), conjecture
    )
    if not report.accepted:
        bad = report.first_invalid
        where = f" at step {bad.step_id}: {bad.reason}" if bad else ""
        return BackendResult(
            Outcome.ERROR, seconds=result.seconds, detail=f"certification failed{where}"
        )
    result.proof.certified = True
    if result.proof.origin in ("baseline", "builtin"):
        result.proof.origin = problem.variant.value
    return result


# ---------------------------------------------------------------------------
# Proof expansion


class MissingLemmaProof(Exception):
    pass


def expand_small_step(proof: DirectProof, resolver) -> DirectProof:
    """Inline sub-proofs for every lemma the proof assumes as an axiom.

    resolver maps a statement's canonical key to a self-contained DirectProof
    (or None for genuine axioms).  Each distinct lemma is inlined once, before
    its first use; the result derives everything from genuine axioms only.
    """
    out_steps: list = []
    new_id = _id_gen()
    included: dict = {}  # canonical statement key -> step id in out
    axiom_ids: dict = {}

    def add_axiom(step: ProofStep) -> str:
        key = canonical_key(step.statement)
        if key in axiom_ids:
            return axiom_ids[key]
        nid = new_id()
        axiom_ids[key] = nid
        out_steps.append(ProofStep(nid, step.statement, RuleKind.AXIOM))
        return nid

    def include(proof: DirectProof) -> str:
        """Append the proof's steps, resolving its lemma axioms recursively.
        Returns the id of the final step."""
        local: dict = {}
        last = None
        for step in proof.steps:
            if step.rule is RuleKind.AXIOM:
                key = canonical_key(step.statement)
                sub = resolver(step.statement)
                if sub is None:
                    local[step.id] = add_axiom(step)
                elif key in included:
                    local[step.id] = included[key]
                else:
                    included[key] = include(sub)
                    local[step.id] = included[key]
                last = local[step.id]
                continue
            nid = new_id()
            local[step.id] = nid
            remapped = tuple(local[p] for p in step.premises)
            chain = tuple(
                ChainLink(l.from_term, local[l.rule_ref], l.direction, l.position, l.to_term)
                for l in step.chain
            )
            out_steps.append(
                ProofStep(
                    nid,
                    step.statement,
                    step.rule,
                    remapped,
                    chain,
                    rule_name=step.rule_name,
                    contrapositive=step.contrapositive,
                    tautology=step.tautology,
                )
            )
            last = nid
        if last is None:
            raise MissingLemmaProof("empty sub-proof")
        key = canonical_key(proof.final.statement)
        included.setdefault(key, last)
        return last

    include(proof)
    return DirectProof(out_steps, origin=proof.origin)


def _id_gen():
    n = [0]

    def nxt():
        n[0] += 1
        return str(n[0])

    return nxt


# ---------------------------------------------------------------------------
# Proving every variant of every lemma


_VARIANT_PRIORITY = {
    VariantKind.SMALL_STEP: 0,
    VariantKind.BIG_STEP: 1,
    VariantKind.ABSTRACTED: 2,
}


@dataclass
class ProveStats:
    runs: list = field(default_factory=list)  # RunLogEntry
    outcomes: dict = field(default_factory=dict)  # outcome value -> count

    def record(self, entry: RunLogEntry):
        self.runs.append(entry)
        self.outcomes[entry.outcome] = self.outcomes.get(entry.outcome, 0) + 1

    def write_jsonl(self, path):
        Path(path).write_text(
            "".join(e.to_json() + "\n" for e in self.runs), encoding="utf-8"
        )


def _execute_jobs(jobs, budget: RunBudget, deadline):
    """Run (label, problem, backend) jobs on a pool; yield results in job
    order so table updates are deterministic."""
    if not jobs:
        return

    def guarded(backend, problem):
        if time.monotonic() >= deadline:
            return BackendResult(Outcome.TIMEOUT, detail="overall budget exhausted")
        return run_backend(backend, problem)

    with ThreadPoolExecutor(max_workers=budget.max_parallel) as pool:
        futures = [
            (label, problem, backend, pool.submit(guarded, backend, problem))
            for label, problem, backend in jobs
        ]
        for label, problem, backend, future in futures:
            try:
                yield label, problem, backend, future.result()
            except Exception as exc:
                yield label, problem, backend, BackendResult(Outcome.ERROR, detail=str(exc))


def _candidate_key(length, variant, backend_index, discovery):
    return (length, _VARIANT_PRIORITY[variant], backend_index, discovery)


def prove_all_variants(
    table: LemmaTable,
    backends,
    budget: RunBudget | None = None,
    stats: ProveStats | None = None,
) -> ProveStats:
    """Prove every generated (variant, problem) pair of every lemma with every
    backend, keep the per-lemma minimum, then push winning generalizations
    into later small-step problems and re-prove those.

    Ties break deterministically: small-step before big-step before
    abstracted, then backend order as configured, then earliest discovery.
    """
    budget = budget or RunBudget()
    stats = stats or ProveStats()
    deadline = time.monotonic() + budget.overall_limit

    def run_round(records):
        jobs = []
        for record in records:
            for variant in (VariantKind.SMALL_STEP, VariantKind.BIG_STEP, VariantKind.ABSTRACTED):
                for problem in record.problems.get(variant, []):
                    for bi, backend in enumerate(backends):
                        jobs.append(((record.id, variant, bi), problem, backend))
        discovery = 0
        for (lemma_id, variant, bi), problem, backend, result in _execute_jobs(
            jobs, budget, deadline
        ):
            record = table[lemma_id]
            length = proof_length(result.proof) if result.proof else None
            stats.record(
                RunLogEntry(
                    problem.name, variant.value, backend.name, result.outcome.value,
                    result.seconds, length,
                )
            )
            if result.outcome is not Outcome.PROVED:
                continue
            discovery += 1
            key = _candidate_key(length, variant, bi, discovery)
            current = record.best
            if current is not None and _candidate_key(
                current.length, current.variant, current.backend_index, current.discovery
            ) <= key:
                continue
            generalized = None
            if variant is VariantKind.ABSTRACTED and not alpha_equal(
                result.proof.final.statement, record.statement
            ):
                generalized = result.proof.final.statement
            record.best = BestProof(
                result.proof, length, variant, backend.name, generalized,
                backend_index=bi, discovery=discovery,
            )

    run_round(list(table))

    # Generalizations that won propagate into later small-step problems.
    touched_all = []
    for record in table:
        if (
            record.best
            and record.best.variant is VariantKind.ABSTRACTED
            and record.best.generalized is not None
        ):
            touched_all.extend(propagate_generalization(table, record))
    if touched_all:
        reprove = [r for r in table if r.needs_reprove]
        previous = {r.id: r.best for r in reprove}
        saved_problems = {r.id: dict(r.problems) for r in reprove}
        for r in reprove:
            # Only the (already updated) small-step problems get re-proved.
            r.problems = {
                VariantKind.SMALL_STEP: saved_problems[r.id].get(VariantKind.SMALL_STEP, [])
            }
            r.best = None
        run_round(reprove)
        for r in reprove:
            old = previous[r.id]
            # A re-proof replaces the stored proof only when strictly shorter.
            if old is not None and (r.best is None or r.best.length >= old.length):
                r.best = old
            r.problems = saved_problems[r.id]
            r.needs_reprove = False
    return stats
