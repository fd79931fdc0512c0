"""Recombining per-lemma proofs into a short three-segment proof.

For each candidate landing lemma near the end of the baseline proof we build
a dependency graph from the stored best proofs, try every lemma in it as the
kickoff, and construct three segments: axioms to kickoff, kickoff to landing,
landing to conjecture.  Segments fall back to stored proofs whenever those
are shorter, a segment-3 proof that ignores the landing drops segment 2, and
the globally shortest certified result wins.  The baseline direct proof is
the fallback of last resort, so the output never exceeds it.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .calculus import ChainLink, ProofStep, RuleKind, check_proof
from .lemmas import LemmaTable, generate_problems, table_from_baseline
from .orchestrate import (
    MissingLemmaProof,
    Outcome,
    RunBudget,
    expand_small_step,
    prove_all_variants,
    run_backend,
)
from .proofio import Problem, VariantKind
from .redirect import DirectProof, proof_length, to_direct
from .terms import (
    QuantifiedEquation,
    alpha_equal,
    canonical_key,
    positions,
    rewrite_reaches,
)


class CombineError(Exception):
    pass


class CycleDetected(CombineError):
    pass


class SegmentUnprovable(CombineError):
    pass


class CertificationFailed(CombineError):
    pass


class NoBaseline(CombineError):
    pass


# ---------------------------------------------------------------------------
# Dependency graphs


@dataclass
class DagNode:
    id: str
    statement: QuantifiedEquation
    proof: DirectProof | None  # None for axiom sentinels
    deps: tuple = ()  # direct dependencies (node ids)
    closure_len: int = 0  # length of the self-contained proof at creation

    @property
    def is_axiom(self) -> bool:
        return self.proof is None


@dataclass
class DependencyGraph:
    landing: str
    nodes: dict = field(default_factory=dict)
    by_key: dict = field(default_factory=dict)  # canonical statement -> node id

    @property
    def edges(self):
        return {(n.id, d) for n in self.nodes.values() for d in n.deps}

    def lemma_nodes(self):
        return [n for n in self.nodes.values() if not n.is_axiom]

    def dependencies(self, node_id) -> list:
        """Transitive dependencies, deterministic order, node_id excluded."""
        seen = []
        stack = list(self.nodes[node_id].deps)
        while stack:
            nid = stack.pop(0)
            if nid in seen or nid == node_id:
                continue
            seen.append(nid)
            stack.extend(self.nodes[nid].deps)
        return seen

    def topological(self) -> list:
        """Non-axiom node ids, dependencies before dependents."""
        order = []
        marked = set()

        def visit(nid):
            if nid in marked:
                return
            marked.add(nid)
            for d in sorted(self.nodes[nid].deps):
                visit(d)
            if not self.nodes[nid].is_axiom:
                order.append(nid)

        visit(self.landing)
        for nid in sorted(self.nodes):
            visit(nid)
        return order

    def node_for_statement(self, statement):
        nid = self.by_key.get(canonical_key(statement))
        return self.nodes[nid] if nid else None

    def self_contained(self, node_id, _memo=None) -> DirectProof:
        """Expand a node's proof down to the original axioms."""
        node = self.nodes[node_id]
        if node.is_axiom:
            raise MissingLemmaProof(f"{node_id} is an axiom sentinel")

        def resolver(statement):
            target = self.node_for_statement(statement)
            if target is None or target.is_axiom:
                return None
            sub = self.self_contained(target.id)
            if not alpha_equal(sub.final.statement, statement):
                sub = _with_bridge(sub, statement)
            return sub

        return expand_small_step(node.proof, resolver)


def _slice_proof(proof: DirectProof, step_id: str) -> DirectProof:
    """The sub-proof establishing step_id: its ancestors, original order."""
    by_id = proof.step_map()
    keep = set()
    stack = [step_id]
    while stack:
        sid = stack.pop()
        if sid in keep:
            continue
        keep.add(sid)
        step = by_id[sid]
        stack.extend(step.premises)
        stack.extend(l.rule_ref for l in step.chain)
    steps = [s for s in proof.steps if s.id in keep]
    return DirectProof(steps, origin=proof.origin)


def _instantiation_link(general: QuantifiedEquation, wanted: QuantifiedEquation, rule_ref):
    """A single chain link deriving an instance from its generalization."""
    body = wanted.body
    if body.lhs == body.rhs:
        return ()
    for direction in ("l2r", "r2l"):
        for pos in positions(body.lhs):
            if rewrite_reaches(body.lhs, pos, general.body, direction, body.rhs):
                return (ChainLink(body.lhs, rule_ref, direction, pos, body.rhs),)
    raise CertificationFailed(
        f"cannot derive {wanted!r} from its generalization {general!r}"
    )


def _with_bridge(proof: DirectProof, wanted: QuantifiedEquation) -> DirectProof:
    """Append a chain step deriving `wanted` from the proof's final statement."""
    final = proof.final
    links = _instantiation_link(final.statement, wanted, final.id)
    bridge = ProofStep(
        f"{final.id}_inst", wanted, RuleKind.CHAIN, (final.id,), links
    )
    return DirectProof(proof.steps + [bridge], origin=proof.origin)


class _DagBuilder:
    def __init__(self, table: LemmaTable):
        self.table = table
        self.graph = None
        self.in_progress = set()

    def build(self, landing_id: str) -> DependencyGraph:
        self.graph = DependencyGraph(landing=landing_id)
        for name, qe in self.table.problem.axioms:
            nid = f"ax:{name}"
            self.graph.nodes[nid] = DagNode(nid, qe, None)
            self.graph.by_key[canonical_key(qe)] = nid
        record = self.table[landing_id]
        self.graph.landing = self._add_record(record)
        return self.graph

    def _add_record(self, record) -> str:
        if record.id in self.in_progress:
            raise CycleDetected(f"lemma {record.id} depends on itself")
        if record.best is None:
            raise MissingLemmaProof(f"lemma {record.id} has no stored proof")
        self.in_progress.add(record.id)
        try:
            final_node = self._add_proof(record.best.proof, record.id)
        finally:
            self.in_progress.discard(record.id)
        return final_node

    def _resolve_axiom_step(self, step) -> str:
        key = canonical_key(step.statement)
        if key in self.graph.by_key:
            return self.graph.by_key[key]
        # Alpha-equal records merge: add every matching route and let the
        # shorter proof win the shared node.
        records = [
            r for r in self.table.records_by_statement(step.statement)
            if r.best is not None and r.id not in self.in_progress
        ]
        if records:
            node = None
            for record in records:
                node = self._add_record(record)
            return self.graph.by_key.get(key, node)
        # A generalized lemma: its statement differs from the record's.
        for record in self.table:
            if record.best and record.best.generalized is not None:
                if canonical_key(record.best.generalized) == key:
                    return self._add_record(record)
        raise MissingLemmaProof(f"axiom {step.statement!r} has no known origin")

    def _add_proof(self, proof: DirectProof, label: str) -> str:
        local = {}
        last_node = None
        for step in proof.steps:
            if step.rule is RuleKind.AXIOM:
                local[step.id] = self._resolve_axiom_step(step)
                last_node = local[step.id]
                continue
            refs = list(step.premises) + [l.rule_ref for l in step.chain]
            deps = tuple(dict.fromkeys(local[r] for r in refs))
            key = canonical_key(step.statement)
            fragment = _slice_proof(proof, step.id)
            closure = self._closure_len(fragment, local, step.id)
            existing_id = self.graph.by_key.get(key)
            if existing_id is not None:
                node = self.graph.nodes[existing_id]
                # Alpha-equal statements merge; the shorter proof wins.
                if not node.is_axiom and closure < node.closure_len:
                    node.proof, node.deps, node.closure_len = fragment, deps, closure
                local[step.id] = existing_id
                last_node = existing_id
                continue
            nid = label if step.id == proof.final.id else f"{label}.{step.id}"
            self.graph.nodes[nid] = DagNode(nid, step.statement, fragment, deps, closure)
            self.graph.by_key[key] = nid
            local[step.id] = nid
            last_node = nid
        if last_node is None:
            raise MissingLemmaProof(f"proof for {label} is empty")
        return last_node

    def _closure_len(self, fragment: DirectProof, local, step_id) -> int:
        """Own steps plus the closures of every distinct dependency node."""
        own = proof_length(fragment)
        seen = set()
        total = own
        for step in fragment.steps:
            if step.rule is RuleKind.AXIOM:
                nid = local.get(step.id) or self.graph.by_key.get(
                    canonical_key(step.statement)
                )
                if nid and nid not in seen:
                    seen.add(nid)
                    node = self.graph.nodes.get(nid)
                    if node is not None and not node.is_axiom:
                        total += node.closure_len
        return total


def build_dag(landing_id: str, table: LemmaTable) -> DependencyGraph:
    """Dependency DAG under a candidate landing lemma.

    Nodes are the landing's transitive prerequisites: table lemmas plus every
    internal step of the best proofs involved (big-step and abstracted proofs
    bottom out at the original axioms).  Alpha-equal nodes are merged, keeping
    the shorter proof.
    """
    return _DagBuilder(table).build(landing_id)


# ---------------------------------------------------------------------------
# Candidate landings


def candidate_landings(table: LemmaTable, k: int = 6) -> list:
    """The last min(k, length) baseline lemma ids, latest first; the
    conjecture is always the first candidate."""
    if k < 1:
        raise ValueError("need at least one landing candidate")
    ids = [r.id for r in table.records]
    return list(reversed(ids[-k:]))


# ---------------------------------------------------------------------------
# Segments


def _axiom_entry(node: DagNode):
    safe = re.sub(r"[^A-Za-z0-9_]", "_", node.id)
    return (f"dep_{safe}", node.statement)


def _shortest_backend_proof(problem: Problem, backends):
    best = None
    for backend in backends:
        result = run_backend(backend, problem)
        if result.outcome is Outcome.PROVED:
            length = proof_length(result.proof)
            if best is None or length < proof_length(best):
                best = result.proof
    return best


def build_segment1(dag: DependencyGraph, kickoff: str, backends, base_name="seg1"):
    """Self-contained proof of the kickoff lemma.

    A kickoff that depends only on axioms keeps its stored proof.  Otherwise
    both provers run on a problem made of its dependencies, and the stored
    proof still wins if it is shorter.
    """
    node = dag.nodes[kickoff]
    deps = [dag.nodes[d] for d in dag.dependencies(kickoff)]
    lemma_deps = [d for d in deps if not d.is_axiom]
    stored = dag.self_contained(kickoff)
    if not lemma_deps:
        return stored
    axioms = tuple(
        [(n, qe) for n, qe in _original_axioms(dag)]
        + [_axiom_entry(d) for d in lemma_deps]
    )
    problem = Problem(
        f"{base_name}_{_safe(kickoff)}", axioms, ("goal", node.statement), VariantKind.SEGMENT
    )
    fresh = _shortest_backend_proof(problem, backends)
    if fresh is None:
        return stored
    expanded = expand_small_step(fresh, _dag_resolver(dag))
    # The stored proof only wins when it is strictly shorter.
    return stored if proof_length(stored) < proof_length(expanded) else expanded


def _original_axioms(dag: DependencyGraph):
    return [
        (n.id.removeprefix("ax:"), n.statement)
        for n in dag.nodes.values()
        if n.is_axiom
    ]


def _dag_resolver(dag: DependencyGraph):
    def resolver(statement):
        node = dag.node_for_statement(statement)
        if node is None or node.is_axiom:
            return None
        sub = dag.self_contained(node.id)
        if not alpha_equal(sub.final.statement, statement):
            sub = _with_bridge(sub, statement)
        return sub

    return resolver


def _proved_statements(*proofs):
    """(name, statement) entries for every lemma proved by the given proofs."""
    out = []
    seen = set()
    for k, proof in enumerate(proofs):
        if proof is None:
            continue
        for step in proof.lemma_steps():
            key = canonical_key(step.statement)
            if key not in seen:
                seen.add(key)
                out.append((f"prev_{k}_{_safe(step.id)}", step.statement))
    return out


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name)


def build_segment2(dag: DependencyGraph, seg1: DirectProof, landing: str, backends, base_name="seg2"):
    """Proof of the landing lemma over the axioms plus everything segment 1
    proved.  Returns (proof, replaces_seg1): the stored self-contained proof
    of the landing replaces both segments when it is shorter."""
    node = dag.nodes[landing]
    axioms = tuple(_original_axioms(dag) + _proved_statements(seg1))
    problem = Problem(
        f"{base_name}_{_safe(landing)}", axioms, ("goal", node.statement), VariantKind.SEGMENT
    )
    fresh = _shortest_backend_proof(problem, backends)
    stored = dag.self_contained(landing)
    if fresh is None:
        return stored, True
    cumulative = proof_length(seg1) + proof_length(fresh)
    if proof_length(stored) < cumulative:
        return stored, True
    return fresh, False


def build_segment3(
    dag: DependencyGraph, seg1, seg2, landing: str, conjecture, backends, base_name="seg3"
):
    """Proof of the original conjecture over everything proved so far.

    Returns (proof, uses_landing, used_keys): when the proof never cites the
    landing lemma (nor anything only segment 2 proves), segment 2 is dropped
    from the final concatenation.
    """
    axioms = tuple(_original_axioms(dag) + _proved_statements(seg1, seg2))
    problem = Problem(
        f"{base_name}_{_safe(landing)}", axioms, ("goal", conjecture), VariantKind.SEGMENT
    )
    fresh = _shortest_backend_proof(problem, backends)
    if fresh is None:
        raise SegmentUnprovable("no backend proved the conjecture segment")
    landing_key = canonical_key(dag.nodes[landing].statement)
    used = _used_axiom_keys(fresh)
    return fresh, landing_key in used, used


def _used_axiom_keys(proof: DirectProof):
    by_id = proof.step_map()
    used = set()
    keep = set()
    stack = [proof.final.id]
    while stack:
        sid = stack.pop()
        if sid in keep:
            continue
        keep.add(sid)
        step = by_id[sid]
        stack.extend(step.premises)
        stack.extend(l.rule_ref for l in step.chain)
    for step in proof.steps:
        if step.id in keep and step.rule is RuleKind.AXIOM:
            used.add(canonical_key(step.statement))
    return used


# ---------------------------------------------------------------------------
# Assembly


@dataclass
class SegmentPlan:
    landing: str
    kickoff: str
    seg1: DirectProof | None
    seg2: DirectProof | None
    seg3: DirectProof
    seg2_replaces_seg1: bool = False
    drop_seg2: bool = False

    def parts(self):
        if self.drop_seg2:
            chosen = [self.seg1, self.seg3]
        elif self.seg2_replaces_seg1:
            chosen = [self.seg2, self.seg3]
        else:
            chosen = [self.seg1, self.seg2, self.seg3]
        return [p for p in chosen if p is not None]


def prune_unreferenced(steps, root_id=None) -> list:
    """Steps reachable from the root (default: final) via premises and chain
    rules, in their original order; the root comes out last."""
    if not steps:
        return []
    by_id = {s.id: s for s in steps}
    root_id = root_id if root_id is not None else steps[-1].id
    keep = set()
    stack = [root_id]
    while stack:
        sid = stack.pop()
        if sid in keep:
            continue
        keep.add(sid)
        step = by_id[sid]
        stack.extend(step.premises)
        stack.extend(l.rule_ref for l in step.chain)
    return [s for s in steps if s.id in keep]


def assemble(plan: SegmentPlan, axioms, conjecture) -> DirectProof:
    """Concatenate the plan's segments into one certified proof.

    Lemmas proved by an earlier segment satisfy the axiom references of later
    ones; unreferenced steps are pruned; the result must pass the checker.
    """
    out = []
    proved = {}  # canonical statement -> step id
    axiom_ids = {}
    counter = [0]

    def fresh_id():
        counter[0] += 1
        return str(counter[0])

    axiom_keys = {canonical_key(qe) for _, qe in axioms}
    root_id = None
    for part in plan.parts():
        local = {}
        for step in part.steps:
            key = canonical_key(step.statement) if step.statement is not None else None
            if step.rule is RuleKind.AXIOM:
                if key in proved:
                    local[step.id] = proved[key]
                elif key in axiom_ids:
                    local[step.id] = axiom_ids[key]
                elif key in axiom_keys:
                    nid = fresh_id()
                    axiom_ids[key] = nid
                    local[step.id] = nid
                    out.append(ProofStep(nid, step.statement, RuleKind.AXIOM))
                else:
                    raise CertificationFailed(
                        f"segment assumes unproved statement {step.statement!r}"
                    )
                continue
            if key in proved:
                local[step.id] = proved[key]
                continue
            nid = fresh_id()
            local[step.id] = nid
            out.append(
                ProofStep(
                    nid,
                    step.statement,
                    step.rule,
                    tuple(local[p] for p in step.premises),
                    tuple(
                        ChainLink(l.from_term, local[l.rule_ref], l.direction, l.position, l.to_term)
                        for l in step.chain
                    ),
                    rule_name=step.rule_name,
                    contrapositive=step.contrapositive,
                    tautology=step.tautology,
                )
            )
            if key is not None:
                proved[key] = nid
        root_id = local[part.final.id]

    if root_id is None:
        raise CertificationFailed("plan has no segments")
    by_id = {s.id: s for s in out}
    if not alpha_equal(by_id[root_id].statement, conjecture):
        links = _instantiation_link(by_id[root_id].statement, conjecture, root_id)
        bridge_id = fresh_id()
        out.append(ProofStep(bridge_id, conjecture, RuleKind.CHAIN, (root_id,), links))
        root_id = bridge_id
    out = prune_unreferenced(out, root_id)
    report = check_proof(out, [qe for _, qe in axioms], conjecture)
    if not report.accepted:
        bad = report.first_invalid
        raise CertificationFailed(
            f"assembled proof rejected at {bad.step_id if bad else '?'}: "
            f"{bad.reason if bad else report.reason}"
        )
    return DirectProof(out, origin="segment", certified=True)


# ---------------------------------------------------------------------------
# The full pipeline


@dataclass
class RunStats:
    baseline_len: int = 0
    final_len: int = 0
    per_variant_counts: dict = field(default_factory=dict)
    per_backend_wins: dict = field(default_factory=dict)
    wall_seconds: float = 0.0
    landing: str | None = None
    kickoff: str | None = None
    plans_tried: int = 0
    fallback_to_baseline: bool = False

    @property
    def reduction_pct(self) -> float:
        if self.baseline_len == 0:
            return 0.0
        return round(100.0 * (self.baseline_len - self.final_len) / self.baseline_len, 1)

    def to_dict(self):
        return {
            "baseline_len": self.baseline_len,
            "final_len": self.final_len,
            "reduction_pct": self.reduction_pct,
            "per_variant_counts": self.per_variant_counts,
            "per_backend_wins": self.per_backend_wins,
            "wall_seconds": round(self.wall_seconds, 3),
            "landing": self.landing,
            "kickoff": self.kickoff,
            "plans_tried": self.plans_tried,
            "fallback_to_baseline": self.fallback_to_baseline,
        }


def _chain_link_count(proof: DirectProof) -> int:
    return sum(len(s.chain) for s in proof.steps)


def _plans_for_landing(table, landing_id, conjecture, backends, kickoff_cap, deadline):
    """Assemble every kickoff plan for one landing; yields (plan, proof)."""
    results = []
    try:
        dag = build_dag(landing_id, table)
    except (MissingLemmaProof, CycleDetected):
        return results
    kickoffs = [nid for nid in dag.topological() if nid != dag.landing]
    if kickoff_cap is not None:
        kickoffs = kickoffs[:kickoff_cap]
    for kickoff in kickoffs:
        if deadline is not None and time.monotonic() >= deadline:
            break
        try:
            seg1 = build_segment1(dag, kickoff, backends)
            seg2, replaces = build_segment2(dag, seg1, dag.landing, backends)
            seg3, uses_landing, used = build_segment3(
                dag, None if replaces else seg1, seg2, dag.landing, conjecture, backends
            )
            # Dropping segment 2 must not strand statements only it proves.
            seg1_keys = {
                canonical_key(s.statement)
                for s in (seg1.lemma_steps() if not replaces else [])
            }
            seg2_only = {
                canonical_key(s.statement) for s in seg2.lemma_steps()
            } - seg1_keys
            drop = not uses_landing and not (used & seg2_only)
            plan = SegmentPlan(
                landing_id,
                kickoff,
                None if replaces else seg1,
                seg2,
                seg3,
                seg2_replaces_seg1=replaces,
                drop_seg2=drop,
            )
            proof = assemble(plan, table.problem.axioms, conjecture)
        except (CombineError, MissingLemmaProof):
            continue
        results.append((plan, proof))
    return results


def minimize(problem: Problem, config) -> tuple:
    """Run the whole pipeline on a problem; returns (proof, RunStats).

    config provides: backends, variants (set of VariantKind), landing_candidates,
    budget (RunBudget), baseline (optional ParsedDerivation), kickoff_cap,
    parallel_landings (bool).
    On total failure the redirected baseline proof is returned unchanged.
    """
    started = time.monotonic()
    budget: RunBudget = config.budget
    deadline = started + budget.overall_limit

    baseline_derivation = getattr(config, "baseline", None)
    if baseline_derivation is None:
        saturation = [b for b in config.backends if getattr(b, "kind", "") == "saturation"]
        for backend in saturation:
            baseline_problem = Problem(
                problem.name, problem.axioms, problem.conjecture, VariantKind.BASELINE
            )
            result = backend.prove(baseline_problem)
            if result.outcome is Outcome.PROVED:
                baseline = result.proof
                break
        else:
            raise NoBaseline(
                "no baseline available: supply a refutation transcript or a saturation backend"
            )
    else:
        baseline = to_direct(baseline_derivation)

    _, conjecture = problem.conjecture
    report = check_proof(baseline.steps, problem.axiom_statements(), conjecture)
    if not report.accepted:
        raise NoBaseline("baseline proof failed certification")
    baseline.certified = True

    stats = RunStats(baseline_len=proof_length(baseline))

    table = table_from_baseline(problem, baseline)
    generate_problems(table, baseline, config.variants)
    prove_stats = prove_all_variants(table, config.backends, budget)
    for entry in prove_stats.runs:
        stats.per_variant_counts[entry.variant] = (
            stats.per_variant_counts.get(entry.variant, 0) + 1
        )
    for record in table:
        if record.best is not None:
            stats.per_backend_wins[record.best.backend] = (
                stats.per_backend_wins.get(record.best.backend, 0) + 1
            )

    candidates = []  # (length, chain links, order, plan, proof)
    order = 0

    # The stored proof of the conjecture itself competes as a plan of its own.
    conj_record = table.conjecture_record
    if conj_record.best is not None:
        try:
            dag = build_dag(conj_record.id, table)
            stored = dag.self_contained(dag.landing)
            if not alpha_equal(stored.final.statement, conjecture):
                stored = _with_bridge(stored, conjecture)
            stored_report = check_proof(stored.steps, problem.axiom_statements(), conjecture)
            if stored_report.accepted:
                stored.certified = True
                order += 1
                candidates.append(
                    (proof_length(stored), _chain_link_count(stored), order, None, stored)
                )
        except CombineError:
            pass
        except MissingLemmaProof:
            pass

    landings = [
        lid for lid in candidate_landings(table, config.landing_candidates)
        if table[lid].best is not None
    ]
    parallel = getattr(config, "parallel_landings", False)
    if parallel and len(landings) > 1:
        with ThreadPoolExecutor(max_workers=min(budget.max_parallel, len(landings))) as pool:
            futures = [
                pool.submit(
                    _plans_for_landing, table, lid, conjecture, config.backends,
                    config.kickoff_cap, deadline,
                )
                for lid in landings
            ]
            per_landing = [f.result() for f in futures]
    else:
        per_landing = []
        for lid in landings:
            if time.monotonic() >= deadline:
                break
            per_landing.append(
                _plans_for_landing(
                    table, lid, conjecture, config.backends, config.kickoff_cap, deadline
                )
            )

    for results in per_landing:
        for plan, proof in results:
            order += 1
            stats.plans_tried += 1
            candidates.append(
                (proof_length(proof), _chain_link_count(proof), order, plan, proof)
            )

    best = min(candidates, default=None)
    if best is not None and best[0] <= proof_length(baseline):
        length, _, _, plan, proof = best
        stats.final_len = length
        if plan is not None:
            stats.landing, stats.kickoff = plan.landing, plan.kickoff
        stats.wall_seconds = time.monotonic() - started
        return proof, stats

    stats.final_len = proof_length(baseline)
    stats.fallback_to_baseline = True
    stats.wall_seconds = time.monotonic() - started
    return baseline, stats
