import types

import pytest

from eqmin.calculus import ProofStep, RuleKind, check_proof
from eqmin.combine import (
    CertificationFailed,
    SegmentPlan,
    assemble,
    build_dag,
    build_segment1,
    build_segment2,
    candidate_landings,
    minimize,
    prune_unreferenced,
)
from eqmin.lemmas import BestProof, generate_problems, table_from_baseline
from eqmin.orchestrate import BackendResult, Outcome, RunBudget
from eqmin.proofio import Problem, VariantKind
from eqmin.redirect import DirectProof, proof_length, to_direct
from eqmin.terms import alpha_equal, canonical_key, parse_quantified


def _config(sc, **overrides):
    sat, chain = sc.scripted_backends()
    base = dict(
        backends=[sat, chain],
        variants={VariantKind.BIG_STEP, VariantKind.SMALL_STEP, VariantKind.ABSTRACTED},
        landing_candidates=6,
        budget=RunBudget(overall_limit=300, max_parallel=1),
        baseline=sc.baseline,
        kickoff_cap=None,
        parallel_landings=False,
    )
    base.update(overrides)
    return types.SimpleNamespace(**base)


class TestCandidateLandings:
    def _table(self, n):
        ax = parse_quantified("x = y◇(y◇x)")
        stmts = [parse_quantified(f"x = y◇(y◇(x◇{c}))") for c in "abcdefg"[:n]]
        steps = [ProofStep("1", ax, RuleKind.AXIOM)] + [
            ProofStep(str(i + 2), s, RuleKind.SUPERPOSITION, ("1", "1"))
            for i, s in enumerate(stmts)
        ]
        problem = Problem("t", (("ax1", ax),), ("goal", stmts[-1]))
        return table_from_baseline(problem, DirectProof(steps))

    def test_latest_first_with_conjecture(self):
        table = self._table(7)
        got = candidate_landings(table, 6)
        assert got == [str(i) for i in range(8, 2, -1)]
        assert got[0] == table.conjecture_record.id

    def test_k_one_gives_conjecture(self):
        table = self._table(7)
        assert candidate_landings(table, 1) == [table.conjecture_record.id]

    def test_clamped_to_proof_length(self):
        table = self._table(3)
        assert len(candidate_landings(table, 6)) == 3


class TestBuildDag:
    def test_worked_scenario_dag(self, worked_scenario):
        sc = worked_scenario
        baseline = to_direct(sc.baseline)
        table = table_from_baseline(sc.problem, baseline)
        generate_problems(
            table, baseline,
            {VariantKind.BIG_STEP, VariantKind.SMALL_STEP, VariantKind.ABSTRACTED},
        )
        from eqmin.orchestrate import prove_all_variants

        sat, chain = sc.scripted_backends()
        prove_all_variants(table, [sat, chain], RunBudget(120, 1))
        landing = table.by_statement(sc.stmts["L6"])
        dag = build_dag(landing.id, table)
        lemma_statements = {canonical_key(n.statement) for n in dag.lemma_nodes()}
        for name in ("L1", "L2", "L3", "L4", "L5", "L6"):
            assert canonical_key(sc.stmts[name]) in lemma_statements
        l3_node = dag.node_for_statement(sc.stmts["L3"])
        deps = {canonical_key(dag.nodes[d].statement) for d in dag.dependencies(l3_node.id)}
        assert canonical_key(sc.stmts["L1"]) in deps
        assert canonical_key(sc.stmts["L2"]) in deps
        assert canonical_key(sc.stmts["A"]) in deps

    def test_landing_proved_from_axioms_only(self):
        ax = parse_quantified("f(x) = x")
        lemma = parse_quantified("f(f(x)) = x")
        baseline = DirectProof([
            ProofStep("1", ax, RuleKind.AXIOM),
            ProofStep("2", lemma, RuleKind.SUPERPOSITION, ("1", "1")),
        ])
        problem = Problem("t", (("ax1", ax),), ("goal", lemma))
        table = table_from_baseline(problem, baseline)
        proof = DirectProof([
            ProofStep("a", ax, RuleKind.AXIOM),
            ProofStep("l", lemma, RuleKind.SUPERPOSITION, ("a", "a")),
        ], origin="bigstep")
        table.records[0].best = BestProof(proof, 1, VariantKind.BIG_STEP, "m")
        dag = build_dag(table.records[0].id, table)
        assert [n.id for n in dag.lemma_nodes()] == [table.records[0].id]
        assert all(dag.nodes[d].is_axiom for d in dag.dependencies(dag.landing))

    def test_alpha_equal_nodes_merge_keeping_shorter(self):
        # one statement (a four-fold application collapse), two stored routes
        # of lengths 3 and 2; the merged node must carry the 2-step route
        ax = parse_quantified("f(x) = x")
        f2 = parse_quantified("f(f(x)) = x")
        f3 = parse_quantified("f(f(f(x))) = x")
        lemma = parse_quantified("f(f(f(f(x)))) = x")
        twin = parse_quantified("f(f(f(f(y)))) = y")
        top = parse_quantified("f(f(f(f(f(f(f(f(x)))))))) = x")
        long_route = DirectProof([
            ProofStep("a", ax, RuleKind.AXIOM),
            ProofStep("p1", f2, RuleKind.SUPERPOSITION, ("a", "a")),
            ProofStep("p2", f3, RuleKind.SUPERPOSITION, ("a", "p1")),
            ProofStep("l", lemma, RuleKind.SUPERPOSITION, ("a", "p2")),
        ], origin="bigstep")
        short_route = DirectProof([
            ProofStep("a", ax, RuleKind.AXIOM),
            ProofStep("q1", f2, RuleKind.SUPERPOSITION, ("a", "a")),
            ProofStep("l", twin, RuleKind.SUPERPOSITION, ("q1", "q1")),
        ], origin="bigstep")
        top_proof = DirectProof([
            ProofStep("u", lemma, RuleKind.AXIOM),
            ProofStep("v", twin, RuleKind.AXIOM),
            ProofStep("t", top, RuleKind.SUPERPOSITION, ("u", "v")),
        ], origin="smallstep")
        baseline = DirectProof([
            ProofStep("1", ax, RuleKind.AXIOM),
            ProofStep("2", lemma, RuleKind.SUPERPOSITION, ("1", "1")),
            ProofStep("3", twin, RuleKind.SUPERPOSITION, ("1", "1")),
            ProofStep("4", top, RuleKind.SUPERPOSITION, ("2", "3")),
        ])
        problem = Problem("t", (("ax1", ax),), ("goal", top))
        table = table_from_baseline(problem, baseline)
        table["2"].best = BestProof(long_route, 3, VariantKind.BIG_STEP, "m")
        table["3"].best = BestProof(short_route, 2, VariantKind.BIG_STEP, "m")
        table["4"].best = BestProof(top_proof, 1, VariantKind.SMALL_STEP, "m")
        dag = build_dag("4", table)
        node = dag.node_for_statement(lemma)
        assert node is dag.node_for_statement(twin)
        merged = dag.self_contained(node.id)
        assert proof_length(merged) == 2
        assert check_proof(merged.steps, [ax], lemma).accepted


class TestSegments:
    def _small_system(self):
        ax = parse_quantified("f(x) = x")
        l1 = parse_quantified("f(f(x)) = x")
        goal = parse_quantified("f(f(f(x))) = x")
        baseline = DirectProof([
            ProofStep("1", ax, RuleKind.AXIOM),
            ProofStep("2", l1, RuleKind.SUPERPOSITION, ("1", "1")),
            ProofStep("3", goal, RuleKind.SUPERPOSITION, ("1", "2")),
        ])
        problem = Problem("t", (("ax1", ax),), ("goal", goal))
        table = table_from_baseline(problem, baseline)
        l1_proof = DirectProof([
            ProofStep("a", ax, RuleKind.AXIOM),
            ProofStep("l", l1, RuleKind.SUPERPOSITION, ("a", "a")),
        ], origin="bigstep")
        goal_proof = DirectProof([
            ProofStep("a", ax, RuleKind.AXIOM),
            ProofStep("u", l1, RuleKind.AXIOM),
            ProofStep("g", goal, RuleKind.SUPERPOSITION, ("a", "u")),
        ], origin="smallstep")
        table["2"].best = BestProof(l1_proof, 1, VariantKind.BIG_STEP, "m")
        table["3"].best = BestProof(goal_proof, 1, VariantKind.SMALL_STEP, "m")
        return table

    def test_segment1_kickoff_on_axioms_uses_stored(self):
        table = self._small_system()
        dag = build_dag("3", table)
        kickoff = dag.node_for_statement(parse_quantified("f(f(x)) = x"))

        class NoBackend:
            name = "none"
            kind = "saturation"

            def prove(self, problem):
                raise AssertionError("must not run for axiom-only kickoffs")

        seg1 = build_segment1(dag, kickoff.id, [NoBackend()])
        assert proof_length(seg1) == 1

    def test_segment2_falls_back_to_stored(self):
        table = self._small_system()
        dag = build_dag("3", table)
        kickoff = dag.node_for_statement(parse_quantified("f(f(x)) = x"))

        class GivesUp:
            name = "giveup"
            kind = "completion"

            def prove(self, problem):
                return BackendResult(Outcome.GAVE_UP)

        seg1 = build_segment1(dag, kickoff.id, [GivesUp()])
        seg2, replaces = build_segment2(dag, seg1, dag.landing, [GivesUp()])
        assert replaces
        assert proof_length(seg2) == 2  # stored goal proof, expanded
        assert alpha_equal(seg2.final.statement, parse_quantified("f(f(f(x))) = x"))


class TestPrune:
    def test_dead_steps_removed_and_fixpoint(self):
        ax = parse_quantified("f(x) = x")
        steps = [
            ProofStep("1", ax, RuleKind.AXIOM),
            ProofStep("2", parse_quantified("f(f(x)) = x"), RuleKind.SUPERPOSITION,
                      ("1", "1")),
            ProofStep("dead", parse_quantified("f(f(f(x))) = x"),
                      RuleKind.SUPERPOSITION, ("1", "2")),
            ProofStep("3", parse_quantified("f(f(f(f(x)))) = x"),
                      RuleKind.SUPERPOSITION, ("2", "2")),
        ]
        pruned = prune_unreferenced(steps)
        assert [s.id for s in pruned] == ["1", "2", "3"]
        assert prune_unreferenced(pruned) == pruned


class TestMinimize:
    def test_worked_scenario(self, worked_scenario):
        sc = worked_scenario
        proof, stats = minimize(sc.problem, _config(sc))
        assert stats.baseline_len == 7
        assert stats.final_len == 5
        assert proof.certified
        landing_record = None
        from eqmin.lemmas import table_from_baseline as _tfb

        # landing is the baseline record whose statement is L6
        assert stats.landing is not None and stats.kickoff is not None
        l6_key = canonical_key(sc.stmts["L6"])
        assert not any(
            s.statement is not None and canonical_key(s.statement) == l6_key
            for s in proof.steps
        )
        report = check_proof(proof.steps, [sc.axiom], sc.stmts["C"])
        assert report.accepted

    def test_deterministic_across_runs(self, worked_scenario):
        sc = worked_scenario
        from eqmin.proofio import write_native_steps

        proof1, stats1 = minimize(sc.problem, _config(sc))
        proof2, stats2 = minimize(sc.problem, _config(sc))
        assert write_native_steps(proof1.steps, proof1.origin) == write_native_steps(
            proof2.steps, proof2.origin
        )
        assert stats1.final_len == stats2.final_len
        assert (stats1.landing, stats1.kickoff) == (stats2.landing, stats2.kickoff)

    def test_parallel_landings_same_answer(self, worked_scenario):
        sc = worked_scenario
        serial, _ = minimize(sc.problem, _config(sc))
        parallel, _ = minimize(
            sc.problem,
            _config(sc, parallel_landings=True,
                    budget=RunBudget(overall_limit=300, max_parallel=4)),
        )
        from eqmin.proofio import write_native_steps

        assert write_native_steps(serial.steps, "x") == write_native_steps(
            parallel.steps, "x"
        )

    def test_hopeless_backends_fall_back_to_baseline(self, worked_scenario):
        sc = worked_scenario

        class Hopeless:
            name = "hopeless"
            kind = "completion"

            def prove(self, problem):
                return BackendResult(Outcome.GAVE_UP)

        proof, stats = minimize(sc.problem, _config(sc, backends=[Hopeless()]))
        assert stats.fallback_to_baseline
        assert stats.final_len == stats.baseline_len == 7
        assert proof.certified


class TestAssemble:
    def test_unreferenced_lemma_pruned(self, worked_scenario):
        sc = worked_scenario
        seg1 = sc.saturation_proof(["L1", "X", "L3!seg"])
        dead = sc.saturation_proof(["L1", "L2"])  # proves L2, never used later
        seg3 = sc.chain_proof("C", ("X", "L3"))
        plan = SegmentPlan("landing", "kickoff", seg1, dead, seg3)
        proof = assemble(plan, sc.problem.axioms, sc.stmts["C"])
        l2_key = canonical_key(sc.stmts["L2"])
        assert not any(
            s.statement is not None and canonical_key(s.statement) == l2_key
            for s in proof.steps
        )
        assert proof_length(proof) == 5

    def test_unproved_assumption_rejected(self, worked_scenario):
        sc = worked_scenario
        seg3 = sc.chain_proof("C", ("X", "L3"))  # assumes X and L3
        plan = SegmentPlan("landing", "kickoff", None, None, seg3)
        with pytest.raises(CertificationFailed):
            assemble(plan, sc.problem.axioms, sc.stmts["C"])
