"""eqmin: minimize unit-equality proofs.

Pipeline: a refutation becomes a direct proof, its lemmas are re-proved from
big-step / small-step / abstracted problem variants across several prover
backends, and the shortest sub-proofs recombine into a three-segment proof
that is re-certified and rendered natively and as Lean-style text.
"""

from .calculus import (
    ChainLink,
    CheckReport,
    ProofStep,
    RuleKind,
    apply_equality_resolution,
    apply_parallel_superposition,
    apply_superposition,
    check_proof,
)
from .combine import RunStats, assemble, build_dag, candidate_landings, minimize
from .emit import RenderStyle, emit
from .lemmas import (
    LemmaRecord,
    LemmaTable,
    abstraction_candidates,
    make_abstracted,
    make_big_step,
    make_small_step,
    propagate_generalization,
    table_from_baseline,
)
from .orchestrate import (
    BackendSpec,
    Outcome,
    RunBudget,
    builtin_search,
    expand_small_step,
    make_backend,
    prove_all_variants,
    run_backend,
)
from .proofio import (
    ParsedDerivation,
    Problem,
    VariantKind,
    parse_chain_proof,
    parse_native_steps,
    parse_saturation_proof,
    parse_tptp_problem,
    write_native_steps,
    write_tptp,
)
from .redirect import DirectProof, proof_length, to_direct
from .terms import (
    OP,
    App,
    Const,
    Equation,
    QuantifiedEquation,
    Subst,
    Term,
    Var,
    alpha_equal,
    forall_closure,
    match_term,
    parse_equation,
    parse_quantified,
    parse_term,
    rename_apart,
    rewrite_at,
    rewrite_parallel,
    substitute,
    unify,
)

__version__ = "0.1.0"
