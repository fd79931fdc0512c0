"""Regenerate the bundled fixture corpus (tests/fixtures/corpus).

Each problem is a random rewrite system with a conjecture produced by a
forward walk; the accompanying .baseline.txt is the walk packaged as a
refutation transcript.  Deterministic: run with no arguments to reproduce
the committed files byte-for-byte.

    python3 tests/make_corpus.py
"""

import random
import sys
from pathlib import Path

from eqmin.calculus import check_proof
from eqmin.forwardgen import generate_refutation
from eqmin.proofio import write_saturation_transcript, write_tptp
from eqmin.redirect import proof_length, to_direct

CORPUS = Path(__file__).parent / "fixtures" / "corpus"
SEED = 2024
COUNT = 12


def main():
    CORPUS.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    made = 0
    attempt = 0
    while made < COUNT and attempt < 2000:
        attempt += 1
        gen = generate_refutation(
            rng,
            max_rules=3,
            depth=3,
            walk_steps=rng.randint(3, 7),
            with_derived_rule=attempt % 3 == 0,
            name=f"fx{made + 1:02d}",
        )
        if gen is None or gen.walk_length < 2:
            continue
        report = check_proof(
            gen.derivation.steps,
            gen.problem.axiom_statements(),
            gen.problem.conjecture[1],
        )
        if not report.accepted:
            continue
        direct = to_direct(gen.derivation)
        (CORPUS / f"{gen.problem.name}.p").write_text(
            write_tptp(gen.problem), encoding="utf-8"
        )
        (CORPUS / f"{gen.problem.name}.baseline.txt").write_text(
            write_saturation_transcript(gen.problem, gen.derivation.steps),
            encoding="utf-8",
        )
        made += 1
        print(f"{gen.problem.name}: baseline {proof_length(direct)} steps")
    if made < COUNT:
        sys.exit("could not generate the full corpus")


if __name__ == "__main__":
    main()
