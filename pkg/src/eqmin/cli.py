"""Command-line entry points: minimize, check, batch.

Problems come from TPTP files or from the bundled implication table
(``650=>448`` style ids).  Batch mode walks a directory of problems with
matching ``.baseline.txt`` refutation transcripts and writes per-problem and
aggregate statistics as CSV and JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .calculus import check_proof
from .combine import NoBaseline, RunStats, minimize
from .emit import RenderStyle, emit
from .orchestrate import BackendSpec, RunBudget, make_backend
from .proofio import (
    ParseError,
    Problem,
    UnsupportedLogic,
    VariantKind,
    parse_native_steps,
    parse_saturation_proof,
    parse_tptp_problem,
)
from .redirect import proof_length
from .terms import parse_quantified

ENV_PREFIX = "EQMIN_"

# Named magma equations with formulas given in the sources we implement
# against; other Equational Theories Project ids are not bundled.
EQUATION_TABLE = {
    650: "x = x◇(y◇((z◇x)◇y))",
    448: "x = x◇(y◇(z◇(x◇z)))",
}

VARIANT_SETS = {
    "BA": {VariantKind.BIG_STEP, VariantKind.ABSTRACTED},
    "SA": {VariantKind.SMALL_STEP, VariantKind.ABSTRACTED},
    "BS": {VariantKind.BIG_STEP, VariantKind.SMALL_STEP},
    "BSA": {VariantKind.BIG_STEP, VariantKind.SMALL_STEP, VariantKind.ABSTRACTED},
}


@dataclass
class MinimizeConfig:
    """Pipeline configuration shared by the CLI commands."""

    variants: set = field(default_factory=lambda: set(VARIANT_SETS["SA"]))
    landing_candidates: int = 6
    time_limit: float = 10.0
    overall_limit: float = 600.0
    backends: list = field(default_factory=list)
    baseline: object = None
    kickoff_cap: int | None = None
    parallel_landings: bool = False
    max_parallel: int = 4
    seed: int = 0
    out_dir: Path = Path(".")

    def __post_init__(self):
        if not self.variants:
            raise ValueError("variant set must not be empty")
        if self.time_limit <= 0 or self.overall_limit <= 0:
            raise ValueError("limits must be positive")

    @property
    def budget(self) -> RunBudget:
        return RunBudget(self.overall_limit, self.max_parallel)


def _env_default(name, fallback):
    return os.environ.get(ENV_PREFIX + name, fallback)


def _parse_backends(spec_text: str, time_limit: float):
    backends = []
    for part in spec_text.split(","):
        part = part.strip()
        if not part:
            continue
        if part == "builtin":
            backends.append(make_backend(BackendSpec("builtin")))
            continue
        if "=" not in part:
            raise SystemExit(f"bad backend spec {part!r}; use kind=/path or 'builtin'")
        kind, _, path = part.partition("=")
        backends.append(make_backend(BackendSpec(kind.strip(), path.strip(), time_limit)))
    if not backends:
        raise SystemExit("no backends configured")
    return backends


def _load_problem(text_or_path: str) -> Problem:
    if "=>" in text_or_path:
        left, _, right = text_or_path.partition("=>")
        try:
            ax_id, conj_id = int(left), int(right)
        except ValueError:
            raise SystemExit(f"bad implication id {text_or_path!r}")
        if ax_id not in EQUATION_TABLE or conj_id not in EQUATION_TABLE:
            known = ", ".join(str(k) for k in sorted(EQUATION_TABLE))
            raise SystemExit(
                f"unknown equation id in {text_or_path!r}; bundled ids: {known}"
            )
        return Problem(
            f"{ax_id}_implies_{conj_id}",
            ((f"eq{ax_id}", parse_quantified(EQUATION_TABLE[ax_id])),),
            (f"eq{conj_id}", parse_quantified(EQUATION_TABLE[conj_id])),
        )
    path = Path(text_or_path)
    if not path.exists():
        raise SystemExit(f"no such problem file: {path}")
    return parse_tptp_problem(path.read_text(encoding="utf-8"), path.stem)


def _write_outputs(problem: Problem, proof, stats: RunStats, out_dir: Path, log=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = problem.name
    (out_dir / f"{stem}.native.json").write_text(
        emit(proof, RenderStyle.NATIVE), encoding="utf-8"
    )
    (out_dir / f"{stem}.calc.lean.txt").write_text(
        emit(proof, RenderStyle.LEAN_CALC, theorem_name=stem), encoding="utf-8"
    )
    (out_dir / f"{stem}.compact.lean.txt").write_text(
        emit(proof, RenderStyle.LEAN_COMPACT, theorem_name=stem), encoding="utf-8"
    )
    (out_dir / f"{stem}.stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def _run_one(problem: Problem, config: MinimizeConfig, baseline_path=None):
    if baseline_path is not None:
        config.baseline = parse_saturation_proof(
            Path(baseline_path).read_text(encoding="utf-8")
        )
    else:
        config.baseline = None
    return minimize(problem, config)


def cmd_minimize(args) -> int:
    config = _config_from_args(args)
    problem = _load_problem(args.problem)
    try:
        proof, stats = _run_one(problem, config, args.baseline)
    except NoBaseline as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: supply --baseline <refutation transcript>", file=sys.stderr)
        return 2
    _write_outputs(problem, proof, stats, config.out_dir)
    print(
        f"{problem.name}: baseline {stats.baseline_len} -> final {stats.final_len} "
        f"({stats.reduction_pct}% reduction)"
        + (" [baseline fallback]" if stats.fallback_to_baseline else "")
    )
    return 0


def cmd_check(args) -> int:
    problem = _load_problem(args.problem)
    try:
        steps, _ = parse_native_steps(Path(args.proof).read_text(encoding="utf-8"))
    except (ParseError, json.JSONDecodeError) as exc:
        print(f"error: cannot parse proof: {exc}", file=sys.stderr)
        return 2
    report = check_proof(steps, problem.axiom_statements(), problem.conjecture[1])
    if report.accepted:
        note = "" if report.fully_certified else " (partially certified)"
        print(f"accepted{note}")
        return 0
    bad = report.first_invalid
    print(f"rejected at step {bad.step_id}: {bad.reason}" if bad else "rejected")
    return 1


def _batch_rows(corpus: Path, config: MinimizeConfig):
    rows = []
    for path in sorted(corpus.glob("*.p")):
        try:
            problem = parse_tptp_problem(path.read_text(encoding="utf-8"), path.stem)
        except (ParseError, UnsupportedLogic) as exc:
            rows.append({"problem": path.stem, "status": f"parse_error: {exc}",
                         "baseline": "", "final": "", "reduction_pct": ""})
            continue
        baseline = path.with_suffix(".baseline.txt")
        try:
            proof, stats = _run_one(
                problem, config, baseline if baseline.exists() else None
            )
        except NoBaseline:
            rows.append({"problem": path.stem, "status": "no_baseline",
                         "baseline": "", "final": "", "reduction_pct": ""})
            continue
        except Exception as exc:
            rows.append({"problem": path.stem, "status": f"error: {exc}",
                         "baseline": "", "final": "", "reduction_pct": ""})
            continue
        rows.append({
            "problem": path.stem,
            "status": "ok",
            "baseline": stats.baseline_len,
            "final": stats.final_len,
            "reduction_pct": stats.reduction_pct,
        })
    return rows


def _aggregate(rows, min_baseline):
    done = [r for r in rows if r["status"] == "ok"]
    subset = [r for r in done if r["baseline"] >= min_baseline]

    def avg(rs, key):
        return round(sum(r[key] for r in rs) / len(rs), 1) if rs else 0.0

    return {
        "problems": len(rows),
        "solved": len(done),
        "avg_before": avg(done, "baseline"),
        "avg_after": avg(done, "final"),
        "long_problems": len(subset),
        "long_avg_before": avg(subset, "baseline"),
        "long_avg_after": avg(subset, "final"),
        "min_baseline_steps": min_baseline,
    }


def render_batch_csv(rows, aggregate, config_label: str) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf,
        ["problem", "status", "baseline", "final", "reduction_pct", "config"],
        lineterminator="\n",
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "config": config_label})
    writer.writerow({
        "problem": "TOTAL",
        "status": f"solved {aggregate['solved']}/{aggregate['problems']}",
        "baseline": aggregate["avg_before"],
        "final": aggregate["avg_after"],
        "reduction_pct": "",
        "config": config_label,
    })
    return buf.getvalue()


def cmd_batch(args) -> int:
    config = _config_from_args(args)
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise SystemExit(f"not a directory: {corpus}")
    rows = _batch_rows(corpus, config)
    aggregate = _aggregate(rows, args.min_baseline_steps)
    text = render_batch_csv(rows, aggregate, args.variants)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / "batch.csv").write_text(text, encoding="utf-8")
    (config.out_dir / "batch.json").write_text(
        json.dumps({"rows": rows, "aggregate": aggregate}, indent=2) + "\n",
        encoding="utf-8",
    )
    print(text, end="")
    return 0


def _config_from_args(args) -> MinimizeConfig:
    backends = _parse_backends(args.backends, args.time_limit)
    return MinimizeConfig(
        variants=set(VARIANT_SETS[args.variants]),
        landing_candidates=args.landing_candidates,
        time_limit=args.time_limit,
        overall_limit=args.overall_limit,
        backends=backends,
        kickoff_cap=args.kickoff_cap,
        parallel_landings=args.parallel > 1,
        max_parallel=args.parallel,
        seed=args.seed,
        out_dir=Path(args.out),
    )


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--variants", choices=sorted(VARIANT_SETS),
                   default=_env_default("VARIANTS", "SA"))
    p.add_argument("--landing-candidates", type=int,
                   default=int(_env_default("LANDING_CANDIDATES", "6")))
    p.add_argument("--time-limit", type=float,
                   default=float(_env_default("TIME_LIMIT", "10")))
    p.add_argument("--overall-limit", type=float,
                   default=float(_env_default("OVERALL_LIMIT", "600")))
    p.add_argument("--backends", default=_env_default("BACKENDS", "builtin"),
                   help="comma list: builtin | saturation=/path | completion=/path")
    p.add_argument("--kickoff-cap", type=int, default=None,
                   help="limit kickoff candidates per landing")
    p.add_argument("--parallel", type=int, default=int(_env_default("PARALLEL", "4")))
    p.add_argument("--seed", type=int, default=int(_env_default("SEED", "0")))
    p.add_argument("--out", default=_env_default("OUT", "."))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqmin", description="minimize unit-equality proofs"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_min = sub.add_parser("minimize", help="minimize one problem")
    p_min.add_argument("problem", help="TPTP file or implication id like 650=>448")
    p_min.add_argument("--baseline", help="refutation transcript to start from")
    _add_common(p_min)
    p_min.set_defaults(func=cmd_minimize)

    p_check = sub.add_parser("check", help="certify a native-format proof")
    p_check.add_argument("proof", help="native JSON proof file")
    p_check.add_argument("problem", help="TPTP file or implication id")
    p_check.set_defaults(func=cmd_check)

    p_batch = sub.add_parser("batch", help="minimize a directory of problems")
    p_batch.add_argument("corpus", help="directory of .p files (+ .baseline.txt)")
    p_batch.add_argument("--min-baseline-steps", type=int,
                         default=int(_env_default("MIN_BASELINE_STEPS", "15")))
    _add_common(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, UnsupportedLogic) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
