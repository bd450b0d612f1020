"""Command-line entry point for the translation pipeline.

Subcommands: build-corpus, summarize-ast, translate, repair,
repo add|search, evaluate, report. Exit codes: 0 success,
1 configuration/input error, 2 partial failures (some units errored).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import ast_summary, corpus, metrics
from .adapters import ToolchainError
from .config import (
    ConfigError,
    PipelineConfig,
    build_compiler,
    build_llm,
    build_runner,
    load_config,
    save_recording,
)
from .javaparse import parse as parse_java
from .llm import CompletionError
from .repair_engine import (
    Branch,
    EngineDeps,
    IterationRecord,
    RepairConfig,
    RepairEngineError,
    TestCase,
    TranslationUnit,
    UnitStatus,
    harvest_cases,
    run_repair_loop,
    translate,
    write_trace,
)
from .repair_repo import (
    DuplicateCaseError,
    ErrorQuery,
    RepairCase,
    Repository,
    RepositoryFormatError,
    retrieve,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG


# --- build-corpus ------------------------------------------------------------

def cmd_build_corpus(args) -> int:
    config = load_config(args.config)
    chapters = args.chapters or config.path("chapters")
    snippets = args.snippets or config.path("snippets")
    pairs = args.pairs or config.path("pairs")
    out_dir = args.out or config.path("datasets")
    if out_dir is None:
        return _fail("no output directory (use --out or paths.datasets)")
    if chapters is None and snippets is None and pairs is None:
        return _fail("no input directories configured")
    for name, directory in (("chapters", chapters), ("snippets", snippets), ("pairs", pairs)):
        if directory is not None and not Path(directory).is_dir():
            return _fail(f"{name} directory does not exist: {directory}")
    llm = build_llm(config)
    try:
        stats = corpus.build_corpus(
            chapters, snippets, pairs, out_dir, llm,
            decoding=config.decoding, allowlist=config.allowlist,
        )
    except (ValueError, CompletionError) as exc:
        return _fail(str(exc))
    save_recording(llm, config)
    for key in sorted(stats):
        if key != "errors":
            print(f"{key}: {stats[key]}")
    for problem in stats["errors"]:
        print(f"problem: {problem}", file=sys.stderr)
    return EXIT_PARTIAL if stats["errors"] else EXIT_OK


# --- summarize-ast -----------------------------------------------------------

def cmd_summarize_ast(args) -> int:
    config = load_config(args.config)
    source = Path(args.file).read_text(encoding="utf-8")
    summary = ast_summary.summarize(parse_java(source), config.retained_categories, source=source)
    if args.tokens:
        vocab = (
            ast_summary.load_vocab(args.vocab)
            if args.vocab
            else ast_summary.default_vocab(config.retained_categories)
        )
        print(" ".join(ast_summary.tokenize_structure(summary, vocab)))
    else:
        for category in summary.categories:
            print(category)
    return EXIT_OK


# --- translate / repair --------------------------------------------------------

def _load_tests(path: Path) -> list[TestCase]:
    records = json.loads(path.read_text(encoding="utf-8"))
    return [TestCase(r["input"], r["expected_output"]) for r in records]


def _discover_units(benchmark_dir: Path) -> list[dict]:
    units = []
    for java_file in sorted(benchmark_dir.glob("*.java")):
        stem = java_file.stem
        tests_file = benchmark_dir / f"{stem}.tests.json"
        ref_file = benchmark_dir / f"{stem}.ref.cj"
        units.append(
            {
                "unit_id": stem,
                "java": java_file.read_text(encoding="utf-8"),
                "tests": _load_tests(tests_file) if tests_file.exists() else [],
                "reference": ref_file.read_text(encoding="utf-8") if ref_file.exists() else "",
            }
        )
    return units


def _run_unit(spec: dict, cfg: RepairConfig, deps: EngineDeps, config: PipelineConfig):
    record = translate(
        spec["java"], deps.llm, retained=config.retained_categories, decoding=deps.decoding
    )
    unit = TranslationUnit(
        java_source=spec["java"],
        test_suite=spec["tests"],
        candidates=[record],
        unit_id=spec["unit_id"],
    )
    return run_repair_loop(unit, cfg, deps)


def cmd_translate(args) -> int:
    config = load_config(args.config, _translate_overrides(args))
    benchmark = args.benchmark or config.path("benchmark")
    if benchmark is None or not Path(benchmark).is_dir():
        return _fail(f"benchmark directory does not exist: {benchmark}")
    traces_dir = args.traces or config.path("traces")
    reports_dir = config.path("reports")

    llm = build_llm(config)
    compiler = build_compiler(config)
    runner = build_runner(config)
    repo = None
    repo_path = config.path("repository")
    if repo_path is not None and Path(repo_path).exists():
        repo = Repository.load(repo_path)

    cfg = config.repair
    if args.no_repair:
        cfg = RepairConfig(
            threshold=cfg.threshold, max_iterations=1, weights=cfg.weights, rag_top_k=cfg.rag_top_k
        )
    deps = EngineDeps(llm=llm, compiler=compiler, runner=runner, repo=repo, decoding=config.decoding)

    units = _discover_units(Path(benchmark))
    if not units:
        return _fail(f"no units (*.java) in {benchmark}")

    results: dict[str, TranslationUnit] = {}
    errors: dict[str, str] = {}

    def work(spec):
        try:
            return spec["unit_id"], _run_unit(spec, cfg, deps, config), None
        except (ToolchainError, RepairEngineError, CompletionError, ValueError) as exc:
            return spec["unit_id"], None, f"{type(exc).__name__}: {exc}"

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(work, units))
    else:
        outcomes = [work(spec) for spec in units]

    for unit_id, unit, error in outcomes:
        if error is not None:
            errors[unit_id] = error
        else:
            results[unit_id] = unit
    save_recording(llm, config)

    if traces_dir is not None:
        Path(traces_dir).mkdir(parents=True, exist_ok=True)
        for unit_id in sorted(results):
            write_trace(results[unit_id], Path(traces_dir) / f"{unit_id}.trace.json", redact=args.redact)

    if reports_dir is not None:
        Path(reports_dir).mkdir(parents=True, exist_ok=True)
        references = {spec["unit_id"]: spec["reference"] for spec in units}
        with open(Path(reports_dir) / "outcomes.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for unit_id in sorted(results):
                unit = results[unit_id]
                final = unit.candidates[-1]
                record = {
                    "unit_id": unit_id,
                    "status": unit.status.value,
                    "compiled": final.compile_status is not None and final.compile_status.value == "success",
                    "all_tests_passed": unit.status is UnitStatus.ACCEPTED,
                    "candidate": final.candidate,
                    "reference": references.get(unit_id, ""),
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    if args.harvest and repo_path is not None:
        repo = Repository.load(repo_path) if Path(repo_path).exists() else Repository()
        harvested = 0
        for unit_id in sorted(results):
            unit = results[unit_id]
            if unit.status is UnitStatus.ACCEPTED:
                for case in harvest_cases(unit):
                    try:
                        repo.add_case(case)
                        harvested += 1
                    except DuplicateCaseError:
                        pass
        repo.save(repo_path)
        print(f"harvested {harvested} repair case(s) into {repo_path}")

    counts = {status.value: 0 for status in UnitStatus if status is not UnitStatus.PENDING}
    for unit in results.values():
        counts[unit.status.value] += 1
    for unit_id in sorted(results):
        print(f"{unit_id}: {results[unit_id].status.value}")
    for unit_id in sorted(errors):
        print(f"{unit_id}: error: {errors[unit_id]}", file=sys.stderr)
    print(
        f"accepted={counts['accepted']} stagnated={counts['stagnated']} "
        f"budget_exhausted={counts['budget_exhausted']} errored={len(errors)}"
    )
    return EXIT_PARTIAL if errors else EXIT_OK


def _translate_overrides(args) -> dict:
    overrides = {}
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.threshold is not None:
        overrides["repair.threshold"] = args.threshold
    if args.max_iterations is not None:
        overrides["repair.max_iterations"] = args.max_iterations
    return overrides


def cmd_repair(args) -> int:
    config = load_config(args.config, _translate_overrides(args))
    java = Path(args.java).read_text(encoding="utf-8")
    candidate = Path(args.candidate).read_text(encoding="utf-8")
    tests = _load_tests(Path(args.tests)) if args.tests else []

    unit = TranslationUnit(
        java_source=java,
        test_suite=tests,
        candidates=[IterationRecord(k=0, candidate=candidate, branch=Branch.INITIAL)],
        unit_id=Path(args.candidate).stem,
    )
    repo = None
    repo_path = config.path("repository")
    if repo_path is not None and Path(repo_path).exists():
        repo = Repository.load(repo_path)
    deps = EngineDeps(
        llm=build_llm(config),
        compiler=build_compiler(config),
        runner=build_runner(config),
        repo=repo,
        decoding=config.decoding,
    )
    try:
        unit = run_repair_loop(unit, config.repair, deps)
    except (ToolchainError, RepairEngineError, CompletionError) as exc:
        print(f"{unit.unit_id}: error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    if args.out:
        write_trace(unit, args.out, redact=args.redact)
    print(f"{unit.unit_id}: {unit.status.value}")
    final = unit.candidates[-1]
    print(final.candidate)
    return EXIT_OK


# --- repo ---------------------------------------------------------------------

def cmd_repo_add(args) -> int:
    repo_path = Path(args.repo)
    repo = Repository.load(repo_path) if repo_path.exists() else Repository()
    payload = json.loads(Path(args.file).read_text(encoding="utf-8"))
    records = payload if isinstance(payload, list) else [payload]
    try:
        for record in records:
            repo.add_case(RepairCase.from_record(record))
    except (DuplicateCaseError, RepositoryFormatError, ValueError) as exc:
        return _fail(str(exc))
    repo.save(repo_path)
    print(f"repository now holds {len(repo)} case(s)")
    return EXIT_OK


def cmd_repo_search(args) -> int:
    config = load_config(args.config)
    repo_path = Path(args.repo) if args.repo else config.path("repository")
    if repo_path is None or not repo_path.exists():
        return _fail(f"repository file does not exist: {repo_path}")
    repo = Repository.load(repo_path)
    error_info = args.error or (Path(args.error_file).read_text(encoding="utf-8") if args.error_file else "")
    if not error_info.strip():
        return _fail("provide --error or --error-file")
    fragment = Path(args.fragment_file).read_text(encoding="utf-8") if args.fragment_file else ""
    tags = tuple(t for t in (args.tags or "").split(",") if t)
    query = ErrorQuery(error_info, fragment, tags)
    try:
        ranked = retrieve(query, repo, args.top_k, config.repair.weights)
    except ValueError as exc:
        return _fail(str(exc))
    for case, breakdown in ranked:
        scores = " ".join(f"s{j + 1}={s:.3f}" for j, s in enumerate(breakdown.scores))
        print(f"{case.id}\ttotal={breakdown.total:.4f}\t{scores}")
    return EXIT_OK


# --- evaluate / report -----------------------------------------------------------

def cmd_evaluate(args) -> int:
    outcomes_path = Path(args.outcomes)
    if not outcomes_path.exists():
        return _fail(f"outcomes file does not exist: {outcomes_path}")
    refs_dir = Path(args.refs) if args.refs else None
    outcomes = []
    with open(outcomes_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            reference = record.get("reference", "")
            if not reference and refs_dir is not None:
                ref_file = refs_dir / f"{record['unit_id']}.cj"
                if ref_file.exists():
                    reference = ref_file.read_text(encoding="utf-8")
            if not reference:
                return _fail(f"no reference for unit {record['unit_id']!r}")
            outcomes.append(
                metrics.UnitOutcome(
                    unit_id=record["unit_id"],
                    compiled=bool(record["compiled"]),
                    all_tests_passed=bool(record["all_tests_passed"]),
                    candidate=record.get("candidate", ""),
                    reference=reference,
                )
            )
    if not outcomes:
        return _fail("outcomes file is empty")
    try:
        report = metrics.evaluate(outcomes)
    except ValueError as exc:
        return _fail(str(exc))
    if args.out:
        metrics.write_report(args.out, outcomes, report)
    print(metrics.render_table(report))
    return EXIT_OK


def cmd_report(args) -> int:
    aggregate = None
    with open(args.report, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                if record.get("type") == "aggregate":
                    aggregate = record
    if aggregate is None:
        return _fail(f"no aggregate record in {args.report}")
    n_total, n_compiled, n_cf = aggregate["n_total"], aggregate["n_compiled"], aggregate["n_cf"]
    report = metrics.EvalReport(
        n_total=n_total,
        n_compiled=n_compiled,
        n_cf=n_cf,
        fe=Fraction(n_cf, n_total),
        csr=Fraction(n_compiled, n_total),
        cfe=Fraction(n_cf, n_compiled) if n_compiled else Fraction(0),
        cfe_defined=n_compiled > 0,
        bleu=aggregate["bleu"]["value"],
    )
    print(metrics.render_table(report))
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="j2cj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="build the three training datasets")
    p.add_argument("--config")
    p.add_argument("--chapters", type=Path)
    p.add_argument("--snippets", type=Path)
    p.add_argument("--pairs", type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("summarize-ast", help="print the structural summary of a Java file")
    p.add_argument("file")
    p.add_argument("--config")
    p.add_argument("--tokens", action="store_true", help="print structural tokens instead of categories")
    p.add_argument("--vocab", help="vocabulary table (category<TAB>token)")
    p.set_defaults(func=cmd_summarize_ast)

    p = sub.add_parser("translate", help="translate and iteratively repair a benchmark directory")
    p.add_argument("--config")
    p.add_argument("--benchmark", type=Path)
    p.add_argument("--traces", type=Path)
    p.add_argument("--no-repair", action="store_true", help="evaluate only the initial candidate")
    p.add_argument("--harvest", action="store_true", help="append harvested repair cases to the repository")
    p.add_argument("--redact", action="store_true", help="store prompt/reply digests instead of full text")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("repair", help="run the repair loop on an existing candidate")
    p.add_argument("--config")
    p.add_argument("--java", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--tests")
    p.add_argument("--out")
    p.add_argument("--redact", action="store_true")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("repo", help="manage the error-repair repository")
    repo_sub = p.add_subparsers(dest="repo_command", required=True)
    pa = repo_sub.add_parser("add", help="add case records from a JSON file")
    pa.add_argument("--repo", required=True)
    pa.add_argument("--file", required=True)
    pa.set_defaults(func=cmd_repo_add)
    ps = repo_sub.add_parser("search", help="rank cases against a query error")
    ps.add_argument("--config")
    ps.add_argument("--repo")
    ps.add_argument("--error")
    ps.add_argument("--error-file")
    ps.add_argument("--fragment-file")
    ps.add_argument("--tags")
    ps.add_argument("--top-k", type=int, default=3)
    ps.set_defaults(func=cmd_repo_search)

    p = sub.add_parser("evaluate", help="compute FE/CSR/CFE/BLEU over an outcomes file")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--refs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render the table for an existing report file")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(str(exc))
    except FileNotFoundError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
