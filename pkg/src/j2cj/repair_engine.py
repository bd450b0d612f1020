"""Iterative error repair: translate, compile, test, repair until done.

Each iteration evaluates one candidate (compile, then tests only on compile
success) and either accepts it, stops on a stagnating error signature or an
exhausted iteration budget, or produces the next candidate through one of
three repair branches: retrieval-augmented repair when a sufficiently
similar stored case exists, two-step self-analysis repair on compile errors
otherwise, and two-step self-analysis on test failures.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .adapters import ToolchainError  # noqa: F401  (re-exported for callers)
from .ast_summary import (
    DEFAULT_RETAINED_CATEGORIES,
    StructuralTokenVocab,
    default_vocab,
    render_structured_prompt,
    summarize,
    tokenize_structure,
)
from .javaparse import parse, tree_has_errors
from .llm import (
    RAG_REPAIR_TEMPLATE,
    REPAIR_APPLY_COMPILE_TEMPLATE,
    REPAIR_APPLY_TEST_TEMPLATE,
    REPAIR_GUIDANCE_COMPILE_TEMPLATE,
    REPAIR_GUIDANCE_TEST_TEMPLATE,
    TRANSLATE_INSTRUCTION,
    DecodingConfig,
    extract_code_block,
    prompt_digest,
)
from .repair_repo import (
    ErrorQuery,
    RepairCase,
    Repository,
    SimilarityBreakdown,
    SimilarityWeights,
    extract_error_tags,
    retrieve,
)

class RepairEngineError(RuntimeError):
    pass


class EmptyCodeError(RepairEngineError):
    """A repair or translation completion yielded no code."""


class CompileStatus(enum.Enum):
    SUCCESS = "success"
    FAIL = "fail"


class TestResult(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_RUN = "not_run"


class Branch(enum.Enum):
    INITIAL = "initial"
    RAG_REPAIR = "rag_repair"
    SELF_ANALYSIS = "self_analysis"
    TEST_REPAIR = "test_repair"


class NextAction(enum.Enum):
    ACCEPT = "accept"
    RAG_REPAIR = "rag_repair"
    SELF_ANALYSIS = "self_analysis"
    TEST_REPAIR = "test_repair"


class UnitStatus(enum.Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    STAGNATED = "stagnated"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class TestCase:
    input: str
    expected_output: str


@dataclass
class IterationRecord:
    """Evaluation of one candidate plus how the candidate was produced."""

    k: int
    candidate: str
    branch: Branch
    compile_status: CompileStatus | None = None
    diagnostics: str = ""
    test_result: TestResult = TestResult.NOT_RUN
    failed_tests: list[dict] = field(default_factory=list)
    guidance: str | None = None
    error_signature: str = ""
    exchanges: list[dict] = field(default_factory=list)


@dataclass
class TranslationUnit:
    java_source: str
    test_suite: list[TestCase]
    candidates: list[IterationRecord] = field(default_factory=list)
    status: UnitStatus = UnitStatus.PENDING
    unit_id: str = ""


@dataclass(frozen=True)
class RepairConfig:
    threshold: float = 0.5
    max_iterations: int = 5
    weights: SimilarityWeights = SimilarityWeights.uniform()
    rag_top_k: int = 3

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError("threshold must be in [0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.rag_top_k < 1:
            raise ValueError("rag_top_k must be positive")


@dataclass
class EngineDeps:
    """Wired adapters for one repair run."""

    llm: object
    compiler: object
    runner: object
    repo: Repository | None = None
    decoding: DecodingConfig = DecodingConfig()


# --- normalization ----------------------------------------------------------

_HEX_RE = re.compile(r"0x[0-9a-fA-F]+")
_PATHLIKE_RE = re.compile(r"\S*[/\\]\S*")
_LINECOL_RE = re.compile(r"\b\d+:\d+\b|\b(?:line|col(?:umn)?)\s*\d+\b", re.I)
_WS_RE = re.compile(r"\s+")


def normalize_signature(diagnostics: str) -> str:
    """Diagnostics with paths, line/column numbers and hex addresses removed,
    lowercased and whitespace-collapsed: the loop's stagnation key."""
    text = _HEX_RE.sub(" ", diagnostics)
    text = _LINECOL_RE.sub(" ", text)
    text = _PATHLIKE_RE.sub(" ", text)
    return _WS_RE.sub(" ", text.lower()).strip()


def normalize_output(text: str) -> str:
    """Trailing-whitespace and final-newline normalization for test outputs."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def _record_signature(rec: IterationRecord) -> str:
    if rec.compile_status is CompileStatus.FAIL:
        return "compile|" + normalize_signature(rec.diagnostics)
    parts = [
        f"{normalize_output(f['input'])}=>{normalize_output(f['actual'])}"
        for f in rec.failed_tests
    ]
    return "test|" + "|".join(parts)


# --- operations --------------------------------------------------------------

def translate(
    java_source: str,
    llm,
    vocab: StructuralTokenVocab | None = None,
    retained: frozenset[str] = DEFAULT_RETAINED_CATEGORIES,
    decoding: DecodingConfig = DecodingConfig(),
    instruction: str = TRANSLATE_INSTRUCTION,
) -> IterationRecord:
    """Produce the initial candidate via the structure-conditioned prompt."""
    tree = parse(java_source)
    if tree_has_errors(tree):
        raise ValueError("java source does not parse cleanly")
    summary = summarize(tree, retained, source=java_source)
    tokens = tokenize_structure(summary, vocab or default_vocab(retained))
    prompt = render_structured_prompt(tokens, java_source, instruction)
    reply = llm.complete(prompt, decoding)
    candidate = extract_code_block(reply).strip()
    if not candidate:
        raise EmptyCodeError("translation completion yielded no code")
    return IterationRecord(
        k=0,
        candidate=candidate,
        branch=Branch.INITIAL,
        exchanges=[{"prompt": prompt, "reply": reply}],
    )


def select_branch(
    compile_status: CompileStatus,
    test_result: TestResult,
    top_score: float | None,
    threshold: float,
) -> NextAction:
    """Route one evaluated candidate to accept or one of three repairs."""
    if compile_status is CompileStatus.FAIL:
        if top_score is None:
            raise ValueError("top_score required when compilation failed")
        return NextAction.RAG_REPAIR if top_score >= threshold else NextAction.SELF_ANALYSIS
    if top_score is not None:
        raise ValueError("top_score only applies to compile failures")
    if test_result is TestResult.PASS:
        return NextAction.ACCEPT
    if test_result is TestResult.FAIL:
        return NextAction.TEST_REPAIR
    raise ValueError("tests must have run when compilation succeeded")


def format_failures(failed_tests: list[dict]) -> str:
    lines = []
    for f in failed_tests:
        lines.append(
            f"- input={json.dumps(f['input'], ensure_ascii=False)} "
            f"expected={json.dumps(f['expected'], ensure_ascii=False)} "
            f"actual={json.dumps(f['actual'], ensure_ascii=False)}"
        )
    return "\n".join(lines)


def format_cases(ranked: list[tuple[RepairCase, SimilarityBreakdown]] | list[RepairCase]) -> str:
    blocks = []
    for rank, item in enumerate(ranked, 1):
        case = item[0] if isinstance(item, tuple) else item
        blocks.append(
            f"Case {rank}:\n"
            f"Error: {case.error_info}\n"
            f"Suggestion: {case.repair_suggestion}\n"
            f"Faulty fragment:\n{case.faulty_fragment}\n"
            f"Corrected code:\n{case.corrected_code}"
        )
    return "\n\n".join(blocks)


def self_analysis_repair(
    java_source: str,
    candidate: str,
    errors_text: str,
    llm,
    decoding: DecodingConfig = DecodingConfig(),
    mode: str = "compile",
) -> tuple[str, str, list[dict]]:
    """Two-step repair: generate guidance, then code conditioned on it.

    Returns (guidance, new_candidate, exchanges).
    """
    if not errors_text.strip():
        raise ValueError("at least one error must be present")
    if mode == "compile":
        guidance_template = REPAIR_GUIDANCE_COMPILE_TEMPLATE
        apply_template = REPAIR_APPLY_COMPILE_TEMPLATE
        slot = "errors"
    elif mode == "test":
        guidance_template = REPAIR_GUIDANCE_TEST_TEMPLATE
        apply_template = REPAIR_APPLY_TEST_TEMPLATE
        slot = "failures"
    else:
        raise ValueError(f"unknown repair mode {mode!r}")

    guidance_prompt = guidance_template.render(
        {"java": java_source, "candidate": candidate, slot: errors_text}
    )
    guidance = llm.complete(guidance_prompt, decoding)
    apply_prompt = apply_template.render(
        {"java": java_source, "candidate": candidate, slot: errors_text, "guidance": guidance}
    )
    code_reply = llm.complete(apply_prompt, decoding)
    new_candidate = extract_code_block(code_reply).strip()
    if not new_candidate:
        raise EmptyCodeError("self-analysis repair yielded no code")
    exchanges = [
        {"prompt": guidance_prompt, "reply": guidance},
        {"prompt": apply_prompt, "reply": code_reply},
    ]
    return guidance, new_candidate, exchanges


def rag_repair(
    candidate: str,
    diagnostics: str,
    retrieved: list[tuple[RepairCase, SimilarityBreakdown]] | list[RepairCase],
    llm,
    decoding: DecodingConfig = DecodingConfig(),
) -> tuple[str, list[dict]]:
    """Single-completion repair guided by retrieved cases, in rank order."""
    if not retrieved:
        raise ValueError("rag repair requires at least one retrieved case")
    prompt = RAG_REPAIR_TEMPLATE.render(
        {"errors": diagnostics, "cases": format_cases(retrieved), "candidate": candidate}
    )
    reply = llm.complete(prompt, decoding)
    new_candidate = extract_code_block(reply).strip()
    if not new_candidate:
        raise EmptyCodeError("rag repair yielded no code")
    return new_candidate, [{"prompt": prompt, "reply": reply}]


def run_repair_loop(unit: TranslationUnit, cfg: RepairConfig, deps: EngineDeps) -> TranslationUnit:
    """Drive the unit to a terminal status within cfg.max_iterations.

    One iteration = one candidate evaluation (compile, then tests on compile
    success). Stagnation is two consecutive identical error signatures; the
    budget bounds the number of evaluated candidates, so no candidate is ever
    produced that cannot be evaluated.
    """
    if not unit.candidates:
        raise ValueError("unit has no initial candidate; translate first")
    if unit.status is not UnitStatus.PENDING:
        raise ValueError(f"unit already has terminal status {unit.status.value}")

    prev_signature: str | None = None
    k = 0
    while True:
        rec = unit.candidates[k]
        outcome = deps.compiler.compile(rec.candidate)
        rec.compile_status = CompileStatus.SUCCESS if outcome.ok else CompileStatus.FAIL
        rec.diagnostics = outcome.diagnostics

        if outcome.ok:
            failed = []
            for tc in unit.test_suite:
                result = deps.runner.run(outcome.artifact, tc.input)
                if result.timed_out:
                    failed.append(
                        {"input": tc.input, "expected": tc.expected_output, "actual": "<timeout>"}
                    )
                elif normalize_output(result.output) != normalize_output(tc.expected_output):
                    failed.append(
                        {"input": tc.input, "expected": tc.expected_output, "actual": result.output}
                    )
            rec.failed_tests = failed
            rec.test_result = TestResult.PASS if not failed else TestResult.FAIL
        else:
            rec.test_result = TestResult.NOT_RUN

        if rec.compile_status is CompileStatus.SUCCESS and rec.test_result is TestResult.PASS:
            unit.status = UnitStatus.ACCEPTED
            return unit

        rec.error_signature = _record_signature(rec)
        if prev_signature is not None and rec.error_signature == prev_signature:
            unit.status = UnitStatus.STAGNATED
            return unit
        prev_signature = rec.error_signature

        if k + 1 >= cfg.max_iterations:
            unit.status = UnitStatus.BUDGET_EXHAUSTED
            return unit

        if rec.compile_status is CompileStatus.FAIL:
            diagnostics = rec.diagnostics if rec.diagnostics.strip() else "<no diagnostics>"
            if deps.repo is not None and len(deps.repo) > 0:
                ranked = retrieve(
                    ErrorQuery(diagnostics, rec.candidate, extract_error_tags(diagnostics)),
                    deps.repo,
                    cfg.rag_top_k,
                    cfg.weights,
                )
                top_score = ranked[0][1].total
            else:
                ranked = []
                top_score = 0.0
            action = select_branch(CompileStatus.FAIL, TestResult.NOT_RUN, top_score, cfg.threshold)
            if action is NextAction.RAG_REPAIR:
                candidate, exchanges = rag_repair(
                    rec.candidate, diagnostics, ranked, deps.llm, deps.decoding
                )
                guidance = None
                branch = Branch.RAG_REPAIR
            else:
                guidance, candidate, exchanges = self_analysis_repair(
                    unit.java_source, rec.candidate, diagnostics, deps.llm, deps.decoding, "compile"
                )
                branch = Branch.SELF_ANALYSIS
        else:
            action = select_branch(CompileStatus.SUCCESS, TestResult.FAIL, None, cfg.threshold)
            assert action is NextAction.TEST_REPAIR
            guidance, candidate, exchanges = self_analysis_repair(
                unit.java_source,
                rec.candidate,
                format_failures(rec.failed_tests),
                deps.llm,
                deps.decoding,
                "test",
            )
            branch = Branch.TEST_REPAIR

        unit.candidates.append(
            IterationRecord(
                k=k + 1,
                candidate=candidate,
                branch=branch,
                guidance=guidance,
                exchanges=exchanges,
            )
        )
        k += 1


def harvest_cases(unit: TranslationUnit) -> list[RepairCase]:
    """Repair cases from compile-fail -> compile-success transitions fixed
    by self-analysis. Only accepted units are harvested."""
    if unit.status is not UnitStatus.ACCEPTED:
        raise ValueError("only accepted units are harvested")
    cases = []
    for rec, nxt in zip(unit.candidates, unit.candidates[1:]):
        if (
            rec.compile_status is CompileStatus.FAIL
            and nxt.branch is Branch.SELF_ANALYSIS
            and nxt.compile_status is CompileStatus.SUCCESS
            and rec.diagnostics.strip()
        ):
            prefix = unit.unit_id or "unit"
            cases.append(
                RepairCase(
                    id=f"{prefix}-k{nxt.k}",
                    error_tags=extract_error_tags(rec.diagnostics),
                    error_info=rec.diagnostics,
                    repair_suggestion=nxt.guidance or "",
                    faulty_fragment=rec.candidate,
                    corrected_code=nxt.candidate,
                )
            )
    return cases


# --- trace serialization ------------------------------------------------------

def record_to_dict(rec: IterationRecord, redact: bool = False) -> dict:
    exchanges = [
        {"prompt_digest": prompt_digest(e["prompt"]), "reply_digest": prompt_digest(e["reply"])}
        if redact
        else {"prompt": e["prompt"], "reply": e["reply"]}
        for e in rec.exchanges
    ]
    return {
        "k": rec.k,
        "branch": rec.branch.value,
        "candidate": rec.candidate,
        "compile_status": rec.compile_status.value if rec.compile_status else None,
        "diagnostics": rec.diagnostics,
        "test_result": rec.test_result.value,
        "failed_tests": rec.failed_tests,
        "guidance": rec.guidance,
        "error_signature": rec.error_signature,
        "exchanges": exchanges,
    }


def unit_to_trace(unit: TranslationUnit, redact: bool = False) -> dict:
    return {
        "unit_id": unit.unit_id,
        "status": unit.status.value,
        "java_source": unit.java_source,
        "test_count": len(unit.test_suite),
        "iterations": [record_to_dict(rec, redact) for rec in unit.candidates],
    }


def write_trace(unit: TranslationUnit, path, redact: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(unit_to_trace(unit, redact), ensure_ascii=False, indent=2) + "\n")
