"""Training-dataset construction: syntax entries, monolingual samples,
AST-aware parallel samples.

Three line-delimited JSON datasets come out of here: pretraining records
rebuilt from documentation chapters, (description -> code) instruction
samples from filtered monolingual snippets, and structure-annotated
Java/Cangjie pairs. Everything is deterministic given the same inputs and
the same completion transcript.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .ast_summary import (
    DEFAULT_RETAINED_CATEGORIES,
    StructuralTokenVocab,
    default_vocab,
    ensure_no_markers,
    summarize,
    tokenize_structure,
)
from .javaparse import parse, tree_has_errors
from .llm import (
    DOC_RECONSTRUCTION_TEMPLATE,
    MONOLINGUAL_INSTRUCTION,
    SEMANTIC_ANNOTATION_TEMPLATE,
    TRANSLATE_INSTRUCTION,
    DecodingConfig,
    extract_code_block,
)

CPT_BOUNDARY = "<<<PARA>>>"

DEFAULT_IMPORT_ALLOWLIST = ("std",)

REASON_TOO_SHORT = "too_short"
REASON_INCOMPLETE = "incomplete"
REASON_DISALLOWED_IMPORT = "disallowed_import"


class ReconstructionError(RuntimeError):
    """The reconstruction reply yielded zero valid entries."""

    def __init__(self, message: str, raw_reply: str):
        super().__init__(f"{message}\n--- raw reply ---\n{raw_reply}")
        self.raw_reply = raw_reply


class AnnotationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntaxEntry:
    """One structured knowledge unit rebuilt from documentation."""

    id: str
    title: str
    tags: tuple[str, ...]
    typical_questions: tuple[str, ...]
    description: str
    code_examples: tuple[str, ...]

    def __post_init__(self):
        if not self.id.strip():
            raise ValueError("entry id must be non-empty")
        if not self.description.strip():
            raise ValueError(f"entry {self.id}: description must be non-empty")
        if not self.typical_questions and not self.code_examples:
            raise ValueError(f"entry {self.id}: needs at least one question or code example")

    @classmethod
    def from_record(cls, record: dict) -> "SyntaxEntry":
        if not isinstance(record, dict):
            raise ValueError(f"entry record must be an object, got {type(record).__name__}")
        def str_list(key: str) -> tuple[str, ...]:
            value = record.get(key, [])
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ValueError(f"field {key!r} must be a list of strings")
            return tuple(value)
        for key in ("id", "title", "description"):
            if not isinstance(record.get(key), str):
                raise ValueError(f"field {key!r} must be a string")
        return cls(
            id=record["id"],
            title=record["title"],
            tags=str_list("tags"),
            typical_questions=str_list("typical_questions"),
            description=record["description"],
            code_examples=str_list("code_examples"),
        )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "tags": list(self.tags),
            "typical_questions": list(self.typical_questions),
            "description": self.description,
            "code_examples": list(self.code_examples),
        }


@dataclass(frozen=True)
class MonolingualSample:
    instruction: str
    input: str
    output: str

    def __post_init__(self):
        if len(self.output.splitlines()) < 5:
            raise ValueError("monolingual output must have at least 5 lines")
        if one_sentence(self.input) != self.input.strip():
            raise ValueError("monolingual input must be a single sentence")


@dataclass(frozen=True)
class ParallelSample:
    instruction: str
    structure_block: tuple[str, ...]
    java_source: str
    cangjie_target: str


@dataclass
class ReconstructionResult:
    entries: list[SyntaxEntry]
    dropped: int = 0
    problems: list[str] = field(default_factory=list)


def reconstruct_chapter(chapter: str, llm, decoding: DecodingConfig = DecodingConfig()) -> ReconstructionResult:
    """Turn one documentation chapter into validated syntax entries.

    Malformed entries in the reply are dropped and counted; a reply with no
    valid entry at all raises with the raw reply attached.
    """
    if not chapter.strip():
        raise ValueError("chapter must be non-empty")
    prompt = DOC_RECONSTRUCTION_TEMPLATE.render({"chapter": chapter})
    reply = llm.complete(prompt, decoding)
    payload = extract_code_block(reply)
    try:
        items = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ReconstructionError(f"reply is not valid JSON: {exc}", reply) from exc
    if not isinstance(items, list):
        raise ReconstructionError("reply JSON is not an array", reply)

    result = ReconstructionResult(entries=[])
    for index, item in enumerate(items):
        try:
            result.entries.append(SyntaxEntry.from_record(item))
        except ValueError as exc:
            result.dropped += 1
            result.problems.append(f"entry[{index}]: {exc}")
    if not result.entries:
        raise ReconstructionError("reply yielded zero valid entries", reply)
    return result


def serialize_cpt(entries: list[SyntaxEntry]) -> list[str]:
    """One pretraining text record per entry: fixed field order, uniform
    paragraph boundary markers."""
    records = []
    for entry in entries:
        sections = [
            f"[ID] {entry.id}",
            f"[TITLE] {entry.title}",
            "[TAGS] " + "; ".join(entry.tags),
            "[QUESTIONS]\n" + "\n".join(f"- {q}" for q in entry.typical_questions),
            f"[DESCRIPTION]\n{entry.description}",
            "[EXAMPLES]\n" + "\n\n".join(entry.code_examples),
        ]
        records.append(f"\n{CPT_BOUNDARY}\n".join(sections))
    return records


# --- snippet filtering ---------------------------------------------------------

_CJ_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.DOTALL)
_CJ_STRING_RE = re.compile(r'"""(?:.|\n)*?"""|"(?:\\.|[^"\\\n])*"|\'(?:\\.|[^\'\\\n])*\'')
_IMPORT_RE = re.compile(r"^\s*(?:from\s+\S+\s+)?import\s+(\S+)", re.MULTILINE)
_DECLARATION_RE = re.compile(r"\b(?:func|class|struct|enum|interface|init|main)\b")
_EXTEND_RE = re.compile(r"^\s*(?:public\s+)?extend\b", re.MULTILINE)

_PAIRS = {")": "(", "]": "[", "}": "{"}


@dataclass(frozen=True)
class RejectedSnippet:
    code: str
    reason: str


@dataclass
class FilterOutcome:
    retained: list[str]
    rejected: list[RejectedSnippet]

    def reason_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.rejected:
            counts[r.reason] = counts.get(r.reason, 0) + 1
        return counts


def _balanced(code: str) -> bool:
    stack: list[str] = []
    for ch in _CJ_STRING_RE.sub(" ", _CJ_COMMENT_RE.sub(" ", code)):
        if ch in "([{":
            stack.append(ch)
        elif ch in ")]}":
            if not stack or stack[-1] != _PAIRS[ch]:
                return False
            stack.pop()
    return not stack


def filter_snippets(
    snippets: list[str],
    allowlist: tuple[str, ...] = DEFAULT_IMPORT_ALLOWLIST,
) -> FilterOutcome:
    """Keep snippets that are long enough, structurally complete in
    isolation, and restricted to allowlisted imports."""
    outcome = FilterOutcome(retained=[], rejected=[])
    for code in snippets:
        non_blank = [line for line in code.splitlines() if line.strip()]
        if len(non_blank) < 5:
            outcome.rejected.append(RejectedSnippet(code, REASON_TOO_SHORT))
            continue
        stripped = _CJ_STRING_RE.sub(" ", _CJ_COMMENT_RE.sub(" ", code))
        if not _balanced(code) or _EXTEND_RE.search(stripped) or not _DECLARATION_RE.search(stripped):
            outcome.rejected.append(RejectedSnippet(code, REASON_INCOMPLETE))
            continue
        imports = _IMPORT_RE.findall(stripped)
        if any(not imp.startswith(allowlist) for imp in imports):
            outcome.rejected.append(RejectedSnippet(code, REASON_DISALLOWED_IMPORT))
            continue
        outcome.retained.append(code)
    return outcome


_SENTENCE_END = ".!?"


def one_sentence(text: str) -> str:
    """First sentence of the text: cut at the first terminator outside
    quotes that ends a word (decimal points survive)."""
    text = text.strip()
    quote: str | None = None
    for i, ch in enumerate(text):
        if quote is not None:
            if ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
        elif ch in _SENTENCE_END:
            at_end = i + 1 >= len(text)
            if at_end or text[i + 1].isspace():
                return text[: i + 1]
    return text


def annotate_snippet(code: str, llm, decoding: DecodingConfig = DecodingConfig()) -> str:
    """One-sentence functional description of a retained snippet."""
    if not code.strip():
        raise ValueError("code must be non-empty")
    prompt = SEMANTIC_ANNOTATION_TEMPLATE.render({"code": code})
    reply = llm.complete(prompt, decoding).strip()
    if not reply:
        raise AnnotationError("annotation reply is empty")
    return one_sentence(reply)


def build_monolingual_sample(code: str, description: str) -> MonolingualSample:
    return MonolingualSample(MONOLINGUAL_INSTRUCTION, one_sentence(description), code)


def build_parallel_sample(
    java: str,
    cangjie: str,
    vocab: StructuralTokenVocab | None = None,
    retained: frozenset[str] = DEFAULT_RETAINED_CATEGORIES,
) -> ParallelSample:
    """Structure-annotated translation pair; the structure block is computed
    from the Java source, never supplied by hand."""
    if not java.strip():
        raise ValueError("java source must be non-empty")
    if not cangjie.strip():
        raise ValueError("cangjie target must be non-empty")
    tree = parse(java)
    if tree_has_errors(tree):
        raise ValueError("java source does not parse cleanly")
    ensure_no_markers(java, "java source")
    ensure_no_markers(cangjie, "cangjie target")
    summary = summarize(tree, retained, source=java)
    tokens = tokenize_structure(summary, vocab or default_vocab(retained))
    return ParallelSample(TRANSLATE_INSTRUCTION, tuple(tokens), java, cangjie)


# --- dataset persistence ---------------------------------------------------------

def _write_jsonl(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _read_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def write_cpt_dataset(records: list[str], path) -> None:
    _write_jsonl(path, [{"text": r} for r in records])


def read_cpt_dataset(path) -> list[str]:
    return [r["text"] for r in _read_jsonl(path)]


def write_syntax_entries(entries: list[SyntaxEntry], path) -> None:
    _write_jsonl(path, [e.to_record() for e in entries])


def read_syntax_entries(path) -> list[SyntaxEntry]:
    return [SyntaxEntry.from_record(r) for r in _read_jsonl(path)]


def write_monolingual_dataset(samples: list[MonolingualSample], path) -> None:
    _write_jsonl(
        path,
        [{"instruction": s.instruction, "input": s.input, "output": s.output} for s in samples],
    )


def read_monolingual_dataset(path) -> list[MonolingualSample]:
    return [MonolingualSample(r["instruction"], r["input"], r["output"]) for r in _read_jsonl(path)]


def write_parallel_dataset(samples: list[ParallelSample], path) -> None:
    _write_jsonl(
        path,
        [
            {
                "instruction": s.instruction,
                "structure_block": list(s.structure_block),
                "java_source": s.java_source,
                "cangjie_target": s.cangjie_target,
            }
            for s in samples
        ],
    )


def read_parallel_dataset(path) -> list[ParallelSample]:
    return [
        ParallelSample(
            r["instruction"], tuple(r["structure_block"]), r["java_source"], r["cangjie_target"]
        )
        for r in _read_jsonl(path)
    ]


# --- directory-level orchestration ------------------------------------------------

def build_corpus(
    chapters_dir: str | Path | None,
    snippets_dir: str | Path | None,
    pairs_dir: str | Path | None,
    out_dir: str | Path,
    llm,
    decoding: DecodingConfig = DecodingConfig(),
    allowlist: tuple[str, ...] = DEFAULT_IMPORT_ALLOWLIST,
    vocab: StructuralTokenVocab | None = None,
) -> dict:
    """Build all configured datasets from input directories.

    Per-file failures are recorded in the returned stats and do not abort
    the run. File iteration is sorted, so reruns over identical inputs and
    transcripts are byte-identical.
    """
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    stats: dict = {"errors": []}

    if chapters_dir is not None:
        chapter_files = sorted(Path(chapters_dir).glob("*.md"))
        if not chapter_files:
            raise ValueError(f"no chapter files (*.md) in {chapters_dir}")
        entries: list[SyntaxEntry] = []
        seen_ids: set[str] = set()
        dropped = 0
        for chapter_file in chapter_files:
            try:
                result = reconstruct_chapter(chapter_file.read_text(encoding="utf-8"), llm, decoding)
            except (ReconstructionError, ValueError, RuntimeError) as exc:
                stats["errors"].append(f"{chapter_file.name}: {exc}".splitlines()[0])
                continue
            dropped += result.dropped
            for entry in result.entries:
                if entry.id in seen_ids:
                    dropped += 1
                    stats["errors"].append(f"{chapter_file.name}: duplicate entry id {entry.id!r}")
                    continue
                seen_ids.add(entry.id)
                entries.append(entry)
        write_syntax_entries(entries, out_dir / "syntax_entries.jsonl")
        write_cpt_dataset(serialize_cpt(entries), out_dir / "cpt.jsonl")
        stats["chapters"] = len(chapter_files)
        stats["entries"] = len(entries)
        stats["entries_dropped"] = dropped

    if snippets_dir is not None:
        snippet_files = sorted(Path(snippets_dir).glob("*.cj"))
        snippets = [p.read_text(encoding="utf-8") for p in snippet_files]
        outcome = filter_snippets(snippets, allowlist)
        samples = []
        for code in outcome.retained:
            try:
                samples.append(build_monolingual_sample(code, annotate_snippet(code, llm, decoding)))
            except (AnnotationError, ValueError, RuntimeError) as exc:
                stats["errors"].append(f"snippet annotation: {exc}")
        write_monolingual_dataset(samples, out_dir / "monolingual.jsonl")
        stats["snippets_seen"] = len(snippets)
        stats["snippets_retained"] = len(outcome.retained)
        stats["snippets_rejected"] = outcome.reason_counts()
        stats["monolingual_samples"] = len(samples)

    if pairs_dir is not None:
        pair_samples = []
        java_files = sorted(Path(pairs_dir).glob("*.java"))
        skipped = 0
        for java_file in java_files:
            target_file = java_file.with_suffix(".cj")
            if not target_file.exists():
                stats["errors"].append(f"{java_file.name}: missing Cangjie counterpart")
                skipped += 1
                continue
            try:
                pair_samples.append(
                    build_parallel_sample(
                        java_file.read_text(encoding="utf-8"),
                        target_file.read_text(encoding="utf-8"),
                        vocab,
                    )
                )
            except ValueError as exc:
                stats["errors"].append(f"{java_file.name}: {exc}")
                skipped += 1
        write_parallel_dataset(pair_samples, out_dir / "parallel.jsonl")
        stats["parallel_pairs"] = len(pair_samples)
        stats["parallel_skipped"] = skipped

    with open(out_dir / "stats.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(stats, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    return stats
