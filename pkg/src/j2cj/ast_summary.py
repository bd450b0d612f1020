"""Structural summaries of Java parse trees and their prompt encoding.

A summary is the DFS pre-order sequence of retained internal node
categories: the control-flow and declaration skeleton of a program with
all token-level detail discarded. Summaries are discretized into
structural tokens and embedded into translation prompts between fixed
boundary markers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .javaparse import SyntaxNode, parse

# Control-flow and semantic node kinds kept in summaries by default.
# class_body is included so type skeletons survive for declaration-only
# sources; the set is configurable end to end.
DEFAULT_RETAINED_CATEGORIES = frozenset(
    {
        "class_declaration",
        "class_body",
        "method_declaration",
        "constructor_declaration",
        "formal_parameters",
        "block",
        "if_statement",
        "for_statement",
        "enhanced_for_statement",
        "while_statement",
        "do_statement",
        "switch_expression",
        "try_statement",
        "catch_clause",
        "return_statement",
        "throw_statement",
        "lambda_expression",
    }
)

STRUCT_OTHER_TOKEN = "<STRUCT:OTHER>"

STRUCT_OPEN = "<<<STRUCT>>>"
STRUCT_CLOSE = "<<<END_STRUCT>>>"
CODE_OPEN = "<<<CODE>>>"
CODE_CLOSE = "<<<END_CODE>>>"
_ALL_MARKERS = (STRUCT_OPEN, STRUCT_CLOSE, CODE_OPEN, CODE_CLOSE)


class MarkerCollisionError(ValueError):
    """Raised when a text to embed already contains a boundary marker."""


class VocabError(ValueError):
    """Raised for non-injective or malformed structural-token vocabularies."""


def source_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class StructuralSummary:
    """DFS pre-order sequence of retained internal node categories."""

    categories: tuple[str, ...]
    source_digest: str = ""

    def __len__(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class StructuralTokenVocab:
    """Injective mapping from node category to a `<STRUCT:NAME>` token."""

    mapping: dict[str, str] = field(default_factory=dict)
    version: str = "v1"

    def __post_init__(self):
        seen: dict[str, str] = {}
        for category, token in self.mapping.items():
            if not (token.startswith("<STRUCT:") and token.endswith(">")):
                raise VocabError(f"malformed structural token for {category!r}: {token!r}")
            if token in seen:
                raise VocabError(f"token {token!r} mapped from both {seen[token]!r} and {category!r}")
            seen[token] = category

    def token_for(self, category: str) -> str:
        return self.mapping.get(category, STRUCT_OTHER_TOKEN)


def default_vocab(categories: frozenset[str] = DEFAULT_RETAINED_CATEGORIES) -> StructuralTokenVocab:
    """Vocabulary mapping each category to `<STRUCT:UPPER_NAME>`."""
    return StructuralTokenVocab({c: f"<STRUCT:{c.upper()}>" for c in sorted(categories)})


def save_vocab(vocab: StructuralTokenVocab, path) -> None:
    lines = [f"# vocab-version: {vocab.version}"]
    lines += [f"{category}\t{token}" for category, token in sorted(vocab.mapping.items())]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vocab(path) -> StructuralTokenVocab:
    mapping: dict[str, str] = {}
    version = "v1"
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if "vocab-version:" in line:
                    version = line.split("vocab-version:", 1)[1].strip()
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise VocabError(f"{path}:{lineno}: expected 'category<TAB>token'")
            mapping[parts[0]] = parts[1]
    return StructuralTokenVocab(mapping, version)


def summarize(
    tree: SyntaxNode,
    retained: frozenset[str] | set[str] = DEFAULT_RETAINED_CATEGORIES,
    source: str | None = None,
) -> StructuralSummary:
    """Collect retained internal node categories in DFS pre-order.

    Terminal nodes never contribute; ERROR nodes are not retained, so
    partially broken sources still summarize. ``source``, when given,
    feeds the summary's content digest.
    """
    if not retained:
        raise ValueError("retained category set must be non-empty")
    categories = [
        node.category
        for node in tree.walk()
        if not node.is_terminal and node.category in retained
    ]
    digest = source_digest(source) if source is not None else ""
    return StructuralSummary(tuple(categories), digest)


def summarize_source(
    source: str,
    retained: frozenset[str] | set[str] = DEFAULT_RETAINED_CATEGORIES,
) -> StructuralSummary:
    return summarize(parse(source), retained, source=source)


def tokenize_structure(summary: StructuralSummary, vocab: StructuralTokenVocab) -> list[str]:
    """One structural token per summary category, unknown kinds -> OTHER."""
    return [vocab.token_for(category) for category in summary.categories]


def ensure_no_markers(text: str, what: str = "text") -> None:
    """Reject texts that already contain a boundary marker."""
    for marker in _ALL_MARKERS:
        if marker in text:
            raise MarkerCollisionError(f"{what} contains boundary marker {marker}")


def render_structured_prompt(tokens: list[str], source: str, instruction: str) -> str:
    """Assemble instruction, structural block and code block into one prompt.

    The blocks are delimited by fixed markers so they can be extracted
    back verbatim; inputs containing a marker are rejected outright.
    """
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    ensure_no_markers(source, "source")
    ensure_no_markers(instruction, "instruction")
    for token in tokens:
        ensure_no_markers(token, "structural token")
    struct_body = " ".join(tokens)
    return (
        f"{instruction}\n"
        f"{STRUCT_OPEN}\n{struct_body}\n{STRUCT_CLOSE}\n"
        f"{CODE_OPEN}\n{source}\n{CODE_CLOSE}\n"
    )


def extract_blocks(prompt: str) -> tuple[list[str], str]:
    """Recover (tokens, source) from a rendered prompt."""

    def _between(text: str, open_marker: str, close_marker: str) -> str:
        try:
            start = text.index(open_marker) + len(open_marker)
            end = text.index(close_marker, start)
        except ValueError:
            raise ValueError(f"prompt lacks {open_marker}/{close_marker} block") from None
        return text[start:end]

    struct_body = _between(prompt, STRUCT_OPEN, STRUCT_CLOSE).strip("\n")
    code_body = _between(prompt, CODE_OPEN, CODE_CLOSE)
    code = code_body[1:-1] if code_body.startswith("\n") and code_body.endswith("\n") else code_body
    tokens = struct_body.split() if struct_body else []
    return tokens, code
