"""Completion gateway: prompt templates, decoding config, backends.

Two interchangeable backends sit behind ``complete``: an HTTP
chat-completion client with retry, and a deterministic replay mock backed
by a transcript of (prompt digest -> reply) pairs. With temperature 0 and
the mock backend, every pipeline run is byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field

import requests


class TemplateError(ValueError):
    """Slot/placeholder mismatch when building or rendering a template."""


class CompletionError(RuntimeError):
    """Backend failed to produce a reply."""


class MockMissError(CompletionError):
    """The replay transcript has no entry for the prompt."""

    def __init__(self, digest: str):
        super().__init__(f"transcript has no reply for prompt digest {digest}")
        self.digest = digest


@dataclass(frozen=True)
class DecodingConfig:
    temperature: float = 0.0
    top_p: float = 1.0
    max_tokens: int = 2048

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not (0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


def _split_template(body: str) -> list[tuple[str, str]]:
    """Split body into ('lit', text) / ('slot', name) parts.

    ``{{`` and ``}}`` escape literal braces in the template body; escapes
    are resolved here so slot values are never re-scanned on render.
    """
    parts: list[tuple[str, str]] = []
    i, n = 0, len(body)
    lit: list[str] = []
    while i < n:
        ch = body[i]
        if ch == "{" and i + 1 < n and body[i + 1] == "{":
            lit.append("{")
            i += 2
            continue
        if ch == "}" and i + 1 < n and body[i + 1] == "}":
            lit.append("}")
            i += 2
            continue
        if ch == "{":
            m = _PLACEHOLDER_RE.match(body, i)
            if not m:
                raise TemplateError(f"stray '{{' at offset {i}; use '{{{{' for a literal brace")
            parts.append(("lit", "".join(lit)))
            lit = []
            parts.append(("slot", m.group(1)))
            i = m.end()
            continue
        if ch == "}":
            raise TemplateError(f"stray '}}' at offset {i}; use '}}}}' for a literal brace")
        lit.append(ch)
        i += 1
    parts.append(("lit", "".join(lit)))
    return parts


@dataclass(frozen=True)
class PromptTemplate:
    """Named template with `{slot}` placeholders.

    Every required slot must appear in the body exactly once, and the body
    must not contain placeholders outside the required set.
    """

    name: str
    body: str
    required_slots: frozenset[str]

    def __post_init__(self):
        counts: dict[str, int] = {}
        for kind, value in _split_template(self.body):
            if kind == "slot":
                counts[value] = counts.get(value, 0) + 1
        for slot in self.required_slots:
            if counts.get(slot, 0) != 1:
                raise TemplateError(
                    f"template {self.name!r}: slot {slot!r} appears "
                    f"{counts.get(slot, 0)} times, expected exactly once"
                )
        extra = set(counts) - set(self.required_slots)
        if extra:
            raise TemplateError(f"template {self.name!r}: undeclared placeholders {sorted(extra)}")

    def render(self, slots: dict[str, str]) -> str:
        missing = self.required_slots - set(slots)
        if missing:
            raise TemplateError(f"template {self.name!r}: missing slot {sorted(missing)[0]!r}")
        extra = set(slots) - self.required_slots
        if extra:
            raise TemplateError(f"template {self.name!r}: unknown slots {sorted(extra)}")
        out: list[str] = []
        for kind, value in _split_template(self.body):
            out.append(value if kind == "lit" else slots[value])
        return "".join(out)


# --- template registry ----------------------------------------------------

TRANSLATE_INSTRUCTION = (
    "Translate the following Java program into Cangjie. Follow the structural "
    "outline as a constraint on declarations and control flow. Output only the "
    "Cangjie code in a fenced code block."
)

MONOLINGUAL_INSTRUCTION = (
    "Write a Cangjie program that implements the following functional description."
)

DOC_RECONSTRUCTION_TEMPLATE = PromptTemplate(
    name="doc_reconstruction",
    body=(
        "You are a technical writer restructuring Cangjie language documentation.\n"
        "Rewrite the chapter below into self-contained knowledge entries.\n"
        "Return a JSON array; each element must have exactly these fields:\n"
        '  "id": unique string identifier,\n'
        '  "title": short entry title,\n'
        '  "tags": list of topic strings,\n'
        '  "typical_questions": list of questions a developer might ask,\n'
        '  "description": normalized description of the concept or rule,\n'
        '  "code_examples": list of runnable Cangjie code examples.\n'
        "Cover every concept and usage pattern in the chapter.\n"
        "Output only the JSON array.\n"
        "\n"
        "Chapter:\n"
        "{chapter}\n"
    ),
    required_slots=frozenset({"chapter"}),
)

SEMANTIC_ANNOTATION_TEMPLATE = PromptTemplate(
    name="semantic_annotation",
    body=(
        "### You are an assistant for code semantic interpretation.\n"
        "### Summarize the functional semantics of the following Cangjie code in "
        "one concise, imperative-style natural language sentence. "
        "Output only the description.\n"
        "{code}\n"
    ),
    required_slots=frozenset({"code"}),
)

REPAIR_GUIDANCE_COMPILE_TEMPLATE = PromptTemplate(
    name="repair_guidance_compile",
    body=(
        "You are an expert in the Cangjie programming language.\n"
        "The Cangjie translation below fails to compile.\n"
        "\n"
        "[Java source]\n{java}\n"
        "\n"
        "[Cangjie candidate]\n{candidate}\n"
        "\n"
        "[Compiler errors]\n{errors}\n"
        "\n"
        "Explain the root cause of each error and propose concrete code changes.\n"
        "Do not output code yet; output the analysis and repair plan only.\n"
    ),
    required_slots=frozenset({"java", "candidate", "errors"}),
)

REPAIR_APPLY_COMPILE_TEMPLATE = PromptTemplate(
    name="repair_apply_compile",
    body=(
        "You are an expert in the Cangjie programming language.\n"
        "Apply the repair plan so the Cangjie candidate compiles and preserves\n"
        "the behavior of the Java source.\n"
        "\n"
        "[Java source]\n{java}\n"
        "\n"
        "[Cangjie candidate]\n{candidate}\n"
        "\n"
        "[Compiler errors]\n{errors}\n"
        "\n"
        "[Repair plan]\n{guidance}\n"
        "\n"
        "Output only the complete corrected Cangjie code in a fenced code block.\n"
    ),
    required_slots=frozenset({"java", "candidate", "errors", "guidance"}),
)

REPAIR_GUIDANCE_TEST_TEMPLATE = PromptTemplate(
    name="repair_guidance_test",
    body=(
        "You are an expert in the Cangjie programming language.\n"
        "The Cangjie translation below compiles but produces wrong output.\n"
        "\n"
        "[Java source]\n{java}\n"
        "\n"
        "[Cangjie candidate]\n{candidate}\n"
        "\n"
        "[Failed test cases: input, expected output, actual output]\n{failures}\n"
        "\n"
        "Explain the root cause of each output discrepancy and propose concrete\n"
        "code changes. Do not output code yet; output the analysis and repair\n"
        "plan only.\n"
    ),
    required_slots=frozenset({"java", "candidate", "failures"}),
)

REPAIR_APPLY_TEST_TEMPLATE = PromptTemplate(
    name="repair_apply_test",
    body=(
        "You are an expert in the Cangjie programming language.\n"
        "Apply the repair plan so the Cangjie candidate passes the failed tests\n"
        "and preserves the behavior of the Java source.\n"
        "\n"
        "[Java source]\n{java}\n"
        "\n"
        "[Cangjie candidate]\n{candidate}\n"
        "\n"
        "[Failed test cases: input, expected output, actual output]\n{failures}\n"
        "\n"
        "[Repair plan]\n{guidance}\n"
        "\n"
        "Output only the complete corrected Cangjie code in a fenced code block.\n"
    ),
    required_slots=frozenset({"java", "candidate", "failures", "guidance"}),
)

RAG_REPAIR_TEMPLATE = PromptTemplate(
    name="rag_repair",
    body=(
        "You are an expert in the Cangjie programming language.\n"
        "The Cangjie code below fails to compile. Similar past errors and their\n"
        "verified fixes are listed as guidance.\n"
        "\n"
        "[Compiler errors]\n{errors}\n"
        "\n"
        "[Similar repair cases]\n{cases}\n"
        "\n"
        "[Cangjie candidate]\n{candidate}\n"
        "\n"
        "Follow the repair suggestions where they apply. Output only the\n"
        "complete corrected Cangjie code in a fenced code block.\n"
    ),
    required_slots=frozenset({"errors", "cases", "candidate"}),
)

TEMPLATE_REGISTRY: dict[str, PromptTemplate] = {
    t.name: t
    for t in (
        DOC_RECONSTRUCTION_TEMPLATE,
        SEMANTIC_ANNOTATION_TEMPLATE,
        REPAIR_GUIDANCE_COMPILE_TEMPLATE,
        REPAIR_APPLY_COMPILE_TEMPLATE,
        REPAIR_GUIDANCE_TEST_TEMPLATE,
        REPAIR_APPLY_TEST_TEMPLATE,
        RAG_REPAIR_TEMPLATE,
    )
}


# --- transcripts and backends ----------------------------------------------

def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    """Exact-match replay store keyed by prompt digest.

    Files carry full prompts next to their digests for auditability, but
    lookups only ever use the digest.
    """

    entries: dict[str, str] = field(default_factory=dict)
    prompts: dict[str, str] = field(default_factory=dict)

    def add(self, prompt: str, reply: str) -> str:
        digest = prompt_digest(prompt)
        self.entries[digest] = reply
        self.prompts[digest] = prompt
        return digest

    def lookup(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        if digest not in self.entries:
            raise MockMissError(digest)
        return self.entries[digest]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for digest, reply in self.entries.items():
                record = {
                    "digest": digest,
                    "prompt": self.prompts.get(digest, ""),
                    "reply": reply,
                }
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path) -> "Transcript":
        transcript = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                record = json.loads(line)
                if "digest" not in record or "reply" not in record:
                    raise ValueError(f"{path}:{lineno}: transcript record needs digest and reply")
                transcript.entries[record["digest"]] = record["reply"]
                transcript.prompts[record["digest"]] = record.get("prompt", "")
        return transcript

    @classmethod
    def record(cls, pairs: list[tuple[str, str]]) -> "Transcript":
        t = cls()
        for prompt, reply in pairs:
            t.add(prompt, reply)
        return t


class MockBackend:
    """Deterministic completion backend replaying a transcript."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.calls: list[str] = []

    def complete(self, prompt: str, cfg: DecodingConfig = DecodingConfig()) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        self.calls.append(prompt)
        return self.transcript.lookup(prompt)


class HttpBackend:
    """Chat-completion HTTP client with bounded retry on transient failures.

    Retries transport errors and 5xx responses with exponential backoff;
    4xx responses fail immediately. An optional recorder transcript captures
    (prompt, reply) pairs for later replay.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 120.0,
        recorder: Transcript | None = None,
        session: requests.Session | None = None,
        max_concurrency: int = 4,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.recorder = recorder
        self.session = session or requests.Session()
        # Per-endpoint request budget: bounds in-flight calls under --jobs.
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def complete(self, prompt: str, cfg: DecodingConfig = DecodingConfig()) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        with self._slots:
            return self._complete_locked(prompt, cfg)

    def _complete_locked(self, prompt: str, cfg: DecodingConfig) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = CompletionError(f"endpoint returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise CompletionError(f"endpoint returned {resp.status_code}: {resp.text[:500]}")
            reply = self._parse_reply(resp.json())
            if self.recorder is not None:
                self.recorder.add(prompt, reply)
            return reply
        raise CompletionError(
            f"endpoint unreachable after {self.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse_reply(body: dict) -> str:
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise CompletionError(f"malformed completion response: {body!r}") from exc


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code_block(reply: str) -> str:
    """Content of the first fenced code block, else the trimmed reply."""
    m = _FENCE_RE.search(reply)
    if m:
        return m.group(1).rstrip("\n")
    return reply.strip()
