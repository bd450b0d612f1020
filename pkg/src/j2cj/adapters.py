"""Compiler and runner adapters: subprocess toolchains and replay mocks.

Compiler contract: a command template receives the candidate source file
path; exit code 0 means success and captured stderr is the diagnostics.
Runner contract: the compiled program is invoked once per test case with
the test input on stdin and its stdout captured. Mock variants replay
script files keyed by the candidate's content digest.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import tempfile
from dataclasses import dataclass


class ToolchainError(RuntimeError):
    """Toolchain invocation failed (distinct from a compile failure)."""


def candidate_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def _expand(part: str, **values: str) -> str:
    # Plain replacement, not str.format: command templates may contain
    # literal shell braces.
    for key, value in values.items():
        part = part.replace("{" + key + "}", value)
    return part


@dataclass(frozen=True)
class CompileOutcome:
    ok: bool
    diagnostics: str
    artifact: str  # path of the built program, or the candidate digest for mocks


@dataclass(frozen=True)
class RunOutcome:
    output: str
    exit_code: int
    timed_out: bool


class CommandCompiler:
    """Compile by running a command template against a written source file.

    The template is a list of argv strings where ``{source}`` and
    ``{artifact}`` expand to the candidate path and the output path.
    """

    def __init__(self, command: list[str], source_suffix: str = ".cj", timeout: float = 60.0):
        if not command:
            raise ToolchainError("compiler command must be non-empty")
        if not any("{source}" in part for part in command):
            raise ToolchainError("compiler command must reference {source}")
        self.command = list(command)
        self.source_suffix = source_suffix
        self.timeout = timeout

    def compile(self, source: str) -> CompileOutcome:
        workdir = tempfile.mkdtemp(prefix="j2cj-compile-")
        src_path = os.path.join(workdir, f"candidate{self.source_suffix}")
        artifact = os.path.join(workdir, "candidate.bin")
        with open(src_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(source)
        argv = [_expand(part, source=src_path, artifact=artifact) for part in self.command]
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                cwd=workdir,
            )
        except FileNotFoundError as exc:
            raise ToolchainError(f"compiler executable not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise ToolchainError(f"compiler timed out after {self.timeout}s") from exc
        return CompileOutcome(proc.returncode == 0, proc.stderr, artifact)


class CommandRunner:
    """Run a compiled program per test case; ``{artifact}`` names the binary."""

    def __init__(self, command: list[str] | None = None, timeout: float = 10.0):
        self.command = list(command) if command else ["{artifact}"]
        self.timeout = timeout

    def run(self, artifact: str, stdin_text: str) -> RunOutcome:
        argv = [_expand(part, artifact=artifact) for part in self.command]
        try:
            proc = subprocess.run(
                argv,
                input=stdin_text,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except FileNotFoundError as exc:
            raise ToolchainError(f"program not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired:
            return RunOutcome("", -1, True)
        return RunOutcome(proc.stdout, proc.returncode, False)


class MockCompiler:
    """Replay compile outcomes from a digest-keyed script.

    Script records: ``{"digest": ..., "status": "success"|"fail",
    "diagnostics": ...}``. The returned artifact is the candidate digest so
    a paired MockRunner can key on it.
    """

    def __init__(self, script: dict[str, dict]):
        self.script = dict(script)

    @classmethod
    def load(cls, path) -> "MockCompiler":
        script: dict[str, dict] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                script[record["digest"]] = {
                    "status": record["status"],
                    "diagnostics": record.get("diagnostics", ""),
                }
        return cls(script)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for digest, entry in self.script.items():
                record = {"digest": digest, **entry}
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def add(self, source: str, ok: bool, diagnostics: str = "") -> str:
        digest = candidate_digest(source)
        self.script[digest] = {"status": "success" if ok else "fail", "diagnostics": diagnostics}
        return digest

    def compile(self, source: str) -> CompileOutcome:
        digest = candidate_digest(source)
        entry = self.script.get(digest)
        if entry is None:
            raise ToolchainError(f"mock compiler script has no entry for digest {digest}")
        return CompileOutcome(entry["status"] == "success", entry.get("diagnostics", ""), digest)


class MockRunner:
    """Replay program outputs from a (digest, input)-keyed script.

    Script records: ``{"digest": ..., "input": ..., "output": ...}``.
    """

    def __init__(self, script: dict[tuple[str, str], str]):
        self.script = dict(script)

    @classmethod
    def load(cls, path) -> "MockRunner":
        script: dict[tuple[str, str], str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                script[(record["digest"], record["input"])] = record["output"]
        return cls(script)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for (digest, stdin_text), output in self.script.items():
                record = {"digest": digest, "input": stdin_text, "output": output}
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def add(self, source: str, stdin_text: str, output: str) -> None:
        self.script[(candidate_digest(source), stdin_text)] = output

    def run(self, artifact: str, stdin_text: str) -> RunOutcome:
        key = (artifact, stdin_text)
        if key not in self.script:
            raise ToolchainError(f"mock runner script has no entry for {key!r}")
        return RunOutcome(self.script[key], 0, False)
