"""Translation-quality metrics: FE, CSR, CFE and BLEU.

Counts are kept as exact rationals so the identity FE = CSR * CFE holds
without floating error. BLEU is a corpus-style 4-gram score over a
code-aware tokenization; values are stored in [0, 1] and displayed on the
0-100 scale used in reporting.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

BLEU_MAX_ORDER = 4
BLEU_EPSILON = 1e-9


@dataclass(frozen=True)
class UnitOutcome:
    """Final result of one benchmark unit."""

    unit_id: str
    compiled: bool
    all_tests_passed: bool
    candidate: str = ""
    reference: str = ""

    def __post_init__(self):
        if self.all_tests_passed and not self.compiled:
            raise ValueError(f"unit {self.unit_id}: passed tests without compiling")


@dataclass(frozen=True)
class EvalReport:
    n_total: int
    n_compiled: int
    n_cf: int
    fe: Fraction
    csr: Fraction
    cfe: Fraction
    cfe_defined: bool
    bleu: float


def csr(n_compiled: int, n_total: int) -> Fraction:
    """Compilation success rate: compiled units over all units."""
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    if not (0 <= n_compiled <= n_total):
        raise ValueError("need 0 <= n_compiled <= n_total")
    return Fraction(n_compiled, n_total)


def cfe(n_cf: int, n_compiled: int) -> Fraction:
    """Functional correctness among compiled units; 0 when none compiled."""
    if not (0 <= n_cf <= n_compiled):
        raise ValueError("need 0 <= n_cf <= n_compiled")
    if n_compiled == 0:
        return Fraction(0)
    return Fraction(n_cf, n_compiled)


def fe(outcomes: list[UnitOutcome]) -> Fraction:
    """Fraction of units whose translation passed every test case."""
    if not outcomes:
        raise ValueError("outcomes must be non-empty")
    return Fraction(sum(1 for o in outcomes if o.all_tests_passed), len(outcomes))


# --- BLEU ---------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"[A-Za-z_][A-Za-z0-9_]*"      # identifiers and keywords
    r"|\d+\.\d+|\d+"               # numbers
    r"|->|==|!=|<=|>=|&&|\|\||\+\+|--|<<|>>|::|\+=|-=|\*=|/="  # operators
    r"|[^\sA-Za-z0-9_]"            # any remaining single punctuation
)


def tokenize_code(text: str) -> list[str]:
    """Whitespace/punctuation-boundary split keeping operators as tokens."""
    return _TOKEN_RE.findall(text)


def _ngram_counts(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def _clipped_matches(candidate: list[str], references: list[list[str]], order: int) -> tuple[int, int]:
    total = max(0, len(candidate) - order + 1)
    if total == 0:
        return 0, 0
    cand_counts = _ngram_counts(candidate, order)
    max_ref: Counter = Counter()
    for ref in references:
        for ngram, count in _ngram_counts(ref, order).items():
            if count > max_ref[ngram]:
                max_ref[ngram] = count
    matched = sum(min(count, max_ref[ngram]) for ngram, count in cand_counts.items())
    return matched, total


def _closest_ref_length(cand_len: int, references: list[list[str]]) -> int:
    return min((abs(len(r) - cand_len), len(r)) for r in references)[1]


def _bleu_from_stats(matches: list[int], totals: list[int], cand_len: int, ref_len: int) -> float:
    # Unigram misses are decisive: no shared token means score 0, without
    # smoothing rescuing it. Higher orders with zero matches get epsilon;
    # orders with no candidate n-grams at all are excluded (short snippets).
    if totals[0] == 0:
        raise ValueError("candidate must tokenize to at least one token")
    if matches[0] == 0:
        return 0.0
    log_sum = 0.0
    effective_orders = 0
    for matched, total in zip(matches, totals):
        if total == 0:
            continue
        precision = matched / total if matched else BLEU_EPSILON
        log_sum += math.log(precision)
        effective_orders += 1
    geo_mean = math.exp(log_sum / effective_orders)
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return min(1.0, brevity * geo_mean)


def bleu(candidate: str, references: list[str], max_order: int = BLEU_MAX_ORDER) -> float:
    """Sentence-level BLEU of a candidate against one or more references."""
    if not references:
        raise ValueError("at least one reference required")
    cand_tokens = tokenize_code(candidate)
    ref_tokens = [tokenize_code(r) for r in references]
    if not cand_tokens or all(not r for r in ref_tokens):
        raise ValueError("candidate and references must tokenize to at least one token")
    matches, totals = [], []
    for order in range(1, max_order + 1):
        m, t = _clipped_matches(cand_tokens, ref_tokens, order)
        matches.append(m)
        totals.append(t)
    return _bleu_from_stats(matches, totals, len(cand_tokens), _closest_ref_length(len(cand_tokens), ref_tokens))


def corpus_bleu(pairs: list[tuple[str, list[str]]], max_order: int = BLEU_MAX_ORDER) -> float:
    """Corpus BLEU: n-gram statistics pooled over all (candidate, refs) pairs."""
    if not pairs:
        raise ValueError("at least one pair required")
    matches = [0] * max_order
    totals = [0] * max_order
    cand_len = 0
    ref_len = 0
    for candidate, references in pairs:
        cand_tokens = tokenize_code(candidate)
        ref_tokens = [tokenize_code(r) for r in references]
        if not cand_tokens or all(not r for r in ref_tokens):
            raise ValueError("candidate and references must tokenize to at least one token")
        for order in range(1, max_order + 1):
            m, t = _clipped_matches(cand_tokens, ref_tokens, order)
            matches[order - 1] += m
            totals[order - 1] += t
        cand_len += len(cand_tokens)
        ref_len += _closest_ref_length(len(cand_tokens), ref_tokens)
    return _bleu_from_stats(matches, totals, cand_len, ref_len)


# --- reports ------------------------------------------------------------------

def evaluate(outcomes: list[UnitOutcome], with_bleu: bool = True) -> EvalReport:
    if not outcomes:
        raise ValueError("outcomes must be non-empty")
    n_total = len(outcomes)
    n_compiled = sum(1 for o in outcomes if o.compiled)
    n_cf = sum(1 for o in outcomes if o.all_tests_passed)
    score = 0.0
    if with_bleu:
        score = corpus_bleu([(o.candidate, [o.reference]) for o in outcomes])
    return EvalReport(
        n_total=n_total,
        n_compiled=n_compiled,
        n_cf=n_cf,
        fe=fe(outcomes),
        csr=csr(n_compiled, n_total),
        cfe=cfe(n_cf, n_compiled),
        cfe_defined=n_compiled > 0,
        bleu=score,
    )


def percent(value: Fraction | float) -> str:
    return f"{float(value) * 100:.2f}"


def report_record(report: EvalReport) -> dict:
    return {
        "n_total": report.n_total,
        "n_compiled": report.n_compiled,
        "n_cf": report.n_cf,
        "fe": {"exact": str(report.fe), "percent": percent(report.fe)},
        "csr": {"exact": str(report.csr), "percent": percent(report.csr)},
        "cfe": {
            "exact": str(report.cfe),
            "percent": percent(report.cfe),
            "defined": report.cfe_defined,
        },
        "bleu": {"value": report.bleu, "display": percent(report.bleu)},
    }


def render_table(report: EvalReport) -> str:
    rows = [
        ("units", str(report.n_total), ""),
        ("compiled", str(report.n_compiled), ""),
        ("funct. equivalent", str(report.n_cf), ""),
        ("FE", percent(report.fe), str(report.fe)),
        ("CSR", percent(report.csr), str(report.csr)),
        ("CFE", percent(report.cfe), str(report.cfe) + ("" if report.cfe_defined else " (undefined)")),
        ("BLEU", percent(report.bleu), f"{report.bleu:.6f}"),
    ]
    name_w = max(len(r[0]) for r in rows)
    value_w = max(len(r[1]) for r in rows)
    lines = [f"{name.ljust(name_w)}  {value.rjust(value_w)}  {exact}".rstrip() for name, value, exact in rows]
    return "\n".join(lines)


def write_report(path, outcomes: list[UnitOutcome], report: EvalReport) -> None:
    """Line-delimited report: one record per unit, aggregate record last."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for o in outcomes:
            record = {
                "type": "unit",
                "unit_id": o.unit_id,
                "compiled": o.compiled,
                "all_tests_passed": o.all_tests_passed,
                "bleu": bleu(o.candidate, [o.reference]) if o.candidate and o.reference else None,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        fh.write(json.dumps({"type": "aggregate", **report_record(report)}, ensure_ascii=False) + "\n")
