"""Corpus scoring: Levenshtein-based error rates and 4-gram BLEU.

All metrics normalize text the same way first (lowercase, punctuation table
removal, whitespace collapse), and every report carries a signature string
that spells that policy out.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .textproc import eval_normalize

MAX_NGRAM_ORDER = 4
# Closest thing to log(0) while keeping the arithmetic finite.
_LOG_ZERO = -9999999999.0

WER_SIGNATURE = "metric:wer+case:lc+punct:removed+tok:whitespace"
CER_SIGNATURE = "metric:cer+case:lc+punct:removed+tok:char+spaces:counted"
BLEU_SIGNATURE = ("metric:bleu+nrefs:1+case:lc+eff:no+tok:13a+smooth:exp"
                  "+punct:removed")


# -- edit distance ------------------------------------------------------------


@dataclass(frozen=True)
class EditCounts:
    subs: int = 0
    ins: int = 0
    dels: int = 0

    @property
    def total(self) -> int:
        return self.subs + self.ins + self.dels

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(self.subs + other.subs, self.ins + other.ins,
                          self.dels + other.dels)


def edit_distance(a: Sequence, b: Sequence) -> EditCounts:
    """Minimal edits turning ``a`` into ``b``, split into kinds.

    Among cost-minimal alignments, matches/substitutions are preferred over
    deletions, then insertions, which keeps the counts deterministic.
    """
    n, m = len(a), len(b)
    # dist[i][j]: cost of turning a[:i] into b[:j].
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (ai != b[j - 1]),
                         prev[j] + 1, row[j - 1] + 1)
    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            if a[i - 1] != b[j - 1]:
                subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(subs, ins, dels)


@dataclass
class EvalReport:
    metric: str
    score: float
    signature: str
    n_utterances: int
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"metric": self.metric, "score": self.score,
                           "signature": self.signature,
                           "n_utterances": self.n_utterances,
                           "detail": self.detail}, ensure_ascii=False, indent=2)


def _check_lengths(refs: Sequence[str], hyps: Sequence[str]) -> None:
    if len(refs) != len(hyps):
        raise ValueError(f"got {len(refs)} references but {len(hyps)} hypotheses")


def _error_rate(refs: Sequence[str], hyps: Sequence[str], unit: str,
                normalize: bool) -> tuple[float, EditCounts, int, list[float]]:
    _check_lengths(refs, hyps)
    totals = EditCounts()
    ref_len = 0
    per_utt: list[float] = []
    for ref, hyp in zip(refs, hyps):
        if normalize:
            ref, hyp = eval_normalize(ref), eval_normalize(hyp)
        r = ref.split() if unit == "word" else list(ref)
        h = hyp.split() if unit == "word" else list(hyp)
        counts = edit_distance(r, h)
        totals = totals + counts
        ref_len += len(r)
        per_utt.append(counts.total / len(r) if r else math.inf)
    if ref_len == 0:
        raise ValueError("total reference length is zero after normalization")
    return totals.total / ref_len, totals, ref_len, per_utt


def wer(refs: Sequence[str], hyps: Sequence[str], normalize: bool = True) -> float:
    """Corpus word error rate: total edits over total reference words."""
    return _error_rate(refs, hyps, "word", normalize)[0]


def cer(refs: Sequence[str], hyps: Sequence[str], normalize: bool = True) -> float:
    """Corpus character error rate; spaces between words count as characters."""
    return _error_rate(refs, hyps, "char", normalize)[0]


# -- BLEU ---------------------------------------------------------------------


def _load_tok_rules() -> list[tuple[str, object, str]]:
    text = resources.files("stlab.data").joinpath("tok13a_rules.txt") \
        .read_text(encoding="utf-8")
    rules: list[tuple[str, object, str]] = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        kind, pattern, replacement = line.split("\t")
        if kind == "lit":
            decoded = pattern.replace("\\n", "\n").replace("\\t", "\t")
            rules.append(("lit", decoded,
                          replacement.replace("\\n", "\n").replace("\\t", "\t")))
        elif kind == "re":
            rules.append(("re", re.compile(pattern), replacement))
        else:
            raise ValueError(f"unknown tokenizer rule kind {kind!r}")
    return rules


_TOK_RULES = _load_tok_rules()
_MULTISPACE = re.compile(r"\s+")


def tokenize_13a(text: str) -> list[str]:
    """Mteval-style tokenization: split punctuation off words except around
    digits, normalize entities and unicode spaces, then split on whitespace.
    """
    out = f" {text} "
    for kind, pattern, replacement in _TOK_RULES:
        if kind == "lit":
            out = out.replace(pattern, replacement)
        else:
            out = pattern.sub(replacement, out)
    return _MULTISPACE.sub(" ", out).strip().split()


def _ngrams(tokens: list[str], max_order: int = MAX_NGRAM_ORDER) -> Counter:
    grams: Counter = Counter()
    for order in range(1, max_order + 1):
        for start in range(len(tokens) - order + 1):
            grams[" ".join(tokens[start: start + order])] += 1
    return grams


def _bleu_tokens(text: str) -> list[str]:
    # Punctuation is removed (same frozen table as the error rates) before
    # tokenization; the signature records this.
    return tokenize_13a(eval_normalize(text))


def _corpus_stats(refs: Sequence[str], hyps: Sequence[str]):
    correct = [0] * MAX_NGRAM_ORDER
    total = [0] * MAX_NGRAM_ORDER
    sys_len = ref_len = 0
    for ref, hyp in zip(refs, hyps):
        ref_toks, hyp_toks = _bleu_tokens(ref), _bleu_tokens(hyp)
        sys_len += len(hyp_toks)
        ref_len += len(ref_toks)
        ref_grams = _ngrams(ref_toks)
        for gram, count in _ngrams(hyp_toks).items():
            order = gram.count(" ")
            total[order] += count
            correct[order] += min(count, ref_grams.get(gram, 0))
    return correct, total, sys_len, ref_len


def _assemble_bleu(correct: list[int], total: list[int], sys_len: int,
                   ref_len: int) -> tuple[float, list[float], float]:
    precisions = [0.0] * MAX_NGRAM_ORDER
    smooth = 1.0
    for order in range(MAX_NGRAM_ORDER):
        if total[order] == 0:
            break
        if correct[order] == 0:
            smooth *= 2.0
            precisions[order] = 100.0 / (smooth * total[order])
        else:
            precisions[order] = 100.0 * correct[order] / total[order]
    if sys_len == 0:
        brevity = 0.0
    elif sys_len < ref_len:
        brevity = math.exp(1.0 - ref_len / sys_len)
    else:
        brevity = 1.0
    if len(set(precisions)) == 1 and precisions[0] > 0.0:
        # Geometric mean of equal values, kept exact so an identity corpus
        # scores 100.0 rather than 100-plus-rounding-noise.
        return brevity * precisions[0], precisions, brevity
    log_sum = sum(math.log(p) if p > 0.0 else _LOG_ZERO
                  for p in precisions)
    score = brevity * math.exp(log_sum / MAX_NGRAM_ORDER)
    return score, precisions, brevity


def bleu(refs: Sequence[str], hyps: Sequence[str]) -> float:
    """Corpus BLEU in [0, 100]: 4-gram precisions with exponential smoothing
    of zero counts and the standard brevity penalty, one reference per segment.
    """
    _check_lengths(refs, hyps)
    score, _, _ = _assemble_bleu(*_corpus_stats(refs, hyps))
    return score


# -- reports -------------------------------------------------------------------


def score_corpus(refs: Sequence[str], hyps: Sequence[str], metric: str) -> EvalReport:
    """Build a full EvalReport for one metric over a parallel corpus."""
    if metric in ("wer", "cer"):
        unit = "word" if metric == "wer" else "char"
        rate, totals, ref_len, per_utt = _error_rate(refs, hyps, unit, True)
        signature = WER_SIGNATURE if metric == "wer" else CER_SIGNATURE
        return EvalReport(metric, rate, signature, len(refs), detail={
            "subs": totals.subs, "ins": totals.ins, "dels": totals.dels,
            "ref_len": ref_len, "per_utterance": per_utt,
        })
    if metric == "bleu":
        _check_lengths(refs, hyps)
        correct, total, sys_len, ref_len = _corpus_stats(refs, hyps)
        score, precisions, brevity = _assemble_bleu(correct, total, sys_len, ref_len)
        return EvalReport(metric, score, BLEU_SIGNATURE, len(refs), detail={
            "correct": correct, "total": total, "sys_len": sys_len,
            "ref_len": ref_len, "precisions": precisions,
            "brevity_penalty": brevity,
        })
    raise ValueError(f"unknown metric {metric!r}")
