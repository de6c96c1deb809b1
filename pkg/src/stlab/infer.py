"""Decoding: length-normalized beam search over either encoder path, plus the
two-stage cascade that pipes a transcript into a text translator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import AsrSample, MtSample, SpeechUtterance, ThreeWaySample, TwoWaySample
from .losses import source_text_batch, speech_batch
from .model import Model
from .textproc import LanguageCode, detokenize


@dataclass
class Hypothesis:
    """One decoded candidate.

    ``tokens`` are the generated ids (the forced [boundary, lang] prefix is
    excluded; the closing boundary token is kept when the hypothesis finished).
    ``score`` is the sum of token log-probabilities and ``normalized_score``
    divides it by len(tokens) ** length_penalty.
    """

    tokens: list[int]
    score: float
    normalized_score: float
    finished: bool


def _normalized(score: float, length: int, length_penalty: float) -> float:
    return score / (length ** length_penalty)


def _best_possible(score: float, max_len: int, length_penalty: float) -> float:
    # Log-probs are never positive, so the most optimistic continuation adds
    # free tokens: a negative score is best diluted over max_len tokens.
    if score < 0.0:
        return score / (max_len ** length_penalty)
    return score


def _encode(model: Model, source, train: bool = False):
    if isinstance(source, SpeechUtterance):
        feats, lens = speech_batch([source])
        memory, bias = model.encode_speech(feats, lens, train=train)
        return memory, bias, source.frames
    if isinstance(source, str):
        ids, lens = source_text_batch([source], model)
        memory, bias = model.encode_text(ids, lens, train=train)
        return memory, bias, int(lens[0])
    raise TypeError(f"cannot decode from source of type {type(source).__name__}")


def beam_search(model: Model, source, tgt_lang: LanguageCode | str, *,
                beam: int = 5, length_penalty: float = 1.0,
                max_len: int | None = None) -> list[Hypothesis]:
    """Beam search with a forced [boundary, language] prefix.

    Candidates rank by cumulative score with ties broken toward the smaller
    token id, exactly beam of them survive each step, and the ones that just
    produced the boundary token retire to a finished pool capped at beam
    entries. Returns finished hypotheses ranked by normalized score, or the
    best unfinished one (flagged) if nothing finished within ``max_len``.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if length_penalty < 0:
        raise ValueError("length_penalty must be >= 0")
    vocab = model.vocab
    eos = vocab.bos_eos_id
    memory, memory_bias, src_len = _encode(model, source)
    if max_len is None:
        max_len = 2 * src_len + 10
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prefix = [eos, vocab.lang_id(tgt_lang)]
    vocab_width = model.config.vocab_size

    live: list[tuple[tuple[int, ...], float]] = [((), 0.0)]
    finished: list[Hypothesis] = []

    def finished_rank(h: Hypothesis):
        return (-h.normalized_score, h.tokens)

    while live:
        cur_len = len(live[0][0])
        if cur_len >= max_len:
            break
        dec = np.array([[*prefix, *toks] for toks, _ in live], dtype=np.int64)
        mem = Tensor(np.repeat(memory.data, len(live), axis=0))
        bias = np.repeat(memory_bias, len(live), axis=0)
        logits = model.decode(mem, bias, dec, train=False)
        logp = ad.log_softmax(logits, axis=-1).data[:, -1, :].copy()
        # Pad can never be generated (decode treats it as absent), and ids
        # beyond the actual vocabulary are unreachable embedding slack.
        logp[:, vocab.pad_id] = -np.inf
        logp[:, len(vocab):] = -np.inf
        cand = np.array([s for _, s in live])[:, None] + logp
        flat = cand.ravel()
        # Stable sort on the negated scores: ties resolve to the smaller flat
        # index, i.e. earlier hypothesis first, then smaller token id.
        order = np.argsort(-flat, kind="stable")[: beam]
        next_live: list[tuple[tuple[int, ...], float]] = []
        for flat_idx in order:
            score = float(flat[flat_idx])
            if score == float("-inf"):
                continue
            hyp_idx, tok = divmod(int(flat_idx), vocab_width)
            tokens = live[hyp_idx][0] + (tok,)
            if tok == eos:
                finished.append(Hypothesis(list(tokens), score,
                                           _normalized(score, len(tokens),
                                                       length_penalty), True))
            else:
                next_live.append((tokens, score))
        finished.sort(key=finished_rank)
        del finished[beam:]
        if finished:
            best = finished[0].normalized_score
            next_live = [(t, s) for t, s in next_live
                         if _best_possible(s, max_len, length_penalty) >= best]
        live = next_live

    if finished:
        return finished
    if not live:
        return []
    ranked = sorted(
        (Hypothesis(list(t), s, _normalized(s, max(len(t), 1), length_penalty),
                    False) for t, s in live),
        key=finished_rank)
    return [ranked[0]]


def _to_text(tokens: Sequence[int], model: Model) -> str:
    vocab = model.vocab
    ids = list(tokens)
    if ids and ids[-1] == vocab.bos_eos_id:
        ids = ids[:-1]
    return detokenize(ids, vocab)


def translate_e2e(model: Model, speech: SpeechUtterance,
                  tgt_lang: LanguageCode | str, *, beam: int = 5,
                  length_penalty: float = 1.0, max_len: int | None = None) -> str:
    hyps = beam_search(model, speech, tgt_lang, beam=beam,
                       length_penalty=length_penalty, max_len=max_len)
    return _to_text(hyps[0].tokens, model) if hyps else ""


def transcribe(model: Model, speech: SpeechUtterance,
               src_lang: LanguageCode | str, *, beam: int = 5,
               length_penalty: float = 1.0, max_len: int | None = None) -> str:
    """ASR decoding: the forced language code is the source language."""
    hyps = beam_search(model, speech, src_lang, beam=beam,
                       length_penalty=length_penalty, max_len=max_len)
    return _to_text(hyps[0].tokens, model) if hyps else ""


def translate_text(model: Model, text: str, tgt_lang: LanguageCode | str, *,
                   beam: int = 5, length_penalty: float = 1.0,
                   max_len: int | None = None) -> str:
    hyps = beam_search(model, text, tgt_lang, beam=beam,
                       length_penalty=length_penalty, max_len=max_len)
    return _to_text(hyps[0].tokens, model) if hyps else ""


@dataclass
class CascadeResult:
    translation: str
    transcript: str


@dataclass
class CascadePipeline:
    """Transcribe with the ASR model, then translate the transcript.

    The transcription language and the translator's source language are the
    same ``src_lang`` by construction; both languages must be registered in
    the respective vocabularies.
    """

    asr_model: Model
    mt_model: Model
    src_lang: LanguageCode
    tgt_lang: LanguageCode
    beam: int = 5
    length_penalty: float = 1.0

    def __post_init__(self):
        self.asr_model.vocab.lang_id(self.src_lang)
        self.mt_model.vocab.lang_id(self.tgt_lang)


def cascade_translate(pipeline: CascadePipeline, speech: SpeechUtterance,
                      max_len: int | None = None) -> CascadeResult:
    transcript = transcribe(pipeline.asr_model, speech, pipeline.src_lang,
                            beam=pipeline.beam,
                            length_penalty=pipeline.length_penalty,
                            max_len=max_len)
    translation = translate_text(pipeline.mt_model, transcript, pipeline.tgt_lang,
                                 beam=pipeline.beam,
                                 length_penalty=pipeline.length_penalty) \
        if transcript else ""
    return CascadeResult(translation, transcript)


def decode_batch(samples: Sequence, mode: str, *, model: Model | None = None,
                 pipeline: CascadePipeline | None = None, beam: int = 5,
                 length_penalty: float = 1.0) -> list[dict]:
    """Decode a list of samples into {id, hyp, score, transcript?} records.

    Modes: "e2e" and "asr" need speech samples and ``model``; "mt" needs text
    samples and ``model``; "cascade" needs speech samples and ``pipeline``.
    """
    records = []
    for i, s in enumerate(samples):
        sample_id = getattr(s, "id", "") or f"u{i:06d}"
        if mode == "cascade":
            if pipeline is None:
                raise ValueError("cascade decoding requires a pipeline")
            result = cascade_translate(pipeline, s.speech)
            records.append({"id": sample_id, "hyp": result.translation,
                            "transcript": result.transcript})
            continue
        if model is None:
            raise ValueError(f"{mode} decoding requires a model")
        if mode == "e2e":
            hyps = beam_search(model, s.speech, s.tgt_lang, beam=beam,
                               length_penalty=length_penalty)
        elif mode == "asr":
            lang = getattr(s, "lang", None) or s.src_lang
            hyps = beam_search(model, s.speech, lang, beam=beam,
                               length_penalty=length_penalty)
        elif mode == "mt":
            hyps = beam_search(model, s.source_text, s.tgt_lang, beam=beam,
                               length_penalty=length_penalty)
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        best = hyps[0] if hyps else None
        records.append({
            "id": sample_id,
            "hyp": _to_text(best.tokens, model) if best else "",
            "score": best.normalized_score if best else float("-inf"),
            "finished": bool(best.finished) if best else False,
        })
    return records
