"""Training objectives: label-smoothed NLL for the speech path, the ASR and MT
auxiliaries, and the distillation term whose teacher is the model's own text
path behind a stop-gradient.

Every term normalizes per sample by its unmasked label count, and batches
reduce as the mean of per-sample losses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import AsrSample, MtSample, SpeechUtterance, ThreeWaySample, TwoWaySample
from .model import Model, build_target_batch
from .textproc import tokenize

TEACHER_ROW_TOL = 1e-6


@dataclass(frozen=True)
class LossWeights:
    """Weights (alpha, beta, gamma) for the speech, text and distillation terms."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.alpha == self.beta == self.gamma == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class LossReport:
    total: float
    e2e: float | None = None
    mt: float | None = None
    kd: float | None = None
    asr: float | None = None
    token_counts: dict[str, int] = field(default_factory=dict)
    tensor: Tensor | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"total": self.total}
        for key in ("e2e", "mt", "kd", "asr"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d


# -- batch preparation --------------------------------------------------------


def speech_batch(utts: Sequence[SpeechUtterance]) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad feature matrices into (B, frames, feat_dim) plus lengths."""
    lens = np.array([u.frames for u in utts], dtype=np.int64)
    dim = utts[0].feat_dim
    feats = np.zeros((len(utts), int(lens.max()), dim), dtype=np.float64)
    for i, u in enumerate(utts):
        feats[i, : u.frames] = u.features
    return feats, lens


def source_text_batch(texts: Sequence[str], model: Model) -> tuple[np.ndarray, np.ndarray]:
    """Encode source sentences as token ids closed by the boundary token."""
    vocab = model.vocab
    seqs = [tokenize(t, vocab) + [vocab.bos_eos_id] for t in texts]
    lens = np.array([len(s) for s in seqs], dtype=np.int64)
    ids = np.full((len(seqs), int(lens.max())), vocab.pad_id, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    return ids, lens


def target_batch(texts: Sequence[str], langs: Sequence, model: Model,
                 include_lang_loss: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vocab = model.vocab
    token_seqs = [tokenize(t, vocab) for t in texts]
    lang_ids = [vocab.lang_id(lang) for lang in langs]
    return build_target_batch(token_seqs, lang_ids, vocab.pad_id, vocab.bos_eos_id,
                              include_lang_loss)


# -- label-smoothed NLL ---------------------------------------------------------


def smoothed_nll(logits: Tensor, labels: np.ndarray, mask: np.ndarray,
                 epsilon: float) -> tuple[Tensor, int]:
    """Mean over samples of (1/|y|) sum over unmasked positions of the
    epsilon-smoothed negative log-likelihood.

    Each position contributes (1-eps) * (-log p[label]) plus eps/V spread over
    the full distribution.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"label smoothing must be in [0, 1): {epsilon}")
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=np.float64)
    counts = mask.sum(axis=-1)
    if np.any(counts == 0):
        raise ValueError("a sample has no unmasked label positions")
    vocab_size = logits.shape[-1]
    logp = ad.log_softmax(logits, axis=-1)
    nll = -ad.gather_last(logp, labels)
    per_pos = (1.0 - epsilon) * nll + (epsilon / vocab_size) * -(logp.sum(axis=-1))
    per_sample = (per_pos * Tensor(mask)).sum(axis=-1) * Tensor(1.0 / counts)
    return per_sample.mean(), int(mask.sum())


def loss_e2e(model: Model, samples: Sequence[TwoWaySample | ThreeWaySample], *,
             label_smoothing: float = 0.2, include_lang_loss: bool = False,
             train: bool = False) -> tuple[Tensor, int]:
    """Speech-to-translation objective on the speech encoder + decoder path."""
    feats, lens = speech_batch([s.speech for s in samples])
    dec, labels, mask = target_batch([s.target_text for s in samples],
                                     [s.tgt_lang for s in samples], model,
                                     include_lang_loss)
    logits = model.forward_speech(feats, lens, dec, train=train)
    return smoothed_nll(logits, labels, mask, label_smoothing)


def loss_asr(model: Model, samples: Sequence[AsrSample], *,
             label_smoothing: float = 0.2, include_lang_loss: bool = False,
             train: bool = False) -> tuple[Tensor, int]:
    """Transcription objective; the target language code is the source language."""
    feats, lens = speech_batch([s.speech for s in samples])
    dec, labels, mask = target_batch([s.source_text for s in samples],
                                     [s.lang for s in samples], model,
                                     include_lang_loss)
    logits = model.forward_speech(feats, lens, dec, train=train)
    return smoothed_nll(logits, labels, mask, label_smoothing)


def loss_mt(model: Model, samples: Sequence[MtSample], *,
            label_smoothing: float = 0.2, include_lang_loss: bool = False,
            train: bool = False) -> tuple[Tensor, int]:
    """Text-to-text objective on the text encoder + decoder path."""
    ids, lens = source_text_batch([s.source_text for s in samples], model)
    dec, labels, mask = target_batch([s.target_text for s in samples],
                                     [s.tgt_lang for s in samples], model,
                                     include_lang_loss)
    logits = model.forward_text(ids, lens, dec, train=train)
    return smoothed_nll(logits, labels, mask, label_smoothing)


# -- distillation ----------------------------------------------------------------


def teacher_distribution(model: Model, src_ids: np.ndarray, src_lens: np.ndarray,
                         dec_ids: np.ndarray, *, stop_gradient: bool = True,
                         train: bool = False) -> Tensor:
    """Teacher rows: softmax over the text path's logits.

    With ``stop_gradient`` (the default, and the published behavior) the result
    is detached, so no gradient ever flows back through the teacher.
    """
    logits = model.forward_text(src_ids, src_lens, dec_ids, train=train)
    probs = ad.softmax(logits, axis=-1)
    return probs.detach() if stop_gradient else probs


def loss_kd(student_logits: Tensor, teacher_probs, mask: np.ndarray) -> tuple[Tensor, int]:
    """Mean over samples of (1/|y|) sum of KL(teacher || student) at unmasked
    positions. Teacher rows must already be normalized.
    """
    mask = np.asarray(mask, dtype=np.float64)
    counts = mask.sum(axis=-1)
    if np.any(counts == 0):
        raise ValueError("a sample has no unmasked label positions")
    teacher_is_tensor = isinstance(teacher_probs, Tensor) and teacher_probs.requires_grad
    t_data = teacher_probs.data if isinstance(teacher_probs, Tensor) else \
        np.asarray(teacher_probs, dtype=np.float64)
    row_sums = t_data.sum(axis=-1)
    off = np.abs(row_sums - 1.0)
    if float(off.max(initial=0.0)) > TEACHER_ROW_TOL:
        worst = tuple(int(i) for i in np.unravel_index(int(off.argmax()), off.shape))
        raise ValueError(
            f"teacher row {worst} sums to {row_sums[worst]:.9f}, not 1")
    logs = ad.log_softmax(student_logits, axis=-1)
    if teacher_is_tensor:
        per_pos = (teacher_probs * (ad.log(teacher_probs) - logs)).sum(axis=-1)
    else:
        # 0 * log 0 contributes nothing, so clamp inside the log only.
        entropy = (t_data * np.log(np.maximum(t_data, 1e-300))).sum(axis=-1)
        per_pos = Tensor(entropy) - (logs * Tensor(t_data)).sum(axis=-1)
    per_sample = (per_pos * Tensor(mask)).sum(axis=-1) * Tensor(1.0 / counts)
    return per_sample.mean(), int(mask.sum())


def loss_multitask(model: Model, samples: Sequence[ThreeWaySample],
                   weights: LossWeights = LossWeights(), *,
                   label_smoothing: float = 0.2, include_lang_loss: bool = False,
                   train: bool = False, stop_gradient: bool = True) -> LossReport:
    """Weighted sum of the speech, text and distillation terms over one batch.

    All three terms share the same target framing and mask. The distillation
    student is the speech-path logits; the teacher is the text path behind a
    stop-gradient (``stop_gradient=False`` exists only for probing what happens
    without it).
    """
    feats, flens = speech_batch([s.speech for s in samples])
    src_ids, src_lens = source_text_batch([s.source_text for s in samples], model)
    dec, labels, mask = target_batch([s.target_text for s in samples],
                                     [s.tgt_lang for s in samples], model,
                                     include_lang_loss)
    student_logits = model.forward_speech(feats, flens, dec, train=train)
    text_logits = model.forward_text(src_ids, src_lens, dec, train=train)

    e2e, n_e2e = smoothed_nll(student_logits, labels, mask, label_smoothing)
    mt, n_mt = smoothed_nll(text_logits, labels, mask, label_smoothing)
    teacher = ad.softmax(text_logits, axis=-1)
    if stop_gradient:
        teacher = teacher.detach()
    kd, n_kd = loss_kd(student_logits, teacher, mask)

    total = weights.alpha * e2e + weights.beta * mt + weights.gamma * kd
    return LossReport(total=total.item(), e2e=e2e.item(), mt=mt.item(),
                      kd=kd.item(),
                      token_counts={"e2e": n_e2e, "mt": n_mt, "kd": n_kd},
                      tensor=total)
