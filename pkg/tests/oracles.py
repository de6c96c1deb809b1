"""Reference implementations the tests compare the package against.

Everything here is written straight from the definitions with plain loops.
None of it shares code with the package; that is the point.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def softmax_row(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def smoothed_nll_oracle(logits: np.ndarray, labels: np.ndarray,
                        mask: np.ndarray, epsilon: float) -> float:
    """Label-smoothed NLL, per-position softmax-gather, per-sample mean over
    unmasked positions, batch mean over samples.
    """
    batch, positions, vocab = logits.shape
    per_sample = []
    for b in range(batch):
        terms = []
        for t in range(positions):
            if not mask[b, t]:
                continue
            logp = np.log(softmax_row(logits[b, t]))
            nll = -logp[labels[b, t]]
            smooth = -(logp.sum()) / vocab
            terms.append((1.0 - epsilon) * nll + epsilon * smooth)
        per_sample.append(sum(terms) / len(terms))
    return sum(per_sample) / len(per_sample)


def kd_oracle(student_logits: np.ndarray, teacher_probs: np.ndarray,
              mask: np.ndarray) -> float:
    """Mean over samples of the per-sample mean KL(teacher || student)."""
    batch, positions, vocab = student_logits.shape
    per_sample = []
    for b in range(batch):
        total, count = 0.0, 0
        for t in range(positions):
            if not mask[b, t]:
                continue
            logq = np.log(softmax_row(student_logits[b, t]))
            kl = 0.0
            for v in range(vocab):
                tv = float(teacher_probs[b, t, v])
                if tv > 0.0:
                    kl += tv * (math.log(tv) - logq[v])
            total += kl
            count += 1
        per_sample.append(total / count)
    return sum(per_sample) / len(per_sample)


def dp_edit_distance(a, b) -> int:
    """Full-matrix Levenshtein distance with unit costs."""
    n, m = len(a), len(b)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i, j] = min(dist[i - 1, j] + 1,
                             dist[i, j - 1] + 1,
                             dist[i - 1, j - 1] + int(a[i - 1] != b[j - 1]))
    return int(dist[n, m])


def bleu_from_tables(correct, total, sys_len: int, ref_len: int) -> float:
    """Closed-form corpus BLEU from explicit n-gram count tables.

    Exponential smoothing replaces each zero numerator with
    100 / (2^k * denominator); a zero denominator ends the precision list and
    the remaining orders contribute log(0) (a huge negative constant).
    """
    log_zero = -9999999999.0
    precisions = []
    smoothing = 1.0
    for c, t in zip(correct, total):
        if t == 0:
            break
        if c == 0:
            smoothing *= 2.0
            precisions.append(100.0 / (smoothing * t))
        else:
            precisions.append(100.0 * c / t)
    while len(precisions) < len(correct):
        precisions.append(0.0)
    if sys_len == 0:
        bp = 0.0
    elif sys_len < ref_len:
        bp = math.exp(1.0 - ref_len / sys_len)
    else:
        bp = 1.0
    log_sum = sum(math.log(p) if p > 0.0 else log_zero for p in precisions)
    return bp * math.exp(log_sum / len(correct))


def adamw_scalar(w0: float, grads, lrs, beta1: float = 0.9, beta2: float = 0.98,
                 eps: float = 1e-8, weight_decay: float = 0.0) -> list[float]:
    """The published AdamW update, transcribed for a single scalar weight.

    Returns the weight after each step.
    """
    w, m, v = float(w0), 0.0, 0.0
    out = []
    for t, (g, lr) in enumerate(zip(grads, lrs), start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        w = w - lr * (m_hat / (math.sqrt(v_hat) + eps) + weight_decay * w)
        out.append(w)
    return out


def inverse_sqrt_lr(step: int, warmup: int, peak: float) -> float:
    if step <= warmup:
        return peak * step / warmup
    return peak * math.sqrt(warmup / step)


def enumerate_finished(model, memory, memory_bias, lang_id: int,
                       max_len: int, length_penalty: float):
    """Score every sequence that ends with the boundary token within max_len
    steps by teacher forcing, and return (tokens, score, normalized) tuples.

    Interior tokens range over the vocabulary minus pad (never proposed) and
    the boundary token (which would have ended the sequence earlier).
    """
    from stlab import autodiff as ad
    from stlab.autodiff import Tensor

    vocab = model.vocab
    eos = vocab.bos_eos_id
    interior = [i for i in range(len(vocab)) if i not in (vocab.pad_id, eos)]
    results = []
    for length in range(1, max_len + 1):
        seqs = [(*mid, eos) for mid in itertools.product(interior,
                                                         repeat=length - 1)]
        dec = np.array([[eos, lang_id, *seq] for seq in seqs], dtype=np.int64)
        mem = Tensor(np.repeat(memory.data, len(seqs), axis=0))
        bias = np.repeat(memory_bias, len(seqs), axis=0)
        logp = ad.log_softmax(model.decode(mem, bias, dec), axis=-1).data
        for row, seq in enumerate(seqs):
            score = 0.0
            for i, tok in enumerate(seq):
                score += float(logp[row, 1 + i, tok])
            results.append((list(seq), score,
                            score / (length ** length_penalty)))
    return results


def best_finished(results):
    """Argmax by normalized score; ties break toward the smaller token list."""
    return min(results, key=lambda r: (-r[2], r[0]))
