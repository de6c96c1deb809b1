"""The four losses and what the stop-gradient actually blocks.

Runs a tiny random model over a handful of samples, prints the per-task
losses and the weighted total, then shows that the distillation teacher
contributes no gradient to the text encoder unless the detach is disabled.
"""

import numpy as np

from stlab.corpus import FeaturizerConfig, synthetic_copy_task
from stlab.losses import LossWeights, loss_multitask
from stlab.model import ModelConfig, build_model
from stlab.textproc import LanguageCode, Vocabulary


def grad_mass(model, group: str) -> float:
    tensors = model.parameter_groups().tensors(group)
    return sum(float(np.abs(t.grad).sum()) for t in tensors.values()
               if t.grad is not None)


def main() -> None:
    samples = synthetic_copy_task(6, seed=1,
                                  featurizer=FeaturizerConfig(feat_dim=4),
                                  min_len=2, max_len=4)
    texts = [s.source_text for s in samples] + [s.target_text for s in samples]
    vocab = Vocabulary.build(texts, [LanguageCode("xx"), LanguageCode("yy")])
    cfg = ModelConfig(vocab_size=len(vocab), feat_dim=4, model_dim=16,
                      speech_layers=1, text_layers=1, decoder_layers=1,
                      n_heads=2, ffn_dim=16)
    model = build_model(cfg, vocab, seed=0)

    weights = LossWeights()  # alpha=1, beta=1, gamma=2
    report = loss_multitask(model, samples, weights)
    print("multitask loss on an untrained model:")
    print(f"  e2e  (speech -> translation): {report.e2e:.4f}")
    print(f"  mt   (transcript -> translation): {report.mt:.4f}")
    print(f"  kd   (teacher KL): {report.kd:.4f}")
    print(f"  total = 1*e2e + 1*mt + 2*kd = {report.total:.4f}")

    kd_only = LossWeights(0.0, 0.0, 1.0)
    model.zero_grad()
    loss_multitask(model, samples, kd_only).tensor.backward()
    print("\ngradient mass from the KD term alone:")
    print(f"  speech encoder (student path): {grad_mass(model, 'speech_encoder'):.4f}")
    print(f"  text encoder (teacher path, detached): "
          f"{grad_mass(model, 'text_encoder'):.4f}")

    model.zero_grad()
    loss_multitask(model, samples, kd_only, stop_gradient=False).tensor.backward()
    print(f"  text encoder with stop_gradient=False: "
          f"{grad_mass(model, 'text_encoder'):.4f}")


if __name__ == "__main__":
    main()
