"""Beam search hypotheses and the two ways to translate speech.

Memorizes a small copy task end to end, then decodes one utterance with a
widening beam, and finally contrasts direct translation with the two-stage
cascade (transcribe, then translate the transcript).
"""

from stlab.corpus import FeaturizerConfig, derive_asr, derive_mt, synthetic_copy_task
from stlab.infer import (CascadePipeline, beam_search, cascade_translate,
                         translate_e2e)
from stlab.model import ModelConfig, build_model
from stlab.textproc import LanguageCode, Vocabulary
from stlab.train import TrainConfig, train_task

XX, YY = LanguageCode("xx"), LanguageCode("yy")


def main() -> None:
    task = synthetic_copy_task(8, seed=7,
                               featurizer=FeaturizerConfig(feat_dim=4),
                               min_len=2, max_len=4)
    texts = [s.source_text for s in task] + [s.target_text for s in task]
    vocab = Vocabulary.build(texts, [XX, YY])
    mcfg = ModelConfig(vocab_size=len(vocab), feat_dim=4, model_dim=16,
                       speech_layers=1, text_layers=1, decoder_layers=1,
                       n_heads=2, ffn_dim=24)
    tcfg = TrainConfig(peak_lr=5e-3, max_epochs=300, batch_size_speech=8,
                       batch_size_text=8, seed=0)

    e2e = build_model(mcfg, vocab, seed=0)
    train_task(e2e, task, "E2E", tcfg)

    s = task[0]
    print(f"source transcript: {s.source_text!r}")
    print(f"reference target:  {s.target_text!r}\n")
    for beam in (1, 2, 5):
        hyps = beam_search(e2e, s.speech, YY, beam=beam)
        print(f"beam={beam}: {len(hyps)} finished hypotheses")
        for h in hyps[:3]:
            print(f"  score={h.score:7.3f} normalized={h.normalized_score:7.3f} "
                  f"finished={h.finished} tokens={h.tokens}")

    asr = build_model(mcfg, vocab, seed=1)
    train_task(asr, derive_asr(task), "ASR", tcfg)
    mt = build_model(mcfg, vocab, seed=2)
    train_task(mt, derive_mt(task), "MT", tcfg)
    pipeline = CascadePipeline(asr, mt, XX, YY, beam=2)

    print("\nend-to-end vs cascade on the training utterances:")
    agree = 0
    for s in task:
        direct = translate_e2e(e2e, s.speech, YY, beam=2)
        staged = cascade_translate(pipeline, s.speech)
        agree += direct == staged.translation == s.target_text
        print(f"  {s.source_text!r:16} -> e2e {direct!r:16} "
              f"cascade {staged.translation!r:16} (via {staged.transcript!r})")
    print(f"both routes reproduce the target on {agree}/{len(task)} utterances")


if __name__ == "__main__":
    main()
