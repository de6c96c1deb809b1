"""Desk-scale speech translation lab.

A small numpy implementation of the full training stack for end-to-end,
cascaded, and multi-task speech translation: featurized toy corpora, a
transformer with a speech adapter, label-smoothed and distillation losses,
inverse-square-root AdamW training strategies, beam-search decoding, and
WER/CER/BLEU scoring.
"""

from .corpus import (AsrSample, FeaturizerConfig, ManifestError, MtSample,
                     SpeechUtterance, ThreeWaySample, TwoWaySample, derive_asr,
                     derive_mt, derive_twoway, featurize, load_manifest,
                     save_manifest, synthetic_copy_task)
from .infer import (CascadePipeline, Hypothesis, beam_search, cascade_translate,
                    decode_batch, transcribe, translate_e2e, translate_text)
from .losses import (LossReport, LossWeights, loss_asr, loss_e2e, loss_kd,
                     loss_mt, loss_multitask)
from .metrics import EvalReport, bleu, cer, edit_distance, score_corpus, wer
from .model import (DropoutPlan, Model, ModelConfig, build_model,
                    count_trainable, desk_config, freeze, init_from,
                    load_checkpoint, save_checkpoint)
from .textproc import (CleaningRules, LanguageCode, Vocabulary, clean_bitext,
                       detokenize, eval_normalize, tokenize)
from .train import (STRATEGY_NAMES, TABLE_LABELS, AdamW, StrategyResult,
                    TrainConfig, lr_schedule, run_strategy, train_multitask,
                    train_task)

__version__ = "0.1.0"

__all__ = [
    "AdamW", "AsrSample", "CascadePipeline", "CleaningRules", "DropoutPlan",
    "EvalReport", "FeaturizerConfig", "Hypothesis", "LanguageCode",
    "LossReport", "LossWeights", "ManifestError", "Model", "ModelConfig",
    "MtSample", "STRATEGY_NAMES", "SpeechUtterance", "StrategyResult",
    "TABLE_LABELS", "ThreeWaySample", "TrainConfig", "TwoWaySample",
    "Vocabulary", "beam_search", "bleu", "build_model", "cascade_translate",
    "cer", "clean_bitext", "count_trainable", "decode_batch", "derive_asr",
    "derive_mt", "derive_twoway", "desk_config", "detokenize", "edit_distance",
    "eval_normalize", "featurize", "freeze", "init_from", "load_checkpoint",
    "load_manifest", "loss_asr", "loss_e2e", "loss_kd", "loss_mt",
    "loss_multitask", "lr_schedule", "run_strategy", "save_checkpoint",
    "save_manifest", "score_corpus", "synthetic_copy_task", "tokenize",
    "train_multitask", "train_task", "transcribe", "translate_e2e",
    "translate_text", "wer",
]
