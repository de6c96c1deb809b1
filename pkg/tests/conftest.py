import numpy as np
import pytest

from stlab.corpus import FeaturizerConfig, SpeechUtterance, synthetic_copy_task
from stlab.model import ModelConfig, build_model
from stlab.textproc import LanguageCode, Vocabulary


def make_vocab(tokens=("a",), tags=("xx", "yy"), unit="word") -> Vocabulary:
    return Vocabulary(tokens=tokens, langs=[LanguageCode(t) for t in tags],
                      unit=unit)


def random_utterance(rng: np.random.Generator, frames: int,
                     feat_dim: int) -> SpeechUtterance:
    feats = rng.normal(0.0, 1.0, size=(frames, feat_dim)).astype(np.float32)
    return SpeechUtterance(feats, 16000)


@pytest.fixture
def vocab6() -> Vocabulary:
    # pad, </s>, unk, <xx>, <yy>, a
    return make_vocab()


@pytest.fixture
def micro_cfg(vocab6) -> ModelConfig:
    # Smallest config that still exercises every component (419 parameters).
    return ModelConfig(vocab_size=len(vocab6), feat_dim=2, model_dim=3,
                       speech_layers=1, text_layers=1, decoder_layers=1,
                       n_heads=1, ffn_dim=2)


@pytest.fixture
def micro_model(micro_cfg, vocab6):
    return build_model(micro_cfg, vocab6, seed=0)


@pytest.fixture
def copy_task():
    return synthetic_copy_task(8, seed=7, featurizer=FeaturizerConfig(feat_dim=4),
                               min_len=2, max_len=4)


@pytest.fixture
def copy_vocab(copy_task) -> Vocabulary:
    texts = [s.source_text for s in copy_task] + [s.target_text for s in copy_task]
    return Vocabulary.build(texts, [LanguageCode("xx"), LanguageCode("yy")])


@pytest.fixture
def copy_model(copy_task, copy_vocab):
    cfg = ModelConfig(vocab_size=len(copy_vocab), feat_dim=4, model_dim=16,
                      speech_layers=1, text_layers=1, decoder_layers=1,
                      n_heads=2, ffn_dim=24)
    return build_model(cfg, copy_vocab, seed=0)
