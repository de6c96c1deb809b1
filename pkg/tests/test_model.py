import numpy as np
import pytest

from conftest import random_utterance
from stlab.losses import speech_batch
from stlab.model import (GROUP_NAMES, MASK_BIAS, DropoutPlan, ModelConfig,
                         build_model, build_target, build_target_batch,
                         causal_bias, count_trainable, desk_config, freeze,
                         init_from, key_padding_bias, load_checkpoint,
                         load_group_snapshot, params_snapshot, save_checkpoint,
                         sinusoidal_positions, unfreeze_all)


class TestDropoutPlan:
    def test_variants_touch_the_documented_sites(self):
        a = DropoutPlan.variant_a().as_dict()
        assert {k for k, p in a.items() if p > 0} == \
            {"decoder_ffn", "adapter_self_attn", "decoder_embed"}
        b = DropoutPlan.variant_b().as_dict()
        assert {k for k, p in b.items() if p > 0} == {"adapter_ffn_intermediate"}
        assert set(a) == set(b) == {"decoder_ffn", "adapter_self_attn",
                                    "adapter_ffn_intermediate", "decoder_embed"}

    def test_probability_range(self):
        with pytest.raises(ValueError):
            DropoutPlan(decoder_ffn_p=1.0)
        with pytest.raises(ValueError):
            DropoutPlan(decoder_embed_p=-0.1)


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=3)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, model_dim=10, n_heads=4)
    with pytest.raises(ValueError):
        ModelConfig(vocab_size=10, ffn_dim=0)


def test_model_config_round_trip():
    cfg = desk_config(11, feat_dim=4, dropout=DropoutPlan.variant_b(),
                      tie_embeddings=False)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_sinusoidal_positions_formula():
    pe = sinusoidal_positions(4, 6)
    assert pe.shape == (4, 6)
    np.testing.assert_allclose(pe[0], [0, 1, 0, 1, 0, 1], atol=1e-12)
    np.testing.assert_allclose(pe[2, 0], np.sin(2.0), atol=1e-12)
    np.testing.assert_allclose(pe[3, 1], np.cos(3.0), atol=1e-12)
    # Odd dimensions must not crash or leave unfilled columns.
    assert sinusoidal_positions(3, 5).shape == (3, 5)


class TestTying:
    def test_tied_head_aliases_the_embedding(self, micro_cfg, vocab6):
        model = build_model(micro_cfg, vocab6)
        assert model.lm_head is model.shared_embed
        views = model.parameter_groups().embedding_views
        assert views["lm_head"] is views["decoder_input_embed"]
        assert "embeddings.lm_head" not in model.params

    def test_untied_head_adds_exactly_vocab_by_dim(self, micro_cfg, vocab6):
        import dataclasses
        tied = build_model(micro_cfg, vocab6)
        untied_cfg = dataclasses.replace(micro_cfg, tie_embeddings=False)
        untied = build_model(untied_cfg, vocab6)
        expected = micro_cfg.vocab_size * micro_cfg.model_dim
        assert count_trainable(untied) - count_trainable(tied) == expected
        assert untied.lm_head is not untied.shared_embed
        # The untied head starts as a copy, so forwards agree at init.
        np.testing.assert_array_equal(untied.lm_head.data, untied.shared_embed.data)
        # Input embeddings stay shared either way.
        views = untied.parameter_groups().embedding_views
        assert views["text_encoder_embed"] is views["decoder_input_embed"]
        assert views["lm_head"] is not views["text_encoder_embed"]


def test_groups_partition_all_parameters(micro_model):
    groups = micro_model.parameter_groups()
    names = [n for g in GROUP_NAMES for n in groups.names(g)]
    assert sorted(names) == sorted(micro_model.params)
    with pytest.raises(KeyError):
        groups.names("adapter")


def test_checksum_tracks_changes(micro_model):
    groups = micro_model.parameter_groups()
    before = groups.checksum("text_decoder")
    assert before == micro_model.parameter_groups().checksum("text_decoder")
    name = groups.names("text_decoder")[0]
    micro_model.params[name].data += 1.0
    assert groups.checksum("text_decoder") != before


def test_freeze_marks_only_named_groups(micro_model):
    freeze(micro_model, ["text_encoder"])
    groups = micro_model.parameter_groups()
    assert all(not t.requires_grad for t in groups.tensors("text_encoder").values())
    assert all(t.requires_grad for t in groups.tensors("text_decoder").values())
    unfreeze_all(micro_model)
    assert all(t.requires_grad for t in micro_model.params.values())
    with pytest.raises(KeyError):
        freeze(micro_model, ["decoder"])


class TestInitFrom:
    def test_copies_bytes_without_aliasing(self, micro_cfg, vocab6):
        src = build_model(micro_cfg, vocab6, seed=1)
        dst = build_model(micro_cfg, vocab6, seed=2)
        snap = src.parameter_groups().snapshot("speech_encoder")
        init_from(dst, speech_encoder=snap)
        for name, arr in snap.items():
            assert np.array_equal(dst.params[name].data, arr)
            assert dst.params[name].data is not arr
        # Other groups untouched.
        assert dst.parameter_groups().checksum("text_decoder") != \
            src.parameter_groups().checksum("text_decoder")

    def test_key_set_must_match(self, micro_model):
        snap = micro_model.parameter_groups().snapshot("text_decoder")
        snap.pop(sorted(snap)[0])
        with pytest.raises(ValueError, match="missing"):
            init_from(micro_model, text_decoder=snap)
        snap = micro_model.parameter_groups().snapshot("text_decoder")
        snap["text_decoder.bogus"] = np.zeros(1)
        with pytest.raises(ValueError, match="extra"):
            init_from(micro_model, text_decoder=snap)

    def test_shape_mismatch_names_the_tensor(self, micro_model):
        snap = micro_model.parameter_groups().snapshot("embeddings")
        key = sorted(snap)[0]
        snap[key] = np.zeros((2, 2))
        with pytest.raises(ValueError, match=key):
            init_from(micro_model, embeddings=snap)


def test_attention_masks():
    bias = key_padding_bias(np.array([2, 3]), 3)
    assert bias.shape == (2, 1, 1, 3)
    assert bias[0, 0, 0, 2] == MASK_BIAS and bias[0, 0, 0, 1] == 0.0
    cb = causal_bias(np.array([3]), 3)
    assert cb.shape == (1, 1, 3, 3)
    assert cb[0, 0, 0, 1] == MASK_BIAS  # future
    assert cb[0, 0, 2, 1] == 0.0        # past


def test_encode_speech_validation(micro_model):
    with pytest.raises(ValueError):
        micro_model.encode_speech(np.zeros((2, 3)), np.array([2]))
    with pytest.raises(ValueError):
        micro_model.encode_speech(np.zeros((1, 3, 7)), np.array([3]))
    with pytest.raises(ValueError):
        micro_model.encode_speech(np.zeros((1, 3, 2)), np.array([0]))


def test_padding_does_not_change_real_positions(micro_model):
    rng = np.random.default_rng(0)
    utt = random_utterance(rng, 5, 2)
    feats, lens = speech_batch([utt])
    dec = np.array([[1, 4, 5, 5]])
    logits = micro_model.forward_speech(feats, lens, dec).data

    padded = np.zeros((1, 9, 2))
    padded[:, :5] = feats
    dec_padded = np.array([[1, 4, 5, 5, 0, 0]])
    logits_padded = micro_model.forward_speech(padded, lens, dec_padded).data
    np.testing.assert_allclose(logits_padded[:, :4], logits, atol=1e-6)


def test_text_padding_invariance(micro_model):
    ids = np.array([[1, 5, 5, 1]])
    dec = np.array([[1, 3, 5]])
    base = micro_model.forward_text(ids, np.array([4]), dec).data
    ids_p = np.array([[1, 5, 5, 1, 0, 0, 0]])
    wide = micro_model.forward_text(ids_p, np.array([4]), dec).data
    np.testing.assert_allclose(wide, base, atol=1e-6)


def test_seed_controls_init(micro_cfg, vocab6):
    a = build_model(micro_cfg, vocab6, seed=3)
    b = build_model(micro_cfg, vocab6, seed=3)
    c = build_model(micro_cfg, vocab6, seed=4)
    for name in a.params:
        assert np.array_equal(a.params[name].data, b.params[name].data)
    assert any(not np.array_equal(a.params[n].data, c.params[n].data)
               for n in a.params)


def test_vocab_must_fit_config(vocab6):
    cfg = ModelConfig(vocab_size=5, feat_dim=2, model_dim=4, n_heads=1, ffn_dim=2)
    with pytest.raises(ValueError):
        build_model(cfg, vocab6)


class TestTargetFraming:
    def test_single_sequence(self):
        ts = build_target([7, 8], lang_id=4, bos_eos_id=1)
        assert ts.full.tolist() == [1, 4, 7, 8, 1]
        assert ts.decoder_input.tolist() == [1, 4, 7, 8]
        assert ts.labels.tolist() == [4, 7, 8, 1]
        assert ts.loss_mask.tolist() == [0.0, 1.0, 1.0, 1.0]

    def test_lang_loss_toggle_changes_one_position(self):
        off = build_target([7], 4, 1, include_lang_loss=False)
        on = build_target([7], 4, 1, include_lang_loss=True)
        assert on.loss_mask.sum() - off.loss_mask.sum() == 1.0
        assert on.loss_mask[1:].tolist() == off.loss_mask[1:].tolist()

    def test_batch_padding(self):
        dec, labels, mask = build_target_batch([[7], [7, 8, 9]], [4, 4],
                                               pad_id=0, bos_eos_id=1)
        assert dec.shape == labels.shape == mask.shape == (2, 5)
        assert dec[0].tolist() == [1, 4, 7, 0, 0]
        assert labels[0].tolist() == [4, 7, 1, 0, 0]
        assert mask[0].tolist() == [0.0, 1.0, 1.0, 0.0, 0.0]
        assert mask[1].tolist() == [0.0, 1.0, 1.0, 1.0, 1.0]


class TestCheckpoints:
    def test_round_trip_is_exact(self, micro_model, tmp_path):
        path = save_checkpoint(micro_model, tmp_path / "ck", tag="probe")
        loaded, tag = load_checkpoint(path)
        assert tag == "probe"
        assert loaded.config == micro_model.config
        for name in micro_model.params:
            assert np.array_equal(loaded.params[name].data,
                                  micro_model.params[name].data)

    def test_group_snapshot_loader(self, micro_model, tmp_path):
        path = save_checkpoint(micro_model, tmp_path / "ck")
        snap = load_group_snapshot(path, "text_encoder")
        expected = micro_model.parameter_groups().snapshot("text_encoder")
        assert sorted(snap) == sorted(expected)
        for name in snap:
            assert np.array_equal(snap[name], expected[name])


class TestDropout:
    def _speech_logits(self, model, train):
        rng = np.random.default_rng(5)
        utt = random_utterance(rng, 4, 2)
        feats, lens = speech_batch([utt])
        dec = np.array([[1, 4, 5]])
        return model.forward_speech(feats, lens, dec, train=train).data

    def test_eval_mode_ignores_dropout(self, micro_cfg, vocab6):
        import dataclasses
        cfg = dataclasses.replace(micro_cfg, dropout=DropoutPlan.variant_a())
        model = build_model(cfg, vocab6)
        a = self._speech_logits(model, train=False)
        b = self._speech_logits(model, train=False)
        np.testing.assert_array_equal(a, b)

    def test_train_mode_applies_dropout(self, micro_cfg, vocab6):
        import dataclasses
        cfg = dataclasses.replace(micro_cfg, dropout=DropoutPlan.variant_a())
        model = build_model(cfg, vocab6)
        eval_out = self._speech_logits(model, train=False)
        train_out = self._speech_logits(model, train=True)
        assert not np.allclose(eval_out, train_out)

    def test_zero_plan_makes_train_equal_eval(self, micro_model):
        a = self._speech_logits(micro_model, train=False)
        b = self._speech_logits(micro_model, train=True)
        np.testing.assert_array_equal(a, b)


def test_params_snapshot_is_detached(micro_model):
    snap = params_snapshot(micro_model)
    name = sorted(snap)[0]
    micro_model.params[name].data += 5.0
    assert not np.array_equal(snap[name], micro_model.params[name].data)
