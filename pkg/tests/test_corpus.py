import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stlab.corpus import (FRAMES_PER_SECOND, TARGET_SAMPLE_RATE, AsrSample,
                          FeaturizerConfig, ManifestError, MtSample,
                          SpeechUtterance, ThreeWaySample, derive_asr,
                          derive_mt, derive_twoway, featurize, load_manifest,
                          read_feature_bin, resample, save_manifest,
                          synth_pivot_mt, synthetic_copy_task,
                          write_feature_bin)
from stlab.textproc import LanguageCode

FEAT = FeaturizerConfig(feat_dim=4)


def test_speech_utterance_validates_shape():
    with pytest.raises(ValueError):
        SpeechUtterance(np.zeros((0, 4), dtype=np.float32), 16000)
    with pytest.raises(ValueError):
        SpeechUtterance(np.zeros(10, dtype=np.float32), 16000)


def test_derivations_preserve_fields():
    ds = synthetic_copy_task(5, seed=0, featurizer=FEAT)
    asr, mt, st2 = derive_asr(ds), derive_mt(ds), derive_twoway(ds)
    assert len(asr) == len(mt) == len(st2) == 5
    for three, a, m, two in zip(ds, asr, mt, st2):
        assert a.source_text == m.source_text == three.source_text
        assert m.target_text == two.target_text == three.target_text
        assert a.speech == two.speech == three.speech
        assert a.lang == three.src_lang
        assert a.id == m.id == two.id == three.id


class TestResample:
    def test_identity(self):
        audio = np.arange(10.0)
        out = resample(audio, 16000, 16000)
        assert np.array_equal(out, audio)
        assert out is not audio

    def test_downsampling_halves_length(self):
        out = resample(np.ones(100), 32000, 16000)
        assert len(out) == 50

    def test_bad_args(self):
        with pytest.raises(ValueError):
            resample(np.zeros((2, 2)), 16000)
        with pytest.raises(ValueError):
            resample(np.zeros(4), 0)

    @given(st.integers(1, 500), st.sampled_from([8000, 16000, 22050, 44100]))
    @settings(max_examples=60)
    def test_output_length_formula(self, n, rate):
        out = resample(np.zeros(n), rate)
        assert len(out) == int(round(n * TARGET_SAMPLE_RATE / rate))


class TestFeaturizer:
    def test_text_mode_is_deterministic_per_symbol(self):
        a = featurize("ab", FEAT)
        b = featurize("ab", FEAT)
        assert a == b
        assert a.proxy == "ab"
        assert a.frames == 2 * FEAT.frames_per_symbol
        # Shared characters share feature blocks.
        c = featurize("ba", FEAT)
        k = FEAT.frames_per_symbol
        assert np.array_equal(a.features[:k], c.features[k:])

    def test_distinct_seeds_differ(self):
        a = featurize("a", FEAT)
        b = featurize("a", FeaturizerConfig(feat_dim=4, seed=1))
        assert not np.array_equal(a.features, b.features)

    def test_duration_tracks_frames(self):
        utt = featurize("abc", FEAT)
        assert utt.duration == pytest.approx(utt.frames / FRAMES_PER_SECOND)

    def test_audio_mode_window_count(self):
        audio = np.random.default_rng(0).normal(size=3210)
        utt = featurize(audio, FEAT, sample_rate=TARGET_SAMPLE_RATE)
        window = TARGET_SAMPLE_RATE // FRAMES_PER_SECOND
        assert utt.frames == -(-3210 // window)
        assert utt.feat_dim == FEAT.feat_dim
        assert utt.proxy is None

    def test_audio_mode_requires_rate(self):
        with pytest.raises(ValueError):
            featurize(np.zeros(100), FEAT)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            featurize("", FEAT)
        with pytest.raises(ValueError):
            featurize(np.zeros(0), FEAT, sample_rate=16000)


def test_synth_pivot_mt_counts_dropped():
    xx, yy, zz = LanguageCode("xx"), LanguageCode("yy"), LanguageCode("zz")
    pairs = [MtSample("s1", "p1", xx, yy), MtSample("s2", "boom", xx, yy),
             MtSample("s3", "p3", xx, yy)]

    def translator(text):
        if text == "boom":
            raise RuntimeError("no translation")
        return text.upper()

    out, dropped = synth_pivot_mt(pairs, translator, zz)
    assert dropped == 1
    assert [(m.source_text, m.target_text, m.tgt_lang) for m in out] == \
        [("s1", "P1", zz), ("s3", "P3", zz)]


class TestFeatureBin:
    def test_round_trip(self, tmp_path):
        feats = np.random.default_rng(1).normal(size=(7, 3)).astype(np.float32)
        path = tmp_path / "x.bin"
        write_feature_bin(path, feats)
        assert np.array_equal(read_feature_bin(path), feats)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x01\x00")
        with pytest.raises(ValueError, match="truncated"):
            read_feature_bin(path)

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "short.bin"
        write_feature_bin(path, np.zeros((2, 2), dtype=np.float32))
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(ValueError, match="expected"):
            read_feature_bin(path)


class TestManifests:
    @pytest.mark.parametrize("features", ["inline", "sidecar", "proxy"])
    def test_st3_round_trip(self, tmp_path, features):
        ds = synthetic_copy_task(4, seed=2, featurizer=FEAT)
        path = tmp_path / "data.jsonl"
        save_manifest(ds, path, features=features)
        back = load_manifest(path, featurizer=FEAT)
        assert back == ds

    def test_all_kinds_round_trip(self, tmp_path):
        ds = synthetic_copy_task(3, seed=3, featurizer=FEAT)
        for name, subset in [("st3", ds), ("st2", derive_twoway(ds)),
                             ("asr", derive_asr(ds)), ("mt", derive_mt(ds))]:
            path = tmp_path / f"{name}.jsonl"
            save_manifest(subset, path, features="inline")
            back = load_manifest(path, kind=name, featurizer=FEAT)
            assert back == subset

    def test_kind_inference_matches_enforcement(self, tmp_path):
        ds = derive_mt(synthetic_copy_task(3, seed=4, featurizer=FEAT))
        path = tmp_path / "mt.jsonl"
        save_manifest(ds, path)
        assert load_manifest(path) == load_manifest(path, kind="mt")

    def test_proxy_needs_featurizer(self, tmp_path):
        ds = synthetic_copy_task(2, seed=5, featurizer=FEAT)
        path = tmp_path / "p.jsonl"
        save_manifest(ds, path, features="proxy")
        with pytest.raises(ManifestError, match="line 1"):
            load_manifest(path)

    def test_audio_rows_are_featurized(self, tmp_path):
        rows = [{"id": "u0", "src_lang": "xx", "src_text": "hi",
                 "audio": [0.1] * 320, "sample_rate": 16000}]
        path = tmp_path / "a.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows))
        (sample,) = load_manifest(path, featurizer=FEAT)
        assert isinstance(sample, AsrSample)
        assert sample.speech.frames == 2

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"src_text": "a", "tgt_text": "b", '
                        '"src_lang": "xx", "tgt_lang": "yy"}\nnot json\n')
        with pytest.raises(ManifestError, match="line 2"):
            load_manifest(path)

    def test_missing_field_names_line(self, tmp_path):
        path = tmp_path / "miss.jsonl"
        path.write_text('{"src_text": "a", "tgt_text": "b", "src_lang": "xx"}\n')
        with pytest.raises(ManifestError, match="line 1.*tgt_lang"):
            load_manifest(path)

    def test_non_object_row_rejected(self, tmp_path):
        path = tmp_path / "arr.jsonl"
        path.write_text("[1, 2]\n")
        with pytest.raises(ManifestError, match="line 1"):
            load_manifest(path)

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            load_manifest(tmp_path / "x.jsonl", kind="quadway")

    def test_blank_lines_skipped(self, tmp_path):
        ds = derive_mt(synthetic_copy_task(2, seed=6, featurizer=FEAT))
        path = tmp_path / "gap.jsonl"
        save_manifest(ds, path)
        path.write_text(path.read_text().replace("\n", "\n\n"))
        assert load_manifest(path) == ds

    def test_sidecar_files_exist(self, tmp_path):
        ds = synthetic_copy_task(2, seed=8, featurizer=FEAT)
        path = tmp_path / "s.jsonl"
        save_manifest(ds, path, features="sidecar")
        row = json.loads(path.read_text().splitlines()[0])
        assert (tmp_path / row["features_file"]).exists()

    @given(st.data())
    @settings(max_examples=100, deadline=None)
    def test_random_datasets_round_trip(self, data):
        rng_seed = data.draw(st.integers(0, 2 ** 31))
        n = data.draw(st.integers(1, 6))
        rng = np.random.default_rng(rng_seed)
        ds = []
        for i in range(n):
            src = " ".join(data.draw(st.lists(
                st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=5)))
            tgt = " ".join(data.draw(st.lists(
                st.sampled_from(["p", "q", "r"]), min_size=1, max_size=5)))
            feats = rng.normal(size=(rng.integers(1, 9), 4)).astype(np.float32)
            ds.append(ThreeWaySample(SpeechUtterance(feats, 16000), src, tgt,
                                     LanguageCode("xx"), LanguageCode("yy"),
                                     id=f"r{i}"))
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "m.jsonl"
            save_manifest(ds, path, features="inline")
            assert load_manifest(path) == ds


class TestSyntheticCopyTask:
    def test_shape_and_uniqueness(self):
        ds = synthetic_copy_task(20, seed=11, featurizer=FEAT)
        assert len(ds) == 20
        sources = [s.source_text for s in ds]
        assert len(set(sources)) == 20
        for s in ds:
            assert 3 <= len(s.source_text.split()) <= 8

    def test_cipher_is_a_cyclic_shift(self):
        ds = synthetic_copy_task(10, seed=12, featurizer=FEAT)
        shift = {"a": "b", "b": "c", "c": "d", "d": "e", "e": "f", "f": "a"}
        for s in ds:
            expected = " ".join(shift[w] for w in s.source_text.split())
            assert s.target_text == expected

    def test_speech_matches_featurized_source(self):
        ds = synthetic_copy_task(3, seed=13, featurizer=FEAT)
        for s in ds:
            assert s.speech == featurize(s.source_text, FEAT)

    def test_deterministic(self):
        a = synthetic_copy_task(6, seed=14, featurizer=FEAT)
        b = synthetic_copy_task(6, seed=14, featurizer=FEAT)
        assert a == b
