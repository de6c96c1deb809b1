"""Datasets for the desk-scale lab: sample records, projections between task
views, a toy featurizer, audio resampling, pivot-based MT synthesis, and
line-delimited manifests.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .textproc import LanguageCode

TARGET_SAMPLE_RATE = 16000
# Nominal frame rate of featurized speech: one frame per 10 ms.
FRAMES_PER_SECOND = 100


class ManifestError(ValueError):
    """Schema violation in a manifest file; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class SpeechUtterance:
    """Featurized speech: a (frames, feat_dim) float32 matrix.

    ``proxy`` optionally records the text the toy featurizer derived the
    features from, which lets manifests stay small and reproducible.
    """

    features: np.ndarray
    source_sample_rate: int = TARGET_SAMPLE_RATE
    duration: float = 0.0
    proxy: str | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a (frames>=1, feat_dim) matrix")
        if self.source_sample_rate <= 0:
            raise ValueError("source_sample_rate must be positive")

    @property
    def frames(self) -> int:
        return int(self.features.shape[0])

    @property
    def feat_dim(self) -> int:
        return int(self.features.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpeechUtterance):
            return NotImplemented
        return (np.array_equal(self.features, other.features)
                and self.source_sample_rate == other.source_sample_rate
                and self.duration == other.duration
                and self.proxy == other.proxy)


@dataclass
class TwoWaySample:
    """Speech paired with its translation only."""

    speech: SpeechUtterance
    target_text: str
    src_lang: LanguageCode
    tgt_lang: LanguageCode
    id: str = ""


@dataclass
class ThreeWaySample:
    """Speech paired with both its transcript and its translation."""

    speech: SpeechUtterance
    source_text: str
    target_text: str
    src_lang: LanguageCode
    tgt_lang: LanguageCode
    id: str = ""


@dataclass
class AsrSample:
    speech: SpeechUtterance
    source_text: str
    lang: LanguageCode
    id: str = ""


@dataclass
class MtSample:
    source_text: str
    target_text: str
    src_lang: LanguageCode
    tgt_lang: LanguageCode
    id: str = ""


def derive_asr(ds: Sequence[ThreeWaySample]) -> list[AsrSample]:
    return [AsrSample(s.speech, s.source_text, s.src_lang, id=s.id) for s in ds]


def derive_mt(ds: Sequence[ThreeWaySample]) -> list[MtSample]:
    return [MtSample(s.source_text, s.target_text, s.src_lang, s.tgt_lang, id=s.id)
            for s in ds]


def derive_twoway(ds: Sequence[ThreeWaySample]) -> list[TwoWaySample]:
    return [TwoWaySample(s.speech, s.target_text, s.src_lang, s.tgt_lang, id=s.id)
            for s in ds]


def resample(audio: np.ndarray, from_hz: int, to_hz: int = TARGET_SAMPLE_RATE) -> np.ndarray:
    """Linear-interpolation resampler.

    The output has round(len * to_hz / from_hz) samples; ``from_hz == to_hz``
    is the identity. Good enough for the toy corpus; not a polyphase filter.
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise ValueError("audio must be 1-d")
    if from_hz <= 0 or to_hz <= 0:
        raise ValueError("sample rates must be positive")
    if from_hz == to_hz:
        return audio.copy()
    n_out = int(round(len(audio) * to_hz / from_hz))
    if len(audio) == 0 or n_out == 0:
        return np.zeros(0, dtype=np.float64)
    # Output sample i sits at time i/to_hz, i.e. input index i*from_hz/to_hz.
    idx = np.arange(n_out) * (from_hz / to_hz)
    return np.interp(idx, np.arange(len(audio)), audio)


@dataclass(frozen=True)
class FeaturizerConfig:
    feat_dim: int = 8
    frames_per_symbol: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.feat_dim < 1 or self.frames_per_symbol < 1:
            raise ValueError("feat_dim and frames_per_symbol must be >= 1")


def _symbol_rng(seed: int, symbol: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}\x00{symbol}".encode("utf-8"),
                             digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def featurize(source, config: FeaturizerConfig,
              sample_rate: int | None = None) -> SpeechUtterance:
    """Build a SpeechUtterance from a text proxy or from raw audio.

    Text mode hashes each character to a fixed pseudo-random block of
    ``frames_per_symbol`` frames, so identical strings always featurize
    identically and distinct strings collide with negligible probability.
    Audio mode resamples to 16 kHz and projects 10 ms windows.
    """
    if isinstance(source, str):
        if not source:
            raise ValueError("cannot featurize an empty string")
        blocks = [
            _symbol_rng(config.seed, sym)
            .normal(0.0, 1.0, size=(config.frames_per_symbol, config.feat_dim))
            for sym in source
        ]
        feats = np.concatenate(blocks, axis=0).astype(np.float32)
        return SpeechUtterance(feats, TARGET_SAMPLE_RATE,
                               duration=feats.shape[0] / FRAMES_PER_SECOND,
                               proxy=source)
    audio = np.asarray(source, dtype=np.float64)
    if sample_rate is None:
        raise ValueError("sample_rate is required for audio input")
    audio = resample(audio, sample_rate, TARGET_SAMPLE_RATE)
    if len(audio) == 0:
        raise ValueError("cannot featurize empty audio")
    win = TARGET_SAMPLE_RATE // FRAMES_PER_SECOND
    n_frames = math.ceil(len(audio) / win)
    padded = np.zeros(n_frames * win, dtype=np.float64)
    padded[: len(audio)] = audio
    proj = np.random.default_rng(config.seed).normal(
        0.0, win ** -0.5, size=(win, config.feat_dim))
    feats = (padded.reshape(n_frames, win) @ proj).astype(np.float32)
    return SpeechUtterance(feats, TARGET_SAMPLE_RATE,
                           duration=len(audio) / TARGET_SAMPLE_RATE)


def synth_pivot_mt(pairs: Sequence[MtSample], translator: Callable[[str], str],
                   tgt_lang: LanguageCode) -> tuple[list[MtSample], int]:
    """Turn source->pivot bitext into source->target bitext by translating the
    pivot side. Items where the translator raises are dropped and counted.
    """
    out: list[MtSample] = []
    dropped = 0
    for p in pairs:
        try:
            translated = translator(p.target_text)
        except Exception:
            dropped += 1
            continue
        out.append(MtSample(p.source_text, translated, p.src_lang, tgt_lang, id=p.id))
    return out, dropped


# --- manifests -------------------------------------------------------------

_KINDS = ("st2", "st3", "asr", "mt")


def _speech_to_fields(utt: SpeechUtterance, features: str, path: Path,
                      sample_id: str) -> dict:
    fields: dict = {"sample_rate": utt.source_sample_rate, "duration": utt.duration}
    if utt.proxy is not None:
        fields["speech_proxy"] = utt.proxy
    if features == "inline":
        fields["features"] = [[float(v) for v in row] for row in utt.features]
    elif features == "sidecar":
        rel = f"{path.stem}.feats/{sample_id}.bin"
        target = path.parent / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        write_feature_bin(target, utt.features)
        fields["features_file"] = rel
    elif features == "proxy":
        if utt.proxy is None:
            raise ValueError(f"sample {sample_id!r} has no text proxy to store")
    else:
        raise ValueError(f"unknown features mode: {features!r}")
    return fields


def write_feature_bin(path, feats: np.ndarray) -> None:
    """Binary feature matrix: int32 LE [frames, feat_dim] header, float32 LE data."""
    feats = np.asarray(feats, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(struct.pack("<ii", feats.shape[0], feats.shape[1]))
        f.write(feats.astype("<f4").tobytes())


def read_feature_bin(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(8)
        if len(header) != 8:
            raise ValueError(f"{path}: truncated feature header")
        frames, dim = struct.unpack("<ii", header)
        data = np.frombuffer(f.read(), dtype="<f4")
    if data.size != frames * dim:
        raise ValueError(f"{path}: expected {frames * dim} values, got {data.size}")
    return data.reshape(frames, dim).copy()


def save_manifest(samples: Sequence, path, features: str = "inline") -> None:
    """Write samples as line-delimited JSON records.

    ``features`` picks how speech is stored: "inline" nested arrays, "sidecar"
    binary files next to the manifest, or "proxy" (text proxy only; the loader
    must then be given a FeaturizerConfig).
    """
    path = Path(path)
    lines = []
    for i, s in enumerate(samples):
        sample_id = s.id or f"u{i:06d}"
        if isinstance(s, ThreeWaySample):
            row = {"id": sample_id, "src_lang": s.src_lang.tag,
                   "tgt_lang": s.tgt_lang.tag, "src_text": s.source_text,
                   "tgt_text": s.target_text}
            row.update(_speech_to_fields(s.speech, features, path, sample_id))
        elif isinstance(s, TwoWaySample):
            row = {"id": sample_id, "src_lang": s.src_lang.tag,
                   "tgt_lang": s.tgt_lang.tag, "tgt_text": s.target_text}
            row.update(_speech_to_fields(s.speech, features, path, sample_id))
        elif isinstance(s, AsrSample):
            row = {"id": sample_id, "src_lang": s.lang.tag, "src_text": s.source_text}
            row.update(_speech_to_fields(s.speech, features, path, sample_id))
        elif isinstance(s, MtSample):
            row = {"id": sample_id, "src_lang": s.src_lang.tag,
                   "tgt_lang": s.tgt_lang.tag, "src_text": s.source_text,
                   "tgt_text": s.target_text}
        else:
            raise TypeError(f"cannot serialize {type(s).__name__}")
        lines.append(json.dumps(row, ensure_ascii=False))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _require(row: dict, key: str, line: int):
    if key not in row:
        raise ManifestError(line, f"missing field {key!r}")
    return row[key]


def _load_speech(row: dict, line: int, base: Path,
                 featurizer: FeaturizerConfig | None) -> SpeechUtterance:
    rate = int(row.get("sample_rate", TARGET_SAMPLE_RATE))
    proxy = row.get("speech_proxy")
    if "features" in row:
        feats = np.asarray(row["features"], dtype=np.float32)
        if feats.ndim != 2:
            raise ManifestError(line, "inline features must be a nested array")
        return SpeechUtterance(feats, rate, float(row.get("duration", 0.0)), proxy)
    if "features_file" in row:
        feats = read_feature_bin(base / row["features_file"])
        return SpeechUtterance(feats, rate, float(row.get("duration", 0.0)), proxy)
    if "audio" in row:
        if featurizer is None:
            raise ManifestError(line, "audio present but no featurizer configured")
        return featurize(np.asarray(row["audio"], dtype=np.float64), featurizer,
                         sample_rate=rate)
    text = proxy if proxy is not None else row.get("src_text")
    if text is not None:
        if featurizer is None:
            raise ManifestError(line, "text proxy present but no featurizer configured")
        return featurize(text, featurizer)
    raise ManifestError(line, "no speech source (features/features_file/audio/speech_proxy)")


def _row_kind(row: dict) -> str:
    has_speech = any(k in row for k in ("features", "features_file", "audio",
                                        "speech_proxy"))
    has_src = "src_text" in row
    has_tgt = "tgt_text" in row
    if has_speech and has_src and has_tgt:
        return "st3"
    if has_speech and has_tgt:
        return "st2"
    if has_speech and has_src:
        return "asr"
    if has_src and has_tgt:
        return "mt"
    raise ValueError("cannot infer sample kind from fields")


def load_manifest(path, kind: str | None = None,
                  featurizer: FeaturizerConfig | None = None) -> list:
    """Read a line-delimited JSON manifest into sample records.

    ``kind`` (st2/st3/asr/mt) enforces one schema for every line; with None
    each line's kind is inferred from its fields. Schema violations raise
    ManifestError with the offending line number.
    """
    if kind is not None and kind not in _KINDS:
        raise ValueError(f"unknown manifest kind: {kind!r}")
    path = Path(path)
    samples = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ManifestError(line_no, f"bad JSON: {e.msg}") from e
            if not isinstance(row, dict):
                raise ManifestError(line_no, "record must be a JSON object")
            try:
                row_kind = kind or _row_kind(row)
            except ValueError as e:
                raise ManifestError(line_no, str(e)) from e
            sample_id = str(row.get("id", f"u{line_no - 1:06d}"))
            if row_kind == "mt":
                samples.append(MtSample(
                    _require(row, "src_text", line_no),
                    _require(row, "tgt_text", line_no),
                    LanguageCode(_require(row, "src_lang", line_no)),
                    LanguageCode(_require(row, "tgt_lang", line_no)),
                    id=sample_id))
                continue
            if row_kind == "st3":
                src = _require(row, "src_text", line_no)
                tgt = _require(row, "tgt_text", line_no)
                speech = _load_speech(row, line_no, path.parent, featurizer)
                samples.append(ThreeWaySample(
                    speech, src, tgt,
                    LanguageCode(_require(row, "src_lang", line_no)),
                    LanguageCode(_require(row, "tgt_lang", line_no)),
                    id=sample_id))
            elif row_kind == "st2":
                tgt = _require(row, "tgt_text", line_no)
                speech = _load_speech(row, line_no, path.parent, featurizer)
                samples.append(TwoWaySample(
                    speech, tgt,
                    LanguageCode(_require(row, "src_lang", line_no)),
                    LanguageCode(_require(row, "tgt_lang", line_no)),
                    id=sample_id))
            else:
                src = _require(row, "src_text", line_no)
                speech = _load_speech(row, line_no, path.parent, featurizer)
                samples.append(AsrSample(
                    speech, src, LanguageCode(_require(row, "src_lang", line_no)),
                    id=sample_id))
    return samples


# --- synthetic tasks --------------------------------------------------------

SYNTH_ALPHABET = ("a", "b", "c", "d", "e", "f")


def synthetic_copy_task(n: int, seed: int = 0,
                        alphabet: Sequence[str] = SYNTH_ALPHABET,
                        min_len: int = 3, max_len: int = 8,
                        featurizer: FeaturizerConfig | None = None,
                        src_tag: str = "xx", tgt_tag: str = "yy") -> list[ThreeWaySample]:
    """Copy-plus-substitution toy task.

    Source sentences are space-separated symbols; the target applies a fixed
    substitution cipher (a cyclic shift of the alphabet). Speech features come
    from the hash featurizer over the source string, so the three views stay
    mutually consistent.
    """
    rng = np.random.default_rng(seed)
    featurizer = featurizer or FeaturizerConfig()
    cipher = {sym: alphabet[(i + 1) % len(alphabet)] for i, sym in enumerate(alphabet)}
    src_lang, tgt_lang = LanguageCode(src_tag), LanguageCode(tgt_tag)
    out: list[ThreeWaySample] = []
    seen: set[str] = set()
    while len(out) < n:
        k = int(rng.integers(min_len, max_len + 1))
        syms = [alphabet[int(rng.integers(len(alphabet)))] for _ in range(k)]
        src = " ".join(syms)
        if src in seen:
            continue
        seen.add(src)
        tgt = " ".join(cipher[s] for s in syms)
        out.append(ThreeWaySample(featurize(src, featurizer), src, tgt,
                                  src_lang, tgt_lang, id=f"syn{len(out):04d}"))
    return out
