"""Desk-scale speech/text transformer with a shared text decoder.

Three stacks: a speech encoder (with a small adapter block on its output), a
text encoder, and a text decoder that serves both paths. Embeddings are shared
between the text-encoder input and decoder input; the output projection
(lm_head) is either a third view of the same storage or a separate copy,
controlled by ``tie_embeddings``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .textproc import Vocabulary

MASK_BIAS = -1e30

GROUP_NAMES = ("speech_encoder", "text_encoder", "text_decoder", "embeddings")


@dataclass(frozen=True)
class DropoutPlan:
    """Dropout probabilities at the four sites that differ between the two
    reference trainings of this recipe.
    """

    decoder_ffn_p: float = 0.0
    adapter_self_attn_p: float = 0.0
    adapter_ffn_intermediate_p: float = 0.0
    decoder_embed_p: float = 0.0

    def __post_init__(self):
        for name, p in self.as_dict().items():
            if not 0.0 <= p < 1.0:
                raise ValueError(f"dropout {name} must be in [0, 1): {p}")

    def as_dict(self) -> dict[str, float]:
        return {
            "decoder_ffn": self.decoder_ffn_p,
            "adapter_self_attn": self.adapter_self_attn_p,
            "adapter_ffn_intermediate": self.adapter_ffn_intermediate_p,
            "decoder_embed": self.decoder_embed_p,
        }

    @classmethod
    def variant_a(cls) -> "DropoutPlan":
        return cls(decoder_ffn_p=0.1, adapter_self_attn_p=0.1,
                   adapter_ffn_intermediate_p=0.0, decoder_embed_p=0.1)

    @classmethod
    def variant_b(cls) -> "DropoutPlan":
        return cls(decoder_ffn_p=0.0, adapter_self_attn_p=0.0,
                   adapter_ffn_intermediate_p=0.1, decoder_embed_p=0.0)


DROPOUT_PLANS = {"variant_A": DropoutPlan.variant_a, "variant_B": DropoutPlan.variant_b,
                 "none": DropoutPlan}


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    feat_dim: int = 8
    model_dim: int = 64
    speech_layers: int = 2
    text_layers: int = 2
    decoder_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 128
    dropout: DropoutPlan = field(default_factory=DropoutPlan)
    tie_embeddings: bool = True

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must cover pad/bos-eos/unk plus a language")
        if self.model_dim % self.n_heads != 0:
            raise ValueError("model_dim must be divisible by n_heads")
        for name in ("feat_dim", "model_dim", "speech_layers", "text_layers",
                     "decoder_layers", "n_heads", "ffn_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["dropout"] = DropoutPlan(**d["dropout"])
        return cls(**d)


def desk_config(vocab_size: int, feat_dim: int = 8, **overrides) -> ModelConfig:
    """The default desk-scale topology: dim 64, 2 layers per stack, 4 heads."""
    base = dict(vocab_size=vocab_size, feat_dim=feat_dim, model_dim=64,
                speech_layers=2, text_layers=2, decoder_layers=2,
                n_heads=4, ffn_dim=128)
    base.update(overrides)
    return ModelConfig(**base)


_POS_CACHE: dict[tuple[int, int], np.ndarray] = {}


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    key = (length, dim)
    if key not in _POS_CACHE:
        pos = np.arange(length, dtype=np.float64)[:, None]
        idx = np.arange(0, dim, 2, dtype=np.float64)[None, :]
        angle = pos / np.power(10000.0, idx / dim)
        pe = np.zeros((length, dim))
        pe[:, 0::2] = np.sin(angle)
        pe[:, 1::2] = np.cos(angle)[:, : dim // 2]
        _POS_CACHE[key] = pe
    return _POS_CACHE[key]


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    def __init__(self, rng, d_in: int, d_out: int):
        self.w = Tensor(_xavier(rng, d_in, d_out), requires_grad=True)
        self.b = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.w", self.w
        yield f"{prefix}.b", self.b


class LayerNorm:
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered * ((var + self.eps) ** -0.5) * self.gain + self.bias

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


class MultiHeadAttention:
    def __init__(self, rng, dim: int, n_heads: int):
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.wq = Linear(rng, dim, dim)
        self.wk = Linear(rng, dim, dim)
        self.wv = Linear(rng, dim, dim)
        self.wo = Linear(rng, dim, dim)

    def __call__(self, q_in: Tensor, kv_in: Tensor, bias: np.ndarray | None) -> Tensor:
        b, t_q, dim = q_in.shape
        t_k = kv_in.shape[1]

        def split(x: Tensor, t: int) -> Tensor:
            return x.reshape(b, t, self.n_heads, self.head_dim).swapaxes(1, 2)

        q = split(self.wq(q_in), t_q)
        k = split(self.wk(kv_in), t_k)
        v = split(self.wv(kv_in), t_k)
        scores = (q @ k.swapaxes(-1, -2)) * (self.head_dim ** -0.5)
        if bias is not None:
            scores = scores + Tensor(bias)
        weights = ad.softmax(scores, axis=-1)
        ctx = (weights @ v).swapaxes(1, 2).reshape(b, t_q, dim)
        return self.wo(ctx)

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for sub, mod in (("wq", self.wq), ("wk", self.wk),
                         ("wv", self.wv), ("wo", self.wo)):
            yield from mod.named(f"{prefix}.{sub}")


class FeedForward:
    def __init__(self, rng, dim: int, hidden: int):
        self.lin1 = Linear(rng, dim, hidden)
        self.lin2 = Linear(rng, hidden, dim)

    def __call__(self, x: Tensor, drop=None, p_intermediate: float = 0.0) -> Tensor:
        h = ad.relu(self.lin1(x))
        if drop is not None:
            h = drop(h, p_intermediate)
        return self.lin2(h)

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.lin1.named(f"{prefix}.lin1")
        yield from self.lin2.named(f"{prefix}.lin2")


class EncoderLayer:
    def __init__(self, rng, dim: int, n_heads: int, ffn_dim: int):
        self.ln_attn = LayerNorm(dim)
        self.attn = MultiHeadAttention(rng, dim, n_heads)
        self.ln_ffn = LayerNorm(dim)
        self.ffn = FeedForward(rng, dim, ffn_dim)

    def __call__(self, x: Tensor, bias: np.ndarray | None) -> Tensor:
        h = self.ln_attn(x)
        x = x + self.attn(h, h, bias)
        return x + self.ffn(self.ln_ffn(x))

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.ln_attn.named(f"{prefix}.ln_attn")
        yield from self.attn.named(f"{prefix}.attn")
        yield from self.ln_ffn.named(f"{prefix}.ln_ffn")
        yield from self.ffn.named(f"{prefix}.ffn")


class DecoderLayer:
    def __init__(self, rng, dim: int, n_heads: int, ffn_dim: int):
        self.ln_self = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(rng, dim, n_heads)
        self.ln_cross = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(rng, dim, n_heads)
        self.ln_ffn = LayerNorm(dim)
        self.ffn = FeedForward(rng, dim, ffn_dim)

    def __call__(self, x: Tensor, self_bias, memory: Tensor, memory_bias,
                 drop, ffn_p: float) -> Tensor:
        h = self.ln_self(x)
        x = x + self.self_attn(h, h, self_bias)
        x = x + self.cross_attn(self.ln_cross(x), memory, memory_bias)
        return x + drop(self.ffn(self.ln_ffn(x)), ffn_p)

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.ln_self.named(f"{prefix}.ln_self")
        yield from self.self_attn.named(f"{prefix}.self_attn")
        yield from self.ln_cross.named(f"{prefix}.ln_cross")
        yield from self.cross_attn.named(f"{prefix}.cross_attn")
        yield from self.ln_ffn.named(f"{prefix}.ln_ffn")
        yield from self.ffn.named(f"{prefix}.ffn")


class Adapter:
    """Bridge between the speech encoder and the shared decoder: a projection,
    one self-attention block, and one feed-forward block.
    """

    def __init__(self, rng, dim: int, n_heads: int, ffn_dim: int):
        self.proj = Linear(rng, dim, dim)
        self.ln_attn = LayerNorm(dim)
        self.attn = MultiHeadAttention(rng, dim, n_heads)
        self.ln_ffn = LayerNorm(dim)
        self.ffn = FeedForward(rng, dim, ffn_dim)

    def __call__(self, x: Tensor, bias, drop, attn_p: float, ffn_int_p: float) -> Tensor:
        x = self.proj(x)
        h = self.ln_attn(x)
        x = x + drop(self.attn(h, h, bias), attn_p)
        return x + self.ffn(self.ln_ffn(x), drop=drop, p_intermediate=ffn_int_p)

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield from self.proj.named(f"{prefix}.proj")
        yield from self.ln_attn.named(f"{prefix}.ln_attn")
        yield from self.attn.named(f"{prefix}.attn")
        yield from self.ln_ffn.named(f"{prefix}.ln_ffn")
        yield from self.ffn.named(f"{prefix}.ffn")


def key_padding_bias(lens: np.ndarray, t_k: int) -> np.ndarray:
    """(B, 1, 1, t_k) additive bias hiding positions >= each sample's length."""
    lens = np.asarray(lens)
    mask = np.arange(t_k)[None, :] >= lens[:, None]
    return np.where(mask, MASK_BIAS, 0.0)[:, None, None, :]


def causal_bias(lens: np.ndarray, t: int) -> np.ndarray:
    """Causal mask combined with key padding, shape (B, 1, t, t)."""
    causal = np.where(np.triu(np.ones((t, t), dtype=bool), k=1), MASK_BIAS, 0.0)
    return causal[None, None, :, :] + key_padding_bias(lens, t)


class Model:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, seed: int = 0):
        if len(vocab) > config.vocab_size:
            raise ValueError(
                f"vocab has {len(vocab)} entries, config allows {config.vocab_size}")
        self.config = config
        self.vocab = vocab
        self.seed = seed
        init_ss, drop_ss = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_ss)
        self._drop_rng = np.random.default_rng(drop_ss)

        d, h, f = config.model_dim, config.n_heads, config.ffn_dim
        self.frontend = Linear(rng, config.feat_dim, d)
        self.speech_layers = [EncoderLayer(rng, d, h, f)
                              for _ in range(config.speech_layers)]
        self.speech_ln = LayerNorm(d)
        self.adapter = Adapter(rng, d, h, f)
        self.text_layers = [EncoderLayer(rng, d, h, f)
                            for _ in range(config.text_layers)]
        self.text_ln = LayerNorm(d)
        self.decoder_layers = [DecoderLayer(rng, d, h, f)
                               for _ in range(config.decoder_layers)]
        self.decoder_ln = LayerNorm(d)

        self.shared_embed = Tensor(
            rng.normal(0.0, d ** -0.5, size=(config.vocab_size, d)),
            requires_grad=True)
        if config.tie_embeddings:
            self.lm_head = self.shared_embed
        else:
            self.lm_head = Tensor(self.shared_embed.data.copy(), requires_grad=True)

        self._params = dict(self._named_params())

    # -- parameters ------------------------------------------------------

    def _named_params(self) -> Iterator[tuple[str, Tensor]]:
        yield from self.frontend.named("speech_encoder.frontend")
        for i, layer in enumerate(self.speech_layers):
            yield from layer.named(f"speech_encoder.layers.{i}")
        yield from self.speech_ln.named("speech_encoder.ln")
        yield from self.adapter.named("speech_encoder.adapter")
        for i, layer in enumerate(self.text_layers):
            yield from layer.named(f"text_encoder.layers.{i}")
        yield from self.text_ln.named("text_encoder.ln")
        for i, layer in enumerate(self.decoder_layers):
            yield from layer.named(f"text_decoder.layers.{i}")
        yield from self.decoder_ln.named("text_decoder.ln")
        yield "embeddings.shared", self.shared_embed
        if not self.config.tie_embeddings:
            yield "embeddings.lm_head", self.lm_head

    @property
    def params(self) -> dict[str, Tensor]:
        return self._params

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def parameter_groups(self) -> "ParameterGroups":
        return ParameterGroups(self)

    def dropout_sites(self) -> dict[str, float]:
        return self.config.dropout.as_dict()

    # -- forward passes ----------------------------------------------------

    def _dropout(self, x: Tensor, p: float, train: bool) -> Tensor:
        if not train or p <= 0.0:
            return x
        keep = (self._drop_rng.random(x.shape) >= p) / (1.0 - p)
        return x * Tensor(keep)

    def encode_speech(self, feats: np.ndarray, lens: np.ndarray,
                      train: bool = False) -> tuple[Tensor, np.ndarray]:
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 3:
            raise ValueError("speech features must be (batch, frames, feat_dim)")
        if feats.shape[2] != self.config.feat_dim:
            raise ValueError(
                f"feat_dim {feats.shape[2]} != configured {self.config.feat_dim}")
        lens = np.asarray(lens)
        if feats.shape[1] < 1 or np.any(lens < 1):
            raise ValueError("each utterance needs at least one frame")
        drop = lambda x, p: self._dropout(x, p, train)
        plan = self.config.dropout
        bias = key_padding_bias(lens, feats.shape[1])
        x = self.frontend(Tensor(feats))
        x = x + Tensor(sinusoidal_positions(feats.shape[1], self.config.model_dim))
        for layer in self.speech_layers:
            x = layer(x, bias)
        x = self.speech_ln(x)
        x = self.adapter(x, bias, drop, plan.adapter_self_attn_p,
                         plan.adapter_ffn_intermediate_p)
        return x, bias

    def encode_text(self, ids: np.ndarray, lens: np.ndarray,
                    train: bool = False) -> tuple[Tensor, np.ndarray]:
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ValueError("text ids must be (batch, positions)")
        lens = np.asarray(lens)
        bias = key_padding_bias(lens, ids.shape[1])
        scale = self.config.model_dim ** 0.5
        x = ad.embedding(self.shared_embed, ids) * scale
        x = x + Tensor(sinusoidal_positions(ids.shape[1], self.config.model_dim))
        for layer in self.text_layers:
            x = layer(x, bias)
        return self.text_ln(x), bias

    def decode(self, memory: Tensor, memory_bias: np.ndarray,
               dec_ids: np.ndarray, train: bool = False) -> Tensor:
        dec_ids = np.asarray(dec_ids)
        if dec_ids.ndim != 2:
            raise ValueError("decoder input must be (batch, positions)")
        drop = lambda x, p: self._dropout(x, p, train)
        plan = self.config.dropout
        dec_lens = (dec_ids != self.vocab.pad_id).sum(axis=1)
        self_bias = causal_bias(dec_lens, dec_ids.shape[1])
        scale = self.config.model_dim ** 0.5
        x = ad.embedding(self.shared_embed, dec_ids) * scale
        x = x + Tensor(sinusoidal_positions(dec_ids.shape[1], self.config.model_dim))
        x = drop(x, plan.decoder_embed_p)
        for layer in self.decoder_layers:
            x = layer(x, self_bias, memory, memory_bias, drop, plan.decoder_ffn_p)
        x = self.decoder_ln(x)
        return x @ self.lm_head.swapaxes(0, 1)

    def forward_speech(self, feats: np.ndarray, lens: np.ndarray,
                       dec_ids: np.ndarray, train: bool = False) -> Tensor:
        memory, bias = self.encode_speech(feats, lens, train=train)
        return self.decode(memory, bias, dec_ids, train=train)

    def forward_text(self, ids: np.ndarray, lens: np.ndarray,
                     dec_ids: np.ndarray, train: bool = False) -> Tensor:
        memory, bias = self.encode_text(ids, lens, train=train)
        return self.decode(memory, bias, dec_ids, train=train)


def build_model(config: ModelConfig, vocab: Vocabulary, seed: int = 0) -> Model:
    return Model(config, vocab, seed=seed)


class ParameterGroups:
    """Named partition of a model's parameters.

    ``speech_encoder`` (adapter included), ``text_encoder`` and ``text_decoder``
    partition everything except the embedding storages, which live in the
    fourth group ``embeddings``. The three embedding views (text-encoder input,
    decoder input, lm head) alias one tensor when tied.
    """

    def __init__(self, model: Model):
        self._model = model
        self._groups: dict[str, dict[str, Tensor]] = {g: {} for g in GROUP_NAMES}
        for name, tensor in model.params.items():
            group = name.split(".", 1)[0]
            self._groups[group][name] = tensor

    def names(self, group: str) -> list[str]:
        return list(self._check(group))

    def tensors(self, group: str) -> dict[str, Tensor]:
        return dict(self._check(group))

    def _check(self, group: str) -> dict[str, Tensor]:
        if group not in self._groups:
            raise KeyError(f"unknown group {group!r}; expected one of {GROUP_NAMES}")
        return self._groups[group]

    @property
    def embedding_views(self) -> dict[str, Tensor]:
        return {
            "text_encoder_embed": self._model.shared_embed,
            "decoder_input_embed": self._model.shared_embed,
            "lm_head": self._model.lm_head,
        }

    def snapshot(self, group: str) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._check(group).items()}

    def checksum(self, group: str) -> str:
        import hashlib

        digest = hashlib.sha256()
        for name in sorted(self._check(group)):
            digest.update(name.encode())
            digest.update(self._groups[group][name].data.tobytes())
        return digest.hexdigest()


def count_trainable(model: Model) -> int:
    seen: set[int] = set()
    total = 0
    for tensor in model.params.values():
        if tensor.requires_grad and id(tensor) not in seen:
            seen.add(id(tensor))
            total += tensor.size
    return total


def freeze(model: Model, components: Iterable[str]) -> Model:
    """Mark whole parameter groups as non-trainable."""
    groups = model.parameter_groups()
    for comp in components:
        for tensor in groups.tensors(comp).values():
            tensor.requires_grad = False
    return model


def unfreeze_all(model: Model) -> Model:
    for tensor in model.params.values():
        tensor.requires_grad = True
    return model


def init_from(model: Model, *, speech_encoder: dict | None = None,
              text_encoder: dict | None = None, text_decoder: dict | None = None,
              embeddings: dict | None = None) -> Model:
    """Copy named component snapshots into the model.

    Each snapshot must carry exactly the group's tensors with matching shapes;
    unnamed components are left untouched.
    """
    groups = model.parameter_groups()
    sources = {"speech_encoder": speech_encoder, "text_encoder": text_encoder,
               "text_decoder": text_decoder, "embeddings": embeddings}
    for group, snap in sources.items():
        if snap is None:
            continue
        tensors = groups.tensors(group)
        missing = sorted(set(tensors) - set(snap))
        extra = sorted(set(snap) - set(tensors))
        if missing or extra:
            raise ValueError(
                f"snapshot for {group} does not line up: missing={missing} extra={extra}")
        for name, tensor in tensors.items():
            value = np.asarray(snap[name], dtype=np.float64)
            if value.shape != tensor.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {value.shape} vs {tensor.data.shape}")
            tensor.data = value.copy()
    return model


# -- target framing -----------------------------------------------------------


@dataclass
class TargetSequence:
    """Decoder-side framing of one target sentence.

    The full sequence is [</s>, <lang>, t_1..t_n, </s>]; the decoder input
    drops the last element and the labels drop the first. ``loss_mask`` is 1.0
    on label positions that count toward the loss (the language code at
    position 0 is masked out unless ``include_lang_loss``).
    """

    full: np.ndarray
    decoder_input: np.ndarray
    labels: np.ndarray
    loss_mask: np.ndarray


def build_target(token_ids: Sequence[int], lang_id: int, bos_eos_id: int,
                 include_lang_loss: bool = False) -> TargetSequence:
    full = np.array([bos_eos_id, lang_id, *token_ids, bos_eos_id], dtype=np.int64)
    mask = np.ones(len(full) - 1, dtype=np.float64)
    if not include_lang_loss:
        mask[0] = 0.0
    return TargetSequence(full, full[:-1].copy(), full[1:].copy(), mask)


def build_target_batch(token_seqs: Sequence[Sequence[int]], lang_ids: Sequence[int],
                       pad_id: int, bos_eos_id: int,
                       include_lang_loss: bool = False
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad per-sample TargetSequences into (decoder_input, labels, loss_mask)."""
    seqs = [build_target(ids, lang, bos_eos_id, include_lang_loss)
            for ids, lang in zip(token_seqs, lang_ids)]
    width = max(len(s.decoder_input) for s in seqs)
    b = len(seqs)
    dec = np.full((b, width), pad_id, dtype=np.int64)
    labels = np.full((b, width), pad_id, dtype=np.int64)
    mask = np.zeros((b, width), dtype=np.float64)
    for i, s in enumerate(seqs):
        n = len(s.decoder_input)
        dec[i, :n] = s.decoder_input
        labels[i, :n] = s.labels
        mask[i, :n] = s.loss_mask
    return dec, labels, mask


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(model: Model, path, tag: str | None = None) -> Path:
    """Checkpoint directory: config.json plus one .npy file per named tensor."""
    path = Path(path)
    params_dir = path / "params"
    params_dir.mkdir(parents=True, exist_ok=True)
    record = {"model": model.config.to_dict(), "vocab": model.vocab.to_dict(),
              "seed": model.seed, "tag": tag}
    (path / "config.json").write_text(json.dumps(record, indent=2), encoding="utf-8")
    for name, tensor in model.params.items():
        np.save(params_dir / f"{name}.npy", tensor.data)
    return path


def load_checkpoint(path) -> tuple[Model, str | None]:
    path = Path(path)
    record = json.loads((path / "config.json").read_text(encoding="utf-8"))
    config = ModelConfig.from_dict(record["model"])
    vocab = Vocabulary.from_dict(record["vocab"])
    model = Model(config, vocab, seed=record.get("seed", 0))
    for name, tensor in model.params.items():
        tensor.data = np.load(path / "params" / f"{name}.npy")
    return model, record.get("tag")


def params_snapshot(model: Model) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in model.params.items()}


def load_group_snapshot(path, group: str) -> dict[str, np.ndarray]:
    """Read just one parameter group out of a checkpoint directory."""
    path = Path(path)
    out = {}
    for f in sorted((path / "params").glob(f"{group}.*.npy")):
        out[f.name[: -len(".npy")]] = np.load(f)
    if not out:
        raise ValueError(f"checkpoint {path} has no tensors for group {group!r}")
    return out
