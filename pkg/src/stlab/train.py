"""Optimization and the recipe registry.

Covers the inverse-square-root schedule with a one-epoch warmup, a decoupled
weight-decay Adam, per-task training loops, the frozen-teacher multi-task loop,
and the named strategies that tie them together.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import losses as L
from .autodiff import Tensor
from .corpus import derive_asr, derive_mt, derive_twoway
from .model import (Model, ModelConfig, build_model, freeze, init_from,
                    params_snapshot)
from .textproc import Vocabulary

STRATEGY_NAMES = ("ASR_FT", "MT_FT", "E2E", "E2E_ASRinit", "E2E_ASRinit_MTinit",
                  "MLT", "MLT_ASRinit", "CASCADE")

# Reporting labels for the strategy names, matching the system tables.
TABLE_LABELS = {
    "ASR_FT": "Seamless-FT-ASR",
    "MT_FT": "Seamless-FT-MT",
    "E2E": "HF-E2E",
    "E2E_ASRinit": "HF-E2E-ASR_init",
    "E2E_ASRinit_MTinit": "HF-E2E-ASR_init-MT_init",
    "MLT": "HF-MLT",
    "MLT_ASRinit": "HF-MLT-ASR_init",
    "CASCADE": "HF-Cascaded",
}

# Which parameter groups each recipe is allowed to move. The embeddings group
# updates everywhere because the decoder input and output projections live
# there; the text encoder only moves under MT fine-tuning.
DOCUMENTED_TRAINABLE = {
    "ASR_FT": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
    "MT_FT": frozenset({"text_encoder", "text_decoder", "embeddings"}),
    "E2E": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
    "E2E_ASRinit": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
    "E2E_ASRinit_MTinit": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
    "MLT": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
    "MLT_ASRinit": frozenset({"speech_encoder", "text_decoder", "embeddings"}),
}

# Published per-language deviations from the shared hyperparameters.
LANGUAGE_OVERRIDES = {
    ("que", "st"): {"peak_lr": 1e-5, "max_epochs": 200},
    ("que", "asr"): {"batch_size_speech": 72},
    ("est", "asr"): {"batch_size_speech": 72},
}


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 1e-4
    warmup_steps: int | None = None
    max_epochs: int = 10
    max_steps: int | None = None
    batch_size_speech: int = 120
    batch_size_text: int = 256
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-8
    weight_decay: float = 0.0
    label_smoothing: float = 0.2
    include_lang_loss: bool = False
    grad_clip: float | None = 1.0
    seed: int = 0
    # Strategies that start from a pretrained component train slower.
    init_lr: float = 6e-5

    def __post_init__(self):
        if self.peak_lr <= 0 or self.init_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size_speech < 1 or self.batch_size_text < 1:
            raise ValueError("batch sizes must be >= 1")


def apply_language_overrides(cfg: TrainConfig, lang_tag: str, task_kind: str) -> TrainConfig:
    """Swap in per-language hyperparameters when (language, task) matches."""
    overrides = LANGUAGE_OVERRIDES.get((lang_tag, task_kind))
    if not overrides:
        return cfg
    return dataclasses.replace(cfg, **overrides)


def lr_schedule(step: int, warmup_steps: int, peak_lr: float) -> float:
    """Linear warmup to ``peak_lr`` over ``warmup_steps``, then decay with the
    inverse square root of the step count.
    """
    if step < 1:
        raise ValueError("steps are 1-based")
    if warmup_steps < 1:
        raise ValueError("warmup_steps must be >= 1")
    if step <= warmup_steps:
        return peak_lr * step / warmup_steps
    return peak_lr * math.sqrt(warmup_steps / step)


class AdamW:
    """Adam with decoupled weight decay and bias correction.

    Frozen tensors are excluded at construction, so the optimizer state never
    has entries for them.
    """

    def __init__(self, named_params: dict[str, Tensor], betas=(0.9, 0.98),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = {name: p for name, p in named_params.items() if p.requires_grad}
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p.data = p.data - lr * (m_hat / (np.sqrt(v_hat) + self.eps)
                                    + self.weight_decay * p.data)


def clip_gradients(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``."""
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float((g * g).sum())
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


@dataclass
class TrainResult:
    model: Model
    log: list[dict]
    steps: int
    best_epoch: int | None = None
    dev_losses: list[float] = field(default_factory=list)


_TASK_KIND = {"E2E": "st", "ASR": "asr", "MT": "mt"}


def _task_loss(model: Model, task: str, batch, cfg: TrainConfig, train: bool):
    kwargs = dict(label_smoothing=cfg.label_smoothing,
                  include_lang_loss=cfg.include_lang_loss, train=train)
    if task == "E2E":
        return L.loss_e2e(model, batch, **kwargs)
    if task == "ASR":
        return L.loss_asr(model, batch, **kwargs)
    if task == "MT":
        return L.loss_mt(model, batch, **kwargs)
    raise ValueError(f"unknown task {task!r}")


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start: start + batch_size]


def _dataset_loss(model: Model, dataset, task: str, cfg: TrainConfig,
                  batch_size: int) -> float:
    """Mean per-sample loss over a dataset in eval mode."""
    total, count = 0.0, 0
    for start in range(0, len(dataset), batch_size):
        batch = dataset[start: start + batch_size]
        loss, _ = _task_loss(model, task, batch, cfg, train=False)
        total += loss.item() * len(batch)
        count += len(batch)
    return total / max(count, 1)


def default_warmup(n_samples: int, batch_size: int) -> int:
    """The first epoch is the warmup."""
    return max(1, math.ceil(n_samples / batch_size))


def train_task(model: Model, dataset: Sequence, task: str, cfg: TrainConfig,
               dev: Sequence | None = None, peak_lr: float | None = None) -> TrainResult:
    """Single-objective fine-tuning (task is E2E, ASR or MT).

    When a dev set is given, the parameters that scored the best dev loss are
    restored at the end; otherwise the final parameters stand.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    batch_size = cfg.batch_size_text if task == "MT" else cfg.batch_size_speech
    warmup = cfg.warmup_steps or default_warmup(len(dataset), batch_size)
    peak = peak_lr if peak_lr is not None else cfg.peak_lr
    opt = AdamW(model.params, betas=cfg.betas, eps=cfg.eps,
                weight_decay=cfg.weight_decay)
    trainable = [p for p in opt.params.values()]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    log: list[dict] = []
    dev_losses: list[float] = []
    best = (math.inf, None, None)  # (dev loss, epoch, snapshot)
    step = 0
    for epoch in range(cfg.max_epochs):
        for idx in _batches(len(dataset), batch_size, rng):
            step += 1
            lr = lr_schedule(step, warmup, peak)
            batch = [dataset[i] for i in idx]
            model.zero_grad()
            loss, n_tokens = _task_loss(model, task, batch, cfg, train=True)
            loss.backward()
            if cfg.grad_clip is not None:
                clip_gradients(trainable, cfg.grad_clip)
            opt.step(lr)
            log.append({"step": step, "lr": lr, "task": task,
                        "loss": loss.item(), "tokens": n_tokens})
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        if dev:
            dev_loss = _dataset_loss(model, dev, task, cfg, batch_size)
            dev_losses.append(dev_loss)
            if dev_loss < best[0]:
                best = (dev_loss, epoch, params_snapshot(model))
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    best_epoch = None
    if best[2] is not None:
        best_epoch = best[1]
        for name, tensor in model.params.items():
            tensor.data = best[2][name].copy()
    return TrainResult(model, log, step, best_epoch, dev_losses)


def train_multitask(model: Model, dataset: Sequence, cfg: TrainConfig,
                    weights: L.LossWeights = L.LossWeights(), *,
                    mt_encoder: dict | None = None, mt_decoder: dict | None = None,
                    asr_encoder: dict | None = None,
                    dev: Sequence | None = None,
                    stop_gradient: bool = True) -> TrainResult:
    """Joint speech/text/distillation training with a frozen text encoder.

    The teacher must come from a finished MT fine-tune, so the MT encoder and
    decoder snapshots are required; the ASR speech-encoder snapshot is
    optional. The text encoder is frozen for the whole run.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    if mt_encoder is None or mt_decoder is None:
        raise ValueError("multi-task training requires MT snapshots "
                         "(mt_encoder and mt_decoder)")
    init_from(model, text_encoder=mt_encoder, text_decoder=mt_decoder,
              speech_encoder=asr_encoder)
    freeze(model, ["text_encoder"])
    batch_size = cfg.batch_size_speech
    warmup = cfg.warmup_steps or default_warmup(len(dataset), batch_size)
    opt = AdamW(model.params, betas=cfg.betas, eps=cfg.eps,
                weight_decay=cfg.weight_decay)
    trainable = [p for p in opt.params.values()]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    log: list[dict] = []
    dev_losses: list[float] = []
    best = (math.inf, None, None)
    step = 0
    for epoch in range(cfg.max_epochs):
        for idx in _batches(len(dataset), batch_size, rng):
            step += 1
            lr = lr_schedule(step, warmup, cfg.peak_lr)
            batch = [dataset[i] for i in idx]
            model.zero_grad()
            report = L.loss_multitask(
                model, batch, weights, label_smoothing=cfg.label_smoothing,
                include_lang_loss=cfg.include_lang_loss, train=True,
                stop_gradient=stop_gradient)
            report.tensor.backward()
            if cfg.grad_clip is not None:
                clip_gradients(trainable, cfg.grad_clip)
            opt.step(lr)
            entry = {"step": step, "lr": lr, "task": "MLT"}
            entry.update(report.to_dict())
            log.append(entry)
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
        if dev:
            total = 0.0
            for start in range(0, len(dev), batch_size):
                chunk = dev[start: start + batch_size]
                rep = L.loss_multitask(
                    model, chunk, weights, label_smoothing=cfg.label_smoothing,
                    include_lang_loss=cfg.include_lang_loss, train=False)
                total += rep.total * len(chunk)
            dev_loss = total / len(dev)
            dev_losses.append(dev_loss)
            if dev_loss < best[0]:
                best = (dev_loss, epoch, params_snapshot(model))
        if cfg.max_steps is not None and step >= cfg.max_steps:
            break
    best_epoch = None
    if best[2] is not None:
        best_epoch = best[1]
        for name, tensor in model.params.items():
            tensor.data = best[2][name].copy()
    return TrainResult(model, log, step, best_epoch, dev_losses)


@dataclass
class StrategyResult:
    """Everything a recipe produced: one model per tag, per-step logs, the
    parameter state each model started training from (for audits), and a
    pipeline descriptor when the recipe composes models.
    """

    name: str
    label: str
    models: dict[str, Model]
    logs: dict[str, list[dict]]
    init_params: dict[str, dict[str, dict[str, np.ndarray]]]
    pipeline: dict | None = None


def _all_group_snaps(model: Model) -> dict[str, dict[str, np.ndarray]]:
    groups = model.parameter_groups()
    return {g: groups.snapshot(g) for g in ("speech_encoder", "text_encoder",
                                            "text_decoder", "embeddings")}


def _group_snaps(snapshot: dict[str, np.ndarray], group: str) -> dict[str, np.ndarray]:
    picked = {k: v for k, v in snapshot.items() if k.startswith(group + ".")}
    if not picked:
        raise ValueError(f"snapshot has no tensors for group {group!r}")
    return picked


def _need(datasets: dict, key: str):
    if datasets.get(key):
        return datasets[key]
    st3 = datasets.get("st3")
    if st3:
        if key == "asr":
            return derive_asr(st3)
        if key == "mt":
            return derive_mt(st3)
        if key == "st2":
            return derive_twoway(st3)
    raise ValueError(f"strategy needs a {key!r} dataset (or st3 to derive it from)")


def _require_snapshot(snapshots: dict | None, tag: str) -> dict[str, np.ndarray]:
    if not snapshots or tag not in snapshots:
        raise ValueError(f"missing prerequisite snapshot {tag!r}")
    return snapshots[tag]


def run_strategy(name: str, datasets: dict, cfg: TrainConfig,
                 model_cfg: ModelConfig, vocab: Vocabulary,
                 snapshots: dict[str, dict[str, np.ndarray]] | None = None,
                 weights: L.LossWeights = L.LossWeights()) -> StrategyResult:
    """Run one named recipe end to end.

    ``datasets`` maps roles (st2/st3/asr/mt plus dev_* variants) to sample
    lists; ``snapshots`` maps "asr"/"mt" to full parameter snapshots from
    earlier runs. Initialization-based recipes fail fast when a prerequisite
    snapshot is missing.
    """
    if name not in STRATEGY_NAMES:
        raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
    label = TABLE_LABELS[name]

    def fresh() -> Model:
        return build_model(model_cfg, vocab, seed=cfg.seed)

    def lang_cfg(ds, kind: str) -> TrainConfig:
        tag = ds[0].src_lang.tag if hasattr(ds[0], "src_lang") else ds[0].lang.tag
        return apply_language_overrides(cfg, tag, kind)

    if name == "ASR_FT":
        ds = _need(datasets, "asr")
        model = fresh()
        init_params = {"asr": _all_group_snaps(model)}
        res = train_task(model, ds, "ASR", lang_cfg(ds, "asr"),
                         dev=datasets.get("dev_asr"))
        return StrategyResult(name, label, {"asr": model}, {"asr": res.log},
                              init_params)

    if name == "MT_FT":
        ds = _need(datasets, "mt")
        model = fresh()
        init_params = {"mt": _all_group_snaps(model)}
        res = train_task(model, ds, "MT", lang_cfg(ds, "mt"),
                         dev=datasets.get("dev_mt"))
        return StrategyResult(name, label, {"mt": model}, {"mt": res.log},
                              init_params)

    if name in ("E2E", "E2E_ASRinit", "E2E_ASRinit_MTinit"):
        ds = _need(datasets, "st2")
        model = fresh()
        # None defers to the (possibly language-overridden) config value;
        # initialization-based recipes pin the documented slower rate instead.
        peak = None
        if name in ("E2E_ASRinit", "E2E_ASRinit_MTinit"):
            asr_snap = _require_snapshot(snapshots, "asr")
            init_from(model, speech_encoder=_group_snaps(asr_snap, "speech_encoder"))
            peak = cfg.init_lr
        if name == "E2E_ASRinit_MTinit":
            mt_snap = _require_snapshot(snapshots, "mt")
            init_from(model, text_decoder=_group_snaps(mt_snap, "text_decoder"))
        init_params = {"st": _all_group_snaps(model)}
        res = train_task(model, ds, "E2E", lang_cfg(ds, "st"),
                         dev=datasets.get("dev_st2"), peak_lr=peak)
        return StrategyResult(name, label, {"st": model}, {"st": res.log},
                              init_params)

    if name in ("MLT", "MLT_ASRinit"):
        ds = _need(datasets, "st3")
        mt_snap = _require_snapshot(snapshots, "mt")
        asr_enc = None
        if name == "MLT_ASRinit":
            asr_enc = _group_snaps(_require_snapshot(snapshots, "asr"),
                                   "speech_encoder")
        # Rebuild the exact post-initialization state for the audit trail;
        # train_multitask applies the same init_from internally.
        probe = build_model(model_cfg, vocab, seed=cfg.seed)
        init_from(probe, text_encoder=_group_snaps(mt_snap, "text_encoder"),
                  text_decoder=_group_snaps(mt_snap, "text_decoder"),
                  speech_encoder=asr_enc)
        init_params = {"st": _all_group_snaps(probe)}
        model = fresh()
        res = train_multitask(
            model, ds, lang_cfg(ds, "st"), weights,
            mt_encoder=_group_snaps(mt_snap, "text_encoder"),
            mt_decoder=_group_snaps(mt_snap, "text_decoder"),
            asr_encoder=asr_enc, dev=datasets.get("dev_st3"))
        return StrategyResult(name, label, {"st": model}, {"st": res.log},
                              init_params)

    # CASCADE: train both components, then describe the pipeline.
    asr_ds = _need(datasets, "asr")
    mt_ds = _need(datasets, "mt")
    asr_model = fresh()
    init_params = {"asr": _all_group_snaps(asr_model)}
    asr_res = train_task(asr_model, asr_ds, "ASR", lang_cfg(asr_ds, "asr"),
                         dev=datasets.get("dev_asr"))
    mt_model = fresh()
    init_params["mt"] = _all_group_snaps(mt_model)
    mt_res = train_task(mt_model, mt_ds, "MT", lang_cfg(mt_ds, "mt"),
                        dev=datasets.get("dev_mt"))
    pipeline = {"kind": "cascade", "asr": "asr", "mt": "mt",
                "src_lang": mt_ds[0].src_lang.tag, "tgt_lang": mt_ds[0].tgt_lang.tag}
    return StrategyResult(name, label, {"asr": asr_model, "mt": mt_model},
                          {"asr": asr_res.log, "mt": mt_res.log},
                          init_params, pipeline=pipeline)
