"""Experiment runner: prepare, train, decode, score, ablate.

Configs are flat ``key = value`` text files with dotted keys (one assignment
per line, ``#`` comments). Every run directory gets a fully resolved config
snapshot, so a run is reproducible from the snapshot alone.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or malformed
inputs), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import shutil
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (FeaturizerConfig, ManifestError, derive_asr, derive_mt,
                     derive_twoway, load_manifest, save_manifest)
from .infer import CascadePipeline, decode_batch
from .losses import LossWeights
from .metrics import score_corpus
from .model import (DROPOUT_PLANS, ModelConfig, load_checkpoint,
                    params_snapshot, save_checkpoint)
from .textproc import CleaningRules, LanguageCode, Vocabulary, clean_bitext
from .train import STRATEGY_NAMES, TrainConfig, run_strategy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

RUN_ROOT_ENV = "STLAB_RUN_ROOT"

# Default toggle profile; the alternate profile flips all three.
OFFICIAL_TOGGLES = {"include_lang_loss": False, "tie_lm_head": False,
                    "dropout_plan": "variant_A"}
ALTERNATE_TOGGLES = {"include_lang_loss": True, "tie_lm_head": True,
                     "dropout_plan": "variant_B"}

ABLATION_ROWS = ("base", "+lm_head", "+dropout", "+lang", "+lm_head+dropout",
                 "+lm_head+lang", "+dropout+lang", "+lm_head+dropout+lang")

_DATA_ROLES = ("st3", "st2", "asr", "mt", "eval",
               "dev_st3", "dev_st2", "dev_asr", "dev_mt")
_TRAIN_KEYS = ("peak_lr", "warmup_steps", "max_epochs", "max_steps",
               "batch_size_speech", "batch_size_text", "beta1", "beta2",
               "eps", "weight_decay", "label_smoothing", "grad_clip", "init_lr")
_MODEL_KEYS = ("feat_dim", "model_dim", "speech_layers", "text_layers",
               "decoder_layers", "n_heads", "ffn_dim")


class UsageError(Exception):
    """Bad flag combinations and other caller mistakes."""


class DataError(Exception):
    """Unreadable or malformed input artifacts."""


# -- config files --------------------------------------------------------------


@dataclass
class ExperimentConfig:
    strategy: str = "E2E"
    seed: int = 0
    src_lang: str = "xx"
    tgt_lang: str = "yy"
    vocab_unit: str = "word"
    beam: int = 5
    length_penalty: float = 1.0
    frames_per_symbol: int = 2
    featurizer_seed: int = 0
    data: dict = field(default_factory=dict)
    toggles: dict = field(default_factory=lambda: dict(OFFICIAL_TOGGLES))
    train: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    weights: tuple = (1.0, 1.0, 2.0)

    def validate(self) -> None:
        if self.strategy not in STRATEGY_NAMES:
            raise DataError(f"unknown strategy {self.strategy!r}; "
                            f"expected one of {', '.join(STRATEGY_NAMES)}")
        if self.toggles["dropout_plan"] not in DROPOUT_PLANS:
            raise DataError(f"unknown dropout plan {self.toggles['dropout_plan']!r}")
        if self.vocab_unit not in ("word", "char"):
            raise DataError(f"unknown vocab unit {self.vocab_unit!r}")
        if self.beam < 1:
            raise DataError("decode.beam must be >= 1")


def _parse_scalar(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if low == "none":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse the flat dotted-key format into an ExperimentConfig.

    Relative data paths resolve against ``base_dir`` (the config file's
    directory when loaded from disk).
    """
    cfg = ExperimentConfig()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        parsed = _parse_scalar(value)
        if key == "strategy":
            cfg.strategy = str(parsed)
        elif key == "seed":
            cfg.seed = int(parsed)
        elif key == "pair.src":
            cfg.src_lang = str(parsed)
        elif key == "pair.tgt":
            cfg.tgt_lang = str(parsed)
        elif key == "vocab.unit":
            cfg.vocab_unit = str(parsed)
        elif key == "decode.beam":
            cfg.beam = int(parsed)
        elif key == "decode.length_penalty":
            cfg.length_penalty = float(parsed)
        elif key == "featurizer.frames_per_symbol":
            cfg.frames_per_symbol = int(parsed)
        elif key == "featurizer.seed":
            cfg.featurizer_seed = int(parsed)
        elif key.startswith("data."):
            role = key[len("data."):]
            if role not in _DATA_ROLES:
                raise DataError(f"config line {line_no}: unknown data role {role!r}")
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            cfg.data[role] = str(path)
        elif key.startswith("toggles."):
            name = key[len("toggles."):]
            if name not in OFFICIAL_TOGGLES:
                raise DataError(f"config line {line_no}: unknown toggle {name!r}")
            cfg.toggles[name] = parsed
        elif key.startswith("train."):
            name = key[len("train."):]
            if name not in _TRAIN_KEYS:
                raise DataError(f"config line {line_no}: unknown train key {name!r}")
            cfg.train[name] = parsed
        elif key.startswith("model."):
            name = key[len("model."):]
            if name not in _MODEL_KEYS:
                raise DataError(f"config line {line_no}: unknown model key {name!r}")
            cfg.model[name] = parsed
        elif key.startswith("weights."):
            name = key[len("weights."):]
            order = {"e2e": 0, "mt": 1, "kd": 2}
            if name not in order:
                raise DataError(f"config line {line_no}: unknown weight {name!r}")
            w = list(cfg.weights)
            w[order[name]] = float(parsed)
            cfg.weights = tuple(w)
        else:
            raise DataError(f"config line {line_no}: unknown key {key!r}")
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}") from e
    try:
        return parse_config(text, base_dir=path.parent)
    except DataError as e:
        raise DataError(f"{path}: {e}") from e


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize the fully resolved config (defaults included) back to the
    flat format, so a snapshot alone reproduces the run.
    """
    tcfg = make_train_config(cfg)
    lines = [
        f"strategy = {cfg.strategy}",
        f"seed = {cfg.seed}",
        f"pair.src = {cfg.src_lang}",
        f"pair.tgt = {cfg.tgt_lang}",
        f"vocab.unit = {cfg.vocab_unit}",
        f"decode.beam = {cfg.beam}",
        f"decode.length_penalty = {_fmt(cfg.length_penalty)}",
        f"featurizer.frames_per_symbol = {cfg.frames_per_symbol}",
        f"featurizer.seed = {cfg.featurizer_seed}",
    ]
    for name in ("include_lang_loss", "tie_lm_head", "dropout_plan"):
        lines.append(f"toggles.{name} = {_fmt(cfg.toggles[name])}")
    for name, w in zip(("e2e", "mt", "kd"), cfg.weights):
        lines.append(f"weights.{name} = {_fmt(w)}")
    for role in sorted(cfg.data):
        lines.append(f"data.{role} = {Path(cfg.data[role]).resolve()}")
    train_values = {
        "peak_lr": tcfg.peak_lr, "warmup_steps": tcfg.warmup_steps,
        "max_epochs": tcfg.max_epochs, "max_steps": tcfg.max_steps,
        "batch_size_speech": tcfg.batch_size_speech,
        "batch_size_text": tcfg.batch_size_text,
        "beta1": tcfg.betas[0], "beta2": tcfg.betas[1], "eps": tcfg.eps,
        "weight_decay": tcfg.weight_decay,
        "label_smoothing": tcfg.label_smoothing, "grad_clip": tcfg.grad_clip,
        "init_lr": tcfg.init_lr,
    }
    for name in _TRAIN_KEYS:
        lines.append(f"train.{name} = {_fmt(train_values[name])}")
    model_values = {**{k: getattr(ModelConfig(vocab_size=4), k) for k in _MODEL_KEYS},
                    **cfg.model}
    for name in _MODEL_KEYS:
        lines.append(f"model.{name} = {_fmt(model_values[name])}")
    return "\n".join(lines) + "\n"


def make_train_config(cfg: ExperimentConfig) -> TrainConfig:
    kw = dict(cfg.train)
    beta1 = kw.pop("beta1", 0.9)
    beta2 = kw.pop("beta2", 0.98)
    try:
        return TrainConfig(betas=(beta1, beta2), seed=cfg.seed,
                           include_lang_loss=bool(cfg.toggles["include_lang_loss"]),
                           **kw)
    except (TypeError, ValueError) as e:
        raise DataError(f"bad train settings: {e}") from e


def make_model_config(cfg: ExperimentConfig, vocab_size: int) -> ModelConfig:
    plan = DROPOUT_PLANS[cfg.toggles["dropout_plan"]]()
    try:
        return ModelConfig(vocab_size=vocab_size, dropout=plan,
                           tie_embeddings=bool(cfg.toggles["tie_lm_head"]),
                           **cfg.model)
    except (TypeError, ValueError) as e:
        raise DataError(f"bad model settings: {e}") from e


def make_featurizer(cfg: ExperimentConfig) -> FeaturizerConfig:
    return FeaturizerConfig(feat_dim=int(cfg.model.get("feat_dim", 8)),
                            frames_per_symbol=cfg.frames_per_symbol,
                            seed=cfg.featurizer_seed)


# -- shared helpers -------------------------------------------------------------


def run_root(explicit: str | None = None) -> Path:
    return Path(explicit or os.environ.get(RUN_ROOT_ENV) or "runs")


def _load_role(cfg: ExperimentConfig, role: str):
    path = cfg.data.get(role)
    if not path:
        return None
    try:
        return load_manifest(path, featurizer=make_featurizer(cfg))
    except FileNotFoundError as e:
        raise DataError(f"data.{role}: {e}") from e


def load_datasets(cfg: ExperimentConfig) -> dict:
    datasets = {}
    for role in _DATA_ROLES:
        if role == "eval":
            continue
        ds = _load_role(cfg, role)
        if ds is not None:
            datasets[role] = ds
    if not datasets:
        raise DataError("config names no datasets (data.st3 / data.asr / ...)")
    return datasets


def build_vocab(cfg: ExperimentConfig, datasets: dict) -> Vocabulary:
    texts = []
    tags = {cfg.src_lang, cfg.tgt_lang}
    for role in sorted(datasets):
        for s in datasets[role]:
            for attr in ("source_text", "target_text"):
                if hasattr(s, attr):
                    texts.append(getattr(s, attr))
            for attr in ("src_lang", "tgt_lang", "lang"):
                if hasattr(s, attr):
                    tags.add(getattr(s, attr).tag)
    return Vocabulary.build(texts, [LanguageCode(t) for t in sorted(tags)],
                            unit=cfg.vocab_unit)


def _needed_snapshots(strategy: str) -> tuple[bool, bool]:
    needs_asr = strategy in ("E2E_ASRinit", "E2E_ASRinit_MTinit", "MLT_ASRinit")
    needs_mt = strategy in ("E2E_ASRinit_MTinit", "MLT", "MLT_ASRinit")
    return needs_asr, needs_mt


def train_from_config(cfg: ExperimentConfig, run_dir: Path,
                      snapshots: dict | None = None) -> dict:
    """Execute the configured strategy, writing the standard run layout:
    config.txt, metrics.jsonl, checkpoints/<tag>/, report.json.
    """
    started = time.time()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")

    datasets = load_datasets(cfg)
    vocab = build_vocab(cfg, datasets)
    tcfg = make_train_config(cfg)
    model_cfg = make_model_config(cfg, len(vocab))
    weights = LossWeights(*cfg.weights)

    snapshots = dict(snapshots or {})
    phases: list[tuple[str, list[dict]]] = []
    needs_asr, needs_mt = _needed_snapshots(cfg.strategy)
    for needed, tag, prereq in ((needs_asr, "asr", "ASR_FT"),
                                (needs_mt, "mt", "MT_FT")):
        if needed and tag not in snapshots:
            pre = run_strategy(prereq, datasets, tcfg, model_cfg, vocab)
            snapshots[tag] = params_snapshot(pre.models[tag])
            phases.append((f"prereq_{tag}", pre.logs[tag]))
            save_checkpoint(pre.models[tag], run_dir / "checkpoints" / f"prereq_{tag}",
                            tag=f"prereq_{tag}")

    result = run_strategy(cfg.strategy, datasets, tcfg, model_cfg, vocab,
                          snapshots=snapshots or None, weights=weights)
    for tag in sorted(result.logs):
        phases.append((tag, result.logs[tag]))

    with open(run_dir / "metrics.jsonl", "w", encoding="utf-8") as f:
        for phase, log in phases:
            for entry in log:
                f.write(json.dumps({"phase": phase, **entry}) + "\n")
    for tag, model in result.models.items():
        save_checkpoint(model, run_dir / "checkpoints" / tag, tag=tag)

    def final_loss(log: list[dict]):
        if not log:
            return None
        # Single-task logs report "loss"; the multitask loop logs "total".
        return log[-1].get("loss", log[-1].get("total"))

    report = {
        "strategy": result.name,
        "label": result.label,
        "models": {tag: {"steps": len(result.logs[tag]),
                         "final_loss": final_loss(result.logs[tag])}
                   for tag in sorted(result.models)},
        "pipeline": result.pipeline,
        "vocab_size": len(vocab),
        "elapsed_sec": round(time.time() - started, 3),
    }
    (run_dir / "report.json").write_text(json.dumps(report, indent=2),
                                         encoding="utf-8")
    return report


def _eval_plan(strategy: str) -> tuple[str, str, str]:
    """(decode mode, metric, checkpoint tag) used when scoring a run."""
    if strategy == "ASR_FT":
        return "asr", "wer", "asr"
    if strategy == "MT_FT":
        return "mt", "bleu", "mt"
    if strategy == "CASCADE":
        return "cascade", "bleu", "asr"
    return "e2e", "bleu", "st"


def _eval_manifest(cfg: ExperimentConfig, mode: str) -> str:
    for role in ("eval", "dev_st3", "st3"):
        if cfg.data.get(role):
            return cfg.data[role]
    fallback = {"asr": "asr", "mt": "mt"}.get(mode)
    if fallback and cfg.data.get(fallback):
        return cfg.data[fallback]
    raise DataError("no manifest available to evaluate on "
                    "(set data.eval, data.dev_st3 or data.st3)")


def evaluate_run(cfg: ExperimentConfig, run_dir: Path) -> dict:
    """Decode the run's eval split with its saved checkpoint(s) and score it.

    Writes hyps.jsonl and eval.json under the run directory and returns the
    eval.json payload.
    """
    run_dir = Path(run_dir)
    mode, metric, tag = _eval_plan(cfg.strategy)
    manifest = _eval_manifest(cfg, mode)
    samples = load_manifest(manifest, featurizer=make_featurizer(cfg))
    if mode == "cascade":
        asr_model, _ = load_checkpoint(run_dir / "checkpoints" / "asr")
        mt_model, _ = load_checkpoint(run_dir / "checkpoints" / "mt")
        pipeline = CascadePipeline(asr_model, mt_model,
                                   LanguageCode(cfg.src_lang),
                                   LanguageCode(cfg.tgt_lang),
                                   beam=cfg.beam,
                                   length_penalty=cfg.length_penalty)
        records = decode_batch(samples, "cascade", pipeline=pipeline)
    else:
        model, _ = load_checkpoint(run_dir / "checkpoints" / tag)
        records = decode_batch(samples, mode, model=model, beam=cfg.beam,
                               length_penalty=cfg.length_penalty)
    refs = [s.source_text if mode == "asr" else s.target_text for s in samples]
    hyps = [r["hyp"] for r in records]
    report = score_corpus(refs, hyps, metric)
    with open(run_dir / "hyps.jsonl", "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    payload = {"mode": mode, "metric": metric, "score": report.score,
               "signature": report.signature, "manifest": str(Path(manifest).resolve()),
               "n_utterances": report.n_utterances}
    (run_dir / "eval.json").write_text(json.dumps(payload, indent=2),
                                       encoding="utf-8")
    return payload


# -- prepare --------------------------------------------------------------------


def cmd_prepare(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    featurizer = FeaturizerConfig(feat_dim=args.feat_dim,
                                  frames_per_symbol=args.frames_per_symbol,
                                  seed=args.featurizer_seed)
    samples = load_manifest(args.manifest, kind="st3", featurizer=featurizer)

    if args.no_clean:
        survivors = samples
        report = {"enabled": False, "total": len(samples), "kept": len(samples),
                  "dropped": {}}
        # Byte-identical passthrough of the 3-way manifest.
        shutil.copyfile(args.manifest, out_dir / "st3.jsonl")
    else:
        rules = CleaningRules(max_len_ratio=args.max_len_ratio,
                              min_len=args.min_len, max_len=args.max_len)
        survivors, clean_report = clean_bitext(samples, rules)
        report = {"enabled": True, **clean_report.to_dict()}

    mode = args.features
    if mode == "auto":
        mode = "proxy" if all(s.speech.proxy is not None for s in survivors) \
            else "inline"
    if not args.no_clean:
        save_manifest(survivors, out_dir / "st3.jsonl", features=mode)
    save_manifest(derive_twoway(survivors), out_dir / "st2.jsonl", features=mode)
    save_manifest(derive_asr(survivors), out_dir / "asr.jsonl", features=mode)
    save_manifest(derive_mt(survivors), out_dir / "mt.jsonl")
    (out_dir / "cleaning_report.json").write_text(json.dumps(report, indent=2),
                                                  encoding="utf-8")
    print(f"prepared {len(survivors)}/{len(samples)} samples -> {out_dir}")
    return EXIT_OK


# -- train ----------------------------------------------------------------------


def _load_snapshot_arg(path: str | None):
    if not path:
        return None
    model, _ = load_checkpoint(path)
    return params_snapshot(model)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.strategy:
        cfg.strategy = args.strategy
        cfg.validate()
    if args.seed is not None:
        cfg.seed = args.seed
    run_dir = Path(args.run_dir) if args.run_dir else \
        run_root(args.run_root) / f"{cfg.strategy.lower()}_seed{cfg.seed}"
    snapshots = {}
    for tag, path in (("asr", args.asr), ("mt", args.mt)):
        snap = _load_snapshot_arg(path)
        if snap is not None:
            snapshots[tag] = snap
    report = train_from_config(cfg, run_dir, snapshots=snapshots)
    print(json.dumps({"run_dir": str(run_dir), **report}, indent=2))
    return EXIT_OK


# -- decode ---------------------------------------------------------------------


def cmd_decode(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    featurizer = FeaturizerConfig(feat_dim=model.config.feat_dim,
                                  frames_per_symbol=args.frames_per_symbol,
                                  seed=args.featurizer_seed)
    samples = load_manifest(args.manifest, featurizer=featurizer)
    if args.mode == "cascade":
        if not args.mt_checkpoint:
            raise UsageError("cascade mode needs --checkpoint (ASR stage) "
                             "and --mt-checkpoint (MT stage)")
        mt_model, _ = load_checkpoint(args.mt_checkpoint)
        first = samples[0]
        src = args.src_lang or getattr(first, "src_lang",
                                       getattr(first, "lang", None)).tag
        tgt = args.tgt_lang or first.tgt_lang.tag
        pipeline = CascadePipeline(model, mt_model, LanguageCode(src),
                                   LanguageCode(tgt), beam=args.beam,
                                   length_penalty=args.length_penalty)
        records = decode_batch(samples, "cascade", pipeline=pipeline)
    else:
        if args.mt_checkpoint:
            raise UsageError("--mt-checkpoint only applies to cascade mode")
        records = decode_batch(samples, args.mode, model=model, beam=args.beam,
                               length_penalty=args.length_penalty)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
    print(f"decoded {len(records)} samples -> {out}")
    return EXIT_OK


# -- score ----------------------------------------------------------------------

_AUTO_FIELDS = ("hyp", "tgt_text", "src_text", "text")


def _read_texts(path: str, fieldname: str | None) -> list[str]:
    try:
        raw_lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    lines = [l for l in raw_lines if l.strip()]
    if lines and lines[0].lstrip().startswith("{"):
        texts = []
        for i, line in enumerate(lines, start=1):
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path} line {i}: bad JSON: {e.msg}") from e
            name = fieldname
            if name is None:
                name = next((k for k in _AUTO_FIELDS if k in row), None)
            if name is None or name not in row:
                raise DataError(f"{path} line {i}: no usable text field "
                                f"(looked for {fieldname or _AUTO_FIELDS})")
            texts.append(str(row[name]))
        return texts
    return lines


def cmd_score(args) -> int:
    refs = _read_texts(args.refs, args.ref_field)
    hyps = _read_texts(args.hyps, args.hyp_field)
    try:
        report = score_corpus(refs, hyps, args.metric)
    except ValueError as e:
        raise DataError(str(e)) from e
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


# -- ablate ---------------------------------------------------------------------


def _flip_toggles(base: dict, lm_head: bool, dropout: bool, lang: bool) -> dict:
    plans = ("variant_A", "variant_B")
    out = dict(base)
    if lm_head:
        out["tie_lm_head"] = not base["tie_lm_head"]
    if dropout:
        cur = base["dropout_plan"]
        out["dropout_plan"] = plans[1 - plans.index(cur)] if cur in plans \
            else "variant_B"
    if lang:
        out["include_lang_loss"] = not base["include_lang_loss"]
    return out


def toggle_grid(base: dict) -> list[tuple[str, dict]]:
    """The eight toggle combinations, labeled by which switches were flipped
    relative to the base profile.
    """
    rows = []
    for label in ABLATION_ROWS:
        flips = set(label.split("+")[1:])
        rows.append((label, _flip_toggles(base, "lm_head" in flips,
                                          "dropout" in flips, "lang" in flips)))
    return rows


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_") or "cell"


def cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir) if args.out_dir else run_root(args.run_root) / "ablation"
    out_dir.mkdir(parents=True, exist_ok=True)

    cells: list[tuple[str, ExperimentConfig]] = []
    if args.subset:
        for spec_arg in args.subset:
            label, _, manifest = spec_arg.partition("=")
            if not label or not manifest:
                raise UsageError(f"--subset expects LABEL=MANIFEST, got {spec_arg!r}")
            sub = dataclasses.replace(cfg, data=dict(cfg.data),
                                      toggles=dict(cfg.toggles),
                                      train=dict(cfg.train),
                                      model=dict(cfg.model))
            sub.data["st3"] = manifest
            # Derived roles must come from the subset, not the base manifests.
            for role in ("st2", "asr", "mt"):
                sub.data.pop(role, None)
            cells.append((label, sub))
    else:
        for label, toggles in toggle_grid(cfg.toggles):
            cell = dataclasses.replace(cfg, data=dict(cfg.data), toggles=toggles,
                                       train=dict(cfg.train),
                                       model=dict(cfg.model))
            cells.append((label, cell))

    rows = []
    for i, (label, cell_cfg) in enumerate(cells):
        cell_dir = out_dir / f"{i:02d}_{_slug(label)}"
        row = {"label": label, "run_dir": str(cell_dir)}
        try:
            train_from_config(cell_cfg, cell_dir)
            row.update(evaluate_run(cell_cfg, cell_dir))
        except Exception as e:  # keep going; a grid survives bad cells
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)

    table_lines = ["label\tmetric\tscore"]
    for row in rows:
        if "error" in row:
            table_lines.append(f"{row['label']}\tERROR\t{row['error']}")
        else:
            table_lines.append(f"{row['label']}\t{row['metric']}\t{row['score']:.4f}")
    table = "\n".join(table_lines) + "\n"
    (out_dir / "table.tsv").write_text(table, encoding="utf-8")
    (out_dir / "table.json").write_text(json.dumps(rows, indent=2),
                                        encoding="utf-8")
    print(table, end="")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stlab",
        description="Desk-scale speech translation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="derive and clean manifests from 3-way data")
    p.add_argument("--manifest", required=True, help="3-way input manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-clean", action="store_true",
                   help="skip filtering; pass the input through byte-identical")
    p.add_argument("--max-len-ratio", type=float, default=3.0)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-len", type=int, default=250)
    p.add_argument("--features", choices=("auto", "inline", "sidecar", "proxy"),
                   default="auto")
    p.add_argument("--feat-dim", type=int, default=8)
    p.add_argument("--frames-per-symbol", type=int, default=2)
    p.add_argument("--featurizer-seed", type=int, default=0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run one training strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", help="output directory (default: under the run root)")
    p.add_argument("--run-root", help=f"run root (default: ${RUN_ROOT_ENV} or ./runs)")
    p.add_argument("--strategy", choices=STRATEGY_NAMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--asr", help="checkpoint supplying the ASR snapshot")
    p.add_argument("--mt", help="checkpoint supplying the MT snapshot")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="decode a manifest with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=("e2e", "asr", "mt", "cascade"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mt-checkpoint", help="second checkpoint for cascade mode")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--length-penalty", type=float, default=1.0)
    p.add_argument("--src-lang")
    p.add_argument("--tgt-lang")
    p.add_argument("--frames-per-symbol", type=int, default=2)
    p.add_argument("--featurizer-seed", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="score hypotheses against references")
    p.add_argument("--refs", required=True, help="manifest/JSONL or plain text")
    p.add_argument("--hyps", required=True, help="manifest/JSONL or plain text")
    p.add_argument("--metric", choices=("wer", "cer", "bleu"), required=True)
    p.add_argument("--ref-field", help="JSONL field holding reference text")
    p.add_argument("--hyp-field", help="JSONL field holding hypothesis text")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("ablate", help="run a toggle or data-subset grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--run-root", help=f"run root (default: ${RUN_ROOT_ENV} or ./runs)")
    p.add_argument("--subset", action="append",
                   help="LABEL=MANIFEST row; repeat for more rows "
                        "(omit for the 8-row toggle grid)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ManifestError, FileNotFoundError, NotADirectoryError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
