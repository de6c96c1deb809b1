"""From raw triples to the four training manifests.

Builds a tiny synthetic 3-way corpus (speech, transcript, translation),
cleans it, derives the 2-way/ASR/MT views, and round-trips everything
through JSONL manifests.
"""

import tempfile
from pathlib import Path

from stlab.corpus import (FeaturizerConfig, derive_asr, derive_mt,
                          derive_twoway, load_manifest, save_manifest,
                          synthetic_copy_task)
from stlab.textproc import CleaningRules, clean_bitext


def main() -> None:
    featurizer = FeaturizerConfig(feat_dim=8)
    samples = synthetic_copy_task(12, seed=0, featurizer=featurizer)
    print(f"built {len(samples)} three-way samples, e.g.")
    s = samples[0]
    print(f"  speech {s.speech.features.shape}, transcript {s.source_text!r}, "
          f"translation {s.target_text!r}")

    # Poison two pairs so the cleaner has something to do.
    samples[3].__dict__["target_text"] = ""
    samples[7].__dict__["target_text"] = samples[7].source_text

    rules = CleaningRules(max_len_ratio=2.0, min_len=1, max_len=50)
    kept, report = clean_bitext(samples, rules)
    print(f"\ncleaning kept {report.kept}/{report.total}; drops by rule:")
    for rule, n in report.dropped.items():
        if n:
            print(f"  {rule}: {n}")

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        save_manifest(kept, root / "st3.jsonl", features="proxy")
        save_manifest(derive_twoway(kept), root / "st2.jsonl", features="proxy")
        save_manifest(derive_asr(kept), root / "asr.jsonl", features="proxy")
        save_manifest(derive_mt(kept), root / "mt.jsonl")
        print("\nderived manifests:")
        for name in ("st3", "st2", "asr", "mt"):
            path = root / f"{name}.jsonl"
            back = load_manifest(path, featurizer=featurizer)
            kind = type(back[0]).__name__
            print(f"  {name}.jsonl: {len(back)} x {kind}")


if __name__ == "__main__":
    main()
