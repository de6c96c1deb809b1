"""The ablation harness end to end, driven through the CLI entry point.

Writes a config file and a manifest, runs the eight-row toggle grid, and
prints the resulting table. Every cell is an isolated run directory that
could be reproduced from its own config snapshot.
"""

import tempfile
from pathlib import Path

from stlab.cli import main
from stlab.corpus import FeaturizerConfig, save_manifest, synthetic_copy_task

CONFIG = """\
strategy = E2E
seed = 0
decode.beam = 1
data.st3 = st3.jsonl
train.max_epochs = 30
train.batch_size_speech = 8
train.batch_size_text = 8
train.peak_lr = 0.005
model.feat_dim = 4
model.model_dim = 16
model.speech_layers = 1
model.text_layers = 1
model.decoder_layers = 1
model.n_heads = 2
model.ffn_dim = 16
"""


def run() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        samples = synthetic_copy_task(8, seed=9,
                                      featurizer=FeaturizerConfig(feat_dim=4),
                                      min_len=2, max_len=4)
        save_manifest(samples, root / "st3.jsonl", features="proxy")
        (root / "grid.cfg").write_text(CONFIG, encoding="utf-8")

        rc = main(["ablate", "--config", str(root / "grid.cfg"),
                   "--out-dir", str(root / "grid")])
        print(f"\nexit code {rc}")
        print("run directories:")
        for cell in sorted((root / "grid").iterdir()):
            if cell.is_dir():
                print(f"  {cell.name}: {sorted(p.name for p in cell.iterdir())}")


if __name__ == "__main__":
    run()
