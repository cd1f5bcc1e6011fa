#!/usr/bin/env python3
"""Desk-scale demo: generate a synthetic dataset and sweep the encoders.

Runs the full pipeline (fit -> encode -> train -> evaluate) once per encoder
configuration and prints a small comparison table, mirroring how the feature
combinations would be compared on a real dataset.

Usage: python scripts/synth_experiment.py [workdir]
"""

import sys
import tempfile
from pathlib import Path

from actionfeat import cli, synth


def main() -> int:
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="actionfeat_"))
    data = work / "data"
    if not (data / "manifest.json").exists():
        spec = synth.SynthSpec(
            classes=5,
            videos_per_class=20,
            frames_per_video=30,
            descriptor_dim=16,
            modes_per_class=2,
            separation=10.0,
            seed=7,
            pool5_side=2,
            pool5_channels=16,
            score_dim=10,
        )
        synth.generate(spec, data)
        print(f"generated synthetic dataset under {data}")

    runs = [
        ("avgpool", (cli.EncoderSel("avgpool", "features"),)),
        ("objects1k", (cli.EncoderSel("objects1k", "softmax"),)),
        ("vlad", (cli.EncoderSel("vlad", "features"),)),
        ("fisher", (cli.EncoderSel("fisher", "features"),)),
        ("lcd-vlad", (cli.EncoderSel("lcd-vlad", "pool5"),)),
        ("lcd-fisher", (cli.EncoderSel("lcd-fisher", "pool5"),)),
        ("fisher+vlad", (cli.EncoderSel("fisher", "features"),
                         cli.EncoderSel("vlad", "features"))),
        ("fisher+avgpool", (cli.EncoderSel("fisher", "features"),
                            cli.EncoderSel("avgpool", "features"))),
    ]

    results = []
    for name, encoders in runs:
        cfg = cli.RunConfig(
            manifest=data / "manifest.json",
            outdir=work / "runs" / name.replace("+", "_"),
            encoders=encoders,
            vlad_k=8,
            fv_k=8,
            pca_dim=8,
            c_param=100.0,
            seed=7,
            workers=2,
        )
        summary = cli.cmd_run_all(cfg)
        results.append((name, summary["mean_accuracy"]))
        print(f"  {name:<16} accuracy {summary['mean_accuracy']:.4f}")

    width = max(len(n) for n, _ in results)
    print(f"\n{'encoder':<{width}}  accuracy")
    for name, acc in results:
        print(f"{name:<{width}}  {acc:8.4f}")
    print(f"\nartifacts under {work}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
