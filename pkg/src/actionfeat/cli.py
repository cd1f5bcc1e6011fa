"""Pipeline orchestration: composable subcommands over a run configuration.

Stages persist their artifacts (models, encodings, reports) under the run's
output directory so expensive steps are cached between invocations:

    synth      -> manifest + descriptor files
    fit-pca    -> models/<split>/pca_<layer>.bin
    fit-kmeans -> models/<split>/kmeans_<layer>.bin
    fit-gmm    -> models/<split>/gmm_<layer>.bin
    encode     -> encodings/<split>/<kind>_<layer>/<video>.desc (+ sidecar)
    train      -> models/<split>/svm_<key>.bin
    evaluate   -> reports/<split>.json / .txt (+ reports/summary.json)
    run-all    -> all of the above in order

Models are always fitted on training-split descriptors only, sampled
uniformly without replacement with the run seed.  The on-disk models are
canonical: fitting reloads what it wrote, so later stages consume exactly the
persisted float32 parameters and reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classify, codebook, encode, gmm, reduce, synth
from .datamodel import (
    ActivationTensor,
    Dataset,
    DescriptorMatrix,
    load_manifest,
    read_descriptor_file,
)

log = logging.getLogger("actionfeat")

ENCODER_CHOICES = ("objects1k", "avgpool", "vlad", "fisher", "lcd-vlad", "lcd-fisher")

_SALT_PCA, _SALT_KMEANS, _SALT_GMM = 1, 2, 3


@dataclass(frozen=True)
class EncoderSel:
    """One encoder applied to one manifest layer."""

    kind: str
    layer: str

    def __post_init__(self):
        if self.kind not in ENCODER_CHOICES:
            raise ValueError(f"unknown encoder kind {self.kind!r}")

    @property
    def key(self) -> str:
        return f"{self.kind}_{self.layer}"


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    outdir: Path
    encoders: tuple[EncoderSel, ...] = (EncoderSel("fisher", "features"),)
    split: str | None = None  # None = every split in the manifest
    seed: int = 0
    alpha: float = 0.2
    vlad_k: int = 256
    fv_k: int = 256
    pca_dim: int = 256
    pca_samples: int = 100_000
    kmeans_samples: int = 100_000
    gmm_samples: int = 250_000
    kmeans_iters: int = 100
    gmm_iters: int = 100
    fit_tol: float = 1e-6
    c_param: float = 100.0
    workers: int = 1

    @property
    def encoder_config(self) -> encode.EncoderConfig:
        return encode.EncoderConfig(
            alpha=self.alpha, vlad_k=self.vlad_k, fv_k=self.fv_k, pca_dim=self.pca_dim
        )

    def splits_of(self, ds: Dataset) -> list[str]:
        if self.split is not None:
            ds.split(self.split)  # raises on unknown split
            return [self.split]
        return sorted(ds.splits)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return config_from_dict(doc, base=Path(path).parent)


def config_from_dict(doc: dict, base: Path = Path(".")) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    doc = dict(doc)
    if "manifest" not in doc or "outdir" not in doc:
        raise ValueError("config needs 'manifest' and 'outdir'")
    doc["manifest"] = _resolve(base, doc["manifest"])
    doc["outdir"] = _resolve(base, doc["outdir"])
    if "encoders" in doc:
        doc["encoders"] = tuple(
            EncoderSel(kind=e["kind"], layer=e["layer"]) if isinstance(e, dict)
            else EncoderSel(*str(e).split(":", 1))
            for e in doc["encoders"]
        )
    return RunConfig(**doc)


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else (base / p)


# ---------------------------------------------------------------------------
# stage paths


def model_path(cfg: RunConfig, split: str, kind: str, name: str) -> Path:
    return cfg.outdir / "models" / split / f"{kind}_{name}.bin"


def encoding_path(cfg: RunConfig, split: str, sel: EncoderSel, vid: str) -> Path:
    return cfg.outdir / "encodings" / split / sel.key / f"{vid}.desc"


def report_path(cfg: RunConfig, split: str) -> Path:
    return cfg.outdir / "reports" / f"{split}.json"


def _svm_key(cfg: RunConfig) -> str:
    return "+".join(sel.key for sel in cfg.encoders)


def _layer_needs(cfg: RunConfig) -> dict[str, set[str]]:
    """Which model kinds each layer requires, from the configured encoders."""
    needs: dict[str, set[str]] = {}
    for sel in cfg.encoders:
        if sel.kind in ("vlad", "lcd-vlad"):
            needs.setdefault(sel.layer, set()).update(("pca", "kmeans"))
        elif sel.kind in ("fisher", "lcd-fisher"):
            needs.setdefault(sel.layer, set()).update(("pca", "gmm"))
    return needs


# ---------------------------------------------------------------------------
# fitting


def _sample_train_rows(
    ds: Dataset, train_ids: tuple[str, ...], layer: str, count: int, rng: np.random.Generator
) -> DescriptorMatrix:
    """Uniform sample without replacement over all training rows of a layer."""
    blocks = []
    for vid in train_ids:
        video = ds.video(vid)
        if layer not in video.sources:
            raise ValueError(f"video {vid!r} has no source for layer {layer!r}")
        blocks.append(read_descriptor_file(video.sources[layer]).values)
    pool = np.vstack(blocks)
    total = pool.shape[0]
    if count >= total:
        if count > total:
            log.info("layer %s: requested %d sample rows, only %d available; using all",
                     layer, count, total)
        return DescriptorMatrix(pool)
    idx = np.sort(rng.choice(total, size=count, replace=False))
    return DescriptorMatrix(pool[idx])


def _rng_for(cfg: RunConfig, salt: int, split_idx: int, layer: str) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, salt, split_idx, zlib.crc32(layer.encode())])


def cmd_fit(cfg: RunConfig, stages: set[str] | None = None) -> list[Path]:
    """Fit PCA/codebook/GMM models per split and layer; returns written paths.

    Only training-split descriptors are read.  Each model is reloaded from
    disk after writing so downstream stages see the persisted parameters.
    """
    stages = stages or {"pca", "kmeans", "gmm"}
    ds = load_manifest(cfg.manifest)
    needs = _layer_needs(cfg)
    written: list[Path] = []
    for split_idx, split in enumerate(cfg.splits_of(ds)):
        train_ids, _ = ds.split(split)
        for layer in sorted(needs):
            kinds = needs[layer]
            pca_path = model_path(cfg, split, "pca", layer)
            if "pca" in stages:
                rng = _rng_for(cfg, _SALT_PCA, split_idx, layer)
                rows = _sample_train_rows(ds, train_ids, layer, cfg.pca_samples, rng)
                model = reduce.fit_pca(rows, cfg.pca_dim, seed=cfg.seed)
                pca_path.parent.mkdir(parents=True, exist_ok=True)
                reduce.save_pca(pca_path, model)
                written.append(pca_path)
                log.info("fitted pca for layer %s (split %s): %d -> %d",
                         layer, split, model.input_dim, model.output_dim)
            if ("kmeans" in stages and "kmeans" in kinds) or ("gmm" in stages and "gmm" in kinds):
                if not pca_path.is_file():
                    raise FileNotFoundError(f"missing model: {pca_path} (run fit-pca first)")
                pca_model = reduce.load_pca(pca_path)
            if "kmeans" in stages and "kmeans" in kinds:
                rng = _rng_for(cfg, _SALT_KMEANS, split_idx, layer)
                rows = _sample_train_rows(ds, train_ids, layer, cfg.kmeans_samples, rng)
                cb = codebook.fit_kmeans(
                    reduce.apply_pca(pca_model, rows),
                    cfg.vlad_k,
                    seed=cfg.seed,
                    max_iter=cfg.kmeans_iters,
                    tol=cfg.fit_tol,
                )
                path = model_path(cfg, split, "kmeans", layer)
                path.parent.mkdir(parents=True, exist_ok=True)
                codebook.save_codebook(path, cb)
                written.append(path)
                log.info("fitted kmeans codebook for layer %s (split %s): k=%d", layer, split, cb.k)
            if "gmm" in stages and "gmm" in kinds:
                rng = _rng_for(cfg, _SALT_GMM, split_idx, layer)
                rows = _sample_train_rows(ds, train_ids, layer, cfg.gmm_samples, rng)
                model = gmm.fit_gmm(
                    reduce.apply_pca(pca_model, rows),
                    cfg.fv_k,
                    seed=cfg.seed,
                    max_iter=cfg.gmm_iters,
                )
                path = model_path(cfg, split, "gmm", layer)
                path.parent.mkdir(parents=True, exist_ok=True)
                gmm.save_gmm(path, model)
                written.append(path)
                log.info("fitted gmm for layer %s (split %s): k=%d", layer, split, model.k)
    return written


# ---------------------------------------------------------------------------
# encoding


def _tensors_from_rows(m: DescriptorMatrix, side: int | None, vid: str) -> list[ActivationTensor]:
    if side is None or side < 1:
        raise ValueError(f"video {vid!r} has no pool5_side; required for lcd encoders")
    a2 = side * side
    if m.rows % a2 != 0:
        raise ValueError(
            f"video {vid!r}: {m.rows} pool5 rows not divisible by a^2 = {a2}"
        )
    frames = m.rows // a2
    return [
        ActivationTensor(m.values[f * a2 : (f + 1) * a2].reshape(side, side, m.dim), frame_index=f)
        for f in range(frames)
    ]


def _encode_video(cfg: RunConfig, ds: Dataset, split: str, sel: EncoderSel, models: dict, vid: str) -> Path:
    video = ds.video(vid)
    if sel.layer not in video.sources:
        raise ValueError(f"video {vid!r} has no source for layer {sel.layer!r}")
    m = read_descriptor_file(video.sources[sel.layer])
    ec = cfg.encoder_config
    if sel.kind == "objects1k":
        enc = encode.objects1k(m)
    elif sel.kind == "avgpool":
        enc = encode.average_pool(m)
    elif sel.kind == "vlad":
        enc = encode.encode_vlad(models["kmeans"], reduce.apply_pca(models["pca"], m), ec)
    elif sel.kind == "fisher":
        enc = encode.encode_fisher(models["gmm"], reduce.apply_pca(models["pca"], m), ec)
    else:  # lcd-vlad / lcd-fisher
        tensors = _tensors_from_rows(m, video.pool5_side, vid)
        model = models["kmeans"] if sel.kind == "lcd-vlad" else models["gmm"]
        enc = encode.encode_lcd(tensors, models["pca"], model, ec)
    path = encoding_path(cfg, split, sel, vid)
    encode.save_encoding(path, enc)
    return path


def _load_models_for(cfg: RunConfig, split: str, sel: EncoderSel) -> dict:
    models: dict = {}
    wants = {
        "vlad": ("pca", "kmeans"),
        "lcd-vlad": ("pca", "kmeans"),
        "fisher": ("pca", "gmm"),
        "lcd-fisher": ("pca", "gmm"),
    }.get(sel.kind, ())
    loaders = {"pca": reduce.load_pca, "kmeans": codebook.load_codebook, "gmm": gmm.load_gmm}
    for kind in wants:
        path = model_path(cfg, split, kind, sel.layer)
        if not path.is_file():
            raise FileNotFoundError(f"missing model: {path} (run fit first)")
        models[kind] = loaders[kind](path)
    return models


def cmd_encode(cfg: RunConfig) -> list[Path]:
    """Encode every video of the split(s), train and test, for each encoder."""
    ds = load_manifest(cfg.manifest)
    written: list[Path] = []
    for split in cfg.splits_of(ds):
        train_ids, test_ids = ds.split(split)
        vids = [*train_ids, *test_ids]
        for sel in cfg.encoders:
            models = _load_models_for(cfg, split, sel)
            encoding_path(cfg, split, sel, "x").parent.mkdir(parents=True, exist_ok=True)
            if cfg.workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    written.extend(
                        pool.map(lambda v: _encode_video(cfg, ds, split, sel, models, v), vids)
                    )
            else:
                written.extend(_encode_video(cfg, ds, split, sel, models, v) for v in vids)
            log.info("encoded %d videos with %s (split %s)", len(vids), sel.key, split)
    return written


# ---------------------------------------------------------------------------
# training and evaluation


def _fused_features(cfg: RunConfig, split: str, vids) -> list:
    feats = []
    for vid in vids:
        parts = [encode.load_encoding(encoding_path(cfg, split, sel, vid)) for sel in cfg.encoders]
        feats.append(encode.fuse(parts))
    return feats


def cmd_train(cfg: RunConfig) -> list[Path]:
    """Train the one-vs-all SVM on each split's training encodings."""
    ds = load_manifest(cfg.manifest)
    written = []
    for split in cfg.splits_of(ds):
        train_ids, _ = ds.split(split)
        feats = _fused_features(cfg, split, train_ids)
        labels = [ds.video(v).label for v in train_ids]
        model = classify.train_one_vs_all(feats, labels, c_param=cfg.c_param, seed=cfg.seed)
        path = model_path(cfg, split, "svm", _svm_key(cfg))
        path.parent.mkdir(parents=True, exist_ok=True)
        classify.save_svm(path, model)
        written.append(path)
        log.info("trained svm on %d videos (split %s)", len(train_ids), split)
    return written


def cmd_evaluate(cfg: RunConfig) -> dict:
    """Evaluate each split's SVM on its test encodings; write reports.

    Returns {"splits": {name: accuracy}, "mean_accuracy": float}.
    """
    ds = load_manifest(cfg.manifest)
    split_names = cfg.splits_of(ds)
    accuracies: dict[str, float] = {}
    for split in split_names:
        _, test_ids = ds.split(split)
        svm_path = model_path(cfg, split, "svm", _svm_key(cfg))
        if not svm_path.is_file():
            raise FileNotFoundError(f"missing model: {svm_path} (run train first)")
        model = classify.load_svm(svm_path)
        feats = _fused_features(cfg, split, test_ids)
        labels = [ds.video(v).label for v in test_ids]
        report = classify.evaluate(model, feats, labels)
        accuracies[split] = report.accuracy
        _write_report(cfg, ds, split, report)
        log.info("split %s accuracy: %.4f", split, report.accuracy)
    summary = {
        "splits": accuracies,
        "mean_accuracy": float(np.mean(list(accuracies.values()))),
    }
    if len(split_names) > 1:
        path = cfg.outdir / "reports" / "summary.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return summary


def _write_report(cfg: RunConfig, ds: Dataset, split: str, report: classify.EvaluationReport) -> None:
    path = report_path(cfg, split)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "split": split,
        "accuracy": report.accuracy,
        "per_class": [float(x) for x in report.per_class],
        "confusion": [[int(x) for x in row] for row in report.confusion],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    width = max((len(c) for c in ds.classes), default=5)
    lines = [f"{'class':<{width}}  {'tested':>6}  {'correct':>7}  {'accuracy':>8}"]
    totals = report.confusion.sum(axis=1)
    for idx, name in enumerate(ds.classes):
        lines.append(
            f"{name:<{width}}  {int(totals[idx]):>6}  {int(report.confusion[idx, idx]):>7}  "
            f"{report.per_class[idx]:>8.4f}"
        )
    lines.append(f"{'overall':<{width}}  {int(totals.sum()):>6}  "
                 f"{int(np.trace(report.confusion)):>7}  {report.accuracy:>8.4f}")
    path.with_suffix(".txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train_eval(cfg: RunConfig) -> dict:
    """train + evaluate in one call; returns the evaluation summary."""
    cmd_train(cfg)
    return cmd_evaluate(cfg)


def cmd_run_all(cfg: RunConfig) -> dict:
    """fit -> encode -> train -> evaluate."""
    cmd_fit(cfg)
    cmd_encode(cfg)
    return cmd_train_eval(cfg)


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration file")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--outdir", type=Path)
    p.add_argument("--split", help="split name (default: all splits in the manifest)")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--vlad-k", type=int, dest="vlad_k")
    p.add_argument("--fv-k", type=int, dest="fv_k")
    p.add_argument("--pca-dim", type=int, dest="pca_dim")
    p.add_argument("--c-param", type=float, dest="c_param")
    p.add_argument("--workers", type=int)
    p.add_argument("--pca-samples", type=int, dest="pca_samples")
    p.add_argument("--kmeans-samples", type=int, dest="kmeans_samples")
    p.add_argument("--gmm-samples", type=int, dest="gmm_samples")
    p.add_argument("--encoder", choices=ENCODER_CHOICES,
                   help="encoder kind; together with --layer overrides the config list")
    p.add_argument("--layer", help="manifest layer the --encoder reads")


def _config_from_args(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        if args.manifest is None or args.outdir is None:
            raise ValueError("need --config, or both --manifest and --outdir")
        cfg = RunConfig(manifest=args.manifest, outdir=args.outdir)
    overrides = {}
    for name in ("manifest", "outdir", "split", "seed", "alpha", "vlad_k", "fv_k",
                 "pca_dim", "c_param", "workers", "pca_samples", "kmeans_samples",
                 "gmm_samples"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.encoder is not None:
        if args.layer is None:
            raise ValueError("--encoder requires --layer")
        overrides["encoders"] = (EncoderSel(args.encoder, args.layer),)
    return replace(cfg, **overrides) if overrides else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actionfeat",
        description="Descriptor encoding and linear-SVM classification pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic descriptor dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--videos-per-class", type=int, default=20, dest="videos_per_class")
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool5-side", type=int, default=0, dest="pool5_side")
    p.add_argument("--pool5-channels", type=int, default=32, dest="pool5_channels")
    p.add_argument("--score-dim", type=int, default=0, dest="score_dim")

    for name, help_text in (
        ("fit-pca", "fit PCA models on training descriptors"),
        ("fit-kmeans", "fit k-means codebooks (requires fitted PCA)"),
        ("fit-gmm", "fit GMMs (requires fitted PCA)"),
        ("encode", "encode every video with the configured encoders"),
        ("train", "train the one-vs-all SVM on training encodings"),
        ("evaluate", "evaluate the SVM on test encodings and write reports"),
        ("run-all", "fit, encode, train and evaluate in one go"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)

    p = sub.add_parser("fuse", help="concatenate persisted encodings")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "synth":
            spec = synth.SynthSpec(
                classes=args.classes,
                videos_per_class=args.videos_per_class,
                frames_per_video=args.frames,
                descriptor_dim=args.dim,
                modes_per_class=args.modes,
                separation=args.separation,
                seed=args.seed,
                pool5_side=args.pool5_side,
                pool5_channels=args.pool5_channels,
                score_dim=args.score_dim,
            )
            synth.generate(spec, args.out)
            print(args.out / "manifest.json")
        elif args.command == "fuse":
            parts = [encode.load_encoding(p) for p in args.inputs]
            fused = encode.fuse(parts)
            args.output.parent.mkdir(parents=True, exist_ok=True)
            encode.save_encoding(args.output, fused)
            print(f"{args.output}: dim={fused.dim} source={fused.source}")
        else:
            cfg = _config_from_args(args)
            if args.command == "fit-pca":
                cmd_fit(cfg, stages={"pca"})
            elif args.command == "fit-kmeans":
                cmd_fit(cfg, stages={"kmeans"})
            elif args.command == "fit-gmm":
                cmd_fit(cfg, stages={"gmm"})
            elif args.command == "encode":
                cmd_encode(cfg)
            elif args.command == "train":
                cmd_train(cfg)
            elif args.command == "evaluate":
                summary = cmd_evaluate(cfg)
                for name, acc in summary["splits"].items():
                    print(f"{name}: accuracy {acc:.4f}")
                if len(summary["splits"]) > 1:
                    print(f"mean accuracy: {summary['mean_accuracy']:.4f}")
            elif args.command == "run-all":
                summary = cmd_run_all(cfg)
                for name, acc in summary["splits"].items():
                    print(f"{name}: accuracy {acc:.4f}")
                if len(summary["splits"]) > 1:
                    print(f"mean accuracy: {summary['mean_accuracy']:.4f}")
        return 0
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
