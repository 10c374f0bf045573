"""Command-line entry point: ``fusetl <subcommand> ...``.

Exit codes: 0 success, 1 usage or validation error, 2 I/O or file-format
error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import reporting
from .config import RunConfig
from .data import AugmentConfig, DatasetManifest, SplitLoader, fuse_datasets, generate_synthetic, split_dataset
from .errors import ConfigError, DivergenceError, FormatError, ValidationError
from .metrics import evaluate_scores
from .models import ARCHITECTURES, HeadSpec, apply_freeze, attach_head, build_backbone, compute_freeze_plan
from .train import collect_scores, import_weights, load_checkpoint, model_from_checkpoint, save_checkpoint, train

log = logging.getLogger("fusetl")

CHECKPOINT_NAME = "best.fzck"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _build_parser():
    p = _Parser(prog="fusetl", description="Transfer-learning pipeline for binary image classification.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic corpus and its manifest")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--n-per-class", type=int, default=300)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fuse", help="merge CT and X-ray class folders into one manifest")
    f.add_argument("--ct-covid", required=True)
    f.add_argument("--ct-noncovid", required=True)
    f.add_argument("--xray-covid", required=True)
    f.add_argument("--xray-noncovid", required=True)
    f.add_argument("--root", help="directory paths are stored relative to")
    f.add_argument("--out", required=True, help="manifest CSV to write")

    s = sub.add_parser("split", help="assign stratified train/val/test splits")
    s.add_argument("--manifest", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--test-frac", type=float, default=0.2)
    s.add_argument("--val-frac", type=float, default=0.25, help="fraction of the non-test part")
    s.add_argument("--out", help="output manifest (default: overwrite input)")

    t = sub.add_parser("train", help="train, checkpoint the best model, evaluate on test")
    t.add_argument("--config", help="run configuration JSON; flags override it")
    t.add_argument("--manifest")
    t.add_argument("--outdir")
    t.add_argument("--arch", choices=ARCHITECTURES)
    t.add_argument("--width", type=int)
    t.add_argument("--image-size", type=int)
    t.add_argument("--epochs", type=int, dest="max_epochs")
    t.add_argument("--batch-size", type=int)
    t.add_argument("--patience", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--freeze-fraction", type=float)
    t.add_argument("--hidden-dim", type=int)
    t.add_argument("--dropout", type=float, dest="dropout_p")
    t.add_argument("--split-seed", type=int)
    t.add_argument("--init-weights", help="checkpoint whose matching tensors initialize the model")
    t.add_argument("--synthetic", type=int, metavar="N_PER_CLASS",
                   help="generate a synthetic corpus under OUTDIR/data instead of --manifest")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a manifest split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.add_argument("--outdir", required=True)
    e.add_argument("--batch-size", type=int)
    e.add_argument("--name", help="model name in the report (default: architecture id)")

    c = sub.add_parser("compare", help="tabulate metrics.json files or checkpoints")
    c.add_argument("inputs", nargs="+", help="metrics.json files or checkpoint files")
    c.add_argument("--manifest", help="needed when inputs include checkpoints")
    c.add_argument("--names", nargs="+", help="row names, one per input")
    c.add_argument("--sort-by", default="accuracy", choices=[k for k, _ in reporting.COLUMNS])
    c.add_argument("--ascending", action="store_true")
    c.add_argument("--outdir", help="write comparison.csv and comparison.txt here")
    return p


def _evaluate(model, manifest, split, augment, batch_size, name):
    loader = SplitLoader(manifest, split, batch_size, config=augment, training=False, shuffle=False)
    scores, labels = collect_scores(model, loader)
    return evaluate_scores(scores, labels, model=name)


def cmd_generate(args):
    m = generate_synthetic(args.out, args.n_per_class, args.size, args.seed)
    print(f"wrote {len(m)} images and {Path(args.out) / 'manifest.csv'}")


def cmd_fuse(args):
    m = fuse_datasets(args.ct_covid, args.ct_noncovid, args.xray_covid, args.xray_noncovid,
                      root=args.root)
    m.save(args.out)
    for (label, modality), n in sorted(m.counts().items()):
        print(f"{label:9s} {modality:5s} {n}")
    print(f"total {len(m)} -> {args.out}")


def cmd_split(args):
    m = DatasetManifest.load(args.manifest)
    m = split_dataset(m, args.seed, args.test_frac, args.val_frac)
    out = args.out or args.manifest
    m.save(out)
    counts = {s: len(m.split(s)) for s in ("train", "val", "test")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()) + f" -> {out}")


_TRAIN_FLAGS = ("max_epochs", "batch_size", "patience", "lr", "seed", "freeze_fraction",
                "hidden_dim", "dropout_p")


def _run_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.arch:
        cfg.arch = args.arch
    if args.width:
        cfg.width = args.width
    if args.outdir:
        cfg.outdir = args.outdir
    if args.init_weights:
        cfg.init_weights = args.init_weights
    if args.image_size:
        cfg.augment = AugmentConfig(**{**cfg.augment.to_dict(), "target_size": args.image_size})
    for name in _TRAIN_FLAGS:
        value = getattr(args, name)
        if value is not None:
            setattr(cfg.train, name, value)
    cfg.train.__post_init__()
    if args.manifest:
        cfg.data.manifest = args.manifest
        cfg.data.synthetic = None
    if args.synthetic is not None:
        cfg.data.synthetic = {"n_per_class": args.synthetic, "size": cfg.augment.target_size,
                              "seed": cfg.data.split_seed}
        cfg.data.manifest = None
    if args.split_seed is not None:
        cfg.data.split_seed = args.split_seed
    if not cfg.data.manifest and not cfg.data.synthetic:
        raise UsageError("train needs --manifest, --synthetic, or a config with data.manifest")
    return cfg


def cmd_train(args):
    cfg = _run_config(args)
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.data.manifest:
        manifest = DatasetManifest.load(cfg.data.manifest)
    else:
        manifest = generate_synthetic(outdir / "data", **cfg.data.synthetic)
    if not manifest.split("train"):
        manifest = split_dataset(manifest, cfg.data.split_seed, cfg.data.test_frac,
                                 cfg.data.val_frac_of_train)

    tc = cfg.train
    model = build_backbone(cfg.arch, cfg.backbone_config, tc.seed)
    if cfg.init_weights:
        import_weights(model, cfg.init_weights)
    model = attach_head(model, HeadSpec(model.feature_dim, tc.hidden_dim, tc.dropout_p), tc.seed + 1)
    apply_freeze(model, compute_freeze_plan(model, tc.freeze_fraction))

    aug = cfg.augment
    train_loader = SplitLoader(manifest, "train", tc.batch_size, tc.seed, aug)
    val_loader = SplitLoader(manifest, "val", tc.batch_size, tc.seed, aug, shuffle=False)
    meta = {"augment": aug.to_dict(), "batch_size": tc.batch_size}
    ckpt = outdir / CHECKPOINT_NAME
    if ckpt.exists():
        ckpt.unlink()
    model, train_log = train(model, train_loader, val_loader, tc, checkpoint_path=ckpt, meta=meta)
    if not ckpt.exists():
        save_checkpoint(model, {"best_val_acc": 0.0, "epoch": 0, **meta}, ckpt)

    report = _evaluate(model, manifest, "test", aug, tc.batch_size, cfg.arch)
    reporting.emit_run_artifacts(train_log, report, outdir, cfg.to_dict())
    print(f"{cfg.arch}: {train_log.epochs_run} epochs ({train_log.stop_reason}), best epoch "
          f"{train_log.best_epoch} val_acc {train_log.best_val_acc:.4f}, test accuracy "
          f"{reporting.fmt_percent(report.accuracy)}% -> {outdir}")


def _report_for_checkpoint(path, manifest_path, split="test", batch_size=None, name=None):
    record = load_checkpoint(path)
    model = model_from_checkpoint(record)
    desc = record.descriptor
    aug = AugmentConfig(**desc["augment"]) if "augment" in desc else AugmentConfig(
        target_size=model.input_size)
    bs = batch_size or desc.get("batch_size", 32)
    manifest = DatasetManifest.load(manifest_path)
    return _evaluate(model, manifest, split, aug, bs, name or record.arch)


def cmd_eval(args):
    report = _report_for_checkpoint(args.checkpoint, args.manifest, args.split, args.batch_size,
                                    args.name)
    reporting.write_files(reporting.eval_files(report), args.outdir)
    print(f"{report.model}: accuracy {reporting.fmt_percent(report.accuracy)}% "
          f"ROC-AUC {reporting.fmt_percent(report.roc_auc)}% -> {args.outdir}")


def cmd_compare(args):
    if args.names and len(args.names) != len(args.inputs):
        raise UsageError("--names needs one name per input")
    reports = []
    for i, path in enumerate(args.inputs):
        name = args.names[i] if args.names else None
        if Path(path).suffix == ".json":
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            rep = reporting.report_from_metrics(doc)
            if name:
                rep.model = name
        else:
            if not args.manifest:
                raise UsageError("comparing checkpoints needs --manifest")
            rep = _report_for_checkpoint(path, args.manifest, name=name)
        reports.append(rep)
    csv_text, table = reporting.render_comparison(reports, args.sort_by, not args.ascending)
    if args.outdir:
        reporting.write_files({"comparison.csv": csv_text, "comparison.txt": table}, args.outdir)
    print(table, end="")


COMMANDS = {"generate": cmd_generate, "fuse": cmd_fuse, "split": cmd_split, "train": cmd_train,
            "eval": cmd_eval, "compare": cmd_compare}


def run_cli(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=1):
            COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fusetl: error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, DivergenceError, ConfigError) as exc:
        print(f"fusetl: error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"fusetl: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())
