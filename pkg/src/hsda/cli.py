"""Command-line pipeline driver.

Subcommands: preprocess | render | synth | train | evaluate | gradcheck.
Settings merge three layers, later winning: dataclass defaults, --config
file, explicit flags. Every output directory receives a config.txt with the
fully merged settings, so any artifact can be traced back to the run that
made it. Identical inputs, flags, and seed give byte-identical outputs.

Exit codes: 0 success, 1 validation or check failure, 2 usage error.

Heavy imports happen inside the command bodies: main() first reads
HSDA_THREADS and pins the BLAS pools, which only works while numpy is not
yet loaded.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, ProtocolError
from .runconfig import (
    RAW_FORMATS,
    RunConfig,
    make_runconfig,
    write_runconfig,
)

GRADCHECK_TOLERANCE = 1e-4


def _pin_threads() -> None:
    cap = os.environ.get("HSDA_THREADS")
    if cap is None or cap == "":
        return
    if not cap.isdigit() or int(cap) < 1:
        raise ConfigError("HSDA_THREADS must be a positive integer, got %r" % cap)
    for name in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[name] = cap


def _runconfig_from(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for key in ("seed", "out", "raw_format", "z_max", "size", "n", "scale"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "no_multiscale", False):
        overrides["multiscale"] = False
    if getattr(args, "no_contrastive", False):
        overrides["contrastive_weight"] = 0.0
    return make_runconfig(getattr(args, "config", None), overrides)


def _prepare_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    write_runconfig(cfg, os.path.join(cfg.out, "config.txt"))
    return cfg.out


def _record_stem(subject_id: str, task_id: int) -> str:
    return "%s_task%02d" % (subject_id, task_id)


def _model_config(cfg: RunConfig):
    from .model import ModelConfig, synth_config, toy_config

    preset = {"toy": toy_config, "synth": synth_config, "full": ModelConfig}[cfg.scale]
    return preset(use_multiscale=cfg.multiscale)


def _train_config(cfg: RunConfig):
    from .train import TrainConfig

    return TrainConfig(
        lr0=cfg.lr0,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        batch_size=cfg.batch_size,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        k_folds=cfg.k_folds,
        test_fraction=cfg.test_fraction,
        seed=cfg.seed,
        contrastive_weight=cfg.contrastive_weight,
    )


def _load_sequences(data_path: str, cfg: RunConfig):
    """Parse one raw CSV, or every *.csv in a directory, then preprocess."""
    from .ingest import parse_raw, preprocess

    if os.path.isdir(data_path):
        paths = sorted(
            os.path.join(data_path, name)
            for name in os.listdir(data_path)
            if name.endswith(".csv")
        )
        if not paths:
            raise ProtocolError("no .csv files in %s" % data_path)
    else:
        paths = [data_path]
    records = []
    for path in paths:
        records.extend(parse_raw(path, cfg.raw_format))
    return preprocess(records, z_max=cfg.z_max)


# ---------------------------------------------------------------------------
# commands


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _runconfig_from(args)
    import numpy as np

    from .features import kinematic_features, write_signal_csv
    from .ingest import CHANNELS, impute_missing, parse_raw, remove_outliers, salvageable, standardize

    records = parse_raw(args.raw, cfg.raw_format)
    out = _prepare_out(cfg)
    lines, subjects = [], []
    kept = dropped = 0
    for r in records:
        if r.subject_id not in subjects:
            subjects.append(r.subject_id)
        if not salvageable(r):
            dropped += 1
            lines.append("%s task %02d: dropped (unsalvageable)" % (r.subject_id, r.task_id))
            continue
        imputed = impute_missing(r)
        cleaned = remove_outliers(imputed, z_max=cfg.z_max)
        changed = np.zeros(len(imputed), dtype=bool)
        for name in CHANNELS:
            changed |= imputed.channel(name) != cleaned.channel(name)
        seq = standardize(cleaned)
        filename = _record_stem(r.subject_id, r.task_id) + ".csv"
        write_signal_csv(kinematic_features(seq), os.path.join(out, filename))
        kept += 1
        lines.append(
            "%s task %02d: ok, outliers replaced %d -> %s"
            % (r.subject_id, r.task_id, int(changed.sum()), filename)
        )
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        fh.write("subjects: %s\n" % " ".join(subjects))
        fh.write("kept: %d\ndropped: %d\n" % (kept, dropped))
        for line in lines:
            fh.write(line + "\n")
    print("%d records kept, %d dropped -> %s" % (kept, dropped, out))
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    cfg = _runconfig_from(args)
    from .features import render_image, write_ppm

    sequences = _load_sequences(args.raw, cfg)
    out = _prepare_out(cfg)
    for seq in sequences:
        canvas = render_image(seq, size=cfg.size)
        write_ppm(canvas, os.path.join(out, _record_stem(seq.subject_id, seq.task_id) + ".ppm"))
    print("%d images (%dx%d) -> %s" % (len(sequences), cfg.size, cfg.size, out))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _runconfig_from(args)
    from .features import synth_generate, write_raw_csv

    records = synth_generate(cfg.n, cfg.seed)
    out = _prepare_out(cfg)
    path = os.path.join(out, "synthetic.csv")
    write_raw_csv(records, path)
    print("%d records (%d per class) -> %s" % (len(records), cfg.n, path))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _runconfig_from(args)
    from .model import save_checkpoint
    from .train import build_dataset, run_protocol, write_history_csv, write_metrics

    model_cfg = _model_config(cfg)
    train_cfg = _train_config(cfg)
    sequences = _load_sequences(args.data, cfg)
    dataset = build_dataset([(s, s.label) for s in sequences], canvas_size=model_cfg.canvas_size)
    result = run_protocol(dataset, model_cfg, train_cfg)

    out = _prepare_out(cfg)
    for fr in result.fold_results:
        print(
            "fold %d: best epoch %d, val acc %.3f, %d epochs run"
            % (fr.fold, fr.best_epoch, fr.best_val_acc, len(fr.history))
        )
    best = result.fold_results[result.best_fold]
    write_history_csv(os.path.join(out, "history.csv"), best.history)
    write_metrics(os.path.join(out, "metrics.txt"), result.test_metrics)
    # protocol-critical settings ride with the weights so evaluate can
    # rebuild the same split and architecture without re-specifying flags
    save_checkpoint(
        os.path.join(out, "checkpoint.bin"),
        result.model.parameter_dict(),
        {
            "scale": cfg.scale,
            "multiscale": cfg.multiscale,
            "seed": cfg.seed,
            "k_folds": cfg.k_folds,
            "test_fraction": cfg.test_fraction,
            "best_fold": result.best_fold,
        },
    )
    print(result.test_metrics.table())
    print("checkpoint, history, metrics -> %s" % out)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    import dataclasses

    cfg = _runconfig_from(args)
    from .model import HsdaNet, load_checkpoint, restore_parameters
    from .train import build_dataset, evaluate, split_and_fold, write_metrics

    params, meta = load_checkpoint(args.checkpoint)
    for key in ("scale", "multiscale", "seed", "k_folds", "test_fraction"):
        if key not in meta:
            raise ProtocolError("checkpoint sidecar is missing %r" % key)
    cfg = dataclasses.replace(
        cfg,
        scale=meta["scale"],
        multiscale=meta["multiscale"].lower() == "true",
        seed=int(meta["seed"]),
        k_folds=int(meta["k_folds"]),
        test_fraction=float(meta["test_fraction"]),
    )
    model_cfg = _model_config(cfg)
    train_cfg = _train_config(cfg)
    sequences = _load_sequences(args.data, cfg)
    dataset = build_dataset([(s, s.label) for s in sequences], canvas_size=model_cfg.canvas_size)
    test_idx, _ = split_and_fold([s.label for s in dataset], train_cfg)

    model = HsdaNet(model_cfg, seed=cfg.seed)
    restore_parameters(model, params)
    metrics = evaluate(model, [dataset[i] for i in test_idx])
    out = _prepare_out(cfg)
    write_metrics(os.path.join(out, "metrics.txt"), metrics)
    print(metrics.table())
    print("metrics -> %s" % out)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = _runconfig_from(args)
    import numpy as np

    from . import diffcore as dc
    from .model import HsdaNet, synth_config, toy_config

    failures = 0

    def report(name: str, err: float) -> None:
        nonlocal failures
        ok = err < GRADCHECK_TOLERANCE
        failures += not ok
        print("  %-24s %.3e  %s" % (name, err, "ok" if ok else "FAIL"))

    print("primitive gradients (eps 1e-5, 64-bit):")
    worst = 0.0
    checks = 0
    for name, err in dc.primitive_checks(seed=cfg.seed):
        report(name, err)
        worst = max(worst, err)
        checks += 1

    model_cfg = {"toy": toy_config, "synth": synth_config}[args.scale](blocks_per_stage=2)
    print("composed %s model (2 coordinates per parameter):" % args.scale)
    with dc.using_dtype(np.float64):
        model = HsdaNet(model_cfg, seed=cfg.seed)
        gen = np.random.default_rng(cfg.seed)
        # init puts most weights within 2 sigma of zero; spreading them out
        # avoids checking gradients only in the near-linear regime
        for _, p in model.parameters():
            p.values = p.values + gen.normal(size=p.shape) * 0.2
        img = gen.normal(size=(3, model_cfg.canvas_size, model_cfg.canvas_size))
        sig = gen.normal(size=(model_cfg.n_channels, 32))
        target = gen.normal(size=(1, model_cfg.n_classes))

        def loss_fn():
            logits, _ = model(img, sig)
            return dc.sum_(dc.mul(logits, dc.Tensor(target)))

        errs = dc.check_parameter_gradients(
            loss_fn,
            model.parameter_dict(),
            samples_per_param=2,
            rng=np.random.default_rng(cfg.seed + 1),
        )
    for name in sorted(errs):
        report(name, errs[name])
        worst = max(worst, errs[name])
        checks += 1

    print("max rel err %.3e over %d checks" % (worst, checks))
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsda",
        description="handwriting dynamics pipeline: preprocess, render, synthesize, train, evaluate, gradient-check",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="key=value settings file")
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--out", metavar="DIR", help="output directory")

    p = sub.add_parser("preprocess", help="raw pen stream -> kinematic signal CSVs + manifest")
    p.add_argument("raw", help="raw recordings file")
    p.add_argument("--raw-format", choices=RAW_FORMATS, dest="raw_format")
    p.add_argument("--z-max", type=float, dest="z_max", help="outlier threshold")
    common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("render", help="raw pen stream -> dynamics-colored P6 images")
    p.add_argument("raw", help="raw recordings file")
    p.add_argument("--raw-format", choices=RAW_FORMATS, dest="raw_format")
    p.add_argument("--z-max", type=float, dest="z_max")
    p.add_argument("--size", type=int, help="image side in pixels")
    common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="generate a labeled synthetic raw dataset")
    p.add_argument("--n", type=int, help="records per class")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="k-fold training on a raw dataset")
    p.add_argument("data", help="raw recordings file or directory of them")
    p.add_argument("--raw-format", choices=RAW_FORMATS, dest="raw_format")
    p.add_argument("--z-max", type=float, dest="z_max")
    p.add_argument("--scale", choices=("full", "synth", "toy"), help="model preset")
    p.add_argument("--no-multiscale", action="store_true", help="disable stage fusion")
    p.add_argument("--no-contrastive", action="store_true", help="disable the template loss term")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on the held-out test split")
    p.add_argument("data", help="the raw dataset the checkpoint was trained on")
    p.add_argument("--checkpoint", required=True, help="weights written by train")
    p.add_argument("--raw-format", choices=RAW_FORMATS, dest="raw_format")
    p.add_argument("--z-max", type=float, dest="z_max")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every primitive and the composed model")
    p.add_argument("--scale", choices=("toy", "synth"), default="toy", help="composed model preset")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    try:
        _pin_threads()
    except ConfigError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ProtocolError, FloatingPointError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
