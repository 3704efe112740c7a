"""Command-line interface: ``qugeo {gen-data,scale-data,train,eval}``.

Failures exit with status 2 and print ``error: <category>: <message>``
on a single line to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, io
from .ansatz import AnsatzConfig
from .errors import ConfigurationError, QuGeoError
from .metrics import report
from .train import Checkpoint, TrainConfig, predict, train

log = logging.getLogger("qugeo")


def _cmd_gen_data(args) -> None:
    m = data.generate_dataset(args.out, args.samples, args.seed)
    print(f"wrote {m.n_samples} samples to {args.out} (split {m.split['train']}/{m.split['test']})")


def _cmd_scale_data(args) -> None:
    m = data.scale_dataset(args.input, args.out, args.method)
    print(f"scaled {m.n_samples} samples ({m.provenance['method']}) to {args.out}")


def _cmd_train(args) -> None:
    ds = data.load_scaled(args.data)
    n_test = ds.inputs.shape[0] - ds.n_train
    cfg = TrainConfig(
        epochs=args.epochs, initial_lr=args.lr, seed=args.seed, decoder=args.decoder,
        scaling=ds.provenance.get("method", "physics"), batch_qubits=args.batch_qubits,
        minibatch=args.minibatch,
        train_size=ds.n_train if args.train_size is None else args.train_size,
        test_size=n_test if args.test_size is None else args.test_size,
        ansatz=AnsatzConfig(n_qubits=8, n_blocks=args.blocks))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log.info("epoch %d loss %.6g test mse %.6g ssim %.4f", row["epoch"], row["train_loss"],
                 row["test_mse"], row["test_ssim"])

    ckpt = train(ds, cfg, progress)
    ckpt.save(out / "checkpoint.json")
    io.write_csv(out / "history.csv", io.HISTORY_FIELDS, ckpt.history)
    last = ckpt.history[-1] if ckpt.history else None
    msg = f"{ckpt.n_params} parameters, {ckpt.epoch} epochs"
    if last:
        msg += f", test mse {last['test_mse']:.5g}, ssim {last['test_ssim']:.4f}"
    print(msg)


def _cmd_eval(args) -> None:
    ckpt = Checkpoint.load(args.checkpoint)
    ds = data.load_scaled(args.data)
    if args.split == "test":
        sl = slice(ds.n_train, None)
    elif args.split == "train":
        sl = slice(0, ds.n_train)
    else:
        sl = slice(None)
    inputs, labels = ds.inputs[sl], ds.normalized_labels[sl]
    if inputs.shape[0] == 0:
        raise ConfigurationError(f"the {args.split} split is empty")
    if ds.normalization != ckpt.normalization:
        log.warning("dataset normalization differs from the checkpoint; using the checkpoint's")
        labels = ckpt.normalization.normalize(ds.labels[sl])
    preds = labels.copy() if args.self_test else predict(ckpt, inputs)
    if preds.shape != labels.shape:
        raise ConfigurationError(f"prediction shape {preds.shape} != label shape {labels.shape}")
    m = report(preds, labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = {"mse": m.mse, "ssim": m.ssim, "n_samples": int(preds.shape[0])}
    io.write_json(out / "metrics.json", metrics)
    io.write_npy(out / "predictions.npy", preds.astype(np.float32))
    if args.profile_column is not None:
        col, k = args.profile_column, args.profile_sample
        if not 0 <= col < preds.shape[2] or not 0 <= k < preds.shape[0]:
            raise ConfigurationError("profile column or sample out of range")
        norm = ckpt.normalization
        truth = norm.denormalize(labels[k, :, col])
        guess = norm.denormalize(preds[k, :, col])
        rows = [(d, float(t), float(g)) for d, (t, g) in enumerate(zip(truth, guess))]
        io.write_csv(out / "profile.csv", ("depth", "ground_truth", "predicted"), rows)
    print(json.dumps(metrics))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qugeo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="synthesize a full-resolution dataset")
    g.add_argument("--samples", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_data)

    s = sub.add_parser("scale-data", help="scale a dataset to 256 inputs and 8x8 labels")
    s.add_argument("--method", choices=("physics", "dsample"), default="physics")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_scale_data)

    t = sub.add_parser("train", help="train the circuit on a scaled dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--decoder", choices=("pixel", "layer"), default="layer")
    t.add_argument("--batch-qubits", type=int, default=0)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--minibatch", type=int, default=0,
                   help="samples per optimizer step (0 = whole training set)")
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--blocks", type=int, default=12)
    t.add_argument("--train-size", type=int)
    t.add_argument("--test-size", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", choices=("test", "train", "all"), default="test")
    e.add_argument("--profile-column", type=int)
    e.add_argument("--profile-sample", type=int, default=0)
    e.add_argument("--self-test", action="store_true",
                   help="score the labels against themselves instead of predictions")
    e.set_defaults(func=_cmd_eval)
    return p


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except QuGeoError as exc:
        print(f"error: {exc.category}: {_one_line(exc)}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
