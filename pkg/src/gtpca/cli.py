"""Experiment runner: generate data, fit models, evaluate, export.

One JSON config document drives everything; the command line only selects
the command and file locations. Every command is deterministic given the
config, so reruns produce byte-identical outputs.

Commands (all take --config):
  gen     write train.gtds / test.gtds into the output directory
  fit     fit the model on train.gtds -> model.gtpc + train_log.csv
  eval    ResMSE per component count (and accuracies when the task is
          labeled) -> metrics.csv
  export  loadings.csv + reconstructed test set recon.gtds for a given k
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import baselines, data, model as gt, transforms
from .core import Rng

_TASKS = ("oscillations", "spikes", "mnist")
_MODES = ("projection", "classification", "outlier")

# (sample_length, weight_length) per 1-D task setting
_OSC_SETTINGS = {"i": (256, 256), "ii": (256, 512)}
_SPIKE_SETTINGS = {"i": (128, 256), "ii": (256, 256), "iii": (256, 128)}

_DEFAULTS = {
    "mode": "projection",
    "k": 3,
    "seed": 0,
    "train_size": 1000,
    "test_size": 1000,
    "family": "shift",
    "rotation_angles": 20,
    "epochs_per_component": 5,
    "batches_per_epoch": 500,
    "batch_size": 32,
    "init_scale": 1.0,
    "mlp_epochs": 10,
    "out_dir": ".",
}


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if cfg.get("task") not in _TASKS:
        raise ValueError(f"config task must be one of {_TASKS}")
    merged = dict(_DEFAULTS)
    merged.update(cfg)
    task = merged["task"]
    if "setting" not in merged:
        merged["setting"] = "i" if task != "spikes" else "i"
    if merged["mode"] not in _MODES:
        raise ValueError(f"config mode must be one of {_MODES}")
    if task == "oscillations":
        if merged["setting"] not in _OSC_SETTINGS:
            raise ValueError("oscillations setting must be 'i' or 'ii'")
        t, wl = _OSC_SETTINGS[merged["setting"]]
        merged.setdefault("sample_length", t)
        merged.setdefault("weight_length", wl)
    elif task == "spikes":
        if merged["setting"] not in _SPIKE_SETTINGS:
            raise ValueError("spikes setting must be 'i', 'ii' or 'iii'")
        t, wl = _SPIKE_SETTINGS[merged["setting"]]
        merged.setdefault("sample_length", t)
        merged.setdefault("weight_length", wl)
    else:
        if merged["setting"] not in ("i", "ii", "iii", "iv"):
            raise ValueError("mnist setting must be one of i, ii, iii, iv")
    if merged["k"] < 1:
        raise ValueError("config k must be >= 1")
    if merged["train_size"] < 1 or merged["test_size"] < 1:
        raise ValueError("train_size and test_size must be >= 1")
    return merged


def build_family(cfg) -> transforms.TransformFamily:
    task = cfg["task"]
    if task == "mnist":
        setting = cfg["setting"]
        if setting == "iv":
            angles = 2.0 * np.pi * np.arange(cfg["rotation_angles"]) / cfg["rotation_angles"]
            return transforms.Rotation((28, 28), angles)
        sample_shape = {"i": (16, 16), "ii": (28, 28), "iii": (56, 56)}[setting]
        return transforms.Shift2D((28, 28), sample_shape)
    if cfg["family"] == "identity":
        return transforms.Identity(cfg["sample_length"])
    if cfg["family"] == "shift":
        return transforms.Shift1D(cfg["weight_length"], cfg["sample_length"])
    raise ValueError(f"unknown family {cfg['family']!r} for task {task}")


def _paths(cfg):
    out = cfg["out_dir"]
    return {
        "train": os.path.join(out, "train.gtds"),
        "test": os.path.join(out, "test.gtds"),
        "model": os.path.join(out, "model.gtpc"),
        "log": os.path.join(out, "train_log.csv"),
        "metrics": os.path.join(out, "metrics.csv"),
        "loadings": os.path.join(out, "loadings.csv"),
        "recon": os.path.join(out, "recon.gtds"),
    }


def _make_mnist_split(cfg, which: str, rng: Rng) -> data.Dataset:
    img_key = f"mnist_{which}_images"
    lab_key = f"mnist_{which}_labels"
    if not cfg.get(img_key) or not cfg.get(lab_key):
        raise ValueError(f"mnist task needs config keys {img_key} and {lab_key}")
    ds = data.load_idx(cfg[img_key], cfg[lab_key])
    size = cfg["train_size"] if which == "train" else cfg["test_size"]
    if size > len(ds):
        raise ValueError(f"{which}_size {size} exceeds dataset size {len(ds)}")
    order = np.argsort(rng.uniform(size=len(ds)), kind="stable")[:size]
    subset = data.Dataset(ds.data[order].copy(), ds.labels[order].copy())
    return data.mnist_setting(subset, cfg["setting"], rng)


def cmd_gen(cfg) -> int:
    os.makedirs(cfg["out_dir"], exist_ok=True)
    base = Rng(cfg["seed"])
    paths = _paths(cfg)
    task = cfg["task"]
    for which, key, size in (("train", 1, cfg["train_size"]), ("test", 2, cfg["test_size"])):
        rng = base.spawn(key)
        if task == "oscillations":
            ds = data.oscillation_dataset(rng, size, cfg["sample_length"])
        elif task == "spikes":
            ds = data.spike_mixture_dataset(rng, size, cfg["sample_length"])
        else:
            ds = _make_mnist_split(cfg, which, rng)
        data.save_dataset(ds, paths[which])
        print(f"wrote {paths[which]}: {len(ds)} samples of shape {ds.data.shape[1:]}")
    return 0


def _fit_subset(cfg, train: data.Dataset) -> np.ndarray:
    """Samples the components are fit on; outlier mode restricts to the
    positive class (spikes, or the digit 8 for mnist)."""
    if cfg["mode"] != "outlier":
        return train.data
    if train.labels is None:
        raise ValueError("outlier mode needs a labeled dataset")
    positive = 8 if cfg["task"] == "mnist" else 1
    mask = train.labels == positive
    if not mask.any():
        raise ValueError("outlier mode: no positive-class samples in train set")
    return train.data[mask]


def cmd_fit(cfg) -> int:
    paths = _paths(cfg)
    family = build_family(cfg)
    train = data.load_dataset(paths["train"])
    if train.data.shape[1:] != family.sample_shape:
        raise ValueError(
            f"dataset samples {train.data.shape[1:]} do not match family "
            f"sample shape {family.sample_shape}"
        )
    fit_cfg = gt.FitConfig(
        epochs_per_component=cfg["epochs_per_component"],
        batches_per_epoch=cfg["batches_per_epoch"],
        batch_size=cfg["batch_size"],
        seed=Rng(cfg["seed"]).spawn(5).seed,
        init_scale=cfg["init_scale"],
    )
    log_rows = []
    fitted = gt.fit_model(
        _fit_subset(cfg, train),
        family,
        cfg["k"],
        fit_cfg,
        epoch_callback=lambda k, e, w, o: log_rows.append((k, e, o)),
    )
    gt.save_model(fitted, paths["model"])
    with open(paths["log"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "epoch", "mean_objective"])
        for row in log_rows:
            writer.writerow([row[0], row[1], f"{row[2]:.12g}"])
    print(f"wrote {paths['model']} ({cfg['k']} components) and {paths['log']}")
    return 0


def _eval_labels(cfg, ds: data.Dataset) -> np.ndarray:
    labels = ds.labels
    if labels is None:
        raise ValueError("classification requested on an unlabeled dataset")
    if cfg["task"] == "mnist" and cfg["mode"] == "outlier":
        return (labels == 8).astype(np.int64)
    return labels


def cmd_eval(cfg, model_path=None) -> int:
    paths = _paths(cfg)
    mdl = gt.load_model(model_path or paths["model"])
    train = data.load_dataset(paths["train"])
    test = data.load_dataset(paths["test"])
    kmax = mdl.k

    coeffs_test, _, _ = gt.project_batch(mdl, test.data, kmax)
    resmse_gt = []
    residuals = test.data.copy()
    total = float(np.einsum("n...,n...->", test.data, test.data))
    for j in range(kmax):
        _, _, residuals = gt._deflate(mdl.family, residuals, mdl.components[j].weight)
        resmse_gt.append(float(np.einsum("n...,n...->", residuals, residuals) / total))

    basis = baselines.pca_fit(train.data, min(kmax, min(train.data.shape[0], train.data[0].size)))
    resmse_pca = [
        baselines.pca_residual_mse(basis, test.data, min(j + 1, len(basis.eigenvalues)))
        for j in range(kmax)
    ]

    classify = cfg["mode"] != "projection" and train.labels is not None
    acc = [""] * kmax
    acc_major = [""] * kmax
    if classify:
        y_train = _eval_labels(cfg, train)
        y_test = _eval_labels(cfg, test)
        coeffs_train, _, _ = gt.project_batch(mdl, train.data, kmax)
        counts = np.bincount(y_test)
        majority = float(counts.max() / counts.sum())
        mlp_seed = Rng(cfg["seed"]).spawn(6)
        for j in range(kmax):
            clf = baselines.mlp_fit(
                coeffs_train[:, : j + 1], y_train, cfg["mlp_epochs"], mlp_seed.spawn(j)
            )
            acc[j] = f"{baselines.mlp_accuracy(clf, coeffs_test[:, : j + 1], y_test):.6f}"
            acc_major[j] = f"{majority:.6f}"

    os.makedirs(cfg["out_dir"], exist_ok=True)
    with open(paths["metrics"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["k", "resmse_gtpca", "resmse_pca", "accuracy_gtpca", "accuracy_majority"]
        )
        for j in range(kmax):
            writer.writerow(
                [j + 1, f"{resmse_gt[j]:.12g}", f"{resmse_pca[j]:.12g}", acc[j], acc_major[j]]
            )
    print(f"wrote {paths['metrics']}")
    for j in range(kmax):
        line = f"k={j + 1} resmse={resmse_gt[j]:.4f} pca={resmse_pca[j]:.4f}"
        if classify:
            line += f" acc={acc[j]} majority={acc_major[j]}"
        print(line)
    return 0


def cmd_export(cfg, model_path=None, k=None) -> int:
    paths = _paths(cfg)
    mdl = gt.load_model(model_path or paths["model"])
    test = data.load_dataset(paths["test"])
    k = mdl.k if k is None else int(k)
    if not 0 <= k <= mdl.k:
        raise ValueError(f"export k={k} out of range [0, {mdl.k}]")

    coeffs, tids, residuals = gt.project_batch(mdl, test.data, k)
    recon = test.data - residuals  # projection = input minus residual, exactly
    os.makedirs(cfg["out_dir"], exist_ok=True)
    with open(paths["loadings"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "component", "transform_index", "coeff"])
        for i in range(coeffs.shape[0]):
            for j in range(k):
                writer.writerow([i, j + 1, int(tids[i, j]), f"{coeffs[i, j]:.12g}"])
    data.save_dataset(data.Dataset(recon, test.labels), paths["recon"])
    print(f"wrote {paths['loadings']} and {paths['recon']} (k={k})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gtpca", description="transform-invariant PCA experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gen", "fit", "eval", "export"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="override config out_dir")
        if name in ("eval", "export"):
            p.add_argument("--model", default=None, help="model file (default: out_dir/model.gtpc)")
        if name == "export":
            p.add_argument("--k", type=int, default=None, help="components to export")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg["out_dir"] = args.out
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.model)
        return cmd_export(cfg, args.model, args.k)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"gtpca {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
