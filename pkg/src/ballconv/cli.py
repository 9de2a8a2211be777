"""Command-line interface: moment fitting, verification, symmetry analysis,
training, retrieval and experiment data/figure export.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
Every subcommand is deterministic given ``--seed``; the seed is printed in
each report header.  ``--threads`` (default: ``BALLCONV_THREADS`` or the
hardware count) sizes the worker pool used for per-shape feature
extraction; outputs do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import network, shapes, verify
from .moments import (
    complex_to_real,
    fit_moments,
    quadrature_moments,
    real_to_complex,
    reconstruction_error,
    save_moments_binary,
    save_moments_json,
)
from .symmetry import TETRAHEDRAL_AXES, Axis, normalized_symmetry, symmetry_power


def _default_threads() -> int:
    env = os.environ.get("BALLCONV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _read_config(path: str) -> dict:
    """Key-value config file: one ``key = value`` per line, # comments."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


# ---------------------------------------------------------------------------
# input loading
# ---------------------------------------------------------------------------

def _load_shape_samples(path: Path, k_samples: int, rng: np.random.Generator):
    suffix = path.suffix.lower()
    if suffix == ".off":
        mesh = shapes.load_off(path)
        pts = shapes.sample_surface(mesh, k_samples, rng)
        values = None
    elif suffix == ".obj":
        mesh = shapes.load_obj(path)
        pts = shapes.sample_surface(mesh, k_samples, rng)
        values = None
    else:
        pts, values = shapes.load_points(path)
    pts, _ = shapes.normalize_to_ball(pts)
    if values is None:
        return shapes.surface_values(pts)
    return shapes.cloud_to_samples(pts, values)


def _load_dataset(spec: str, k_samples: int, seed: int) -> shapes.LabeledDataset:
    if spec.startswith("synth:"):
        return shapes.synth_classes(int(spec.split(":", 1)[1]), k_points=k_samples)
    if spec == "synth":
        return shapes.synth_classes(seed, k_points=k_samples)
    root = Path(spec)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {spec}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subdirectories under {spec}")
    rng = np.random.default_rng(seed)
    train: list[shapes.LabeledShape] = []
    test: list[shapes.LabeledShape] = []
    names = []
    for label, cdir in enumerate(class_dirs):
        names.append(cdir.name)
        splits = {"train": train, "test": test}
        if (cdir / "train").is_dir() or (cdir / "test").is_dir():
            groups = [(cdir / s, splits[s]) for s in ("train", "test") if (cdir / s).is_dir()]
        else:
            files = sorted(p for p in cdir.iterdir()
                           if p.suffix.lower() in (".off", ".obj", ".csv", ".json", ".txt"))
            cut = max(1, int(0.8 * len(files)))
            groups = [((files[:cut]), train), ((files[cut:]), test)]
        for src, bucket in groups:
            files = sorted(src.iterdir()) if isinstance(src, Path) else src
            for f in files:
                if f.suffix.lower() not in (".off", ".obj", ".csv", ".json", ".txt"):
                    continue
                bucket.append(shapes.LabeledShape(
                    f.stem, label, _load_shape_samples(f, k_samples, rng)))
    return shapes.LabeledDataset(train, test, tuple(names))


def _print_header(args) -> None:
    print(f"# seed: {args.seed}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_moments(args) -> int:
    _print_header(args)
    rng = np.random.default_rng(args.seed)
    samples = _load_shape_samples(Path(args.input), args.k_samples, rng)
    if args.method == "lsq":
        c = fit_moments(samples, args.n_order, pinv_iters=args.pinv_iters)
        err_raw, err_pct = reconstruction_error(c, samples)
    else:
        om = quadrature_moments(samples.with_mc_weights(), args.n_order)
        err_raw, err_pct = reconstruction_error(om, samples)
        c = complex_to_real(om)
    if args.out:
        if args.format == "binary" or (args.format == "auto" and args.out.endswith(".bin")):
            save_moments_binary(args.out, c)
        else:
            save_moments_json(args.out, c)
        print(f"wrote {args.out}")
    print(f"method: {args.method}  N: {args.n_order}  K: {len(samples)}")
    print(f"reconstruction error: {err_raw:.6g} ({err_pct:.4f}% of mean |f|)")
    return 0


def cmd_verify(args) -> int:
    _print_header(args)
    names = list(verify.SUITE_NAMES) if args.suite == "all" else [args.suite]
    report = verify.run_suites(names, seed=args.seed, corrupt_q=args.corrupt_q)
    print(report.format_table())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"wrote {args.out}")
    return 0 if report.all_passed else 1


def _axes_from_arg(spec: str) -> list[Axis]:
    if spec == "tetra":
        return [Axis(a, b) for a, b in TETRAHEDRAL_AXES]
    if spec.startswith("grid:"):
        na, nb = (int(x) for x in spec[5:].split("x"))
        return [Axis(2 * np.pi * i / na, np.pi * (j + 0.5) / nb)
                for i in range(na) for j in range(nb)]
    raise ValueError(f"bad axes spec {spec!r}; use 'tetra' or 'grid:AxB'")


def cmd_symmetry(args) -> int:
    _print_header(args)
    rng = np.random.default_rng(args.seed)
    samples = _load_shape_samples(Path(args.input), args.k_samples, rng)
    if args.method == "quadrature":
        # surface-measure moments: the value transform v = r fits a purely
        # radial function, so the least-squares route is blind to where the
        # samples sit; projection moments encode the support geometry.
        f = quadrature_moments(samples.with_mc_weights(), args.n_order)
    else:
        f = real_to_complex(fit_moments(samples, args.n_order, pinv_iters=args.pinv_iters))
    axes = _axes_from_arg(args.axes)
    rows = [(ax.alpha, ax.beta, symmetry_power(f, ax), normalized_symmetry(f, ax))
            for ax in axes]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["axis_alpha", "axis_beta", "power", "normalized"])
        for row in rows:
            writer.writerow([f"{row[0]:.10g}", f"{row[1]:.10g}",
                             f"{row[2]:.12g}", f"{row[3]:.12g}"])
    finally:
        if args.out:
            out.close()
            print(f"wrote {args.out}")
    return 0


def _pipeline_config(args, n_classes: int) -> network.PipelineConfig:
    return network.PipelineConfig(
        N=args.n_order, n_kernels=args.kernels, n_shells=args.shells,
        n_classes=n_classes, conv=args.conv, features=args.features,
        batch_size=args.batch_size)


def cmd_train(args) -> int:
    _print_header(args)
    data = _load_dataset(args.data, args.k_samples, args.seed)
    cfg = _pipeline_config(args, len(data.class_names))
    print(f"dataset: {len(data.train)} train / {len(data.test)} test shapes, "
          f"classes {data.class_names}")
    feats_train = network.extract_features(data.train, cfg, threads=args.threads)
    feats_test = network.extract_features(data.test, cfg, threads=args.threads)
    y_train = np.array([s.label for s in data.train])
    y_test = np.array([s.label for s in data.test])
    params, history = network.train(
        feats_train, y_train, cfg, seed=args.seed, epochs=args.epochs,
        test_features=feats_test, test_labels=y_test)
    network_path = args.out
    if network_path.endswith(".bin") or network_path.endswith(".ckpt"):
        network.save_checkpoint_binary(network_path, cfg, params)
    else:
        network.save_checkpoint_json(network_path, cfg, params)
    hist_path = args.history or (str(Path(network_path).with_suffix("")) + "-history.json")
    with open(hist_path, "w") as fh:
        json.dump({"seed": args.seed, "loss": history.loss,
                   "train_accuracy": history.train_accuracy,
                   "test_accuracy": history.test_accuracy}, fh, indent=2)
    print(f"wrote {network_path} and {hist_path}")
    print(f"final train accuracy: {history.train_accuracy[-1]:.4f}")
    if history.test_accuracy:
        print(f"final test accuracy:  {history.test_accuracy[-1]:.4f}")
    return 0


def _load_checkpoint(path: str):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == network.MAGIC_CHECKPOINT:
        return network.load_checkpoint_binary(path)
    return network.load_checkpoint_json(path)


def cmd_classify(args) -> int:
    _print_header(args)
    cfg, params = _load_checkpoint(args.ckpt)
    data = _load_dataset(args.data, args.k_samples, args.seed)
    split = data.test if args.split == "test" else data.train
    feats = network.extract_features(split, cfg, threads=args.threads)
    labels = np.array([s.label for s in split])
    acc = network.evaluate(feats, labels, params, cfg)
    if args.verbose:
        for s, feat in zip(split, feats):
            logits, _ = network.forward(feat, params, cfg)
            print(f"{s.shape_id}: predicted {int(np.argmax(logits))} true {s.label}")
    print(f"accuracy on {args.split} split: {acc:.10f} ({len(split)} shapes)")
    return 0


def cmd_descriptor(args) -> int:
    _print_header(args)
    cfg, params = _load_checkpoint(args.ckpt)
    data = _load_dataset(args.data, args.k_samples, args.seed)
    split = data.test if args.split == "test" else data.train
    feats = network.extract_features(split, cfg, threads=args.threads)
    records = []
    for s, feat in zip(split, feats):
        _, desc = network.forward(feat, params, cfg)
        records.append({"id": s.shape_id, "label": s.label, "vector": desc})
    network.save_descriptor_store(args.out, records)
    print(f"wrote {len(records)} descriptors to {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    _print_header(args)
    store = network.load_descriptor_store(args.store)
    if not store:
        raise ValueError(f"descriptor store {args.store} is empty")
    vectors = np.stack([rec["vector"] for rec in store])
    labels = np.array([rec["label"] for rec in store])
    if args.query:
        ids = [rec["id"] for rec in store]
        if args.query not in ids:
            raise ValueError(f"query id {args.query!r} not found in store")
        qi = ids.index(args.query)
        order, sims = network.cosine_rank(vectors[qi], vectors)
        print(f"query: {args.query} (label {labels[qi]})")
        for rank, idx in enumerate(order[: args.top], start=1):
            print(f"{rank:3d}. {ids[idx]:24s} label={labels[idx]} similarity={sims[idx]:.6f}")
    nn = network.nn_accuracy(vectors, labels)
    mean_ap = network.mean_average_precision(vectors, labels)
    print(f"nearest-neighbour accuracy: {nn:.4f}")
    print(f"mAP: {mean_ap:.4f}")
    return 0


# ---------------------------------------------------------------------------
# experiment export (CSV + rendered figure)
# ---------------------------------------------------------------------------

def _write_experiment_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "param", "value"])
        writer.writerows(rows)


def _recon_suite(seed: int, k_samples: int, n_shapes: int = 10):
    data = shapes.synth_classes(seed, n_train=0, n_test=(n_shapes + 2) // 3, k_points=k_samples)
    return data.test[:n_shapes]


def recon_vs_n_series(seed: int, k_samples: int = 1536,
                      orders=(2, 4, 6, 8), n_shapes: int = 10):
    """Mean reconstruction error of both estimators at each order."""
    suite = _recon_suite(seed, k_samples, n_shapes)
    series = {"lsq": [], "quadrature": []}
    for n in orders:
        lsq_errs, quad_errs = [], []
        for shape in suite:
            c = fit_moments(shape.samples, n)
            lsq_errs.append(reconstruction_error(c, shape.samples)[0])
            om = quadrature_moments(shape.samples.with_mc_weights(), n)
            quad_errs.append(reconstruction_error(om, shape.samples)[0])
        series["lsq"].append(float(np.mean(lsq_errs)))
        series["quadrature"].append(float(np.mean(quad_errs)))
    return list(orders), series


def dataloss_series(ckpt_path: str, data_spec: str, seed: int, k_samples: int,
                    threads: int = 1, fractions=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5)):
    cfg, params = _load_checkpoint(ckpt_path)
    data = _load_dataset(data_spec, k_samples, seed)
    labels = np.array([s.label for s in data.test])
    accs = []
    for frac in fractions:
        rng = np.random.default_rng(seed + 1)
        if frac <= 0.0:
            damaged = data.test
        else:
            damaged = [shapes.LabeledShape(s.shape_id, s.label,
                                           shapes.remove_points(s.samples, frac, rng))
                       for s in data.test]
        feats = network.extract_features(damaged, cfg, threads=threads)
        accs.append(network.evaluate(feats, labels, params, cfg))
    return list(fractions), accs


def cmd_plot_data(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _print_header(args)
    if args.experiment == "dataloss" and not args.ckpt:
        raise FileNotFoundError("dataloss experiment requires --ckpt")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.experiment == "recon-vs-n":
        orders, series = recon_vs_n_series(args.seed, args.k_samples)
        rows = [("recon-vs-n", f"{method}:{n}", f"{err:.10g}")
                for method, errs in series.items() for n, err in zip(orders, errs)]
        csv_path = out_dir / "recon-vs-n.csv"
        _write_experiment_csv(csv_path, rows)
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for method, errs in series.items():
            ax.plot(orders, errs, marker="o", label=method)
        ax.set_xlabel("maximum order n")
        ax.set_ylabel("mean reconstruction error")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        png_path = out_dir / "recon-vs-n.png"
        fig.savefig(png_path, dpi=150)
        plt.close(fig)
    else:
        fractions, accs = dataloss_series(args.ckpt, args.data, args.seed,
                                          args.k_samples, threads=args.threads)
        rows = [("dataloss", f"{int(100 * f)}", f"{a:.10g}")
                for f, a in zip(fractions, accs)]
        csv_path = out_dir / "dataloss.csv"
        _write_experiment_csv(csv_path, rows)
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.plot([100 * f for f in fractions], accs, marker="o")
        ax.set_xlabel("points removed (%)")
        ax.set_ylabel("test accuracy")
        ax.set_ylim(0, 1.02)
        fig.tight_layout()
        png_path = out_dir / "dataloss.png"
        fig.savefig(png_path, dpi=150)
        plt.close(fig)
    print(f"wrote {csv_path} and {png_path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ballconv",
        description="Moment fitting, volumetric convolution and symmetry analysis "
                    "of functions on the unit ball.")
    parser.add_argument("--config", help="key = value defaults file (flags win)")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=_default_threads())

    fit_opts = argparse.ArgumentParser(add_help=False)
    fit_opts.add_argument("--n-order", type=int, default=6)
    fit_opts.add_argument("--k-samples", type=int, default=4096)
    fit_opts.add_argument("--pinv-iters", type=int, default=30)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common, fit_opts],
                       help="estimate moments of a shape file")
    p.add_argument("input")
    p.add_argument("--method", choices=("lsq", "quadrature"), default="lsq")
    p.add_argument("--out")
    p.add_argument("--format", choices=("auto", "json", "binary"), default="auto")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", choices=verify.SUITE_NAMES + ("all",), default="all")
    p.add_argument("--out", help="write the machine-readable report here")
    p.add_argument("--corrupt-q", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("symmetry", parents=[common, fit_opts],
                       help="per-axis symmetry values as CSV")
    p.add_argument("input")
    p.add_argument("--axes", default="tetra", help="'tetra' or 'grid:AxB'")
    p.add_argument("--method", choices=("quadrature", "lsq"), default="quadrature",
                   help="moment route; quadrature sees the sample support")
    p.add_argument("--out")
    p.set_defaults(func=cmd_symmetry)

    train_opts = argparse.ArgumentParser(add_help=False)
    train_opts.add_argument("--data", default="synth")
    train_opts.add_argument("--k-samples", type=int, default=1536)
    train_opts.add_argument("--n-order", type=int, default=6)
    train_opts.add_argument("--kernels", type=int, default=16)
    train_opts.add_argument("--shells", type=int, default=10)
    train_opts.add_argument("--conv", choices=("volumetric", "spherical"), default="volumetric")
    train_opts.add_argument("--features", choices=("conv", "axial-symmetry"), default="conv")
    train_opts.add_argument("--batch-size", type=int, default=2)

    p = sub.add_parser("train", parents=[common, train_opts], help="train the toy classifier")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--out", default="checkpoint.json")
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common, train_opts],
                       help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("descriptor", parents=[common, train_opts],
                       help="write a descriptor store for a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", default="descriptors.jsonl")
    p.set_defaults(func=cmd_descriptor)

    p = sub.add_parser("retrieve", parents=[common], help="rank a descriptor store")
    p.add_argument("--store", required=True)
    p.add_argument("--query", help="shape id inside the store")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("plot-data", parents=[common, train_opts],
                       help="emit experiment CSV series and rendered figures")
    p.add_argument("--experiment", choices=("recon-vs-n", "dataloss"), required=True)
    p.add_argument("--out-dir", default="plots")
    p.add_argument("--ckpt")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    # config file sets subparser defaults before the real parse, so flags win
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    if config_path:
        try:
            defaults = {k: _coerce(v) for k, v in _read_config(config_path).items()}
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sp in action.choices.values():
                    sp.set_defaults(**{k: v for k, v in defaults.items()
                                       if any(a.dest == k for a in sp._actions)})

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, shapes.MeshParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
