"""Benchmark command line.

Subcommands: ``synth`` (dataset generator), ``descriptors`` (descriptor
cache), ``sweep`` (the accuracy-vs-dimensionality protocol), ``validate``
(statistical verdicts on the map estimators), ``train`` and ``predict``
(single-model workflows).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure,
4 validation-verdict failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from .datasets import load_dataset, save_dataset, synth_dataset
from .descriptors import make_descriptor
from .exceptions import ContractError, DataFormatError, NumericFailure
from .maps import MAP_KINDS, load_map, pair_product_samples, rbf_kernel
from .stats import bound_report, mc_bias_variance, seeded_unit_pairs, variance_bound
from .svm import KernelSVM, LinearSVM, load_classifier
from .sweep import (
    DEFAULT_REPETITIONS,
    ExperimentConfig,
    build_map,
    emit_report,
    encode_split,
    run_sweep,
)

MODEL_DOC_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse variant reporting usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser, *names):
    if "seed" in names:
        parser.add_argument("--seed", type=int, default=0)
    if "sigma" in names:
        parser.add_argument("--sigma", type=float, default=1.0)
    if "theta" in names:
        parser.add_argument("--theta", type=float, default=0.9)
    if "eps" in names:
        parser.add_argument("--eps", type=float, default=None,
                            help="eigenvalue regularizer for the matrix log")
    if "out" in names:
        parser.add_argument("--out", required=True, help="output file path")
    if "format" in names:
        parser.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = _Parser(prog="kronfeat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic skeleton dataset")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--joints", type=int, default=5)
    p.add_argument("--t-min", type=int, default=30)
    p.add_argument("--t-max", type=int, default=60)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--name", default="synthetic")
    _add_common(p, "seed", "out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("descriptors", help="encode a dataset into a descriptor cache")
    p.add_argument("--data", required=True, help="dataset manifest path")
    _add_common(p, "eps", "out")
    p.set_defaults(func=cmd_descriptors)

    p = sub.add_parser("sweep", help="run the accuracy-vs-dimensionality protocol")
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--data", help="dataset manifest path (overrides config)")
    p.add_argument("--method", choices=sorted(set(MAP_KINDS) | {"exact"}))
    p.add_argument("--nu", help="comma-separated feature sizes (default protocol grid)")
    p.add_argument("--reps", type=int, help=f"repetitions (default {DEFAULT_REPETITIONS})")
    p.add_argument("--svm-c", type=float, default=None)
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock timings (breaks byte-reproducibility)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    _add_common(p, "out", "format")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the statistical verdict suite")
    p.add_argument("--reps", type=int, default=200_000,
                   help="Monte-Carlo resamplings per pair")
    p.add_argument("--pairs", type=int, default=5)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--out", default=None, help="write verdicts JSON here")
    _add_common(p, "seed", "sigma", "theta")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a feature map plus SVM on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True,
                   choices=sorted(set(MAP_KINDS) | {"exact"}))
    p.add_argument("--nu", type=int, default=1000)
    p.add_argument("--svm-c", type=float, default=1.0)
    _add_common(p, "seed", "sigma", "theta", "eps", "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict a dataset with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    _add_common(p, "out", "format")
    p.set_defaults(func=cmd_predict)

    return parser


def cmd_synth(args):
    manifest = synth_dataset(
        classes=args.classes,
        per_class=args.per_class,
        joints=args.joints,
        t_range=(args.t_min, args.t_max),
        noise=args.noise,
        seed=args.seed,
        name=args.name,
    )
    path = save_dataset(manifest, args.out)
    print(f"wrote {len(manifest.samples)} samples to {path}")
    return 0


def cmd_descriptors(args):
    manifest = load_dataset(args.data)
    mats, labels, kept = [], [], []
    failures = []
    for i, seq in enumerate(manifest.samples):
        try:
            mats.append(make_descriptor(seq, eps=args.eps))
            labels.append(str(seq.label))
            kept.append(i)
        except DataFormatError as exc:
            failures.append(str(seq.label))
            logging.getLogger(__name__).warning("skipping sample %d: %s", i, exc)
    if not mats:
        raise DataFormatError("no sample could be encoded")
    if len(failures) > 0.1 * len(manifest.samples):
        raise DataFormatError(
            f"{len(failures)} of {len(manifest.samples)} samples failed encoding"
        )
    np.savez(
        args.out,
        descriptors=np.stack(mats),
        labels=np.asarray(labels),
        source_index=np.asarray(kept, dtype=np.int64),
        train_indices=np.asarray(manifest.train_indices, dtype=np.int64),
        test_indices=np.asarray(manifest.test_indices, dtype=np.int64),
    )
    print(f"encoded {len(mats)} descriptors ({len(failures)} skipped) -> {args.out}")
    return 0


def _load_config_file(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except Exception as exc:
            raise DataFormatError(f"{path}: invalid TOML: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON config: {exc}") from exc


def cmd_sweep(args):
    doc = _load_config_file(args.config) if args.config else {}
    data_path = args.data or doc.pop("dataset", None)
    if not data_path:
        raise ContractError("sweep needs --data or a 'dataset' entry in --config")
    if args.method:
        doc["method"] = args.method
    if "method" not in doc:
        raise ContractError("sweep needs --method or a 'method' entry in --config")
    if args.nu:
        doc["nus"] = [int(v) for v in str(args.nu).split(",") if v.strip()]
    if args.reps is not None:
        doc["repetitions"] = args.reps
    for key, value in (
        ("sigma", args.sigma), ("theta", args.theta), ("seed", args.seed),
        ("svm_c", args.svm_c), ("eps", args.eps), ("workers", args.workers),
    ):
        if value is not None:
            doc[key] = value
    if args.timing:
        doc["record_timing"] = True
    try:
        cfg = ExperimentConfig(**doc)
    except TypeError as exc:
        raise ContractError(f"bad experiment config: {exc}") from exc
    manifest = load_dataset(data_path)
    report = run_sweep(manifest, cfg)
    emit_report(report, args.out, fmt=args.format)
    done = sum(1 for r in report.rows if r.test_accuracy is not None)
    print(f"wrote {len(report.rows)} rows ({done} completed cells) to {args.out}")
    return 0


def cmd_validate(args):
    verdicts = []
    pairs = seeded_unit_pairs(args.pairs, args.dim, args.seed)
    for offset, kind in enumerate(("kron_pi", "kron_e", "taylor")):
        bound = (
            variance_bound(kind, 1, args.sigma, args.theta)
            if kind in ("kron_pi", "kron_e")
            else None
        )
        for i, (x, y) in enumerate(pairs):
            def sampler(a, b, count, rng, kind=kind):
                return pair_product_samples(
                    kind, a, b, count, rng, sigma=args.sigma, theta=args.theta
                )
            verdicts.append(
                mc_bias_variance(
                    sampler, x, y, args.reps, args.sigma,
                    bound=bound, seed=args.seed + i + 1000 * (offset + 1),
                    label=f"{kind}/pair{i}",
                ).to_dict()
            )
    # Fourier converges in nu rather than in resamplings; check one wide map.
    fourier_checks = []
    for i, (x, y) in enumerate(pairs):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, i)))
        est = float(
            np.mean(
                pair_product_samples(
                    "fourier", x, y, 50_000, rng, sigma=args.sigma
                )
            )
        )
        target = rbf_kernel(x, y, args.sigma)
        fourier_checks.append(
            {
                "label": f"fourier/pair{i}",
                "estimate": est,
                "target": target,
                "abs_error": abs(est - target),
                "ok": abs(est - target) <= 0.02,
            }
        )
    report = {
        "bounds": bound_report(args.sigma, args.theta, nu=1000).to_dict(),
        "unbiasedness": verdicts,
        "fourier_convergence": fourier_checks,
    }
    ok = all(v["unbiased"] for v in verdicts) and all(
        v["within_bound"] in (None, True) for v in verdicts
    ) and all(c["ok"] for c in fourier_checks)
    report["all_ok"] = ok
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0 if ok else 4


def cmd_train(args):
    manifest = load_dataset(args.data)
    x_train, y_train, x_test, y_test, _ = encode_split(manifest, eps=args.eps)
    doc = {"format_version": MODEL_DOC_VERSION, "eps": args.eps}
    if args.method == "exact":
        clf = KernelSVM(sigma=args.sigma, c=args.svm_c, seed=args.seed)
        clf.fit(x_train, y_train)
        test_acc = float(np.mean(clf.predict(x_test) == y_test))
        doc["feature_map"] = None
        doc["classifier"] = clf.to_dict()
    else:
        fmap = build_map(args.method, args.nu, args.sigma, args.theta, args.seed)
        fmap.fit(x_train, y_train)
        clf = LinearSVM(c=args.svm_c, seed=args.seed)
        clf.fit(fmap.transform(x_train), y_train)
        test_acc = float(np.mean(clf.predict(fmap.transform(x_test)) == y_test))
        doc["feature_map"] = fmap.to_dict()
        doc["classifier"] = clf.to_dict()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"test accuracy {test_acc:.4f}; model -> {args.out}")
    return 0


def cmd_predict(args):
    with open(args.model, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.model}: invalid model JSON: {exc}") from exc
    if doc.get("format_version") != MODEL_DOC_VERSION:
        raise DataFormatError(
            f"unsupported model document version {doc.get('format_version')!r}"
        )
    manifest = load_dataset(args.data)
    if args.split == "train":
        indices = list(manifest.train_indices)
    elif args.split == "test":
        indices = list(manifest.test_indices)
    else:
        indices = list(range(len(manifest.samples)))
    if not indices:
        raise DataFormatError(f"split {args.split!r} is empty")
    mats, labels = [], []
    for i in indices:
        mats.append(make_descriptor(manifest.samples[i], eps=doc.get("eps")))
        labels.append(manifest.samples[i].label)
    x = np.stack(mats)
    clf = load_classifier(doc["classifier"])
    if doc.get("feature_map") is None:
        predictions = clf.predict(x)
    else:
        fmap = load_map(doc["feature_map"])
        predictions = clf.predict(fmap.transform(x))
    accuracy = float(np.mean(predictions == np.asarray(labels, dtype=object)))

    rows = [
        {"index": int(i), "label": str(l), "prediction": str(p)}
        for i, l, p in zip(indices, labels, predictions)
    ]
    if args.format == "json":
        payload = json.dumps(
            {"accuracy": round(accuracy, 6), "rows": rows}, indent=2, sort_keys=True
        ) + "\n"
    else:
        lines = ["index,label,prediction"]
        lines += [f"{r['index']},{r['label']},{r['prediction']}" for r in rows]
        payload = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(payload)
    print(f"accuracy {accuracy:.4f} on {len(rows)} samples -> {args.out}")
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
