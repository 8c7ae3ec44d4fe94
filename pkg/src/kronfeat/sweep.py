"""Accuracy-versus-dimensionality sweeps and their reports.

One sweep runs a single method over a grid of feature dimensionalities with
several repetitions per point: every cell freshly samples the map from a
cell seed derived from (seed, method, nu, repetition), featurizes the train
and test splits, trains a linear SVM, and records test accuracy.  Cells are
independent; results are assembled in sorted order, so reports are
byte-identical regardless of scheduling.  Wall-clock timings are recorded
only when ``record_timing`` is set, because they are the one field that
cannot be reproducible.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import DatasetManifest
from .descriptors import make_descriptor
from .exceptions import ContractError, DataFormatError, DescriptorError
from .maps import FastfoodMap, FourierMap, KronEMap, KronPiMap, TaylorMap, next_pow2
from .mlp import PerceptronMap
from .svm import KernelSVM, LinearSVM
from .validation import check_seed

logger = logging.getLogger(__name__)

REPORT_FORMAT_VERSION = 1

DEFAULT_NUS = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000)
DEFAULT_REPETITIONS = 10

#: Stable ids so cell seeds do not depend on registry ordering.
_METHOD_IDS = {
    "kron_pi": 1,
    "kron_e": 2,
    "fourier": 3,
    "taylor": 4,
    "fastfood": 5,
    "perceptron": 6,
    "exact": 7,
}

ROW_FIELDS = ("method", "nu", "repetition", "seed", "train_time_s", "test_accuracy")
AGG_FIELDS = ("method", "nu", "mean_accuracy", "std_accuracy", "runs")


@dataclass
class ExperimentConfig:
    """Knobs of one sweep; the defaults are the benchmark protocol."""

    method: str
    nus: tuple = DEFAULT_NUS
    repetitions: int = DEFAULT_REPETITIONS
    sigma: float = 1.0
    theta: float = 0.9
    svm_c: float = 1.0
    seed: int = 0
    eps: float | None = None
    record_timing: bool = False
    mlp_epochs: int = 200
    mlp_learn_rate: float = 0.5
    workers: int = 1

    def __post_init__(self):
        if self.method not in _METHOD_IDS:
            raise ContractError(
                f"unknown method {self.method!r}; choose from {sorted(_METHOD_IDS)}"
            )
        self.nus = tuple(int(n) for n in self.nus)
        if not self.nus or list(self.nus) != sorted(self.nus):
            raise ContractError("nus must be a non-empty ascending list")
        if self.repetitions < 1:
            raise ContractError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.workers < 1:
            raise ContractError(f"workers must be >= 1, got {self.workers}")
        check_seed(self.seed)

    def to_dict(self):
        return {
            "method": self.method,
            "nus": list(self.nus),
            "repetitions": self.repetitions,
            "sigma": self.sigma,
            "theta": self.theta,
            "svm_c": self.svm_c,
            "seed": self.seed,
            "eps": self.eps,
            "record_timing": self.record_timing,
            "mlp_epochs": self.mlp_epochs,
            "mlp_learn_rate": self.mlp_learn_rate,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class SweepRow:
    method: str
    nu: int
    repetition: int
    seed: int
    train_time_s: float | None  # None on skipped cells
    test_accuracy: float | None


@dataclass(frozen=True)
class AggregateRow:
    method: str
    nu: int
    mean_accuracy: float | None
    std_accuracy: float | None
    runs: int


@dataclass
class ExperimentReport:
    config: dict
    rows: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)


def cell_seed(seed, method, nu, repetition):
    """Deterministic per-cell seed; independent of execution order."""
    ss = np.random.SeedSequence((check_seed(seed), _METHOD_IDS[method], nu, repetition))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def encode_split(manifest, eps=None):
    """Descriptors and labels for both splits, skipping per-sample failures.

    Skipped samples are logged; more than 10% failures abort with a summary.
    Returns ``(x_train, y_train, x_test, y_test, skipped_labels)``.
    """
    if not isinstance(manifest, DatasetManifest):
        raise ContractError("manifest must be a DatasetManifest")
    manifest.check_supervised()

    def encode(indices):
        mats, labels, skipped = [], [], []
        for i in indices:
            seq = manifest.samples[i]
            try:
                mats.append(make_descriptor(seq, eps=eps))
                labels.append(seq.label)
            except DescriptorError as exc:
                logger.warning("skipping sample %r: %s", seq.label, exc)
                skipped.append(seq.label)
        return mats, labels, skipped

    train_mats, train_labels, train_skipped = encode(manifest.train_indices)
    test_mats, test_labels, test_skipped = encode(manifest.test_indices)
    skipped = train_skipped + test_skipped
    total = len(manifest.train_indices) + len(manifest.test_indices)
    if total and len(skipped) > 0.1 * total:
        raise DataFormatError(
            f"{len(skipped)} of {total} samples failed descriptor encoding; "
            f"first failures: {skipped[:5]}"
        )
    if not train_mats or not test_mats:
        raise DataFormatError("a split is empty after skipping failed samples")
    if set(test_labels) - set(train_labels):
        raise DataFormatError("descriptor failures removed a class from training")
    return (
        np.stack(train_mats),
        np.asarray(train_labels),
        np.stack(test_mats),
        np.asarray(test_labels),
        skipped,
    )


def build_map(method, nu, sigma, theta, seed, mlp_epochs=200, mlp_learn_rate=0.5):
    """Instantiate the feature map an experiment cell needs."""
    if method == "kron_pi":
        return KronPiMap(nu=nu, sigma=sigma, theta=theta, seed=seed)
    if method == "kron_e":
        return KronEMap(nu=nu, sigma=sigma, theta=theta, seed=seed)
    if method == "fourier":
        return FourierMap(nu=nu, sigma=sigma, seed=seed)
    if method == "taylor":
        return TaylorMap(nu=nu, sigma=sigma, theta=theta, seed=seed)
    if method == "fastfood":
        return FastfoodMap(nu=nu, sigma=sigma, seed=seed)
    if method == "perceptron":
        return PerceptronMap(
            nu=nu, max_epochs=mlp_epochs, learn_rate=mlp_learn_rate, seed=seed
        )
    raise ContractError(f"unknown feature-map method {method!r}")


def _run_cell(cfg, data, nu, repetition):
    x_train, y_train, x_test, y_test = data
    seed = cell_seed(cfg.seed, cfg.method, nu, repetition)
    if cfg.method == "fastfood":
        padded = next_pow2(x_train.shape[1] ** 2)
        if nu % padded:
            logger.info(
                "fastfood: skipping nu=%d (needs a multiple of %d)", nu, padded
            )
            return SweepRow(cfg.method, nu, repetition, seed, None, None)
    start = time.perf_counter()
    fmap = build_map(
        cfg.method, nu, cfg.sigma, cfg.theta, seed,
        mlp_epochs=cfg.mlp_epochs, mlp_learn_rate=cfg.mlp_learn_rate,
    )
    fmap.fit(x_train, y_train)
    f_train = fmap.transform(x_train)
    f_test = fmap.transform(x_test)
    clf = LinearSVM(c=cfg.svm_c, seed=seed).fit(f_train, y_train)
    accuracy = float(np.mean(clf.predict(f_test) == y_test))
    elapsed = time.perf_counter() - start
    return SweepRow(
        cfg.method,
        nu,
        repetition,
        seed,
        elapsed if cfg.record_timing else 0.0,
        accuracy,
    )


def run_sweep(manifest, cfg):
    """Run the protocol and return an :class:`ExperimentReport`.

    The exact-kernel reference (``method='exact'``) has no dimensionality
    axis and emits a single row with nu=0.
    """
    x_train, y_train, x_test, y_test, _ = encode_split(manifest, eps=cfg.eps)
    data = (x_train, y_train, x_test, y_test)

    rows = []
    if cfg.method == "exact":
        seed = cell_seed(cfg.seed, "exact", 0, 0)
        start = time.perf_counter()
        clf = KernelSVM(sigma=cfg.sigma, c=cfg.svm_c, seed=seed).fit(x_train, y_train)
        accuracy = float(np.mean(clf.predict(x_test) == y_test))
        elapsed = time.perf_counter() - start
        rows.append(
            SweepRow("exact", 0, 0, seed, elapsed if cfg.record_timing else 0.0, accuracy)
        )
    else:
        cells = [(nu, rep) for nu in cfg.nus for rep in range(cfg.repetitions)]
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                rows = list(
                    pool.map(lambda cell: _run_cell(cfg, data, *cell), cells)
                )
        else:
            rows = [_run_cell(cfg, data, nu, rep) for nu, rep in cells]
    rows.sort(key=lambda r: (r.method, r.nu, r.repetition))

    aggregates = []
    for nu in sorted({r.nu for r in rows}):
        scores = [r.test_accuracy for r in rows if r.nu == nu and r.test_accuracy is not None]
        if scores:
            aggregates.append(
                AggregateRow(
                    cfg.method, nu,
                    float(np.mean(scores)), float(np.std(scores)), len(scores),
                )
            )
        else:
            aggregates.append(AggregateRow(cfg.method, nu, None, None, 0))
    return ExperimentReport(config=cfg.to_dict(), rows=rows, aggregates=aggregates)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _round6(value):
    return None if value is None else round(float(value), 6)


def report_to_csv(report):
    lines = [",".join(ROW_FIELDS)]
    for r in report.rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (r.method, r.nu, r.repetition, r.seed, r.train_time_s, r.test_accuracy)
            )
        )
    lines.append("")
    lines.append("# aggregates")
    lines.append(",".join(AGG_FIELDS))
    for a in report.aggregates:
        lines.append(
            ",".join(
                _fmt(v) for v in (a.method, a.nu, a.mean_accuracy, a.std_accuracy, a.runs)
            )
        )
    return "\n".join(lines) + "\n"


def report_to_dict(report):
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "config": report.config,
        "rows": [
            {
                "method": r.method,
                "nu": r.nu,
                "repetition": r.repetition,
                "seed": r.seed,
                "train_time_s": _round6(r.train_time_s),
                "test_accuracy": _round6(r.test_accuracy),
            }
            for r in report.rows
        ],
        "aggregates": [
            {
                "method": a.method,
                "nu": a.nu,
                "mean_accuracy": _round6(a.mean_accuracy),
                "std_accuracy": _round6(a.std_accuracy),
                "runs": a.runs,
            }
            for a in report.aggregates
        ],
    }


def report_from_dict(doc):
    if doc.get("format_version") != REPORT_FORMAT_VERSION:
        raise DataFormatError(
            f"unsupported report format_version {doc.get('format_version')!r}"
        )
    rows = [
        SweepRow(
            r["method"], int(r["nu"]), int(r["repetition"]), int(r["seed"]),
            r["train_time_s"], r["test_accuracy"],
        )
        for r in doc.get("rows", [])
    ]
    aggregates = [
        AggregateRow(
            a["method"], int(a["nu"]), a["mean_accuracy"], a["std_accuracy"], int(a["runs"])
        )
        for a in doc.get("aggregates", [])
    ]
    return ExperimentReport(config=doc.get("config", {}), rows=rows, aggregates=aggregates)


def emit_report(report, path, fmt="csv"):
    """Write the report with byte-stable formatting (sorted keys, %.6f floats)."""
    if fmt == "csv":
        payload = report_to_csv(report)
    elif fmt == "json":
        payload = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    else:
        raise ContractError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
    return path


def load_report(path):
    """Read back a JSON report written by :func:`emit_report`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid report JSON: {exc}") from exc
    return report_from_dict(doc)
