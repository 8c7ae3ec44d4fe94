"""Dataset manifests, JSON-lines sample files, and synthetic generators.

On disk a dataset is two files next to each other: a JSON manifest holding
the name, format version, split indices, and the samples filename; and a
JSON-lines samples file with one ``{"label": ..., "joints": [[[x, y, z],
...], ...]}`` record per sequence (joints nested as T frames x J joints x 3
coordinates).  Splits are always explicit index lists so published
protocols can be checked in verbatim.

Converters from public skeleton-dataset raw formats are not included; any
format that can be rewritten into these two files is supported.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .descriptors import SkeletonSequence
from .exceptions import ContractError, DataFormatError

MANIFEST_FORMAT_VERSION = 1


@dataclass
class DatasetManifest:
    """A named list of sequences plus disjoint train/test index lists."""

    name: str
    samples: list
    train_indices: list = field(default_factory=list)
    test_indices: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.samples)
        train = set(self.train_indices)
        test = set(self.test_indices)
        for label, idx in (("train", self.train_indices), ("test", self.test_indices)):
            for i in idx:
                if not 0 <= i < n:
                    raise DataFormatError(
                        f"{label} index {i} out of range for {n} samples"
                    )
        if train & test:
            raise DataFormatError(
                f"train/test splits overlap on indices {sorted(train & test)[:5]}"
            )

    def split_sequences(self):
        train = [self.samples[i] for i in self.train_indices]
        test = [self.samples[i] for i in self.test_indices]
        return train, test

    def check_supervised(self):
        """Every class must appear in both splits for a supervised run."""
        train, test = self.split_sequences()
        if not train or not test:
            raise DataFormatError("both splits must be non-empty")
        train_classes = {s.label for s in train}
        test_classes = {s.label for s in test}
        missing = test_classes - train_classes
        if missing:
            raise DataFormatError(
                f"classes {sorted(map(str, missing))} appear only in the test split"
            )


def save_dataset(manifest, manifest_path):
    """Write the manifest JSON and its JSON-lines samples file."""
    manifest_path = os.fspath(manifest_path)
    samples_path = os.path.splitext(manifest_path)[0] + ".jsonl"
    with open(samples_path, "w", encoding="utf-8") as fh:
        for seq in manifest.samples:
            fh.write(
                json.dumps(
                    {
                        "label": seq.label,
                        "root_index": seq.root_index,
                        "joints": seq.joints.tolist(),
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "name": manifest.name,
        "samples_file": os.path.basename(samples_path),
        "split": {
            "train_indices": list(map(int, manifest.train_indices)),
            "test_indices": list(map(int, manifest.test_indices)),
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_dataset(manifest_path):
    """Load and validate a dataset; errors carry file positions or sample ids."""
    manifest_path = os.fspath(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot open manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: invalid manifest JSON: {exc}") from exc
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise DataFormatError(
            f"{manifest_path}: unsupported format_version {doc.get('format_version')!r}"
        )
    for key in ("name", "samples_file", "split"):
        if key not in doc:
            raise DataFormatError(f"{manifest_path}: missing manifest key {key!r}")
    samples_path = os.path.join(os.path.dirname(manifest_path), doc["samples_file"])

    samples = []
    try:
        fh = open(samples_path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot open samples file {samples_path}: {exc}") from exc
    with fh:
        any_line = False
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            any_line = True
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{samples_path}:{lineno}: invalid JSON record: {exc}"
                ) from exc
            if not isinstance(record, dict) or "label" not in record or "joints" not in record:
                raise DataFormatError(
                    f"{samples_path}:{lineno}: record needs 'label' and 'joints'"
                )
            try:
                samples.append(
                    SkeletonSequence(
                        label=record["label"],
                        joints=np.asarray(record["joints"], dtype=np.float64),
                        root_index=int(record.get("root_index", 0)),
                    )
                )
            except (ContractError, ValueError) as exc:
                raise DataFormatError(
                    f"{samples_path}:{lineno}: sample {record.get('label')!r}: {exc}"
                ) from exc
    if not any_line:
        raise DataFormatError(f"{samples_path}: no sample records found")

    split = doc["split"]
    return DatasetManifest(
        name=doc["name"],
        samples=samples,
        train_indices=list(split.get("train_indices", [])),
        test_indices=list(split.get("test_indices", [])),
    )


def synth_dataset(classes, per_class, joints=5, t_range=(30, 60), noise=0.1,
                  seed=0, name="synthetic"):
    """Synthetic skeleton sequences with one smooth motion prototype per class.

    Each class gets a random sinusoidal motion basis (per joint and
    coordinate); samples add i.i.d. Gaussian coordinate noise and draw their
    length T uniformly from ``t_range``, which exercises the temporal-length
    invariance of the descriptors.  The split alternates samples within each
    class (even ranks train, odd ranks test).
    """
    if classes < 2:
        raise ContractError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ContractError(f"per_class must be >= 1, got {per_class}")
    if joints < 2:
        raise ContractError(f"need at least 2 joints, got {joints}")
    t_lo, t_hi = int(t_range[0]), int(t_range[1])
    if t_lo < 2 or t_hi < t_lo:
        raise ContractError(f"invalid t_range {t_range}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    harmonics = 3
    samples = []
    train_idx, test_idx = [], []
    for k in range(classes):
        base = rng.normal(0.0, 1.0, size=(joints, 3))
        amp = rng.normal(0.0, 1.0, size=(joints, 3, harmonics))
        freq = rng.uniform(0.5, 3.0, size=harmonics)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=(joints, 3, harmonics))
        for r in range(per_class):
            t = int(rng.integers(t_lo, t_hi + 1))
            ticks = np.linspace(0.0, 1.0, t)[:, None, None, None]
            waves = np.sin(2.0 * math.pi * freq * ticks + phase)  # (T, J, 3, H)
            coords = base + (amp * waves).sum(axis=3)
            if noise > 0:
                coords = coords + rng.normal(0.0, noise, size=coords.shape)
            idx = len(samples)
            samples.append(SkeletonSequence(label=f"c{k}", joints=coords))
            (train_idx if r % 2 == 0 else test_idx).append(idx)
    return DatasetManifest(
        name=name, samples=samples, train_indices=train_idx, test_indices=test_idx
    )


def radial_descriptors(classes, per_class, dim=4, seed=0, tangent_dim=2,
                       angle_span=(0.15, 0.75), band_fill=0.6):
    """Unit-norm upper-triangular descriptors in concentric angular bands.

    All samples live on the unit Frobenius sphere at a class-specific angle
    to a common center matrix, spreading tangentially only inside a small
    ``tangent_dim``-dimensional subspace.  Classes therefore form concentric
    rings around the center: radially separable for a kernel machine but not
    linearly, because middle rings sit between two thresholds of the same
    linear functional.

    Returns ``(X, labels)`` with X of shape (classes * per_class, dim, dim).
    """
    if classes < 2:
        raise ContractError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ContractError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    triu = np.triu_indices(dim)
    if not 1 <= tangent_dim <= len(triu[0]) - 1:
        raise ContractError(f"tangent_dim must be in [1, {len(triu[0]) - 1}]")

    def upper(vec):
        m = np.zeros((dim, dim))
        m[triu] = vec
        return m

    center = upper(rng.normal(size=len(triu[0])))
    center /= np.linalg.norm(center)
    basis = []
    while len(basis) < tangent_dim:
        m = upper(rng.normal(size=len(triu[0])))
        m -= np.sum(m * center) * center
        for b in basis:
            m -= np.sum(m * b) * b
        norm = np.linalg.norm(m)
        if norm > 1e-6:
            basis.append(m / norm)

    lo = angle_span[0] * math.pi
    hi = angle_span[1] * math.pi
    edges = np.linspace(lo, hi, classes + 1)
    width = (edges[1] - edges[0]) * band_fill

    out = np.empty((classes * per_class, dim, dim))
    labels = np.empty(classes * per_class, dtype=np.int64)
    i = 0
    for k in range(classes):
        mid = 0.5 * (edges[k] + edges[k + 1])
        for _ in range(per_class):
            angle = rng.uniform(mid - width / 2.0, mid + width / 2.0)
            coeffs = rng.normal(size=tangent_dim)
            coeffs /= np.linalg.norm(coeffs)
            tangent = sum(c * b for c, b in zip(coeffs, basis))
            out[i] = math.cos(angle) * center + math.sin(angle) * tangent
            labels[i] = k
            i += 1
    return out, labels
