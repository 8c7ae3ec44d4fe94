import json

import numpy as np
import pytest

from kronfeat import (
    DataFormatError,
    DatasetManifest,
    DescriptorEncoder,
    SkeletonSequence,
    load_dataset,
    radial_descriptors,
    save_dataset,
    synth_dataset,
)


def tiny_manifest():
    rng = np.random.default_rng(0)
    samples = [
        SkeletonSequence(label="a", joints=rng.normal(size=(5, 3, 3))),
        SkeletonSequence(label="b", joints=rng.normal(size=(7, 3, 3))),
    ]
    return DatasetManifest("tiny", samples, train_indices=[0], test_indices=[1])


class TestManifest:
    def test_overlapping_split_rejected(self):
        rng = np.random.default_rng(0)
        samples = [SkeletonSequence("a", rng.normal(size=(4, 2, 3)))] * 2
        with pytest.raises(DataFormatError):
            DatasetManifest("x", samples, train_indices=[0, 1], test_indices=[1])

    def test_out_of_range_index_rejected(self):
        rng = np.random.default_rng(0)
        samples = [SkeletonSequence("a", rng.normal(size=(4, 2, 3)))]
        with pytest.raises(DataFormatError):
            DatasetManifest("x", samples, train_indices=[3], test_indices=[])

    def test_supervised_check(self):
        rng = np.random.default_rng(0)
        samples = [
            SkeletonSequence("a", rng.normal(size=(4, 2, 3))),
            SkeletonSequence("b", rng.normal(size=(4, 2, 3))),
        ]
        man = DatasetManifest("x", samples, train_indices=[0], test_indices=[1])
        with pytest.raises(DataFormatError, match="b"):
            man.check_supervised()


class TestRoundTrip:
    def test_save_load(self, tmp_path):
        man = tiny_manifest()
        path = save_dataset(man, tmp_path / "ds.json")
        loaded = load_dataset(path)
        assert loaded.name == "tiny"
        assert len(loaded.samples) == 2
        assert loaded.train_indices == [0]
        assert loaded.test_indices == [1]
        for orig, back in zip(man.samples, loaded.samples):
            assert back.label == orig.label
            assert np.array_equal(back.joints, orig.joints)

    def test_empty_samples_file(self, tmp_path):
        path = save_dataset(tiny_manifest(), tmp_path / "ds.json")
        (tmp_path / "ds.jsonl").write_text("")
        with pytest.raises(DataFormatError, match="no sample records"):
            load_dataset(path)

    def test_invalid_json_line_reports_position(self, tmp_path):
        path = save_dataset(tiny_manifest(), tmp_path / "ds.json")
        lines = (tmp_path / "ds.jsonl").read_text().splitlines()
        lines[1] = "{broken"
        (tmp_path / "ds.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match=":2"):
            load_dataset(path)

    def test_single_frame_sample_names_offender(self, tmp_path):
        path = save_dataset(tiny_manifest(), tmp_path / "ds.json")
        bad = json.dumps({"label": "bad", "joints": [[[0, 0, 0], [1, 1, 1]]]})
        with open(tmp_path / "ds.jsonl", "a") as fh:
            fh.write(bad + "\n")
        with pytest.raises(DataFormatError, match="bad"):
            load_dataset(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_dataset(tmp_path / "nope.json")

    def test_bad_manifest_version(self, tmp_path):
        path = save_dataset(tiny_manifest(), tmp_path / "ds.json")
        doc = json.loads(open(path).read())
        doc["format_version"] = 17
        open(path, "w").write(json.dumps(doc))
        with pytest.raises(DataFormatError, match="format_version"):
            load_dataset(path)


class TestSynth:
    def test_determinism(self):
        a = synth_dataset(3, 4, joints=3, seed=5)
        b = synth_dataset(3, 4, joints=3, seed=5)
        for sa, sb in zip(a.samples, b.samples):
            assert np.array_equal(sa.joints, sb.joints)

    def test_split_is_stratified_and_disjoint(self):
        man = synth_dataset(3, 6, joints=3, seed=1)
        train_labels = {man.samples[i].label for i in man.train_indices}
        test_labels = {man.samples[i].label for i in man.test_indices}
        assert train_labels == test_labels == {"c0", "c1", "c2"}
        assert not set(man.train_indices) & set(man.test_indices)

    def test_variable_lengths(self):
        man = synth_dataset(2, 10, joints=3, t_range=(10, 50), seed=2)
        lengths = {s.n_frames for s in man.samples}
        assert len(lengths) > 1
        assert all(10 <= t <= 50 for t in lengths)

    def test_noiseless_classes_cluster(self):
        man = synth_dataset(3, 6, joints=4, t_range=(30, 50), noise=0.0, seed=1)
        X = DescriptorEncoder().transform(man.samples)
        y = np.array([s.label for s in man.samples])
        cents = {c: X[y == c].reshape(-1, X.shape[1] ** 2).mean(axis=0)
                 for c in np.unique(y)}
        pred = [
            min(cents, key=lambda c: np.linalg.norm(x.ravel() - cents[c])) for x in X
        ]
        assert np.mean(np.array(pred) == y) == 1.0


class TestRadial:
    def test_shapes_and_unit_norm(self):
        X, y = radial_descriptors(4, 10, dim=4, seed=0)
        assert X.shape == (40, 4, 4)
        norms = np.linalg.norm(X.reshape(40, -1), axis=1)
        assert np.abs(norms - 1.0).max() < 1e-12
        assert np.array_equal(np.sort(np.unique(y)), np.arange(4))

    def test_upper_triangular(self):
        X, _ = radial_descriptors(2, 5, dim=4, seed=1)
        for m in X:
            assert np.array_equal(np.tril(m, -1), np.zeros_like(m))

    def test_classes_ordered_by_center_similarity(self):
        X, y = radial_descriptors(3, 50, dim=4, seed=2)
        sims = []
        # recover the center direction as the mean of the innermost class
        center = X[y == 0].mean(axis=0)
        center /= np.linalg.norm(center)
        for k in range(3):
            sims.append(np.mean(np.sum(X[y == k] * center, axis=(1, 2))))
        assert sims[0] > sims[1] > sims[2]

    def test_determinism(self):
        a, _ = radial_descriptors(3, 5, seed=9)
        b, _ = radial_descriptors(3, 5, seed=9)
        assert np.array_equal(a, b)
