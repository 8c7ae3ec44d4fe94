import numpy as np
import pytest

from kronfeat import (
    ContractError,
    KernelSVM,
    KronPiMap,
    LinearSVM,
    load_classifier,
    radial_descriptors,
    rbf_gram,
)


def blobs(per_class=20, gap=4.0, seed=0, classes=2, dim=3):
    rng = np.random.default_rng(seed)
    x, y = [], []
    for k in range(classes):
        center = np.zeros(dim)
        center[k % dim] = gap * (1 + k // dim)
        x.append(center + 0.3 * rng.normal(size=(per_class, dim)))
        y.extend([k] * per_class)
    return np.vstack(x), np.array(y)


class TestLinearSVM:
    def test_separable_one_dimensional(self):
        x = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
        y = np.array(["A", "A", "A", "B", "B", "B"])
        clf = LinearSVM(c=1.0, seed=0).fit(x, y)
        assert np.all(clf.predict(x) == y)

    def test_identical_features_fall_back_to_majority(self):
        x = np.tile([1.0, 2.0], (7, 1))
        y = np.array([0, 0, 0, 0, 1, 1, 2])
        clf = LinearSVM(c=1.0, seed=0).fit(x, y)
        assert np.all(clf.predict(x) == 0)

    def test_scaling_with_rescaled_c(self):
        x, y = blobs(per_class=25, seed=3, classes=3)
        base = LinearSVM(c=1.0, seed=0).fit(x, y).predict(x)
        scaled = LinearSVM(c=0.25, seed=0).fit(2.0 * x, y).predict(2.0 * x)
        assert np.all(base == scaled)

    def test_dual_feasibility(self):
        x, y = blobs(per_class=15, gap=1.0, seed=1, classes=3)
        clf = LinearSVM(c=0.7, seed=0).fit(x, y)
        assert np.all(clf.alpha_ >= 0.0)
        assert np.all(clf.alpha_ <= 0.7)

    def test_deterministic(self):
        x, y = blobs(per_class=20, gap=1.0, seed=2, classes=3)
        a = LinearSVM(c=1.0, seed=5).fit(x, y)
        b = LinearSVM(c=1.0, seed=5).fit(x, y)
        assert np.array_equal(a.weights_, b.weights_)
        assert np.array_equal(a.bias_, b.bias_)

    def test_tie_breaks_to_lowest_class(self):
        clf = LinearSVM()
        clf.classes_ = [0, 1, 2]
        clf.weights_ = np.zeros((3, 2))
        clf.bias_ = np.zeros(3)
        assert np.all(clf.predict(np.ones((4, 2))) == 0)

    def test_width_mismatch(self):
        x, y = blobs()
        clf = LinearSVM().fit(x, y)
        with pytest.raises(ContractError):
            clf.predict(np.ones((2, 5)))

    def test_single_class_rejected(self):
        with pytest.raises(ContractError):
            LinearSVM().fit(np.ones((4, 2)), np.zeros(4))

    def test_unfitted_predict_rejected(self):
        with pytest.raises(ContractError, match="not fitted"):
            LinearSVM().predict(np.ones((2, 3)))
        with pytest.raises(ContractError, match="not fitted"):
            KernelSVM().predict(np.ones((2, 3, 3)))

    def test_serialization_round_trip(self):
        x, y = blobs(classes=3)
        clf = LinearSVM(c=2.0, seed=1).fit(x, y)
        restored = load_classifier(clf.to_dict())
        assert np.all(restored.predict(x) == clf.predict(x))


class TestKernelSVM:
    def test_guard_rejects_large_n(self):
        x = np.zeros((5, 2, 2))
        with pytest.raises(ContractError, match="Gram"):
            KernelSVM(max_train=4).fit(x, np.array([0, 0, 1, 1, 1]))

    def test_duplicated_training_set_same_predictions(self):
        X, y = radial_descriptors(2, 25, dim=3, seed=4,
                                  angle_span=(0.1, 0.45), band_fill=0.5)
        probe, _ = radial_descriptors(2, 10, dim=3, seed=9,
                                      angle_span=(0.1, 0.45), band_fill=0.5)
        base = KernelSVM(sigma=0.7, c=10.0, seed=0).fit(X, y).predict(probe)
        doubled = KernelSVM(sigma=0.7, c=10.0, seed=0).fit(
            np.concatenate([X, X]), np.concatenate([y, y])
        ).predict(probe)
        assert np.all(base == doubled)

    def test_vanishing_c_gives_majority(self):
        X, y = radial_descriptors(2, 10, dim=3, seed=5)
        y = np.concatenate([y, np.full(4, 0)])
        X = np.concatenate([X, X[:4]])  # make class 0 the majority
        clf = KernelSVM(sigma=1.0, c=1e-9, seed=0).fit(X, y)
        assert np.all(clf.predict(X) == 0)
        assert np.all(np.abs(clf.alpha_ - 1e-9) < 1e-15)

    def test_radial_beats_raw_linear(self):
        # class 1 is the middle ring: not linearly separable from inner+outer
        X, y = radial_descriptors(3, 34, dim=4, seed=6)
        labels = np.where(y == 1, "mid", "edge")
        half = len(y) // 2
        order = np.random.default_rng(0).permutation(len(y))
        tr, te = order[:half], order[half:]
        exact = KernelSVM(sigma=1.0, c=10.0, seed=0).fit(X[tr], labels[tr])
        acc_exact = np.mean(exact.predict(X[te]) == labels[te])
        raw = X.reshape(len(y), -1)
        lin = LinearSVM(c=10.0, seed=0).fit(raw[tr], labels[tr])
        acc_lin = np.mean(lin.predict(raw[te]) == labels[te])
        assert acc_exact >= acc_lin

    def test_dual_feasibility(self):
        X, y = radial_descriptors(2, 12, dim=3, seed=7)
        clf = KernelSVM(sigma=1.0, c=0.5, seed=0).fit(X, y)
        assert np.all(clf.alpha_ >= 0.0)
        assert np.all(clf.alpha_ <= 0.5)
        assert np.all(np.abs(clf.dual_coefs_) <= 0.5 + 1e-15)

    def test_serialization_round_trip(self):
        X, y = radial_descriptors(2, 10, dim=3, seed=8)
        clf = KernelSVM(sigma=0.8, c=2.0, seed=3).fit(X, y)
        restored = load_classifier(clf.to_dict())
        assert np.all(restored.predict(X) == clf.predict(X))

    def test_rbf_gram_matches_pairwise(self):
        X, _ = radial_descriptors(2, 5, dim=3, seed=9)
        from kronfeat import rbf_kernel

        g = rbf_gram(X, X, 0.9)
        for i in range(len(X)):
            for j in range(len(X)):
                assert abs(g[i, j] - rbf_kernel(X[i], X[j], 0.9)) < 1e-12


class TestAgreementAtLargeNu:
    def test_kron_features_approach_exact_kernel(self):
        # lighter version of the acceptance criterion (3 seeds)
        X, y = radial_descriptors(5, 80, dim=4, seed=42)
        idx = np.arange(len(y))
        tr, te = idx[idx % 2 == 0], idx[idx % 2 == 1]
        exact = KernelSVM(sigma=1.0, c=10.0, seed=0).fit(X[tr], y[tr])
        acc_exact = np.mean(exact.predict(X[te]) == y[te])
        accs = []
        for seed in range(3):
            fmap = KronPiMap(nu=5000, sigma=1.0, theta=0.9, seed=seed).fit(X[tr])
            clf = LinearSVM(c=10.0, seed=seed).fit(fmap.transform(X[tr]), y[tr])
            accs.append(np.mean(clf.predict(fmap.transform(X[te])) == y[te]))
        assert abs(np.mean(accs) - acc_exact) <= 0.05
