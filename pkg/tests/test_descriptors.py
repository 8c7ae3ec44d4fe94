import numpy as np
import pytest

from kronfeat import (
    ContractError,
    DescriptorError,
    DescriptorEncoder,
    SkeletonSequence,
    covariance,
    descriptor_dim,
    make_descriptor,
    relative_displacements,
)


def random_sequence(t, j, seed, label="s"):
    rng = np.random.default_rng(seed)
    return SkeletonSequence(label=label, joints=rng.normal(size=(t, j, 3)))


class TestSkeletonSequence:
    def test_rejects_single_frame(self):
        with pytest.raises(ContractError):
            SkeletonSequence("a", np.zeros((1, 3, 3)))

    def test_rejects_single_joint(self):
        with pytest.raises(ContractError):
            SkeletonSequence("a", np.zeros((5, 1, 3)))

    def test_rejects_nan(self):
        joints = np.zeros((3, 2, 3))
        joints[1, 1, 2] = np.nan
        with pytest.raises(ContractError):
            SkeletonSequence("a", joints)

    def test_rejects_bad_root(self):
        with pytest.raises(ContractError):
            SkeletonSequence("a", np.zeros((3, 2, 3)), root_index=2)


class TestRelativeDisplacements:
    def test_constant_offset(self):
        joints = np.zeros((3, 2, 3))
        joints[:, 1, 0] = 1.0  # joint 1 sits at (1, 0, 0) relative to the root
        seq = SkeletonSequence("a", joints)
        out = relative_displacements(seq)
        assert out.shape == (3, 3)
        assert np.array_equal(out, np.tile([1.0, 0.0, 0.0], (3, 1)))

    def test_coincident_joints_give_zero(self):
        rng = np.random.default_rng(0)
        walk = rng.normal(size=(4, 1, 3))
        joints = np.repeat(walk, 3, axis=1)
        out = relative_displacements(SkeletonSequence("a", joints))
        assert np.array_equal(out, np.zeros((4, 6)))

    def test_matches_naive_loop(self):
        seq = random_sequence(5, 4, seed=21)
        out = relative_displacements(seq)
        for t in range(5):
            row = []
            for k in range(4):
                if k == seq.root_index:
                    continue
                row.extend(seq.joints[t, k] - seq.joints[t, seq.root_index])
            assert np.allclose(out[t], row, atol=0)

    def test_nonzero_root(self):
        seq = SkeletonSequence("a", np.arange(2 * 3 * 3, dtype=float).reshape(2, 3, 3),
                               root_index=1)
        out = relative_displacements(seq)
        expected = np.hstack([
            seq.joints[:, 0] - seq.joints[:, 1],
            seq.joints[:, 2] - seq.joints[:, 1],
        ])
        assert np.array_equal(out, expected)


class TestCovariance:
    def test_identical_frames(self):
        out = covariance(np.tile([1.0, 2.0, 3.0], (4, 1)))
        assert np.array_equal(out, np.zeros((3, 3)))

    def test_scalar_sample_variance(self):
        out = covariance(np.array([[0.0], [2.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 2.0

    def test_matches_two_pass_formula(self):
        rng = np.random.default_rng(17)
        z = rng.normal(size=(50, 6))
        mu = z.sum(axis=0) / 50
        expected = np.zeros((6, 6))
        for t in range(50):
            d = z[t] - mu
            expected += np.outer(d, d)
        expected /= 49
        assert np.allclose(covariance(z), expected, atol=1e-12)

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(8)
        out = covariance(rng.normal(size=(20, 7)))
        assert np.array_equal(out, out.T)

    def test_single_frame_rejected(self):
        with pytest.raises(ContractError):
            covariance(np.ones((1, 3)))


class TestMakeDescriptor:
    def test_unit_norm(self):
        x = make_descriptor(random_sequence(30, 5, seed=1))
        assert x.shape == (descriptor_dim(5),) * 2
        assert abs(np.linalg.norm(x) - 1.0) <= 1e-9

    def test_strict_lower_triangle_zero(self):
        x = make_descriptor(random_sequence(30, 4, seed=2))
        assert np.array_equal(np.tril(x, -1), np.zeros_like(x))

    def test_identity_covariance_raises(self):
        # whiten displacements so the covariance is the identity, log == 0
        rng = np.random.default_rng(3)
        z = rng.normal(size=(40, 3))
        z -= z.mean(axis=0)
        cov = z.T @ z / 39
        z = z @ np.linalg.inv(np.linalg.cholesky(cov)).T
        joints = np.zeros((40, 2, 3))
        joints[:, 1, :] = z  # root fixed at the origin
        seq = SkeletonSequence("degenerate", joints)
        with pytest.raises(DescriptorError) as err:
            make_descriptor(seq, eps=0.0)
        assert err.value.label == "degenerate"

    def test_matches_pipeline_composition(self):
        from kronfeat import sym_log

        seq = random_sequence(25, 4, seed=5)
        eps = 1e-4
        c = covariance(relative_displacements(seq))
        x = np.triu(sym_log(c, eps=eps))
        x /= np.linalg.norm(x)
        assert np.array_equal(make_descriptor(seq, eps=eps), x)

    def test_norms_on_many_random_sequences(self):
        for seed in range(100):
            x = make_descriptor(random_sequence(12, 3, seed=seed))
            assert abs(np.linalg.norm(x) - 1.0) <= 1e-9


class TestInvariances:
    def test_shape_independent_of_length(self):
        short = make_descriptor(random_sequence(10, 5, seed=4))
        long = make_descriptor(random_sequence(500, 5, seed=4))
        assert short.shape == long.shape == (12, 12)

    def test_frame_permutation(self):
        seq = random_sequence(20, 4, seed=6)
        rng = np.random.default_rng(0)
        shuffled = SkeletonSequence("s", seq.joints[rng.permutation(20)])
        a = make_descriptor(seq, eps=1e-5)
        b = make_descriptor(shuffled, eps=1e-5)
        assert np.abs(a - b).max() <= 1e-12

    def test_global_translation(self):
        seq = random_sequence(20, 4, seed=7)
        shifted = SkeletonSequence("s", seq.joints + np.array([5.0, -3.0, 11.0]))
        a = make_descriptor(seq, eps=1e-5)
        b = make_descriptor(shifted, eps=1e-5)
        assert np.abs(a - b).max() <= 1e-10


class TestDescriptorEncoder:
    def test_stacks_and_validates(self):
        seqs = [random_sequence(15, 4, seed=s) for s in range(3)]
        out = DescriptorEncoder().fit(seqs).transform(seqs)
        assert out.shape == (3, 9, 9)

    def test_mixed_dims_rejected(self):
        seqs = [random_sequence(15, 4, seed=0), random_sequence(15, 5, seed=1)]
        with pytest.raises(ContractError):
            DescriptorEncoder().transform(seqs)

    def test_root_override(self):
        seq = random_sequence(15, 4, seed=0)
        base = DescriptorEncoder(eps=1e-5).transform([seq])
        moved = DescriptorEncoder(eps=1e-5, root_index=2).transform([seq])
        assert not np.allclose(base, moved)

    def test_get_params(self):
        enc = DescriptorEncoder(eps=1e-4, root_index=1)
        assert enc.get_params() == {"eps": 1e-4, "root_index": 1}
