"""Skeleton sequences and their unit-norm log-covariance descriptors.

A sequence of J joints over T frames becomes a d x d descriptor with
d = 3*(J-1): root-relative displacements -> unbiased covariance -> matrix
log -> strict lower triangle zeroed -> division by the Frobenius norm.
The result is upper triangular with unit Frobenius norm, which is the
contract every feature map in :mod:`kronfeat.maps` relies on.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ContractError, DescriptorError, NumericFailure
from .linalg import sym_log

#: Frobenius norms below this are treated as non-normalizable.
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SkeletonSequence:
    """A labelled 3-D joint trajectory with shape (T, J, 3)."""

    label: object
    joints: np.ndarray
    root_index: int = 0

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        if joints.ndim != 3 or joints.shape[2] != 3:
            raise ContractError(
                f"joints must have shape (T, J, 3), got {joints.shape}"
            )
        t, j = joints.shape[:2]
        if t < 2:
            raise ContractError(f"sequence needs at least 2 frames, got T={t}")
        if j < 2:
            raise ContractError(f"sequence needs at least 2 joints, got J={j}")
        if not np.isfinite(joints).all():
            raise ContractError("joints contain non-finite coordinates")
        if not 0 <= self.root_index < j:
            raise ContractError(
                f"root_index {self.root_index} out of range for J={j}"
            )
        object.__setattr__(self, "joints", joints)

    @property
    def n_frames(self):
        return self.joints.shape[0]

    @property
    def n_joints(self):
        return self.joints.shape[1]


def descriptor_dim(n_joints):
    """Descriptor side length for a J-joint skeleton: 3 * (J - 1)."""
    return 3 * (n_joints - 1)


def relative_displacements(seq, root_index=None):
    """Per-frame joint positions relative to the root joint.

    Returns a (T, 3*(J-1)) array; row t concatenates joint_k(t) - root(t)
    for every k != root in ascending joint order.
    """
    root = seq.root_index if root_index is None else root_index
    joints = seq.joints
    if not 0 <= root < joints.shape[1]:
        raise ContractError(f"root_index {root} out of range")
    others = np.delete(joints, root, axis=1)
    rel = others - joints[:, root : root + 1, :]
    return rel.reshape(joints.shape[0], -1)


def covariance(displacements):
    """Unbiased sample covariance (divisor T-1), explicitly symmetrized."""
    z = np.asarray(displacements, dtype=np.float64)
    if z.ndim != 2:
        raise ContractError(f"displacements must be 2-D, got shape {z.shape}")
    t = z.shape[0]
    if t < 2:
        raise ContractError(f"covariance needs at least 2 frames, got T={t}")
    z = z - z.mean(axis=0)
    c = (z.T @ z) / (t - 1)
    return 0.5 * (c + c.T)


def make_descriptor(seq, eps=None):
    """Encode one sequence as a unit-norm upper-triangular log-covariance matrix.

    ``eps`` is the additive eigenvalue regularizer for the matrix log; None
    applies the default rule from :func:`kronfeat.linalg.default_log_eps`.
    Raises :class:`DescriptorError` (tagged with the sequence label) when the
    log fails or the zeroed log has no norm to normalize by.
    """
    c = covariance(relative_displacements(seq))
    try:
        x = sym_log(c, eps=eps)
    except NumericFailure as exc:
        raise DescriptorError(
            f"sample {seq.label!r}: covariance log failed: {exc}", label=seq.label
        ) from exc
    x = np.triu(x)
    norm = float(np.linalg.norm(x))
    if norm < _NORM_FLOOR:
        raise DescriptorError(
            f"sample {seq.label!r}: log-covariance has zero Frobenius norm "
            "and cannot be normalized",
            label=seq.label,
        )
    return x / norm


class DescriptorEncoder(BaseEstimator, TransformerMixin):
    """Stateless transformer from skeleton sequences to descriptor stacks.

    Parameters
    ----------
    eps : float or None
        Additive eigenvalue regularizer passed to the matrix log; None picks
        the default rule.
    root_index : int or None
        Overrides each sequence's own root joint when set.
    """

    def __init__(self, eps=None, root_index=None):
        self.eps = eps
        self.root_index = root_index

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        seqs = list(X)
        if not seqs:
            raise ContractError("no sequences to encode")
        out = []
        for seq in seqs:
            if self.root_index is not None:
                seq = SkeletonSequence(seq.label, seq.joints, self.root_index)
            out.append(make_descriptor(seq, eps=self.eps))
        dims = {m.shape[0] for m in out}
        if len(dims) != 1:
            raise ContractError(f"sequences produce mixed descriptor dims {sorted(dims)}")
        return np.stack(out)
