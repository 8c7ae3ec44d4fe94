"""Input validation helpers used by the estimators and numeric routines."""

import numpy as np

from .exceptions import ContractError


def as_square_matrix(a, name="matrix"):
    """Return ``a`` as a float64 square 2-D array or raise ContractError."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be a square 2-D array, got shape {a.shape}")
    return a


def check_symmetric(a, name="matrix", tol=0.0):
    """Validate that ``a`` is square and symmetric within ``tol`` (default exact)."""
    a = as_square_matrix(a, name)
    if not np.all(np.abs(a - a.T) <= tol):
        raise ContractError(f"{name} is not symmetric (tolerance {tol!r})")
    return a


def check_same_shape(a, b, names=("a", "b")):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(
            f"{names[0]} and {names[1]} must share a shape, got {a.shape} vs {b.shape}"
        )
    return a, b


def as_descriptor_batch(x, input_dim=None, name="X"):
    """Return a stack of square matrices with shape (n_samples, d, d).

    A single (d, d) matrix is promoted to a batch of one.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ContractError(
            f"{name} must be a (n_samples, d, d) stack of square matrices, got shape {x.shape}"
        )
    if input_dim is not None and x.shape[1] != input_dim:
        raise ContractError(
            f"{name} has matrix side {x.shape[1]}, expected {input_dim}"
        )
    if not np.isfinite(x).all():
        raise ContractError(f"{name} contains non-finite entries")
    return x


def check_unit_norm(batch, name="X", tol=1e-6):
    """Validate that every matrix in the batch has unit Frobenius norm."""
    norms = np.sqrt(np.einsum("nij,nij->n", batch, batch))
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ContractError(
            f"{name}[{i}] must have unit Frobenius norm, got {norms[i]:.6g}"
        )
    return batch


def check_seed(seed):
    """Validate a 64-bit non-negative integer seed."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ContractError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) < 2**64:
        raise ContractError(f"seed must be in [0, 2**64), got {seed}")
    return int(seed)


def spawn_rngs(seed, count):
    """Independent per-component generators derived from one root seed.

    Stream ``j`` depends only on ``(seed, j)``, so components can be drawn in
    any order (or in parallel) without changing the result.
    """
    children = np.random.SeedSequence(check_seed(seed)).spawn(count)
    return [np.random.default_rng(s) for s in children]
