"""Dense symmetric-matrix numerics.

Cyclic-Jacobi eigendecomposition, the regularized matrix logarithm,
Frobenius inner products, and the factorized Kronecker trace that makes the
product feature maps linear-cost:

    tr((W1 (x) ... (x) Wn)^T X^(x)n) = prod_k tr(Wk^T X)

Everything here is a pure function of its inputs; matrices are never
modified in place and symmetrization is always explicit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, NumericFailure
from .validation import as_square_matrix, check_same_shape, check_symmetric


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (ascending) and the matching orthogonal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eigh(m, tol=1e-12, max_sweep_factor=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps rotate away every off-diagonal pair until the off-diagonal
    Frobenius norm drops below ``tol * ||m||_F``.  The sweep cap is
    ``max_sweep_factor * d**2``.

    Returns an :class:`EigenDecomposition` with eigenvalues sorted ascending.
    Raises :class:`NumericFailure` if the cap is hit before convergence.
    """
    a = check_symmetric(m, name="m").copy()
    d = a.shape[0]
    v = np.eye(d)
    target = tol * np.linalg.norm(a)
    max_sweeps = max(1, int(max_sweep_factor) * d * d)
    off_mask = ~np.eye(d, dtype=bool)

    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[off_mask]))
        if off <= target:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                _rotate(a, v, p, q)
    else:
        raise NumericFailure(
            f"Jacobi eigensolver did not converge for a {d}x{d} matrix "
            f"within {max_sweeps} sweeps"
        )

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=v[:, order])


def _rotate(a, v, p, q):
    """Apply one two-sided Jacobi rotation zeroing a[p, q], in place."""
    apq = float(a[p, q])
    if apq == 0.0:
        return
    diff = float(a[q, q] - a[p, p])
    if abs(apq) < 1e-150 * abs(diff):
        # Rotation angle underflows double precision; dropping the entry is
        # a relative perturbation below 1e-150 and keeps v exactly orthogonal.
        a[p, q] = 0.0
        a[q, p] = 0.0
        return
    tau = diff / (2.0 * apq)
    t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
    c = 1.0 / math.hypot(1.0, t)
    s = t * c

    ap = a[:, p].copy()
    aq = a[:, q].copy()
    a[:, p] = c * ap - s * aq
    a[:, q] = s * ap + c * aq
    ap = a[p, :].copy()
    aq = a[q, :].copy()
    a[p, :] = c * ap - s * aq
    a[q, :] = s * ap + c * aq
    a[p, q] = 0.0
    a[q, p] = 0.0

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def default_log_eps(max_eigenvalue):
    """Default additive regularizer for the matrix log: 1e-5 * max(lam_max, 1)."""
    return 1e-5 * max(float(max_eigenvalue), 1.0)


def sym_log(m, eps=None, psd_tol=-1e-10):
    """Matrix logarithm of a symmetric PSD matrix with additive regularization.

    Returns ``U diag(log(lam_i + eps)) U^T``, explicitly symmetrized.  With
    ``eps=None`` the default rule :func:`default_log_eps` is applied.

    Raises :class:`NumericFailure` when an eigenvalue is below ``psd_tol`` or
    when ``lam_i + eps <= 0`` for any eigenvalue.
    """
    dec = eigh(m)
    w = dec.eigenvalues
    if eps is None:
        eps = default_log_eps(w[-1])
    eps = float(eps)
    if eps < 0.0:
        raise ContractError(f"eps must be non-negative, got {eps}")
    if w[0] < psd_tol:
        raise NumericFailure(
            f"matrix is not positive semi-definite: eigenvalue {w[0]:.6g}"
        )
    shifted = w + eps
    if np.any(shifted <= 0.0):
        bad = float(w[np.argmax(shifted <= 0.0)])
        raise NumericFailure(
            f"log domain error: eigenvalue {bad:.6g} with eps={eps:.6g} is not positive"
        )
    u = dec.eigenvectors
    out = (u * np.log(shifted)) @ u.T
    return 0.5 * (out + out.T)


def frob_inner(a, b):
    """Frobenius inner product sum_ij a_ij * b_ij of two same-shape arrays."""
    a, b = check_same_shape(a, b)
    return float(np.sum(a * b))


def kron_trace(ws, x):
    """Trace of the Kronecker product of ``W_k^T X`` factors.

    Computed as ``prod_k tr(W_k^T X)`` without materializing the Kronecker
    product; the empty product (no factors) is 1.
    """
    x = as_square_matrix(x, name="x")
    out = 1.0
    for k, w in enumerate(ws):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != x.shape:
            raise ContractError(
                f"factor {k} has shape {w.shape}, expected {x.shape}"
            )
        out *= float(np.sum(w * x))
    return out
