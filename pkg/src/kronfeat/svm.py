"""One-vs-rest SVMs trained by dual coordinate descent.

:class:`LinearSVM` works on explicit feature matrices and scales linearly
in the sample count; :class:`KernelSVM` solves the same dual on a
precomputed RBF Gram matrix and is the exact-kernel reference, usable only
while the N x N Gram fits in memory.  Both use L1 hinge loss, handle the
intercept by augmenting features with a constant 1, and break prediction
ties toward the lowest class index.
"""

import json

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import ContractError
from .validation import as_descriptor_batch, check_seed

CLASSIFIER_FORMAT_VERSION = 1

#: Largest sample count the exact-kernel trainer accepts.
GRAM_GUARD = 20_000


def _class_rng(seed, k):
    return np.random.default_rng(np.random.SeedSequence((check_seed(seed), k)))


def _dual_cd_linear(x, ysign, c, tol, max_epochs, rng):
    """L1-hinge dual coordinate descent on explicit features.

    Maintains w = sum_i alpha_i y_i x_i; stops when the spread of projected
    gradients over an epoch drops below ``tol``.
    """
    n = x.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1])
    qdiag = np.einsum("ij,ij->i", x, x)
    for _ in range(max_epochs):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            grad = ysign[i] * float(x[i] @ w) - 1.0
            if alpha[i] <= 0.0:
                pg = min(grad, 0.0)
            elif alpha[i] >= c:
                pg = max(grad, 0.0)
            else:
                pg = grad
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0 and qdiag[i] > 0.0:
                new = min(max(alpha[i] - grad / qdiag[i], 0.0), c)
                if new != alpha[i]:
                    w += (new - alpha[i]) * ysign[i] * x[i]
                    alpha[i] = new
        if pg_max - pg_min < tol:
            break
    return w, alpha


def _dual_cd_gram(gram, ysign, c, tol, max_epochs, rng):
    """Same solver against a precomputed Gram matrix."""
    n = gram.shape[0]
    alpha = np.zeros(n)
    beta = np.zeros(n)  # alpha * y
    scores = np.zeros(n)  # gram @ beta
    qdiag = np.diag(gram).copy()
    for _ in range(max_epochs):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            grad = ysign[i] * scores[i] - 1.0
            if alpha[i] <= 0.0:
                pg = min(grad, 0.0)
            elif alpha[i] >= c:
                pg = max(grad, 0.0)
            else:
                pg = grad
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0 and qdiag[i] > 0.0:
                new = min(max(alpha[i] - grad / qdiag[i], 0.0), c)
                if new != alpha[i]:
                    delta = (new - alpha[i]) * ysign[i]
                    scores += delta * gram[i]
                    beta[i] += delta
                    alpha[i] = new
        if pg_max - pg_min < tol:
            break
    return beta, alpha


def _check_training_labels(labels, n):
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise ContractError(f"got {labels.shape[0]} labels for {n} samples")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ContractError("training needs at least 2 classes")
    return labels, classes


def rbf_gram(a, b, sigma):
    """RBF Gram matrix between two descriptor stacks, shape (len(a), len(b))."""
    va = as_descriptor_batch(a).reshape(len(a), -1)
    vb = as_descriptor_batch(b).reshape(len(b), -1)
    if va.shape[1] != vb.shape[1]:
        raise ContractError("descriptor dimensions do not match")
    sq = (
        np.sum(va**2, axis=1)[:, None]
        - 2.0 * va @ vb.T
        + np.sum(vb**2, axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * sigma * sigma))


class LinearSVM(BaseEstimator, ClassifierMixin):
    """One-vs-rest L2-regularized L1-hinge linear SVM.

    Parameters
    ----------
    c : float
        Regularization trade-off (larger = harder margins).
    tol : float
        Stop a class subproblem once the projected-gradient spread over an
        epoch falls below this.
    max_epochs : int
        Epoch cap per class subproblem.
    seed : int
        Seeds the coordinate shuffling; identical inputs and seed give an
        identical model.
    """

    def __init__(self, c=1.0, tol=1e-4, max_epochs=1000, seed=0):
        self.c = c
        self.tol = tol
        self.max_epochs = max_epochs
        self.seed = seed

    def fit(self, X, y):
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 2:
            raise ContractError(f"features must be 2-D, got shape {x.shape}")
        if x.shape[0] < 2:
            raise ContractError("training needs at least 2 samples")
        if self.c <= 0:
            raise ContractError(f"c must be positive, got {self.c}")
        labels, classes = _check_training_labels(y, x.shape[0])
        aug = np.hstack([x, np.ones((x.shape[0], 1))])
        weights = np.zeros((len(classes), x.shape[1]))
        bias = np.zeros(len(classes))
        alphas = np.zeros((len(classes), x.shape[0]))
        for k, cls in enumerate(classes):
            ysign = np.where(labels == cls, 1.0, -1.0)
            w, alpha = _dual_cd_linear(
                aug, ysign, self.c, self.tol, self.max_epochs, _class_rng(self.seed, k)
            )
            weights[k] = w[:-1]
            bias[k] = w[-1]
            alphas[k] = alpha
        self.classes_ = classes
        self.weights_ = weights
        self.bias_ = bias
        self.alpha_ = alphas
        return self

    def decision_function(self, X):
        if getattr(self, "weights_", None) is None:
            raise ContractError("LinearSVM is not fitted")
        x = np.asarray(X, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weights_.shape[1]:
            raise ContractError(
                f"features must have width {self.weights_.shape[1]}, got shape {x.shape}"
            )
        return x @ self.weights_.T + self.bias_

    def predict(self, X):
        scores = self.decision_function(X)
        picks = np.argmax(scores, axis=1)  # first maximum = lowest class index
        return np.array([self.classes_[i] for i in picks], dtype=object)

    def to_dict(self):
        return {
            "format_version": CLASSIFIER_FORMAT_VERSION,
            "model": "linear_svm",
            "c": self.c,
            "tol": self.tol,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
            "classes": list(self.classes_),
            "weights": self.weights_.tolist(),
            "bias": self.bias_.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != CLASSIFIER_FORMAT_VERSION:
            raise ContractError(
                f"unsupported classifier format version {doc.get('format_version')!r}"
            )
        model = cls(
            c=doc["c"], tol=doc["tol"], max_epochs=doc["max_epochs"], seed=doc["seed"]
        )
        model.classes_ = list(doc["classes"])
        model.weights_ = np.asarray(doc["weights"], dtype=np.float64)
        model.bias_ = np.asarray(doc["bias"], dtype=np.float64)
        model.alpha_ = None
        return model


class KernelSVM(BaseEstimator, ClassifierMixin):
    """Exact-Gram RBF kernel SVM (one-vs-rest dual coordinate descent).

    Refuses more than ``max_train`` samples: beyond that the N x N Gram
    matrix is the memory wall this estimator exists to demonstrate.
    """

    def __init__(self, sigma=1.0, c=1.0, tol=1e-4, max_epochs=1000, seed=0,
                 max_train=GRAM_GUARD):
        self.sigma = sigma
        self.c = c
        self.tol = tol
        self.max_epochs = max_epochs
        self.seed = seed
        self.max_train = max_train

    def fit(self, X, y):
        x = as_descriptor_batch(X)
        n = x.shape[0]
        if n > self.max_train:
            raise ContractError(
                f"{n} training samples would need a {n}x{n} Gram matrix; "
                f"the guard is {self.max_train} (use an explicit feature map instead)"
            )
        if n < 2:
            raise ContractError("training needs at least 2 samples")
        if self.c <= 0:
            raise ContractError(f"c must be positive, got {self.c}")
        if self.sigma <= 0:
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        labels, classes = _check_training_labels(y, n)
        gram = rbf_gram(x, x, self.sigma) + 1.0  # +1 = intercept trick
        dual = np.zeros((len(classes), n))
        alphas = np.zeros((len(classes), n))
        for k, cls in enumerate(classes):
            ysign = np.where(labels == cls, 1.0, -1.0)
            beta, alpha = _dual_cd_gram(
                gram, ysign, self.c, self.tol, self.max_epochs, _class_rng(self.seed, k)
            )
            dual[k] = beta
            alphas[k] = alpha
        self.classes_ = classes
        self.dual_coefs_ = dual
        self.alpha_ = alphas
        self.support_ = x.copy()
        return self

    def decision_function(self, X):
        if getattr(self, "support_", None) is None:
            raise ContractError("KernelSVM is not fitted")
        x = as_descriptor_batch(X, self.support_.shape[1])
        kx = rbf_gram(x, self.support_, self.sigma) + 1.0
        return kx @ self.dual_coefs_.T

    def predict(self, X):
        scores = self.decision_function(X)
        picks = np.argmax(scores, axis=1)
        return np.array([self.classes_[i] for i in picks], dtype=object)

    def to_dict(self):
        return {
            "format_version": CLASSIFIER_FORMAT_VERSION,
            "model": "kernel_svm",
            "sigma": self.sigma,
            "c": self.c,
            "tol": self.tol,
            "max_epochs": self.max_epochs,
            "seed": self.seed,
            "classes": list(self.classes_),
            "dual_coefs": self.dual_coefs_.tolist(),
            "support": self.support_.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != CLASSIFIER_FORMAT_VERSION:
            raise ContractError(
                f"unsupported classifier format version {doc.get('format_version')!r}"
            )
        model = cls(
            sigma=doc["sigma"], c=doc["c"], tol=doc["tol"],
            max_epochs=doc["max_epochs"], seed=doc["seed"],
        )
        model.classes_ = list(doc["classes"])
        model.dual_coefs_ = np.asarray(doc["dual_coefs"], dtype=np.float64)
        model.support_ = np.asarray(doc["support"], dtype=np.float64)
        model.alpha_ = None
        return model


def load_classifier(doc):
    """Rebuild a classifier from its serialized document (dict or JSON str)."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    kind = doc.get("model")
    if kind == "linear_svm":
        return LinearSVM.from_dict(doc)
    if kind == "kernel_svm":
        return KernelSVM.from_dict(doc)
    raise ContractError(f"unknown classifier model {kind!r}")
