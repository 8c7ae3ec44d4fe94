"""One-hidden-layer perceptron whose hidden weights double as a feature map.

The network is sigmoid hidden units plus a softmax cross-entropy head,
trained full-batch with a backtracking line search (small data) or with
mini-batch adaptive-moment updates (large data).  After training, the
hidden weight matrix W (nu x d*d) is extracted as the deterministic linear
map X -> W vec(X); the squashing nonlinearity and the hidden bias are
dropped by default but both remain available behind flags.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, NumericFailure
from .maps import MAP_KINDS, MODEL_FORMAT_VERSION, _MapBase
from .validation import as_descriptor_batch, check_seed

#: Adam kicks in above this sample count when batch_size is unset.
FULL_BATCH_LIMIT = 10_000

#: Loss-plateau early stop: relative change below PLATEAU_TOL for
#: PLATEAU_EPOCHS consecutive epochs.
PLATEAU_TOL = 1e-7
PLATEAU_EPOCHS = 20


@dataclass
class MlpConfig:
    """Training configuration for :func:`train_mlp`."""

    hidden_size: int
    max_epochs: int = 2000
    learn_rate: float = 0.5
    batch_size: int | None = None
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ContractError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if self.learn_rate < 0:
            raise ContractError(f"learn_rate must be >= 0, got {self.learn_rate}")
        if self.l2 < 0:
            raise ContractError(f"l2 must be >= 0, got {self.l2}")
        check_seed(self.seed)


@dataclass
class MlpModel:
    """Trained parameters; ``classes`` maps output rows to labels."""

    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    classes: list
    final_loss: float = math.nan
    epochs: int = 0


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def init_params(input_dim, hidden_size, n_classes, rng):
    """Seeded uniform initialization in +-sqrt(6 / (fan_in + fan_out))."""
    lim1 = math.sqrt(6.0 / (input_dim + hidden_size))
    lim2 = math.sqrt(6.0 / (hidden_size + n_classes))
    return {
        "w_hidden": rng.uniform(-lim1, lim1, size=(hidden_size, input_dim)),
        "b_hidden": np.zeros(hidden_size),
        "w_out": rng.uniform(-lim2, lim2, size=(n_classes, hidden_size)),
        "b_out": np.zeros(n_classes),
    }


def loss_and_grad(params, x, onehot, l2=0.0):
    """Mean cross-entropy (plus L2 on the weights) and its exact gradients.

    ``x`` is (n, d*d) vectorized input, ``onehot`` the (n, classes) targets.
    Returns ``(loss, grads)`` with grads keyed like ``params``.
    """
    n = x.shape[0]
    hidden = _sigmoid(x @ params["w_hidden"].T + params["b_hidden"])
    logits = hidden @ params["w_out"].T + params["b_out"]
    probs = _softmax(logits)
    eps = 1e-300
    loss = -np.sum(onehot * np.log(probs + eps)) / n
    if l2:
        with np.errstate(over="ignore"):  # inf loss is caught by the caller
            loss += 0.5 * l2 * (
                np.sum(params["w_hidden"] ** 2) + np.sum(params["w_out"] ** 2)
            )

    delta_out = (probs - onehot) / n
    g_w_out = delta_out.T @ hidden
    g_b_out = delta_out.sum(axis=0)
    delta_hidden = (delta_out @ params["w_out"]) * hidden * (1.0 - hidden)
    g_w_hidden = delta_hidden.T @ x
    g_b_hidden = delta_hidden.sum(axis=0)
    if l2:
        g_w_hidden += l2 * params["w_hidden"]
        g_w_out += l2 * params["w_out"]
    grads = {
        "w_hidden": g_w_hidden,
        "b_hidden": g_b_hidden,
        "w_out": g_w_out,
        "b_out": g_b_out,
    }
    return float(loss), grads


def _check_loss(loss):
    if not math.isfinite(loss):
        raise NumericFailure(
            "training loss diverged to a non-finite value; try a smaller learn_rate"
        )


def _train_full_batch(params, x, onehot, cfg):
    loss, grads = loss_and_grad(params, x, onehot, cfg.l2)
    _check_loss(loss)
    plateau = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        step = cfg.learn_rate
        gnorm2 = sum(float(np.sum(g * g)) for g in grads.values())
        if gnorm2 == 0.0 or step == 0.0:
            break
        accepted = False
        for _ in range(30):
            trial = {k: params[k] - step * grads[k] for k in params}
            trial_loss, trial_grads = loss_and_grad(trial, x, onehot, cfg.l2)
            if math.isfinite(trial_loss) and trial_loss <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        params, prev_loss, loss, grads = trial, loss, trial_loss, trial_grads
        _check_loss(loss)
        plateau = plateau + 1 if abs(prev_loss - loss) <= PLATEAU_TOL * max(1.0, abs(loss)) else 0
        if plateau >= PLATEAU_EPOCHS:
            break
    return params, loss, epoch


def _train_adam(params, x, onehot, cfg, rng):
    batch = cfg.batch_size or 1024
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    n = x.shape[0]
    step_count = 0
    loss = math.inf
    prev_loss = math.inf
    plateau = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            _, grads = loss_and_grad(params, x[idx], onehot[idx], cfg.l2)
            step_count += 1
            for k in params:
                m[k] = beta1 * m[k] + (1 - beta1) * grads[k]
                v[k] = beta2 * v[k] + (1 - beta2) * grads[k] ** 2
                mhat = m[k] / (1 - beta1**step_count)
                vhat = v[k] / (1 - beta2**step_count)
                params[k] = params[k] - cfg.learn_rate * mhat / (np.sqrt(vhat) + eps)
        prev_loss, loss = loss, loss_and_grad(params, x, onehot, cfg.l2)[0]
        _check_loss(loss)
        if abs(prev_loss - loss) <= PLATEAU_TOL * max(1.0, abs(loss)):
            plateau += 1
            if plateau >= PLATEAU_EPOCHS:
                break
        else:
            plateau = 0
    return params, loss, epoch


def train_mlp(descriptors, labels, cfg):
    """Train the network on (n, d, d) descriptors; deterministic given the seed."""
    x3 = as_descriptor_batch(descriptors)
    x = x3.reshape(x3.shape[0], -1)
    labels = np.asarray(labels)
    if labels.shape[0] != x.shape[0]:
        raise ContractError(
            f"got {labels.shape[0]} labels for {x.shape[0]} descriptors"
        )
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ContractError("training needs at least 2 classes")
    index = {c: i for i, c in enumerate(classes)}
    onehot = np.zeros((x.shape[0], len(classes)))
    onehot[np.arange(x.shape[0]), [index[l] for l in labels.tolist()]] = 1.0

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    params = init_params(x.shape[1], cfg.hidden_size, len(classes), rng)
    if cfg.batch_size is None and x.shape[0] <= FULL_BATCH_LIMIT:
        params, loss, epochs = _train_full_batch(params, x, onehot, cfg)
    else:
        params, loss, epochs = _train_adam(params, x, onehot, cfg, rng)
    return MlpModel(
        w_hidden=params["w_hidden"],
        b_hidden=params["b_hidden"],
        w_out=params["w_out"],
        b_out=params["b_out"],
        classes=classes,
        final_loss=loss,
        epochs=epochs,
    )


def predict_mlp(model, descriptors):
    """Class predictions of the full network, mostly for diagnostics."""
    x3 = as_descriptor_batch(descriptors)
    x = x3.reshape(x3.shape[0], -1)
    hidden = _sigmoid(x @ model.w_hidden.T + model.b_hidden)
    logits = hidden @ model.w_out.T + model.b_out
    return np.array(model.classes, dtype=object)[np.argmax(logits, axis=1)]


class PerceptronMap(_MapBase):
    """Feature map extracted from the hidden layer of a trained perceptron.

    ``fit(X, y)`` trains the network with hidden size ``nu`` and keeps the
    hidden weight matrix; ``transform`` is then the plain linear map
    W vec(X).  ``apply_sigmoid`` and ``keep_bias`` restore the squashing
    nonlinearity and the trained hidden bias for comparison runs.
    """

    kind = "perceptron"

    def __init__(self, nu=256, apply_sigmoid=False, keep_bias=False,
                 max_epochs=2000, learn_rate=0.5, batch_size=None, l2=0.0,
                 seed=0):
        self.nu = nu
        self.apply_sigmoid = apply_sigmoid
        self.keep_bias = keep_bias
        self.max_epochs = max_epochs
        self.learn_rate = learn_rate
        self.batch_size = batch_size
        self.l2 = l2
        self.seed = seed

    def fit(self, X, y=None):
        if y is None:
            raise ContractError("PerceptronMap.fit requires labels")
        x = as_descriptor_batch(X)
        cfg = MlpConfig(
            hidden_size=self.nu,
            max_epochs=self.max_epochs,
            learn_rate=self.learn_rate,
            batch_size=self.batch_size,
            l2=self.l2,
            seed=self.seed,
        )
        model = train_mlp(x, y, cfg)
        self.input_dim_ = x.shape[1]
        self.weights_ = model.w_hidden
        self.bias_ = model.b_hidden
        self.mlp_ = model
        return self

    def transform(self, X):
        self._require_fitted()
        x = as_descriptor_batch(X, self.input_dim_)
        v = x.reshape(x.shape[0], -1)
        z = v @ self.weights_.T
        if self.keep_bias:
            z = z + self.bias_
        if self.apply_sigmoid:
            z = _sigmoid(z)
        return z

    def to_dict(self):
        self._require_fitted()
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "input_dim": int(self.input_dim_),
            "nu": int(self.nu),
            "apply_sigmoid": bool(self.apply_sigmoid),
            "keep_bias": bool(self.keep_bias),
            "weights": self.weights_.tolist(),
            "bias": self.bias_.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ContractError(
                f"unsupported model format version {doc.get('format_version')!r}"
            )
        model = cls(
            nu=doc["nu"],
            apply_sigmoid=doc.get("apply_sigmoid", False),
            keep_bias=doc.get("keep_bias", False),
        )
        model.weights_ = np.asarray(doc["weights"], dtype=np.float64)
        model.bias_ = np.asarray(doc["bias"], dtype=np.float64)
        model.input_dim_ = int(doc["input_dim"])
        return model


def extract_feature_map(model, apply_sigmoid=False, keep_bias=False):
    """Wrap a trained :class:`MlpModel`'s hidden layer as a feature map."""
    dim2 = model.w_hidden.shape[1]
    dim = math.isqrt(dim2)
    if dim * dim != dim2:
        raise ContractError(
            f"hidden weights act on {dim2} inputs, not a vectorized square matrix"
        )
    fmap = PerceptronMap(
        nu=model.w_hidden.shape[0],
        apply_sigmoid=apply_sigmoid,
        keep_bias=keep_bias,
    )
    fmap.weights_ = model.w_hidden
    fmap.bias_ = model.b_hidden
    fmap.input_dim_ = dim
    fmap.mlp_ = model
    return fmap


def select_hidden_size(descriptors, labels, grid=(32, 64, 128, 256, 512, 1024),
                       **cfg_kwargs):
    """Pick the hidden size with the lowest final training objective."""
    losses = {}
    for size in grid:
        model = train_mlp(descriptors, labels, MlpConfig(hidden_size=size, **cfg_kwargs))
        losses[size] = model.final_loss
    best = min(losses, key=lambda s: (losses[s], s))
    return best, losses


MAP_KINDS["perceptron"] = PerceptronMap
